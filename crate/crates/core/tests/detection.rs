use hybrid_ids::dataio::{make_windows, parse_csv, split_chronological, FeatureMatrix, SplitSpec};
use hybrid_ids::detect::{
    detect_batch, detect_stream, evaluate, fit_threshold, parse_record, persistence_baseline, ThresholdModel,
    StreamState,
};
use hybrid_ids::nn::{init_network, Architecture};
use hybrid_ids::pipeline::{fit_residual_threshold, prepare, select_with, train_model, RunConfig};
use hybrid_ids::featsel::Method;
use hybrid_ids::train::{train, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn small_arch(features: usize, window: usize) -> Architecture {
    Architecture {
        indrnn_widths: vec![8],
        lstm_width: 8,
        ..Architecture::default_for(features, window)
    }
}

fn noisy_sine(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).unwrap();
    (0..n)
        .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 50.0).sin() + noise.sample(&mut rng))
        .collect()
}

#[test]
fn metrics_match_a_separate_accumulation() {
    let series = noisy_sine(120, 1);
    let ds = make_windows(&FeatureMatrix::from_columns(&[series], 0).unwrap(), 6).unwrap();
    let net = init_network(&small_arch(1, 6), 2).unwrap();
    let m = evaluate(&net, &ds).unwrap();
    // reverse-order accumulation, two passes
    let errs: Vec<f64> = (0..ds.len()).rev().map(|i| net.forward(ds.window(i)).unwrap() - ds.target(i)).collect();
    let mae = errs.iter().map(|e| e.abs()).rev().sum::<f64>() / errs.len() as f64;
    let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    assert!((m.mae - mae).abs() < 1e-12 && (m.rmse - rmse).abs() < 1e-12);

    let p = persistence_baseline(&ds).unwrap();
    let pm = (0..ds.len())
        .map(|i| (ds.window(i)[5] - ds.target(i)).abs())
        .sum::<f64>()
        / ds.len() as f64;
    assert!((p.mae - pm).abs() < 1e-12);
}

#[test]
fn constant_prediction_equal_to_targets_scores_zero() {
    let ds = make_windows(&FeatureMatrix::from_columns(&[vec![0.25; 20]], 0).unwrap(), 4).unwrap();
    let mut net = init_network(&small_arch(1, 4), 0).unwrap();
    net.head.w = hybrid_ids::nn::Tensor::zeros(1, 8);
    net.head.b = hybrid_ids::nn::Tensor::column(vec![0.25]);
    let m = evaluate(&net, &ds).unwrap();
    assert_eq!((m.mae, m.rmse), (0.0, 0.0));
}

#[test]
fn planted_spike_is_flagged_and_clean_points_mostly_are_not() {
    let mut series = noisy_sine(700, 7);
    let last = series.len() - 1;
    series[last] += 10.0 * 0.05;
    let window = 10;
    let ds = make_windows(&FeatureMatrix::from_columns(&[series], 0).unwrap(), window).unwrap();
    let (train_set, test_set) = split_chronological(&ds, SplitSpec::new(0.8).unwrap()).unwrap();
    let cfg = TrainConfig {
        epochs: 40,
        batch_size: 32,
        learning_rate: 3e-3,
        ..Default::default()
    };
    let (net, _) = train(init_network(&small_arch(1, window), 3).unwrap(), &train_set, &cfg).unwrap();
    let threshold = fit_residual_threshold(&net, &train_set, 3.0).unwrap();
    let verdicts = detect_batch(&net, &threshold, &test_set).unwrap();

    let spike = verdicts.last().unwrap();
    assert_eq!(spike.step, last);
    assert!(spike.is_anomaly, "{spike:?} vs {threshold:?}");
    let clean = &verdicts[..verdicts.len() - 1];
    let flagged = clean.iter().filter(|v| v.is_anomaly).count();
    assert!(flagged as f64 <= 0.05 * clean.len() as f64, "{flagged} of {}", clean.len());

    // soundness against independently recomputed errors
    for (i, v) in verdicts.iter().enumerate() {
        let err = (net.forward(test_set.window(i)).unwrap() - test_set.target(i)).abs();
        assert_eq!(v.abs_error, err);
        assert_eq!(v.is_anomaly, err > threshold.threshold);
    }
}

#[test]
fn extreme_thresholds() {
    let ds = make_windows(&FeatureMatrix::from_columns(&[noisy_sine(60, 2)], 0).unwrap(), 5).unwrap();
    let net = init_network(&small_arch(1, 5), 1).unwrap();
    let none = detect_batch(&net, &ThresholdModel::fixed(f64::MAX), &ds).unwrap();
    assert!(none.iter().all(|v| !v.is_anomaly));
    let all = detect_batch(&net, &ThresholdModel::fixed(0.0), &ds).unwrap();
    assert!(all.iter().all(|v| v.is_anomaly == (v.abs_error > 0.0)));
    let t = fit_threshold(&[0.0, 2.0], 1.0).unwrap();
    assert_eq!(t.threshold, 2.0);
}

/// Raw CSV with a categorical column and a header.
fn raw_records(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("kind,bytes,packets,rate\n");
    for t in 0..n {
        let kind = ["web", "dns", "mail"][rng.random_range(0..3)];
        let bytes = 400.0 + 300.0 * (t as f64 / 9.0).sin() + rng.random_range(-20.0..20.0);
        text.push_str(&format!(
            "{kind},{bytes:.3},{},{:.4}\n",
            rng.random_range(1..40),
            rng.random_range(0.0..1.0)
        ));
    }
    text
}

#[test]
fn streaming_replay_equals_batch_detection() {
    let text = raw_records(500, 3);
    let table = parse_csv(text.as_bytes(), true).unwrap();
    let mut config = RunConfig {
        target: "bytes".into(),
        exclude: vec![],
        window_length: 6,
        ..Default::default()
    };
    config.architecture.indrnn_widths = vec![6];
    config.architecture.lstm_width = 6;
    config.train.epochs = 3;
    config.train.batch_size = 32;
    config.validate().unwrap();
    let prepared = prepare(&table, &config).unwrap();
    let selection = select_with(&prepared, Method::Filter, 3, 0).unwrap();
    let (train_set, _) = prepared.datasets(&selection.selected).unwrap();
    let trained = train_model(&config, &train_set).unwrap();

    let sliced = prepared.matrix.select_columns(&selection.selected).unwrap();
    let all = make_windows(&sliced, config.window_length).unwrap();
    let batch = detect_batch(&trained.network, &trained.threshold, &all).unwrap();

    let transform = prepared.transform(&selection.selected).unwrap();
    let mut state = StreamState::new(&trained.network, &transform, config.window_length).unwrap();
    let mut streamed = Vec::new();
    for (i, line) in text.lines().skip(1).enumerate() {
        let cells = parse_record(line).unwrap();
        let out = detect_stream(&mut state, &trained.threshold, &cells).unwrap();
        assert_eq!(out.is_some(), i >= config.window_length);
        streamed.extend(out);
        if i == 250 {
            // a malformed record is reported and leaves the state untouched
            let bad = parse_record("web,not-a-number,3,0.5").unwrap();
            assert!(detect_stream(&mut state, &trained.threshold, &bad).is_err());
            assert!(detect_stream(&mut state, &trained.threshold, &bad[..2]).is_err());
        }
    }
    assert_eq!(streamed.len(), batch.len());
    for (s, b) in streamed.iter().zip(&batch) {
        assert!(s.same_outcome(b), "{s:?} vs {b:?}");
    }
}
