use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use hybrid_ids::dataio::{parse_csv, EncodingSpec, NormalizationParams};
use hybrid_ids::detect::{detect_stream, parse_record, ThresholdModel, StreamState};
use hybrid_ids::featsel::SelectionReport;
use hybrid_ids::nn::{Architecture, HybridNetwork};
use hybrid_ids::pipeline::{
    self, evaluate_model, matrix_from_table, matrix_to_csv, restore_prepared, Prepared, PreparedInfo, RunConfig,
};
use hybrid_ids::train::{grad_check_with, gradcheck_probe, Checkpoint};
use hybrid_ids::{Error, Result};
use serde::Serialize;

use crate::args::{DetectArgs, GradcheckArgs, RunArgs};
use crate::rundir::{self, RunDir};

fn out_dir(config: &RunConfig) -> &Path {
    config.out.as_deref().expect("resolve() requires out")
}

fn load_raw(config: &RunConfig, run: &mut RunDir) -> Result<hybrid_ids::dataio::RawTable> {
    let path = config
        .data
        .as_deref()
        .ok_or_else(|| Error::Config("--data (or \"data\" in the config) is required".into()))?;
    let bytes = rundir::read_bytes(path)?;
    run.record_input(path, &bytes);
    parse_csv(bytes.as_slice(), config.has_header).map_err(|e| match e {
        Error::Data { line, message } => Error::Data {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn load_prepared(run: &RunDir) -> Result<Prepared> {
    let info: PreparedInfo = rundir::read_json(&run.require(rundir::PREPARED_INFO)?)?;
    let encoding: EncodingSpec = rundir::read_json(&run.require(rundir::ENCODING)?)?;
    let normalization: NormalizationParams = rundir::read_json(&run.require(rundir::NORMALIZATION)?)?;
    let bytes = rundir::read_bytes(&run.require(rundir::PREPARED)?)?;
    let table = parse_csv(bytes.as_slice(), true)?;
    let matrix = matrix_from_table(&table, info.target_feature)?;
    restore_prepared(encoding, normalization, matrix, &info)
}

fn check_prepared_matches(config: &RunConfig, prepared: &Prepared) -> Result<()> {
    if config.window_length != prepared.window_length || config.train_fraction != prepared.train_fraction {
        return Err(Error::Config(format!(
            "run directory was prepared with window_length {} and train_fraction {}; rerun prep to change them",
            prepared.window_length, prepared.train_fraction
        )));
    }
    Ok(())
}

/// The stored selection, or every feature when `select` was skipped.
fn load_selection(run: &RunDir, features: usize) -> Result<SelectionReport> {
    let path = run.path(rundir::SELECTION);
    if path.exists() {
        let report: SelectionReport = rundir::read_json(&path)?;
        if report.selected.iter().any(|&c| c >= features) {
            return Err(Error::Shape(format!("{} selects features beyond {features}", path.display())));
        }
        Ok(report)
    } else {
        Ok(SelectionReport::identity(features))
    }
}

fn load_network(run: &RunDir) -> Result<HybridNetwork> {
    let checkpoint: Checkpoint = rundir::read_json(&run.require(rundir::CHECKPOINT)?)?;
    HybridNetwork::from_document(&checkpoint.network)
}

pub fn prep(args: &RunArgs) -> Result<()> {
    let config = args.resolve()?;
    let writes = [
        rundir::CONFIG,
        rundir::ENCODING,
        rundir::NORMALIZATION,
        rundir::PREPARED,
        rundir::PREPARED_INFO,
    ];
    let mut run = RunDir::open(out_dir(&config), "prep", &writes, args.overwrite)?;
    let table = load_raw(&config, &mut run)?;
    let prepared = pipeline::prepare(&table, &config)?;
    let info = prepared.info();
    run.stage_json(rundir::CONFIG, &config)?;
    run.stage_json(rundir::ENCODING, &prepared.encoding)?;
    run.stage_json(rundir::NORMALIZATION, &prepared.normalization)?;
    run.stage(rundir::PREPARED, matrix_to_csv(&prepared.matrix));
    run.stage_json(rundir::PREPARED_INFO, &info)?;
    run.commit(&config)?;
    println!(
        "prepared {} rows x {} features ({} categorical); {} windows, {} for training",
        info.rows,
        info.features,
        prepared.encoding.categorical_columns.len(),
        info.samples,
        info.train_samples
    );
    Ok(())
}

pub fn select(args: &RunArgs) -> Result<()> {
    let config = args.resolve()?;
    let run = RunDir::open(out_dir(&config), "select", &[rundir::SELECTION], args.overwrite)?;
    let prepared = load_prepared(&run)?;
    check_prepared_matches(&config, &prepared)?;
    let report = pipeline::select_features(&prepared, &config)?;
    let names = prepared.matrix.feature_names();
    println!(
        "{} kept {} of {} features: {}",
        report.method,
        report.selected.len(),
        names.len(),
        report.selected.iter().map(|&c| names[c].as_str()).collect::<Vec<_>>().join(",")
    );
    let mut run = run;
    run.stage_json(rundir::SELECTION, &report)?;
    run.commit(&config)
}

pub fn train(args: &RunArgs) -> Result<()> {
    let config = args.resolve()?;
    let writes = [rundir::CHECKPOINT, rundir::LOSS, rundir::THRESHOLD];
    let mut run = RunDir::open(out_dir(&config), "train", &writes, args.overwrite)?;
    let prepared = load_prepared(&run)?;
    check_prepared_matches(&config, &prepared)?;
    let selection = load_selection(&run, prepared.matrix.cols())?;
    let (train_set, _) = prepared.datasets(&selection.selected)?;
    let trained = pipeline::train_model(&config, &train_set)?;
    run.stage_json(rundir::CHECKPOINT, &trained.checkpoint)?;
    run.stage(rundir::LOSS, trained.report.to_csv(config.record_wall_time));
    run.stage_json(rundir::THRESHOLD, &trained.threshold)?;
    run.commit(&config)?;
    match trained.report.train_loss.last() {
        Some(loss) => println!(
            "trained {} epochs on {} windows; final train MSE {loss:.6e}; threshold {:.6e}",
            trained.report.epochs(),
            train_set.len(),
            trained.threshold.threshold
        ),
        None => println!("0 epochs: checkpoint holds the initial weights"),
    }
    Ok(())
}

pub fn eval(args: &RunArgs) -> Result<()> {
    let config = args.resolve()?;
    let mut run = RunDir::open(out_dir(&config), "eval", &[rundir::METRICS], args.overwrite)?;
    let net = load_network(&run)?;
    let prepared = load_prepared(&run)?;
    check_prepared_matches(&config, &prepared)?;
    let selection = load_selection(&run, prepared.matrix.cols())?;
    let (_, test_set) = prepared.datasets(&selection.selected)?;
    let evaluation = evaluate_model(&net, &test_set, prepared.target_range())?;
    run.stage_json(rundir::METRICS, &evaluation)?;
    run.commit(&config)?;
    println!(
        "test windows {}: hybrid mae {:.6e} rmse {:.6e}; persistence mae {:.6e} rmse {:.6e}",
        evaluation.hybrid.n,
        evaluation.hybrid.mae,
        evaluation.hybrid.rmse,
        evaluation.persistence.mae,
        evaluation.persistence.rmse
    );
    Ok(())
}

pub fn sweep(args: &RunArgs) -> Result<()> {
    let config = args.resolve()?;
    let mut run = RunDir::open(out_dir(&config), "sweep", &[rundir::SWEEP], args.overwrite)?;
    let table = load_raw(&config, &mut run)?;
    let prepared = pipeline::prepare(&table, &config)?;
    let rows = pipeline::sweep(&prepared, &config)?;
    let csv = pipeline::sweep_csv(&rows);
    print!("{csv}");
    if !run.path(rundir::CONFIG).exists() {
        run.stage_json(rundir::CONFIG, &config)?;
    }
    run.stage(rundir::SWEEP, csv);
    run.commit(&config)
}

#[derive(Serialize)]
struct LineError {
    line: usize,
    error: String,
}

#[derive(Serialize)]
struct DetectSummary {
    records: usize,
    verdicts: usize,
    anomalies: usize,
    anomaly_rate: f64,
    errors: usize,
    p99_latency_micros: u64,
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn detect(args: &DetectArgs) -> Result<()> {
    let config = args.run.resolve()?;
    let run = RunDir::open(out_dir(&config), "detect", &[], false)?;
    let net = load_network(&run)?;
    let threshold: ThresholdModel = rundir::read_json(&run.require(rundir::THRESHOLD)?)?;
    let encoding: EncodingSpec = rundir::read_json(&run.require(rundir::ENCODING)?)?;
    let normalization: NormalizationParams = rundir::read_json(&run.require(rundir::NORMALIZATION)?)?;
    let selection = load_selection(&run, normalization.features())?;
    let transform = hybrid_ids::detect::RecordTransform::new(encoding, normalization, selection.selected)?;
    let info: PreparedInfo = rundir::read_json(&run.require(rundir::PREPARED_INFO)?)?;
    let mut state = StreamState::new(&net, &transform, info.window_length)?;

    let reader: Box<dyn BufRead> = if args.input == "-" {
        Box::new(BufReader::new(io::stdin().lock()))
    } else {
        let path = Path::new(&args.input);
        Box::new(BufReader::new(File::open(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?))
    };
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let write_err = |e: io::Error| Error::Io {
        path: "<stdout>".into(),
        source: e,
    };

    let mut latencies = Vec::new();
    let (mut records, mut anomalies, mut errors) = (0usize, 0usize, 0usize);
    for (i, line) in reader.lines().enumerate() {
        let number = i + 1;
        let line = line.map_err(|e| Error::Io {
            path: args.input.clone().into(),
            source: e,
        })?;
        if (config.has_header && i == 0) || line.trim().is_empty() {
            continue;
        }
        records += 1;
        let outcome = parse_record(&line).and_then(|cells| detect_stream(&mut state, &threshold, &cells));
        match outcome {
            Ok(Some(v)) => {
                anomalies += usize::from(v.is_anomaly);
                latencies.push(v.latency_micros);
                writeln!(out, "{}", serde_json::to_string(&v)?).map_err(write_err)?;
            }
            Ok(None) => {}
            Err(e) => {
                errors += 1;
                let err = LineError {
                    line: number,
                    error: e.to_string(),
                };
                writeln!(out, "{}", serde_json::to_string(&err)?).map_err(write_err)?;
            }
        }
    }
    out.flush().map_err(write_err)?;
    latencies.sort_unstable();
    let summary = DetectSummary {
        records,
        verdicts: latencies.len(),
        anomalies,
        anomaly_rate: if latencies.is_empty() {
            0.0
        } else {
            anomalies as f64 / latencies.len() as f64
        },
        errors,
        p99_latency_micros: percentile(&latencies, 99.0),
    };
    eprintln!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

/// Returns whether every seed passed.
pub fn gradcheck(args: &GradcheckArgs) -> Result<bool> {
    let arch = Architecture {
        input_width: args.features,
        indrnn_widths: args.indrnn_widths.clone(),
        lstm_width: args.lstm_width,
        activation: Default::default(),
        candidate_tanh: false,
        u_max: hybrid_ids::nn::default_u_max(args.window_length.max(1)),
    };
    arch.validate()?;
    if args.window_length == 0 || args.seeds == 0 {
        return Err(Error::Config("window_length and seeds must be positive".into()));
    }
    let mut worst_overall: f64 = 0.0;
    for seed in args.seed..args.seed + args.seeds {
        let (net, window, target) = gradcheck_probe(&arch, args.window_length, seed, 1e-4)?;
        let report = grad_check_with(&net, &window, target, args.epsilon, args.corrupt.as_deref())?;
        println!("seed {seed}: max relative error {:.3e}", report.max_relative_error);
        println!("  {:<14} {:>12} {:>7} {:>14} {:>14}", "tensor", "rel_error", "index", "analytic", "numeric");
        for t in &report.tensors {
            println!(
                "  {:<14} {:>12.3e} {:>7} {:>14.6e} {:>14.6e}",
                t.name, t.max_relative_error, t.worst_index, t.analytic, t.numeric
            );
        }
        worst_overall = worst_overall.max(report.max_relative_error);
    }
    let pass = worst_overall < args.tolerance;
    println!(
        "{}: max relative error {worst_overall:.3e} (tolerance {:.1e})",
        if pass { "PASS" } else { "FAIL" },
        args.tolerance
    );
    Ok(pass)
}
