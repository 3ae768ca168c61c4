use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_k, Method, SelectionReport};
use crate::dataio::FeatureMatrix;
use crate::nn::Activation;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderConfig {
    /// Bottleneck width, strictly below the feature count. `None` picks
    /// `max(1, F / 2)`.
    pub hidden_width: Option<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Rows beyond this are thinned by an even stride before fitting.
    pub max_rows: usize,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            hidden_width: None,
            epochs: 300,
            learning_rate: 0.01,
            max_rows: 2000,
            seed: 0,
        }
    }
}

/// One sigmoid hidden layer, linear reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub features: usize,
    pub hidden: usize,
    /// `hidden × features`, row-major.
    pub encoder: Vec<f64>,
    pub encoder_bias: Vec<f64>,
    /// `features × hidden`, row-major.
    pub decoder: Vec<f64>,
    pub decoder_bias: Vec<f64>,
}

impl AutoencoderModel {
    fn init(features: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let s = (6.0 / (features + hidden) as f64).sqrt();
        let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-s..=s)).collect::<Vec<_>>();
        Self {
            features,
            hidden,
            encoder: draw(hidden * features),
            encoder_bias: vec![0.0; hidden],
            decoder: draw(features * hidden),
            decoder_bias: vec![0.0; features],
        }
    }

    fn encode(&self, x: &[f64], z: &mut [f64]) {
        for (j, zj) in z.iter_mut().enumerate() {
            let w = &self.encoder[j * self.features..(j + 1) * self.features];
            let a = self.encoder_bias[j] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            *zj = Activation::Sigmoid.apply(a);
        }
    }

    fn decode(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let w = &self.decoder[i * self.hidden..(i + 1) * self.hidden];
            *o = self.decoder_bias[i] + w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.hidden];
        let mut out = vec![0.0; self.features];
        self.encode(x, &mut z);
        self.decode(&z, &mut out);
        out
    }

    /// Mean squared reconstruction error of `inputs` against `reference`
    /// (both row-major with `features` columns), averaged over all cells.
    pub fn reconstruction_error(&self, inputs: &[f64], reference: &[f64]) -> f64 {
        let f = self.features;
        let rows = inputs.len() / f;
        let mut z = vec![0.0; self.hidden];
        let mut out = vec![0.0; f];
        let mut total = 0.0;
        for r in 0..rows {
            self.encode(&inputs[r * f..(r + 1) * f], &mut z);
            self.decode(&z, &mut out);
            total += out
                .iter()
                .zip(&reference[r * f..(r + 1) * f])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        total / (rows * f).max(1) as f64
    }

    /// Full-batch training on the reconstruction MSE with Adam steps.
    pub fn fit(data: &[f64], features: usize, config: &AutoencoderConfig) -> Result<Self> {
        let hidden = config.hidden_width.unwrap_or((features / 2).max(1));
        if hidden == 0 || (features > 1 && hidden >= features) {
            return Err(Error::config(format!(
                "autoencoder width {hidden} must lie in [1, {})",
                features
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut model = Self::init(features, hidden, &mut rng);
        let rows = data.len() / features;
        let scale = 2.0 / (rows * features) as f64;
        let n_params = model.encoder.len() + hidden + model.decoder.len() + features;
        let mut m = vec![0.0; n_params];
        let mut v = vec![0.0; n_params];
        let (b1, b2, eps) = (0.9_f64, 0.999_f64, 1e-8);

        let mut z = vec![0.0; hidden];
        let mut out = vec![0.0; features];
        let mut dz = vec![0.0; hidden];
        for epoch in 0..config.epochs {
            let mut grad = vec![0.0; n_params];
            let (g_enc, rest) = grad.split_at_mut(model.encoder.len());
            let (g_eb, rest) = rest.split_at_mut(hidden);
            let (g_dec, g_db) = rest.split_at_mut(model.decoder.len());
            for r in 0..rows {
                let x = &data[r * features..(r + 1) * features];
                model.encode(x, &mut z);
                model.decode(&z, &mut out);
                dz.iter_mut().for_each(|d| *d = 0.0);
                for i in 0..features {
                    let d = scale * (out[i] - x[i]);
                    g_db[i] += d;
                    for j in 0..hidden {
                        g_dec[i * hidden + j] += d * z[j];
                        dz[j] += d * model.decoder[i * hidden + j];
                    }
                }
                for j in 0..hidden {
                    let da = dz[j] * z[j] * (1.0 - z[j]);
                    g_eb[j] += da;
                    for (g, xi) in g_enc[j * features..(j + 1) * features].iter_mut().zip(x) {
                        *g += da * xi;
                    }
                }
            }
            if !grad.iter().all(|g| g.is_finite()) {
                return Err(Error::Diverged { epoch: epoch + 1 });
            }
            let t = (epoch + 1) as i32;
            let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
            let params = model
                .encoder
                .iter_mut()
                .chain(model.encoder_bias.iter_mut())
                .chain(model.decoder.iter_mut())
                .chain(model.decoder_bias.iter_mut());
            for (((p, g), mi), vi) in params.zip(&grad).zip(&mut m).zip(&mut v) {
                *mi = b1 * *mi + (1.0 - b1) * g;
                *vi = b2 * *vi + (1.0 - b2) * g * g;
                *p -= config.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + eps);
            }
        }
        Ok(model)
    }

    /// Increase in reconstruction error when column `j` is shuffled, one
    /// score per feature, floored at zero. The shuffle order is drawn once
    /// from `seed` and shared by all columns.
    pub fn permutation_importance(&self, data: &[f64], seed: u64) -> Vec<f64> {
        let f = self.features;
        let rows = data.len() / f;
        let base = self.reconstruction_error(data, data);
        let mut perm: Vec<usize> = (0..rows).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        (0..f)
            .map(|j| {
                let mut shuffled = data.to_vec();
                for (r, &src) in perm.iter().enumerate() {
                    shuffled[r * f + j] = data[src * f + j];
                }
                (self.reconstruction_error(&shuffled, data) - base).max(0.0)
            })
            .collect()
    }
}

fn thin_rows(matrix: &FeatureMatrix, max_rows: usize) -> Vec<f64> {
    let rows = matrix.rows();
    if rows <= max_rows || max_rows == 0 {
        return matrix.values().to_vec();
    }
    (0..max_rows)
        .flat_map(|i| matrix.row(i * rows / max_rows).iter().copied())
        .collect()
}

/// Unsupervised: ranks features by how much the autoencoder's
/// reconstruction suffers when each one is shuffled.
pub fn autoencoder_select(matrix: &FeatureMatrix, k: usize, config: &AutoencoderConfig) -> Result<SelectionReport> {
    check_k(k, matrix.cols())?;
    if matrix.rows() < 3 {
        return Err(Error::data(None, "feature selection needs at least 3 rows"));
    }
    let data = thin_rows(matrix, config.max_rows);
    let model = AutoencoderModel::fit(&data, matrix.cols(), config)?;
    let scores = model.permutation_importance(&data, config.seed);
    SelectionReport::from_scores(Method::Autoencoder, scores, k, matrix.target_index())
}
