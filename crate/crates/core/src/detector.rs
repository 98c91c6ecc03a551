//! One-class fault detection: a regression network trained to output the
//! healthy target on healthy inputs, a percentile-calibrated threshold and
//! the resulting similarity score.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{Activation, Adam, AdamConfig, DenseNet, Matrix, NnError, TrainConfig, WeightsDocument};

/// Regression target for healthy samples.
pub const HEALTHY_TARGET: f64 = 1.0;
pub const DEFAULT_PERCENTILE: f64 = 99.9;
pub const DEFAULT_MARGIN: f64 = 1.5;

/// Layer sizes of the latent one-class network for latent width `d`.
pub fn one_class_layers(latent_dim: usize) -> Vec<usize> {
    vec![latent_dim, 20, 100, 1]
}

/// Layer sizes of the supervised feed-forward detector on raw inputs; the
/// 8-unit hidden layer (index [`SUPERVISED_LATENT_LAYER`]) is its latent space.
pub fn supervised_layers(input_dim: usize) -> Vec<usize> {
    vec![input_dim, 20, 8, 20, 100, 1]
}

pub const SUPERVISED_LATENT_LAYER: usize = 1;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("invalid detector setting: {0}")]
    InvalidConfig(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("validation errors are all zero; the score threshold would be zero")]
    DegenerateThreshold,
}

pub type Result<T> = std::result::Result<T, DetectorError>;

/// Per-dimension min/max map onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl LatentScaler {
    pub fn fit(latents: &Matrix) -> Result<Self> {
        if latents.is_empty() {
            return Err(DetectorError::Empty("latent set"));
        }
        let mut min = vec![f64::INFINITY; latents.cols()];
        let mut max = vec![f64::NEG_INFINITY; latents.cols()];
        for row in latents.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Affine map without clipping; a constant dimension maps to 0.5.
    pub fn transform(&self, latents: &Matrix) -> Result<Matrix> {
        if latents.cols() != self.dim() {
            return Err(NnError::ShapeMismatch {
                context: "latent scaler",
                expected: self.dim(),
                found: latents.cols(),
            }
            .into());
        }
        let mut out = latents.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                let span = self.max[j] - self.min[j];
                *v = if span > 0.0 { (*v - self.min[j]) / span } else { 0.5 };
            }
        }
        Ok(out)
    }
}

/// Nearest-rank percentile: the smallest sample with at least `p` percent of
/// the sample at or below it. At most `(100 - p)` percent of the values lie
/// strictly above the result, for any sample size.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=100.0).contains(&p) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Per-epoch mean squared error against the healthy target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneClassEpoch {
    pub epoch: usize,
    pub mse: f64,
}

/// Mini-batch Adam regression of `net` onto the constant healthy target.
pub fn train_one_class(
    mut net: DenseNet,
    inputs: &Matrix,
    cfg: &TrainConfig,
) -> Result<(DenseNet, Vec<OneClassEpoch>)> {
    cfg.validate()?;
    if net.output_dim() != 1 {
        return Err(DetectorError::InvalidConfig(format!(
            "one-class network must have a single output, found {}",
            net.output_dim()
        )));
    }
    if inputs.is_empty() {
        return Err(DetectorError::Empty("one-class training set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(&net, AdamConfig::with_learning_rate(cfg.learning_rate));
    let mut order: Vec<usize> = (0..inputs.rows()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = inputs.select_rows(chunk);
            let (out, cache) = net.forward(&batch)?;
            let scale = 2.0 / chunk.len() as f64;
            let mut d_out = out.clone();
            for v in d_out.as_mut_slice() {
                let e = *v - HEALTHY_TARGET;
                sse += e * e;
                *v = scale * e;
            }
            if !sse.is_finite() {
                return Err(DetectorError::Diverged(format!("epoch {epoch}: non-finite one-class loss")));
            }
            let grads = net.backward(&cache, &d_out)?;
            opt.step(&mut net, &grads)?;
        }
        history.push(OneClassEpoch {
            epoch,
            mse: sse / inputs.rows() as f64,
        });
    }
    Ok((net, history))
}

/// `|T - G(x)|` per row.
pub fn target_errors(net: &DenseNet, inputs: &Matrix) -> Result<Vec<f64>> {
    let out = net.predict(inputs)?;
    Ok(out.as_slice().iter().map(|g| (HEALTHY_TARGET - g).abs()).collect())
}

/// `xi = margin * P_p(|T - G(S_V)|)`.
pub fn calibrate_threshold(net: &DenseNet, validation: &Matrix, p: f64, margin: f64) -> Result<f64> {
    if validation.is_empty() {
        return Err(DetectorError::Empty("validation set"));
    }
    threshold_from_errors(&target_errors(net, validation)?, p, margin)
}

pub fn threshold_from_errors(errors: &[f64], p: f64, margin: f64) -> Result<f64> {
    if !(margin.is_finite() && margin > 0.0) {
        return Err(DetectorError::InvalidConfig(format!("margin must be positive, got {margin}")));
    }
    let q = percentile(errors, p).ok_or_else(|| {
        if errors.is_empty() {
            DetectorError::Empty("validation set")
        } else {
            DetectorError::InvalidConfig(format!("percentile must lie in [0, 100], got {p}"))
        }
    })?;
    let xi = margin * q;
    if xi > 0.0 && xi.is_finite() {
        Ok(xi)
    } else {
        Err(DetectorError::DegenerateThreshold)
    }
}

/// Similarity score `|T - G| / xi`.
pub fn score(error: f64, threshold: f64) -> f64 {
    error / threshold
}

/// Healthy (`true`) iff the score is strictly below one.
pub fn is_healthy(score: f64) -> bool {
    score < 1.0
}

pub fn detect(scores: &[f64]) -> Vec<bool> {
    scores.iter().map(|&s| is_healthy(s)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub score: f64,
    pub healthy: bool,
}

/// Calibrated detector: optional latent scaler, one-class network and threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct OneClassModel {
    pub net: DenseNet,
    pub scaler: Option<LatentScaler>,
    pub threshold: f64,
    pub percentile: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSettings {
    pub percentile: f64,
    pub margin: f64,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self {
            percentile: DEFAULT_PERCENTILE,
            margin: DEFAULT_MARGIN,
        }
    }
}

impl OneClassModel {
    /// Fits the scaler on `train` latents (when `scale` is set), trains `G`
    /// from `init`, then calibrates on `validation`.
    pub fn fit(
        init: DenseNet,
        train: &Matrix,
        validation: &Matrix,
        scale: bool,
        cfg: &TrainConfig,
        settings: DetectorSettings,
    ) -> Result<(Self, Vec<OneClassEpoch>)> {
        let scaler = if scale { Some(LatentScaler::fit(train)?) } else { None };
        let prepare = |m: &Matrix| -> Result<Matrix> {
            match &scaler {
                Some(s) => s.transform(m),
                None => Ok(m.clone()),
            }
        };
        let (net, history) = train_one_class(init, &prepare(train)?, cfg)?;
        let threshold = calibrate_threshold(&net, &prepare(validation)?, settings.percentile, settings.margin)?;
        Ok((
            Self {
                net,
                scaler,
                threshold,
                percentile: settings.percentile,
                margin: settings.margin,
            },
            history,
        ))
    }

    pub fn errors(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        match &self.scaler {
            Some(s) => target_errors(&self.net, &s.transform(inputs)?),
            None => target_errors(&self.net, inputs),
        }
    }

    pub fn scores(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        Ok(self.errors(inputs)?.into_iter().map(|e| score(e, self.threshold)).collect())
    }

    pub fn detect(&self, inputs: &Matrix) -> Result<Vec<Detection>> {
        Ok(self
            .scores(inputs)?
            .into_iter()
            .map(|s| Detection {
                score: s,
                healthy: is_healthy(s),
            })
            .collect())
    }

    pub fn to_document(&self) -> OneClassDocument {
        OneClassDocument {
            net: self.net.to_document(),
            scaler: self.scaler.clone(),
            threshold: self.threshold,
            percentile: self.percentile,
            margin: self.margin,
        }
    }

    pub fn from_document(doc: &OneClassDocument) -> Result<Self> {
        if !(doc.threshold > 0.0 && doc.threshold.is_finite()) {
            return Err(DetectorError::DegenerateThreshold);
        }
        Ok(Self {
            net: DenseNet::from_document(&doc.net)?,
            scaler: doc.scaler.clone(),
            threshold: doc.threshold,
            percentile: doc.percentile,
            margin: doc.margin,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneClassDocument {
    pub net: WeightsDocument,
    pub scaler: Option<LatentScaler>,
    pub threshold: f64,
    pub percentile: f64,
    pub margin: f64,
}

/// Xavier-initialized one-class network with tanh hidden layers and a linear output.
pub fn new_one_class_net<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<DenseNet> {
    Ok(DenseNet::new(sizes, Activation::Tanh, Activation::Linear, rng)?)
}
