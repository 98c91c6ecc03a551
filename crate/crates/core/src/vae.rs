//! Encoder/decoder models, reparameterized sampling, the loss family and the
//! training loop shared by every autoencoder variant of the model zoo.
//!
//! The general objective minimized here is
//!
//! ```text
//! J = recon(mixed) + beta * mean KL(mixed) + gamma * mean KL(labeled)
//! ```
//!
//! where `recon` is the per-channel mean squared error averaged over the
//! batch and `KL` is the analytic divergence of `N(mu, sigma^2 I)` from the
//! unit Gaussian prior. The plain autoencoder drops both KL terms and the
//! sampling step. Every zoo variant is this objective with a particular
//! `(beta, gamma, sampling, pool)` setting; see [`Variant::embedding_config`].

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{Activation, Adam, AdamConfig, DenseNet, Gradients, Matrix, NnError, TrainConfig, WeightsDocument};

/// Bound applied to the encoder's `log sigma^2` head.
pub const LOG_VAR_CLAMP: f64 = 20.0;

/// Default hidden width of encoder and decoder.
pub const HIDDEN_UNITS: usize = 20;

/// Default latent dimension `d`.
pub const LATENT_DIM: usize = 8;

#[derive(Debug, Error)]
pub enum VaeError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("non-finite value in model input")]
    NonFiniteInput,
    #[error("training pool is empty")]
    EmptyTrainingPool,
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, VaeError>;

/// How a latent sample is drawn from `(mu, log sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SamplingMode {
    /// `z = mu + sigma * eps`
    Standard,
    /// `z = mu + alpha * log(sigma^2) * eps`; the noise vanishes where the
    /// posterior scale matches the prior.
    Adaptive { alpha: f64 },
}

impl SamplingMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplingMode::Adaptive { alpha } if !(alpha.is_finite() && alpha > 0.0) => Err(
                VaeError::InvalidConfig(format!("adaptive alpha must be positive, got {alpha}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Deterministic autoencoder: reconstruction only.
    Reconstruction,
    /// Gaussian encoder with KL regularization.
    Variational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingPool {
    /// Healthy labeled rows only.
    Labeled,
    /// Healthy labeled rows plus the unlabeled set.
    LabeledAndUnlabeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub objective: Objective,
    pub beta: f64,
    pub gamma: f64,
    pub pool: TrainingPool,
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(VaeError::InvalidConfig(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(VaeError::InvalidConfig(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.objective == Objective::Reconstruction && (self.beta != 0.0 || self.gamma != 0.0) {
            return Err(VaeError::InvalidConfig(
                "a plain autoencoder has no KL terms; beta and gamma must be 0".into(),
            ));
        }
        Ok(())
    }
}

/// The model zoo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    SlFf,
    SleAe,
    SleVae,
    SleBetaVae,
    SleAdaVae,
    SslM1Vae,
    SslM1AdaVae,
    KilVae,
    KilAdaVae,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::SlFf,
        Variant::SleAe,
        Variant::SleVae,
        Variant::SleBetaVae,
        Variant::SleAdaVae,
        Variant::SslM1Vae,
        Variant::SslM1AdaVae,
        Variant::KilVae,
        Variant::KilAdaVae,
    ];

    /// Identifier used on the command line and in files.
    pub fn id(self) -> &'static str {
        match self {
            Variant::SlFf => "sl-ff",
            Variant::SleAe => "sle-ae",
            Variant::SleVae => "sle-vae",
            Variant::SleBetaVae => "sle-beta-vae",
            Variant::SleAdaVae => "sle-adavae",
            Variant::SslM1Vae => "ssl-m1-vae",
            Variant::SslM1AdaVae => "ssl-m1-adavae",
            Variant::KilVae => "kil-vae",
            Variant::KilAdaVae => "kil-adavae",
        }
    }

    /// Name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Variant::SlFf => "SL-FF",
            Variant::SleAe => "SLE-AE",
            Variant::SleVae => "SLE-VAE",
            Variant::SleBetaVae => "SLE-β-VAE",
            Variant::SleAdaVae => "SLE-AdaVAE",
            Variant::SslM1Vae => "SSL-M1-VAE",
            Variant::SslM1AdaVae => "SSL-M1-AdaVAE",
            Variant::KilVae => "KIL-VAE",
            Variant::KilAdaVae => "KIL-AdaVAE",
        }
    }

    pub fn is_autoencoder(self) -> bool {
        self != Variant::SlFf
    }

    /// Loss and sampling settings of an autoencoder variant; `None` for the
    /// purely supervised network. `n_channels` sets the default `gamma = n`.
    pub fn embedding_config(self, latent_dim: usize, n_channels: usize) -> Option<(LossConfig, SamplingMode)> {
        let adaptive = SamplingMode::Adaptive {
            alpha: latent_dim as f64 / 2.0,
        };
        let vae = |beta: f64, gamma: f64, pool: TrainingPool| LossConfig {
            objective: Objective::Variational,
            beta,
            gamma,
            pool,
        };
        let n = n_channels as f64;
        use TrainingPool::{Labeled, LabeledAndUnlabeled};
        Some(match self {
            Variant::SlFf => return None,
            Variant::SleAe => (
                LossConfig {
                    objective: Objective::Reconstruction,
                    beta: 0.0,
                    gamma: 0.0,
                    pool: Labeled,
                },
                SamplingMode::Standard,
            ),
            Variant::SleVae => (vae(1.0, 0.0, Labeled), SamplingMode::Standard),
            Variant::SleBetaVae => (vae(5.0, 0.0, Labeled), SamplingMode::Standard),
            Variant::SleAdaVae => (vae(5.0, 0.0, Labeled), adaptive),
            Variant::SslM1Vae => (vae(1.0, 0.0, LabeledAndUnlabeled), SamplingMode::Standard),
            Variant::SslM1AdaVae => (vae(1.0, 0.0, LabeledAndUnlabeled), adaptive),
            Variant::KilVae => (vae(1.0, n, LabeledAndUnlabeled), SamplingMode::Standard),
            Variant::KilAdaVae => (vae(1.0, n, LabeledAndUnlabeled), adaptive),
        })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Error)]
#[error("unknown variant `{name}`; valid variants: {valid}", name = .0, valid = Variant::ALL.map(Variant::id).join(", "))]
pub struct UnknownVariant(pub String);

impl FromStr for Variant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.id() == key)
            .ok_or_else(|| UnknownVariant(s.to_string()))
    }
}

/// Encoder output: posterior means and (for variational models) clamped log-variances.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub mu: Matrix,
    pub log_var: Option<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    encoder: DenseNet,
    decoder: DenseNet,
    latent_dim: usize,
    sampling: SamplingMode,
    loss: LossConfig,
}

impl VaeModel {
    /// Xavier-initialized `[n, hidden, d(x2)]` encoder and `[d, hidden, n]` decoder.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: usize,
        latent_dim: usize,
        sampling: SamplingMode,
        loss: LossConfig,
        rng: &mut R,
    ) -> Result<Self> {
        sampling.validate()?;
        loss.validate()?;
        if latent_dim == 0 {
            return Err(VaeError::InvalidConfig("latent dimension must be positive".into()));
        }
        let head = match loss.objective {
            Objective::Variational => 2 * latent_dim,
            Objective::Reconstruction => latent_dim,
        };
        let encoder = DenseNet::new(&[input_dim, hidden, head], Activation::Tanh, Activation::Linear, rng)?;
        let decoder = DenseNet::new(&[latent_dim, hidden, input_dim], Activation::Tanh, Activation::Linear, rng)?;
        Self::from_parts(encoder, decoder, latent_dim, sampling, loss)
    }

    pub fn from_parts(
        encoder: DenseNet,
        decoder: DenseNet,
        latent_dim: usize,
        sampling: SamplingMode,
        loss: LossConfig,
    ) -> Result<Self> {
        sampling.validate()?;
        loss.validate()?;
        let head = match loss.objective {
            Objective::Variational => 2 * latent_dim,
            Objective::Reconstruction => latent_dim,
        };
        if encoder.output_dim() != head {
            return Err(VaeError::InvalidConfig(format!(
                "encoder output width {} does not match expected {head}",
                encoder.output_dim()
            )));
        }
        if decoder.input_dim() != latent_dim || decoder.output_dim() != encoder.input_dim() {
            return Err(VaeError::InvalidConfig("decoder shape does not match encoder".into()));
        }
        Ok(Self {
            encoder,
            decoder,
            latent_dim,
            sampling,
            loss,
        })
    }

    pub fn encoder(&self) -> &DenseNet {
        &self.encoder
    }

    pub fn decoder(&self) -> &DenseNet {
        &self.decoder
    }

    pub fn encoder_mut(&mut self) -> &mut DenseNet {
        &mut self.encoder
    }

    pub fn decoder_mut(&mut self) -> &mut DenseNet {
        &mut self.decoder
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn sampling(&self) -> SamplingMode {
        self.sampling
    }

    pub fn loss_config(&self) -> LossConfig {
        self.loss
    }

    pub fn is_variational(&self) -> bool {
        self.loss.objective == Objective::Variational
    }

    pub fn encode(&self, x: &Matrix) -> Result<Encoding> {
        if !x.is_finite() {
            return Err(VaeError::NonFiniteInput);
        }
        let out = self.encoder.predict(x)?;
        Ok(self.split_head(&out))
    }

    fn split_head(&self, out: &Matrix) -> Encoding {
        let d = self.latent_dim;
        if self.is_variational() {
            let mu = out.columns(0, d);
            let mut log_var = out.columns(d, 2 * d);
            for v in log_var.as_mut_slice() {
                *v = v.clamp(-LOG_VAR_CLAMP, LOG_VAR_CLAMP);
            }
            Encoding {
                mu,
                log_var: Some(log_var),
            }
        } else {
            Encoding {
                mu: out.clone(),
                log_var: None,
            }
        }
    }

    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        Ok(self.decoder.predict(z)?)
    }

    /// Latent samples for the given noise (`noise` = zeros gives `z = mu`).
    pub fn sample_latent(&self, encoding: &Encoding, noise: &Matrix) -> Result<Matrix> {
        match &encoding.log_var {
            None => Ok(encoding.mu.clone()),
            Some(log_var) => sample_matrix(&encoding.mu, log_var, self.sampling, noise),
        }
    }

    /// Deterministic reconstruction through `z = mu`.
    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        let enc = self.encode(x)?;
        self.decode(&enc.mu)
    }

    pub fn to_document(&self) -> VaeDocument {
        VaeDocument {
            latent_dim: self.latent_dim,
            sampling: self.sampling,
            loss: self.loss,
            encoder: self.encoder.to_document(),
            decoder: self.decoder.to_document(),
        }
    }

    pub fn from_document(doc: &VaeDocument) -> Result<Self> {
        Self::from_parts(
            DenseNet::from_document(&doc.encoder)?,
            DenseNet::from_document(&doc.decoder)?,
            doc.latent_dim,
            doc.sampling,
            doc.loss,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaeDocument {
    pub latent_dim: usize,
    pub sampling: SamplingMode,
    pub loss: LossConfig,
    pub encoder: WeightsDocument,
    pub decoder: WeightsDocument,
}

/// Reparameterized draw for one row.
pub fn sample(mu: &[f64], log_var: &[f64], mode: SamplingMode, eps: &[f64]) -> Vec<f64> {
    assert!(mu.len() == log_var.len() && mu.len() == eps.len(), "sample: length mismatch");
    mu.iter()
        .zip(log_var)
        .zip(eps)
        .map(|((&m, &lv), &e)| match mode {
            SamplingMode::Standard => m + (0.5 * lv).exp() * e,
            SamplingMode::Adaptive { alpha } => m + alpha * lv * e,
        })
        .collect()
}

fn sample_matrix(mu: &Matrix, log_var: &Matrix, mode: SamplingMode, noise: &Matrix) -> Result<Matrix> {
    if noise.rows() != mu.rows() || noise.cols() != mu.cols() {
        return Err(NnError::ShapeMismatch {
            context: "sampling noise",
            expected: mu.rows() * mu.cols(),
            found: noise.rows() * noise.cols(),
        }
        .into());
    }
    let mut z = Matrix::zeros(mu.rows(), mu.cols());
    for r in 0..mu.rows() {
        z.row_mut(r)
            .copy_from_slice(&sample(mu.row(r), log_var.row(r), mode, noise.row(r)));
    }
    Ok(z)
}

/// `KL(N(mu, sigma^2 I) || N(0, I)) = 1/2 * sum(mu^2 + sigma^2 - log sigma^2 - 1)`.
pub fn kl_gaussian(mu: &[f64], log_var: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(log_var)
        .map(|(&m, &lv)| m * m + lv.exp() - lv - 1.0)
        .sum::<f64>()
}

/// Batch mean of the per-channel mean squared error.
pub fn recon_loss(x: &Matrix, x_bar: &Matrix) -> f64 {
    assert!(
        x.rows() == x_bar.rows() && x.cols() == x_bar.cols(),
        "recon_loss: shape mismatch"
    );
    if x.rows() == 0 || x.cols() == 0 {
        return 0.0;
    }
    let sse: f64 = x
        .as_slice()
        .iter()
        .zip(x_bar.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    sse / (x.rows() * x.cols()) as f64
}

/// Unit-normal noise matrix.
pub fn standard_noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized by construction")
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
    pub labeled_kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeGradients {
    pub encoder: Gradients,
    pub decoder: Gradients,
}

/// Objective and gradients with noise drawn from `rng` (one draw per datum).
pub fn loss_total<R: Rng + ?Sized>(
    model: &VaeModel,
    mixed: &Matrix,
    labeled: Option<&Matrix>,
    rng: &mut R,
) -> Result<(LossBreakdown, VaeGradients)> {
    let noise = if model.is_variational() {
        standard_noise(mixed.rows(), model.latent_dim, rng)
    } else {
        Matrix::zeros(mixed.rows(), model.latent_dim)
    };
    loss_with_noise(model, mixed, &noise, labeled)
}

/// Objective and exact gradients for explicit sampling noise.
///
/// `labeled` must be present exactly when `gamma > 0`.
pub fn loss_with_noise(
    model: &VaeModel,
    mixed: &Matrix,
    noise: &Matrix,
    labeled: Option<&Matrix>,
) -> Result<(LossBreakdown, VaeGradients)> {
    let cfg = model.loss;
    let d = model.latent_dim;
    let uses_labeled = cfg.objective == Objective::Variational && cfg.gamma > 0.0;
    match (uses_labeled, labeled) {
        (true, None) => {
            return Err(VaeError::InvalidConfig("gamma > 0 requires a labeled batch".into()))
        }
        (true, Some(l)) if l.is_empty() => {
            return Err(VaeError::InvalidConfig("gamma > 0 requires a non-empty labeled batch".into()))
        }
        (false, Some(l)) if !l.is_empty() => {
            return Err(VaeError::InvalidConfig("labeled batch supplied but gamma = 0".into()))
        }
        _ => {}
    }
    if mixed.is_empty() {
        return Err(VaeError::EmptyTrainingPool);
    }
    let rows = mixed.rows();
    let inv_rows = 1.0 / rows as f64;

    let (enc_out, enc_cache) = model.encoder.forward(mixed)?;
    let encoding = model.split_head(&enc_out);
    let z = model.sample_latent(&encoding, noise)?;
    let (x_bar, dec_cache) = model.decoder.forward(&z)?;

    let recon = recon_loss(mixed, &x_bar);
    let mut breakdown = LossBreakdown {
        recon,
        ..Default::default()
    };

    let recon_scale = 2.0 / (rows * mixed.cols()) as f64;
    let mut d_xbar = Matrix::zeros(rows, mixed.cols());
    for ((g, xb), x) in d_xbar
        .as_mut_slice()
        .iter_mut()
        .zip(x_bar.as_slice())
        .zip(mixed.as_slice())
    {
        *g = recon_scale * (xb - x);
    }
    let (decoder_grads, d_z) = model.decoder.backward_with_input(&dec_cache, &d_xbar)?;

    let mut encoder_grads = Gradients::zeros_like(&model.encoder);
    match &encoding.log_var {
        None => {
            model
                .encoder
                .backward_accumulate(&enc_cache, &d_z, &mut encoder_grads, false)?;
        }
        Some(log_var) => {
            let mu = &encoding.mu;
            breakdown.kl = (0..rows).map(|r| kl_gaussian(mu.row(r), log_var.row(r))).sum::<f64>() * inv_rows;
            let kl_scale = cfg.beta * inv_rows;
            let mut d_head = Matrix::zeros(rows, 2 * d);
            for r in 0..rows {
                let raw = enc_out.row(r);
                let (m_row, lv_row, eps_row, dz_row) = (mu.row(r), log_var.row(r), noise.row(r), d_z.row(r));
                let head = d_head.row_mut(r);
                for j in 0..d {
                    let (m, lv, e, dz) = (m_row[j], lv_row[j], eps_row[j], dz_row[j]);
                    head[j] = dz + kl_scale * m;
                    let sampling_path = match model.sampling {
                        SamplingMode::Standard => dz * 0.5 * (0.5 * lv).exp() * e,
                        SamplingMode::Adaptive { alpha } => dz * alpha * e,
                    };
                    let d_lv = sampling_path + kl_scale * 0.5 * (lv.exp() - 1.0);
                    head[d + j] = if raw[d + j].abs() <= LOG_VAR_CLAMP { d_lv } else { 0.0 };
                }
            }
            model
                .encoder
                .backward_accumulate(&enc_cache, &d_head, &mut encoder_grads, false)?;

            if uses_labeled {
                let lab = labeled.expect("checked above");
                let (lab_out, lab_cache) = model.encoder.forward(lab)?;
                let lab_enc = model.split_head(&lab_out);
                let lab_lv = lab_enc.log_var.as_ref().expect("variational");
                let lab_inv = 1.0 / lab.rows() as f64;
                breakdown.labeled_kl = (0..lab.rows())
                    .map(|r| kl_gaussian(lab_enc.mu.row(r), lab_lv.row(r)))
                    .sum::<f64>()
                    * lab_inv;
                let scale = cfg.gamma * lab_inv;
                let mut d_lab = Matrix::zeros(lab.rows(), 2 * d);
                for r in 0..lab.rows() {
                    let raw = lab_out.row(r);
                    let head = d_lab.row_mut(r);
                    for j in 0..d {
                        let lv = lab_lv.get(r, j);
                        head[j] = scale * lab_enc.mu.get(r, j);
                        head[d + j] = if raw[d + j].abs() <= LOG_VAR_CLAMP {
                            scale * 0.5 * (lv.exp() - 1.0)
                        } else {
                            0.0
                        };
                    }
                }
                model
                    .encoder
                    .backward_accumulate(&lab_cache, &d_lab, &mut encoder_grads, false)?;
            }
        }
    }

    breakdown.total = match cfg.objective {
        Objective::Reconstruction => breakdown.recon,
        Objective::Variational => breakdown.recon + cfg.beta * breakdown.kl + cfg.gamma * breakdown.labeled_kl,
    };
    if !breakdown.total.is_finite() {
        return Err(VaeError::Diverged(format!("non-finite loss {:?}", breakdown)));
    }
    Ok((
        breakdown,
        VaeGradients {
            encoder: encoder_grads,
            decoder: decoder_grads,
        },
    ))
}

/// Row indices consumed by one gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub mixed: Vec<usize>,
    pub labeled: Option<Vec<usize>>,
}

/// Mini-batches for one epoch over a pool of `pool_size` rows.
///
/// The pool is reshuffled every epoch. When `labeled_size` is given, the
/// labeled set is upsampled with replacement to `pool_size` draws and cut
/// into batches aligned with the mixed ones, so each step sees a labeled
/// batch of exactly the mixed batch's size. The last batch may be partial.
pub fn plan_epoch<R: Rng + ?Sized>(
    pool_size: usize,
    labeled_size: Option<usize>,
    batch_size: usize,
    rng: &mut R,
) -> Vec<BatchPlan> {
    let mut order: Vec<usize> = (0..pool_size).collect();
    order.shuffle(rng);
    let upsampled: Option<Vec<usize>> =
        labeled_size.map(|u| (0..pool_size).map(|_| rng.random_range(0..u)).collect());
    order
        .chunks(batch_size.max(1))
        .enumerate()
        .map(|(b, chunk)| {
            let start = b * batch_size;
            BatchPlan {
                mixed: chunk.to_vec(),
                labeled: upsampled
                    .as_ref()
                    .map(|u| u[start..start + chunk.len()].to_vec()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
    pub labeled_kl: f64,
    pub steps: usize,
    pub labeled_rows: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedVae {
    pub model: VaeModel,
    pub history: Vec<EpochLoss>,
}

/// Mini-batch Adam training of a VAE.
///
/// `labeled` holds the healthy training rows; `unlabeled` is only consulted
/// when the model's pool includes it. Only feature rows are accepted here,
/// so ground-truth state labels can never reach training.
pub fn train_vae(
    mut model: VaeModel,
    labeled: &Matrix,
    unlabeled: Option<&Matrix>,
    cfg: &TrainConfig,
) -> Result<TrainedVae> {
    cfg.validate()?;
    let pool = match model.loss.pool {
        TrainingPool::Labeled => labeled.clone(),
        TrainingPool::LabeledAndUnlabeled => match unlabeled {
            Some(u) => labeled.vstack(u)?,
            None => {
                return Err(VaeError::InvalidConfig(
                    "this variant trains on labeled and unlabeled rows but no unlabeled rows were given".into(),
                ))
            }
        },
    };
    if pool.is_empty() {
        return Err(VaeError::EmptyTrainingPool);
    }
    let uses_labeled = model.is_variational() && model.loss.gamma > 0.0;
    if uses_labeled && labeled.is_empty() {
        return Err(VaeError::InvalidConfig("knowledge-induced training needs labeled rows".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let adam_cfg = AdamConfig::with_learning_rate(cfg.learning_rate);
    let mut enc_opt = Adam::new(&model.encoder, adam_cfg);
    let mut dec_opt = Adam::new(&model.decoder, adam_cfg);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let plan = plan_epoch(
            pool.rows(),
            uses_labeled.then_some(labeled.rows()),
            cfg.batch_size,
            &mut rng,
        );
        let mut acc = EpochLoss {
            epoch,
            total: 0.0,
            recon: 0.0,
            kl: 0.0,
            labeled_kl: 0.0,
            steps: 0,
            labeled_rows: 0,
        };
        for batch in &plan {
            let mixed = pool.select_rows(&batch.mixed);
            let lab = batch.labeled.as_ref().map(|idx| labeled.select_rows(idx));
            let (loss, grads) = loss_total(&model, &mixed, lab.as_ref(), &mut rng)?;
            enc_opt.step(&mut model.encoder, &grads.encoder)?;
            dec_opt.step(&mut model.decoder, &grads.decoder)?;
            let w = mixed.rows() as f64;
            acc.total += loss.total * w;
            acc.recon += loss.recon * w;
            acc.kl += loss.kl * w;
            acc.labeled_kl += loss.labeled_kl * w;
            acc.steps += 1;
            acc.labeled_rows += lab.map_or(0, |l| l.rows());
        }
        let n = pool.rows() as f64;
        acc.total /= n;
        acc.recon /= n;
        acc.kl /= n;
        acc.labeled_kl /= n;
        history.push(acc);
    }
    Ok(TrainedVae { model, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;

    fn vae_cfg(beta: f64, gamma: f64) -> LossConfig {
        LossConfig {
            objective: Objective::Variational,
            beta,
            gamma,
            pool: TrainingPool::Labeled,
        }
    }

    #[test]
    fn zero_noise_returns_mean_in_every_mode() {
        let mu = [0.3, -1.2];
        let lv = [0.7, -3.0];
        for mode in [SamplingMode::Standard, SamplingMode::Adaptive { alpha: 4.0 }] {
            assert_eq!(sample(&mu, &lv, mode, &[0.0, 0.0]), mu.to_vec());
        }
    }

    #[test]
    fn adaptive_with_unit_scale_is_exactly_mean() {
        let mu = [0.123456789, -7.5, 1e-300];
        for eps in [[1.0, -2.0, 3.0], [1e10, -1e-10, 0.5]] {
            let z = sample(&mu, &[0.0; 3], SamplingMode::Adaptive { alpha: 4.0 }, &eps);
            assert_eq!(z.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                       mu.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn adaptive_arithmetic_example() {
        let z = sample(&[0.0], &[1.0], SamplingMode::Adaptive { alpha: 4.0 }, &[1.0]);
        assert_eq!(z, vec![4.0]);
    }

    #[test]
    fn standard_sampling_scales_by_sigma() {
        let z = sample(&[1.0], &[2.0f64.ln()], SamplingMode::Standard, &[1.0]);
        assert!((z[0] - (1.0 + 2.0f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn kl_closed_form_values() {
        assert_eq!(kl_gaussian(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!((kl_gaussian(&[1.0], &[0.0]) - 0.5).abs() < 1e-12);
        let expected = 0.5 * (std::f64::consts::E - 2.0);
        assert!((kl_gaussian(&[0.0], &[1.0]) - expected).abs() < 1e-12);
        assert!((expected - 0.35914).abs() < 1e-5);
    }

    #[test]
    fn recon_loss_examples() {
        let x = Matrix::from_vec(2, 13, (0..26).map(|i| i as f64 * 0.1).collect()).unwrap();
        assert_eq!(recon_loss(&x, &x), 0.0);
        let ones = Matrix::from_vec(3, 13, vec![1.0; 39]).unwrap();
        assert_eq!(recon_loss(&ones, &Matrix::zeros(3, 13)), 1.0);
        let a = Matrix::from_vec(2, 2, vec![0.5, -0.25, 1.0, 2.0]).unwrap();
        let b = Matrix::from_vec(2, 2, vec![0.0, 0.25, 0.5, -1.0]).unwrap();
        // (0.25 + 0.25 + 0.25 + 9) / 4
        assert!((recon_loss(&a, &b) - 9.75 / 4.0).abs() < 1e-12);
    }

    fn zero_weight_model() -> VaeModel {
        let enc = DenseNet::from_layers(vec![Layer::new(
            Matrix::zeros(4, 3),
            vec![0.1, -0.2, 0.3, -0.4],
            Activation::Linear,
        )
        .unwrap()])
        .unwrap();
        let dec = DenseNet::from_layers(vec![Layer::new(
            Matrix::zeros(3, 2),
            vec![0.5, 0.0, -0.5],
            Activation::Tanh,
        )
        .unwrap()])
        .unwrap();
        VaeModel::from_parts(enc, dec, 2, SamplingMode::Standard, vae_cfg(1.0, 0.0)).unwrap()
    }

    #[test]
    fn zero_weight_encoder_and_decoder_expose_biases() {
        let model = zero_weight_model();
        let x = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.0, 4.0]).unwrap();
        let enc = model.encode(&x).unwrap();
        for r in 0..2 {
            assert_eq!(enc.mu.row(r), &[0.1, -0.2]);
            assert_eq!(enc.log_var.as_ref().unwrap().row(r), &[0.3, -0.4]);
        }
        let x_bar = model.decode(&enc.mu).unwrap();
        assert_eq!(x_bar.row(0), &[0.5f64.tanh(), 0.0, (-0.5f64).tanh()]);
    }

    #[test]
    fn encode_is_deterministic_and_rejects_non_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = VaeModel::new(13, 20, 8, SamplingMode::Standard, vae_cfg(1.0, 0.0), &mut rng).unwrap();
        let x = standard_noise(5, 13, &mut rng);
        assert_eq!(model.encode(&x).unwrap(), model.encode(&x).unwrap());
        let mut bad = x.clone();
        bad.set(2, 4, f64::NAN);
        assert!(matches!(model.encode(&bad), Err(VaeError::NonFiniteInput)));
    }

    #[test]
    fn hand_set_single_hidden_unit_encoder_and_decoder() {
        // encoder: 1 -> 1 (tanh) -> 2 (linear); decoder: 1 -> 1 (tanh) -> 1 (linear)
        let enc = DenseNet::from_layers(vec![
            Layer::new(Matrix::from_vec(1, 1, vec![0.8]).unwrap(), vec![0.1], Activation::Tanh).unwrap(),
            Layer::new(Matrix::from_vec(2, 1, vec![1.5, -0.5]).unwrap(), vec![0.2, 0.05], Activation::Linear).unwrap(),
        ])
        .unwrap();
        let dec = DenseNet::from_layers(vec![
            Layer::new(Matrix::from_vec(1, 1, vec![-1.1]).unwrap(), vec![0.3], Activation::Tanh).unwrap(),
            Layer::new(Matrix::from_vec(1, 1, vec![2.0]).unwrap(), vec![-0.1], Activation::Linear).unwrap(),
        ])
        .unwrap();
        let model = VaeModel::from_parts(enc, dec, 1, SamplingMode::Standard, vae_cfg(1.0, 0.0)).unwrap();
        let x = 0.6f64;
        let h = (0.8 * x + 0.1).tanh();
        let (mu, lv) = (1.5 * h + 0.2, -0.5 * h + 0.05);
        let enc = model.encode(&Matrix::from_vec(1, 1, vec![x]).unwrap()).unwrap();
        assert!((enc.mu.get(0, 0) - mu).abs() < 1e-12);
        assert!((enc.log_var.unwrap().get(0, 0) - lv).abs() < 1e-12);
        let x_bar = model.decode(&Matrix::from_vec(1, 1, vec![mu]).unwrap()).unwrap();
        assert!((x_bar.get(0, 0) - (2.0 * (-1.1 * mu + 0.3).tanh() - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn log_variance_is_clamped() {
        let enc = DenseNet::from_layers(vec![Layer::new(
            Matrix::zeros(2, 1),
            vec![0.0, 45.0],
            Activation::Linear,
        )
        .unwrap()])
        .unwrap();
        let dec = DenseNet::from_layers(vec![Layer::new(Matrix::zeros(1, 1), vec![0.0], Activation::Linear).unwrap()]).unwrap();
        let model = VaeModel::from_parts(enc, dec, 1, SamplingMode::Standard, vae_cfg(1.0, 0.0)).unwrap();
        let enc = model.encode(&Matrix::zeros(1, 1)).unwrap();
        assert_eq!(enc.log_var.unwrap().get(0, 0), LOG_VAR_CLAMP);
    }

    #[test]
    fn plain_reduction_equals_reconstruction_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = VaeModel::new(13, 20, 8, SamplingMode::Standard, vae_cfg(0.0, 0.0), &mut rng).unwrap();
        let x = standard_noise(7, 13, &mut rng);
        let noise = standard_noise(7, 8, &mut rng);
        let (loss, _) = loss_with_noise(&model, &x, &noise, None).unwrap();
        let enc = model.encode(&x).unwrap();
        let z = model.sample_latent(&enc, &noise).unwrap();
        let expected = recon_loss(&x, &model.decode(&z).unwrap());
        assert_eq!(loss.total, expected);
    }

    #[test]
    fn standard_beta_one_is_negative_elbo_without_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let model = VaeModel::new(13, 20, 8, SamplingMode::Standard, vae_cfg(1.0, 0.0), &mut rng).unwrap();
        let x = standard_noise(6, 13, &mut rng);
        let noise = standard_noise(6, 8, &mut rng);
        let (loss, _) = loss_with_noise(&model, &x, &noise, None).unwrap();
        let enc = model.encode(&x).unwrap();
        let lv = enc.log_var.clone().unwrap();
        let kl: f64 = (0..6).map(|r| kl_gaussian(enc.mu.row(r), lv.row(r))).sum::<f64>() / 6.0;
        let recon = recon_loss(&x, &model.decode(&model.sample_latent(&enc, &noise).unwrap()).unwrap());
        assert!((loss.total - (recon + kl)).abs() < 1e-12);
    }

    #[test]
    fn labeled_batch_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let kil = VaeModel::new(3, 4, 2, SamplingMode::Standard, vae_cfg(1.0, 13.0), &mut rng).unwrap();
        let x = standard_noise(4, 3, &mut rng);
        assert!(matches!(loss_total(&kil, &x, None, &mut rng), Err(VaeError::InvalidConfig(_))));
        let plain = VaeModel::new(3, 4, 2, SamplingMode::Standard, vae_cfg(1.0, 0.0), &mut rng).unwrap();
        assert!(matches!(loss_total(&plain, &x, Some(&x), &mut rng), Err(VaeError::InvalidConfig(_))));
    }

    #[test]
    fn variant_parsing_and_reductions() {
        for v in Variant::ALL {
            assert_eq!(v.id().parse::<Variant>().unwrap(), v);
        }
        let err = "sle-gan".parse::<Variant>().unwrap_err().to_string();
        assert!(err.contains("kil-adavae") && err.contains("sl-ff"));

        let (l, s) = Variant::SleVae.embedding_config(8, 13).unwrap();
        assert_eq!((l.beta, l.gamma, l.pool, s), (1.0, 0.0, TrainingPool::Labeled, SamplingMode::Standard));
        let (l, _) = Variant::SleBetaVae.embedding_config(8, 13).unwrap();
        assert_eq!(l.beta, 5.0);
        let (l, s) = Variant::SleAdaVae.embedding_config(8, 13).unwrap();
        assert_eq!((l.beta, s), (5.0, SamplingMode::Adaptive { alpha: 4.0 }));
        let (l, _) = Variant::SslM1Vae.embedding_config(8, 13).unwrap();
        assert_eq!(l.pool, TrainingPool::LabeledAndUnlabeled);
        let (l, s) = Variant::KilAdaVae.embedding_config(8, 13).unwrap();
        assert_eq!((l.beta, l.gamma, l.pool, s), (1.0, 13.0, TrainingPool::LabeledAndUnlabeled, SamplingMode::Adaptive { alpha: 4.0 }));
        let (l, _) = Variant::SleAe.embedding_config(8, 13).unwrap();
        assert_eq!(l.objective, Objective::Reconstruction);
        assert!(Variant::SlFf.embedding_config(8, 13).is_none());
    }

    #[test]
    fn epoch_plan_pairs_equal_sized_labeled_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = plan_epoch(1050, Some(37), 512, &mut rng);
        assert_eq!(plan.len(), 3);
        assert_eq!(plan[2].mixed.len(), 1050 - 1024);
        let mut seen: Vec<usize> = plan.iter().flat_map(|b| b.mixed.iter().copied()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..1050).collect::<Vec<_>>());
        for b in &plan {
            let lab = b.labeled.as_ref().unwrap();
            assert_eq!(lab.len(), b.mixed.len());
            assert!(lab.iter().all(|&i| i < 37));
        }
        assert!(plan_epoch(10, None, 4, &mut rng).iter().all(|b| b.labeled.is_none()));
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let model = VaeModel::new(13, 20, 8, SamplingMode::Adaptive { alpha: 4.0 }, vae_cfg(1.0, 13.0), &mut rng).unwrap();
        let x = standard_noise(20, 13, &mut rng);
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::autoencoder() };
        let trained = train_vae(model.clone(), &x, Some(&x), &cfg).unwrap();
        assert_eq!(trained.model, model);
        assert!(trained.history.is_empty());
    }

    #[test]
    fn kil_training_consumes_labeled_batches_of_mixed_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut cfg_loss = vae_cfg(1.0, 13.0);
        cfg_loss.pool = TrainingPool::LabeledAndUnlabeled;
        let model = VaeModel::new(13, 20, 8, SamplingMode::Adaptive { alpha: 4.0 }, cfg_loss, &mut rng).unwrap();
        let labeled = standard_noise(30, 13, &mut rng);
        let unlabeled = standard_noise(45, 13, &mut rng);
        let cfg = TrainConfig { learning_rate: 0.005, batch_size: 16, epochs: 3, seed: 5 };
        let trained = train_vae(model, &labeled, Some(&unlabeled), &cfg).unwrap();
        for e in &trained.history {
            assert_eq!(e.steps, 5);
            assert_eq!(e.labeled_rows, 75);
        }
        let missing = train_vae(trained.model.clone(), &labeled, None, &cfg);
        assert!(matches!(missing, Err(VaeError::InvalidConfig(_))));
    }

    #[test]
    fn model_document_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let model = VaeModel::new(13, 20, 8, SamplingMode::Adaptive { alpha: 4.0 }, vae_cfg(5.0, 0.0), &mut rng).unwrap();
        let text = serde_json::to_string(&model.to_document()).unwrap();
        let back = VaeModel::from_document(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, model);
    }
}
