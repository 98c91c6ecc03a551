//! Single-seed pipeline: prepare data, train the embedding and detector,
//! then score detection, segmentation and representation quality on the
//! unlabeled and test rows.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{optics, ClusteringError, OpticsResult};
use crate::datagen::{self, DataError, Dataset, Scaler, Split};
use crate::detector::{new_one_class_net, one_class_layers, supervised_layers, DetectorError, OneClassEpoch, OneClassModel, SUPERVISED_LATENT_LAYER};
use crate::experiment::config::{DatasetSource, ExperimentConfig};
use crate::metrics::{
    adjusted_mutual_info, detection_scores, homogeneity_completeness, lsg, mmi, DetectionScoreError, DetectionScores,
    RepresentationError,
};
use crate::nn::{Matrix, NnError, TrainConfig};
use crate::vae::{standard_noise, train_vae, EpochLoss, VaeError, VaeModel, Variant};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("data stage: {0}")]
    Data(#[from] DataError),
    #[error("embedding stage: {0}")]
    Vae(#[from] VaeError),
    #[error("detector stage: {0}")]
    Detector(#[from] DetectorError),
    #[error("segmentation stage: {0}")]
    Clustering(#[from] ClusteringError),
    #[error("metrics stage: {0}")]
    Representation(#[from] RepresentationError),
    #[error("metrics stage: {0}")]
    Scores(#[from] DetectionScoreError),
    #[error("network error: {0}")]
    Nn(#[from] NnError),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Pipeline stages that draw randomness; each gets its own stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    EmbeddingInit = 1,
    EmbeddingTraining = 2,
    DetectorInit = 3,
    DetectorTraining = 4,
    LatentSampling = 5,
    Projection = 6,
}

pub fn stage_seed(seed: u64, stage: Stage) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    rng.next_u64()
}

pub fn load_dataset(source: &DatasetSource) -> Result<Dataset> {
    Ok(match source {
        DatasetSource::Generate { spec, seed } => datagen::generate(spec, *seed)?,
        DatasetSource::Csv { path, column_map } => datagen::load_csv_mapped(path, column_map)?,
    })
}

/// Dataset plus its copy scaled by a min/max fit on the training rows.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub raw: Dataset,
    pub scaler: Scaler,
    pub scaled: Dataset,
}

impl Prepared {
    pub fn new(raw: Dataset) -> Result<Self> {
        let scaler = Scaler::fit(&raw.rows(Split::Train))?;
        let scaled = raw.scaled(&scaler);
        Ok(Self { raw, scaler, scaled })
    }

    /// Rows of the unlabeled and test splits, in dataset order.
    pub fn evaluation_indices(&self) -> Vec<usize> {
        (0..self.scaled.len())
            .filter(|&i| matches!(self.scaled.split[i], Split::Unlabeled | Split::Test))
            .collect()
    }
}

/// Trained embedding plus detector.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub variant: Variant,
    /// `None` for the supervised feed-forward detector, which embeds with its own hidden layer.
    pub vae: Option<VaeModel>,
    pub detector: OneClassModel,
    pub vae_history: Vec<EpochLoss>,
    pub detector_history: Vec<OneClassEpoch>,
}

impl TrainedModel {
    /// Latent representation: the encoder mean, or the supervised net's latent layer.
    pub fn embed(&self, x: &Matrix) -> Result<Matrix> {
        match &self.vae {
            Some(v) => Ok(v.encode(x)?.mu),
            None => Ok(self.detector.net.layer_output(x, SUPERVISED_LATENT_LAYER)?),
        }
    }

    /// Input to the one-class detector.
    fn detector_input(&self, x: &Matrix) -> Result<Matrix> {
        match &self.vae {
            Some(v) => Ok(v.encode(x)?.mu),
            None => Ok(x.clone()),
        }
    }
}

pub fn train(cfg: &ExperimentConfig, data: &Prepared, seed: u64) -> Result<TrainedModel> {
    let view = data.scaled.training_view();
    let n = view.train.cols();
    let oc_cfg = TrainConfig {
        seed: stage_seed(seed, Stage::DetectorTraining),
        ..cfg.one_class_training
    };
    let mut oc_rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, Stage::DetectorInit));

    let Some((loss, sampling)) = cfg.model.resolve(cfg.variant, n) else {
        let init = new_one_class_net(&supervised_layers(n), &mut oc_rng)?;
        let (detector, detector_history) =
            OneClassModel::fit(init, &view.train, &view.validation, false, &oc_cfg, cfg.detector)?;
        return Ok(TrainedModel {
            variant: cfg.variant,
            vae: None,
            detector,
            vae_history: Vec::new(),
            detector_history,
        });
    };

    let mut init_rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, Stage::EmbeddingInit));
    let model = VaeModel::new(n, cfg.model.hidden, cfg.model.latent_dim, sampling, loss, &mut init_rng)?;
    let ae_cfg = TrainConfig {
        seed: stage_seed(seed, Stage::EmbeddingTraining),
        ..cfg.autoencoder_training
    };
    let trained = train_vae(model, &view.train, Some(&view.unlabeled), &ae_cfg)?;
    let mu_train = trained.model.encode(&view.train)?.mu;
    let mu_val = trained.model.encode(&view.validation)?.mu;
    let init = new_one_class_net(&one_class_layers(cfg.model.latent_dim), &mut oc_rng)?;
    let (detector, detector_history) = OneClassModel::fit(init, &mu_train, &mu_val, true, &oc_cfg, cfg.detector)?;
    Ok(TrainedModel {
        variant: cfg.variant,
        vae: Some(trained.model),
        detector,
        vae_history: trained.history,
        detector_history,
    })
}

/// Per-row outputs on the evaluation rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RowResults {
    /// Dataset row index of each evaluation row.
    pub rows: Vec<usize>,
    pub scores: Vec<f64>,
    pub healthy: Vec<bool>,
    pub latent: Matrix,
    pub clusters: Option<OpticsResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    /// Clusters found, noise excluded.
    pub clusters: usize,
    pub ami: f64,
    pub homogeneity: f64,
    pub completeness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepresentationScores {
    pub ami_input: Option<f64>,
    pub amig: Option<f64>,
    pub lsg: Option<f64>,
    /// Mean pairwise MI between input channels and latent means.
    pub mi_input_latent: Option<f64>,
    /// Mean pairwise MI between sampled latents and reconstructions.
    pub mi_latent_reconstruction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub seed: u64,
    /// All unlabeled and test rows.
    pub detection: DetectionScores,
    pub detection_unlabeled: DetectionScores,
    pub detection_test: DetectionScores,
    pub segmentation: Option<Segmentation>,
    pub representation: RepresentationScores,
    pub recon_loss: Option<f64>,
    pub total_loss: Option<f64>,
}

/// Which evaluation stages to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvaluationScope {
    pub segmentation: bool,
    pub amig: bool,
    pub lsg: bool,
    pub mmi: bool,
}

impl EvaluationScope {
    pub fn detection_only() -> Self {
        Self {
            segmentation: false,
            amig: false,
            lsg: false,
            mmi: false,
        }
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            segmentation: true,
            amig: cfg.metrics.amig,
            lsg: cfg.metrics.lsg,
            mmi: cfg.metrics.mmi,
        }
    }
}

fn state_labels(ds: &Dataset, rows: &[usize]) -> Result<Vec<i64>> {
    rows.iter()
        .map(|&i| {
            ds.state[i]
                .map(i64::from)
                .ok_or_else(|| PipelineError::Invalid(format!("row {i} has no ground-truth state; evaluation needs it")))
        })
        .collect()
}

pub fn evaluate(
    cfg: &ExperimentConfig,
    data: &Prepared,
    model: &TrainedModel,
    seed: u64,
    scope: EvaluationScope,
) -> Result<(Evaluation, RowResults)> {
    let rows = data.evaluation_indices();
    if rows.is_empty() {
        return Err(PipelineError::Invalid("no unlabeled or test rows to evaluate".into()));
    }
    let truth = state_labels(&data.scaled, &rows)?;
    let x = data.scaled.x.select_rows(&rows);
    let scores = model.detector.scores(&model.detector_input(&x)?)?;
    let healthy = crate::detector::detect(&scores);
    let truly_healthy: Vec<bool> = truth.iter().map(|&s| s == 0).collect();
    let subset = |split: Split| -> Result<DetectionScores> {
        let (t, p): (Vec<bool>, Vec<bool>) = rows
            .iter()
            .enumerate()
            .filter(|&(_, &r)| data.scaled.split[r] == split)
            .map(|(k, _)| (truly_healthy[k], healthy[k]))
            .unzip();
        Ok(detection_scores(&t, &p)?)
    };
    let detection = detection_scores(&truly_healthy, &healthy)?;
    let detection_unlabeled = subset(Split::Unlabeled)?;
    let detection_test = subset(Split::Test)?;

    let latent = model.embed(&x)?;
    let mut clusters = None;
    let mut segmentation = None;
    if scope.segmentation {
        let result = optics(&latent, &cfg.optics)?;
        let (h, c) = homogeneity_completeness(&result.labels, &truth);
        segmentation = Some(Segmentation {
            clusters: result.n_clusters,
            ami: adjusted_mutual_info(&result.labels, &truth),
            homogeneity: h,
            completeness: c,
        });
        clusters = Some(result);
    }

    let mut rep = RepresentationScores {
        ami_input: None,
        amig: None,
        lsg: None,
        mi_input_latent: None,
        mi_latent_reconstruction: None,
    };
    if scope.amig {
        let labels_x = optics(&x, &cfg.optics)?.labels;
        let ami_x = adjusted_mutual_info(&labels_x, &truth);
        rep.ami_input = Some(ami_x);
        if let Some(s) = segmentation {
            rep.amig = Some(s.ami - ami_x);
        }
    }
    if scope.lsg {
        rep.lsg = Some(lsg(&latent, &x, &truth)?.lsg);
    }
    if scope.mmi {
        let k = cfg.metrics.ksg_k;
        rep.mi_input_latent = Some(mmi(&x, &latent, k)?.mean);
        if let Some(v) = &model.vae {
            let enc = v.encode(&x)?;
            let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, Stage::LatentSampling));
            let noise = standard_noise(x.rows(), v.latent_dim(), &mut rng);
            let z = v.sample_latent(&enc, &noise)?;
            let x_bar = v.decode(&z)?;
            rep.mi_latent_reconstruction = Some(mmi(&z, &x_bar, k)?.mean);
        }
    }

    let last = model.vae_history.last();
    let evaluation = Evaluation {
        seed,
        detection,
        detection_unlabeled,
        detection_test,
        segmentation,
        representation: rep,
        recon_loss: last.map(|e| e.recon),
        total_loss: last.map(|e| e.total),
    };
    Ok((
        evaluation,
        RowResults {
            rows,
            scores,
            healthy,
            latent,
            clusters,
        },
    ))
}
