//! On-disk run directories: one file per stage output, written so that
//! rerunning a stage with the same config reproduces every byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::datagen::{self, Split};
use crate::detector::{OneClassDocument, OneClassEpoch, OneClassModel};
use crate::experiment::config::{ConfigError, ExperimentConfig};
use crate::experiment::pipeline::{
    evaluate, load_dataset, stage_seed, train, EvaluationScope, PipelineError, Prepared, Stage, TrainedModel,
};
use crate::experiment::report::{markdown_report, parse_records_csv, records_csv, EvaluationRecord, VariantSummary};
use crate::experiment::sweep::{run_sweep, Sweep, SweepParam};
use crate::projection::{embedding_csv, embedding_svg, tsne, ProjectionError, TsneParams, TsneResult};
use crate::vae::{EpochLoss, VaeDocument, VaeModel, Variant};

/// Recorded in every manifest hash; bump when outputs change for a fixed config.
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), "-", env!("CARGO_PKG_VERSION"));
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("missing {} in {}: run the `{}` stage first", .artifact.file_name(), .dir.display(), .artifact.stage())]
    MissingArtifact { artifact: Artifact, dir: PathBuf },
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("projection stage: {0}")]
    Projection(#[from] ProjectionError),
    #[error("{file} is invalid: {message}")]
    Corrupt { file: &'static str, message: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, RunError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Artifact {
    Config,
    Manifest,
    Dataset,
    Model,
    Detections,
    Clusters,
    MetricsMarkdown,
    MetricsCsv,
    TsneCsv,
    TsneSvg,
    SweepMarkdown,
    SweepCsv,
    Report,
    Log,
}

impl Artifact {
    pub fn file_name(self) -> &'static str {
        match self {
            Artifact::Config => "config.json",
            Artifact::Manifest => "manifest.json",
            Artifact::Dataset => "dataset.csv",
            Artifact::Model => "model.json",
            Artifact::Detections => "detections.csv",
            Artifact::Clusters => "clusters.csv",
            Artifact::MetricsMarkdown => "metrics.md",
            Artifact::MetricsCsv => "metrics.csv",
            Artifact::TsneCsv => "tsne.csv",
            Artifact::TsneSvg => "tsne.svg",
            Artifact::SweepMarkdown => "sweep.md",
            Artifact::SweepCsv => "sweep.csv",
            Artifact::Report => "report.md",
            Artifact::Log => "log.txt",
        }
    }

    /// Command that produces the artifact.
    pub fn stage(self) -> &'static str {
        match self {
            Artifact::Config | Artifact::Manifest | Artifact::Log => "run",
            Artifact::Dataset => "generate",
            Artifact::Model => "train",
            Artifact::Detections => "detect",
            Artifact::Clusters => "segment",
            Artifact::MetricsMarkdown | Artifact::MetricsCsv => "metrics",
            Artifact::TsneCsv | Artifact::TsneSvg => "project",
            Artifact::SweepMarkdown | Artifact::SweepCsv => "sweep",
            Artifact::Report => "report",
        }
    }
}

/// `sha256(config JSON, seed, code version)` as lowercase hex.
pub fn manifest_hash(cfg: &ExperimentConfig, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(cfg.to_json().as_bytes());
    h.update(b"\nseed=");
    h.update(seed.to_string().as_bytes());
    h.update(b"\ncode=");
    h.update(CODE_VERSION.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedManifest {
    pub seed: u64,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub code_version: String,
    pub seeds: Vec<SeedManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecord {
    pub seed: u64,
    pub manifest_hash: String,
    pub variant: Variant,
    pub vae: Option<VaeDocument>,
    pub detector: OneClassDocument,
    pub vae_history: Vec<EpochLoss>,
    pub detector_history: Vec<OneClassEpoch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBundle {
    pub format_version: u32,
    pub models: Vec<ModelRecord>,
}

impl ModelRecord {
    fn new(cfg: &ExperimentConfig, seed: u64, m: &TrainedModel) -> Self {
        Self {
            seed,
            manifest_hash: manifest_hash(cfg, seed),
            variant: m.variant,
            vae: m.vae.as_ref().map(VaeModel::to_document),
            detector: m.detector.to_document(),
            vae_history: m.vae_history.clone(),
            detector_history: m.detector_history.clone(),
        }
    }

    fn restore(&self) -> Result<TrainedModel> {
        let corrupt = |message: String| RunError::Corrupt {
            file: "model.json",
            message,
        };
        Ok(TrainedModel {
            variant: self.variant,
            vae: self
                .vae
                .as_ref()
                .map(VaeModel::from_document)
                .transpose()
                .map_err(|e| corrupt(e.to_string()))?,
            detector: OneClassModel::from_document(&self.detector).map_err(|e| corrupt(e.to_string()))?,
            vae_history: self.vae_history.clone(),
            detector_history: self.detector_history.clone(),
        })
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        "inf".into()
    }
}

/// A run directory `<out>/<name>` bound to one resolved config.
#[derive(Debug)]
pub struct Runner {
    cfg: ExperimentConfig,
    dir: PathBuf,
    prepared: Option<Prepared>,
}

impl Runner {
    /// Creates the directory and records the resolved config and manifest.
    pub fn new(cfg: ExperimentConfig, out: &Path) -> Result<Self> {
        cfg.validate()?;
        let dir = out.join(&cfg.name);
        std::fs::create_dir_all(&dir).map_err(|source| RunError::Io {
            path: dir.clone(),
            source,
        })?;
        let runner = Self {
            cfg,
            dir,
            prepared: None,
        };
        runner.write(Artifact::Config, &format!("{}\n", runner.cfg.to_json()))?;
        let manifest = Manifest {
            name: runner.cfg.name.clone(),
            code_version: CODE_VERSION.to_string(),
            seeds: runner
                .cfg
                .seeds
                .iter()
                .map(|&seed| SeedManifest {
                    seed,
                    hash: manifest_hash(&runner.cfg, seed),
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Invalid(e.to_string()))?;
        runner.write(Artifact::Manifest, &format!("{text}\n"))?;
        Ok(runner)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn path(&self, a: Artifact) -> PathBuf {
        self.dir.join(a.file_name())
    }

    fn write(&self, a: Artifact, content: &str) -> Result<()> {
        let path = self.path(a);
        std::fs::write(&path, content).map_err(|source| RunError::Io { path, source })
    }

    fn read(&self, a: Artifact) -> Result<String> {
        let path = self.path(a);
        if !path.exists() {
            return Err(RunError::MissingArtifact {
                artifact: a,
                dir: self.dir.clone(),
            });
        }
        std::fs::read_to_string(&path).map_err(|source| RunError::Io { path, source })
    }

    /// Replaces this stage's section of `log.txt`, keeping other stages' sections.
    fn log(&self, stage: &str, lines: &[String]) -> Result<()> {
        let path = self.path(Artifact::Log);
        let mut sections: BTreeMap<String, Vec<String>> = BTreeMap::new();
        if let Ok(text) = std::fs::read_to_string(&path) {
            let mut current = None;
            for line in text.lines() {
                if let Some(name) = line.strip_prefix("[").and_then(|l| l.strip_suffix("]")) {
                    current = Some(name.to_string());
                    sections.entry(name.to_string()).or_default();
                } else if let Some(name) = &current {
                    sections.get_mut(name).expect("section exists").push(line.to_string());
                }
            }
        }
        sections.insert(stage.to_string(), lines.to_vec());
        let order = ["generate", "train", "detect", "segment", "metrics", "project", "sweep"];
        let rank = |s: &str| order.iter().position(|o| *o == s).unwrap_or(order.len());
        let mut names: Vec<&String> = sections.keys().collect();
        names.sort_by_key(|n| (rank(n), n.to_string()));
        let mut out = String::new();
        for name in names {
            let _ = writeln!(out, "[{name}]");
            for l in &sections[name] {
                let _ = writeln!(out, "{l}");
            }
        }
        self.write(Artifact::Log, &out)
    }

    fn prepared(&mut self) -> Result<&Prepared> {
        if self.prepared.is_none() {
            let path = self.path(Artifact::Dataset);
            if !path.exists() {
                return Err(RunError::MissingArtifact {
                    artifact: Artifact::Dataset,
                    dir: self.dir.clone(),
                });
            }
            let ds = datagen::load_csv(&path).map_err(PipelineError::from)?;
            self.prepared = Some(Prepared::new(ds)?);
        }
        Ok(self.prepared.as_ref().expect("just set"))
    }

    fn models(&self) -> Result<Vec<(u64, TrainedModel)>> {
        let text = self.read(Artifact::Model)?;
        let bundle: ModelBundle = serde_json::from_str(&text).map_err(|e| RunError::Corrupt {
            file: "model.json",
            message: e.to_string(),
        })?;
        if bundle.format_version != MODEL_FORMAT_VERSION {
            return Err(RunError::Corrupt {
                file: "model.json",
                message: format!("unsupported format version {}", bundle.format_version),
            });
        }
        let mut out = Vec::with_capacity(bundle.models.len());
        for &seed in &self.cfg.seeds {
            let record = bundle.models.iter().find(|m| m.seed == seed).ok_or_else(|| RunError::MissingArtifact {
                artifact: Artifact::Model,
                dir: self.dir.clone(),
            })?;
            if record.manifest_hash != manifest_hash(&self.cfg, seed) || record.variant != self.cfg.variant {
                return Err(RunError::Invalid(format!(
                    "model.json for seed {seed} was trained with a different config; rerun the `train` stage"
                )));
            }
            out.push((seed, record.restore()?));
        }
        Ok(out)
    }

    /// Writes `dataset.csv` from the configured source.
    pub fn generate(&mut self) -> Result<PathBuf> {
        let ds = load_dataset(&self.cfg.dataset)?;
        let path = self.path(Artifact::Dataset);
        datagen::save_csv(&ds, &path).map_err(PipelineError::from)?;
        let counts: Vec<String> = [Split::Train, Split::Validation, Split::Unlabeled, Split::Test]
            .iter()
            .map(|&s| format!("{} {}", s.tag(), ds.indices(s).len()))
            .collect();
        self.log("generate", &[format!("rows {}: {}", ds.len(), counts.join(", "))])?;
        self.prepared = Some(Prepared::new(ds)?);
        Ok(path)
    }

    /// Trains one model per seed and writes `model.json`.
    pub fn train(&mut self) -> Result<Vec<(u64, TrainedModel)>> {
        let cfg = self.cfg.clone();
        let data = self.prepared()?.clone();
        let mut trained = Vec::new();
        let mut lines = Vec::new();
        for &seed in &cfg.seeds {
            let m = train(&cfg, &data, seed)?;
            let last_vae = m.vae_history.last();
            let last_oc = m.detector_history.last();
            lines.push(format!(
                "seed {seed}: {} embedding epochs (final total {}, recon {}), {} detector epochs (final mse {}), threshold {}",
                m.vae_history.len(),
                last_vae.map_or("-".into(), |e| fmt_f64(e.total)),
                last_vae.map_or("-".into(), |e| fmt_f64(e.recon)),
                m.detector_history.len(),
                last_oc.map_or("-".into(), |e| fmt_f64(e.mse)),
                fmt_f64(m.detector.threshold)
            ));
            trained.push((seed, m));
        }
        let bundle = ModelBundle {
            format_version: MODEL_FORMAT_VERSION,
            models: trained.iter().map(|(s, m)| ModelRecord::new(&cfg, *s, m)).collect(),
        };
        let text = serde_json::to_string(&bundle).map_err(|e| RunError::Invalid(e.to_string()))?;
        self.write(Artifact::Model, &format!("{text}\n"))?;
        self.log("train", &lines)?;
        Ok(trained)
    }

    /// Writes `detections.csv` and returns per-seed records.
    pub fn detect(&mut self) -> Result<Vec<EvaluationRecord>> {
        let models = self.models()?;
        let cfg = self.cfg.clone();
        let data = self.prepared()?.clone();
        let mut out = String::from("seed,row,t,split,score,predicted_health,state\n");
        let mut records = Vec::new();
        let mut lines = Vec::new();
        for (seed, m) in &models {
            let (ev, rows) = evaluate(&cfg, &data, m, *seed, EvaluationScope::detection_only())?;
            for (k, &r) in rows.rows.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{seed},{r},{},{},{},{},{}",
                    fmt_f64(data.raw.t[r]),
                    data.raw.split[r].tag(),
                    fmt_f64(rows.scores[k]),
                    u8::from(rows.healthy[k]),
                    data.raw.state[r].map(|s| s.to_string()).unwrap_or_default()
                );
            }
            lines.push(format!(
                "seed {seed}: accuracy {:.3}%, false alarms {}/{}, missed faults {}/{}",
                ev.detection.accuracy,
                ev.detection.false_alarms,
                ev.detection.healthy,
                ev.detection.missed_faults,
                ev.detection.faulty
            ));
            records.push(EvaluationRecord::new(cfg.variant, &ev));
        }
        self.write(Artifact::Detections, &out)?;
        self.log("detect", &lines)?;
        Ok(records)
    }

    /// Writes the reachability profile and labels to `clusters.csv`.
    pub fn segment(&mut self) -> Result<Vec<EvaluationRecord>> {
        let models = self.models()?;
        let cfg = self.cfg.clone();
        let data = self.prepared()?.clone();
        let scope = EvaluationScope {
            segmentation: true,
            ..EvaluationScope::detection_only()
        };
        let mut out = String::from("seed,order,row,reachability,core_distance,label,state\n");
        let mut records = Vec::new();
        let mut lines = Vec::new();
        for (seed, m) in &models {
            let (ev, rows) = evaluate(&cfg, &data, m, *seed, scope)?;
            let c = rows.clusters.as_ref().expect("segmentation requested");
            for (pos, &p) in c.ordering.iter().enumerate() {
                let r = rows.rows[p];
                let _ = writeln!(
                    out,
                    "{seed},{pos},{r},{},{},{},{}",
                    fmt_f64(c.reachability[p]),
                    fmt_f64(c.core_distances[p]),
                    c.labels[p],
                    data.raw.state[r].map(|s| s.to_string()).unwrap_or_default()
                );
            }
            if let Some(s) = ev.segmentation {
                lines.push(format!(
                    "seed {seed}: {} clusters, AMI {:.4}, homogeneity {:.4}, completeness {:.4}",
                    s.clusters, s.ami, s.homogeneity, s.completeness
                ));
            }
            records.push(EvaluationRecord::new(cfg.variant, &ev));
        }
        self.write(Artifact::Clusters, &out)?;
        self.log("segment", &lines)?;
        Ok(records)
    }

    /// Full evaluation: writes `metrics.csv` (per seed) and `metrics.md` (aggregated).
    pub fn metrics(&mut self) -> Result<VariantSummary> {
        let models = self.models()?;
        let cfg = self.cfg.clone();
        let data = self.prepared()?.clone();
        let scope = EvaluationScope::from_config(&cfg);
        let mut records = Vec::new();
        for (seed, m) in &models {
            let (ev, _) = evaluate(&cfg, &data, m, *seed, scope)?;
            records.push(EvaluationRecord::new(cfg.variant, &ev));
        }
        let csv = records_csv(&records).map_err(|e| RunError::Invalid(e.to_string()))?;
        self.write(Artifact::MetricsCsv, &csv)?;
        let summary = VariantSummary::from_records(cfg.variant, &records);
        self.write(
            Artifact::MetricsMarkdown,
            &markdown_report(&cfg.name, std::slice::from_ref(&summary)),
        )?;
        let lines: Vec<String> = records
            .iter()
            .map(|r| format!("seed {}: accuracy {:.3}%", r.seed, r.accuracy))
            .collect();
        self.log("metrics", &lines)?;
        Ok(summary)
    }

    /// t-SNE of the first seed's latent means, colored by its OPTICS clusters.
    pub fn project(&mut self) -> Result<TsneResult> {
        let models = self.models()?;
        let cfg = self.cfg.clone();
        let data = self.prepared()?.clone();
        let (seed, m) = models.first().ok_or_else(|| RunError::Invalid("no seeds configured".into()))?;
        let scope = EvaluationScope {
            segmentation: true,
            ..EvaluationScope::detection_only()
        };
        let (_, rows) = evaluate(&cfg, &data, m, *seed, scope)?;
        let params = TsneParams {
            seed: stage_seed(*seed, Stage::Projection) ^ cfg.tsne.seed,
            ..cfg.tsne
        };
        let result = tsne(&rows.latent, &params)?;
        let labels = rows.clusters.as_ref().map(|c| c.labels.clone()).unwrap_or_default();
        let states: Vec<Option<u32>> = rows.rows.iter().map(|&r| data.raw.state[r]).collect();
        self.write(Artifact::TsneCsv, &embedding_csv(&result.embedding, &labels, &states))?;
        self.write(Artifact::TsneSvg, &embedding_svg(&result.embedding, &labels))?;
        self.log(
            "project",
            &[format!(
                "seed {seed}: {} points, KL {} -> {}",
                rows.rows.len(),
                fmt_f64(result.initial_kl()),
                fmt_f64(result.final_kl())
            )],
        )?;
        Ok(result)
    }

    /// Writes `sweep.md` and `sweep.csv`.
    pub fn sweep(&mut self, param: SweepParam, values: &[f64]) -> Result<Sweep> {
        if values.is_empty() {
            return Err(RunError::Invalid("sweep needs at least one value".into()));
        }
        let cfg = self.cfg.clone();
        let data = self.prepared()?.clone();
        let sweep = run_sweep(&cfg, &data, param, values)?;
        self.write(
            Artifact::SweepMarkdown,
            &format!("# {} sweep: {}\n\n{}", param.symbol(), cfg.variant.label(), sweep.markdown()),
        )?;
        self.write(Artifact::SweepCsv, &sweep.csv())?;
        let shown: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.log("sweep", &[format!("{} over {}", param.symbol(), shown.join(", "))])?;
        Ok(sweep)
    }

    /// Every stage in dependency order.
    pub fn run_all(&mut self) -> Result<VariantSummary> {
        self.generate()?;
        self.train()?;
        self.detect()?;
        self.segment()?;
        let summary = self.metrics()?;
        if self.cfg.metrics.tsne {
            self.project()?;
        }
        Ok(summary)
    }
}

/// Consolidated markdown over one or more run directories; reads `metrics.csv`
/// and, when present, `sweep.md` from each.
pub fn report(run_dirs: &[PathBuf]) -> Result<String> {
    if run_dirs.is_empty() {
        return Err(RunError::Invalid("report needs at least one run directory".into()));
    }
    let mut summaries = Vec::new();
    let mut sweeps = String::new();
    for dir in run_dirs {
        let path = dir.join(Artifact::MetricsCsv.file_name());
        if !path.exists() {
            return Err(RunError::MissingArtifact {
                artifact: Artifact::MetricsCsv,
                dir: dir.clone(),
            });
        }
        let text = std::fs::read_to_string(&path).map_err(|source| RunError::Io { path, source })?;
        let records = parse_records_csv(&text).map_err(|e| RunError::Corrupt {
            file: "metrics.csv",
            message: e.to_string(),
        })?;
        let Some(first) = records.first() else {
            return Err(RunError::Corrupt {
                file: "metrics.csv",
                message: "no rows".into(),
            });
        };
        summaries.push(VariantSummary::from_records(first.variant, &records));
        let sweep_path = dir.join(Artifact::SweepMarkdown.file_name());
        if let Ok(s) = std::fs::read_to_string(&sweep_path) {
            sweeps.push_str(&s.replacen("# ", "### ", 1));
            sweeps.push('\n');
        }
    }
    let mut out = markdown_report("Report", &summaries);
    if !sweeps.is_empty() {
        out.push_str("\n## Ablation sweeps\n\n");
        out.push_str(&sweeps);
    }
    Ok(out)
}
