use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use opendiag::datagen::GeneratorSpec;
use opendiag::experiment::{report, Artifact, DatasetSource, ExperimentConfig, Runner, SweepParam};
use opendiag::vae::Variant;

const DEFAULT_NAME: &str = "run";

#[derive(Parser)]
#[command(name = "opendiag", version, about = "Open-set fault diagnostics experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the surrogate dataset (or import the configured CSV) into dataset.csv
    #[command(alias = "gen")]
    Generate {
        #[command(flatten)]
        common: Common,
        /// Generator spec JSON; defaults to the built-in fault table
        #[arg(long, value_name = "PATH")]
        spec: Option<PathBuf>,
        /// Data-generation seed
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
    /// Train one model per seed into model.json
    Train(Staged),
    /// Score every unlabeled and test row into detections.csv
    Detect(Staged),
    /// Cluster the latent means with OPTICS into clusters.csv
    Segment(Staged),
    /// Full evaluation into metrics.csv and metrics.md
    Metrics(Staged),
    /// t-SNE projection of the latent means into tsne.csv and tsne.svg
    Project(Staged),
    /// Retrain over a grid of β or γ values into sweep.md and sweep.csv
    Sweep {
        #[command(flatten)]
        staged: Staged,
        #[arg(long, value_name = "beta|gamma")]
        param: SweepParam,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
    },
    /// Consolidated markdown over run directories (default: every run under --out)
    Report {
        #[arg(long, value_name = "DIR", default_value = "runs")]
        out: PathBuf,
        dirs: Vec<PathBuf>,
    },
    /// Every stage in order: generate, train, detect, segment, metrics (and project if enabled)
    Run(Staged),
}

#[derive(Args)]
struct Common {
    /// Experiment config JSON
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Run name; defaults to the config's name
    #[arg(long)]
    name: Option<String>,
    #[arg(long, value_name = "DIR", default_value = "runs")]
    out: PathBuf,
    #[arg(long, value_name = "NAME")]
    variant: Option<Variant>,
}

#[derive(Args)]
struct Staged {
    #[command(flatten)]
    common: Common,
    /// Single training seed
    #[arg(long, value_name = "N", conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated training seeds
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    seeds: Option<Vec<u64>>,
}

impl Common {
    /// Explicit `--config`, else the run directory's recorded config, else defaults.
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let name = self.name.as_deref().unwrap_or(DEFAULT_NAME);
                let recorded = self.out.join(name).join(Artifact::Config.file_name());
                if recorded.exists() {
                    ExperimentConfig::load(&recorded)?
                } else {
                    ExperimentConfig::new(name, Variant::KilAdaVae)
                }
            }
        };
        if let Some(name) = &self.name {
            cfg.name = name.clone();
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        Ok(cfg)
    }
}

impl Staged {
    fn runner(&self) -> Result<Runner> {
        let mut cfg = self.common.resolve()?;
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        Ok(Runner::new(cfg, &self.common.out)?)
    }
}

fn run_dirs(out: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(out).with_context(|| format!("cannot list {}", out.display()))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(Artifact::MetricsCsv.file_name()).exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("no run under {} has {}; run the `metrics` stage first", out.display(), Artifact::MetricsCsv.file_name());
    }
    Ok(dirs)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate { common, spec, seed } => {
            let mut cfg = common.resolve()?;
            if spec.is_some() || seed.is_some() {
                let (mut s, mut d) = match cfg.dataset {
                    DatasetSource::Generate { spec, seed } => (spec, seed),
                    DatasetSource::Csv { .. } => (GeneratorSpec::table(), 7),
                };
                if let Some(path) = spec {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
                    s = serde_json::from_str(&text).with_context(|| format!("{} is not a valid generator spec", path.display()))?;
                }
                if let Some(n) = seed {
                    d = n;
                }
                cfg.dataset = DatasetSource::Generate { spec: s, seed: d };
            }
            let mut runner = Runner::new(cfg, &common.out)?;
            println!("{}", runner.generate()?.display());
        }
        Command::Train(s) => {
            let mut runner = s.runner()?;
            runner.train()?;
            println!("{}", runner.path(Artifact::Model).display());
        }
        Command::Detect(s) => {
            let mut runner = s.runner()?;
            for r in runner.detect()? {
                println!("seed {}: accuracy {:.2}%", r.seed, r.accuracy);
            }
        }
        Command::Segment(s) => {
            let mut runner = s.runner()?;
            for r in runner.segment()? {
                println!(
                    "seed {}: {} clusters, AMI {:.3}",
                    r.seed,
                    r.clusters.unwrap_or_default(),
                    r.ami.unwrap_or(f64::NAN)
                );
            }
        }
        Command::Metrics(s) => {
            let mut runner = s.runner()?;
            runner.metrics()?;
            print!("{}", std::fs::read_to_string(runner.path(Artifact::MetricsMarkdown))?);
        }
        Command::Project(s) => {
            let mut runner = s.runner()?;
            let r = runner.project()?;
            println!("KL {:.4} -> {:.4}", r.initial_kl(), r.final_kl());
        }
        Command::Sweep { staged, param, values } => {
            let mut runner = staged.runner()?;
            print!("{}", runner.sweep(param, &values)?.markdown());
        }
        Command::Report { out, dirs } => {
            let dirs = if dirs.is_empty() { run_dirs(&out)? } else { dirs };
            let text = report(&dirs)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join(Artifact::Report.file_name()), &text)?;
            print!("{text}");
        }
        Command::Run(s) => {
            let mut runner = s.runner()?;
            runner.run_all()?;
            print!("{}", std::fs::read_to_string(runner.path(Artifact::MetricsMarkdown))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
