//! One-parameter ablation sweeps over the KL weight or the labeled KL weight.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::experiment::config::ExperimentConfig;
use crate::experiment::pipeline::{evaluate, train, EvaluationScope, Prepared, Result};
use crate::experiment::report::Stat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Beta,
    Gamma,
}

impl SweepParam {
    pub fn symbol(self) -> &'static str {
        match self {
            SweepParam::Beta => "β",
            SweepParam::Gamma => "γ",
        }
    }

    /// Evaluation stages each sweep needs for its table.
    fn scope(self) -> EvaluationScope {
        match self {
            SweepParam::Beta => EvaluationScope {
                segmentation: false,
                amig: false,
                lsg: false,
                mmi: true,
            },
            SweepParam::Gamma => EvaluationScope {
                segmentation: true,
                amig: false,
                lsg: false,
                mmi: false,
            },
        }
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "beta" => Ok(SweepParam::Beta),
            "gamma" => Ok(SweepParam::Gamma),
            other => Err(format!("unknown sweep parameter `{other}`; valid parameters: beta, gamma")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub accuracy: Option<Stat>,
    pub clusters: Option<Stat>,
    pub ami: Option<Stat>,
    pub mi_input_latent: Option<Stat>,
    pub mi_latent_reconstruction: Option<Stat>,
    pub recon_loss: Option<Stat>,
    pub total_loss: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
}

/// Trains and evaluates `cfg` once per value and seed, overriding the swept weight.
pub fn run_sweep(cfg: &ExperimentConfig, data: &Prepared, param: SweepParam, values: &[f64]) -> Result<Sweep> {
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut c = cfg.clone();
        match param {
            SweepParam::Beta => c.model.beta = Some(value),
            SweepParam::Gamma => c.model.gamma = Some(value),
        }
        let mut evals = Vec::with_capacity(c.seeds.len());
        for &seed in &c.seeds {
            let model = train(&c, data, seed)?;
            evals.push(evaluate(&c, data, &model, seed, param.scope())?.0);
        }
        let summary = crate::experiment::report::VariantSummary::new(c.variant, &evals);
        rows.push(SweepRow {
            value,
            accuracy: summary.accuracy,
            clusters: summary.clusters,
            ami: summary.ami,
            mi_input_latent: summary.mi_input_latent,
            mi_latent_reconstruction: summary.mi_latent_reconstruction,
            recon_loss: summary.recon_loss,
            total_loss: summary.total_loss,
        });
    }
    Ok(Sweep { param, rows })
}

fn cell(s: &Option<Stat>, decimals: usize) -> String {
    s.as_ref().map_or_else(|| "–".to_string(), |s| s.render(decimals))
}

fn raw(s: &Option<Stat>) -> String {
    match s {
        Some(s) => format!("{:?},{}", s.mean, s.std.map(|v| format!("{v:?}")).unwrap_or_default()),
        None => ",".into(),
    }
}

impl Sweep {
    pub fn markdown(&self) -> String {
        let sym = self.param.symbol();
        let mut out = match self.param {
            SweepParam::Beta => format!("| {sym} | Acc (%) | Î(x, μ) | Î(z, x̄) | ℓ2-loss | Total loss |\n|---|---|---|---|---|---|\n"),
            SweepParam::Gamma => format!("| {sym} | Acc (%) | R | AMI |\n|---|---|---|---|\n"),
        };
        for r in &self.rows {
            let _ = match self.param {
                SweepParam::Beta => writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} |",
                    r.value,
                    cell(&r.accuracy, 1),
                    cell(&r.mi_input_latent, 2),
                    cell(&r.mi_latent_reconstruction, 2),
                    cell(&r.recon_loss, 4),
                    cell(&r.total_loss, 4)
                ),
                SweepParam::Gamma => writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    r.value,
                    cell(&r.accuracy, 1),
                    cell(&r.clusters, 1),
                    cell(&r.ami, 2)
                ),
            };
        }
        out
    }

    pub fn csv(&self) -> String {
        let name = match self.param {
            SweepParam::Beta => "beta",
            SweepParam::Gamma => "gamma",
        };
        let mut out = match self.param {
            SweepParam::Beta => format!(
                "{name},accuracy_mean,accuracy_std,mi_input_latent_mean,mi_input_latent_std,mi_latent_reconstruction_mean,mi_latent_reconstruction_std,recon_loss_mean,recon_loss_std,total_loss_mean,total_loss_std\n"
            ),
            SweepParam::Gamma => format!("{name},accuracy_mean,accuracy_std,clusters_mean,clusters_std,ami_mean,ami_std\n"),
        };
        for r in &self.rows {
            let _ = match self.param {
                SweepParam::Beta => writeln!(
                    out,
                    "{:?},{},{},{},{},{}",
                    r.value,
                    raw(&r.accuracy),
                    raw(&r.mi_input_latent),
                    raw(&r.mi_latent_reconstruction),
                    raw(&r.recon_loss),
                    raw(&r.total_loss)
                ),
                SweepParam::Gamma => writeln!(out, "{:?},{},{},{}", r.value, raw(&r.accuracy), raw(&r.clusters), raw(&r.ami)),
            };
        }
        out
    }
}
