//! Multi-seed aggregation and table rendering (markdown and CSV).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::experiment::pipeline::Evaluation;
use crate::vae::Variant;

/// Mean and sample standard deviation; `std` is `None` for fewer than two values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: Option<f64>,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        Some(Self { mean, std, n })
    }

    /// `None` unless every record has the value.
    fn collect<F: Fn(&EvaluationRecord) -> Option<f64>>(records: &[EvaluationRecord], f: F) -> Option<Self> {
        let values: Vec<f64> = records.iter().filter_map(f).collect();
        if values.len() == records.len() {
            Self::of(&values)
        } else {
            None
        }
    }

    pub fn render(&self, decimals: usize) -> String {
        match self.std {
            Some(s) => format!("{:.*} ± {:.*}", decimals, self.mean, decimals, s),
            None => format!("{:.*}", decimals, self.mean),
        }
    }
}

fn cell(stat: &Option<Stat>, decimals: usize) -> String {
    stat.as_ref().map_or_else(|| "–".to_string(), |s| s.render(decimals))
}

fn csv_pair(stat: &Option<Stat>) -> String {
    match stat {
        Some(s) => format!("{:?},{}", s.mean, s.std.map(|v| format!("{v:?}")).unwrap_or_default()),
        None => ",".to_string(),
    }
}

/// Flat per-seed evaluation row, the schema of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub variant: Variant,
    pub seed: u64,
    pub accuracy: f64,
    pub detection_rate: Option<f64>,
    pub false_alarm_rate: Option<f64>,
    pub healthy: usize,
    pub faulty: usize,
    pub missed_faults: usize,
    pub false_alarms: usize,
    pub accuracy_unlabeled: f64,
    pub accuracy_test: f64,
    pub clusters: Option<usize>,
    pub ami: Option<f64>,
    pub homogeneity: Option<f64>,
    pub completeness: Option<f64>,
    pub ami_input: Option<f64>,
    pub amig: Option<f64>,
    pub lsg: Option<f64>,
    pub mi_input_latent: Option<f64>,
    pub mi_latent_reconstruction: Option<f64>,
    pub recon_loss: Option<f64>,
    pub total_loss: Option<f64>,
}

impl EvaluationRecord {
    pub fn new(variant: Variant, e: &Evaluation) -> Self {
        let s = e.segmentation;
        let r = e.representation;
        Self {
            variant,
            seed: e.seed,
            accuracy: e.detection.accuracy,
            detection_rate: e.detection.detection_rate,
            false_alarm_rate: e.detection.false_alarm_rate,
            healthy: e.detection.healthy,
            faulty: e.detection.faulty,
            missed_faults: e.detection.missed_faults,
            false_alarms: e.detection.false_alarms,
            accuracy_unlabeled: e.detection_unlabeled.accuracy,
            accuracy_test: e.detection_test.accuracy,
            clusters: s.map(|s| s.clusters),
            ami: s.map(|s| s.ami),
            homogeneity: s.map(|s| s.homogeneity),
            completeness: s.map(|s| s.completeness),
            ami_input: r.ami_input,
            amig: r.amig,
            lsg: r.lsg,
            mi_input_latent: r.mi_input_latent,
            mi_latent_reconstruction: r.mi_latent_reconstruction,
            recon_loss: e.recon_loss,
            total_loss: e.total_loss,
        }
    }
}

pub fn records_csv(records: &[EvaluationRecord]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_records_csv(text: &str) -> Result<Vec<EvaluationRecord>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

/// Seed-aggregated scores of one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub seeds: Vec<u64>,
    pub accuracy: Option<Stat>,
    pub detection_rate: Option<Stat>,
    pub false_alarm_rate: Option<Stat>,
    pub clusters: Option<Stat>,
    pub ami: Option<Stat>,
    pub homogeneity: Option<Stat>,
    pub completeness: Option<Stat>,
    pub amig: Option<Stat>,
    pub lsg: Option<Stat>,
    pub mi_input_latent: Option<Stat>,
    pub mi_latent_reconstruction: Option<Stat>,
    pub recon_loss: Option<Stat>,
    pub total_loss: Option<Stat>,
}

impl VariantSummary {
    pub fn new(variant: Variant, evals: &[Evaluation]) -> Self {
        let records: Vec<EvaluationRecord> = evals.iter().map(|e| EvaluationRecord::new(variant, e)).collect();
        Self::from_records(variant, &records)
    }

    pub fn from_records(variant: Variant, records: &[EvaluationRecord]) -> Self {
        Self {
            variant,
            seeds: records.iter().map(|r| r.seed).collect(),
            accuracy: Stat::collect(records, |r| Some(r.accuracy)),
            detection_rate: Stat::collect(records, |r| r.detection_rate),
            false_alarm_rate: Stat::collect(records, |r| r.false_alarm_rate),
            clusters: Stat::collect(records, |r| r.clusters.map(|c| c as f64)),
            ami: Stat::collect(records, |r| r.ami),
            homogeneity: Stat::collect(records, |r| r.homogeneity),
            completeness: Stat::collect(records, |r| r.completeness),
            amig: Stat::collect(records, |r| r.amig),
            lsg: Stat::collect(records, |r| r.lsg),
            mi_input_latent: Stat::collect(records, |r| r.mi_input_latent),
            mi_latent_reconstruction: Stat::collect(records, |r| r.mi_latent_reconstruction),
            recon_loss: Stat::collect(records, |r| r.recon_loss),
            total_loss: Stat::collect(records, |r| r.total_loss),
        }
    }
}

/// Detection table: accuracy, fault-detection rate, false-alarm rate.
pub fn detection_table(rows: &[VariantSummary]) -> String {
    let mut out = String::from("| Model | Acc (%) | Detection rate (%) | False-alarm rate (%) |\n|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            r.variant.label(),
            cell(&r.accuracy, 1),
            cell(&r.detection_rate, 1),
            cell(&r.false_alarm_rate, 1)
        );
    }
    out
}

/// Segmentation table: cluster count, AMI, homogeneity, completeness.
pub fn segmentation_table(rows: &[VariantSummary]) -> String {
    let mut out = String::from("| Model | R | AMI | h | c |\n|---|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            r.variant.label(),
            cell(&r.clusters, 1),
            cell(&r.ami, 2),
            cell(&r.homogeneity, 2),
            cell(&r.completeness, 2)
        );
    }
    out
}

/// Representation table: AMIG, LSG and the two mean MI maps.
pub fn representation_table(rows: &[VariantSummary]) -> String {
    let mut out = String::from("| Model | AMIG | LSG (%) | Î(x, μ) | Î(z, x̄) |\n|---|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            r.variant.label(),
            cell(&r.amig, 2),
            cell(&r.lsg, 1),
            cell(&r.mi_input_latent, 2),
            cell(&r.mi_latent_reconstruction, 2)
        );
    }
    out
}

pub fn markdown_report(title: &str, rows: &[VariantSummary]) -> String {
    format!(
        "# {title}\n\nMean ± sample standard deviation over seeds.\n\n## Fault detection\n\n{}\n## Fault segmentation\n\n{}\n## Representation\n\n{}",
        detection_table(rows),
        segmentation_table(rows),
        representation_table(rows)
    )
}

const SUMMARY_COLUMNS: [&str; 13] = [
    "accuracy",
    "detection_rate",
    "false_alarm_rate",
    "clusters",
    "ami",
    "homogeneity",
    "completeness",
    "amig",
    "lsg",
    "mi_input_latent",
    "mi_latent_reconstruction",
    "recon_loss",
    "total_loss",
];

/// One row per variant with `<metric>_mean,<metric>_std` column pairs.
pub fn summary_csv(rows: &[VariantSummary]) -> String {
    let mut out = String::from("variant,seeds");
    for c in SUMMARY_COLUMNS {
        let _ = write!(out, ",{c}_mean,{c}_std");
    }
    out.push('\n');
    for r in rows {
        let stats = [
            &r.accuracy,
            &r.detection_rate,
            &r.false_alarm_rate,
            &r.clusters,
            &r.ami,
            &r.homogeneity,
            &r.completeness,
            &r.amig,
            &r.lsg,
            &r.mi_input_latent,
            &r.mi_latent_reconstruction,
            &r.recon_loss,
            &r.total_loss,
        ];
        let seeds: Vec<String> = r.seeds.iter().map(u64::to_string).collect();
        let _ = write!(out, "{},{}", r.variant.id(), seeds.join(" "));
        for s in stats {
            let _ = write!(out, ",{}", csv_pair(s));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_standard_deviation() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.std.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[7.0]).unwrap().std, None);
        assert!(Stat::of(&[]).is_none());
        assert_eq!(Stat::of(&[100.0, 100.0]).unwrap().render(1), "100.0 ± 0.0");
    }
}
