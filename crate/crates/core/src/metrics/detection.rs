//! Binary fault-detection scores. `true` means healthy throughout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DetectionScoreError {
    #[error("no samples to score")]
    Empty,
    #[error("truth has {truth} entries but predictions have {predicted}")]
    LengthMismatch { truth: usize, predicted: usize },
}

/// Percentages in `[0, 100]`. Rates whose denominator is empty are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub accuracy: f64,
    /// Truly faulty samples flagged faulty.
    pub detection_rate: Option<f64>,
    /// Truly healthy samples flagged faulty.
    pub false_alarm_rate: Option<f64>,
    pub healthy: usize,
    pub faulty: usize,
    pub missed_faults: usize,
    pub false_alarms: usize,
}

pub fn detection_scores(truth: &[bool], predicted: &[bool]) -> Result<DetectionScores, DetectionScoreError> {
    if truth.len() != predicted.len() {
        return Err(DetectionScoreError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(DetectionScoreError::Empty);
    }
    let healthy = truth.iter().filter(|&&h| h).count();
    let faulty = truth.len() - healthy;
    let false_alarms = truth.iter().zip(predicted).filter(|&(&t, &p)| t && !p).count();
    let missed_faults = truth.iter().zip(predicted).filter(|&(&t, &p)| !t && p).count();
    let pct = |num: usize, den: usize| (den > 0).then(|| 100.0 * num as f64 / den as f64);
    Ok(DetectionScores {
        accuracy: 100.0 * (truth.len() - false_alarms - missed_faults) as f64 / truth.len() as f64,
        detection_rate: pct(faulty - missed_faults, faulty),
        false_alarm_rate: pct(false_alarms, healthy),
        healthy,
        faulty,
        missed_faults,
        false_alarms,
    })
}
