//! Synthetic turbofan condition-monitoring benchmark: generator, dataset
//! container, CSV persistence, min/max normalization and validation split.
//!
//! The generator is a statistical stand-in for an engine simulation. Flight
//! conditions (altitude, Mach number, power lever angle) drift smoothly and
//! drive a fixed nonlinear static response map for the remaining channels;
//! each fault multiplies a sparse set of channels by `1 + m * gain * w_c`
//! for the duration of its segment.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Matrix;

pub const N_CHANNELS: usize = 13;

pub const CHANNELS: [&str; N_CHANNELS] = [
    "alt", "MN", "PLA", "Wf", "N_LPC", "N_HPC", "S45_Tt", "Pa", "S2_Pt", "S25_Pt", "S36_Pt", "S5_Pt", "VAFN",
];

const CH_WF: usize = 3;
const CH_NLPC: usize = 4;
const CH_NHPC: usize = 5;
const CH_T45: usize = 6;
const CH_S25: usize = 9;
const CH_S36: usize = 10;
const CH_S5: usize = 11;
const CH_VAFN: usize = 12;

pub const SPEC_VERSION: u32 = 1;
/// Signature gain of the default table; strong enough that every fault
/// separates from healthy operation in a learned 8-D latent space.
pub const DEFAULT_SIGNATURE_GAIN: f64 = 10.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed header, missing column `{column}`")]
    MissingColumn { line: usize, column: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RowLength { line: usize, expected: usize, found: usize },
    #[error("line {line}: unknown split tag `{tag}` (expected S_T, S_V, D_U or D_T)")]
    UnknownSplit { line: usize, tag: String },
    #[error("line {line}: invalid h_s `{value}` (expected 1, 0 or unknown)")]
    InvalidHealth { line: usize, value: String },
    #[error("line {line}: invalid state id `{value}`")]
    InvalidState { line: usize, value: String },
    #[error("line {line}: invalid number `{value}` in column `{column}`")]
    InvalidNumber { line: usize, column: String, value: String },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("unknown fault component `{0}`")]
    UnknownComponent(String),
    #[error("cannot split {rows} rows with validation fraction {fraction}")]
    SplitTooSmall { rows: usize, fraction: f64 },
    #[error("no rows to fit the scaler on")]
    EmptyFit,
    #[error("row {row}: non-finite value in channel `{channel}`")]
    NonFinite { row: usize, channel: &'static str },
}

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    /// Healthy labeled training rows.
    #[serde(rename = "S_T")]
    Train,
    /// Healthy labeled validation rows.
    #[serde(rename = "S_V")]
    Validation,
    /// Unlabeled rows available to semi-supervised training.
    #[serde(rename = "D_U")]
    Unlabeled,
    /// Held-out test rows.
    #[serde(rename = "D_T")]
    Test,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "S_T",
            Split::Validation => "S_V",
            Split::Unlabeled => "D_U",
            Split::Test => "D_T",
        }
    }

    pub fn is_labeled(self) -> bool {
        matches!(self, Split::Train | Split::Validation)
    }
}

impl FromStr for Split {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "S_T" => Ok(Split::Train),
            "S_V" => Ok(Split::Validation),
            "D_U" => Ok(Split::Unlabeled),
            "D_T" => Ok(Split::Test),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Health label as visible to the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Health {
    Healthy,
    Faulty,
    Unknown,
}

impl Health {
    pub fn token(self) -> &'static str {
        match self {
            Health::Healthy => "1",
            Health::Faulty => "0",
            Health::Unknown => "unknown",
        }
    }
}

/// Condition-monitoring rows with split tags, visible health labels and
/// (evaluation-only) ground-truth states; state 0 is healthy.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub t: Vec<f64>,
    pub x: Matrix,
    pub split: Vec<Split>,
    pub health: Vec<Health>,
    pub state: Vec<Option<u32>>,
}

/// Feature rows available to training; no ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingView {
    pub train: Matrix,
    pub validation: Matrix,
    pub unlabeled: Matrix,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == split).collect()
    }

    pub fn rows(&self, split: Split) -> Matrix {
        self.x.select_rows(&self.indices(split))
    }

    pub fn training_view(&self) -> TrainingView {
        TrainingView {
            train: self.rows(Split::Train),
            validation: self.rows(Split::Validation),
            unlabeled: self.rows(Split::Unlabeled),
        }
    }

    /// Copy with every channel passed through `scaler`.
    pub fn scaled(&self, scaler: &Scaler) -> Dataset {
        Dataset {
            x: scaler.apply(&self.x),
            ..self.clone()
        }
    }

    fn check(&self) -> Result<()> {
        let n = self.len();
        if self.t.len() != n || self.split.len() != n || self.health.len() != n || self.state.len() != n {
            return Err(DataError::InvalidSpec("dataset columns have different lengths".into()));
        }
        for r in 0..n {
            if let Some(c) = self.x.row(r).iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { row: r, channel: CHANNELS[c] });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// generator spec

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Fan,
    Lpc,
    Hpc,
    Hpt,
    Lpt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultKind {
    Efficiency,
    Capacity,
}

impl FromStr for Component {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fan" => Ok(Component::Fan),
            "lpc" => Ok(Component::Lpc),
            "hpc" => Ok(Component::Hpc),
            "hpt" => Ok(Component::Hpt),
            "lpt" => Ok(Component::Lpt),
            _ => Err(DataError::UnknownComponent(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlightCondition {
    S1,
    S2,
    S3,
}

/// Start and end of altitude (ft), Mach number and power lever angle (deg).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionRamp {
    pub alt: (f64, f64),
    pub mn: (f64, f64),
    pub pla: (f64, f64),
}

impl FlightCondition {
    pub fn ramp(self) -> ConditionRamp {
        match self {
            FlightCondition::S1 => ConditionRamp {
                alt: (28_000.0, 28_000.0),
                mn: (0.727, 0.726),
                pla: (77.2, 75.8),
            },
            FlightCondition::S2 => ConditionRamp {
                alt: (31_000.0, 29_600.0),
                mn: (0.729, 0.722),
                pla: (80.0, 66.9),
            },
            FlightCondition::S3 => ConditionRamp {
                alt: (31_000.0, 30_000.0),
                mn: (0.727, 0.725),
                pla: (78.9, 78.7),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Destination {
    #[serde(rename = "D_U")]
    Unlabeled,
    #[serde(rename = "D_T")]
    Test,
}

impl Destination {
    pub fn split(self) -> Split {
        match self {
            Destination::Unlabeled => Split::Unlabeled,
            Destination::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    /// Ground-truth state id of the segment (1-based).
    pub case: u32,
    pub component: Component,
    pub kind: FaultKind,
    /// Percent.
    pub magnitude: f64,
    pub condition: FlightCondition,
    pub dataset: Destination,
    #[serde(default)]
    pub duration: Option<usize>,
}

/// Generator settings, serialized as the generator JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub version: u32,
    pub healthy_labeled_seconds: usize,
    pub healthy_unlabeled_seconds: usize,
    pub fault_duration_seconds: usize,
    pub validation_fraction: f64,
    /// Measurement noise standard deviation relative to each channel's nominal level.
    pub noise_fraction: f64,
    /// Relative channel change per percent of fault magnitude.
    pub signature_gain: f64,
    pub faults: Vec<FaultSpec>,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self::table()
    }
}

impl GeneratorSpec {
    /// The default 17-fault layout.
    pub fn table() -> Self {
        use Component::*;
        use Destination::{Test as DT, Unlabeled as DU};
        use FaultKind::*;
        use FlightCondition::*;
        let rows = [
            (Fan, Efficiency, 1.0, S1, DU),
            (Fan, Efficiency, 1.5, S1, DT),
            (Fan, Capacity, 1.0, S1, DT),
            (Lpc, Efficiency, 1.5, S1, DT),
            (Lpc, Capacity, 1.5, S1, DT),
            (Lpc, Capacity, 2.0, S1, DU),
            (Hpc, Efficiency, 1.0, S2, DU),
            (Hpc, Efficiency, 1.5, S3, DT),
            (Hpc, Efficiency, 2.0, S1, DU),
            (Hpc, Capacity, 1.0, S1, DT),
            (Hpc, Capacity, 2.0, S2, DU),
            (Hpt, Efficiency, 1.0, S1, DU),
            (Hpt, Efficiency, 1.5, S3, DT),
            (Hpt, Efficiency, 2.0, S1, DU),
            (Hpt, Capacity, 1.5, S3, DT),
            (Hpt, Capacity, 2.0, S1, DU),
            (Lpt, Capacity, 1.0, S2, DT),
        ];
        Self {
            version: SPEC_VERSION,
            healthy_labeled_seconds: 10_000,
            healthy_unlabeled_seconds: 500,
            fault_duration_seconds: 200,
            validation_fraction: 0.06,
            noise_fraction: 0.001,
            signature_gain: DEFAULT_SIGNATURE_GAIN,
            faults: rows
                .iter()
                .enumerate()
                .map(|(i, &(component, kind, magnitude, condition, dataset))| FaultSpec {
                    case: i as u32 + 1,
                    component,
                    kind,
                    magnitude,
                    condition,
                    dataset,
                    duration: None,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DataError::InvalidSpec(m));
        if self.version != SPEC_VERSION {
            return bad(format!("unsupported spec version {} (expected {SPEC_VERSION})", self.version));
        }
        if self.healthy_labeled_seconds == 0 {
            return bad("healthy_labeled_seconds must be positive".into());
        }
        if self.fault_duration_seconds == 0 {
            return bad("fault_duration_seconds must be positive".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!("validation_fraction must lie in (0, 1), got {}", self.validation_fraction));
        }
        if !(self.noise_fraction >= 0.0 && self.noise_fraction.is_finite()) {
            return bad("noise_fraction must be non-negative".into());
        }
        if !(self.signature_gain >= 0.0 && self.signature_gain.is_finite()) {
            return bad("signature_gain must be non-negative".into());
        }
        let mut cases: Vec<u32> = self.faults.iter().map(|f| f.case).collect();
        cases.sort_unstable();
        if cases.windows(2).any(|w| w[0] == w[1]) || cases.first() == Some(&0) {
            return bad("fault cases must be distinct and positive".into());
        }
        for f in &self.faults {
            if !(f.magnitude >= 0.0 && f.magnitude.is_finite()) {
                return bad(format!("case {}: magnitude must be non-negative", f.case));
            }
            if f.duration == Some(0) {
                return bad(format!("case {}: duration must be positive", f.case));
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.faults.len() + 1
    }
}

// ---------------------------------------------------------------------------
// surrogate engine

/// Altitude, Mach number and power lever angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub alt: f64,
    pub mn: f64,
    pub pla: f64,
}

/// Envelope of the healthy flight-condition walk.
pub const ALT_RANGE: (f64, f64) = (27_500.0, 31_500.0);
pub const MN_RANGE: (f64, f64) = (0.716, 0.735);
pub const PLA_RANGE: (f64, f64) = (64.0, 82.0);

const NOMINAL: Condition = Condition {
    alt: 29_500.0,
    mn: 0.7255,
    pla: 73.0,
};

/// Noise-free channel values at a flight condition.
pub fn engine_response(c: Condition) -> [f64; N_CHANNELS] {
    let t_amb = 518.67 - 0.003566 * c.alt;
    let pa = 14.696 * (1.0 - 6.8756e-6 * c.alt).powf(5.2559);
    let ram = 1.0 + 0.2 * c.mn * c.mn;
    let theta2 = t_amb * ram / 518.67;
    let p2 = pa * ram.powf(3.5);
    let delta2 = p2 / 14.696;
    let demand = (c.pla - 40.0) / 40.0;
    let wf = 1.2 * delta2 * theta2.sqrt() * demand.powf(1.6);
    let n_lpc = 2100.0 * theta2.sqrt() * demand.powf(0.35);
    let n_hpc = 16_000.0 * theta2.sqrt() * demand.powf(0.2);
    let t45 = 1600.0 * theta2 * demand.powf(0.5) * (1.0 + 0.04 * (c.mn - 0.72) * 10.0);
    let p25 = p2 * (1.8 + 0.6 * demand);
    let p36 = p25 * (12.0 + 6.0 * demand.powi(2));
    let p5 = p2 * (1.1 + 0.2 * demand.powf(1.3));
    let vafn = 1.0 - 0.3 * demand + 0.5 * (c.mn - 0.72);
    [c.alt, c.mn, c.pla, wf, n_lpc, n_hpc, t45, pa, p2, p25, p36, p5, vafn]
}

/// Sparse relative-change direction of a fault type over the channels.
pub fn fault_signature(component: Component, kind: FaultKind) -> [f64; N_CHANNELS] {
    use Component::*;
    use FaultKind::*;
    let entries: &[(usize, f64)] = match (component, kind) {
        (Fan, Efficiency) => &[(CH_NLPC, -0.6), (CH_S25, -0.8), (CH_WF, 0.5), (CH_T45, 0.4)],
        (Fan, Capacity) => &[(CH_NLPC, 0.8), (CH_S25, -0.5), (CH_WF, 0.4), (CH_VAFN, 0.6)],
        (Lpc, Efficiency) => &[(CH_S25, -0.6), (CH_S36, -0.5), (CH_T45, 0.6), (CH_NHPC, 0.4)],
        (Lpc, Capacity) => &[(CH_S25, 0.9), (CH_NLPC, -0.5), (CH_NHPC, -0.4), (CH_WF, -0.3)],
        (Hpc, Efficiency) => &[(CH_S36, -0.8), (CH_T45, 0.6), (CH_WF, 0.5), (CH_NHPC, -0.3)],
        (Hpc, Capacity) => &[(CH_S36, 0.7), (CH_NHPC, 0.6), (CH_T45, -0.4), (CH_S5, 0.3)],
        (Hpt, Efficiency) => &[(CH_T45, 0.8), (CH_NHPC, -0.6), (CH_WF, 0.4), (CH_S5, 0.3)],
        (Hpt, Capacity) => &[(CH_S36, 0.6), (CH_T45, -0.5), (CH_NHPC, 0.4), (CH_S5, -0.6)],
        (Lpt, Efficiency) => &[(CH_NLPC, -0.7), (CH_S5, -0.5), (CH_T45, 0.5), (CH_WF, 0.3)],
        (Lpt, Capacity) => &[(CH_S5, 0.8), (CH_NLPC, -0.5), (CH_T45, 0.4), (CH_VAFN, 0.5)],
    };
    let mut w = [0.0; N_CHANNELS];
    for &(c, v) in entries {
        w[c] = v;
    }
    w
}

/// Per-channel measurement noise standard deviation.
pub fn noise_sigma(noise_fraction: f64) -> [f64; N_CHANNELS] {
    let nominal = engine_response(NOMINAL);
    nominal.map(|v| noise_fraction * v.abs())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Smooth bounded walk: AR(1) velocity, position reflected at the bounds.
struct Walk {
    pos: f64,
    vel: f64,
    bounds: (f64, f64),
    kick: f64,
}

impl Walk {
    const PERSISTENCE: f64 = 0.98;

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        self.vel = Self::PERSISTENCE * self.vel + self.kick * normal(rng);
        self.pos += self.vel;
        let (lo, hi) = self.bounds;
        if self.pos < lo {
            self.pos = 2.0 * lo - self.pos;
            self.vel = -self.vel;
        }
        if self.pos > hi {
            self.pos = 2.0 * hi - self.pos;
            self.vel = -self.vel;
        }
        self.pos = self.pos.clamp(lo, hi);
        self.pos
    }
}

fn healthy_conditions(rng: &mut ChaCha8Rng, seconds: usize) -> Vec<Condition> {
    let mut start = |b: (f64, f64)| b.0 + (b.1 - b.0) * rng.random_range(0.2..0.8);
    let (a0, m0, p0) = (start(ALT_RANGE), start(MN_RANGE), start(PLA_RANGE));
    let mut alt = Walk {
        pos: a0,
        vel: 0.0,
        bounds: ALT_RANGE,
        kick: 2.0,
    };
    let mut mn = Walk {
        pos: m0,
        vel: 0.0,
        bounds: MN_RANGE,
        kick: 1e-5,
    };
    let mut pla = Walk {
        pos: p0,
        vel: 0.0,
        bounds: PLA_RANGE,
        kick: 0.01,
    };
    (0..seconds)
        .map(|_| Condition {
            alt: alt.step(rng),
            mn: mn.step(rng),
            pla: pla.step(rng),
        })
        .collect()
}

/// Linear ramp between the segment's start and end conditions plus a small
/// smooth jitter.
fn ramp_conditions(rng: &mut ChaCha8Rng, ramp: ConditionRamp, seconds: usize) -> Vec<Condition> {
    let mut jitter = [0.0f64; 3];
    let scale = [15.0, 2e-4, 0.15];
    (0..seconds)
        .map(|i| {
            for (j, s) in jitter.iter_mut().zip(scale) {
                *j = 0.9 * *j + (1.0f64 - 0.81).sqrt() * s * normal(rng);
            }
            let f = if seconds > 1 { i as f64 / (seconds - 1) as f64 } else { 0.0 };
            let lerp = |(a, b): (f64, f64)| a + (b - a) * f;
            Condition {
                alt: lerp(ramp.alt) + jitter[0],
                mn: lerp(ramp.mn) + jitter[1],
                pla: lerp(ramp.pla) + jitter[2],
            }
        })
        .collect()
}

fn emit(
    conditions: &[Condition],
    effect: &[f64; N_CHANNELS],
    sigma: &[f64; N_CHANNELS],
    rng: &mut ChaCha8Rng,
    out: &mut Vec<f64>,
) {
    for &c in conditions {
        let clean = engine_response(c);
        for ch in 0..N_CHANNELS {
            out.push(clean[ch] * (1.0 + effect[ch]) + sigma[ch] * normal(rng));
        }
    }
}

fn segment_rng(seed: u64, segment: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(segment + 1);
    rng
}

/// Generates the benchmark. Every segment draws from its own random stream,
/// so fault magnitudes never change the noise or trajectories.
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let sigma = noise_sigma(spec.noise_fraction);
    let zero = [0.0; N_CHANNELS];
    let mut data = Vec::new();
    let mut split = Vec::new();
    let mut health = Vec::new();
    let mut state = Vec::new();

    let mut rng = segment_rng(seed, 0);
    let labeled = healthy_conditions(&mut rng, spec.healthy_labeled_seconds);
    emit(&labeled, &zero, &sigma, &mut rng, &mut data);
    let (train, validation) = split_validation(labeled.len(), spec.validation_fraction, seed)?;
    let mut tags = vec![Split::Train; labeled.len()];
    for &i in &validation {
        tags[i] = Split::Validation;
    }
    debug_assert_eq!(train.len() + validation.len(), labeled.len());
    split.extend(tags);
    health.extend(std::iter::repeat(Health::Healthy).take(labeled.len()));
    state.extend(std::iter::repeat(Some(0)).take(labeled.len()));

    if spec.healthy_unlabeled_seconds > 0 {
        let mut rng = segment_rng(seed, 1);
        let conds = healthy_conditions(&mut rng, spec.healthy_unlabeled_seconds);
        emit(&conds, &zero, &sigma, &mut rng, &mut data);
        split.extend(std::iter::repeat(Split::Unlabeled).take(conds.len()));
        health.extend(std::iter::repeat(Health::Unknown).take(conds.len()));
        state.extend(std::iter::repeat(Some(0)).take(conds.len()));
    }

    let mut ordered: Vec<&FaultSpec> = spec.faults.iter().collect();
    ordered.sort_by_key(|f| (f.dataset == Destination::Test, f.case));
    for f in ordered {
        let mut rng = segment_rng(seed, 1 + f.case as u64);
        let seconds = f.duration.unwrap_or(spec.fault_duration_seconds);
        let conds = ramp_conditions(&mut rng, f.condition.ramp(), seconds);
        let w = fault_signature(f.component, f.kind);
        let effect = w.map(|v| v * f.magnitude / 100.0 * spec.signature_gain);
        emit(&conds, &effect, &sigma, &mut rng, &mut data);
        split.extend(std::iter::repeat(f.dataset.split()).take(seconds));
        health.extend(std::iter::repeat(Health::Unknown).take(seconds));
        state.extend(std::iter::repeat(Some(f.case)).take(seconds));
    }

    let rows = split.len();
    Ok(Dataset {
        t: (0..rows).map(|i| i as f64).collect(),
        x: Matrix::from_vec(rows, N_CHANNELS, data).expect("row-major by construction"),
        split,
        health,
        state,
    })
}

/// Uniform random split of `rows` labeled rows into `(train, validation)` indices.
pub fn split_validation(rows: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_val = (rows as f64 * fraction).round() as usize;
    if !(fraction > 0.0 && fraction < 1.0) || n_val == 0 || n_val >= rows {
        return Err(DataError::SplitTooSmall { rows, fraction });
    }
    let mut idx: Vec<usize> = (0..rows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    idx.shuffle(&mut rng);
    let mut validation = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    validation.sort_unstable();
    train.sort_unstable();
    Ok((train, validation))
}

// ---------------------------------------------------------------------------
// scaler

/// Per-channel min/max map onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Channels that were constant on the fit rows; they map to 0.
    pub degenerate: Vec<bool>,
}

impl Scaler {
    pub fn fit(rows: &Matrix) -> Result<Self> {
        if rows.is_empty() {
            return Err(DataError::EmptyFit);
        }
        let cols = rows.cols();
        let mut min = vec![f64::INFINITY; cols];
        let mut max = vec![f64::NEG_INFINITY; cols];
        for r in rows.iter_rows() {
            for j in 0..cols {
                min[j] = min[j].min(r[j]);
                max[j] = max[j].max(r[j]);
            }
        }
        let degenerate = min.iter().zip(&max).map(|(a, b)| a == b).collect();
        Ok(Self { min, max, degenerate })
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = if self.degenerate[j] {
                    0.0
                } else {
                    2.0 * (*v - self.min[j]) / (self.max[j] - self.min[j]) - 1.0
                };
            }
        }
        out
    }

    pub fn invert(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = if self.degenerate[j] {
                    self.min[j]
                } else {
                    (*v + 1.0) * 0.5 * (self.max[j] - self.min[j]) + self.min[j]
                };
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// CSV

pub const META_COLUMNS: [&str; 3] = ["split", "h_s", "state"];

pub fn csv_header() -> Vec<&'static str> {
    let mut h = vec!["t"];
    h.extend(CHANNELS);
    h.extend(META_COLUMNS);
    h
}

pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| DataError::Csv(e.to_string());
    w.write_record(csv_header()).map_err(csv_err)?;
    let mut record = Vec::with_capacity(N_CHANNELS + 4);
    for r in 0..ds.len() {
        record.clear();
        record.push(ds.t[r].to_string());
        record.extend(ds.x.row(r).iter().map(|v| v.to_string()));
        record.push(ds.split[r].tag().to_string());
        record.push(ds.health[r].token().to_string());
        record.push(ds.state[r].map(|s| s.to_string()).unwrap_or_default());
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    write_csv(ds, std::fs::File::create(path)?)
}

/// Maps schema columns onto the columns of a foreign CSV file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    /// Schema column name to source column name; unmapped columns are looked up by their own name.
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
    /// Split tag for every row when the source has no split column.
    #[serde(default)]
    pub default_split: Option<Split>,
}

impl ColumnMap {
    fn source<'a>(&'a self, schema: &'a str) -> &'a str {
        self.columns.get(schema).map(String::as_str).unwrap_or(schema)
    }
}

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    read_csv_mapped(reader, &ColumnMap::default())
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?)
}

pub fn load_csv_mapped(path: &Path, map: &ColumnMap) -> Result<Dataset> {
    read_csv_mapped(std::fs::File::open(path)?, map)
}

/// Parses a dataset CSV. `t`, `h_s` and `state` are optional; the thirteen
/// channels are required, as is `split` unless the map gives a default.
pub fn read_csv_mapped<R: Read>(reader: R, map: &ColumnMap) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h.map_err(|e| DataError::Csv(e.to_string()))?,
        None => {
            return Err(DataError::MissingColumn {
                line: 1,
                column: CHANNELS[0].to_string(),
            })
        }
    };
    let position = |name: &str| header.iter().position(|h| h == map.source(name));
    let mut channel_idx = [0usize; N_CHANNELS];
    for (slot, name) in channel_idx.iter_mut().zip(CHANNELS) {
        *slot = position(name).ok_or_else(|| DataError::MissingColumn {
            line: 1,
            column: map.source(name).to_string(),
        })?;
    }
    let split_idx = position("split");
    if split_idx.is_none() && map.default_split.is_none() {
        return Err(DataError::MissingColumn {
            line: 1,
            column: map.source("split").to_string(),
        });
    }
    let t_idx = position("t");
    let h_idx = position("h_s");
    let state_idx = position("state");
    let width = header.len();

    let mut ds = Dataset {
        t: Vec::new(),
        x: Matrix::zeros(0, N_CHANNELS),
        split: Vec::new(),
        health: Vec::new(),
        state: Vec::new(),
    };
    let mut data = Vec::new();
    for (k, rec) in records.enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
        if rec.len() != width {
            return Err(DataError::RowLength {
                line,
                expected: width,
                found: rec.len(),
            });
        }
        let number = |idx: usize, column: &str| -> Result<f64> {
            rec[idx].parse::<f64>().map_err(|_| DataError::InvalidNumber {
                line,
                column: column.to_string(),
                value: rec[idx].to_string(),
            })
        };
        for (&idx, name) in channel_idx.iter().zip(CHANNELS) {
            data.push(number(idx, name)?);
        }
        ds.t.push(match t_idx {
            Some(i) => number(i, "t")?,
            None => k as f64,
        });
        ds.split.push(match split_idx {
            Some(i) => rec[i].parse().map_err(|_| DataError::UnknownSplit {
                line,
                tag: rec[i].to_string(),
            })?,
            None => map.default_split.expect("checked above"),
        });
        ds.health.push(match h_idx.map(|i| &rec[i]) {
            Some("1") => Health::Healthy,
            Some("0") => Health::Faulty,
            Some("unknown") | Some("") | None => Health::Unknown,
            Some(other) => {
                return Err(DataError::InvalidHealth {
                    line,
                    value: other.to_string(),
                })
            }
        });
        ds.state.push(match state_idx.map(|i| &rec[i]) {
            Some("") | None => None,
            Some(s) => Some(s.parse::<u32>().map_err(|_| DataError::InvalidState {
                line,
                value: s.to_string(),
            })?),
        });
    }
    let rows = ds.split.len();
    ds.x = Matrix::from_vec(rows, N_CHANNELS, data).expect("row-major by construction");
    ds.check()?;
    Ok(ds)
}
