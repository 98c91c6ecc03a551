//! Exact t-SNE for two-dimensional views of a latent space.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Matrix;

/// Relative tolerance on each point's achieved perplexity.
pub const PERPLEXITY_TOLERANCE: f64 = 1e-3;
const INIT_SCALE: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;
const BISECTION_STEPS: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("t-SNE needs at least 10 points, got {0}")]
    TooFewPoints(usize),
    #[error("perplexity {perplexity} is infeasible for {n} points (must be below n/3)")]
    InfeasiblePerplexity { perplexity: f64, n: usize },
    #[error("input row {0} is not finite")]
    NonFinite(usize),
    #[error("invalid t-SNE parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Iteration at which momentum switches and exaggeration ends.
    pub switch_iteration: usize,
    pub exaggeration: f64,
    /// KL is recorded every this many iterations.
    pub log_every: usize,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 200.0,
            iterations: 1000,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            switch_iteration: 250,
            exaggeration: 12.0,
            log_every: 10,
            seed: 0,
        }
    }
}

impl TsneParams {
    pub fn validate(&self, n: usize) -> Result<(), ProjectionError> {
        if n < 10 {
            return Err(ProjectionError::TooFewPoints(n));
        }
        if !(self.perplexity > 0.0) || self.perplexity >= n as f64 / 3.0 {
            return Err(ProjectionError::InfeasiblePerplexity {
                perplexity: self.perplexity,
                n,
            });
        }
        if self.iterations == 0 || self.log_every == 0 {
            return Err(ProjectionError::InvalidParams("iterations and log_every must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.exaggeration >= 1.0) {
            return Err(ProjectionError::InvalidParams(
                "learning rate must be positive and exaggeration at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn squared_distances(points: &Matrix) -> Vec<f64> {
    let n = points.rows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let a = points.row(i);
        for j in i + 1..n {
            let v: f64 = a.iter().zip(points.row(j)).map(|(x, y)| (x - y) * (x - y)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Fills `out` with `p_{j|i}` at precision `beta` and returns the entropy in nats.
fn conditional_row(dist: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    // shift by the nearest neighbor distance so the exponentials never all underflow
    let min = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (o, &d)) in out.iter_mut().zip(dist).enumerate() {
        *o = if j == i { 0.0 } else { (-(d - min) * beta).exp() };
        sum += *o;
    }
    let mut weighted = 0.0;
    for (o, &d) in out.iter_mut().zip(dist) {
        *o /= sum;
        weighted += *o * (d - min);
    }
    sum.ln() + beta * weighted
}

/// Row-stochastic conditional affinities `p_{j|i}` and the perplexity each row achieved.
pub fn conditional_probabilities(points: &Matrix, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let n = points.rows();
    let dist = squared_distances(points);
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut achieved = vec![0.0; n];
    for i in 0..n {
        let row = &dist[i * n..(i + 1) * n];
        let out = &mut p[i * n..(i + 1) * n];
        let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
        let mut beta = 1.0;
        let mut entropy = conditional_row(row, i, beta, out);
        for _ in 0..BISECTION_STEPS {
            if ((entropy.exp() - perplexity) / perplexity).abs() < PERPLEXITY_TOLERANCE * 0.5 {
                break;
            }
            if entropy > target {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
            entropy = conditional_row(row, i, beta, out);
        }
        achieved[i] = entropy.exp();
    }
    (p, achieved)
}

/// Symmetrized joint affinities, normalized to sum to one.
pub fn joint_probabilities(points: &Matrix, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let n = points.rows();
    let (cond, achieved) = conditional_probabilities(points, perplexity);
    let mut p = vec![0.0; n * n];
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) * scale;
        }
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    (p, achieved)
}

/// Student-t kernel numerators and their sum.
fn student_t(y: &[f64], n: usize, num: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        num[i * n + i] = 0.0;
        for j in i + 1..n {
            let dx = y[2 * i] - y[2 * j];
            let dy = y[2 * i + 1] - y[2 * j + 1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    sum
}

fn kl_divergence(p: &[f64], num: &[f64], sum: f64) -> f64 {
    p.iter()
        .zip(num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &q)| pij * (pij / (q / sum).max(f64::MIN_POSITIVE)).ln())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    /// `n x 2`.
    pub embedding: Matrix,
    /// Per-point perplexity reached by the bandwidth search.
    pub perplexities: Vec<f64>,
    /// `(iteration, KL(P||Q))`, starting with the initial embedding at iteration 0.
    pub kl_history: Vec<(usize, f64)>,
}

impl TsneResult {
    pub fn initial_kl(&self) -> f64 {
        self.kl_history[0].1
    }

    pub fn final_kl(&self) -> f64 {
        self.kl_history[self.kl_history.len() - 1].1
    }
}

pub fn tsne(points: &Matrix, params: &TsneParams) -> Result<TsneResult, ProjectionError> {
    let n = points.rows();
    params.validate(n)?;
    if let Some(r) = (0..n).find(|&r| points.row(r).iter().any(|v| !v.is_finite())) {
        return Err(ProjectionError::NonFinite(r));
    }
    let (p, perplexities) = joint_probabilities(points, params.perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut y: Vec<f64> = (0..2 * n).map(|_| INIT_SCALE * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0_f64; 2 * n];
    let mut grad = vec![0.0; 2 * n];
    let mut num = vec![0.0; n * n];

    let sum = student_t(&y, n, &mut num);
    let mut kl_history = vec![(0, kl_divergence(&p, &num, sum))];

    for it in 1..=params.iterations {
        let early = it <= params.switch_iteration;
        let exaggeration = if early { params.exaggeration } else { 1.0 };
        let momentum = if early { params.initial_momentum } else { params.final_momentum };
        let sum = student_t(&y, n, &mut num);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..n {
                let q = num[i * n + j];
                let w = (exaggeration * p[i * n + j] - q / sum) * q;
                gx += w * (y[2 * i] - y[2 * j]);
                gy += w * (y[2 * i + 1] - y[2 * j + 1]);
            }
            grad[2 * i] = 4.0 * gx;
            grad[2 * i + 1] = 4.0 * gy;
        }
        for k in 0..2 * n {
            gains[k] = if (grad[k] > 0.0) != (update[k] > 0.0) {
                gains[k] + 0.2
            } else {
                (gains[k] * 0.8).max(MIN_GAIN)
            };
            update[k] = momentum * update[k] - params.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        for c in 0..2 {
            let mean = (0..n).map(|i| y[2 * i + c]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[2 * i + c] -= mean);
        }
        if it % params.log_every == 0 || it == params.iterations {
            let sum = student_t(&y, n, &mut num);
            kl_history.push((it, kl_divergence(&p, &num, sum)));
        }
    }
    Ok(TsneResult {
        embedding: Matrix::from_vec(n, 2, y).expect("2n values"),
        perplexities,
        kl_history,
    })
}

/// `id,e1,e2,cluster,state` rows; `state` is empty when unknown.
pub fn embedding_csv(embedding: &Matrix, clusters: &[i64], states: &[Option<u32>]) -> String {
    let mut out = String::from("id,e1,e2,cluster,state\n");
    for (i, row) in embedding.iter_rows().enumerate() {
        let state = states.get(i).copied().flatten().map(|s| s.to_string()).unwrap_or_default();
        let cluster = clusters.get(i).copied().unwrap_or(crate::clustering::NOISE);
        let _ = writeln!(out, "{i},{:?},{:?},{cluster},{state}", row[0], row[1]);
    }
    out
}

const PALETTE: [&str; 20] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#bcbd22", "#17becf",
    "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd", "#e6550d", "#31a354", "#756bb1",
    "#636363", "#fd8d3c",
];

/// Scatter plot colored by cluster label; noise is drawn in light grey.
pub fn embedding_svg(embedding: &Matrix, clusters: &[i64]) -> String {
    const SIZE: f64 = 600.0;
    const PAD: f64 = 20.0;
    let bounds = |c: usize| {
        let col = embedding.column(c);
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let ((x0, xs), (y0, ys)) = (bounds(0), bounds(1));
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{s}\" height=\"{s}\" viewBox=\"0 0 {s} {s}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        s = SIZE
    );
    for (i, row) in embedding.iter_rows().enumerate() {
        let label = clusters.get(i).copied().unwrap_or(crate::clustering::NOISE);
        let color = if label < 0 {
            "#cccccc"
        } else {
            PALETTE[label as usize % PALETTE.len()]
        };
        let cx = PAD + (row[0] - x0) / xs * (SIZE - 2.0 * PAD);
        let cy = SIZE - PAD - (row[1] - y0) / ys * (SIZE - 2.0 * PAD);
        let _ = writeln!(out, "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"2\" fill=\"{color}\"/>");
    }
    out.push_str("</svg>\n");
    out
}
