//! Representation quality: clustering gain of a latent space over the raw
//! input (AMIG), linear separability gain (LSG) and pairwise MI maps.

use thiserror::Error;

use crate::clustering::{optics, ClusteringError, OpticsParams};
use crate::metrics::ksg::{mi_map, MiMap};
use crate::metrics::partition::adjusted_mutual_info;
use crate::nn::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum RepresentationError {
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error("ground truth has a single class; separability is undefined")]
    SingleClass,
    #[error("row mismatch: {0} vs {1}")]
    RowMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, RepresentationError>;

#[derive(Debug, Clone, PartialEq)]
pub struct AmigReport {
    pub ami_x: f64,
    pub ami_z: f64,
    pub amig: f64,
    pub labels_x: Vec<i64>,
    pub labels_z: Vec<i64>,
}

/// `AMI(cluster(z), V) - AMI(cluster(x), V)` with one OPTICS setting for both spaces.
pub fn amig(x: &Matrix, z: &Matrix, truth: &[i64], params: &OpticsParams) -> Result<AmigReport> {
    if x.rows() != z.rows() || x.rows() != truth.len() {
        return Err(RepresentationError::RowMismatch(x.rows(), z.rows()));
    }
    let labels_x = optics(x, params)?.labels;
    let labels_z = optics(z, params)?.labels;
    let ami_x = adjusted_mutual_info(&labels_x, truth);
    let ami_z = adjusted_mutual_info(&labels_z, truth);
    Ok(AmigReport {
        ami_x,
        ami_z,
        amig: ami_z - ami_x,
        labels_x,
        labels_z,
    })
}

pub const LOGISTIC_L2: f64 = 1e-4;
pub const LOGISTIC_TOLERANCE: f64 = 1e-6;
pub const LOGISTIC_MAX_ITERATIONS: usize = 5000;

/// Multinomial logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub classes: Vec<i64>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `classes.len() x (features + 1)`, bias last.
    weights: Vec<Vec<f64>>,
    pub iterations: usize,
    pub loss: f64,
}

fn standardize(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows() as f64;
    (0..x.cols())
        .map(|j| {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let s = var.sqrt();
            (m, if s > 0.0 { s } else { 1.0 })
        })
        .unzip()
}

fn features(x: &Matrix, mean: &[f64], scale: &[f64]) -> Vec<Vec<f64>> {
    x.iter_rows()
        .map(|r| {
            let mut f: Vec<f64> = r.iter().zip(mean.iter().zip(scale)).map(|(v, (m, s))| (v - m) / s).collect();
            f.push(1.0);
            f
        })
        .collect()
}

/// Penalized mean cross-entropy and its gradient.
fn objective(w: &[Vec<f64>], f: &[Vec<f64>], y: &[usize], l2: f64, want_grad: bool) -> (f64, Vec<Vec<f64>>) {
    let c = w.len();
    let d = f[0].len();
    let n = f.len() as f64;
    let mut grad = if want_grad { vec![vec![0.0; d]; c] } else { Vec::new() };
    let mut loss = 0.0;
    let mut logits = vec![0.0; c];
    for (row, &label) in f.iter().zip(y) {
        for (k, wk) in w.iter().enumerate() {
            logits[k] = wk.iter().zip(row).map(|(a, b)| a * b).sum();
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        loss += z.ln() + max - logits[label];
        if want_grad {
            for k in 0..c {
                let p = (logits[k] - max).exp() / z - if k == label { 1.0 } else { 0.0 };
                for (g, v) in grad[k].iter_mut().zip(row) {
                    *g += p * v / n;
                }
            }
        }
    }
    loss /= n;
    for (k, wk) in w.iter().enumerate() {
        for j in 0..d - 1 {
            loss += 0.5 * l2 * wk[j] * wk[j];
            if want_grad {
                grad[k][j] += l2 * wk[j];
            }
        }
    }
    (loss, grad)
}

impl LogisticModel {
    /// Full-batch gradient descent with a backtracking step size, stopped when
    /// the loss improves by less than [`LOGISTIC_TOLERANCE`].
    pub fn fit(x: &Matrix, labels: &[i64]) -> Result<Self> {
        if x.rows() != labels.len() {
            return Err(RepresentationError::RowMismatch(x.rows(), labels.len()));
        }
        let mut classes: Vec<i64> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(RepresentationError::SingleClass);
        }
        let y: Vec<usize> = labels.iter().map(|l| classes.binary_search(l).expect("present")).collect();
        let (mean, scale) = standardize(x);
        let f = features(x, &mean, &scale);
        let d = f[0].len();
        let mut w = vec![vec![0.0; d]; classes.len()];
        let (mut loss, mut grad) = objective(&w, &f, &y, LOGISTIC_L2, true);
        let mut step = 1.0;
        let mut iterations = 0;
        while iterations < LOGISTIC_MAX_ITERATIONS {
            iterations += 1;
            let g2: f64 = grad.iter().flatten().map(|g| g * g).sum();
            if g2 == 0.0 {
                break;
            }
            let mut accepted = None;
            while step > 1e-12 {
                let trial: Vec<Vec<f64>> = w
                    .iter()
                    .zip(&grad)
                    .map(|(wk, gk)| wk.iter().zip(gk).map(|(a, g)| a - step * g).collect())
                    .collect();
                let (l, _) = objective(&trial, &f, &y, LOGISTIC_L2, false);
                if l <= loss - 0.5 * step * g2 {
                    accepted = Some((trial, l));
                    break;
                }
                step *= 0.5;
            }
            let Some((next, next_loss)) = accepted else { break };
            let improvement = loss - next_loss;
            w = next;
            loss = next_loss;
            if improvement < LOGISTIC_TOLERANCE {
                break;
            }
            grad = objective(&w, &f, &y, LOGISTIC_L2, true).1;
            step *= 2.0;
        }
        Ok(Self {
            classes,
            mean,
            scale,
            weights: w,
            iterations,
            loss,
        })
    }

    pub fn predict(&self, x: &Matrix) -> Vec<i64> {
        features(x, &self.mean, &self.scale)
            .iter()
            .map(|row| {
                let mut best = (f64::NEG_INFINITY, 0);
                for (k, wk) in self.weights.iter().enumerate() {
                    let l: f64 = wk.iter().zip(row).map(|(a, b)| a * b).sum();
                    if l > best.0 {
                        best = (l, k);
                    }
                }
                self.classes[best.1]
            })
            .collect()
    }

    /// Training-set accuracy in percent.
    pub fn accuracy(&self, x: &Matrix, labels: &[i64]) -> f64 {
        let pred = self.predict(x);
        100.0 * pred.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsgReport {
    pub accuracy_x: f64,
    pub accuracy_z: f64,
    pub lsg: f64,
}

/// Linear separability gain in percentage points.
pub fn lsg(z: &Matrix, x: &Matrix, truth: &[i64]) -> Result<LsgReport> {
    if z.rows() != x.rows() {
        return Err(RepresentationError::RowMismatch(z.rows(), x.rows()));
    }
    let accuracy_z = LogisticModel::fit(z, truth)?.accuracy(z, truth);
    let accuracy_x = LogisticModel::fit(x, truth)?.accuracy(x, truth);
    Ok(LsgReport {
        accuracy_x,
        accuracy_z,
        lsg: accuracy_z - accuracy_x,
    })
}

/// Pairwise KSG MI map between the columns of two row-aligned matrices.
pub fn mmi(a: &Matrix, b: &Matrix, k: usize) -> Result<MiMap> {
    if a.rows() != b.rows() {
        return Err(RepresentationError::RowMismatch(a.rows(), b.rows()));
    }
    Ok(mi_map(a, b, k))
}
