//! Kraskov-Stögbauer-Grassberger k-nearest-neighbor estimator of the mutual
//! information between two scalar variables (first algorithm, max-norm).

use crate::nn::Matrix;

pub const DEFAULT_K: usize = 3;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `psi(n)` for `n = 0..=max`; entry 0 is unused.
fn digamma_table(max: usize) -> Vec<f64> {
    let mut t = vec![f64::NEG_INFINITY; max + 1];
    let mut harmonic = 0.0;
    for (n, slot) in t.iter_mut().enumerate().skip(1) {
        *slot = -EULER_GAMMA + harmonic;
        harmonic += 1.0 / n as f64;
    }
    t
}

/// Count of values strictly within `radius` of `center` in a sorted slice.
fn count_within(sorted: &[f64], center: f64, radius: f64) -> usize {
    let lo = sorted.partition_point(|&v| v <= center - radius);
    let hi = sorted.partition_point(|&v| v < center + radius);
    hi.saturating_sub(lo)
}

/// Estimated `I(a; b)` in nats, clipped at zero.
///
/// Returns 0 when either sequence is constant or there are at most `k` samples.
pub fn ksg_mi(a: &[f64], b: &[f64], k: usize) -> f64 {
    assert_eq!(a.len(), b.len(), "ksg_mi: length mismatch");
    assert!(k >= 1, "ksg_mi: k must be positive");
    let n = a.len();
    if n <= k {
        return 0.0;
    }
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(a) || constant(b) {
        return 0.0;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let xs: Vec<f64> = order.iter().map(|&i| a[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| b[i]).collect();
    let mut sorted_y = ys.clone();
    sorted_y.sort_by(f64::total_cmp);

    let psi = digamma_table(n + 1);
    let mut best = Vec::with_capacity(k);
    let mut acc = 0.0;
    for i in 0..n {
        best.clear();
        let (x, y) = (xs[i], ys[i]);
        let consider = |j: usize, best: &mut Vec<f64>| {
            let d = (xs[j] - x).abs().max((ys[j] - y).abs());
            if best.len() < k {
                best.push(d);
                best.sort_by(f64::total_cmp);
            } else if d < best[k - 1] {
                best[k - 1] = d;
                best.sort_by(f64::total_cmp);
            }
        };
        let (mut left, mut right) = (i, i + 1);
        loop {
            let dl = if left > 0 { Some(x - xs[left - 1]) } else { None };
            let dr = if right < n { Some(xs[right] - x) } else { None };
            let (go_left, dx) = match (dl, dr) {
                (None, None) => break,
                (Some(l), None) => (true, l),
                (None, Some(r)) => (false, r),
                (Some(l), Some(r)) => {
                    if l <= r {
                        (true, l)
                    } else {
                        (false, r)
                    }
                }
            };
            if best.len() == k && dx >= best[k - 1] {
                break;
            }
            if go_left {
                left -= 1;
                consider(left, &mut best);
            } else {
                consider(right, &mut best);
                right += 1;
            }
        }
        let eps = best[k - 1];
        let nx = count_within(&xs, x, eps) - 1;
        let ny = count_within(&sorted_y, y, eps) - 1;
        acc += psi[nx + 1] + psi[ny + 1];
    }
    (psi[k] + psi[n] - acc / n as f64).max(0.0)
}

/// Pairwise MI between every column of `a` and every column of `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MiMap {
    /// `values[i][j] = I(a_i; b_j)`.
    pub values: Vec<Vec<f64>>,
    pub sum: f64,
    pub mean: f64,
}

pub fn mi_map(a: &Matrix, b: &Matrix, k: usize) -> MiMap {
    assert_eq!(a.rows(), b.rows(), "mi_map: row mismatch");
    let b_cols: Vec<Vec<f64>> = (0..b.cols()).map(|j| b.column(j)).collect();
    let values: Vec<Vec<f64>> = (0..a.cols())
        .map(|i| {
            let ai = a.column(i);
            b_cols.iter().map(|bj| ksg_mi(&ai, bj, k)).collect()
        })
        .collect();
    let sum: f64 = values.iter().flatten().sum();
    let pairs = a.cols() * b.cols();
    MiMap {
        values,
        sum,
        mean: if pairs > 0 { sum / pairs as f64 } else { 0.0 },
    }
}
