//! OPTICS ordering and cluster extraction (xi steepness method and a flat
//! DBSCAN-equivalent cut) with Euclidean distances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Matrix;

pub const DEFAULT_MIN_SAMPLES: usize = 100;
pub const DEFAULT_XI: f64 = 0.05;

/// Noise label in extracted assignments.
pub const NOISE: i64 = -1;

#[derive(Debug, Error, PartialEq)]
pub enum ClusteringError {
    #[error("cannot cluster an empty point set")]
    Empty,
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("invalid OPTICS parameter: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, ClusteringError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Extraction {
    Xi { xi: f64 },
    DbscanCut { eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsParams {
    pub min_samples: usize,
    /// Neighborhood radius bound; `None` means unbounded.
    #[serde(default)]
    pub max_eps: Option<f64>,
    pub extraction: Extraction,
}

impl Default for OpticsParams {
    fn default() -> Self {
        Self {
            min_samples: DEFAULT_MIN_SAMPLES,
            max_eps: None,
            extraction: Extraction::Xi { xi: DEFAULT_XI },
        }
    }
}

impl OpticsParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples < 2 {
            return Err(ClusteringError::InvalidParams(format!(
                "min_samples must be at least 2, got {}",
                self.min_samples
            )));
        }
        if let Some(e) = self.max_eps {
            if !(e > 0.0) {
                return Err(ClusteringError::InvalidParams(format!("max_eps must be positive, got {e}")));
            }
        }
        match self.extraction {
            Extraction::Xi { xi } if !(xi > 0.0 && xi < 1.0) => Err(ClusteringError::InvalidParams(format!(
                "xi must lie in (0, 1), got {xi}"
            ))),
            Extraction::DbscanCut { eps } if !(eps >= 0.0) => Err(ClusteringError::InvalidParams(format!(
                "eps must be non-negative, got {eps}"
            ))),
            _ => Ok(()),
        }
    }

    fn radius(&self) -> f64 {
        self.max_eps.unwrap_or(f64::INFINITY)
    }
}

/// OPTICS ordering plus extracted labels.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticsResult {
    pub ordering: Vec<usize>,
    /// Indexed by point; `+inf` where undefined.
    pub core_distances: Vec<f64>,
    /// Indexed by point; `+inf` for the first point of each expansion.
    pub reachability: Vec<f64>,
    pub predecessor: Vec<Option<usize>>,
    /// Cluster id per point, [`NOISE`] for noise; empty until extracted.
    pub labels: Vec<i64>,
    pub n_clusters: usize,
    /// Xi intervals `(start, end)` over ordering positions, smallest first.
    pub intervals: Vec<(usize, usize)>,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_points(points: &Matrix) -> Result<()> {
    if points.rows() == 0 {
        return Err(ClusteringError::Empty);
    }
    for (i, row) in points.iter_rows().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ClusteringError::NonFinite(i));
        }
    }
    Ok(())
}

/// Distance to the `min_samples`-th nearest neighbor, counting the point itself.
pub fn core_distances(points: &Matrix, min_samples: usize, max_eps: f64) -> Vec<f64> {
    let n = points.rows();
    if n < min_samples || min_samples == 0 {
        return vec![f64::INFINITY; n];
    }
    let mut dist = vec![0.0; n];
    (0..n)
        .map(|i| {
            let p = points.row(i);
            for (j, d) in dist.iter_mut().enumerate() {
                *d = euclidean(p, points.row(j));
            }
            let (_, kth, _) = dist.select_nth_unstable_by(min_samples - 1, f64::total_cmp);
            if *kth > max_eps {
                f64::INFINITY
            } else {
                *kth
            }
        })
        .collect()
}

/// OPTICS ordering with reachability and predecessors; labels left empty.
pub fn optics_order(points: &Matrix, params: &OpticsParams) -> Result<OpticsResult> {
    params.validate()?;
    check_points(points)?;
    let n = points.rows();
    let radius = params.radius();
    let core = core_distances(points, params.min_samples, radius);
    let mut reach = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut processed = vec![false; n];
    let mut ordering = Vec::with_capacity(n);

    for _ in 0..n {
        let mut point = usize::MAX;
        let mut best = f64::NAN;
        for i in 0..n {
            if !processed[i] && (point == usize::MAX || reach[i] < best) {
                point = i;
                best = reach[i];
            }
        }
        processed[point] = true;
        ordering.push(point);
        if core[point].is_infinite() {
            continue;
        }
        let p = points.row(point);
        for o in 0..n {
            if processed[o] {
                continue;
            }
            let d = euclidean(p, points.row(o));
            if d > radius {
                continue;
            }
            let r = d.max(core[point]);
            if r < reach[o] {
                reach[o] = r;
                pred[o] = Some(point);
            }
        }
    }
    Ok(OpticsResult {
        ordering,
        core_distances: core,
        reachability: reach,
        predecessor: pred,
        labels: Vec::new(),
        n_clusters: 0,
        intervals: Vec::new(),
    })
}

/// Orders `points` and extracts clusters with the configured method.
pub fn optics(points: &Matrix, params: &OpticsParams) -> Result<OpticsResult> {
    let mut result = optics_order(points, params)?;
    extract_clusters(&mut result, params)?;
    Ok(result)
}

pub fn extract_clusters(result: &mut OpticsResult, params: &OpticsParams) -> Result<()> {
    params.validate()?;
    match params.extraction {
        Extraction::DbscanCut { eps } => {
            result.labels = dbscan_cut(result, eps);
            result.intervals.clear();
        }
        Extraction::Xi { xi } => {
            let intervals = xi_intervals(result, xi, params.min_samples, params.min_samples);
            result.labels = xi_labels(&result.ordering, &intervals);
            result.intervals = intervals;
        }
    }
    result.n_clusters = count_clusters(&result.labels);
    Ok(())
}

fn count_clusters(labels: &[i64]) -> usize {
    labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize)
}

/// Flat cut of the reachability profile at `eps`.
///
/// A point starts a new cluster when its reachability exceeds `eps` while its
/// core distance does not; a point with both above `eps` is noise. Border
/// points join the cluster that reaches them first in the ordering, so a
/// border point ordered before all of its core neighbors stays noise.
pub fn dbscan_cut(result: &OpticsResult, eps: f64) -> Vec<i64> {
    let n = result.ordering.len();
    let mut labels = vec![0i64; n];
    let mut current = -1i64;
    for &p in &result.ordering {
        let far_reach = result.reachability[p] > eps;
        let near_core = result.core_distances[p] <= eps;
        if far_reach && near_core {
            current += 1;
        }
        labels[p] = if far_reach && !near_core { NOISE } else { current };
    }
    labels
}

#[derive(Debug, Clone, Copy)]
struct SteepDownArea {
    start: usize,
    end: usize,
    mib: f64,
}

/// Extends a steep region from `start`, tolerating up to `min_samples`
/// consecutive non-steep points that do not reverse direction.
fn extend_region(steep: &[bool], reverse: &[bool], start: usize, min_samples: usize) -> usize {
    let mut non_steep = 0;
    let mut end = start;
    for index in start..steep.len() {
        if steep[index] {
            non_steep = 0;
            end = index;
        } else if !reverse[index] {
            non_steep += 1;
            if non_steep > min_samples {
                break;
            }
        } else {
            return end;
        }
    }
    end
}

fn filter_sdas(sdas: Vec<SteepDownArea>, mib: f64, xi_complement: f64, plot: &[f64]) -> Vec<SteepDownArea> {
    if mib.is_infinite() {
        return Vec::new();
    }
    sdas.into_iter()
        .filter(|sda| mib <= plot[sda.start] * xi_complement)
        .map(|mut sda| {
            sda.mib = sda.mib.max(mib);
            sda
        })
        .collect()
}

/// Shrinks `[s, e]` from the right until the end point's predecessor lies
/// inside the interval or the start is higher than the end.
fn correct_predecessor(
    plot: &[f64],
    pred_plot: &[Option<usize>],
    ordering: &[usize],
    s: usize,
    mut e: usize,
) -> Option<(usize, usize)> {
    while s < e {
        if plot[s] > plot[e] {
            return Some((s, e));
        }
        if let Some(p_e) = pred_plot[e] {
            if ordering[s..e].contains(&p_e) {
                return Some((s, e));
            }
        }
        e -= 1;
    }
    None
}

/// Xi-steep cluster intervals over ordering positions, smallest-first within
/// each steep-up area.
pub fn xi_intervals(result: &OpticsResult, xi: f64, min_samples: usize, min_cluster_size: usize) -> Vec<(usize, usize)> {
    let n = result.ordering.len();
    let mut plot: Vec<f64> = result.ordering.iter().map(|&p| result.reachability[p]).collect();
    plot.push(f64::INFINITY);
    let pred_plot: Vec<Option<usize>> = result.ordering.iter().map(|&p| result.predecessor[p]).collect();

    let xi_complement = 1.0 - xi;
    let ratio: Vec<f64> = (0..n).map(|i| plot[i] / plot[i + 1]).collect();
    let steep_up: Vec<bool> = ratio.iter().map(|&r| r <= xi_complement).collect();
    let steep_down: Vec<bool> = ratio.iter().map(|&r| r >= 1.0 / xi_complement).collect();
    let downward: Vec<bool> = ratio.iter().map(|&r| r > 1.0).collect();
    let upward: Vec<bool> = ratio.iter().map(|&r| r < 1.0).collect();

    let mut sdas: Vec<SteepDownArea> = Vec::new();
    let mut clusters = Vec::new();
    let mut index = 0usize;
    let mut mib = 0.0f64;

    for steep_index in 0..n {
        if !(steep_up[steep_index] || steep_down[steep_index]) || steep_index < index {
            continue;
        }
        mib = plot[index..=steep_index].iter().fold(mib, |a, &b| a.max(b));

        if steep_down[steep_index] {
            sdas = filter_sdas(sdas, mib, xi_complement, &plot);
            let end = extend_region(&steep_down, &upward, steep_index, min_samples);
            sdas.push(SteepDownArea {
                start: steep_index,
                end,
                mib: 0.0,
            });
            index = end + 1;
            mib = plot[index];
        } else {
            sdas = filter_sdas(sdas, mib, xi_complement, &plot);
            let u_start = steep_index;
            let u_end = extend_region(&steep_up, &downward, u_start, min_samples);
            index = u_end + 1;
            mib = plot[index];

            let mut found = Vec::new();
            for d in &sdas {
                let mut c_start = d.start;
                let mut c_end = u_end;
                if plot[c_end + 1] * xi_complement < d.mib {
                    continue;
                }
                let d_max = plot[d.start];
                if d_max * xi_complement >= plot[c_end + 1] {
                    while plot[c_start + 1] > plot[c_end + 1] && c_start < d.end {
                        c_start += 1;
                    }
                } else if plot[c_end + 1] * xi_complement >= d_max {
                    while plot[c_end - 1] > d_max && c_end > u_start {
                        c_end -= 1;
                    }
                }
                let Some((s, e)) = correct_predecessor(&plot, &pred_plot, &result.ordering, c_start, c_end) else {
                    continue;
                };
                if e - s + 1 < min_cluster_size || s > d.end || e < u_start {
                    continue;
                }
                found.push((s, e));
            }
            found.reverse();
            clusters.extend(found);
        }
    }
    clusters
}

/// Labels intervals in order, skipping any that overlap an already labeled one.
pub fn xi_labels(ordering: &[usize], intervals: &[(usize, usize)]) -> Vec<i64> {
    let mut by_position = vec![NOISE; ordering.len()];
    let mut label = 0;
    for &(s, e) in intervals {
        if by_position[s..=e].iter().all(|&l| l == NOISE) {
            by_position[s..=e].fill(label);
            label += 1;
        }
    }
    let mut labels = vec![NOISE; ordering.len()];
    for (pos, &p) in ordering.iter().enumerate() {
        labels[p] = by_position[pos];
    }
    labels
}
