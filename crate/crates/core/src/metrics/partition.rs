//! Information-theoretic comparison of two labelings: mutual information,
//! its expectation under random permutation, AMI, homogeneity and
//! completeness. All logarithms are natural.

use std::collections::{BTreeMap, BTreeSet};

/// Counts `n_ij` of rows labeled cluster `i` in `U` and class `j` in `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    /// Row sums `a_i`.
    pub a: Vec<u64>,
    /// Column sums `b_j`.
    pub b: Vec<u64>,
    pub n: u64,
}

fn index_labels(labels: &[i64]) -> (Vec<usize>, usize) {
    let sorted: BTreeMap<i64, usize> = labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    (labels.iter().map(|l| sorted[l]).collect(), sorted.len())
}

impl ContingencyTable {
    /// Panics if the two labelings differ in length.
    pub fn new(u: &[i64], v: &[i64]) -> Self {
        assert_eq!(u.len(), v.len(), "labelings must have equal length");
        let (ui, ku) = index_labels(u);
        let (vi, kv) = index_labels(v);
        let mut counts = vec![vec![0u64; kv]; ku];
        for (&i, &j) in ui.iter().zip(&vi) {
            counts[i][j] += 1;
        }
        let a = counts.iter().map(|r| r.iter().sum()).collect();
        let b = (0..kv).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Self {
            counts,
            a,
            b,
            n: u.len() as u64,
        }
    }
}

/// Shannon entropy of a count vector.
pub fn entropy_of_counts(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

pub fn entropy(labels: &[i64]) -> f64 {
    let mut counts = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0u64) += 1;
    }
    entropy_of_counts(&counts.into_values().collect::<Vec<_>>())
}

fn mi_from_table(t: &ContingencyTable) -> f64 {
    if t.n == 0 {
        return 0.0;
    }
    let n = t.n as f64;
    let mut mi = 0.0;
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (t.a[i] as f64 * t.b[j] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

pub fn mutual_info(u: &[i64], v: &[i64]) -> f64 {
    mi_from_table(&ContingencyTable::new(u, v))
}

/// `ln(k!)` for `k = 0..=n`.
fn log_factorials(n: u64) -> Vec<f64> {
    let mut t = Vec::with_capacity(n as usize + 1);
    t.push(0.0);
    let mut acc = 0.0f64;
    for k in 1..=n {
        acc += (k as f64).ln();
        t.push(acc);
    }
    t
}

/// Expected mutual information of two labelings with the given marginals
/// when one is randomly permuted (hypergeometric model).
pub fn expected_mutual_info(a: &[u64], b: &[u64]) -> f64 {
    let n: u64 = a.iter().sum();
    assert_eq!(n, b.iter().sum::<u64>(), "marginals must share the same total");
    if n == 0 {
        return 0.0;
    }
    let lf = log_factorials(n);
    let nf = n as f64;
    let mut emi = 0.0;
    for &ai in a {
        for &bj in b {
            let lo = (ai + bj).saturating_sub(n).max(1);
            let hi = ai.min(bj);
            let fixed = lf[ai as usize] + lf[bj as usize] + lf[(n - ai) as usize] + lf[(n - bj) as usize]
                - lf[n as usize];
            for nij in lo..=hi {
                let log_p = fixed
                    - lf[nij as usize]
                    - lf[(ai - nij) as usize]
                    - lf[(bj - nij) as usize]
                    - lf[(n + nij - ai - bj) as usize];
                let nijf = nij as f64;
                let term = nijf / nf * (nf * nijf / (ai as f64 * bj as f64)).ln();
                emi += term * log_p.exp();
            }
        }
    }
    emi
}

/// Same labeling up to a renaming of labels.
pub fn same_partition(u: &[i64], v: &[i64]) -> bool {
    if u.len() != v.len() {
        return false;
    }
    let t = ContingencyTable::new(u, v);
    t.a.len() == t.b.len() && t.counts.iter().all(|row| row.iter().filter(|&&c| c > 0).count() == 1)
}

/// Adjusted mutual information with the arithmetic-mean normalizer.
///
/// When the normalizer equals the chance expectation (both labelings
/// trivial) the result is 1 for identical partitions and 0 otherwise.
pub fn adjusted_mutual_info(u: &[i64], v: &[i64]) -> f64 {
    let t = ContingencyTable::new(u, v);
    let mi = mi_from_table(&t);
    let emi = expected_mutual_info(&t.a, &t.b);
    let hu = entropy_of_counts(&t.a);
    let hv = entropy_of_counts(&t.b);
    let denom = 0.5 * (hu + hv) - emi;
    if denom.abs() < 1e-15 {
        return if same_partition(u, v) { 1.0 } else { 0.0 };
    }
    (mi - emi) / denom
}

/// Homogeneity of clusters `u` with respect to classes `v`, and completeness.
pub fn homogeneity_completeness(u: &[i64], v: &[i64]) -> (f64, f64) {
    let t = ContingencyTable::new(u, v);
    let mi = mi_from_table(&t);
    let hu = entropy_of_counts(&t.a);
    let hv = entropy_of_counts(&t.b);
    let h = if hv == 0.0 { 1.0 } else { (mi / hv).clamp(0.0, 1.0) };
    let c = if hu == 0.0 { 1.0 } else { (mi / hu).clamp(0.0, 1.0) };
    (h, c)
}

/// Number of distinct non-noise labels.
pub fn cluster_count(labels: &[i64]) -> usize {
    let mut seen: Vec<i64> = labels.iter().copied().filter(|&l| l >= 0).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}
