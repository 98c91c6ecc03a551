//! Reference implementations shared by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

use opendiag::clustering::{OpticsResult, NOISE};
use rand::Rng;
use rand_distr::StandardNormal;

/// Direct DBSCAN: neighborhoods by brute force (`d <= eps`, self counted),
/// clusters as connected components of core points. Returns
/// `(core flags, cluster of each core point or -1, noise flags)`.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_samples: usize) -> (Vec<bool>, Vec<i64>, Vec<bool>) {
    let n = points.len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist(&points[i], &points[j]) <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_samples).collect();
    let mut label = vec![-1i64; n];
    let mut next = 0;
    for s in 0..n {
        if !core[s] || label[s] >= 0 {
            continue;
        }
        let mut stack = vec![s];
        label[s] = next;
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                if core[q] && label[q] < 0 {
                    label[q] = next;
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    let noise = (0..n)
        .map(|i| !core[i] && !neighbors[i].iter().any(|&j| core[j]))
        .collect();
    (core, label, noise)
}

/// Labels that agree up to a bijective renaming.
pub fn same_partition(a: &[i64], b: &[i64]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        if *fwd.entry(x).or_insert(y) != y || *back.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Counts per (cluster, class) keyed by label value.
fn table(u: &[i64], v: &[i64]) -> (Vec<Vec<u64>>, Vec<u64>, Vec<u64>) {
    let mut us: Vec<i64> = u.to_vec();
    us.sort_unstable();
    us.dedup();
    let mut vs: Vec<i64> = v.to_vec();
    vs.sort_unstable();
    vs.dedup();
    let mut t = vec![vec![0u64; vs.len()]; us.len()];
    for (x, y) in u.iter().zip(v) {
        let i = us.binary_search(x).unwrap();
        let j = vs.binary_search(y).unwrap();
        t[i][j] += 1;
    }
    let a = t.iter().map(|r| r.iter().sum()).collect();
    let b = (0..vs.len()).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    (t, a, b)
}

fn h(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| -(c as f64 / n) * (c as f64 / n).ln())
        .sum()
}

/// Conditional entropy `H(col | row)` straight from the joint table.
fn conditional_entropy(t: &[Vec<u64>], rows: &[u64], n: f64) -> f64 {
    let mut s = 0.0;
    for (i, r) in t.iter().enumerate() {
        for &c in r {
            if c > 0 {
                s -= c as f64 / n * (c as f64 / rows[i] as f64).ln();
            }
        }
    }
    s
}

/// `H(V) - H(V|U)`.
pub fn ref_mutual_info(u: &[i64], v: &[i64]) -> f64 {
    let (t, a, b) = table(u, v);
    let n = u.len() as f64;
    h(&b, n) - conditional_entropy(&t, &a, n)
}

/// Hypergeometric expectation with exact integer binomial probabilities.
pub fn ref_expected_mi(a: &[u64], b: &[u64]) -> f64 {
    let n: u64 = a.iter().sum();
    let mut emi = 0.0;
    for &ai in a {
        for &bj in b {
            let denom = binomial(n, bj) as f64;
            for nij in 1..=ai.min(bj) {
                let ways = binomial(ai, nij) * binomial(n - ai, bj - nij);
                if ways == 0 {
                    continue;
                }
                let p = ways as f64 / denom;
                let x = nij as f64;
                emi += p * x / n as f64 * (n as f64 * x / (ai as f64 * bj as f64)).ln();
            }
        }
    }
    emi
}

pub fn ref_ami(u: &[i64], v: &[i64]) -> f64 {
    let (_, a, b) = table(u, v);
    let n = u.len() as f64;
    let mi = ref_mutual_info(u, v);
    let emi = ref_expected_mi(&a, &b);
    let denom = 0.5 * (h(&a, n) + h(&b, n)) - emi;
    if denom.abs() < 1e-15 {
        return if same_partition(u, v) { 1.0 } else { 0.0 };
    }
    (mi - emi) / denom
}

/// `(1 - H(V|U)/H(V), 1 - H(U|V)/H(U))` with the zero-entropy conventions.
pub fn ref_homogeneity_completeness(u: &[i64], v: &[i64]) -> (f64, f64) {
    let (t, a, b) = table(u, v);
    let n = u.len() as f64;
    let (hu, hv) = (h(&a, n), h(&b, n));
    let transposed: Vec<Vec<u64>> = (0..b.len()).map(|j| t.iter().map(|r| r[j]).collect()).collect();
    let hom = if hv == 0.0 { 1.0 } else { 1.0 - conditional_entropy(&t, &a, n) / hv };
    let com = if hu == 0.0 { 1.0 } else { 1.0 - conditional_entropy(&transposed, &b, n) / hu };
    (hom, com)
}

/// Labels with the given block sizes: `[2, 1]` gives `[0, 0, 1]`.
pub fn labels_from_sizes(sizes: &[u64]) -> Vec<i64> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| std::iter::repeat(i as i64).take(s as usize))
        .collect()
}

/// Mean MI over all `n!` orderings of `v` against fixed `u`.
pub fn enumerate_expected_mi(a: &[u64], b: &[u64]) -> f64 {
    let u = labels_from_sizes(a);
    let mut v = labels_from_sizes(b);
    let n = v.len();
    let mut total = 0.0;
    let mut count = 0u64;
    // Heap's algorithm
    let mut c = vec![0usize; n];
    total += ref_mutual_info(&u, &v);
    count += 1;
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                v.swap(0, i);
            } else {
                v.swap(c[i], i);
            }
            total += ref_mutual_info(&u, &v);
            count += 1;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    total / count as f64
}

/// DBSCAN noise stays noise; a border point joins the cluster of the first
/// core neighbor preceding it in the ordering, and is noise when every core
/// neighbor comes after it.
pub fn check_border_convention(
    pts: &[Vec<f64>],
    r: &OpticsResult,
    core: &[bool],
    noise: &[bool],
    eps: f64,
) -> Result<(), String> {
    let mut position = vec![0; pts.len()];
    for (k, &p) in r.ordering.iter().enumerate() {
        position[p] = k;
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    for i in 0..pts.len() {
        let expected = if core[i] {
            if r.labels[i] == NOISE {
                return Err(format!("core point {i} labeled noise"));
            }
            continue;
        } else if noise[i] {
            NOISE
        } else {
            let first = (0..pts.len())
                .filter(|&j| core[j] && dist(&pts[i], &pts[j]) <= eps && position[j] < position[i])
                .min_by_key(|&j| position[j]);
            first.map_or(NOISE, |j| r.labels[j])
        };
        if r.labels[i] != expected {
            return Err(format!("point {i}: label {} expected {expected}", r.labels[i]));
        }
    }
    Ok(())
}

/// Core points partitioned as direct DBSCAN does, border points by the ordering rule.
pub fn dbscan_cut_matches(pts: &[Vec<f64>], r: &OpticsResult, eps: f64, min_samples: usize) -> Result<(), String> {
    let (core, core_label, noise) = dbscan(pts, eps, min_samples);
    let idx: Vec<usize> = (0..pts.len()).filter(|&i| core[i]).collect();
    let ours: Vec<i64> = idx.iter().map(|&i| r.labels[i]).collect();
    let theirs: Vec<i64> = idx.iter().map(|&i| core_label[i]).collect();
    if !same_partition(&ours, &theirs) {
        return Err("core partition differs".into());
    }
    check_border_convention(pts, r, &core, &noise, eps)
}

/// Isotropic Gaussian blob with `n` points in as many dimensions as `center` has.
pub fn blob<R: Rng>(rng: &mut R, center: &[f64], sigma: f64, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| center.iter().map(|c| c + sigma * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}
