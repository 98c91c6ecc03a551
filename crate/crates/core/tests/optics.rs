mod common;

use opendiag::clustering::{optics, optics_order, Extraction, OpticsParams, NOISE};
use opendiag::nn::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    points: Vec<Vec<f64>>,
    min_samples: usize,
    xi: f64,
    ordering: Vec<usize>,
    reachability: Vec<Option<f64>>,
    core_distances: Vec<Option<f64>>,
    labels: Vec<i64>,
}

fn inf(v: &Option<f64>) -> f64 {
    v.unwrap_or(f64::INFINITY)
}

#[test]
fn matches_reference_ordering_and_xi_labels() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/optics_reference.json")).unwrap();
    let cases: Vec<Case> = serde_json::from_str(&text).unwrap();
    assert_eq!(cases.len(), 12);
    for (k, case) in cases.iter().enumerate() {
        let pts = Matrix::from_rows(&case.points).unwrap();
        let params = OpticsParams {
            min_samples: case.min_samples,
            max_eps: None,
            extraction: Extraction::Xi { xi: case.xi },
        };
        let r = optics(&pts, &params).unwrap();
        assert_eq!(r.ordering, case.ordering, "case {k}: ordering");
        for i in 0..pts.rows() {
            let (a, b) = (r.reachability[i], inf(&case.reachability[i]));
            assert!(a == b || (a - b).abs() < 1e-9, "case {k}: reachability {i}");
            let (a, b) = (r.core_distances[i], inf(&case.core_distances[i]));
            assert!(a == b || (a - b).abs() < 1e-9, "case {k}: core distance {i}");
        }
        assert_eq!(r.labels, case.labels, "case {k}: labels");
    }
}

#[test]
fn dbscan_cut_equals_direct_dbscan() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let mut pts = Vec::new();
        for _ in 0..rng.random_range(1..5) {
            let c = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
            let sigma = rng.random_range(0.3..1.5);
            pts.extend(common::blob(&mut rng, &c, sigma, 40));
        }
        while pts.len() < 200 {
            pts.push(vec![rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0)]);
        }
        let eps = rng.random_range(0.3..1.5);
        let min_samples = rng.random_range(3..10);
        let params = OpticsParams {
            min_samples,
            max_eps: None,
            extraction: Extraction::DbscanCut { eps },
        };
        let r = optics(&Matrix::from_rows(&pts).unwrap(), &params).unwrap();
        common::dbscan_cut_matches(&pts, &r, eps, min_samples).unwrap();
    }
}

#[test]
fn separated_blobs_are_recovered_and_invariant_to_input_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pts = common::blob(&mut rng, &[0.0, 0.0], 1.0, 200);
    pts.extend(common::blob(&mut rng, &[20.0, 0.0], 1.0, 200));
    let truth: Vec<i64> = (0..400).map(|i| (i / 200) as i64).collect();
    let params = OpticsParams {
        min_samples: 10,
        max_eps: None,
        extraction: Extraction::DbscanCut { eps: 10.0 },
    };
    let r = optics(&Matrix::from_rows(&pts).unwrap(), &params).unwrap();
    assert_eq!(r.n_clusters, 2);
    let core_members: Vec<usize> = (0..400).filter(|&i| r.labels[i] != NOISE).collect();
    assert!(core_members.len() >= 390);
    let a: Vec<i64> = core_members.iter().map(|&i| r.labels[i]).collect();
    let b: Vec<i64> = core_members.iter().map(|&i| truth[i]).collect();
    assert!(common::same_partition(&a, &b));

    // in-cluster reachability stays below the spike that bounds each xi cluster
    let xi_params = OpticsParams {
        extraction: Extraction::Xi { xi: 0.05 },
        ..params
    };
    let rx = optics(&Matrix::from_rows(&pts).unwrap(), &xi_params).unwrap();
    assert!(rx.n_clusters >= 2);
    let plot: Vec<f64> = rx.ordering.iter().map(|&p| rx.reachability[p]).collect();
    for &(s, e) in &rx.intervals {
        let inner = plot[s + 1..=e].iter().cloned().fold(0.0, f64::max);
        let boundary = plot[s].min(plot.get(e + 1).copied().unwrap_or(f64::INFINITY));
        assert!(inner <= boundary);
    }

    let mut perm: Vec<usize> = (0..400).collect();
    perm.reverse();
    let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
    let r2 = optics(&Matrix::from_rows(&shuffled).unwrap(), &params).unwrap();
    assert_eq!(r2.n_clusters, 2);
    let back: Vec<i64> = core_members.iter().map(|&i| r2.labels[399 - i]).collect();
    assert!(common::same_partition(&a, &back));
}

#[test]
fn single_uniform_blob_is_one_cluster() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pts: Vec<Vec<f64>> = (0..300)
        .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
        .collect();
    let params = OpticsParams {
        min_samples: 20,
        max_eps: None,
        extraction: Extraction::DbscanCut { eps: 0.3 },
    };
    let r = optics(&Matrix::from_rows(&pts).unwrap(), &params).unwrap();
    assert_eq!(r.n_clusters, 1);
    let r = optics_order(&Matrix::from_rows(&pts).unwrap(), &params).unwrap();
    let mut sorted = r.ordering.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..300).collect::<Vec<_>>());
}
