use std::sync::Arc;

use bsg_core::ceci::CeciModel;
use bsg_core::dataset::{synthetic_samples, SynthConfig};
use bsg_core::metrics::{
    correlation_matrix, energy_distance_1d, energy_distance_cramer, energy_distance_direct, evaluate, wasserstein_1d,
    Grouping, MeanBeliefs, OracleBeliefs,
};
use bsg_core::rng;
use bsg_core::ClassCatalog;
use proptest::prelude::*;
use rand::Rng;

fn random_distribution(r: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| if r.gen_bool(0.3) { 0.0 } else { r.gen::<f64>() }).collect();
    if v.iter().all(|x| *x == 0.0) {
        v[r.gen_range(0..n)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// W1 as ∫₀¹ |F⁻¹(u) − G⁻¹(u)| du, walking both quantile functions.
fn quantile_w1(p: &[f64], q: &[f64]) -> f64 {
    let mut cuts: Vec<f64> = Vec::new();
    let (mut a, mut b) = (0.0, 0.0);
    for (x, y) in p.iter().zip(q) {
        a += x;
        b += y;
        cuts.push(a.min(1.0));
        cuts.push(b.min(1.0));
    }
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    let inv = |d: &[f64], u: f64| {
        let mut c = 0.0;
        for (i, x) in d.iter().enumerate() {
            c += x;
            if u < c {
                return i as f64;
            }
        }
        (d.len() - 1) as f64
    };
    cuts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (w[1] - w[0]) * (inv(p, mid) - inv(q, mid)).abs()
        })
        .sum()
}

#[test]
fn energy_paths_agree_on_random_pairs() {
    let mut r = rng::seeded(17);
    for _ in 0..1000 {
        let n = r.gen_range(1..46);
        let p = random_distribution(&mut r, n);
        let q = random_distribution(&mut r, n);
        let d = energy_distance_direct(&p, &q).unwrap();
        let c = energy_distance_cramer(&p, &q).unwrap();
        assert!((d - c).abs() < 1e-10 || (d * d - c * c).abs() < 1e-12, "{d} vs {c}");
        assert!(energy_distance_1d(&p, &q).is_ok());
    }
}

#[test]
fn wasserstein_matches_quantile_coupling() {
    let mut r = rng::seeded(18);
    for _ in 0..500 {
        let n = r.gen_range(1..12);
        let p = random_distribution(&mut r, n);
        let q = random_distribution(&mut r, n);
        let w = wasserstein_1d(&p, &q).unwrap();
        assert!((w - quantile_w1(&p, &q)).abs() < 1e-9, "{p:?} {q:?}");
    }
}

fn dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u32..5, n).prop_map(move |mut v| {
        if v.iter().all(|x| *x == 0) {
            v[0] = 1;
        }
        let s: u32 = v.iter().sum();
        v.iter().map(|x| *x as f64 / s as f64).collect()
    })
}

fn triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..10).prop_flat_map(|n| (dist(n), dist(n), dist(n)))
}

proptest! {
    #[test]
    fn distances_symmetric_nonnegative_and_triangle((p, q, s) in triple()) {
        let pq = wasserstein_1d(&p, &q).unwrap();
        prop_assert!(pq >= 0.0);
        prop_assert!((pq - wasserstein_1d(&q, &p).unwrap()).abs() < 1e-12);
        prop_assert!(pq <= wasserstein_1d(&p, &s).unwrap() + wasserstein_1d(&s, &q).unwrap() + 1e-9);
        let e = energy_distance_1d(&p, &q).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!((e - energy_distance_1d(&q, &p).unwrap()).abs() < 1e-12);
        prop_assert_eq!(pq == 0.0, p == q);
        prop_assert_eq!(e == 0.0, p == q);
    }

    #[test]
    fn correlation_unit_diagonal_bounded(rows in prop::collection::vec(prop::collection::vec(0u8..4, 5), 2..8)) {
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
        let (c, _) = correlation_matrix(&rows).unwrap();
        for i in 0..5 {
            prop_assert_eq!(c[[i, i]], 1.0);
            for j in 0..5 {
                prop_assert!((-1.0..=1.0).contains(&c[[i, j]]));
                prop_assert!((c[[i, j]] - c[[j, i]]).abs() < 1e-12);
            }
        }
    }
}

fn samples(count: i64) -> Vec<bsg_core::dataset::DatasetSample> {
    let catalog = Arc::new(ClassCatalog::default_catalog());
    synthetic_samples(&SynthConfig::default(), count, 2, 0.5, &catalog).unwrap()
}

#[test]
fn oracle_source_scores_zero() {
    let s = samples(8);
    let report = evaluate(&OracleBeliefs, &s, Grouping::Pooled).unwrap();
    assert_eq!(report.wasserstein.mean, 0.0);
    assert_eq!(report.energy.mean, 0.0);
    assert_eq!(report.frobenius, 0.0);
    assert_eq!(report.skipped_degenerate, 0);
    assert!(report.per_class.iter().all(|r| r.stats.mean == 0.0 && r.stats.max == 0.0));
}

#[test]
fn report_contract() {
    let s = samples(6);
    let catalog = s[0].ground_truth.catalog_arc().clone();
    let model = CeciModel::new(&catalog, 8, 0.5, 0).unwrap();
    let report = evaluate(&model, &s, Grouping::Pooled).unwrap();
    let json: serde_json::Value = serde_json::from_slice(&report.to_json()).unwrap();
    for key in ["wasserstein", "energy", "frobenius", "per_class"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report.per_class.len(), catalog.len());
    let csv = report.per_class_csv();
    assert_eq!(csv.lines().count(), catalog.len() + 1);
    assert!(report.box_plot_svg().starts_with("<svg"));
    assert_eq!(report.correlation_csv(true).lines().count(), catalog.len() + 1);

    let rooms = evaluate(&model, &s, Grouping::Rooms).unwrap();
    let buildings = evaluate(&model, &s, Grouping::Buildings).unwrap();
    assert_eq!(rooms.nodes + buildings.nodes, report.nodes);
    assert_eq!(buildings.nodes, s.iter().map(|x| x.partials.len()).sum::<usize>());
    assert_eq!(rooms.frobenius, report.frobenius);
}

#[test]
fn mean_beliefs_are_worse_than_oracle() {
    let s = samples(10);
    let mean = MeanBeliefs::fit(&s).unwrap();
    let report = evaluate(&mean, &s, Grouping::Rooms).unwrap();
    assert!(report.wasserstein.mean > 0.0);
    // a constant predictor has zero variance in every class
    assert_eq!(report.flagged_predicted.len(), s[0].ground_truth.catalog().len());
}
