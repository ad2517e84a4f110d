mod common;

use common::*;
use energy_calib::joint::*;
use energy_calib::stats::jb_statistic;
use energy_calib::{FactorPoint, FactorSeries, Granularity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn factor(label: &str, start: &str, values: &[f64]) -> FactorSeries {
    let t0 = ts(start);
    FactorSeries {
        label: label.into(),
        points: values
            .iter()
            .enumerate()
            .map(|(i, &v)| FactorPoint {
                timestamp: t0 + chrono::Duration::days(i as i64),
                value: v,
                dt: 1.0 / 365.0,
            })
            .collect(),
    }
}

fn correlated(n: usize, rho: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        a.push(z1);
        b.push(rho * z1 + (1.0 - rho * rho).sqrt() * z2);
    }
    (a, b)
}

fn flat() -> JointOptions {
    JointOptions::default()
}

fn monthly() -> JointOptions {
    JointOptions {
        granularity: Granularity::Monthly,
        ..Default::default()
    }
}

#[test]
fn independent_series_are_uncorrelated() {
    let n = 2000;
    for seed in 0..5 {
        let (a, b) = correlated(n, 0.0, seed);
        let m = build_joint(
            &[factor("a", "2001-01-01", &a), factor("b", "2001-01-01", &b)],
            &flat(),
        )
        .unwrap();
        let r = m.get("a", "b", 0).unwrap().ci.estimate;
        assert!(r.abs() < 3.0 / (n as f64).sqrt(), "{r}");
    }
}

#[test]
fn flat_correlation_recovered() {
    let (a, b) = correlated(2500, 0.7, 11);
    let m = build_joint(
        &[factor("a", "2001-01-01", &a), factor("b", "2001-01-01", &b)],
        &flat(),
    )
    .unwrap();
    let c = m.get("b", "a", 0).unwrap();
    assert!(c.ci.estimate > 0.65 && c.ci.estimate < 0.75);
    assert!(c.ci.contains(0.7));
    assert_eq!(c.n, 2500);
    assert_eq!(m.min_eigenvalue.len(), 1);
    assert!((m.min_eigenvalue[&0] - (1.0 - c.ci.estimate)).abs() < 1e-12);
}

#[test]
fn monthly_intervals_cover() {
    let (mut hit, mut total) = (0, 0);
    for seed in 0..20 {
        let (a, b) = correlated(1460, 0.7, 100 + seed);
        let m = build_joint(
            &[factor("a", "2001-01-01", &a), factor("b", "2001-01-01", &b)],
            &monthly(),
        )
        .unwrap();
        for c in &m.corr {
            total += 1;
            hit += c.ci.contains(0.7) as usize;
        }
    }
    assert_eq!(total, 240);
    let rate = hit as f64 / total as f64;
    assert!((0.88..=0.99).contains(&rate), "{rate}");
}

#[test]
fn pairwise_overlap_only() {
    let (a, b) = correlated(300, 0.5, 3);
    let c: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
    let m = build_joint(
        &[
            factor("a", "2001-01-01", &a),
            factor("b", "2001-02-01", &b),
            factor("c", "2001-11-01", &c),
        ],
        &flat(),
    )
    .unwrap();
    assert_eq!(m.get("a", "b", 0).unwrap().n, 300 - 31);
    assert!(m.get("a", "c", 0).is_none());
    assert!(m.get("b", "c", 0).is_some());
    let mat = m.matrix(0);
    assert_eq!(mat[0][2], None);
    assert!(m.min_eigenvalue.is_empty());
    let (cs, notes) = m.to_corr_structure();
    assert_eq!(cs.matrices[&0][0][2], 0.0);
    assert!(notes.iter().any(|n| n.contains("a / c")));
}

#[test]
fn order_does_not_matter() {
    let (a, b) = correlated(400, 0.4, 4);
    let (c, _) = correlated(400, 0.0, 5);
    let fa = factor("a", "2001-01-01", &a);
    let fb = factor("b", "2001-01-01", &b);
    let fc = factor("c", "2001-01-01", &c);
    let opts = JointOptions {
        trim_pct: 0.01,
        ..monthly()
    };
    let m1 = build_joint(&[fa.clone(), fb.clone(), fc.clone()], &opts).unwrap();
    let m2 = build_joint(&[fc, fa, fb], &opts).unwrap();
    for x in &m1.corr {
        let y = m2.get(&x.first, &x.second, x.bucket).unwrap();
        assert_eq!(x.ci, y.ci);
        assert_eq!(x.n, y.n);
    }
    assert_eq!(m1.corr.len(), m2.corr.len());
}

#[test]
fn trimming_lowers_jarque_bera_under_jumps() {
    let mut better = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let v: Vec<f64> = (0..1000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if rng.random::<f64>() < 0.03 {
                    z + 8.0 * if rng.random::<bool>() { 1.0 } else { -1.0 }
                } else {
                    z
                }
            })
            .collect();
        let f = factor("x", "2001-01-01", &v);
        let (kept, removed) = trim_outliers(&f, 0.02).unwrap();
        assert_eq!(removed.len(), 40);
        if jb_statistic(&kept.values()).unwrap() < jb_statistic(&v).unwrap() {
            better += 1;
        }
    }
    assert_eq!(better, 20);
}

#[test]
fn trimmed_timestamps_leave_the_pair() {
    let (mut a, b) = correlated(200, 0.6, 6);
    a[10] = 50.0;
    let opts = JointOptions {
        trim_pct: 0.01,
        ..flat()
    };
    let m = build_joint(
        &[factor("a", "2001-01-01", &a), factor("b", "2001-01-01", &b)],
        &opts,
    )
    .unwrap();
    // two from each tail of each series, union of the removed timestamps
    let fa = &m.factors[0];
    assert!(fa.trimmed.contains(&ts("2001-01-11")));
    let mut all: Vec<_> = m.factors.iter().flat_map(|f| f.trimmed.clone()).collect();
    all.sort();
    all.dedup();
    assert_eq!(m.get("a", "b", 0).unwrap().n, 200 - all.len());
}

#[test]
fn thin_monthly_buckets_suggest_seasons() {
    // ten points per calendar month
    let (a, b) = correlated(120, 0.7, 7);
    let t0 = ts("2001-01-01");
    let mk = |label: &str, v: &[f64]| FactorSeries {
        label: label.into(),
        points: v
            .iter()
            .enumerate()
            .map(|(i, &x)| FactorPoint {
                timestamp: t0 + chrono::Duration::days((i / 10 * 31 + i % 10) as i64),
                value: x,
                dt: 1.0 / 365.0,
            })
            .collect(),
    };
    let m = build_joint(&[mk("a", &a), mk("b", &b)], &monthly()).unwrap();
    assert!(m.corr.iter().all(|c| c.n == 10));
    let rec = granularity_check(&m, 0.3);
    assert_eq!(rec.suggestion, Some(Granularity::Seasonal));
    assert_eq!(rec.flagged.len(), 12);

    let m = build_joint(&[mk("a", &a), mk("b", &b)], &flat()).unwrap();
    assert!(granularity_check(&m, 0.3).is_empty());
}

#[test]
fn factor_roles_from_labels() {
    assert_eq!(FactorRole::of_label("gas:spot"), FactorRole::Spot);
    assert_eq!(FactorRole::of_label("gas:index"), FactorRole::Index);
    assert_eq!(FactorRole::of_label("power"), FactorRole::Single);
}

#[test]
fn input_errors() {
    let (a, _) = correlated(20, 0.0, 8);
    let f = factor("a", "2001-01-01", &a);
    assert!(build_joint(std::slice::from_ref(&f), &flat()).is_err());
    assert!(build_joint(&[f.clone(), f.clone()], &flat()).is_err());
    let bad = JointOptions {
        trim_pct: 0.2,
        ..flat()
    };
    let g = factor("b", "2001-01-01", &a);
    assert!(build_joint(&[f, g], &bad).is_err());
}
