mod common;

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use common::*;
use energy_calib::mrcal::{coefs, BsParams};
use energy_calib::simulate::*;
use energy_calib::spotprompt::SPParams;
use energy_calib::stats::ks_test;
use energy_calib::{Granularity, MRParams, Transform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Month boundaries strictly inside `(t0, t1)`, plus both ends.
fn cuts(t0: NaiveDateTime, t1: NaiveDateTime) -> Vec<NaiveDateTime> {
    let mut out = vec![t0];
    let mut d = NaiveDate::from_ymd_opt(t0.year(), t0.month(), 1).unwrap();
    loop {
        d = if d.month() == 12 {
            NaiveDate::from_ymd_opt(d.year() + 1, 1, 1).unwrap()
        } else {
            NaiveDate::from_ymd_opt(d.year(), d.month() + 1, 1).unwrap()
        };
        let t = d.and_hms_opt(0, 0, 0).unwrap();
        if t >= t1 {
            break;
        }
        out.push(t);
    }
    out.push(t1);
    out
}

fn piecewise_quad(t0: NaiveDateTime, t1: NaiveDateTime, f: &dyn Fn(f64, u32) -> f64) -> f64 {
    cuts(t0, t1)
        .windows(2)
        .map(|w| {
            let m = w[0].month();
            simpson(&|u| f(u, m), years(t0, w[0]), years(t0, w[1]), 1e-16)
        })
        .sum()
}

#[test]
fn v_squared_closed_forms() {
    let (t0, t1) = (ts("2011-03-01"), ts("2011-03-21"));
    let dt = years(t0, t1);
    let s = MonthlyCurve::flat(0.6);
    assert!((v_squared(0.0, &s, t0, t1).unwrap() - 0.36 * dt).abs() < 1e-15);
    let a = 7.0;
    let want = 0.36 / (2.0 * a) * (1.0 - (-2.0 * a * dt).exp());
    assert!((v_squared(a, &s, t0, t1).unwrap() - want).abs() < 1e-15);
}

#[test]
fn v_squared_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let a = 10f64.powf(rng.random_range(-2.0..2.5));
        let season = [
            rng.random_range(0.1..2.0),
            rng.random_range(0.1..2.0),
            rng.random_range(0.1..2.0),
            rng.random_range(0.1..2.0),
        ];
        let sigma = MonthlyCurve::from_fn(|m| season[Granularity::Seasonal.bucket(m) as usize - 1]);
        let t0 = ts("2012-01-17") + chrono::Duration::hours(rng.random_range(0..400));
        let t1 = t0 + chrono::Duration::days(rng.random_range(60..100));
        let tt = years(t0, t1);
        let got = v_squared(a, &sigma, t0, t1).unwrap();
        let want = piecewise_quad(t0, t1, &|u, m| {
            (-2.0 * a * (tt - u)).exp() * sigma.at(m).powi(2)
        });
        assert!(
            ((got - want) / want).abs() < 1e-10,
            "a={a}: {got} vs {want}"
        );
    }
}

fn random_sp(rng: &mut ChaCha8Rng) -> SpCurves {
    let c = || MonthlyCurve::from_fn(|_| 0.0);
    let mut s = c();
    let mut i = c();
    let mut r = c();
    for m in 0..12 {
        s.0[m] = rng.random_range(0.2..1.5);
        i.0[m] = rng.random_range(0.1..0.8);
        r.0[m] = rng.random_range(-0.9..0.9);
    }
    SpCurves {
        a: rng.random_range(1.0..200.0),
        sigma_s: s,
        sigma_i: i,
        rho: r,
        b: 0.0,
    }
}

#[test]
fn sp_theta_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (ti, tn) = (ts("2013-01-28"), ts("2013-02-25"));
    for _ in 0..20 {
        let p = random_sp(&mut rng);
        let t = ti + chrono::Duration::hours(rng.random_range(1..27 * 24));
        let v = piecewise_quad(ti, t, &|_, m| {
            let (s, i, r) = (p.sigma_s.at(m), p.sigma_i.at(m), p.rho.at(m));
            s * s + i * i - 2.0 * s * i * r
        });
        let want = 0.5 * v - p.sigma_s.at(t.month()).powi(2) / (2.0 * p.a);
        let got = sp_theta(&p, ti, tn, t).unwrap();
        assert!(((got - want) / want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn sp_theta_edge_cases() {
    let p = SpCurves {
        a: 50.0,
        sigma_s: MonthlyCurve::flat(0.8),
        sigma_i: MonthlyCurve::flat(0.8),
        rho: MonthlyCurve::flat(1.0),
        b: 0.0,
    };
    let (ti, tn) = (ts("2013-01-28"), ts("2013-02-25"));
    let want = -0.64 / 100.0;
    assert!((sp_theta(&p, ti, tn, ti).unwrap() - want).abs() < 1e-15);
    assert!((sp_theta(&p, ti, tn, ts("2013-02-10")).unwrap() - want).abs() < 1e-15);
    assert!(sp_theta(&p, ti, tn, tn).is_err());
}

fn curve() -> ForwardCurve {
    ForwardCurve::new(vec![
        (ts("2010-01-01"), 50.0),
        (ts("2010-01-27"), 52.0),
        (ts("2010-02-24"), 47.0),
        (ts("2010-03-26"), 51.0),
        (ts("2010-04-27"), 55.0),
        (ts("2010-05-26"), 53.0),
    ])
    .unwrap()
}

#[test]
fn mr_zero_vol_reproduces_curve() {
    let c = curve();
    let g = grid("2010-01-04", 100, 24);
    let p = simulate_mr(30.0, &MonthlyCurve::flat(0.0), &c, &g, 5, 1).unwrap();
    let s = p.set("spot").unwrap();
    for path in 0..5 {
        for (k, t) in g.iter().enumerate() {
            assert_eq!(s.value(path, k), c.value_at(*t).unwrap());
        }
    }
}

#[test]
fn mr_no_arbitrage_and_log_variance() {
    let c = curve();
    let g = grid("2010-01-04", 100, 24);
    let sigma = MonthlyCurve::from_fn(|m| 0.5 + 0.1 * m as f64);
    let a = 20.0;
    let n = 100_000;
    let p = simulate_mr(a, &sigma, &c, &g, n, 2).unwrap();
    let s = p.set("spot").unwrap();
    for k in (1..g.len()).step_by(7) {
        let (m, se) = s.mean_and_se(k);
        let f = c.value_at(g[k]).unwrap();
        assert!((m - f).abs() < 3.0 * se, "t={}: {m} vs {f} (se {se})", g[k]);
        let logs: Vec<f64> = s.column(k).iter().map(|v| v.ln()).collect();
        let v2 = v_squared(a, &sigma, g[0], g[k]).unwrap();
        let lv = var(&logs);
        let se_v = v2 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((lv - v2).abs() < 3.0 * se_v, "{lv} vs {v2}");
    }
}

#[test]
fn forward_curve_evolve_is_martingale() {
    let c = ForwardCurve::new(vec![
        (ts("2010-01-01"), 40.0),
        (ts("2010-02-01"), 44.0),
        (ts("2010-03-01"), 41.0),
    ])
    .unwrap();
    let g = grid("2010-01-01", 30, 24);
    let (a, sigma) = (8.0, MonthlyCurve::flat(0.7));
    let p = simulate_mr(a, &sigma, &c, &g, 100_000, 3).unwrap();
    let s = p.set("spot").unwrap();
    let t = *g.last().unwrap();
    let expiry = ts("2010-03-10");
    let f: Vec<f64> = s
        .column(g.len() - 1)
        .iter()
        .map(|st| forward_curve_evolve(&c, *st, g[0], t, expiry, a, &sigma).unwrap())
        .collect();
    let (m, se) = mean_and_se(&f);
    assert!((m - 41.0).abs() < 3.0 * se, "{m} ± {se}");
    assert_eq!(
        forward_curve_evolve(&c, 40.0, g[0], g[0], expiry, a, &sigma).unwrap(),
        41.0
    );
    assert_eq!(
        forward_curve_evolve(&c, 43.5, g[0], expiry, expiry, a, &sigma).unwrap(),
        43.5
    );
}

#[test]
fn mr_realworld_equilibrium_and_moments() {
    let g = grid("2011-01-01", 61, 24);
    let p = MRParams::constant(40.0, 40.0 * 3.0, 0.0, Transform::Log);
    let out = simulate_mr_realworld(&p, &g, 3.0, 4, 9, false).unwrap();
    assert!(out
        .set("x")
        .unwrap()
        .values
        .iter()
        .all(|x| (x - 3.0).abs() < 1e-12));

    let (a, th, s) = (12.0, 12.0 * 2.5, 0.9);
    let p = MRParams::constant(a, th, s, Transform::Log);
    let n = 100_000;
    let out = simulate_mr_realworld(&p, &g, 4.0, n, 10, false).unwrap();
    let x = out.set("x").unwrap().column(60);
    let tt = years(g[0], g[60]);
    let c = coefs(a, tt).unwrap();
    let m_true = c.eta * 4.0 + th * c.kappa;
    let v_true = s * s * c.gamma * c.gamma;
    let (m, se) = mean_and_se(&x);
    assert!((m - m_true).abs() < 3.0 * se);
    let se_v = v_true * (2.0 / n as f64).sqrt();
    assert!((var(&x) - v_true).abs() < 3.0 * se_v);
}

#[test]
fn one_step_draws_pass_ks() {
    let g = vec![ts("2011-05-02"), ts("2011-05-03")];
    let (a, th, s) = (150.0, 150.0 * 1.2, 0.8);
    let p = MRParams::constant(a, th, s, Transform::Log);
    let out = simulate_mr_realworld(&p, &g, 1.0, 100_000, 77, false).unwrap();
    let c = coefs(a, years(g[0], g[1])).unwrap();
    let z: Vec<f64> = out
        .set("x")
        .unwrap()
        .column(1)
        .iter()
        .map(|x| (x - c.eta - th * c.kappa) / (s * c.gamma))
        .collect();
    let (_, pv) = ks_test(&z).unwrap();
    assert!(pv > 0.01, "KS p-value {pv}");
}

#[test]
fn grid_refinement_leaves_horizon_moments() {
    let p = MRParams::constant(25.0, 25.0 * 0.3, 1.1, Transform::Log);
    let coarse = grid("2011-01-01", 31, 24);
    let fine = grid("2011-01-01", 61, 12);
    let n = 100_000;
    let a = simulate_mr_realworld(&p, &coarse, 0.0, n, 1, false)
        .unwrap()
        .set("x")
        .unwrap()
        .column(30);
    let b = simulate_mr_realworld(&p, &fine, 0.0, n, 2, false)
        .unwrap()
        .set("x")
        .unwrap()
        .column(60);
    let ((ma, sa), (mb, sb)) = (mean_and_se(&a), mean_and_se(&b));
    assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt());
    let (va, vb) = (var(&a), var(&b));
    let se = va * (4.0 / n as f64).sqrt();
    assert!((va - vb).abs() < 3.0 * se, "{va} vs {vb}");
}

#[test]
fn bs_matches_closed_form() {
    let p = BsParams::constant(0.2, 0.5, Transform::Log);
    let g = grid("2011-01-01", 11, 24 * 7);
    let out = simulate_bs(&p, &g, 1.0, 50_000, 4, true).unwrap();
    let x = out.set("x").unwrap().column(10);
    let tt = years(g[0], g[10]);
    let (m, se) = mean_and_se(&x);
    assert!((m - 1.0 - 0.2 * tt).abs() < 3.0 * se);
    assert_eq!(out.set("eps").unwrap().n_times, 10);
}

#[test]
fn seed_determinism() {
    let p = MRParams::constant(25.0, 7.0, 1.1, Transform::Log);
    let g = grid("2011-01-01", 20, 24);
    let a = simulate_mr_realworld(&p, &g, 0.0, 300, 5, true).unwrap();
    let b = simulate_mr_realworld(&p, &g, 0.0, 300, 5, true).unwrap();
    assert_eq!(a, b);
    let c = simulate_mr_realworld(&p, &g, 0.0, 300, 6, true).unwrap();
    assert_ne!(a, c);
    // more paths keep the earlier ones
    let d = simulate_mr_realworld(&p, &g, 0.0, 600, 5, true).unwrap();
    assert_eq!(a.sets[0].values[..], d.sets[0].values[..300 * 20]);
}

fn sp_curves(b: f64) -> SpCurves {
    SpCurves {
        a: 40.0,
        sigma_s: MonthlyCurve::from_fn(|m| 0.7 + 0.05 * m as f64),
        sigma_i: MonthlyCurve::from_fn(|m| 0.45 - 0.02 * m as f64),
        rho: MonthlyCurve::flat(0.3),
        b,
    }
}

fn window_of(t: NaiveDateTime, c: &ForwardCurve) -> usize {
    c.window(t).unwrap()
}

#[test]
fn sp_no_arbitrage_and_index_martingale() {
    for b in [0.0, 3.0] {
        let c = curve();
        let g = grid("2010-01-04", 120, 24);
        let n = 100_000;
        let out = simulate_sp(&sp_curves(b), &c, &g, n, 21).unwrap();
        let (spot, index, exp) = (
            out.set("spot").unwrap(),
            out.set("index").unwrap(),
            out.set("expiring").unwrap(),
        );
        assert_eq!(exp.n_times, 4);
        for k in (1..g.len()).step_by(5) {
            let w = window_of(g[k], &c);
            // spot against the value of the index at the start of its window
            let d: Vec<f64> = (0..n)
                .map(|p| {
                    let anchor = if w == 0 {
                        c.knots()[0].1
                    } else {
                        exp.value(p, w - 1)
                    };
                    spot.value(p, k) - anchor
                })
                .collect();
            let (m, se) = mean_and_se(&d);
            assert!(
                m.abs() <= 3.0 * se,
                "b={b} t={}: spot bias {m} (se {se})",
                g[k]
            );
            let (mi, sei) = index.mean_and_se(k);
            let f = c.knots()[w + 1].1;
            assert!(
                (mi - f).abs() < 3.0 * sei,
                "b={b} t={}: index {mi} vs {f}",
                g[k]
            );
        }
        for r in 0..4 {
            let (m, se) = exp.mean_and_se(r);
            let f = c.knots()[r + 1].1;
            assert!((m - f).abs() < 3.0 * se);
        }
    }
}

#[test]
fn sp_without_index_vol_reduces_to_mr() {
    let c = curve();
    let mut p = sp_curves(0.0);
    p.sigma_i = MonthlyCurve::flat(0.0);
    let g = grid("2010-01-04", 20, 24);
    let n = 100_000;
    let sp = simulate_sp(&p, &c, &g, n, 31).unwrap();
    let flat = ForwardCurve::flat(ts("2010-01-01"), 50.0).unwrap();
    let mr = simulate_mr(p.a, &p.sigma_s, &flat, &g, n, 32).unwrap();
    let x: Vec<f64> = sp
        .set("spot")
        .unwrap()
        .column(19)
        .iter()
        .map(|v| v.ln())
        .collect();
    let y: Vec<f64> = mr
        .set("spot")
        .unwrap()
        .column(19)
        .iter()
        .map(|v| v.ln())
        .collect();
    let ((mx, sx), (my, sy)) = (mean_and_se(&x), mean_and_se(&y));
    assert!((mx - my).abs() < 3.0 * (sx * sx + sy * sy).sqrt());
    let (vx, vy) = (var(&x), var(&y));
    assert!((vx - vy).abs() < 3.0 * vx * (4.0 / n as f64).sqrt());
    assert!(sp
        .set("index")
        .unwrap()
        .values
        .iter()
        .all(|v| *v == 52.0 || *v == 47.0));
}

#[test]
fn sp_curve_errors() {
    let c = curve();
    let p = sp_curves(0.0);
    assert!(simulate_sp(&p, &c, &grid("2009-12-01", 5, 24), 10, 1).is_err());
    // the last roll inside the grid has no following contract
    assert!(simulate_sp(&p, &c, &grid("2010-05-20", 10, 24), 10, 1).is_err());
}

/// Compares the literal conditional moments of the write-up with the
/// simulator: starting mid-window, the printed conditional expectation of
/// the spot is averaged over simulated states and compared with the index
/// value at the window start. The gap is printed, not asserted.
#[test]
fn printed_moments_diagnostic() {
    let c = curve();
    let p = sp_curves(0.0);
    let g = vec![ts("2010-01-27"), ts("2010-02-05"), ts("2010-02-20")];
    let n = 100_000;
    let out = simulate_sp(&p, &c, &g, n, 41).unwrap();
    let (spot, index) = (out.set("spot").unwrap(), out.set("index").unwrap());
    let ti = g[0];
    let printed: Vec<f64> = (0..n)
        .map(|k| {
            let (m, v) = sp_log_moments_as_printed(
                &p,
                ti,
                g[1],
                g[2],
                spot.value(k, 1).ln(),
                index.value(k, 1).ln(),
            );
            (m + 0.5 * v).exp()
        })
        .collect();
    let (m_printed, se) = mean_and_se(&printed);
    let (m_sim, se_sim) = spot.mean_and_se(2);
    let target = c.knots()[1].1;
    println!(
        "printed-moment diagnostic: E[S_t] target {target}, simulator {m_sim:.4} ± {se_sim:.4}, \
         printed conditional moments {m_printed:.4} ± {se:.4}"
    );
    assert!((m_sim - target).abs() < 3.0 * se_sim);
    assert!(m_printed.is_finite());
}

#[test]
fn sp_realworld_draws() {
    let p = SPParams::constant(60.0, 0.0, 0.1, 0.8, 0.5, 0.3);
    let g = grid("2011-01-01", 200, 24);
    let out = simulate_sp_realworld(&p, &g, 30.0, 32.0, 200, 5, true).unwrap();
    assert_eq!(out.set("eps_s").unwrap().n_times, 199);
    let eps = &out.set("eps_s").unwrap().values;
    let xi = &out.set("xi").unwrap().values;
    let (m, v) = (mean(eps), var(eps));
    assert!(m.abs() < 0.02 && (v - 1.0).abs() < 0.03, "{m} {v}");
    assert!((var(xi) - 1.0).abs() < 0.03);
}

#[test]
fn joint_identity_is_independent() {
    let g = grid("2011-01-01", 101, 24);
    let members = vec![
        JointMember::Mr {
            label: "gas".into(),
            params: MRParams::constant(30.0, 30.0, 0.6, Transform::Log),
            x0: 1.0,
        },
        JointMember::Bs {
            label: "oil".into(),
            params: BsParams::constant(0.0, 0.3, Transform::Log),
            x0: 4.0,
        },
    ];
    let corr = CorrStructure::identity(vec!["gas".into(), "oil".into()]);
    let n = 2000;
    let out = simulate_joint(&members, &corr, &g, n, 3, true).unwrap();
    let a = &out.set("eps:gas").unwrap().values;
    let b = &out.set("eps:oil").unwrap().values;
    let r = energy_calib::stats::pearson(a, b).unwrap();
    assert!(r.abs() < 3.0 / ((n * 100) as f64).sqrt(), "{r}");
}

#[test]
fn joint_pair_correlation_and_factor_count() {
    let g = grid("2011-01-01", 101, 24);
    let members = vec![
        JointMember::Mr {
            label: "gas".into(),
            params: MRParams::constant(30.0, 30.0, 0.6, Transform::Log),
            x0: 1.0,
        },
        JointMember::Mr {
            label: "power".into(),
            params: MRParams::constant(80.0, 240.0, 1.2, Transform::Log),
            x0: 3.0,
        },
    ];
    let n = 2000;
    let out = simulate_joint(
        &members,
        &CorrStructure::pair("gas", "power", 0.7),
        &g,
        n,
        4,
        true,
    )
    .unwrap();
    let a = &out.set("eps:gas").unwrap().values;
    let b = &out.set("eps:power").unwrap().values;
    let r = energy_calib::stats::pearson(a, b).unwrap();
    let se = (1.0 - 0.49) / ((n * 100) as f64).sqrt();
    assert!((r - 0.7).abs() < 3.0 * se, "{r}");

    // one spot-prompt and one mean-reverting member: three factors per step
    let members = vec![
        JointMember::Sp {
            label: "pw".into(),
            params: SPParams::constant(60.0, 0.0, 0.0, 0.8, 0.5, 0.3),
            spot0: 30.0,
            index0: 31.0,
        },
        JointMember::Mr {
            label: "gas".into(),
            params: MRParams::constant(30.0, 30.0, 0.6, Transform::Log),
            x0: 1.0,
        },
    ];
    let corr = CorrStructure::identity(vec!["pw:spot".into(), "pw:index".into(), "gas".into()]);
    let out = simulate_joint(&members, &corr, &g, 10, 4, true).unwrap();
    let eps: Vec<&str> = out
        .sets
        .iter()
        .filter(|s| s.label.starts_with("eps:"))
        .map(|s| s.label.as_str())
        .collect();
    assert_eq!(eps, ["eps:pw:spot", "eps:pw:index", "eps:gas"]);
    assert!(
        out.set("pw:spot").is_some() && out.set("pw:index").is_some() && out.set("gas").is_some()
    );
}

#[test]
fn joint_repairs_and_reports() {
    let g = grid("2011-01-01", 5, 24);
    let mk = |l: &str| JointMember::Bs {
        label: l.into(),
        params: BsParams::constant(0.0, 0.3, Transform::Log),
        x0: 0.0,
    };
    let members = vec![mk("a"), mk("b"), mk("c")];
    let mut corr = CorrStructure::identity(vec!["a".into(), "b".into(), "c".into()]);
    corr.matrices.insert(
        0,
        vec![
            vec![1.0, 0.9, -0.9],
            vec![0.9, 1.0, 0.9],
            vec![-0.9, 0.9, 1.0],
        ],
    );
    let out = simulate_joint(&members, &corr, &g, 10, 1, false).unwrap();
    assert!(
        out.notes.iter().any(|n| n.contains("repaired")),
        "{:?}",
        out.notes
    );

    corr.matrices
        .insert(0, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    assert!(matches!(
        simulate_joint(&members, &corr, &g, 10, 1, false),
        Err(energy_calib::Error::DimensionMismatch { .. })
    ));
}

#[test]
fn roll_dates_generator() {
    let d = generate_roll_dates(
        NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(),
        NaiveDate::from_ymd_opt(2010, 3, 31).unwrap(),
        3,
    );
    assert_eq!(d.len(), 3);
    assert!(d.iter().all(|x| x.weekday().num_days_from_monday() < 5));
}

#[test]
fn sim_spec_json_round_trip() {
    let spec = SimSpec {
        model: SimModel::MrRealWorld {
            params: MRParams::constant(5.0, 5.0, 0.3, Transform::Log),
            x0: 1.0,
        },
        grid: grid("2011-01-01", 3, 24),
        n_paths: 2,
        seed: 9,
        store_draws: false,
    };
    let s = serde_json::to_string(&spec).unwrap();
    let back: SimSpec = serde_json::from_str(&s).unwrap();
    assert_eq!(spec, back);
    assert_eq!(simulate(&spec).unwrap(), simulate(&back).unwrap());
}
