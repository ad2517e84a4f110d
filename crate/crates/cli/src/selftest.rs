//! Quick invariant checks bundled with the binary.

use chrono::{Duration, NaiveDateTime};
use energy_calib::joint::{build_joint, JointOptions};
use energy_calib::mrcal::{calibrate, coefs, profile_loglik, BsParams, Buckets, MrOptions};
use energy_calib::simulate::{
    simulate_bs, simulate_mr, simulate_mr_realworld, simulate_sp_realworld, ForwardCurve,
    MonthlyCurve,
};
use energy_calib::spotprompt::{calibrate_sp, rho_nu_xi, SPParams, SpOptions};
use energy_calib::stats::{corr_ci, jarque_bera, ks_test};
use energy_calib::timeseries::{parse_timestamp, to_steps, Observation};
use energy_calib::{
    FactorPoint, FactorSeries, Granularity, LevelGranularity, MRParams, PriceSeries, Transform,
};

use crate::report::{Check, SelftestResult};

type Outcome = anyhow::Result<(bool, String)>;

fn t0() -> NaiveDateTime {
    parse_timestamp("2010-01-01").expect("literal date")
}

fn daily(n: usize) -> Vec<NaiveDateTime> {
    (0..n).map(|k| t0() + Duration::days(k as i64)).collect()
}

fn series(label: &str, grid: &[NaiveDateTime], values: &[f64]) -> anyhow::Result<PriceSeries> {
    let obs = grid
        .iter()
        .zip(values)
        .map(|(t, v)| Observation {
            timestamp: *t,
            value: *v,
        })
        .collect();
    Ok(PriceSeries::new(label, obs)?)
}

fn published_constants() -> Outcome {
    let r1 = rho_nu_xi(1.0, 0.5);
    let r2 = rho_nu_xi(1.0, 1.0);
    let ok = (r1 * 100.0).round() == 99.0 && (r2 * 100.0).round() == 96.0;
    Ok((ok, format!("rho(0.5) = {r1:.4}, rho(1) = {r2:.4}")))
}

fn fisher_interval() -> Outcome {
    let ci = corr_ci(0.9244, 300, 0.05)?;
    let ok = (ci.lower - 0.9077).abs() <= 0.005 && (ci.upper - 0.9383).abs() <= 0.005;
    Ok((ok, format!("({:.4}, {:.4})", ci.lower, ci.upper)))
}

fn small_rate_coefficients() -> Outcome {
    let dt = 1.0 / 365.0;
    let c = coefs(1e-12, dt)?;
    let ok = (c.eta - 1.0).abs() < 1e-12
        && (c.kappa - dt).abs() < 1e-15
        && (c.gamma - dt.sqrt()).abs() < 1e-15;
    Ok((
        ok,
        format!("eta = {}, kappa = {}, gamma = {}", c.eta, c.kappa, c.gamma),
    ))
}

fn zero_vol_reproduces_curve() -> Outcome {
    let knots = vec![
        (t0(), 50.0),
        (t0() + Duration::days(40), 55.0),
        (t0() + Duration::days(70), 48.0),
    ];
    let curve = ForwardCurve::new(knots)?;
    let grid = daily(100);
    let p = simulate_mr(30.0, &MonthlyCurve::flat(0.0), &curve, &grid, 3, 1)?;
    let s = p
        .set("spot")
        .ok_or_else(|| anyhow::anyhow!("no spot set"))?;
    let mut worst: f64 = 0.0;
    for (k, t) in grid.iter().enumerate() {
        for path in 0..3 {
            worst = worst.max((s.value(path, k) - curve.value_at(*t)?).abs());
        }
    }
    Ok((worst == 0.0, format!("largest deviation {worst}")))
}

fn mr_round_trip() -> Outcome {
    let grid: Vec<NaiveDateTime> = daily(365 * 4);
    let p = MRParams::constant(40.0, 40.0 * 5f64.ln(), 0.6, Transform::Log);
    let out = simulate_mr_realworld(&p, &grid, 5f64.ln(), 1, 7, false)?;
    let x = out.set("x").ok_or_else(|| anyhow::anyhow!("no x set"))?;
    let values: Vec<f64> = x.path(0).iter().map(|v| v.exp()).collect();
    let s = series("rt", &grid, &values)?;
    let opts = MrOptions {
        buckets: Buckets {
            level: LevelGranularity::CalendarMonth,
            vol: Granularity::Flat,
        },
        ..Default::default()
    };
    let cal = calibrate(&s, Transform::Log, &opts)?;
    let se = cal.params.a_stderr.unwrap_or(f64::INFINITY);
    let ok = (cal.params.a - 40.0).abs() <= 4.0 * se;
    Ok((ok, format!("a = {:.3} +- {:.3}", cal.params.a, se)))
}

fn permutation_invariance() -> Outcome {
    let grid = daily(400);
    let p = MRParams::constant(20.0, 20.0, 0.5, Transform::Log);
    let out = simulate_mr_realworld(&p, &grid, 1.0, 1, 3, false)?;
    let x = out.set("x").ok_or_else(|| anyhow::anyhow!("no x set"))?;
    let values: Vec<f64> = x.path(0).iter().map(|v| v.exp()).collect();
    let steps = to_steps(&series("p", &grid, &values)?, Transform::Log)?;
    let mut rev = steps.clone();
    rev.pairs.reverse();
    let b = Buckets::default();
    let (l1, l2) = (
        profile_loglik(&steps, 20.0, b)?,
        profile_loglik(&rev, 20.0, b)?,
    );
    Ok((l1.to_bits() == l2.to_bits(), format!("{l1} vs {l2}")))
}

fn normality_tests() -> Outcome {
    let grid = daily(2001);
    let out = simulate_bs(
        &BsParams::constant(0.0, 1.0, Transform::Identity),
        &grid,
        0.0,
        1,
        11,
        true,
    )?;
    let eps = out
        .set("eps")
        .ok_or_else(|| anyhow::anyhow!("no eps set"))?
        .path(0);
    let (_, jb) = jarque_bera(eps)?;
    let (_, ks) = ks_test(eps)?;
    Ok((
        jb > 1e-3 && ks > 1e-3,
        format!("JB p = {jb:.4}, KS p = {ks:.4}"),
    ))
}

fn spot_prompt_identity() -> Outcome {
    let grid = daily(731);
    let p = SPParams::constant(150.0, 0.05, 0.1, 0.8, 0.5, 0.3);
    let out = simulate_sp_realworld(&p, &grid, 30.0, 32.0, 1, 5, false)?;
    let get = |l: &str| {
        out.set(l)
            .map(|s| s.path(0).to_vec())
            .ok_or_else(|| anyhow::anyhow!("no {l} set"))
    };
    let s = series("s", &grid, &get("spot")?)?;
    let i = series("i", &grid, &get("index")?)?;
    let cal = calibrate_sp(&s, &i, &SpOptions::default())?;
    let q = &cal.params;
    let rho = q.rho.values().next().map_or(0.0, |r| r.rho);
    let mut worst: f64 = 0.0;
    for (b, ss) in &q.sigma_s {
        let sig = q.quotient.sigma[b].sigma;
        let si = q.index.sigma[b].sigma;
        let rhs = ss.sigma * ss.sigma + si * si - 2.0 * ss.sigma * si * rho;
        worst = worst.max((sig * sig - rhs).abs() / (sig * sig));
    }
    Ok((
        worst <= 1e-10 && !q.sigma_s.is_empty(),
        format!("largest relative gap {worst:e}"),
    ))
}

fn joint_correlation() -> Outcome {
    let grid = daily(2001);
    let a = simulate_bs(
        &BsParams::constant(0.0, 1.0, Transform::Identity),
        &grid,
        0.0,
        1,
        21,
        true,
    )?;
    let b = simulate_bs(
        &BsParams::constant(0.0, 1.0, Transform::Identity),
        &grid,
        0.0,
        1,
        22,
        true,
    )?;
    let ea = a
        .set("eps")
        .ok_or_else(|| anyhow::anyhow!("no eps set"))?
        .path(0);
    let eb = b
        .set("eps")
        .ok_or_else(|| anyhow::anyhow!("no eps set"))?
        .path(0);
    let rho: f64 = 0.7;
    let mk = |label: &str, v: Vec<f64>| FactorSeries {
        label: label.into(),
        points: grid[1..]
            .iter()
            .zip(v)
            .map(|(t, value)| FactorPoint {
                timestamp: *t,
                value,
                dt: 1.0 / 365.0,
            })
            .collect(),
    };
    let mixed: Vec<f64> = ea
        .iter()
        .zip(eb)
        .map(|(x, y)| rho * x + (1.0 - rho * rho).sqrt() * y)
        .collect();
    let m = build_joint(
        &[mk("a", ea.to_vec()), mk("b", mixed)],
        &JointOptions::default(),
    )?;
    let c = m
        .get("a", "b", 0)
        .ok_or_else(|| anyhow::anyhow!("pair missing"))?;
    Ok((
        c.ci.contains(rho),
        format!(
            "{:.4} in ({:.4}, {:.4})",
            c.ci.estimate, c.ci.lower, c.ci.upper
        ),
    ))
}

pub fn run() -> SelftestResult {
    let checks: [(&str, fn() -> Outcome); 9] = [
        ("published-constants", published_constants),
        ("fisher-interval", fisher_interval),
        ("small-rate-coefficients", small_rate_coefficients),
        ("zero-vol-reproduces-curve", zero_vol_reproduces_curve),
        ("mr-round-trip", mr_round_trip),
        ("permutation-invariance", permutation_invariance),
        ("normality-tests", normality_tests),
        ("spot-prompt-identity", spot_prompt_identity),
        ("joint-correlation", joint_correlation),
    ];
    let checks: Vec<Check> = checks
        .iter()
        .map(|(name, f)| {
            let (passed, detail) = match f() {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e:#}")),
            };
            Check {
                name: name.to_string(),
                passed,
                detail,
            }
        })
        .collect();
    let passed = checks.iter().filter(|c| c.passed).count();
    SelftestResult {
        passed,
        failed: checks.len() - passed,
        checks,
    }
}
