#![allow(dead_code)]

use chrono::{Duration, NaiveDateTime};
use energy_calib::simulate::PathSet;
use energy_calib::timeseries::{parse_timestamp, Observation};
use energy_calib::PriceSeries;

pub fn ts(s: &str) -> NaiveDateTime {
    parse_timestamp(s).unwrap_or_else(|| panic!("bad timestamp {s}"))
}

/// `n` points spaced `step_hours` apart.
pub fn grid(start: &str, n: usize, step_hours: i64) -> Vec<NaiveDateTime> {
    let t0 = ts(start);
    (0..n)
        .map(|k| t0 + Duration::hours(step_hours * k as i64))
        .collect()
}

pub fn years(t0: NaiveDateTime, t: NaiveDateTime) -> f64 {
    (t - t0).num_seconds() as f64 / (365.0 * 86400.0)
}

/// Adaptive Simpson quadrature.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Price series of one simulated path.
pub fn path_series(label: &str, grid: &[NaiveDateTime], values: &[f64]) -> PriceSeries {
    let obs = grid
        .iter()
        .zip(values)
        .map(|(t, v)| Observation {
            timestamp: *t,
            value: *v,
        })
        .collect();
    PriceSeries::new(label, obs).unwrap()
}

pub fn exp_path(set: &PathSet, p: usize) -> Vec<f64> {
    set.path(p).iter().map(|x| x.exp()).collect()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Weekday dates from `start` covering `n_years` calendar years.
pub fn weekdays(start: &str, n_years: i32) -> Vec<NaiveDateTime> {
    use chrono::Datelike;
    let t0 = ts(start);
    let end = t0.with_year(t0.year() + n_years).unwrap();
    let mut out = Vec::new();
    let mut t = t0;
    while t < end {
        if t.weekday().num_days_from_monday() < 5 {
            out.push(t);
        }
        t += Duration::days(1);
    }
    out
}

/// Monthly levels (pooled over years) and monthly volatilities.
pub fn seasonal_mr(a: f64, theta: [f64; 12], sigma: [f64; 12]) -> energy_calib::MRParams {
    use energy_calib::mrcal::{Buckets, VolEstimate};
    use energy_calib::timeseries::LevelKey;
    use energy_calib::{Granularity, LevelGranularity, Transform};
    energy_calib::MRParams {
        a,
        a_stderr: None,
        transform: Transform::Log,
        buckets: Buckets {
            level: LevelGranularity::CalendarMonth,
            vol: Granularity::Monthly,
        },
        theta: (1..=12u32)
            .map(|m| {
                (
                    LevelKey {
                        year: None,
                        month: m,
                    },
                    theta[m as usize - 1],
                )
            })
            .collect(),
        level_counts: Default::default(),
        sigma: (1..=12u32)
            .map(|m| {
                (
                    m,
                    VolEstimate {
                        sigma: sigma[m as usize - 1],
                        n: 0,
                        ci: None,
                        low_count: false,
                    },
                )
            })
            .collect(),
    }
}

/// Winter-high seasonal volatility in [0.5, 1.5].
pub fn seasonal_sigma() -> [f64; 12] {
    let mut s = [0.0; 12];
    for (m, v) in s.iter_mut().enumerate() {
        *v = 1.0 + 0.5 * (2.0 * std::f64::consts::PI * m as f64 / 12.0).cos();
    }
    s
}

/// Levels `a * log(price level)` for a seasonal price level around 5.
pub fn seasonal_theta(a: f64) -> [f64; 12] {
    let mut t = [0.0; 12];
    for (m, v) in t.iter_mut().enumerate() {
        *v = a * (5.0 + 0.8 * (2.0 * std::f64::consts::PI * (m as f64 - 1.0) / 12.0).sin()).ln();
    }
    t
}
