//! Deterministic inputs of the simulators: monthly parameter curves, the
//! initial forward curve, and closed-form variance integrals.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mrcal::VolEstimate;
use crate::timeseries::{year_fraction_unchecked, Granularity, Observation, PriceSeries};

/// A parameter that is constant within each calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthlyCurve(pub [f64; 12]);

impl MonthlyCurve {
    pub fn flat(v: f64) -> Self {
        MonthlyCurve([v; 12])
    }

    pub fn from_fn(f: impl Fn(u32) -> f64) -> Self {
        MonthlyCurve(std::array::from_fn(|i| f(i as u32 + 1)))
    }

    /// Expands a bucketed volatility term structure to calendar months.
    pub fn from_buckets(values: &BTreeMap<u32, VolEstimate>, g: Granularity) -> Result<Self> {
        let mut out = [0.0; 12];
        for m in 1..=12 {
            let b = g.bucket(m);
            out[m as usize - 1] = values
                .get(&b)
                .ok_or_else(|| Error::MissingBucket(format!("volatility {}", g.label(b))))?
                .sigma;
        }
        Ok(MonthlyCurve(out))
    }

    pub fn at(&self, month: u32) -> f64 {
        self.0[month as usize - 1]
    }
}

/// First instant of the month following `t`.
pub(crate) fn next_month_start(t: NaiveDateTime) -> NaiveDateTime {
    let (y, m) = if t.month() == 12 {
        (t.year() + 1, 1)
    } else {
        (t.year(), t.month() + 1)
    };
    NaiveDate::from_ymd_opt(y, m, 1)
        .expect("valid month start")
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
}

/// Splits `[t0, t1]` at calendar-month boundaries: `(start, end, month)`.
pub(crate) fn month_pieces(
    t0: NaiveDateTime,
    t1: NaiveDateTime,
) -> Vec<(NaiveDateTime, NaiveDateTime, u32)> {
    let mut out = Vec::new();
    let mut s = t0;
    while s < t1 {
        let e = next_month_start(s).min(t1);
        out.push((s, e, s.month()));
        s = e;
    }
    out
}

/// `∫_{w0}^{w1} e^{-c w} dw`, stable as `c → 0`.
pub(crate) fn decay_integral(c: f64, w0: f64, w1: f64) -> f64 {
    let len = w1 - w0;
    let x = c * len;
    if x.abs() < 1e-10 {
        return (-c * w0).exp() * len * (1.0 - 0.5 * x);
    }
    (-c * w0).exp() * -(-x).exp_m1() / c
}

/// `∫_{t0}^{t1} e^{-2a(t1-u)} σ_u² du` for `σ` constant per calendar month.
pub fn v_squared(
    a: f64,
    sigma: &MonthlyCurve,
    t0: NaiveDateTime,
    t1: NaiveDateTime,
) -> Result<f64> {
    if t1 <= t0 {
        return Err(invalid(format!(
            "v_squared needs t0 < t1, got {t0} and {t1}"
        )));
    }
    if !(a >= 0.0) {
        return Err(invalid(format!("v_squared needs a >= 0, got {a}")));
    }
    Ok(month_pieces(t0, t1)
        .into_iter()
        .map(|(s, e, m)| {
            let w0 = year_fraction_unchecked(e, t1);
            let w1 = year_fraction_unchecked(s, t1);
            sigma.at(m).powi(2) * decay_integral(2.0 * a, w0, w1)
        })
        .sum())
}

/// Parameters of the risk-neutral spot-prompt model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpCurves {
    pub a: f64,
    pub sigma_s: MonthlyCurve,
    pub sigma_i: MonthlyCurve,
    pub rho: MonthlyCurve,
    /// Forward mean-reversion rate (Samuelson damping).
    pub b: f64,
}

impl SpCurves {
    /// Instantaneous quotient variance `σ_S² + σ_I² - 2 σ_S σ_I ρ`.
    pub fn quotient_var(&self, month: u32) -> f64 {
        let (s, i, r) = (
            self.sigma_s.at(month),
            self.sigma_i.at(month),
            self.rho.at(month),
        );
        s * s + i * i - 2.0 * s * i * r
    }

    /// `V(s, t) = ∫_s^t σ²(u) du` of the quotient.
    pub fn quotient_variance(&self, s: NaiveDateTime, t: NaiveDateTime) -> f64 {
        month_pieces(s, t)
            .into_iter()
            .map(|(p, q, m)| self.quotient_var(m) * year_fraction_unchecked(p, q))
            .sum()
    }
}

/// No-arbitrage level `½ V(T_i, t) - σ_S²(t) / (2a)` for `T_i ≤ t < T_{i+1}`.
pub fn sp_theta(
    p: &SpCurves,
    t_i: NaiveDateTime,
    t_next: NaiveDateTime,
    t: NaiveDateTime,
) -> Result<f64> {
    if !(t_i <= t && t < t_next) {
        return Err(invalid(format!(
            "{t} lies outside the roll window [{t_i}, {t_next})"
        )));
    }
    if !(p.a > 0.0) {
        return Err(invalid(format!("sp_theta needs a > 0, got {}", p.a)));
    }
    let v = if t > t_i {
        p.quotient_variance(t_i, t)
    } else {
        0.0
    };
    Ok(0.5 * v - p.sigma_s.at(t.month()).powi(2) / (2.0 * p.a))
}

/// Conditional mean and variance of `log S_t` given time `s`, evaluated
/// literally from the closed-form expressions of the spot-prompt write-up.
///
/// Kept for comparison only: these moments do not reproduce
/// `E_{T_i}[S_t] = I_{T_i^-}`; the simulator uses its own exact scheme.
pub fn sp_log_moments_as_printed(
    p: &SpCurves,
    t_i: NaiveDateTime,
    s: NaiveDateTime,
    t: NaiveDateTime,
    log_s: f64,
    log_i: f64,
) -> (f64, f64) {
    let dt = year_fraction_unchecked(s, t);
    let decay = (-p.a * dt).exp();
    let pieces = month_pieces(s, t);
    let int_si2: f64 = pieces
        .iter()
        .map(|&(p0, p1, m)| p.sigma_i.at(m).powi(2) * year_fraction_unchecked(p0, p1))
        .sum();
    let int_cross: f64 = pieces
        .iter()
        .map(|&(p0, p1, m)| {
            let (ss, si, r) = (p.sigma_s.at(m), p.sigma_i.at(m), p.rho.at(m));
            (si * si - si * ss * r) * year_fraction_unchecked(p0, p1)
        })
        .sum();
    let v_st = p.quotient_variance(s, t);
    let var = int_si2 - 2.0 * decay * int_cross + v_st;
    let v_it = p.quotient_variance(t_i, t);
    let v_is = if s > t_i {
        p.quotient_variance(t_i, s)
    } else {
        0.0
    };
    let mean = decay * log_s + (1.0 - decay) * log_i - 0.5 * v_it + 0.5 * decay * v_is + 0.5 * v_st
        - 0.5 * var;
    (mean, var)
}

/// Initial forward curve: contract expiring at `T_i` priced `F(0, T_i)`.
///
/// As a function of time the curve is a right-continuous step: the knot at
/// `T_i` applies on `[T_i, T_{i+1})` and the last knot indefinitely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardCurve {
    knots: Vec<(NaiveDateTime, f64)>,
}

impl ForwardCurve {
    pub fn new(mut knots: Vec<(NaiveDateTime, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(invalid("forward curve has no knots"));
        }
        knots.sort_by_key(|k| k.0);
        for w in knots.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateTimestamp(w[0].0));
            }
        }
        if let Some(k) = knots.iter().find(|k| !(k.1 > 0.0) || !k.1.is_finite()) {
            return Err(invalid(format!(
                "forward price {} at {} is not positive",
                k.1, k.0
            )));
        }
        Ok(ForwardCurve { knots })
    }

    pub fn flat(start: NaiveDateTime, price: f64) -> Result<Self> {
        Self::new(vec![(start, price)])
    }

    pub fn from_series(series: &PriceSeries) -> Result<Self> {
        Self::new(
            series
                .observations()
                .iter()
                .map(|o: &Observation| (o.timestamp, o.value))
                .collect(),
        )
    }

    pub fn knots(&self) -> &[(NaiveDateTime, f64)] {
        &self.knots
    }

    /// Index of the knot whose window contains `t`.
    pub fn window(&self, t: NaiveDateTime) -> Result<usize> {
        if t < self.knots[0].0 {
            return Err(invalid(format!(
                "{t} precedes the forward curve start {}",
                self.knots[0].0
            )));
        }
        Ok(self.knots.partition_point(|k| k.0 <= t) - 1)
    }

    pub fn value_at(&self, t: NaiveDateTime) -> Result<f64> {
        Ok(self.knots[self.window(t)?].1)
    }

    /// Replaces the knot dates with `dates`, keeping prices in order.
    pub fn with_dates(&self, dates: &[NaiveDateTime]) -> Result<Self> {
        if dates.len() != self.knots.len() {
            return Err(invalid(format!(
                "{} roll dates for {} forward prices",
                dates.len(),
                self.knots.len()
            )));
        }
        Self::new(
            dates
                .iter()
                .zip(&self.knots)
                .map(|(d, k)| (*d, k.1))
                .collect(),
        )
    }
}

/// `F(t, T)` implied by the spot `S_t` of the one-factor model.
pub fn forward_curve_evolve(
    curve: &ForwardCurve,
    s_t: f64,
    t0: NaiveDateTime,
    t: NaiveDateTime,
    expiry: NaiveDateTime,
    a: f64,
    sigma: &MonthlyCurve,
) -> Result<f64> {
    if !(t0 <= t && t <= expiry) {
        return Err(invalid(format!("need {t0} <= {t} <= {expiry}")));
    }
    let f0t = curve.value_at(t)?;
    let f0_expiry = curve.value_at(expiry)?;
    if !(f0t > 0.0) {
        return Err(invalid(format!("F(0, {t}) = {f0t} is not positive")));
    }
    let v2 = if t > t0 {
        v_squared(a, sigma, t0, t)?
    } else {
        0.0
    };
    let e = (-a * year_fraction_unchecked(t, expiry)).exp();
    Ok(f0_expiry * (0.5 * (1.0 - e) * e * v2).exp() * (s_t / f0t).powf(e))
}

/// Roll dates: for each month, the last calendar day minus `k` weekdays.
pub fn generate_roll_dates(start: NaiveDate, end: NaiveDate, k: u32) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut first = NaiveDate::from_ymd_opt(start.year(), start.month(), 1).expect("month start");
    while first <= end {
        let next = next_month_start(first.and_hms_opt(0, 0, 0).expect("midnight")).date();
        let mut d = next - Duration::days(1);
        let mut left = k;
        while left > 0 {
            d -= Duration::days(1);
            if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                left -= 1;
            }
        }
        while matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            d -= Duration::days(1);
        }
        if d >= start && d <= end {
            out.push(d);
        }
        first = next;
    }
    out
}
