//! One-factor mean-reversion calibration by profile maximum likelihood.
//!
//! `X = log S` (lognormal) or `X = S` (normal) follows
//! `dX = (θ_t - a X) dt + σ_t dW`, sampled at irregular times. Given `a`, the
//! level and volatility term structures have closed-form maximizers, so the
//! likelihood is maximized over `a` alone.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optimize::brent_max;
use crate::stats::{mr_ci, vol_ci, FitReport, Interval};
use crate::timeseries::{
    daycount, to_steps, Granularity, LevelGranularity, LevelKey, PriceSeries, StepPair, StepSeries,
    Transform,
};

/// Below this value of `a * dt` the coefficients use their Taylor expansions.
const TAYLOR_SWITCH: f64 = 1e-8;
/// Months with fewer pairs than this are flagged in diagnostics.
pub const LOW_COUNT: usize = 4;
const SEED_FALLBACK_RATE: f64 = 1.0;
const SCAN_POINTS: usize = 41;
const MAX_WIDENINGS: usize = 3;

/// Exact discretization coefficients of the OU transition over one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefs {
    pub eta: f64,
    pub kappa: f64,
    pub gamma: f64,
}

pub fn coefs(a: f64, dt: f64) -> Result<Coefs> {
    if !(dt > 0.0) {
        return Err(invalid(format!("coefs: dt must be positive, got {dt}")));
    }
    if !(a >= 0.0) {
        return Err(invalid(format!("coefs: a must be non-negative, got {a}")));
    }
    Ok(coefs_unchecked(a, dt))
}

pub(crate) fn coefs_unchecked(a: f64, dt: f64) -> Coefs {
    let x = a * dt;
    if x < TAYLOR_SWITCH {
        return Coefs {
            eta: 1.0 - x + 0.5 * x * x,
            kappa: dt * (1.0 - 0.5 * x + x * x / 6.0),
            gamma: (dt * (1.0 - x + 2.0 * x * x / 3.0)).sqrt(),
        };
    }
    Coefs {
        eta: (-x).exp(),
        kappa: -(-x).exp_m1() / a,
        gamma: (-(-2.0 * x).exp_m1() / (2.0 * a)).sqrt(),
    }
}

/// Granularities of the level and volatility term structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Buckets {
    pub level: LevelGranularity,
    pub vol: Granularity,
}

impl Default for Buckets {
    fn default() -> Self {
        Buckets {
            level: LevelGranularity::MonthYear,
            vol: Granularity::Monthly,
        }
    }
}

/// Bucket membership of every pair, with each bucket's members listed in a
/// canonical order so that sums do not depend on the order of the input.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub level_keys: Vec<LevelKey>,
    pub vol_keys: Vec<u32>,
    pub level_of: Vec<usize>,
    pub level_members: Vec<Vec<usize>>,
    pub vol_members: Vec<Vec<usize>>,
}

impl Layout {
    pub fn new(pairs: &[StepPair], buckets: Buckets) -> Self {
        let mut levels: BTreeMap<LevelKey, Vec<usize>> = BTreeMap::new();
        let mut vols: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, p) in pairs.iter().enumerate() {
            levels.entry(buckets.level.key_of(p)).or_default().push(i);
            vols.entry(buckets.vol.bucket(p.month)).or_default().push(i);
        }
        let canonical = |v: &mut Vec<usize>| {
            v.sort_by(|&i, &j| {
                let (p, q) = (&pairs[i], &pairs[j]);
                p.x_prev
                    .total_cmp(&q.x_prev)
                    .then(p.x_next.total_cmp(&q.x_next))
                    .then(p.dt.total_cmp(&q.dt))
            })
        };
        let mut level_of = vec![0; pairs.len()];
        let mut level_keys = Vec::with_capacity(levels.len());
        let mut level_members = Vec::with_capacity(levels.len());
        for (b, (key, mut members)) in levels.into_iter().enumerate() {
            canonical(&mut members);
            for &i in &members {
                level_of[i] = b;
            }
            level_keys.push(key);
            level_members.push(members);
        }
        let mut vol_keys = Vec::with_capacity(vols.len());
        let mut vol_members = Vec::with_capacity(vols.len());
        for (key, mut members) in vols {
            canonical(&mut members);
            vol_keys.push(key);
            vol_members.push(members);
        }
        Layout {
            level_keys,
            vol_keys,
            level_of,
            level_members,
            vol_members,
        }
    }
}

/// Profile likelihood machinery bound to one step series.
pub(crate) struct Profile<'s> {
    pairs: &'s [StepPair],
    layout: Layout,
}

struct Evaluated {
    coefs: Vec<Coefs>,
    theta: Vec<f64>,
}

impl<'s> Profile<'s> {
    pub fn new(steps: &'s StepSeries, buckets: Buckets) -> Self {
        Profile {
            pairs: &steps.pairs,
            layout: Layout::new(&steps.pairs, buckets),
        }
    }

    fn evaluate(&self, a: f64) -> Evaluated {
        let coefs: Vec<Coefs> = self
            .pairs
            .iter()
            .map(|p| coefs_unchecked(a, p.dt))
            .collect();
        let theta = self
            .layout
            .level_members
            .iter()
            .map(|members| {
                let (mut num, mut den) = (0.0, 0.0);
                for &i in members {
                    let (p, c) = (&self.pairs[i], &coefs[i]);
                    num += p.x_next - c.eta * p.x_prev;
                    den += c.kappa;
                }
                num / den
            })
            .collect();
        Evaluated { coefs, theta }
    }

    fn innovation(&self, ev: &Evaluated, i: usize) -> f64 {
        let (p, c) = (&self.pairs[i], &ev.coefs[i]);
        (p.x_next - c.eta * p.x_prev - ev.theta[self.layout.level_of[i]] * c.kappa) / c.gamma
    }

    /// Sum of squared standardized innovations per volatility bucket.
    fn sse(&self, ev: &Evaluated) -> Vec<f64> {
        self.layout
            .vol_members
            .iter()
            .map(|members| {
                members
                    .iter()
                    .map(|&i| self.innovation(ev, i).powi(2))
                    .sum()
            })
            .collect()
    }

    /// Profile log-likelihood with the maximum-likelihood (biased) variance.
    pub fn loglik(&self, a: f64) -> f64 {
        let ev = self.evaluate(a);
        let sse = self.sse(&ev);
        let mut total = 0.0;
        for (members, s) in self.layout.vol_members.iter().zip(&sse) {
            let n = members.len() as f64;
            let var = s / n;
            if !(var > 0.0) {
                return f64::NEG_INFINITY;
            }
            let log_gamma: f64 = members.iter().map(|&i| ev.coefs[i].gamma.ln()).sum();
            total -= n * 0.5 * ((2.0 * PI).ln() + var.ln() + 1.0) + log_gamma;
        }
        total
    }

    fn theta_map(&self, ev: &Evaluated) -> BTreeMap<LevelKey, f64> {
        self.layout
            .level_keys
            .iter()
            .copied()
            .zip(ev.theta.iter().copied())
            .collect()
    }

    fn level_counts(&self) -> BTreeMap<LevelKey, usize> {
        self.layout
            .level_keys
            .iter()
            .zip(&self.layout.level_members)
            .map(|(k, m)| (*k, m.len()))
            .collect()
    }
}

/// Maximum-likelihood level term structure for a given rate `a`.
pub fn theta_hat(
    steps: &StepSeries,
    a: f64,
    level: LevelGranularity,
) -> Result<BTreeMap<LevelKey, f64>> {
    check_rate(a)?;
    let profile = Profile::new(
        steps,
        Buckets {
            level,
            vol: Granularity::Flat,
        },
    );
    Ok(profile.theta_map(&profile.evaluate(a)))
}

/// Volatility term structure for rate `a` and level term structure `theta`.
///
/// Buckets with no more pairs than the bias correction (`unbiased` uses
/// `N - 1`) are omitted.
pub fn sigma_hat(
    steps: &StepSeries,
    a: f64,
    theta: &BTreeMap<LevelKey, f64>,
    buckets: Buckets,
    unbiased: bool,
) -> Result<BTreeMap<u32, f64>> {
    check_rate(a)?;
    let layout = Layout::new(&steps.pairs, buckets);
    let u = usize::from(unbiased);
    let mut out = BTreeMap::new();
    for (key, members) in layout.vol_keys.iter().zip(&layout.vol_members) {
        if members.len() <= u {
            continue;
        }
        let mut sse = 0.0;
        for &i in members {
            let p = &steps.pairs[i];
            let level_key = buckets.level.key_of(p);
            let th = *theta
                .get(&level_key)
                .ok_or_else(|| Error::MissingBucket(level_key.to_string()))?;
            let c = coefs_unchecked(a, p.dt);
            sse += ((p.x_next - c.eta * p.x_prev - th * c.kappa) / c.gamma).powi(2);
        }
        out.insert(*key, (sse / (members.len() - u) as f64).sqrt());
    }
    Ok(out)
}

/// Profile log-likelihood `L(a)`, including the `-½ log 2π` constants.
pub fn profile_loglik(steps: &StepSeries, a: f64, buckets: Buckets) -> Result<f64> {
    check_rate(a)?;
    Ok(Profile::new(steps, buckets).loglik(a))
}

fn check_rate(a: f64) -> Result<()> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(invalid(format!(
            "mean-reversion rate must be finite and >= 0, got {a}"
        )));
    }
    Ok(())
}

/// Constant-step regression estimate used to seed the likelihood search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub a0: f64,
    /// `None` when the regression failed and `a0` is the fallback value.
    pub a0_stderr: Option<f64>,
    pub kappa_hat: f64,
    pub kappa_stderr: f64,
    pub daycount: f64,
    pub fallback: bool,
}

/// Regresses demeaned `X_k` on demeaned `X_{k-1}` and annualizes the
/// per-step rate with the daycount `c`.
pub fn regression_seed(steps: &StepSeries, c: f64) -> Result<Seed> {
    let n = steps.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if !(c > 0.0) {
        return Err(invalid(format!("daycount must be positive, got {c}")));
    }
    let mut means: BTreeMap<(u32, i32), (f64, f64, usize)> = BTreeMap::new();
    for p in &steps.pairs {
        let e = means.entry(p.bucket_my()).or_insert((0.0, 0.0, 0));
        e.0 += p.x_prev;
        e.1 += p.x_next;
        e.2 += 1;
    }
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for p in &steps.pairs {
        let (mx, my, k) = means[&p.bucket_my()];
        let x = p.x_prev - mx / k as f64;
        let y = p.x_next - my / k as f64;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let nf = n as f64;
    let delta = nf * sxx - sx * sx;
    if !(delta > 0.0) {
        return Err(Error::Degenerate("zero variance".into()));
    }
    let kappa_hat = (nf * sxy - sx * sy) / delta;
    let kappa_stderr = (sxx / delta).sqrt();
    if !(kappa_hat > 0.0 && kappa_hat < 1.0) {
        return Ok(Seed {
            a0: SEED_FALLBACK_RATE,
            a0_stderr: None,
            kappa_hat,
            kappa_stderr,
            daycount: c,
            fallback: true,
        });
    }
    Ok(Seed {
        a0: -kappa_hat.ln() * c,
        a0_stderr: Some(kappa_stderr / kappa_hat * c),
        kappa_hat,
        kappa_stderr,
        daycount: c,
        fallback: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrOptions {
    pub buckets: Buckets,
    /// Use the `N - 1` variance normalization for reported volatilities.
    pub unbiased: bool,
    pub alpha: f64,
}

impl Default for MrOptions {
    fn default() -> Self {
        MrOptions {
            buckets: Buckets::default(),
            unbiased: true,
            alpha: 0.05,
        }
    }
}

/// A volatility bucket estimate with its pair count and confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolEstimate {
    pub sigma: f64,
    pub n: usize,
    pub ci: Option<Interval>,
    pub low_count: bool,
}

fn vol_estimates(
    sigma: BTreeMap<u32, f64>,
    counts: &BTreeMap<u32, usize>,
    alpha: f64,
) -> BTreeMap<u32, VolEstimate> {
    sigma
        .into_iter()
        .map(|(k, s)| {
            let n = counts[&k];
            let est = VolEstimate {
                sigma: s,
                n,
                ci: vol_ci(s, n, alpha).ok(),
                low_count: n < LOW_COUNT,
            };
            (k, est)
        })
        .collect()
}

fn vol_counts(steps: &StepSeries, vol: Granularity) -> BTreeMap<u32, usize> {
    let mut out = BTreeMap::new();
    for p in &steps.pairs {
        *out.entry(vol.bucket(p.month)).or_insert(0) += 1;
    }
    out
}

/// Calibrated one-factor model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MRParams {
    pub a: f64,
    pub a_stderr: Option<f64>,
    pub transform: Transform,
    pub buckets: Buckets,
    pub theta: BTreeMap<LevelKey, f64>,
    pub level_counts: BTreeMap<LevelKey, usize>,
    #[serde(with = "crate::serde_keys")]
    pub sigma: BTreeMap<u32, VolEstimate>,
}

fn calendar_levels(v: f64) -> BTreeMap<LevelKey, f64> {
    (1..=12)
        .map(|m| {
            (
                LevelKey {
                    year: None,
                    month: m,
                },
                v,
            )
        })
        .collect()
}

fn flat_vol(sigma: f64) -> BTreeMap<u32, VolEstimate> {
    BTreeMap::from([(
        0,
        VolEstimate {
            sigma,
            n: 0,
            ci: None,
            low_count: false,
        },
    )])
}

const CONSTANT_BUCKETS: Buckets = Buckets {
    level: LevelGranularity::CalendarMonth,
    vol: Granularity::Flat,
};

impl MRParams {
    /// Time-homogeneous parameters: one level for every calendar month and a
    /// flat volatility.
    pub fn constant(a: f64, theta: f64, sigma: f64, transform: Transform) -> Self {
        MRParams {
            a,
            a_stderr: None,
            transform,
            buckets: CONSTANT_BUCKETS,
            theta: calendar_levels(theta),
            level_counts: BTreeMap::new(),
            sigma: flat_vol(sigma),
        }
    }

    pub fn theta_at(&self, month: u32, year: i32) -> Result<f64> {
        let key = self.buckets.level.key(month, year);
        self.theta
            .get(&key)
            .copied()
            .ok_or_else(|| Error::MissingBucket(format!("level {key}")))
    }

    pub fn sigma_at(&self, month: u32) -> Result<f64> {
        let b = self.buckets.vol.bucket(month);
        self.sigma.get(&b).map(|v| v.sigma).ok_or_else(|| {
            Error::MissingBucket(format!("volatility {}", self.buckets.vol.label(b)))
        })
    }
}

/// Standardized residual of one transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorPoint {
    /// Start of the transition.
    pub timestamp: NaiveDateTime,
    pub value: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSeries {
    pub label: String,
    pub points: Vec<FactorPoint>,
}

impl FactorSeries {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrDiagnostics {
    pub seed: Seed,
    pub bracket: (f64, f64),
    pub widenings: usize,
    pub loglik: f64,
    pub evaluations: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrCalibration {
    pub params: MRParams,
    pub factors: FactorSeries,
    /// `None` when the residual series is too short for the fit statistics.
    pub fit: Option<FitReport>,
    pub diagnostics: MrDiagnostics,
}

pub fn calibrate(
    series: &PriceSeries,
    transform: Transform,
    opts: &MrOptions,
) -> Result<MrCalibration> {
    let steps = to_steps(series, transform)?;
    calibrate_steps(&steps, daycount(series)?, opts)
}

/// Calibrates from an already built step series with daycount `c`.
pub fn calibrate_steps(steps: &StepSeries, c: f64, opts: &MrOptions) -> Result<MrCalibration> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(invalid(format!(
            "alpha must lie in (0, 1), got {}",
            opts.alpha
        )));
    }
    let first = steps
        .pairs
        .first()
        .ok_or(Error::InsufficientData { needed: 3, got: 0 })?;
    if steps.pairs.iter().all(|p| p.x_next == first.x_prev) {
        return Err(Error::Degenerate("zero variance".into()));
    }
    let seed = regression_seed(steps, c)?;
    let mut warnings = Vec::new();
    if seed.fallback {
        warnings.push(format!(
            "regression seed failed (kappa = {:.6}); searching from a0 = {SEED_FALLBACK_RATE}",
            seed.kappa_hat
        ));
    }
    let months: std::collections::BTreeSet<_> = steps.pairs.iter().map(|p| p.bucket_my()).collect();
    if months.len() < 2 {
        warnings.push("fewer than two months of data".into());
    }

    let profile = Profile::new(steps, opts.buckets);
    let bracket = if seed.fallback {
        (1e-6, 500.0)
    } else {
        ((seed.a0 / 10.0).max(1e-6), seed.a0 * 10.0)
    };
    let found = maximize(|a| profile.loglik(a), bracket)?;

    let ev = profile.evaluate(found.a);
    let theta = profile.theta_map(&ev);
    let sigma = sigma_hat(steps, found.a, &theta, opts.buckets, opts.unbiased)?;
    let counts = vol_counts(steps, opts.buckets.vol);
    for (k, n) in &counts {
        if !sigma.contains_key(k) {
            warnings.push(format!(
                "volatility bucket {} has {n} pair(s); not estimated",
                opts.buckets.vol.label(*k)
            ));
        } else if *n < LOW_COUNT {
            warnings.push(format!(
                "volatility bucket {} has only {n} pairs",
                opts.buckets.vol.label(*k)
            ));
        }
    }
    let a_stderr = match seed.a0_stderr {
        Some(se) => Some(mr_ci(found.a, seed.a0, se)?),
        None => None,
    };
    let params = MRParams {
        a: found.a,
        a_stderr,
        transform: steps.transform,
        buckets: opts.buckets,
        theta,
        level_counts: profile.level_counts(),
        sigma: vol_estimates(sigma, &counts, opts.alpha),
    };
    let factors = residuals(steps, &params)?;
    let fit = FitReport::compute(&factors.values()).ok();
    if fit.is_none() {
        warnings.push("too few residuals for fit statistics".into());
    }
    Ok(MrCalibration {
        params,
        factors,
        fit,
        diagnostics: MrDiagnostics {
            seed,
            bracket: found.bracket,
            widenings: found.widenings,
            loglik: found.loglik,
            evaluations: found.evaluations,
            warnings,
        },
    })
}

#[derive(Debug)]
struct Maximum {
    a: f64,
    loglik: f64,
    bracket: (f64, f64),
    widenings: usize,
    evaluations: usize,
}

/// Log-spaced scan of the bracket followed by Brent refinement around the
/// best scan point; widens the bracket when the maximum sits on an edge.
fn maximize(f: impl Fn(f64) -> f64, (mut lo, mut hi): (f64, f64)) -> Result<Maximum> {
    let mut evaluations = 0;
    for widenings in 0..=MAX_WIDENINGS {
        let ratio = (hi / lo).ln();
        let grid: Vec<f64> = (0..SCAN_POINTS)
            .map(|i| lo * (ratio * i as f64 / (SCAN_POINTS - 1) as f64).exp())
            .collect();
        let values: Vec<f64> = grid.iter().map(|&a| f(a)).collect();
        evaluations += SCAN_POINTS;
        let (mut best, mut best_val) = (0, f64::NEG_INFINITY);
        for (i, &v) in values.iter().enumerate() {
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        if best_val == f64::NEG_INFINITY {
            return Err(Error::Degenerate(
                "likelihood is -inf across the search bracket".into(),
            ));
        }
        let last = SCAN_POINTS - 1;
        let left = grid[best.saturating_sub(1)];
        let right = grid[(best + 1).min(last)];
        let r = brent_max(&f, left, right, grid[best], 1e-10);
        evaluations += r.evals;
        let (a, loglik) = if r.fx >= best_val {
            (r.x, r.fx)
        } else {
            (grid[best], best_val)
        };

        let at_lower = best == 0 && a <= lo * (1.0 + 1e-6);
        let at_upper = best == last && a >= hi * (1.0 - 1e-6);
        if !at_lower && !at_upper {
            return Ok(Maximum {
                a,
                loglik,
                bracket: (lo, hi),
                widenings,
                evaluations,
            });
        }
        if widenings == MAX_WIDENINGS {
            return Err(Error::BracketExhausted { best_a: a });
        }
        if at_upper {
            hi *= 10.0;
        } else {
            lo /= 10.0;
        }
    }
    unreachable!()
}

/// Standardized innovations of `steps` under `params`.
pub fn residuals(steps: &StepSeries, params: &MRParams) -> Result<FactorSeries> {
    let points = steps
        .pairs
        .iter()
        .map(|p| {
            let th = params.theta_at(p.month, p.year)?;
            let s = params.sigma_at(p.month)?;
            let c = coefs_unchecked(params.a, p.dt);
            Ok(FactorPoint {
                timestamp: p.start,
                value: (p.x_next - c.eta * p.x_prev - th * c.kappa) / (s * c.gamma),
                dt: p.dt,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FactorSeries {
        label: steps.label.clone(),
        points,
    })
}

/// Zero-rate (Black-Scholes) limit: drift and volatility term structures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsParams {
    pub transform: Transform,
    pub buckets: Buckets,
    pub mu: BTreeMap<LevelKey, f64>,
    pub level_counts: BTreeMap<LevelKey, usize>,
    #[serde(with = "crate::serde_keys")]
    pub sigma: BTreeMap<u32, VolEstimate>,
}

impl BsParams {
    pub fn constant(mu: f64, sigma: f64, transform: Transform) -> Self {
        BsParams {
            transform,
            buckets: CONSTANT_BUCKETS,
            mu: calendar_levels(mu),
            level_counts: BTreeMap::new(),
            sigma: flat_vol(sigma),
        }
    }

    pub fn mu_at(&self, month: u32, year: i32) -> Result<f64> {
        let key = self.buckets.level.key(month, year);
        self.mu
            .get(&key)
            .copied()
            .ok_or_else(|| Error::MissingBucket(format!("drift {key}")))
    }

    pub fn sigma_at(&self, month: u32) -> Result<f64> {
        let b = self.buckets.vol.bucket(month);
        self.sigma.get(&b).map(|v| v.sigma).ok_or_else(|| {
            Error::MissingBucket(format!("volatility {}", self.buckets.vol.label(b)))
        })
    }
}

pub fn bs_calibrate(steps: &StepSeries, opts: &MrOptions) -> Result<BsParams> {
    if steps.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let layout = Layout::new(&steps.pairs, opts.buckets);
    let pairs = &steps.pairs;
    let mu: Vec<f64> = layout
        .level_members
        .iter()
        .map(|members| {
            let (mut num, mut den) = (0.0, 0.0);
            for &i in members {
                num += pairs[i].x_next - pairs[i].x_prev;
                den += pairs[i].dt;
            }
            num / den
        })
        .collect();
    let u = usize::from(opts.unbiased);
    let mut sigma = BTreeMap::new();
    for (key, members) in layout.vol_keys.iter().zip(&layout.vol_members) {
        if members.len() <= u {
            continue;
        }
        let sse: f64 = members
            .iter()
            .map(|&i| {
                let p = &pairs[i];
                (p.x_next - p.x_prev - mu[layout.level_of[i]] * p.dt).powi(2) / p.dt
            })
            .sum();
        sigma.insert(*key, (sse / (members.len() - u) as f64).sqrt());
    }
    let counts = vol_counts(steps, opts.buckets.vol);
    Ok(BsParams {
        transform: steps.transform,
        buckets: opts.buckets,
        mu: layout.level_keys.iter().copied().zip(mu).collect(),
        level_counts: layout
            .level_keys
            .iter()
            .zip(&layout.level_members)
            .map(|(k, m)| (*k, m.len()))
            .collect(),
        sigma: vol_estimates(sigma, &counts, opts.alpha),
    })
}

/// Standardized innovations `(ΔX - μ dt) / (σ √dt)` of the zero-rate model.
pub fn bs_residuals(steps: &StepSeries, params: &BsParams) -> Result<FactorSeries> {
    let points = steps
        .pairs
        .iter()
        .map(|p| {
            let mu = params.mu_at(p.month, p.year)?;
            let s = params.sigma_at(p.month)?;
            Ok(FactorPoint {
                timestamp: p.start,
                value: (p.x_next - p.x_prev - mu * p.dt) / (s * p.dt.sqrt()),
                dt: p.dt,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FactorSeries {
        label: steps.label.clone(),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsCalibration {
    pub params: BsParams,
    pub factors: FactorSeries,
    pub fit: Option<FitReport>,
}

pub fn calibrate_bs(
    series: &PriceSeries,
    transform: Transform,
    opts: &MrOptions,
) -> Result<BsCalibration> {
    let steps = to_steps(series, transform)?;
    let params = bs_calibrate(&steps, opts)?;
    let factors = bs_residuals(&steps, &params)?;
    let fit = FitReport::compute(&factors.values()).ok();
    Ok(BsCalibration {
        params,
        factors,
        fit,
    })
}
