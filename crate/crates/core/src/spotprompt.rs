//! Two-factor spot-prompt calibration.
//!
//! The quotient `X = log(S/I)` is a one-factor mean-reverting process and the
//! index `Y = log I` a drifted Brownian motion, so the rate and quotient
//! volatility come from [`crate::mrcal`] and the index parameters from its
//! zero-rate limit. Spot volatility and spot-index correlation are recovered
//! from the covariance of the two innovation series.

use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mrcal::{
    bs_calibrate, bs_residuals, calibrate_steps, coefs_unchecked, BsParams, FactorPoint,
    FactorSeries, MRParams, MrCalibration, MrOptions, VolEstimate, LOW_COUNT,
};
use crate::stats::{corr_ci, vol_ci, FitReport, Interval};
use crate::timeseries::{
    daycount, to_steps, Granularity, LevelKey, Observation, PriceSeries, StepSeries, Transform,
};

/// Correlation between the quotient's index noise `ν` and the index noise
/// `ξ` over one step: `κ / (γ √dt)`.
pub fn rho_nu_xi(a: f64, dt: f64) -> f64 {
    let half = 0.5 * a * dt;
    if half < 1e-8 {
        return 1.0;
    }
    (half.tanh() / half).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpOptions {
    pub mr: MrOptions,
    /// Granularity of the spot-index correlation; must be at least as coarse
    /// as the volatility granularity.
    pub rho: Granularity,
    /// Roll dates. A transition whose interval `(t_{k-1}, t_k]` contains one
    /// is dropped from both the quotient and the index series.
    pub exclude_rolls: Vec<NaiveDateTime>,
}

impl Default for SpOptions {
    fn default() -> Self {
        SpOptions {
            mr: MrOptions::default(),
            rho: Granularity::Flat,
            exclude_rolls: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub rho: f64,
    pub n: usize,
    pub ci: Option<Interval>,
}

/// Calibrated spot-prompt model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SPParams {
    pub a: f64,
    pub a_stderr: Option<f64>,
    pub vol_granularity: Granularity,
    pub rho_granularity: Granularity,
    pub quotient: MRParams,
    pub index: BsParams,
    #[serde(with = "crate::serde_keys")]
    pub sigma_s: BTreeMap<u32, VolEstimate>,
    #[serde(with = "crate::serde_keys")]
    pub rho: BTreeMap<u32, RhoEstimate>,
    /// Raw per-volatility-bucket estimates of `σ_S ρ`.
    #[serde(with = "crate::serde_keys")]
    pub sigma_s_rho: BTreeMap<u32, f64>,
    /// Buckets (volatility buckets, or correlation buckets prefixed `rho:`)
    /// whose estimates violate `σ_S² > 0` or `|ρ| ≤ 1`.
    pub invalid: BTreeMap<String, String>,
}

impl SPParams {
    /// Time-homogeneous parameters with flat volatilities and correlation.
    /// `theta_tilde` is the quotient level and `mu` the index log-drift.
    pub fn constant(
        a: f64,
        theta_tilde: f64,
        mu: f64,
        sigma_s: f64,
        sigma_i: f64,
        rho: f64,
    ) -> Self {
        let q = (sigma_s * sigma_s + sigma_i * sigma_i - 2.0 * rho * sigma_s * sigma_i)
            .max(0.0)
            .sqrt();
        let vol = |sigma| VolEstimate {
            sigma,
            n: 0,
            ci: None,
            low_count: false,
        };
        SPParams {
            a,
            a_stderr: None,
            vol_granularity: Granularity::Flat,
            rho_granularity: Granularity::Flat,
            quotient: MRParams::constant(a, theta_tilde, q, Transform::Log),
            index: BsParams::constant(mu, sigma_i, Transform::Log),
            sigma_s: BTreeMap::from([(0, vol(sigma_s))]),
            rho: BTreeMap::from([(
                0,
                RhoEstimate {
                    rho,
                    n: 0,
                    ci: None,
                },
            )]),
            sigma_s_rho: BTreeMap::from([(0, sigma_s * rho)]),
            invalid: BTreeMap::new(),
        }
    }

    pub fn theta_tilde(&self) -> &BTreeMap<LevelKey, f64> {
        &self.quotient.theta
    }

    pub fn mu(&self) -> &BTreeMap<LevelKey, f64> {
        &self.index.mu
    }

    pub fn sigma_s_at(&self, month: u32) -> Result<f64> {
        let b = self.vol_granularity.bucket(month);
        self.sigma_s.get(&b).map(|v| v.sigma).ok_or_else(|| {
            Error::MissingBucket(format!("spot volatility {}", self.vol_granularity.label(b)))
        })
    }

    pub fn rho_at(&self, month: u32) -> Result<f64> {
        let b = self.rho_granularity.bucket(month);
        self.rho.get(&b).map(|r| r.rho).ok_or_else(|| {
            Error::MissingBucket(format!("correlation {}", self.rho_granularity.label(b)))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpCalibration {
    pub params: SPParams,
    pub quotient: MrCalibration,
    pub index_factor: FactorSeries,
    pub index_fit: Option<FitReport>,
    pub spot_factor: FactorSeries,
    pub spot_fit: Option<FitReport>,
    pub warnings: Vec<String>,
}

/// Per-bucket `σ_S ρ` from quotient and index innovations.
///
/// `x_res` and `y_res` must already be on a per-unit-time scale, so that
/// their covariance is `σ_I (σ_S ρ - σ_I)`. Buckets with `σ_I = 0` or fewer
/// than two points are omitted.
pub fn covar_recover(
    x_res: &[f64],
    y_res: &[f64],
    buckets: &[u32],
    sigma_i: &BTreeMap<u32, f64>,
) -> Result<BTreeMap<u32, f64>> {
    if x_res.len() != y_res.len() || x_res.len() != buckets.len() {
        return Err(Error::DimensionMismatch {
            expected: x_res.len(),
            got: y_res.len().min(buckets.len()),
        });
    }
    let mut groups: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for ((&x, &y), &b) in x_res.iter().zip(y_res).zip(buckets) {
        groups.entry(b).or_default().push((x, y));
    }
    let mut out = BTreeMap::new();
    for (b, mut pts) in groups {
        let Some(&si) = sigma_i.get(&b) else { continue };
        if !(si > 0.0) || pts.len() < 2 {
            continue;
        }
        pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let cov = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / (n - 1.0);
        out.insert(b, cov / si + si);
    }
    Ok(out)
}

/// Correlation bucket containing a volatility bucket.
fn rho_bucket(vol: Granularity, rho: Granularity, vol_bucket: u32) -> u32 {
    match (vol, rho) {
        (_, Granularity::Flat) => 0,
        (Granularity::Monthly, g) => g.bucket(vol_bucket),
        _ => vol_bucket,
    }
}

struct Aligned {
    spot: PriceSeries,
    index: PriceSeries,
    quotient: PriceSeries,
}

fn align_prices(spot: &PriceSeries, index: &PriceSeries) -> Result<Aligned> {
    let idx: BTreeMap<NaiveDateTime, f64> = index
        .observations()
        .iter()
        .map(|o| (o.timestamp, o.value))
        .collect();
    let mut s = Vec::new();
    let mut i = Vec::new();
    let mut q = Vec::new();
    for o in spot.observations() {
        if let Some(&iv) = idx.get(&o.timestamp) {
            for (label, v) in [("spot", o.value), ("index", iv)] {
                if !(v > 0.0) {
                    return Err(invalid(format!(
                        "{label} price {v} at {} is not positive",
                        o.timestamp
                    )));
                }
            }
            s.push(Observation {
                timestamp: o.timestamp,
                value: o.value,
            });
            i.push(Observation {
                timestamp: o.timestamp,
                value: iv,
            });
            q.push(Observation {
                timestamp: o.timestamp,
                value: o.value / iv,
            });
        }
    }
    if s.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    if s.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: s.len(),
        });
    }
    Ok(Aligned {
        spot: PriceSeries::new(spot.label.clone(), s)?,
        index: PriceSeries::new(index.label.clone(), i)?,
        quotient: PriceSeries::new(format!("{}/{}", spot.label, index.label), q)?,
    })
}

/// Drops transitions whose interval contains a roll date.
fn drop_rolls(steps: &mut StepSeries, ends: &[NaiveDateTime], rolls: &[NaiveDateTime]) {
    if rolls.is_empty() {
        return;
    }
    let mut k = 0;
    steps.pairs.retain(|p| {
        let end = ends[k];
        k += 1;
        !rolls.iter().any(|&r| p.start < r && r <= end)
    });
}

pub fn calibrate_sp(
    spot: &PriceSeries,
    index: &PriceSeries,
    opts: &SpOptions,
) -> Result<SpCalibration> {
    let vol_g = opts.mr.buckets.vol;
    if opts.rho < vol_g {
        return Err(invalid(format!(
            "correlation granularity {} is finer than volatility granularity {vol_g}",
            opts.rho
        )));
    }
    let aligned = align_prices(spot, index)?;
    let ends: Vec<NaiveDateTime> = aligned.quotient.observations()[1..]
        .iter()
        .map(|o| o.timestamp)
        .collect();
    let mut xs = to_steps(&aligned.quotient, Transform::Log)?;
    let mut ys = to_steps(&aligned.index, Transform::Log)?;
    drop_rolls(&mut xs, &ends, &opts.exclude_rolls);
    drop_rolls(&mut ys, &ends, &opts.exclude_rolls);
    let mut warnings = Vec::new();
    if xs.len() + 1 < aligned.spot.len() {
        warnings.push(format!(
            "{} transition(s) across roll dates excluded",
            aligned.spot.len() - 1 - xs.len()
        ));
    }

    let quotient = calibrate_steps(&xs, daycount(&aligned.quotient)?, &opts.mr)?;
    let index_params = bs_calibrate(&ys, &opts.mr)?;
    let qp = &quotient.params;
    let a = qp.a;

    // innovations on a per-unit-time scale
    let mut xr = Vec::with_capacity(xs.len());
    let mut yr = Vec::with_capacity(xs.len());
    let mut vb = Vec::with_capacity(xs.len());
    for (px, py) in xs.pairs.iter().zip(&ys.pairs) {
        let c = coefs_unchecked(a, px.dt);
        let th = qp.theta_at(px.month, px.year)?;
        let mu = index_params.mu_at(py.month, py.year)?;
        let sq = px.dt.sqrt();
        xr.push((px.x_next - c.eta * px.x_prev - th * c.kappa) * sq / c.kappa);
        yr.push((py.x_next - py.x_prev - mu * py.dt) / sq);
        vb.push(vol_g.bucket(px.month));
    }
    let sigma_i: BTreeMap<u32, f64> = index_params
        .sigma
        .iter()
        .map(|(k, v)| (*k, v.sigma))
        .collect();
    let products = covar_recover(&xr, &yr, &vb, &sigma_i)?;

    let mut invalid_buckets = BTreeMap::new();
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &b in &vb {
        *counts.entry(b).or_insert(0) += 1;
    }
    // unconstrained spot volatility per volatility bucket
    let mut unconstrained: BTreeMap<u32, f64> = BTreeMap::new();
    for (&b, &p) in &products {
        let (Some(s), Some(&si)) = (qp.sigma.get(&b), sigma_i.get(&b)) else {
            continue;
        };
        let s2 = s.sigma * s.sigma - si * si + 2.0 * si * p;
        if s2 > 0.0 {
            unconstrained.insert(b, s2.sqrt());
        } else {
            invalid_buckets.insert(
                vol_g.label(b),
                format!("spot variance estimate {s2:.6e} is not positive"),
            );
        }
    }
    let mut sigma_s_values = BTreeMap::new();
    for (b, s) in &qp.sigma {
        if products.contains_key(b) {
            continue;
        }
        if sigma_i.get(b) == Some(&0.0) {
            // flat index: the quotient is the spot, correlation not identified
            sigma_s_values.insert(*b, s.sigma);
            warnings.push(format!(
                "index is flat in bucket {}; correlation not identified",
                vol_g.label(*b)
            ));
        } else {
            invalid_buckets.insert(vol_g.label(*b), "index volatility unavailable".to_string());
        }
    }

    // correlation per correlation bucket: least squares of σ_S ρ on σ_S
    let mut members: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &b in unconstrained.keys() {
        members
            .entry(rho_bucket(vol_g, opts.rho, b))
            .or_default()
            .push(b);
    }
    let mut rho = BTreeMap::new();
    for (rb, vbs) in members {
        let (mut num, mut den) = (0.0, 0.0);
        for b in &vbs {
            let (s, w) = (unconstrained[b], counts[b] as f64);
            num += w * products[b] * s;
            den += w * s * s;
        }
        let r = num / den;
        if !(r.abs() <= 1.0) {
            invalid_buckets.insert(
                format!("rho:{}", opts.rho.label(rb)),
                format!("correlation estimate {r:.6} outside [-1, 1]"),
            );
            continue;
        }
        let mut ok = Vec::new();
        for b in &vbs {
            let s = qp.sigma[b].sigma;
            let si = sigma_i[b];
            // σ_S solving σ² = σ_S² + σ_I² - 2 σ_S σ_I ρ, root nearest the unconstrained value
            let disc = si * si * r * r - si * si + s * s;
            if disc < 0.0 {
                invalid_buckets.insert(
                    vol_g.label(*b),
                    "no spot volatility consistent with pooled correlation".into(),
                );
                continue;
            }
            let roots = [si * r + disc.sqrt(), si * r - disc.sqrt()];
            let target = unconstrained[b];
            let best = roots
                .into_iter()
                .filter(|v| *v > 0.0)
                .min_by(|x, y| (x - target).abs().total_cmp(&(y - target).abs()));
            match best {
                Some(v) => {
                    sigma_s_values.insert(*b, v);
                    ok.push(*b);
                }
                None => {
                    invalid_buckets
                        .insert(vol_g.label(*b), "no positive spot volatility root".into());
                }
            }
        }
        if ok.is_empty() {
            continue;
        }
        let n_ok: usize = ok.iter().map(|b| counts[b]).sum();
        rho.insert(
            rb,
            RhoEstimate {
                rho: r,
                n: n_ok,
                ci: corr_ci(r, n_ok, opts.mr.alpha).ok(),
            },
        );
    }
    let sigma_s: BTreeMap<u32, VolEstimate> = sigma_s_values
        .into_iter()
        .map(|(b, s)| {
            let n = counts[&b];
            let est = VolEstimate {
                sigma: s,
                n,
                ci: vol_ci(s, n, opts.mr.alpha).ok(),
                low_count: n < LOW_COUNT,
            };
            (b, est)
        })
        .collect();
    for (b, why) in &invalid_buckets {
        warnings.push(format!("bucket {b} invalid: {why}"));
    }

    let params = SPParams {
        a,
        a_stderr: qp.a_stderr,
        vol_granularity: vol_g,
        rho_granularity: opts.rho,
        quotient: qp.clone(),
        index: index_params,
        sigma_s,
        rho,
        sigma_s_rho: products,
        invalid: invalid_buckets,
    };
    let mut index_factor = bs_residuals(&ys, &params.index)?;
    index_factor.label = format!("{}:index", spot.label);
    let mut spot_factor = spot_factor_inner(&xs, &ys, &params, false)?;
    spot_factor.label = format!("{}:spot", spot.label);
    if spot_factor.len() < xs.len() {
        warnings.push(format!(
            "spot factor omits {} transition(s) in invalid buckets",
            xs.len() - spot_factor.len()
        ));
    }
    let index_fit = FitReport::compute(&index_factor.values()).ok();
    let spot_fit = FitReport::compute(&spot_factor.values()).ok();
    Ok(SpCalibration {
        params,
        quotient,
        index_factor,
        index_fit,
        spot_factor,
        spot_fit,
        warnings,
    })
}

/// Approximate standardized spot innovations, replacing the quotient's index
/// noise by the index's own noise (their correlation is [`rho_nu_xi`]).
pub fn spot_factor(
    x_steps: &StepSeries,
    y_steps: &StepSeries,
    params: &SPParams,
) -> Result<FactorSeries> {
    spot_factor_inner(x_steps, y_steps, params, true)
}

fn spot_factor_inner(
    x_steps: &StepSeries,
    y_steps: &StepSeries,
    params: &SPParams,
    strict: bool,
) -> Result<FactorSeries> {
    if x_steps.len() != y_steps.len() {
        return Err(Error::DimensionMismatch {
            expected: x_steps.len(),
            got: y_steps.len(),
        });
    }
    let mut points = Vec::with_capacity(x_steps.len());
    for (px, py) in x_steps.pairs.iter().zip(&y_steps.pairs) {
        if px.start != py.start {
            return Err(invalid(format!(
                "quotient and index steps disagree at {}",
                px.start
            )));
        }
        let ss = match params.sigma_s_at(px.month) {
            Ok(v) => v,
            Err(e) if strict => return Err(e),
            Err(_) => continue,
        };
        let th = params.quotient.theta_at(px.month, px.year)?;
        let mu = params.index.mu_at(py.month, py.year)?;
        let c = coefs_unchecked(params.a, px.dt);
        let xi = px.x_next - c.eta * px.x_prev - th * c.kappa;
        let yi = py.x_next - py.x_prev - mu * py.dt;
        points.push(FactorPoint {
            timestamp: px.start,
            value: (xi + c.gamma / px.dt.sqrt() * yi) / (ss * c.gamma),
            dt: px.dt,
        });
    }
    Ok(FactorSeries {
        label: format!("{}:spot", x_steps.label),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_nu_xi_values() {
        assert!((rho_nu_xi(0.5, 1.0) - 0.99).abs() < 0.005);
        assert!((rho_nu_xi(1.0, 1.0) - 0.96).abs() < 0.005);
        assert_eq!(rho_nu_xi(0.0, 1.0), 1.0);
        // closed form as printed
        for x in [1e-6f64, 0.01, 0.3, 2.0, 10.0] {
            let e = (-x).exp();
            let want = (2.0 * (1.0 - e) / (x * (1.0 + e))).sqrt();
            assert!((rho_nu_xi(x, 1.0) - want).abs() < 1e-9, "{x}");
        }
        let mut prev = 1.0;
        for i in 1..200 {
            let v = rho_nu_xi(i as f64 * 0.05, 1.0);
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn covar_recover_by_hand() {
        let x = [1.0, 2.0, 4.0];
        let y = [0.5, 0.0, 1.0];
        // sample covariance with n - 1
        let (mx, my) = (7.0 / 3.0, 0.5);
        let c = ((1.0 - mx) * 0.0 + (2.0 - mx) * (0.0 - my) + (4.0 - mx) * (1.0 - my)) / 2.0;
        let sig = BTreeMap::from([(1, 0.5)]);
        let p = covar_recover(&x, &y, &[1, 1, 1], &sig).unwrap();
        assert!((p[&1] - (c / 0.5 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn covar_recover_skips_zero_index_vol() {
        let sig = BTreeMap::from([(1, 0.0)]);
        let p = covar_recover(&[1.0, 2.0], &[0.0, 1.0], &[1, 1], &sig).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn rho_bucket_nesting() {
        assert_eq!(rho_bucket(Granularity::Monthly, Granularity::Flat, 7), 0);
        assert_eq!(
            rho_bucket(Granularity::Monthly, Granularity::Seasonal, 7),
            3
        );
        assert_eq!(rho_bucket(Granularity::Monthly, Granularity::Monthly, 7), 7);
        assert_eq!(
            rho_bucket(Granularity::Seasonal, Granularity::Seasonal, 2),
            2
        );
    }
}
