//! Residual diagnostics and confidence intervals.
//!
//! Moments use central moments `mu_k = (1/n) sum (x - mean)^k`, with
//! skewness `mu_3 / mu_2^(3/2)` and excess kurtosis `mu_4 / mu_2^2 - 3`.
//! The reported standard deviation uses the `n - 1` normalization.

pub mod jb_table;
pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use special::{chi2_quantile, chi2_sf, norm_cdf, norm_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub stddev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

pub fn moments(x: &[f64]) -> Result<Moments> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let ss = m2;
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= 0.0 {
        return Err(Error::Degenerate(
            "degenerate sample (zero variance)".into(),
        ));
    }
    Ok(Moments {
        n,
        mean,
        stddev: (ss / (nf - 1.0)).sqrt(),
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    })
}

/// Jarque-Bera statistic `(n/6)(S^2 + K^2/4)`.
pub fn jb_statistic(x: &[f64]) -> Result<f64> {
    let m = moments(x)?;
    Ok(jb_from_moments(&m))
}

fn jb_from_moments(m: &Moments) -> f64 {
    m.n as f64 / 6.0 * (m.skewness * m.skewness + 0.25 * m.excess_kurtosis * m.excess_kurtosis)
}

/// Jarque-Bera test. Small samples use the Monte Carlo null table, samples
/// beyond the largest tabulated size the asymptotic chi-square(2) tail.
pub fn jarque_bera(x: &[f64]) -> Result<(f64, f64)> {
    if x.len() < 8 {
        return Err(Error::InsufficientData {
            needed: 8,
            got: x.len(),
        });
    }
    let jb = jb_statistic(x)?;
    Ok((jb, jb_pvalue(jb, x.len())))
}

/// p-value of a JB statistic for sample size `n`.
pub fn jb_pvalue(jb: f64, n: usize) -> f64 {
    let max_n = *jb_table::LADDER.last().unwrap();
    if n > max_n {
        return chi2_sf(jb, 2.0);
    }
    jb_table::pvalue(jb, n)
}

/// Kolmogorov limiting survival function
/// `Q_KS(l) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 l^2)`.
pub fn q_ks(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // equivalent theta-function form, converges fast for small lambda
        let pre = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for j in 1..=50 {
            let k = (2 * j - 1) as f64;
            let term = (-k * k * c).exp();
            s += term;
            if term < 1e-17 * s {
                break;
            }
        }
        return (1.0 - pre * s).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=1000 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += sign * term;
        if term <= 1e-12 * sum.abs() || term < 1e-300 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test against the standard normal.
pub fn ks_test(x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 5 {
        return Err(Error::InsufficientData { needed: 5, got: n });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("ks_test: non-finite sample"));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d0 = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let cdf = norm_cdf(v);
            let lo = (i as f64 / nf - cdf).abs();
            let hi = ((i + 1) as f64 / nf - cdf).abs();
            lo.max(hi)
        })
        .fold(0.0, f64::max);
    let sn = nf.sqrt();
    let p = q_ks((sn + 0.12 + 0.11 / sn) * d0);
    Ok((d0, p))
}

/// A point estimate with its `1 - alpha` confidence bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Chi-square confidence interval for a volatility estimated from `n` terms.
pub fn vol_ci(sigma: f64, n: usize, alpha: f64) -> Result<Interval> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(invalid(format!("vol_ci needs n >= 2, got {n}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("vol_ci needs sigma > 0, got {sigma}")));
    }
    let dof = (n - 1) as f64;
    let chi_hi = chi2_quantile(1.0 - 0.5 * alpha, dof);
    let chi_lo = chi2_quantile(0.5 * alpha, dof);
    Ok(Interval {
        estimate: sigma,
        lower: sigma * (dof / chi_hi).sqrt(),
        upper: sigma * (dof / chi_lo).sqrt(),
        alpha,
    })
}

/// Fisher z-transform confidence interval for a correlation.
pub fn corr_ci(rho: f64, n: usize, alpha: f64) -> Result<Interval> {
    check_alpha(alpha)?;
    if !(rho.abs() < 1.0) {
        return Err(invalid(format!("corr_ci needs |rho| < 1, got {rho}")));
    }
    if n < 4 {
        return Err(invalid(format!("corr_ci needs n >= 4, got {n}")));
    }
    let z = rho.atanh();
    let half = norm_quantile(1.0 - 0.5 * alpha) / ((n - 3) as f64).sqrt();
    let z_lb = z - half;
    let z_ub = z + half;
    let lower = (2.0 * z_lb).exp_m1() / ((2.0 * z_lb).exp() + 1.0);
    let upper = -(-2.0 * z_ub).exp_m1() / (1.0 + (-2.0 * z_ub).exp());
    Ok(Interval {
        estimate: rho,
        lower,
        upper,
        alpha,
    })
}

/// Scales the regression-seed standard error by `a / a0`.
pub fn mr_ci(a: f64, a0: f64, a0_stderr: f64) -> Result<f64> {
    if !(a0 > 0.0) {
        return Err(invalid(format!("mr_ci needs a0 > 0, got {a0}")));
    }
    Ok(a / a0 * a0_stderr)
}

/// Goodness-of-fit summary of a residual series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n: usize,
    pub mean: f64,
    pub stddev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jb_stat: f64,
    pub jb_pvalue: f64,
    pub ks_stat: f64,
    pub ks_pvalue: f64,
}

impl FitReport {
    pub fn compute(x: &[f64]) -> Result<Self> {
        let m = moments(x)?;
        let (jb_stat, jb_pvalue) = jarque_bera(x)?;
        let (ks_stat, ks_pvalue) = ks_test(x)?;
        Ok(FitReport {
            n: m.n,
            mean: m.mean,
            stddev: m.stddev,
            skewness: m.skewness,
            excess_kurtosis: m.excess_kurtosis,
            jb_stat,
            jb_pvalue,
            ks_stat,
            ks_pvalue,
        })
    }
}

/// Pearson sample correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n != b.len() || n < 2 {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}
