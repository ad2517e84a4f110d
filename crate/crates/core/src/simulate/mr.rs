//! One-factor mean-reverting and Black-Scholes simulators.

use chrono::{Datelike, NaiveDateTime};

use super::curve::{v_squared, ForwardCurve, MonthlyCurve};
use super::{check_grid, generate, normal, Paths};
use crate::error::{invalid, Result};
use crate::mrcal::{coefs_unchecked, BsParams, MRParams};
use crate::timeseries::year_fraction_unchecked;

/// Risk-neutral spot `S_t = F(0,t) exp(-½V²(0,t) + Y_t)` with `Y` an OU
/// process started at zero on `grid[0]`.
pub fn simulate_mr(
    a: f64,
    sigma: &MonthlyCurve,
    curve: &ForwardCurve,
    grid: &[NaiveDateTime],
    n_paths: usize,
    seed: u64,
) -> Result<Paths> {
    check_grid(grid, n_paths)?;
    if !(a >= 0.0) {
        return Err(invalid(format!(
            "mean-reversion rate must be >= 0, got {a}"
        )));
    }
    let n = grid.len();
    let mut fwd = Vec::with_capacity(n);
    let mut drift = Vec::with_capacity(n);
    let mut decay = vec![1.0; n];
    let mut step_sd = vec![0.0; n];
    let mut v2 = 0.0;
    for k in 0..n {
        if k > 0 {
            decay[k] = (-a * year_fraction_unchecked(grid[k - 1], grid[k])).exp();
            let v = v_squared(a, sigma, grid[k - 1], grid[k])?;
            step_sd[k] = v.sqrt();
            v2 = decay[k] * decay[k] * v2 + v;
        }
        fwd.push(curve.value_at(grid[k])?);
        drift.push(-0.5 * v2);
    }
    let sets = generate(&[("spot", n)], n_paths, seed, |rng, _| {
        let mut y = 0.0;
        let mut row = Vec::with_capacity(n);
        for k in 0..n {
            if k > 0 {
                y = decay[k] * y + step_sd[k] * normal(rng);
            }
            row.push(fwd[k] * (drift[k] + y).exp());
        }
        vec![row]
    });
    Ok(Paths {
        grid: grid.to_vec(),
        n_paths,
        seed,
        sets,
        notes: Vec::new(),
    })
}

/// Real-world recursion `X_{k} = η X_{k-1} + θ κ + σ γ ε` with parameters of
/// the bucket containing `grid[k-1]`. With `store_draws` the `ε` are
/// returned as set `eps`.
pub fn simulate_mr_realworld(
    params: &MRParams,
    grid: &[NaiveDateTime],
    x0: f64,
    n_paths: usize,
    seed: u64,
    store_draws: bool,
) -> Result<Paths> {
    check_grid(grid, n_paths)?;
    let mut steps = Vec::with_capacity(grid.len().saturating_sub(1));
    for w in grid.windows(2) {
        let c = coefs_unchecked(params.a, year_fraction_unchecked(w[0], w[1]));
        let th = params.theta_at(w[0].month(), w[0].year())?;
        let s = params.sigma_at(w[0].month())?;
        steps.push((c.eta, th * c.kappa, s * c.gamma));
    }
    Ok(recursion_paths(
        grid,
        &steps,
        x0,
        n_paths,
        seed,
        store_draws,
    ))
}

/// Arithmetic Brownian motion in `X` with bucketed drift and volatility.
pub fn simulate_bs(
    params: &BsParams,
    grid: &[NaiveDateTime],
    x0: f64,
    n_paths: usize,
    seed: u64,
    store_draws: bool,
) -> Result<Paths> {
    check_grid(grid, n_paths)?;
    let mut steps = Vec::with_capacity(grid.len().saturating_sub(1));
    for w in grid.windows(2) {
        let dt = year_fraction_unchecked(w[0], w[1]);
        let mu = params.mu_at(w[0].month(), w[0].year())?;
        let s = params.sigma_at(w[0].month())?;
        steps.push((1.0, mu * dt, s * dt.sqrt()));
    }
    Ok(recursion_paths(
        grid,
        &steps,
        x0,
        n_paths,
        seed,
        store_draws,
    ))
}

/// Paths of `x_k = m_k x_{k-1} + c_k + s_k ε_k`.
fn recursion_paths(
    grid: &[NaiveDateTime],
    steps: &[(f64, f64, f64)],
    x0: f64,
    n_paths: usize,
    seed: u64,
    store_draws: bool,
) -> Paths {
    let n = grid.len();
    let labels: &[(&str, usize)] = if store_draws {
        &[("x", n), ("eps", n - 1)]
    } else {
        &[("x", n)]
    };
    let sets = generate(labels, n_paths, seed, |rng, _| {
        let mut x = x0;
        let mut row = Vec::with_capacity(n);
        let mut eps = Vec::with_capacity(if store_draws { n - 1 } else { 0 });
        row.push(x);
        for &(m, c, s) in steps {
            let e = normal(rng);
            x = m * x + c + s * e;
            row.push(x);
            if store_draws {
                eps.push(e);
            }
        }
        if store_draws {
            vec![row, eps]
        } else {
            vec![row]
        }
    });
    Paths {
        grid: grid.to_vec(),
        n_paths,
        seed,
        sets,
        notes: Vec::new(),
    }
}
