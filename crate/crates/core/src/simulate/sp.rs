//! Spot-prompt simulators.
//!
//! Risk-neutral scheme. Every forward contract is driven by the single
//! Gaussian martingale `H_t = ∫ e^{bu} σ_I(u) dB_u`:
//! `log F(t,T) = log F(0,T) - ½ e^{-2bT} Var(H_t) + e^{-bT} H_t`, and the
//! index is the contract expiring at the end of the current roll window.
//! Within a window starting at `T_i` the spot is
//! `log S_t = log I_{T_i^-} + D_t - ½ Var(D_t)`, where `D = B̃ - Z`, `B̃` is the
//! index log-noise accumulated since `T_i` and `Z` is the OU process
//! `dZ = -aZ dt + σ_p dB - σ_S dW` started at zero on `T_i`. Then `log S - log I`
//! mean-reverts at rate `a` with volatility `σ` and `E_{T_i}[S_t] = I_{T_i^-}`
//! holds exactly. All transitions are sampled exactly, with sub-steps at
//! calendar-month boundaries where the parameters change.

use chrono::{Datelike, NaiveDateTime};

use super::curve::{decay_integral, month_pieces, ForwardCurve, SpCurves};
use super::{check_grid, generate, normal, Paths};
use crate::error::{invalid, Result};
use crate::mrcal::coefs_unchecked;
use crate::spotprompt::SPParams;
use crate::timeseries::year_fraction_unchecked;

enum Op {
    Step {
        l11: f64,
        l21: f64,
        l22: f64,
        decay: f64,
        damp: f64,
    },
    /// Contract expiry: `log I_{T^-} = det + damp * H`.
    Roll { det: f64, damp: f64 },
    /// Index `f * exp(corr + damp * H)`.
    Output {
        half_w: f64,
        f: f64,
        corr: f64,
        damp: f64,
    },
}

pub fn simulate_sp(
    p: &SpCurves,
    curve: &ForwardCurve,
    grid: &[NaiveDateTime],
    n_paths: usize,
    seed: u64,
) -> Result<Paths> {
    check_grid(grid, n_paths)?;
    if !(p.a > 0.0) || !(p.b >= 0.0) {
        return Err(invalid(format!(
            "need a > 0 and b >= 0, got a = {}, b = {}",
            p.a, p.b
        )));
    }
    let knots = curve.knots();
    let t0 = grid[0];
    let tau = |t: NaiveDateTime| year_fraction_unchecked(t0, t);
    let mut window = curve.window(t0)?;
    let prompt_of = |w: usize| -> Result<(f64, f64)> {
        let (t, f) = knots.get(w + 1).ok_or_else(|| {
            invalid(format!(
                "forward curve has no contract expiring after the roll on {}",
                knots[w].0
            ))
        })?;
        Ok((tau(*t), *f))
    };
    let (mut big_t, mut f_prompt) = prompt_of(window)?;
    let s0 = knots[window].1;

    let mut events: Vec<(NaiveDateTime, Option<usize>)> = grid
        .iter()
        .enumerate()
        .map(|(k, t)| (*t, Some(k)))
        .collect();
    let last = *grid.last().expect("non-empty grid");
    for (t, _) in &knots[window + 1..] {
        if *t > t0 && *t <= last {
            events.push((*t, None));
        }
    }
    // rolls sort before a grid point at the same instant
    events.sort_by_key(|e| (e.0, e.1.is_some()));

    let (a, b) = (p.a, p.b);
    let (mut vb, mut vz, mut cbz, mut vh) = (0.0, 0.0, 0.0, 0.0);
    let mut ops = Vec::new();
    let mut rolls = Vec::new();
    let mut now = t0;
    for (t, grid_index) in events {
        for (s, e, m) in month_pieces(now, t) {
            let (te, dt) = (tau(e), year_fraction_unchecked(s, e));
            let (sig, ss, rho) = (p.sigma_i.at(m), p.sigma_s.at(m), p.rho.at(m));
            let damp = (-b * big_t).exp();
            let g = (b * te).exp();
            let var_h = sig * sig * g * g * decay_integral(2.0 * b, 0.0, dt);
            let cov_hz = sig * sig * damp * g * g * decay_integral(2.0 * b + a, 0.0, dt)
                - rho * ss * sig * g * decay_integral(b + a, 0.0, dt);
            let var_z = sig * sig * damp * damp * g * g * decay_integral(2.0 * (b + a), 0.0, dt)
                - 2.0 * rho * ss * sig * damp * g * decay_integral(b + 2.0 * a, 0.0, dt)
                + ss * ss * decay_integral(2.0 * a, 0.0, dt);
            let decay = (-a * dt).exp();
            let l11 = var_h.sqrt();
            let l21 = if l11 > 0.0 { cov_hz / l11 } else { 0.0 };
            let l22 = (var_z - l21 * l21).max(0.0).sqrt();
            ops.push(Op::Step {
                l11,
                l21,
                l22,
                decay,
                damp,
            });
            vb += damp * damp * var_h;
            vz = decay * decay * vz + var_z;
            cbz = decay * cbz + damp * cov_hz;
            vh += var_h;
        }
        now = t;
        match grid_index {
            None => {
                let damp = (-b * big_t).exp();
                ops.push(Op::Roll {
                    det: f_prompt.ln() - 0.5 * damp * damp * vh,
                    damp,
                });
                rolls.push(t);
                window += 1;
                (big_t, f_prompt) = prompt_of(window)?;
                (vb, vz, cbz) = (0.0, 0.0, 0.0);
            }
            Some(_) => {
                let damp = (-b * big_t).exp();
                ops.push(Op::Output {
                    half_w: 0.5 * (vb + vz - 2.0 * cbz),
                    f: f_prompt,
                    corr: -0.5 * damp * damp * vh,
                    damp,
                });
            }
        }
    }

    let n = grid.len();
    let n_rolls = rolls.len();
    let sets = generate(
        &[("spot", n), ("index", n), ("expiring", n_rolls)],
        n_paths,
        seed,
        |rng, _| {
            let (mut h, mut bt, mut z) = (0.0, 0.0, 0.0);
            let mut ls0 = s0.ln();
            let mut spot = Vec::with_capacity(n);
            let mut index = Vec::with_capacity(n);
            let mut expiring = Vec::with_capacity(n_rolls);
            for op in &ops {
                match *op {
                    Op::Step {
                        l11,
                        l21,
                        l22,
                        decay,
                        damp,
                    } => {
                        let (z1, z2) = (normal(rng), normal(rng));
                        let dh = l11 * z1;
                        h += dh;
                        bt += damp * dh;
                        z = decay * z + l21 * z1 + l22 * z2;
                    }
                    Op::Roll { det, damp } => {
                        ls0 = det + damp * h;
                        expiring.push(ls0.exp());
                        bt = 0.0;
                        z = 0.0;
                    }
                    Op::Output {
                        half_w,
                        f,
                        corr,
                        damp,
                    } => {
                        spot.push((ls0 - half_w + bt - z).exp());
                        index.push(f * (corr + damp * h).exp());
                    }
                }
            }
            vec![spot, index, expiring]
        },
    );
    let mut notes = vec![format!(
        "initial spot {s0} from the contract expiring {}",
        knots[curve.window(t0)?].0
    )];
    if !rolls.is_empty() {
        let list: Vec<String> = rolls.iter().map(|t| t.to_string()).collect();
        notes.push(format!(
            "rolls (columns of `expiring`): {}",
            list.join(", ")
        ));
    }
    Ok(Paths {
        grid: grid.to_vec(),
        n_paths,
        seed,
        sets,
        notes,
    })
}

/// Lower-triangular factor of a 3x3 covariance, clamping tiny negative
/// pivots from rounding to zero.
fn cholesky3(c: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (c[i][i] - s).max(0.0).sqrt();
            } else {
                l[i][j] = if l[j][j] > 0.0 {
                    (c[i][j] - s) / l[j][j]
                } else {
                    0.0
                };
            }
        }
    }
    l
}

/// Real-world spot-prompt paths from calibrated parameters. The quotient
/// and index noises over each step are sampled jointly and exactly; with
/// `store_draws` the standardized spot draws (`eps_s`) and index draws
/// (`xi`) are returned.
pub fn simulate_sp_realworld(
    params: &SPParams,
    grid: &[NaiveDateTime],
    spot0: f64,
    index0: f64,
    n_paths: usize,
    seed: u64,
    store_draws: bool,
) -> Result<Paths> {
    check_grid(grid, n_paths)?;
    if !(spot0 > 0.0 && index0 > 0.0) {
        return Err(invalid("initial spot and index must be positive"));
    }
    struct StepCoef {
        eta: f64,
        drift_x: f64,
        drift_y: f64,
        ss: f64,
        si: f64,
        gamma: f64,
        sqrt_dt: f64,
        l: [[f64; 3]; 3],
    }
    let mut steps = Vec::with_capacity(grid.len().saturating_sub(1));
    for w in grid.windows(2) {
        let (m, y) = (w[0].month(), w[0].year());
        let dt = year_fraction_unchecked(w[0], w[1]);
        let c = coefs_unchecked(params.a, dt);
        let rho = params.rho_at(m)?;
        let g2 = c.gamma * c.gamma;
        let cov = [
            [g2, rho * g2, rho * c.kappa],
            [rho * g2, g2, c.kappa],
            [rho * c.kappa, c.kappa, dt],
        ];
        steps.push(StepCoef {
            eta: c.eta,
            drift_x: params.quotient.theta_at(m, y)? * c.kappa,
            drift_y: params.index.mu_at(m, y)? * dt,
            ss: params.sigma_s_at(m)?,
            si: params.index.sigma_at(m)?,
            gamma: c.gamma,
            sqrt_dt: dt.sqrt(),
            l: cholesky3(cov),
        });
    }
    let n = grid.len();
    let labels: &[(&str, usize)] = if store_draws {
        &[("spot", n), ("index", n), ("eps_s", n - 1), ("xi", n - 1)]
    } else {
        &[("spot", n), ("index", n)]
    };
    let sets = generate(labels, n_paths, seed, |rng, _| {
        let mut x = (spot0 / index0).ln();
        let mut y = index0.ln();
        let mut spot = vec![spot0];
        let mut index = vec![index0];
        let mut eps = Vec::new();
        let mut xi = Vec::new();
        for s in &steps {
            let z = [normal(rng), normal(rng), normal(rng)];
            let l = &s.l;
            let w_int = l[0][0] * z[0];
            let b_int = l[1][0] * z[0] + l[1][1] * z[1];
            let b_inc = l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2];
            x = s.eta * x + s.drift_x + s.ss * w_int - s.si * b_int;
            y += s.drift_y + s.si * b_inc;
            spot.push((x + y).exp());
            index.push(y.exp());
            if store_draws {
                eps.push(w_int / s.gamma);
                xi.push(b_inc / s.sqrt_dt);
            }
        }
        if store_draws {
            vec![spot, index, eps, xi]
        } else {
            vec![spot, index]
        }
    });
    Ok(Paths {
        grid: grid.to_vec(),
        n_paths,
        seed,
        sets,
        notes: Vec::new(),
    })
}
