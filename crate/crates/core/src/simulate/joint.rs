//! Correlated real-world simulation of several calibrated models.
//!
//! A mean-reverting or Black-Scholes member contributes one factor labelled
//! by the member; a spot-prompt member contributes `label:spot` and
//! `label:index`. Inside a spot-prompt member the OU-weighted index noise is
//! approximated by `γ ξ`, the same approximation used to build its factor
//! series from data.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDateTime};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_grid, generate, normal, Paths};
use crate::error::{invalid, Error, Result};
use crate::mrcal::{coefs_unchecked, BsParams, MRParams};
use crate::spotprompt::SPParams;
use crate::timeseries::{year_fraction_unchecked, Granularity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum JointMember {
    Mr {
        label: String,
        params: MRParams,
        x0: f64,
    },
    Bs {
        label: String,
        params: BsParams,
        x0: f64,
    },
    Sp {
        label: String,
        params: SPParams,
        spot0: f64,
        index0: f64,
    },
}

impl JointMember {
    pub fn label(&self) -> &str {
        match self {
            JointMember::Mr { label, .. }
            | JointMember::Bs { label, .. }
            | JointMember::Sp { label, .. } => label,
        }
    }

    pub fn factor_labels(&self) -> Vec<String> {
        match self {
            JointMember::Mr { label, .. } | JointMember::Bs { label, .. } => vec![label.clone()],
            JointMember::Sp { label, .. } => {
                vec![format!("{label}:spot"), format!("{label}:index")]
            }
        }
    }
}

/// Factor correlation matrices per bucket; rows follow `labels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrStructure {
    pub granularity: Granularity,
    pub labels: Vec<String>,
    #[serde(with = "crate::serde_keys")]
    pub matrices: BTreeMap<u32, Vec<Vec<f64>>>,
}

impl CorrStructure {
    pub fn identity(labels: Vec<String>) -> Self {
        let n = labels.len();
        let m = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        CorrStructure {
            granularity: Granularity::Flat,
            labels,
            matrices: BTreeMap::from([(0, m)]),
        }
    }

    /// Flat structure for two factors.
    pub fn pair(a: &str, b: &str, rho: f64) -> Self {
        CorrStructure {
            granularity: Granularity::Flat,
            labels: vec![a.to_string(), b.to_string()],
            matrices: BTreeMap::from([(0, vec![vec![1.0, rho], vec![rho, 1.0]])]),
        }
    }
}

fn to_matrix(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rows.len(),
        });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: r.len(),
        });
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    for i in 0..n {
        if (m[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(invalid(format!(
                "correlation diagonal entry {i} is {}",
                m[(i, i)]
            )));
        }
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 || !(m[(i, j)].abs() <= 1.0) {
                return Err(invalid(format!(
                    "correlation entry ({i},{j}) invalid or asymmetric"
                )));
            }
        }
    }
    Ok(m)
}

/// Clips negative eigenvalues to zero and rescales to unit diagonal.
/// Returns `None` when the matrix is already positive semidefinite.
pub fn repair_correlation(rows: &[Vec<f64>]) -> Result<Option<(Vec<Vec<f64>>, f64)>> {
    let n = rows.len();
    let m = to_matrix(rows, n)?;
    let eig = m.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min >= 0.0 {
        return Ok(None);
    }
    let clipped = DVector::from_iterator(n, eig.eigenvalues.iter().map(|v| v.max(0.0)));
    let c = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let d: Vec<f64> = (0..n)
        .map(|i| c[(i, i)].max(f64::MIN_POSITIVE).sqrt())
        .collect();
    let out = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        let v = 0.5 * (c[(i, j)] + c[(j, i)]) / (d[i] * d[j]);
                        v.clamp(-1.0, 1.0)
                    }
                })
                .collect()
        })
        .collect();
    Ok(Some((out, min)))
}

/// Lower factor `L` with `L Lᵀ = C`: Cholesky when possible, otherwise the
/// symmetric square root of the (positive semidefinite) eigen-decomposition.
fn factor(m: DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = m.clone().cholesky() {
        return ch.l();
    }
    let eig = m.symmetric_eigen();
    let s = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&s)
}

enum MemberStep {
    Linear {
        m: f64,
        c: f64,
        s: f64,
        f: usize,
    },
    Sp {
        eta: f64,
        drift_x: f64,
        drift_y: f64,
        ss: f64,
        si: f64,
        gamma: f64,
        sqrt_dt: f64,
        fs: usize,
        fi: usize,
    },
}

/// Simulates all members on a common grid with factor shocks correlated
/// per bucket of the step start. Sets: `label` (the transformed level) for
/// mean-reverting and Black-Scholes members, `label:spot` and `label:index`
/// (prices) for spot-prompt members, and `eps:<factor>` for the shocks when
/// `store_draws` is set.
pub fn simulate_joint(
    members: &[JointMember],
    corr: &CorrStructure,
    grid: &[NaiveDateTime],
    n_paths: usize,
    seed: u64,
    store_draws: bool,
) -> Result<Paths> {
    check_grid(grid, n_paths)?;
    if members.is_empty() {
        return Err(invalid("joint simulation needs at least one member"));
    }
    let labels: Vec<String> = members.iter().flat_map(|m| m.factor_labels()).collect();
    let nf = labels.len();
    if corr.labels.len() != nf {
        return Err(Error::DimensionMismatch {
            expected: nf,
            got: corr.labels.len(),
        });
    }
    // position of each member factor in the correlation matrix
    let mut pos = Vec::with_capacity(nf);
    for l in &labels {
        let p = corr
            .labels
            .iter()
            .position(|c| c == l)
            .ok_or_else(|| invalid(format!("factor `{l}` missing from correlation labels")))?;
        pos.push(p);
    }

    let mut notes = Vec::new();
    let mut factors: BTreeMap<u32, DMatrix<f64>> = BTreeMap::new();
    for (&bucket, rows) in &corr.matrices {
        let m = to_matrix(rows, nf)?;
        let m = match repair_correlation(rows)? {
            None => m,
            Some((fixed, min)) => {
                let change = fixed
                    .iter()
                    .flatten()
                    .zip(rows.iter().flatten())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                notes.push(format!(
                    "bucket {}: correlation matrix not positive semidefinite (min eigenvalue {min:.3e}); \
                     repaired by eigenvalue clipping, max entry change {change:.3e}",
                    corr.granularity.label(bucket)
                ));
                DMatrix::from_fn(nf, nf, |i, j| fixed[i][j])
            }
        };
        factors.insert(bucket, factor(m));
    }
    let identity = DMatrix::<f64>::identity(nf, nf);
    let mut missing = Vec::new();

    let mut step_factor: Vec<&DMatrix<f64>> = Vec::with_capacity(grid.len());
    let mut member_steps: Vec<Vec<MemberStep>> = Vec::with_capacity(grid.len());
    for w in grid.windows(2) {
        let (mo, yr) = (w[0].month(), w[0].year());
        let bucket = corr.granularity.bucket(mo);
        step_factor.push(match factors.get(&bucket) {
            Some(f) => f,
            None => {
                if !missing.contains(&bucket) {
                    missing.push(bucket);
                }
                &identity
            }
        });
        let dt = year_fraction_unchecked(w[0], w[1]);
        let mut f = 0;
        let mut row = Vec::with_capacity(members.len());
        for m in members {
            match m {
                JointMember::Mr { params, .. } => {
                    let c = coefs_unchecked(params.a, dt);
                    row.push(MemberStep::Linear {
                        m: c.eta,
                        c: params.theta_at(mo, yr)? * c.kappa,
                        s: params.sigma_at(mo)? * c.gamma,
                        f: pos[f],
                    });
                    f += 1;
                }
                JointMember::Bs { params, .. } => {
                    row.push(MemberStep::Linear {
                        m: 1.0,
                        c: params.mu_at(mo, yr)? * dt,
                        s: params.sigma_at(mo)? * dt.sqrt(),
                        f: pos[f],
                    });
                    f += 1;
                }
                JointMember::Sp { params, .. } => {
                    let c = coefs_unchecked(params.a, dt);
                    row.push(MemberStep::Sp {
                        eta: c.eta,
                        drift_x: params.quotient.theta_at(mo, yr)? * c.kappa,
                        drift_y: params.index.mu_at(mo, yr)? * dt,
                        ss: params.sigma_s_at(mo)?,
                        si: params.index.sigma_at(mo)?,
                        gamma: c.gamma,
                        sqrt_dt: dt.sqrt(),
                        fs: pos[f],
                        fi: pos[f + 1],
                    });
                    f += 2;
                }
            }
        }
        member_steps.push(row);
    }
    for b in &missing {
        notes.push(format!(
            "bucket {}: no correlation matrix, factors simulated independently",
            corr.granularity.label(*b)
        ));
    }

    let n = grid.len();
    let mut out_labels: Vec<String> = Vec::new();
    for m in members {
        match m {
            JointMember::Sp { label, .. } => {
                out_labels.push(format!("{label}:spot"));
                out_labels.push(format!("{label}:index"));
            }
            _ => out_labels.push(m.label().to_string()),
        }
    }
    let n_levels = out_labels.len();
    let mut set_dims: Vec<(&str, usize)> = out_labels.iter().map(|l| (l.as_str(), n)).collect();
    let eps_labels: Vec<String> = labels.iter().map(|l| format!("eps:{l}")).collect();
    if store_draws {
        set_dims.extend(eps_labels.iter().map(|l| (l.as_str(), n - 1)));
    }

    let sets = generate(&set_dims, n_paths, seed, |rng, _| {
        let mut state: Vec<(f64, f64)> = members
            .iter()
            .map(|m| match m {
                JointMember::Mr { x0, .. } | JointMember::Bs { x0, .. } => (*x0, 0.0),
                JointMember::Sp { spot0, index0, .. } => ((spot0 / index0).ln(), index0.ln()),
            })
            .collect();
        let mut rows: Vec<Vec<f64>> = (0..n_levels).map(|_| Vec::with_capacity(n)).collect();
        let mut eps_rows: Vec<Vec<f64>> = if store_draws {
            (0..nf).map(|_| Vec::with_capacity(n - 1)).collect()
        } else {
            Vec::new()
        };
        let record = |rows: &mut Vec<Vec<f64>>, state: &[(f64, f64)]| {
            let mut r = 0;
            for (m, &(x, y)) in members.iter().zip(state) {
                if let JointMember::Sp { .. } = m {
                    rows[r].push((x + y).exp());
                    rows[r + 1].push(y.exp());
                    r += 2;
                } else {
                    rows[r].push(x);
                    r += 1;
                }
            }
        };
        record(&mut rows, &state);
        let mut z = DVector::<f64>::zeros(nf);
        for (k, steps) in member_steps.iter().enumerate() {
            for v in z.iter_mut() {
                *v = normal(rng);
            }
            let e = step_factor[k] * &z;
            for (st, ms) in state.iter_mut().zip(steps) {
                match *ms {
                    MemberStep::Linear { m, c, s, f } => st.0 = m * st.0 + c + s * e[f],
                    MemberStep::Sp {
                        eta,
                        drift_x,
                        drift_y,
                        ss,
                        si,
                        gamma,
                        sqrt_dt,
                        fs,
                        fi,
                    } => {
                        st.0 = eta * st.0 + drift_x + ss * gamma * e[fs] - si * gamma * e[fi];
                        st.1 += drift_y + si * sqrt_dt * e[fi];
                    }
                }
            }
            if store_draws {
                for (i, &p) in pos.iter().enumerate() {
                    eps_rows[i].push(e[p]);
                }
            }
            record(&mut rows, &state);
        }
        rows.extend(eps_rows);
        rows
    });
    Ok(Paths {
        grid: grid.to_vec(),
        n_paths,
        seed,
        sets,
        notes,
    })
}
