//! Monte Carlo simulation with exact Gaussian transitions.
//!
//! Every path draws from its own ChaCha stream keyed by the path index, so
//! output is identical for any number of worker threads and adding paths
//! never changes the earlier ones.

mod curve;
mod joint;
mod mr;
mod sp;

use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mrcal::{BsParams, MRParams};
use crate::spotprompt::SPParams;

pub use curve::{
    forward_curve_evolve, generate_roll_dates, sp_log_moments_as_printed, sp_theta, v_squared,
    ForwardCurve, MonthlyCurve, SpCurves,
};
pub use joint::{repair_correlation, simulate_joint, CorrStructure, JointMember};
pub use mr::{simulate_bs, simulate_mr, simulate_mr_realworld};
pub use sp::{simulate_sp, simulate_sp_realworld};

/// Values of one simulated quantity, stored path-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub label: String,
    pub n_times: usize,
    pub values: Vec<f64>,
}

impl PathSet {
    pub fn n_paths(&self) -> usize {
        self.values.len().checked_div(self.n_times).unwrap_or(0)
    }

    pub fn path(&self, p: usize) -> &[f64] {
        &self.values[p * self.n_times..(p + 1) * self.n_times]
    }

    pub fn value(&self, p: usize, t: usize) -> f64 {
        self.values[p * self.n_times + t]
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        (0..self.n_paths()).map(|p| self.value(p, t)).collect()
    }

    /// Sample mean and its standard error at time index `t`.
    pub fn mean_and_se(&self, t: usize) -> (f64, f64) {
        mean_and_se(&self.column(t))
    }
}

pub fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub grid: Vec<NaiveDateTime>,
    pub n_paths: usize,
    pub seed: u64,
    pub sets: Vec<PathSet>,
    pub notes: Vec<String>,
}

impl Paths {
    pub fn set(&self, label: &str) -> Option<&PathSet> {
        self.sets.iter().find(|s| s.label == label)
    }
}

pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

pub(crate) fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub(crate) fn check_grid(grid: &[NaiveDateTime], n_paths: usize) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("simulation grid is empty"));
    }
    if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(invalid(format!(
            "simulation grid not strictly increasing at {}",
            w[1]
        )));
    }
    if n_paths == 0 {
        return Err(invalid("number of paths must be at least 1"));
    }
    Ok(())
}

/// Runs `f(rng, path)` for every path in parallel; `f` returns one row per
/// output set. Rows are assembled in path order.
pub(crate) fn generate<F>(labels: &[(&str, usize)], n_paths: usize, seed: u64, f: F) -> Vec<PathSet>
where
    F: Fn(&mut ChaCha8Rng, usize) -> Vec<Vec<f64>> + Sync,
{
    let rows: Vec<Vec<Vec<f64>>> = (0..n_paths)
        .into_par_iter()
        .map(|p| f(&mut path_rng(seed, p), p))
        .collect();
    labels
        .iter()
        .enumerate()
        .map(|(k, &(label, n_times))| {
            let mut values = Vec::with_capacity(n_times * n_paths);
            for r in &rows {
                debug_assert_eq!(r[k].len(), n_times);
                values.extend_from_slice(&r[k]);
            }
            PathSet {
                label: label.to_string(),
                n_times,
                values,
            }
        })
        .collect()
}

/// Model and parameters of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SimModel {
    MrRiskNeutral {
        a: f64,
        sigma: MonthlyCurve,
        curve: ForwardCurve,
    },
    MrRealWorld {
        params: MRParams,
        x0: f64,
    },
    Bs {
        params: BsParams,
        x0: f64,
    },
    SpRiskNeutral {
        params: SpCurves,
        curve: ForwardCurve,
    },
    SpRealWorld {
        params: SPParams,
        spot0: f64,
        index0: f64,
    },
    Joint {
        members: Vec<JointMember>,
        correlation: CorrStructure,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub model: SimModel,
    pub grid: Vec<NaiveDateTime>,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub store_draws: bool,
}

pub fn simulate(spec: &SimSpec) -> Result<Paths> {
    let (grid, n, seed) = (&spec.grid, spec.n_paths, spec.seed);
    match &spec.model {
        SimModel::MrRiskNeutral { a, sigma, curve } => simulate_mr(*a, sigma, curve, grid, n, seed),
        SimModel::MrRealWorld { params, x0 } => {
            simulate_mr_realworld(params, grid, *x0, n, seed, spec.store_draws)
        }
        SimModel::Bs { params, x0 } => simulate_bs(params, grid, *x0, n, seed, spec.store_draws),
        SimModel::SpRiskNeutral { params, curve } => simulate_sp(params, curve, grid, n, seed),
        SimModel::SpRealWorld {
            params,
            spot0,
            index0,
        } => simulate_sp_realworld(params, grid, *spot0, *index0, n, seed, spec.store_draws),
        SimModel::Joint {
            members,
            correlation,
        } => simulate_joint(members, correlation, grid, n, seed, spec.store_draws),
    }
}
