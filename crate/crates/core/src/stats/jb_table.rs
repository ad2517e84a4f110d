//! Monte Carlo null distribution of the Jarque-Bera statistic.
//!
//! `QUANTILES[i][j]` is the JB value whose null survival probability is
//! `SURVIVAL[j]` at sample size `LADDER[i]`. The data file is produced by
//! `cargo run --release --example gen_jb_table` (100,000 standard-normal
//! samples per size, fixed seed).

use super::special::chi2_sf;

pub const LADDER: [usize; 8] = [10, 20, 50, 100, 250, 500, 1000, 2000];

/// Decreasing survival levels.
pub const SURVIVAL: [f64; 31] = [
    0.999, 0.995, 0.99, 0.975, 0.95, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.25, 0.2, 0.15, 0.1,
    0.075, 0.05, 0.04, 0.03, 0.025, 0.02, 0.015, 0.01, 0.0075, 0.005, 0.0025, 0.001, 0.0005,
    0.0002, 0.0001,
];

pub const SIMULATIONS: usize = 100_000;
pub const SEED: u64 = 0x4a42_5441_424c_4531;

include!("jb_table_data.rs");

/// Survival probability of `jb` under the tabulated null for one ladder row.
fn row_pvalue(jb: f64, row: &[f64; 31]) -> f64 {
    if jb <= 0.0 {
        return 1.0;
    }
    if jb <= row[0] {
        // log-linear between (0, 1) and the first tabulated point
        let w = jb / row[0];
        return (w * SURVIVAL[0].ln()).exp();
    }
    for j in 1..row.len() {
        if jb <= row[j] {
            let (x0, x1) = (row[j - 1], row[j]);
            let w = if x1 > x0 { (jb - x0) / (x1 - x0) } else { 1.0 };
            let (l0, l1) = (SURVIVAL[j - 1].ln(), SURVIVAL[j].ln());
            return (l0 + w * (l1 - l0)).exp();
        }
    }
    // beyond the table: chi-square(2) tail shape anchored at the last point
    let last = row[row.len() - 1];
    SURVIVAL[SURVIVAL.len() - 1] * chi2_sf(jb, 2.0) / chi2_sf(last, 2.0)
}

/// Table p-value, interpolated linearly in `log n` between ladder rows.
pub fn pvalue(jb: f64, n: usize) -> f64 {
    let n = n.max(LADDER[0]);
    let i = LADDER
        .iter()
        .position(|&m| m >= n)
        .unwrap_or(LADDER.len() - 1);
    if LADDER[i] == n || i == 0 {
        return row_pvalue(jb, &QUANTILES[i]);
    }
    let (n0, n1) = (LADDER[i - 1] as f64, LADDER[i] as f64);
    let w = ((n as f64).ln() - n0.ln()) / (n1.ln() - n0.ln());
    let p0 = row_pvalue(jb, &QUANTILES[i - 1]);
    let p1 = row_pvalue(jb, &QUANTILES[i]);
    (p0 + w * (p1 - p0)).clamp(0.0, 1.0)
}
