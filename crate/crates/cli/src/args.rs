use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use energy_calib::{Granularity, LevelGranularity};

use crate::config::{Command, Format, InputSpec, ModelKind, PairSpec, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "energy-calib",
    version,
    about = "Calibrate and simulate mean-reverting energy price models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// One-factor mean-reversion calibration of each input series
    CalibrateMr(Flags),
    /// Drift-only (zero mean-reversion) calibration of each input series
    CalibrateBs(Flags),
    /// Two-factor spot-prompt calibration; inputs are spot then index
    CalibrateSp(Flags),
    /// Factor calibration of every input plus the correlation structure
    CalibrateJoint(Flags),
    /// Monte Carlo paths from a model file
    Simulate(Flags),
    /// Built-in invariant checks
    Selftest(Flags),
}

impl Cmd {
    pub fn split(self) -> (Command, Flags) {
        match self {
            Cmd::CalibrateMr(f) => (Command::CalibrateMr, f),
            Cmd::CalibrateBs(f) => (Command::CalibrateBs, f),
            Cmd::CalibrateSp(f) => (Command::CalibrateSp, f),
            Cmd::CalibrateJoint(f) => (Command::CalibrateJoint, f),
            Cmd::Simulate(f) => (Command::Simulate, f),
            Cmd::Selftest(f) => (Command::Selftest, f),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON run configuration; flags given here override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input series as label=path[:column] (repeatable)
    #[arg(long = "input")]
    pub inputs: Vec<InputSpec>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// month-year or calendar-month
    #[arg(long)]
    pub level_granularity: Option<LevelGranularity>,
    /// monthly, seasonal or flat
    #[arg(long)]
    pub vol_granularity: Option<Granularity>,
    /// monthly, seasonal or flat
    #[arg(long)]
    pub corr_granularity: Option<Granularity>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fraction trimmed from each tail of every factor series
    #[arg(long)]
    pub trim: Option<f64>,
    /// Report volatilities with the 1/N normalization
    #[arg(long)]
    pub biased_vol: bool,
    /// Spot-prompt member of a joint calibration as spot=index (repeatable)
    #[arg(long = "pair")]
    pub pairs: Vec<PairSpec>,
    #[arg(long)]
    pub max_ci_width: Option<f64>,
    /// Model JSON, or a calibration report, to simulate from
    #[arg(long)]
    pub sim_model: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    /// start:end:freq with freq one of hourly, daily, weekdays, weekly,
    /// monthly, <n>h or <n>d
    #[arg(long)]
    pub grid: Option<String>,
    /// File with one roll date per line
    #[arg(long)]
    pub roll_dates: Option<PathBuf>,
    /// Keep the standardized draws of the simulation
    #[arg(long)]
    pub store_draws: bool,
    /// Directory for per-set CSV files of simulated paths
    #[arg(long)]
    pub paths_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Flags {
    pub fn apply(self, cfg: &mut RunConfig) {
        if !self.inputs.is_empty() {
            cfg.inputs = self.inputs;
        }
        if !self.pairs.is_empty() {
            cfg.pairs = self.pairs;
        }
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f {
                    cfg.$f = v;
                }
            )*};
        }
        set!(
            model,
            level_granularity,
            vol_granularity,
            corr_granularity,
            alpha,
            trim,
            max_ci_width,
            seed,
            paths,
            format
        );
        macro_rules! set_opt {
            ($($f:ident),*) => {$(
                if self.$f.is_some() {
                    cfg.$f = self.$f;
                }
            )*};
        }
        set_opt!(sim_model, grid, roll_dates, paths_out, out);
        cfg.biased_vol |= self.biased_vol;
        cfg.store_draws |= self.store_draws;
    }
}
