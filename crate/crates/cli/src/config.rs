use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::ValueEnum;
use energy_calib::{Granularity, LevelGranularity, Transform};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CalibrateMr,
    CalibrateBs,
    CalibrateSp,
    CalibrateJoint,
    Simulate,
    Selftest,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::CalibrateMr => "calibrate-mr",
            Command::CalibrateBs => "calibrate-bs",
            Command::CalibrateSp => "calibrate-sp",
            Command::CalibrateJoint => "calibrate-joint",
            Command::Simulate => "simulate",
            Command::Selftest => "selftest",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Lognormal,
    Normal,
}

impl ModelKind {
    pub fn transform(self) -> Transform {
        match self {
            ModelKind::Lognormal => Transform::Log,
            ModelKind::Normal => Transform::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Text,
}

/// `label=path[:column]`; the column defaults to the label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub label: String,
    pub path: PathBuf,
    pub column: String,
}

impl FromStr for InputSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (label, rest) = s
            .split_once('=')
            .ok_or_else(|| format!("expected label=path[:column], got `{s}`"))?;
        if label.is_empty() || rest.is_empty() {
            return Err(format!("expected label=path[:column], got `{s}`"));
        }
        let (path, column) = match rest.rsplit_once(':') {
            Some((p, c)) if !p.is_empty() && !c.is_empty() => (p, c),
            _ => (rest, label),
        };
        Ok(InputSpec {
            label: label.to_string(),
            path: PathBuf::from(path),
            column: column.to_string(),
        })
    }
}

/// `spot=index`: two input labels calibrated together as a spot-prompt
/// member of a joint model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSpec {
    pub spot: String,
    pub index: String,
}

impl FromStr for PairSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once('=') {
            Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok(PairSpec {
                spot: a.to_string(),
                index: b.to_string(),
            }),
            _ => Err(format!("expected spot=index, got `{s}`")),
        }
    }
}

/// Everything a run depends on. Loadable from a JSON file; command-line
/// flags override the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub inputs: Vec<InputSpec>,
    pub model: ModelKind,
    pub level_granularity: LevelGranularity,
    pub vol_granularity: Granularity,
    pub corr_granularity: Granularity,
    pub alpha: f64,
    pub trim: f64,
    pub biased_vol: bool,
    pub pairs: Vec<PairSpec>,
    /// Widest acceptable correlation interval before a coarser granularity
    /// is suggested.
    pub max_ci_width: f64,
    pub sim_model: Option<PathBuf>,
    pub seed: u64,
    pub paths: usize,
    pub grid: Option<String>,
    pub roll_dates: Option<PathBuf>,
    pub store_draws: bool,
    pub paths_out: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            inputs: Vec::new(),
            model: ModelKind::Lognormal,
            level_granularity: LevelGranularity::MonthYear,
            vol_granularity: Granularity::Monthly,
            corr_granularity: Granularity::Flat,
            alpha: 0.05,
            trim: 0.0,
            biased_vol: false,
            pairs: Vec::new(),
            max_ci_width: 0.5,
            sim_model: None,
            seed: 0,
            paths: 1000,
            grid: None,
            roll_dates: None,
            store_draws: false,
            paths_out: None,
            out: None,
            format: Format::Json,
        }
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0, 1), got {}", self.alpha);
        }
        if !(0.0..=energy_calib::joint::MAX_TRIM).contains(&self.trim) {
            bail!(
                "trim must lie in [0, {}], got {}",
                energy_calib::joint::MAX_TRIM,
                self.trim
            );
        }
        if !(self.max_ci_width > 0.0) {
            bail!("max-ci-width must be positive, got {}", self.max_ci_width);
        }
        for input in &self.inputs {
            if !input.path.is_file() {
                bail!(
                    "input `{}`: file {} does not exist",
                    input.label,
                    input.path.display()
                );
            }
        }
        let mut labels: Vec<&str> = self.inputs.iter().map(|i| i.label.as_str()).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            bail!("input label `{}` given twice", w[0]);
        }
        for p in [&self.roll_dates, &self.sim_model].into_iter().flatten() {
            if !p.is_file() {
                bail!("file {} does not exist", p.display());
            }
        }
        Ok(())
    }
}
