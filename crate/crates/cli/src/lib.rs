//! Command-line front end for `energy-calib`.
//!
//! Every command produces a [`report::Report`]: tool version, the effective
//! configuration, SHA-256 digests of the inputs, and the results. Output is
//! deterministic for a fixed configuration and fixed input bytes.

pub mod args;
pub mod commands;
pub mod config;
pub mod report;
pub mod selftest;

use std::ffi::OsString;

use anyhow::{Context, Result};
use clap::Parser;

use args::Cli;
use config::{Command, Format, RunConfig};
use report::{Report, Results};

/// Result of a run: process exit code and the text for stdout and stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let loaded = commands::load_all(cfg)?;
    let (results, warnings) = match command {
        Command::CalibrateMr => commands::calibrate_mr_cmd(cfg, &loaded)?,
        Command::CalibrateBs => commands::calibrate_bs_cmd(cfg, &loaded)?,
        Command::CalibrateSp => commands::calibrate_sp_cmd(cfg, &loaded)?,
        Command::CalibrateJoint => commands::calibrate_joint_cmd(cfg, &loaded)?,
        Command::Simulate => commands::simulate_cmd(cfg, &loaded)?,
        Command::Selftest => (Results::Selftest(selftest::run()), Vec::new()),
    };
    let mut config = cfg.clone();
    config.command = Some(command);
    Ok(Report {
        tool: report::TOOL.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command,
        config,
        inputs: loaded.into_iter().map(|l| l.digest).collect(),
        interpolation: "step".to_string(),
        results,
        warnings,
    })
}

fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    }
}

/// Parses `args` (program name first), runs the command and renders the
/// report. With `--out` the report goes to that file and stdout is empty.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            return Outcome {
                code: 0,
                stdout: e.to_string(),
                stderr: String::new(),
            };
        }
        Err(e) => {
            let err = anyhow::anyhow!(e.to_string().trim().to_string());
            return Outcome {
                code: 2,
                stdout: String::new(),
                stderr: report::error_json(None, &err),
            };
        }
    };
    let (command, flags) = cli.command.split();
    let result = (|| -> Result<(Report, RunConfig)> {
        let mut cfg = match &flags.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        flags.apply(&mut cfg);
        let report = execute(command, &cfg)?;
        Ok((report, cfg))
    })();
    let fail = |err: anyhow::Error| Outcome {
        code: 1,
        stdout: String::new(),
        stderr: report::error_json(Some(command), &err),
    };
    let (report, cfg) = match result {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let text = match render(&report, cfg.format) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let code = match &report.results {
        Results::Selftest(s) if s.failed > 0 => 1,
        _ => 0,
    };
    match &cfg.out {
        Some(path) => match std::fs::write(path, &text)
            .with_context(|| format!("writing {}", path.display()))
        {
            Ok(()) => Outcome {
                code,
                stdout: String::new(),
                stderr: String::new(),
            },
            Err(e) => fail(e),
        },
        None => Outcome {
            code,
            stdout: text,
            stderr: String::new(),
        },
    }
}
