use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::{Datelike, Duration, NaiveDateTime, Weekday};
use energy_calib::joint::{build_joint, granularity_check, JointOptions};
use energy_calib::mrcal::{calibrate, calibrate_bs, Buckets, MrOptions};
use energy_calib::simulate::{simulate, JointMember, Paths, SimModel, SimSpec};
use energy_calib::spotprompt::{calibrate_sp, SpOptions};
use energy_calib::timeseries::{parse_timestamp, read_csv};
use energy_calib::{FactorSeries, PriceSeries, Transform};
use log::info;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{InputSpec, RunConfig};
use crate::report::*;

pub struct Loaded {
    pub series: PriceSeries,
    pub digest: InputDigest,
}

pub fn load(input: &InputSpec) -> Result<Loaded> {
    let bytes =
        std::fs::read(&input.path).with_context(|| format!("reading {}", input.path.display()))?;
    let sha256: String = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    let series = read_csv(&bytes[..], &input.column, input.label.clone())
        .with_context(|| format!("input `{}` ({})", input.label, input.path.display()))?;
    let obs = series.observations();
    let digest = InputDigest {
        label: input.label.clone(),
        path: input.path.clone(),
        column: input.column.clone(),
        sha256,
        observations: obs.len(),
        first: obs[0].timestamp,
        last: obs[obs.len() - 1].timestamp,
    };
    Ok(Loaded { series, digest })
}

/// Loads every input, reading files concurrently but keeping input order.
pub fn load_all(cfg: &RunConfig) -> Result<Vec<Loaded>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .inputs
            .iter()
            .map(|i| s.spawn(move || load(i)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("loader thread panicked"))
            .collect()
    })
}

fn mr_options(cfg: &RunConfig) -> MrOptions {
    MrOptions {
        buckets: Buckets {
            level: cfg.level_granularity,
            vol: cfg.vol_granularity,
        },
        unbiased: !cfg.biased_vol,
        alpha: cfg.alpha,
    }
}

fn last_state(series: &PriceSeries, t: Transform) -> f64 {
    t.apply(series.last().value)
}

fn need_inputs(loaded: &[Loaded], n: usize, what: &str) -> Result<()> {
    if loaded.len() < n {
        bail!(
            "{what} needs at least {n} --input series, got {}",
            loaded.len()
        );
    }
    Ok(())
}

fn run_mr(series: &PriceSeries, cfg: &RunConfig) -> Result<MrResult> {
    let t = cfg.model.transform();
    let cal = calibrate(series, t, &mr_options(cfg))
        .with_context(|| format!("calibrating `{}`", series.label))?;
    info!("{}: a = {}", series.label, cal.params.a);
    Ok(MrResult {
        label: series.label.clone(),
        params: cal.params,
        fit: cal.fit,
        diagnostics: cal.diagnostics,
        last_state: last_state(series, t),
    })
}

fn mr_with_factors(series: &PriceSeries, cfg: &RunConfig) -> Result<(MrResult, FactorSeries)> {
    let t = cfg.model.transform();
    let cal = calibrate(series, t, &mr_options(cfg))
        .with_context(|| format!("calibrating `{}`", series.label))?;
    let r = MrResult {
        label: series.label.clone(),
        params: cal.params,
        fit: cal.fit,
        diagnostics: cal.diagnostics,
        last_state: last_state(series, t),
    };
    Ok((r, cal.factors))
}

fn sp_options(cfg: &RunConfig) -> Result<SpOptions> {
    let exclude_rolls = match &cfg.roll_dates {
        Some(p) => read_dates(p)?,
        None => Vec::new(),
    };
    Ok(SpOptions {
        mr: mr_options(cfg),
        rho: cfg.corr_granularity,
        exclude_rolls,
    })
}

fn run_sp(
    spot: &PriceSeries,
    index: &PriceSeries,
    opts: &SpOptions,
) -> Result<(SpResult, Vec<FactorSeries>, Vec<String>)> {
    let cal = calibrate_sp(spot, index, opts)
        .with_context(|| format!("spot-prompt calibration of `{}`", spot.label))?;
    let r = SpResult {
        label: spot.label.clone(),
        params: cal.params,
        quotient_fit: cal.quotient.fit,
        quotient_diagnostics: cal.quotient.diagnostics,
        spot_fit: cal.spot_fit,
        index_fit: cal.index_fit,
        last_spot: spot.last().value,
        last_index: index.last().value,
    };
    Ok((r, vec![cal.spot_factor, cal.index_factor], cal.warnings))
}

pub fn calibrate_mr_cmd(cfg: &RunConfig, loaded: &[Loaded]) -> Result<(Results, Vec<String>)> {
    need_inputs(loaded, 1, "calibrate-mr")?;
    let series: Result<Vec<MrResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = loaded
            .iter()
            .map(|l| s.spawn(move || run_mr(&l.series, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("calibration thread panicked"))
            .collect()
    });
    let series = series?;
    let warnings = series
        .iter()
        .flat_map(|r| {
            r.diagnostics
                .warnings
                .iter()
                .map(move |w| format!("{}: {w}", r.label))
        })
        .collect();
    Ok((Results::Mr { series }, warnings))
}

pub fn calibrate_bs_cmd(cfg: &RunConfig, loaded: &[Loaded]) -> Result<(Results, Vec<String>)> {
    need_inputs(loaded, 1, "calibrate-bs")?;
    let t = cfg.model.transform();
    let mut series = Vec::new();
    for l in loaded {
        let cal = calibrate_bs(&l.series, t, &mr_options(cfg))
            .with_context(|| format!("calibrating `{}`", l.series.label))?;
        series.push(BsResult {
            label: l.series.label.clone(),
            params: cal.params,
            fit: cal.fit,
            last_state: last_state(&l.series, t),
        });
    }
    Ok((Results::Bs { series }, Vec::new()))
}

pub fn calibrate_sp_cmd(cfg: &RunConfig, loaded: &[Loaded]) -> Result<(Results, Vec<String>)> {
    if loaded.len() != 2 {
        bail!(
            "calibrate-sp needs exactly two --input series (spot, then index), got {}",
            loaded.len()
        );
    }
    let (r, _, warnings) = run_sp(&loaded[0].series, &loaded[1].series, &sp_options(cfg)?)?;
    Ok((Results::Sp(r), warnings))
}

pub fn calibrate_joint_cmd(cfg: &RunConfig, loaded: &[Loaded]) -> Result<(Results, Vec<String>)> {
    need_inputs(loaded, 2, "calibrate-joint")?;
    let find = |label: &str| -> Result<usize> {
        loaded
            .iter()
            .position(|l| l.series.label == label)
            .ok_or_else(|| anyhow!("--pair refers to unknown input `{label}`"))
    };
    // members in input order; an index series is folded into its spot's member
    let mut paired_index = std::collections::BTreeMap::new();
    for p in &cfg.pairs {
        let (s, i) = (find(&p.spot)?, find(&p.index)?);
        if s == i
            || paired_index.insert(s, i).is_some()
            || paired_index.values().filter(|v| **v == i).count() > 1
        {
            bail!("--pair {}={} reuses an input", p.spot, p.index);
        }
    }
    let index_inputs: Vec<usize> = paired_index.values().copied().collect();
    let sp_opts = sp_options(cfg)?;
    let mut members = Vec::new();
    let mut sim_members = Vec::new();
    let mut factors = Vec::new();
    let mut warnings = Vec::new();
    for (k, l) in loaded.iter().enumerate() {
        if index_inputs.contains(&k) {
            continue;
        }
        match paired_index.get(&k) {
            Some(&i) => {
                let (r, f, w) = run_sp(&l.series, &loaded[i].series, &sp_opts)?;
                warnings.extend(w.into_iter().map(|w| format!("{}: {w}", r.label)));
                factors.extend(f);
                sim_members.push(JointMember::Sp {
                    label: r.label.clone(),
                    params: r.params.clone(),
                    spot0: r.last_spot,
                    index0: r.last_index,
                });
                members.push(MemberResult::Sp(r));
            }
            None => {
                let (r, f) = mr_with_factors(&l.series, cfg)?;
                warnings.extend(
                    r.diagnostics
                        .warnings
                        .iter()
                        .map(|w| format!("{}: {w}", r.label)),
                );
                factors.push(f);
                sim_members.push(JointMember::Mr {
                    label: r.label.clone(),
                    params: r.params.clone(),
                    x0: r.last_state,
                });
                members.push(MemberResult::Mr(r));
            }
        }
    }
    let opts = JointOptions {
        granularity: cfg.corr_granularity,
        alpha: cfg.alpha,
        trim_pct: cfg.trim,
    };
    let model = build_joint(&factors, &opts).context("joint correlation estimation")?;
    let recommendation = granularity_check(&model, cfg.max_ci_width);
    let (correlation, notes) = model.to_corr_structure();
    warnings.extend(model.diagnostics.iter().cloned());
    warnings.extend(notes);
    if let Some(n) = &recommendation.note {
        warnings.push(n.clone());
    }
    Ok((
        Results::Joint(JointResult {
            members,
            model,
            recommendation,
            simulation: SimModel::Joint {
                members: sim_members,
                correlation,
            },
        }),
        warnings,
    ))
}

/// One date per line; a first line that is not a date is taken as a header.
pub fn read_dates(path: &Path) -> Result<Vec<NaiveDateTime>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cell = line.split(',').next().unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        match parse_timestamp(cell) {
            Some(t) => out.push(t),
            None if i == 0 => {}
            None => bail!(
                "{}: line {}: unparseable date `{cell}`",
                path.display(),
                i + 1
            ),
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// `start:end:freq`, end inclusive.
pub fn parse_grid(spec: &str) -> Result<Vec<NaiveDateTime>> {
    let (span, freq) = spec
        .rsplit_once(':')
        .ok_or_else(|| anyhow!("grid must look like start:end:freq, got `{spec}`"))?;
    let (start, end) = span
        .match_indices(':')
        .find_map(|(i, _)| {
            Some((
                parse_timestamp(&span[..i])?,
                parse_timestamp(&span[i + 1..])?,
            ))
        })
        .ok_or_else(|| anyhow!("grid `{spec}`: cannot read start and end timestamps"))?;
    if end < start {
        bail!("grid `{spec}`: end precedes start");
    }
    let step = |t: NaiveDateTime| -> Result<NaiveDateTime> {
        Ok(match freq {
            "hourly" => t + Duration::hours(1),
            "daily" => t + Duration::days(1),
            "weekly" => t + Duration::weeks(1),
            "weekdays" => {
                let mut n = t + Duration::days(1);
                while matches!(n.weekday(), Weekday::Sat | Weekday::Sun) {
                    n += Duration::days(1);
                }
                n
            }
            "monthly" => t
                .checked_add_months(chrono::Months::new(1))
                .ok_or_else(|| anyhow!("grid overflow"))?,
            other => {
                let (n, unit) = other.split_at(other.len().saturating_sub(1));
                let n: i64 = n
                    .parse()
                    .map_err(|_| anyhow!("unknown grid frequency `{other}`"))?;
                if n <= 0 {
                    bail!("grid frequency must be positive, got `{other}`");
                }
                match unit {
                    "h" => t + Duration::hours(n),
                    "d" => t + Duration::days(n),
                    _ => bail!("unknown grid frequency `{other}`"),
                }
            }
        })
    };
    let mut t = start;
    if freq == "weekdays" {
        while matches!(t.weekday(), Weekday::Sat | Weekday::Sun) {
            t += Duration::days(1);
        }
    }
    let mut grid = Vec::new();
    while t <= end {
        grid.push(t);
        t = step(t)?;
    }
    if grid.is_empty() {
        bail!("grid `{spec}` is empty");
    }
    Ok(grid)
}

/// A model document: a bare model, a full simulation spec, or a calibration
/// report whose results can be simulated.
fn model_from_json(v: Value) -> Result<(SimModel, Option<SimSpec>)> {
    if v.get("tool").is_some() {
        let report: Report = serde_json::from_value(v).context("reading calibration report")?;
        let model = match report.results {
            Results::Mr { series } => {
                let r = series
                    .into_iter()
                    .next()
                    .ok_or_else(|| anyhow!("report has no series"))?;
                SimModel::MrRealWorld {
                    params: r.params,
                    x0: r.last_state,
                }
            }
            Results::Bs { series } => {
                let r = series
                    .into_iter()
                    .next()
                    .ok_or_else(|| anyhow!("report has no series"))?;
                SimModel::Bs {
                    params: r.params,
                    x0: r.last_state,
                }
            }
            Results::Sp(r) => SimModel::SpRealWorld {
                params: r.params,
                spot0: r.last_spot,
                index0: r.last_index,
            },
            Results::Joint(j) => j.simulation,
            _ => bail!("report of command `{}` holds no model", report.command),
        };
        return Ok((model, None));
    }
    if v.get("grid").is_some() {
        let spec: SimSpec = serde_json::from_value(v).context("reading simulation spec")?;
        return Ok((spec.model.clone(), Some(spec)));
    }
    Ok((serde_json::from_value(v).context("reading model")?, None))
}

pub fn simulate_cmd(cfg: &RunConfig, loaded: &[Loaded]) -> Result<(Results, Vec<String>)> {
    let path = cfg
        .sim_model
        .as_ref()
        .ok_or_else(|| anyhow!("simulate needs --sim-model"))?;
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let (mut model, file_spec) = model_from_json(v)?;
    let mut warnings = Vec::new();

    // a forward curve input and roll dates override the model's curve
    if let SimModel::MrRiskNeutral { curve, .. } | SimModel::SpRiskNeutral { curve, .. } =
        &mut model
    {
        if let Some(l) = loaded.first() {
            *curve = energy_calib::simulate::ForwardCurve::from_series(&l.series)?;
        }
        if let Some(p) = &cfg.roll_dates {
            *curve = curve.with_dates(&read_dates(p)?)?;
        }
    } else if !loaded.is_empty() || cfg.roll_dates.is_some() {
        warnings
            .push("inputs and roll dates only apply to risk-neutral models; ignored".to_string());
    }

    let grid = match (&cfg.grid, &file_spec) {
        (Some(g), _) => parse_grid(g)?,
        (None, Some(s)) => s.grid.clone(),
        (None, None) => bail!("simulate needs --grid"),
    };
    let spec = SimSpec {
        model,
        grid,
        n_paths: cfg.paths,
        seed: cfg.seed,
        store_draws: cfg.store_draws,
    };
    let paths = simulate(&spec).context("simulation")?;
    let files = match &cfg.paths_out {
        Some(dir) => write_paths(dir, &paths)?,
        None => Vec::new(),
    };
    let sets = paths
        .sets
        .iter()
        .map(|s| {
            let cols: Vec<(f64, f64)> = (0..s.n_times).map(|t| s.mean_and_se(t)).collect();
            SetSummary {
                label: s.label.clone(),
                n_times: s.n_times,
                mean: cols.iter().map(|c| c.0).collect(),
                stderr: (paths.n_paths > 1).then(|| cols.iter().map(|c| c.1).collect()),
            }
        })
        .collect();
    Ok((
        Results::Simulation(SimResult {
            grid: paths.grid.clone(),
            n_paths: paths.n_paths,
            seed: paths.seed,
            sets,
            notes: paths.notes.clone(),
            files,
        }),
        warnings,
    ))
}

/// One CSV per path set: a row per path, a column per time.
fn write_paths(dir: &Path, paths: &Paths) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    for s in &paths.sets {
        let file = dir.join(format!("{}.csv", s.label.replace([':', '/'], "_")));
        let mut w =
            csv::Writer::from_path(&file).with_context(|| format!("writing {}", file.display()))?;
        let n = paths.grid.len();
        let header: Vec<String> = (0..s.n_times)
            .map(|t| {
                if s.n_times == n {
                    paths.grid[t].to_string()
                } else if s.n_times + 1 == n {
                    paths.grid[t + 1].to_string()
                } else {
                    t.to_string()
                }
            })
            .collect();
        w.write_record(std::iter::once("path".to_string()).chain(header))?;
        for p in 0..paths.n_paths {
            w.write_record(
                std::iter::once(p.to_string()).chain(s.path(p).iter().map(|v| v.to_string())),
            )?;
        }
        w.flush()?;
        files.push(file);
    }
    Ok(files)
}
