use std::fmt::Write;
use std::path::PathBuf;

use chrono::NaiveDateTime;
use energy_calib::joint::{JointModel, Recommendation};
use energy_calib::mrcal::{BsParams, MrDiagnostics};
use energy_calib::simulate::SimModel;
use energy_calib::spotprompt::SPParams;
use energy_calib::stats::FitReport;
use energy_calib::MRParams;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Command, RunConfig};

pub const TOOL: &str = "energy-calib";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub inputs: Vec<InputDigest>,
    /// Term structures are piecewise constant between bucket boundaries.
    pub interpolation: String,
    pub results: Results,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub label: String,
    pub path: PathBuf,
    pub column: String,
    pub sha256: String,
    pub observations: usize,
    pub first: NaiveDateTime,
    pub last: NaiveDateTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Results {
    Mr { series: Vec<MrResult> },
    Bs { series: Vec<BsResult> },
    Sp(SpResult),
    Joint(JointResult),
    Simulation(SimResult),
    Selftest(SelftestResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrResult {
    pub label: String,
    pub params: MRParams,
    pub fit: Option<FitReport>,
    pub diagnostics: MrDiagnostics,
    /// Transformed value of the last observation, the natural simulation start.
    pub last_state: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsResult {
    pub label: String,
    pub params: BsParams,
    pub fit: Option<FitReport>,
    pub last_state: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpResult {
    pub label: String,
    pub params: SPParams,
    pub quotient_fit: Option<FitReport>,
    pub quotient_diagnostics: MrDiagnostics,
    pub spot_fit: Option<FitReport>,
    pub index_fit: Option<FitReport>,
    pub last_spot: f64,
    pub last_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum MemberResult {
    Mr(MrResult),
    Sp(SpResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointResult {
    pub members: Vec<MemberResult>,
    pub model: JointModel,
    pub recommendation: Recommendation,
    /// Ready-to-run joint model built from the members and correlations.
    pub simulation: SimModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub label: String,
    pub n_times: usize,
    pub mean: Vec<f64>,
    /// `null` when fewer than two paths were simulated.
    pub stderr: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub grid: Vec<NaiveDateTime>,
    pub n_paths: usize,
    pub seed: u64,
    pub sets: Vec<SetSummary>,
    pub notes: Vec<String>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestResult {
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn to_json(&self) -> anyhow::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Indented key-value rendering of the same document as the JSON form.
    pub fn to_text(&self) -> anyhow::Result<String> {
        let v = serde_json::to_value(self)?;
        let mut out = String::new();
        render(&v, 0, &mut out);
        Ok(out)
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("null".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(a) if a.is_empty() => Some("[]".into()),
        Value::Object(o) if o.is_empty() => Some("{}".into()),
        _ => None,
    }
}

fn render(v: &Value, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    match v {
        Value::Object(map) => {
            for (k, val) in map {
                match scalar(val) {
                    Some(s) => writeln!(out, "{pad}{k}: {s}").unwrap(),
                    None => {
                        if let Value::Array(items) = val {
                            if let Some(line) = inline(items) {
                                writeln!(out, "{pad}{k}: {line}").unwrap();
                                continue;
                            }
                        }
                        writeln!(out, "{pad}{k}:").unwrap();
                        render(val, indent + 2, out);
                    }
                }
            }
        }
        Value::Array(items) => {
            for item in items {
                match scalar(item) {
                    Some(s) => writeln!(out, "{pad}- {s}").unwrap(),
                    None => {
                        writeln!(out, "{pad}-").unwrap();
                        render(item, indent + 2, out);
                    }
                }
            }
        }
        other => writeln!(out, "{pad}{}", scalar(other).unwrap_or_default()).unwrap(),
    }
}

/// Arrays of scalars on one line.
fn inline(items: &[Value]) -> Option<String> {
    let parts: Option<Vec<String>> = items
        .iter()
        .map(|v| match v {
            Value::Array(_) | Value::Object(_) => None,
            other => scalar(other),
        })
        .collect();
    parts.map(|p| format!("[{}]", p.join(", ")))
}

/// Machine-readable error document.
pub fn error_json(command: Option<Command>, err: &anyhow::Error) -> String {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<energy_calib::Error>())
        .map_or("usage", |e| e.kind());
    let causes: Vec<String> = err.chain().skip(1).map(|e| e.to_string()).collect();
    let doc = serde_json::json!({
        "error": {
            "tool": TOOL,
            "version": env!("CARGO_PKG_VERSION"),
            "command": command.map(|c| c.to_string()),
            "kind": kind,
            "message": err.to_string(),
            "causes": causes,
        }
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("error document serializes");
    s.push('\n');
    s
}
