//! Joint model: pairwise factor correlations per calendar bucket.
//!
//! Each pair of factor series is aligned on its own common timestamps
//! (pairwise-complete), so a gap in one series never costs data in the
//! others. The resulting matrices need not be positive semidefinite; the
//! smallest eigenvalue of every complete bucket matrix is recorded.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDateTime};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mrcal::{FactorPoint, FactorSeries};
use crate::simulate::CorrStructure;
use crate::stats::{corr_ci, pearson, Interval};
use crate::timeseries::Granularity;

/// Fewest aligned points for a bucket correlation.
pub const MIN_OVERLAP: usize = 8;
pub const MAX_TRIM: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorRole {
    /// Spot factor of a spot-prompt member.
    Spot,
    /// Index factor of a spot-prompt member.
    Index,
    /// Sole factor of a mean-reverting or Black-Scholes member.
    Single,
}

impl FactorRole {
    pub fn of_label(label: &str) -> Self {
        if label.ends_with(":spot") {
            FactorRole::Spot
        } else if label.ends_with(":index") {
            FactorRole::Index
        } else {
            FactorRole::Single
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorInfo {
    pub label: String,
    pub role: FactorRole,
    pub n: usize,
    pub trimmed: Vec<NaiveDateTime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub first: String,
    pub second: String,
    pub bucket: u32,
    pub n: usize,
    pub ci: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointOptions {
    pub granularity: Granularity,
    pub alpha: f64,
    pub trim_pct: f64,
}

impl Default for JointOptions {
    fn default() -> Self {
        JointOptions {
            granularity: Granularity::Flat,
            alpha: 0.05,
            trim_pct: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    pub factors: Vec<FactorInfo>,
    pub granularity: Granularity,
    pub alpha: f64,
    pub trim_pct: f64,
    pub corr: Vec<PairCorrelation>,
    /// Smallest eigenvalue of each bucket matrix with every pair present.
    #[serde(with = "crate::serde_keys")]
    pub min_eigenvalue: BTreeMap<u32, f64>,
    pub diagnostics: Vec<String>,
}

impl JointModel {
    pub fn labels(&self) -> Vec<String> {
        self.factors.iter().map(|f| f.label.clone()).collect()
    }

    pub fn get(&self, a: &str, b: &str, bucket: u32) -> Option<&PairCorrelation> {
        self.corr.iter().find(|c| {
            c.bucket == bucket
                && ((c.first == a && c.second == b) || (c.first == b && c.second == a))
        })
    }

    /// Correlation matrix of a bucket in factor order; `None` where a pair
    /// was not estimated.
    pub fn matrix(&self, bucket: u32) -> Vec<Vec<Option<f64>>> {
        let n = self.factors.len();
        let mut m = vec![vec![None; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Some(1.0);
        }
        let idx: BTreeMap<&str, usize> = self
            .factors
            .iter()
            .enumerate()
            .map(|(i, f)| (f.label.as_str(), i))
            .collect();
        for c in self.corr.iter().filter(|c| c.bucket == bucket) {
            let (i, j) = (idx[c.first.as_str()], idx[c.second.as_str()]);
            m[i][j] = Some(c.ci.estimate);
            m[j][i] = Some(c.ci.estimate);
        }
        m
    }

    /// Bucket matrices for simulation. Pairs without an estimate are set
    /// to zero and reported.
    pub fn to_corr_structure(&self) -> (CorrStructure, Vec<String>) {
        let mut notes = Vec::new();
        let mut matrices = BTreeMap::new();
        let labels = self.labels();
        for b in self.granularity.buckets() {
            let m = self.matrix(b);
            if self.corr.iter().all(|c| c.bucket != b) && labels.len() > 1 {
                notes.push(format!(
                    "bucket {}: no correlations estimated",
                    self.granularity.label(b)
                ));
                continue;
            }
            let mut rows = Vec::with_capacity(m.len());
            for (i, r) in m.iter().enumerate() {
                rows.push(
                    r.iter()
                        .enumerate()
                        .map(|(j, v)| {
                            v.unwrap_or_else(|| {
                                if i < j {
                                    notes.push(format!(
                                        "bucket {}: {} / {} not estimated, set to 0",
                                        self.granularity.label(b),
                                        labels[i],
                                        labels[j]
                                    ));
                                }
                                0.0
                            })
                        })
                        .collect(),
                );
            }
            matrices.insert(b, rows);
        }
        (
            CorrStructure {
                granularity: self.granularity,
                labels,
                matrices,
            },
            notes,
        )
    }
}

fn trim_count(pct: f64, n: usize) -> usize {
    // guard against products like 0.29 * 100 = 28.999999999999996
    (pct * n as f64 + 1e-9).floor() as usize
}

/// Removes the `⌊pct·n⌋` smallest and largest values; among equal values the
/// earlier timestamp goes first. Returns the kept series and the removed
/// timestamps in time order.
pub fn trim_outliers(
    series: &FactorSeries,
    pct: f64,
) -> Result<(FactorSeries, Vec<NaiveDateTime>)> {
    if !(0.0..=MAX_TRIM).contains(&pct) {
        return Err(invalid(format!(
            "trim fraction must lie in [0, {MAX_TRIM}], got {pct}"
        )));
    }
    let n = series.len();
    let k = trim_count(pct, n);
    if k == 0 {
        return Ok((series.clone(), Vec::new()));
    }
    let pts = &series.points;
    let mut asc: Vec<usize> = (0..n).collect();
    asc.sort_by(|&i, &j| {
        pts[i]
            .value
            .total_cmp(&pts[j].value)
            .then(pts[i].timestamp.cmp(&pts[j].timestamp))
    });
    let mut desc: Vec<usize> = (0..n).collect();
    desc.sort_by(|&i, &j| {
        pts[j]
            .value
            .total_cmp(&pts[i].value)
            .then(pts[i].timestamp.cmp(&pts[j].timestamp))
    });
    let removed: BTreeSet<NaiveDateTime> = asc[..k]
        .iter()
        .chain(&desc[..k])
        .map(|&i| pts[i].timestamp)
        .collect();
    let points: Vec<FactorPoint> = pts
        .iter()
        .filter(|p| !removed.contains(&p.timestamp))
        .copied()
        .collect();
    Ok((
        FactorSeries {
            label: series.label.clone(),
            points,
        },
        removed.into_iter().collect(),
    ))
}

struct PairResult {
    corr: Vec<PairCorrelation>,
    notes: Vec<String>,
    max_bucket_n: usize,
}

fn correlate_pair(
    a: &FactorSeries,
    b: &FactorSeries,
    drop: &BTreeSet<NaiveDateTime>,
    opts: &JointOptions,
) -> Result<PairResult> {
    let bv: BTreeMap<NaiveDateTime, f64> =
        b.points.iter().map(|p| (p.timestamp, p.value)).collect();
    let mut by_bucket: BTreeMap<u32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for p in &a.points {
        if drop.contains(&p.timestamp) {
            continue;
        }
        if let Some(&y) = bv.get(&p.timestamp) {
            let e = by_bucket
                .entry(opts.granularity.bucket(p.timestamp.month()))
                .or_default();
            e.0.push(p.value);
            e.1.push(y);
        }
    }
    let mut out = PairResult {
        corr: Vec::new(),
        notes: Vec::new(),
        max_bucket_n: 0,
    };
    let g = opts.granularity;
    for b_id in g.buckets() {
        let (x, y) = by_bucket.remove(&b_id).unwrap_or_default();
        let n = x.len();
        out.max_bucket_n = out.max_bucket_n.max(n);
        if n < MIN_OVERLAP {
            out.notes.push(format!(
                "{} / {} bucket {}: {n} common points, need {MIN_OVERLAP}; omitted",
                a.label,
                b.label,
                g.label(b_id)
            ));
            continue;
        }
        let Some(rho) = pearson(&x, &y) else {
            out.notes.push(format!(
                "{} / {} bucket {}: zero variance; omitted",
                a.label,
                b.label,
                g.label(b_id)
            ));
            continue;
        };
        let ci = if rho.abs() >= 1.0 {
            Interval {
                estimate: rho,
                lower: rho,
                upper: rho,
                alpha: opts.alpha,
            }
        } else {
            corr_ci(rho, n, opts.alpha)?
        };
        out.corr.push(PairCorrelation {
            first: a.label.clone(),
            second: b.label.clone(),
            bucket: b_id,
            n,
            ci,
        });
    }
    Ok(out)
}

pub fn build_joint(factors: &[FactorSeries], opts: &JointOptions) -> Result<JointModel> {
    if factors.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: factors.len(),
        });
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(invalid(format!(
            "alpha must lie in (0, 1), got {}",
            opts.alpha
        )));
    }
    let mut seen = BTreeSet::new();
    for f in factors {
        if !seen.insert(f.label.as_str()) {
            return Err(invalid(format!("duplicate factor label `{}`", f.label)));
        }
    }
    let trimmed: Vec<(FactorSeries, BTreeSet<NaiveDateTime>)> = factors
        .iter()
        .map(|f| trim_outliers(f, opts.trim_pct).map(|(s, r)| (s, r.into_iter().collect())))
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..factors.len())
        .flat_map(|i| (i + 1..factors.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<PairResult> = pairs
        .par_iter()
        .map(|&(i, j)| {
            // a point trimmed from either series is dropped from the pair
            let drop: BTreeSet<NaiveDateTime> =
                trimmed[i].1.union(&trimmed[j].1).copied().collect();
            correlate_pair(&trimmed[i].0, &trimmed[j].0, &drop, opts)
        })
        .collect::<Result<_>>()?;

    let mut corr = Vec::new();
    let mut diagnostics = Vec::new();
    let mut best = 0;
    for r in results {
        corr.extend(r.corr);
        diagnostics.extend(r.notes);
        best = best.max(r.max_bucket_n);
    }
    if corr.is_empty() {
        return Err(Error::InsufficientData {
            needed: MIN_OVERLAP,
            got: best,
        });
    }
    let mut model = JointModel {
        factors: factors
            .iter()
            .zip(&trimmed)
            .map(|(f, (_, r))| FactorInfo {
                label: f.label.clone(),
                role: FactorRole::of_label(&f.label),
                n: f.len(),
                trimmed: r.iter().copied().collect(),
            })
            .collect(),
        granularity: opts.granularity,
        alpha: opts.alpha,
        trim_pct: opts.trim_pct,
        corr,
        min_eigenvalue: BTreeMap::new(),
        diagnostics,
    };
    let n = factors.len();
    for b in opts.granularity.buckets() {
        let m = model.matrix(b);
        if m.iter().flatten().all(|v| v.is_some()) {
            let dm = DMatrix::from_fn(n, n, |i, j| m[i][j].unwrap_or(0.0));
            let min = dm.symmetric_eigen().eigenvalues.min();
            if min < 0.0 {
                model.diagnostics.push(format!(
                    "bucket {}: correlation matrix not positive semidefinite (min eigenvalue {min:.3e})",
                    opts.granularity.label(b)
                ));
            }
            model.min_eigenvalue.insert(b, min);
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WideInterval {
    pub first: String,
    pub second: String,
    pub bucket: String,
    pub n: usize,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Recommendation {
    pub flagged: Vec<WideInterval>,
    pub suggestion: Option<Granularity>,
    pub note: Option<String>,
}

impl Recommendation {
    pub fn is_empty(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Flags correlations whose interval is wider than `max_width` and, if any,
/// suggests the next coarser granularity.
pub fn granularity_check(model: &JointModel, max_width: f64) -> Recommendation {
    let flagged: Vec<WideInterval> = model
        .corr
        .iter()
        .filter(|c| c.ci.width() > max_width)
        .map(|c| WideInterval {
            first: c.first.clone(),
            second: c.second.clone(),
            bucket: model.granularity.label(c.bucket),
            n: c.n,
            width: c.ci.width(),
        })
        .collect();
    if flagged.is_empty() {
        return Recommendation::default();
    }
    let suggestion = model.granularity.coarser();
    let note = match suggestion {
        Some(g) => format!("recalibrate with {g} granularity"),
        None => "already flat; no coarser granularity exists".to_string(),
    };
    Recommendation {
        flagged,
        suggestion,
        note: Some(note),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::parse_timestamp;

    fn series(label: &str, values: &[f64]) -> FactorSeries {
        let t0 = parse_timestamp("2010-01-01").unwrap();
        FactorSeries {
            label: label.into(),
            points: values
                .iter()
                .enumerate()
                .map(|(i, &v)| FactorPoint {
                    timestamp: t0 + chrono::Duration::days(i as i64),
                    value: v,
                    dt: 1.0 / 365.0,
                })
                .collect(),
        }
    }

    #[test]
    fn trim_count_rule() {
        let v: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let (kept, removed) = trim_outliers(&series("x", &v), 0.02).unwrap();
        assert_eq!(kept.len(), 96);
        assert_eq!(removed.len(), 4);
        assert_eq!(trim_count(0.05, 580), 29);
        assert!(trim_outliers(&series("x", &v), 0.06).is_err());
        assert_eq!(
            trim_outliers(&series("x", &v), 0.0).unwrap().0,
            series("x", &v)
        );
    }

    #[test]
    fn trim_ties_remove_earlier_first() {
        let mut v = vec![0.0; 50];
        v[3] = 5.0;
        v[10] = 5.0;
        let (_, removed) = trim_outliers(&series("x", &v), 0.02).unwrap();
        // one from each tail: the earlier 5.0 and the earliest 0.0
        let t0 = parse_timestamp("2010-01-01").unwrap();
        assert_eq!(removed, vec![t0, t0 + chrono::Duration::days(3)]);
    }

    #[test]
    fn self_pair_is_one() {
        let v: Vec<f64> = (0..60).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut b = series("b", &v);
        b.label = "b".into();
        let m = build_joint(&[series("a", &v), b], &JointOptions::default()).unwrap();
        assert_eq!(m.corr[0].ci.estimate, 1.0);
        assert_eq!(m.matrix(0)[0][1], Some(1.0));
    }

    #[test]
    fn too_little_overlap() {
        let v = [1.0, 2.0, 0.5, 3.0];
        let e = build_joint(
            &[series("a", &v), series("b", &v)],
            &JointOptions::default(),
        );
        assert!(matches!(e, Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn flat_check_notes_terminal() {
        let a: Vec<f64> = (0..10).map(|i| (i as f64 * 1.3).sin()).collect();
        let b: Vec<f64> = (0..10).map(|i| (i as f64 * 2.1).cos()).collect();
        let m = build_joint(
            &[series("a", &a), series("b", &b)],
            &JointOptions::default(),
        )
        .unwrap();
        assert!(granularity_check(&m, 2.0).is_empty());
        let r = granularity_check(&m, 0.1);
        assert_eq!(r.flagged.len(), 1);
        assert_eq!(r.suggestion, None);
        assert!(r.note.unwrap().contains("already flat"));
    }
}
