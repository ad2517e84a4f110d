//! Price series ingestion, ACT/365 time arithmetic and calendar bucketing.
//!
//! Everything downstream consumes a [`StepSeries`]: consecutive observation
//! pairs with their year-fraction step and the calendar bucket of the
//! *earlier* timestamp of the pair.

use std::fmt;
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mrcal::FactorSeries;

/// Days per year of the ACT/365 fixed convention.
pub const DAYS_PER_YEAR: f64 = 365.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub timestamp: NaiveDateTime,
    pub value: f64,
}

/// Irregularly spaced observations, strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub label: String,
    observations: Vec<Observation>,
}

impl PriceSeries {
    /// Sorts the observations and checks the series invariants.
    pub fn new(label: impl Into<String>, mut observations: Vec<Observation>) -> Result<Self> {
        if observations.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: observations.len(),
            });
        }
        if let Some(bad) = observations.iter().find(|o| !o.value.is_finite()) {
            return Err(invalid(format!("non-finite value at {}", bad.timestamp)));
        }
        observations.sort_by_key(|o| o.timestamp);
        if let Some(w) = observations
            .windows(2)
            .find(|w| w[0].timestamp == w[1].timestamp)
        {
            return Err(Error::DuplicateTimestamp(w[0].timestamp));
        }
        Ok(Self {
            label: label.into(),
            observations,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn first(&self) -> &Observation {
        &self.observations[0]
    }

    pub fn last(&self) -> &Observation {
        &self.observations[self.observations.len() - 1]
    }

    /// Same timestamps, every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            label: self.label.clone(),
            observations: self
                .observations
                .iter()
                .map(|o| Observation {
                    timestamp: o.timestamp,
                    value: o.value * factor,
                })
                .collect(),
        }
    }
}

/// Parses `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM` or `YYYY-MM-DDTHH:MM:SS`.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    for fmt in [
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%d %H:%M:%S",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    None
}

/// Loads one value column of a CSV file with a `date` column.
///
/// Empty value cells are treated as missing and skipped; the resulting gap
/// simply lengthens the step between the neighbouring observations.
pub fn load_csv(path: impl AsRef<Path>, value_column: &str) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, value_column, label)
}

pub fn read_csv(
    reader: impl Read,
    value_column: &str,
    label: impl Into<String>,
) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let date_idx = headers
        .iter()
        .position(|h| h == "date")
        .ok_or_else(|| Error::MissingColumn("date".into()))?;
    let value_idx = headers
        .iter()
        .position(|h| h == value_column)
        .ok_or_else(|| Error::MissingColumn(value_column.into()))?;

    let mut observations = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let record = record?;
        let date = record.get(date_idx).unwrap_or("");
        let timestamp = parse_timestamp(date).ok_or_else(|| Error::Parse {
            row,
            message: format!("unparseable date `{date}`"),
        })?;
        let cell = record.get(value_idx).unwrap_or("");
        if cell.is_empty() {
            continue;
        }
        let value: f64 = cell.parse().map_err(|_| Error::Parse {
            row,
            message: format!("unparseable value `{cell}`"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                row,
                message: format!("non-finite value `{cell}`"),
            });
        }
        observations.push(Observation { timestamp, value });
    }
    if observations.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: observations.len(),
        });
    }
    PriceSeries::new(label, observations)
}

/// ACT/365 year fraction between two instants.
pub fn year_fraction(t1: NaiveDateTime, t2: NaiveDateTime) -> Result<f64> {
    if t2 <= t1 {
        return Err(invalid(format!("year_fraction: {t2} is not after {t1}")));
    }
    Ok(year_fraction_unchecked(t1, t2))
}

/// Signed ACT/365 year fraction `t2 - t1`.
pub(crate) fn year_fraction_unchecked(t1: NaiveDateTime, t2: NaiveDateTime) -> f64 {
    let d = t2 - t1;
    let secs = d.num_seconds() as f64;
    let nanos = d.subsec_nanos() as f64;
    (secs + nanos * 1e-9) / (86_400.0 * DAYS_PER_YEAR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Log,
    Identity,
}

impl Transform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Log => v.ln(),
            Transform::Identity => v,
        }
    }
}

/// One transition `x_prev -> x_next` over `dt` years, bucketed by `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPair {
    pub start: NaiveDateTime,
    pub x_prev: f64,
    pub x_next: f64,
    pub dt: f64,
    pub month: u32,
    pub year: i32,
}

impl StepPair {
    pub fn bucket_my(&self) -> (u32, i32) {
        (self.month, self.year)
    }

    pub fn bucket_m(&self) -> u32 {
        self.month
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSeries {
    pub label: String,
    pub pairs: Vec<StepPair>,
    pub transform: Transform,
}

impl StepSeries {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn to_steps(series: &PriceSeries, transform: Transform) -> Result<StepSeries> {
    let obs = series.observations();
    if transform == Transform::Log {
        if let Some(bad) = obs.iter().find(|o| o.value <= 0.0) {
            return Err(Error::NonPositive {
                timestamp: bad.timestamp,
                value: bad.value,
            });
        }
    }
    let pairs = obs
        .windows(2)
        .map(|w| StepPair {
            start: w[0].timestamp,
            x_prev: transform.apply(w[0].value),
            x_next: transform.apply(w[1].value),
            dt: year_fraction_unchecked(w[0].timestamp, w[1].timestamp),
            month: w[0].timestamp.month(),
            year: w[0].timestamp.year(),
        })
        .collect();
    Ok(StepSeries {
        label: series.label.clone(),
        pairs,
        transform,
    })
}

/// Observation density `C = 365 * N / span_in_days`.
pub fn daycount(series: &PriceSeries) -> Result<f64> {
    let span = year_fraction_unchecked(series.first().timestamp, series.last().timestamp);
    if span <= 0.0 {
        return Err(Error::Degenerate("series spans zero time".into()));
    }
    Ok(series.len() as f64 / span)
}

/// One aligned observation of two factor series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedPoint {
    pub timestamp: NaiveDateTime,
    pub a: f64,
    pub b: f64,
}

/// Inner join of two factor series on their timestamps.
pub fn align(a: &FactorSeries, b: &FactorSeries) -> Result<Vec<AlignedPoint>> {
    if a.points.is_empty() || b.points.is_empty() {
        return Err(invalid("align: empty factor series"));
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.points.len() && j < b.points.len() {
        let (pa, pb) = (&a.points[i], &b.points[j]);
        match pa.timestamp.cmp(&pb.timestamp) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(AlignedPoint {
                    timestamp: pa.timestamp,
                    a: pa.value,
                    b: pb.value,
                });
                i += 1;
                j += 1;
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok(out)
}

/// Calendar granularity of a volatility or correlation term structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Monthly,
    Seasonal,
    Flat,
}

const MONTH_NAMES: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];
const SEASON_NAMES: [&str; 4] = ["DJF", "MAM", "JJA", "SON"];

impl Granularity {
    /// Bucket id of a calendar month: the month itself, a season 1..=4
    /// (DJF, MAM, JJA, SON) or 0 for flat.
    pub fn bucket(self, month: u32) -> u32 {
        match self {
            Granularity::Monthly => month,
            Granularity::Seasonal => (month % 12) / 3 + 1,
            Granularity::Flat => 0,
        }
    }

    pub fn buckets(self) -> Vec<u32> {
        match self {
            Granularity::Monthly => (1..=12).collect(),
            Granularity::Seasonal => (1..=4).collect(),
            Granularity::Flat => vec![0],
        }
    }

    pub fn label(self, bucket: u32) -> String {
        match self {
            Granularity::Monthly => MONTH_NAMES[(bucket as usize + 11) % 12].to_string(),
            Granularity::Seasonal => SEASON_NAMES[(bucket as usize + 3) % 4].to_string(),
            Granularity::Flat => "all".to_string(),
        }
    }

    /// Next coarser granularity, if any.
    pub fn coarser(self) -> Option<Granularity> {
        match self {
            Granularity::Monthly => Some(Granularity::Seasonal),
            Granularity::Seasonal => Some(Granularity::Flat),
            Granularity::Flat => None,
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Monthly => "monthly",
            Granularity::Seasonal => "seasonal",
            Granularity::Flat => "flat",
        })
    }
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monthly" => Ok(Granularity::Monthly),
            "seasonal" => Ok(Granularity::Seasonal),
            "flat" => Ok(Granularity::Flat),
            other => Err(invalid(format!("unknown granularity `{other}`"))),
        }
    }
}

/// Granularity of the mean-reversion level / drift term structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelGranularity {
    /// One level per (month, year).
    #[default]
    MonthYear,
    /// One level per calendar month, pooled across years.
    CalendarMonth,
}

impl std::str::FromStr for LevelGranularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "month-year" => Ok(LevelGranularity::MonthYear),
            "calendar-month" => Ok(LevelGranularity::CalendarMonth),
            other => Err(invalid(format!("unknown level granularity `{other}`"))),
        }
    }
}

/// Key of a level bucket. `year` is `None` for calendar-month pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LevelKey {
    pub year: Option<i32>,
    pub month: u32,
}

impl LevelGranularity {
    pub fn key(self, month: u32, year: i32) -> LevelKey {
        match self {
            LevelGranularity::MonthYear => LevelKey {
                year: Some(year),
                month,
            },
            LevelGranularity::CalendarMonth => LevelKey { year: None, month },
        }
    }

    pub fn key_of(self, pair: &StepPair) -> LevelKey {
        self.key(pair.month, pair.year)
    }
}

impl fmt::Display for LevelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.year {
            Some(y) => write!(f, "{y:04}-{:02}", self.month),
            None => write!(f, "M{:02}", self.month),
        }
    }
}

impl std::str::FromStr for LevelKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || invalid(format!("bad level key `{s}`"));
        if let Some(m) = s.strip_prefix('M') {
            let month = m.parse().map_err(|_| bad())?;
            return Ok(LevelKey { year: None, month });
        }
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        Ok(LevelKey {
            year: Some(y.parse().map_err(|_| bad())?),
            month: m.parse().map_err(|_| bad())?,
        })
    }
}

impl Serialize for LevelKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LevelKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
