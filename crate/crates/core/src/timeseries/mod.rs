//! Hourly market series: ingestion, DST repair, calendar splits, descriptive
//! statistics and a seeded synthetic generator.
//!
//! Timestamps are naive local market time at hourly resolution. A spring
//! clock change shows up as one missing hour and an autumn change as one
//! duplicated hour; [`repair_dst`] resolves both by averaging.

mod io;
mod synthetic;

pub use io::{emit_csv, ingest_csv, read_rows, write_csv};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS_PER_DAY: usize = 24;

/// One market's hourly price and temperature history.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    market_id: String,
    start: NaiveDateTime,
    prices: Vec<f64>,
    temperatures: Vec<f64>,
}

impl HourlySeries {
    pub fn new(
        market_id: impl Into<String>,
        start: NaiveDateTime,
        prices: Vec<f64>,
        temperatures: Vec<f64>,
    ) -> Result<Self> {
        if prices.len() != temperatures.len() {
            return Err(Error::DimensionMismatch {
                expected: prices.len(),
                got: temperatures.len(),
            });
        }
        if start.minute() != 0 || start.second() != 0 || start.nanosecond() != 0 {
            return Err(Error::InvalidArgument(format!(
                "series start {start} is not on the hour"
            )));
        }
        if let Some(i) = prices
            .iter()
            .chain(temperatures.iter())
            .position(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at position {}",
                i % prices.len().max(1)
            )));
        }
        Ok(Self {
            market_id: market_id.into(),
            start,
            prices,
            temperatures,
        })
    }

    pub fn market_id(&self) -> &str {
        &self.market_id
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    /// Exclusive end timestamp.
    pub fn end(&self) -> NaiveDateTime {
        self.start + Duration::hours(self.len() as i64)
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn temperatures(&self) -> &[f64] {
        &self.temperatures
    }

    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        self.start + Duration::hours(index as i64)
    }

    /// Index of `ts` if it falls on an hour inside the series.
    pub fn index_of(&self, ts: NaiveDateTime) -> Option<usize> {
        let offset = ts.signed_duration_since(self.start);
        if offset < Duration::zero() || offset.num_seconds() % 3600 != 0 {
            return None;
        }
        let idx = offset.num_hours() as usize;
        (idx < self.len()).then_some(idx)
    }

    /// Index of the first hour at or after `ts`, clamped to `[0, len]`.
    pub fn lower_index(&self, ts: NaiveDateTime) -> usize {
        let secs = ts.signed_duration_since(self.start).num_seconds();
        if secs <= 0 {
            0
        } else {
            (((secs + 3599) / 3600) as usize).min(self.len())
        }
    }

    /// The 24 prices of calendar day `day`, if fully covered.
    pub fn day_prices(&self, day: NaiveDate) -> Option<&[f64]> {
        let i = self.index_of(day.and_hms_opt(0, 0, 0)?)?;
        self.prices.get(i..i + HOURS_PER_DAY)
    }

    /// Sub-series covering `[from, to)`, clipped to the available data.
    pub fn slice(&self, from: NaiveDateTime, to: NaiveDateTime) -> HourlySeries {
        let a = self.lower_index(from);
        let b = self.lower_index(to).max(a);
        HourlySeries {
            market_id: self.market_id.clone(),
            start: self.timestamp(a),
            prices: self.prices[a..b].to_vec(),
            temperatures: self.temperatures[a..b].to_vec(),
        }
    }
}

/// Half-open calendar interval `[start, end)` in whole days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DayRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn days(&self) -> i64 {
        (self.end - self.start).num_days()
    }

    pub fn start_time(&self) -> NaiveDateTime {
        self.start.and_hms_opt(0, 0, 0).unwrap()
    }

    pub fn end_time(&self) -> NaiveDateTime {
        self.end.and_hms_opt(0, 0, 0).unwrap()
    }

    pub fn contains(&self, day: NaiveDate) -> bool {
        self.start <= day && day < self.end
    }

    pub fn iter_days(&self) -> impl Iterator<Item = NaiveDate> {
        let start = self.start;
        (0..self.days().max(0)).map(move |i| start + Duration::days(i))
    }
}

/// Chronological train / validation / test split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: DayRange,
    pub validation: DayRange,
    pub test: DayRange,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ] {
            if r.days() <= 0 {
                return Err(Error::Config(format!("{name} range is empty")));
            }
        }
        if self.train.end > self.validation.start || self.validation.end > self.test.start {
            return Err(Error::Config(
                "split ranges must be disjoint and ordered train < validation < test".into(),
            ));
        }
        Ok(())
    }

    /// Splits `days` consecutive days from `start` into train/validation/test
    /// blocks of the given lengths.
    pub fn consecutive(start: NaiveDate, train: i64, validation: i64, test: i64) -> Self {
        let a = start + Duration::days(train);
        let b = a + Duration::days(validation);
        let c = b + Duration::days(test);
        Self {
            train: DayRange::new(start, a),
            validation: DayRange::new(a, b),
            test: DayRange::new(b, c),
        }
    }
}

/// A single parsed input row; missing values are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRow {
    pub timestamp: NaiveDateTime,
    pub price: Option<f64>,
    pub temperature: Option<f64>,
}

/// Resolves DST anomalies so that every hour carries exactly one value.
///
/// Duplicated hours are averaged; a single missing hour (absent row or empty
/// field) is filled with the mean of its two neighbours. Price and
/// temperature columns are repaired independently with the same rule.
pub fn repair_dst(market_id: &str, rows: &[RawRow]) -> Result<HourlySeries> {
    if rows.is_empty() {
        return Err(Error::Empty("no rows to repair"));
    }
    for w in rows.windows(2) {
        if w[1].timestamp < w[0].timestamp {
            return Err(Error::InvalidArgument(format!(
                "rows not sorted at {}",
                w[1].timestamp
            )));
        }
    }
    if let Some(r) = rows
        .iter()
        .find(|r| r.timestamp.minute() != 0 || r.timestamp.second() != 0)
    {
        return Err(Error::InvalidArgument(format!(
            "timestamp {} is not on the hour",
            r.timestamp
        )));
    }

    // merge duplicates
    let mut hours: Vec<(NaiveDateTime, Option<f64>, Option<f64>)> = Vec::with_capacity(rows.len());
    let mut i = 0;
    while i < rows.len() {
        let ts = rows[i].timestamp;
        let j = rows[i..]
            .iter()
            .position(|r| r.timestamp != ts)
            .map_or(rows.len(), |k| i + k);
        let group = &rows[i..j];
        hours.push((
            ts,
            mean_present(group.iter().map(|r| r.price)),
            mean_present(group.iter().map(|r| r.temperature)),
        ));
        i = j;
    }

    // insert single-hour gaps
    let mut slots: Vec<(Option<f64>, Option<f64>)> = Vec::with_capacity(hours.len() + 8);
    for (k, &(ts, p, t)) in hours.iter().enumerate() {
        if k > 0 {
            let prev = hours[k - 1].0;
            match (ts - prev).num_hours() {
                1 => {}
                2 => slots.push((None, None)),
                _ => {
                    return Err(Error::UnrepairableGap {
                        before: prev.to_string(),
                        after: ts.to_string(),
                    })
                }
            }
        }
        slots.push((p, t));
    }

    let start = hours[0].0;
    let prices = fill_single_gaps(slots.iter().map(|s| s.0).collect(), start)?;
    let temperatures = fill_single_gaps(slots.iter().map(|s| s.1).collect(), start)?;
    HourlySeries::new(market_id, start, prices, temperatures)
}

fn mean_present(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn fill_single_gaps(values: Vec<Option<f64>>, start: NaiveDateTime) -> Result<Vec<f64>> {
    let n = values.len();
    let at = |i: usize| (start + Duration::hours(i as i64)).to_string();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        match values[i] {
            Some(v) => out.push(v),
            None => {
                if i == 0 || i + 1 == n {
                    return Err(Error::BoundaryGap { at: at(i) });
                }
                match (values[i - 1], values[i + 1]) {
                    (Some(a), Some(b)) => out.push(0.5 * (a + b)),
                    _ => {
                        return Err(Error::UnrepairableGap {
                            before: at(i - 1),
                            after: at(i + 1),
                        })
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Mean and population standard deviation of one calendar year of prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearStats {
    pub year: i32,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub market_id: String,
    pub years: Vec<YearStats>,
}

pub fn describe(series: &HourlySeries) -> DescriptiveStats {
    let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for (i, &p) in series.prices().iter().enumerate() {
        by_year
            .entry(series.timestamp(i).year())
            .or_default()
            .push(p);
    }
    let years = by_year
        .into_iter()
        .map(|(year, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            YearStats {
                year,
                mean,
                std: var.sqrt(),
            }
        })
        .collect();
    DescriptiveStats {
        market_id: series.market_id().to_string(),
        years,
    }
}

/// Writes `market,year,mean,std` rows.
pub fn write_describe_csv<W: std::io::Write>(stats: &[DescriptiveStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["market", "year", "mean", "std"])?;
    for s in stats {
        for y in &s.years {
            w.write_record([
                s.market_id.clone(),
                y.year.to_string(),
                y.mean.to_string(),
                y.std.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<describe>", e))?;
    Ok(())
}

/// Monday = 0 ... Sunday = 6.
pub fn weekday_index(day: NaiveDate) -> usize {
    day.weekday().num_days_from_monday() as usize
}
