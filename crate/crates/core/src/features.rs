//! Supervised samples for day-ahead forecasting.
//!
//! Each input row holds the previous `price_lags` transformed prices (most
//! recent first), then the previous `temperature_lags` transformed
//! temperatures in the same order, then a one-hot weekday block
//! (Monday = 0 ... Sunday = 6) for the day of the first target hour. Targets
//! are the next 24 transformed prices.

use std::io::Write;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{weekday_index, HourlySeries};
use crate::transform::MarketTransform;

pub const HORIZON: usize = 24;
pub const WEEKDAYS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub use_temperature: bool,
    pub use_dummies: bool,
    pub price_lags: usize,
    pub temperature_lags: usize,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            use_temperature: true,
            use_dummies: true,
            price_lags: 168,
            temperature_lags: 168,
        }
    }
}

impl FeatureSpec {
    /// Lagged prices only.
    pub fn price_only() -> Self {
        Self {
            use_temperature: false,
            use_dummies: false,
            ..Self::default()
        }
    }

    /// Width of one market's lag block (prices plus optional temperatures).
    pub fn market_block_dim(&self) -> usize {
        self.price_lags + if self.use_temperature { self.temperature_lags } else { 0 }
    }

    pub fn input_dim(&self) -> usize {
        self.integrated_input_dim(1)
    }

    pub fn integrated_input_dim(&self, n_markets: usize) -> usize {
        n_markets * self.market_block_dim() + if self.use_dummies { WEEKDAYS } else { 0 }
    }

    /// Hours of history a sample needs before its first target hour.
    pub fn lookback(&self) -> usize {
        let t = if self.use_temperature { self.temperature_lags } else { 0 };
        self.price_lags.max(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.price_lags == 0 {
            return Err(Error::Config("price_lags must be at least 1".into()));
        }
        if self.use_temperature && self.temperature_lags == 0 {
            return Err(Error::Config("temperature_lags must be at least 1".into()));
        }
        Ok(())
    }
}

/// Input/target matrices with per-row anchor (first target hour) and market.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
    pub anchors: Vec<NaiveDateTime>,
    pub market_ids: Vec<String>,
}

impl SampleSet {
    pub fn empty(input_dim: usize) -> Self {
        Self {
            inputs: Array2::zeros((0, input_dim)),
            targets: Array2::zeros((0, HORIZON)),
            anchors: Vec::new(),
            market_ids: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn select(&self, rows: &[usize]) -> SampleSet {
        SampleSet {
            inputs: self.inputs.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
            anchors: rows.iter().map(|&i| self.anchors[i]).collect(),
            market_ids: rows.iter().map(|&i| self.market_ids[i].clone()).collect(),
        }
    }

    /// Deterministic row permutation.
    pub fn shuffle(&self, seed: u64) -> SampleSet {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.select(&order)
    }

    /// Keeps the most recent `floor(fraction * len)` samples by anchor.
    pub fn truncate_recent(&self, fraction: f64) -> Result<SampleSet> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "training fraction {fraction} outside (0, 1]"
            )));
        }
        let keep = (fraction * self.len() as f64).floor() as usize;
        if keep == 0 {
            return Err(Error::InvalidArgument(format!(
                "training fraction {fraction} leaves no samples out of {}",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&i| self.anchors[i]);
        let rows = &order[self.len() - keep..];
        Ok(self.select(rows))
    }

    /// One CSV row per sample: anchor, market, inputs..., targets...
    pub fn dump_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["anchor".to_string(), "market".to_string()];
        header.extend((0..self.input_dim()).map(|j| format!("x{j}")));
        header.extend((0..self.targets.ncols()).map(|h| format!("y{h}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![
                self.anchors[i].format("%Y-%m-%dT%H:%M:%S").to_string(),
                self.market_ids[i].clone(),
            ];
            rec.extend(self.inputs.row(i).iter().map(f64::to_string));
            rec.extend(self.targets.row(i).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<samples>", e))?;
        Ok(())
    }
}

/// Restricts which anchors are emitted: the whole 24-hour target window must
/// lie inside `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetWindow {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl TargetWindow {
    pub fn days(start: NaiveDate, end: NaiveDate) -> Self {
        Self {
            start: start.and_hms_opt(0, 0, 0).unwrap(),
            end: end.and_hms_opt(0, 0, 0).unwrap(),
        }
    }
}

pub fn build_samples(
    series: &HourlySeries,
    transform: &MarketTransform,
    spec: &FeatureSpec,
    stride: usize,
) -> Result<SampleSet> {
    build_samples_in(series, transform, spec, stride, None)
}

pub fn build_samples_in(
    series: &HourlySeries,
    transform: &MarketTransform,
    spec: &FeatureSpec,
    stride: usize,
    window: Option<TargetWindow>,
) -> Result<SampleSet> {
    build_integrated_in(
        &[series],
        &[*transform],
        spec,
        series.market_id(),
        stride,
        window,
    )
}

pub fn build_integrated(
    series_list: &[&HourlySeries],
    transforms: &[MarketTransform],
    spec: &FeatureSpec,
    target_market: &str,
    stride: usize,
) -> Result<SampleSet> {
    build_integrated_in(series_list, transforms, spec, target_market, stride, None)
}

/// Concatenates each market's lag block in list order, then one weekday
/// block; targets come from `target_market`.
pub fn build_integrated_in(
    series_list: &[&HourlySeries],
    transforms: &[MarketTransform],
    spec: &FeatureSpec,
    target_market: &str,
    stride: usize,
    window: Option<TargetWindow>,
) -> Result<SampleSet> {
    spec.validate()?;
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let first = *series_list
        .first()
        .ok_or(Error::Empty("no series to build samples from"))?;
    if transforms.len() != series_list.len() {
        return Err(Error::DimensionMismatch {
            expected: series_list.len(),
            got: transforms.len(),
        });
    }
    for s in series_list {
        if s.start() != first.start() || s.len() != first.len() {
            return Err(Error::MarketMisalignment(format!(
                "{} covers {}+{}h, {} covers {}+{}h",
                first.market_id(),
                first.start(),
                first.len(),
                s.market_id(),
                s.start(),
                s.len()
            )));
        }
    }
    let target_idx = series_list
        .iter()
        .position(|s| s.market_id() == target_market)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("target market {target_market} not among inputs"))
        })?;

    let lookback = spec.lookback();
    let n = first.len();
    if n < lookback + HORIZON {
        return Err(Error::InsufficientHistory {
            needed: lookback + HORIZON,
            available: n,
        });
    }

    let transformed: Vec<(Vec<f64>, Vec<f64>)> = series_list
        .iter()
        .zip(transforms)
        .map(|(s, t)| {
            (
                t.price.forward_slice(s.prices()),
                if spec.use_temperature {
                    t.temperature.forward_slice(s.temperatures())
                } else {
                    Vec::new()
                },
            )
        })
        .collect();

    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let anchors: Vec<usize> = (lookback..=n - HORIZON)
        .filter(|&i| {
            let ts = first.timestamp(i);
            let on_stride = ts.signed_duration_since(epoch).num_hours() % stride as i64 == 0;
            let in_window = window.map_or(true, |w| {
                ts >= w.start && ts + Duration::hours(HORIZON as i64) <= w.end
            });
            on_stride && in_window
        })
        .collect();

    let dim = spec.integrated_input_dim(series_list.len());
    let mut inputs = Array2::zeros((anchors.len(), dim));
    let mut targets = Array2::zeros((anchors.len(), HORIZON));
    let mut anchor_ts = Vec::with_capacity(anchors.len());
    for (r, &i) in anchors.iter().enumerate() {
        let mut row = inputs.row_mut(r);
        let mut col = 0;
        for (prices, temps) in &transformed {
            for k in 1..=spec.price_lags {
                row[col] = prices[i - k];
                col += 1;
            }
            if spec.use_temperature {
                for k in 1..=spec.temperature_lags {
                    row[col] = temps[i - k];
                    col += 1;
                }
            }
        }
        let ts = first.timestamp(i);
        if spec.use_dummies {
            row[col + weekday_index(ts.date())] = 1.0;
        }
        let target = &transformed[target_idx].0[i..i + HORIZON];
        targets
            .row_mut(r)
            .iter_mut()
            .zip(target)
            .for_each(|(d, s)| *d = *s);
        anchor_ts.push(ts);
    }

    Ok(SampleSet {
        inputs,
        targets,
        anchors: anchor_ts,
        market_ids: vec![target_market.to_string(); anchors.len()],
    })
}

/// Row-wise concatenation; no rescaling.
pub fn stack(sets: &[SampleSet]) -> Result<SampleSet> {
    let first = sets.first().ok_or(Error::Empty("nothing to stack"))?;
    let dim = first.input_dim();
    if let Some(bad) = sets.iter().find(|s| s.input_dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.input_dim(),
        });
    }
    let inputs = concatenate(Axis(0), &sets.iter().map(|s| s.inputs.view()).collect::<Vec<_>>())
        .expect("input widths checked");
    let targets = concatenate(Axis(0), &sets.iter().map(|s| s.targets.view()).collect::<Vec<_>>())
        .map_err(|_| Error::InvalidArgument("target widths differ".into()))?;
    Ok(SampleSet {
        inputs,
        targets,
        anchors: sets.iter().flat_map(|s| s.anchors.iter().copied()).collect(),
        market_ids: sets.iter().flat_map(|s| s.market_ids.iter().cloned()).collect(),
    })
}
