//! Point-forecast metrics over day x hour panels and the multivariate
//! Diebold-Mariano test on daily L1 losses.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Actuals and forecasts in price units, one row per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastPanel {
    pub days: Vec<NaiveDate>,
    pub actuals: Vec<Vec<f64>>,
    pub forecasts: Vec<Vec<f64>>,
}

impl ForecastPanel {
    pub fn new(days: Vec<NaiveDate>, actuals: Vec<Vec<f64>>, forecasts: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self {
            days,
            actuals,
            forecasts,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.days.is_empty() {
            return Err(Error::Empty("forecast panel has no days"));
        }
        let width = self.actuals.first().map_or(0, Vec::len);
        if width == 0 {
            return Err(Error::Empty("forecast panel has no hours"));
        }
        let n = self.days.len();
        if self.actuals.len() != n || self.forecasts.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.actuals.len().min(self.forecasts.len()),
            });
        }
        for row in self.actuals.iter().chain(&self.forecasts) {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
        }
        Ok(())
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn width(&self) -> usize {
        self.actuals[0].len()
    }

    fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.actuals
            .iter()
            .zip(&self.forecasts)
            .flat_map(|(a, f)| a.iter().copied().zip(f.iter().copied()))
    }

    pub fn mae(&self) -> f64 {
        let n = (self.n_days() * self.width()) as f64;
        self.pairs().map(|(a, f)| (a - f).abs()).sum::<f64>() / n
    }

    pub fn rmse(&self) -> f64 {
        let n = (self.n_days() * self.width()) as f64;
        (self.pairs().map(|(a, f)| (a - f).powi(2)).sum::<f64>() / n).sqrt()
    }

    /// Symmetric MAPE scaled by 100; a term with `P = P_hat = 0` counts as 0.
    pub fn smape(&self) -> f64 {
        let n = (self.n_days() * self.width()) as f64;
        let sum: f64 = self
            .pairs()
            .map(|(a, f)| {
                let den = a.abs() + f.abs();
                if den == 0.0 {
                    0.0
                } else {
                    2.0 * (a - f).abs() / den
                }
            })
            .sum();
        100.0 * sum / n
    }

    /// Sum of absolute errors per day.
    pub fn daily_l1(&self) -> Vec<f64> {
        self.actuals
            .iter()
            .zip(&self.forecasts)
            .map(|(a, f)| a.iter().zip(f).map(|(x, y)| (x - y).abs()).sum())
            .collect()
    }

    fn check_aligned(&self, other: &ForecastPanel) -> Result<()> {
        self.validate()?;
        other.validate()?;
        if self.days != other.days || self.width() != other.width() {
            return Err(Error::DimensionMismatch {
                expected: self.n_days(),
                got: other.n_days(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    pub smape: f64,
    pub rmae: f64,
}

/// MAE, RMSE, sMAPE (x100) and MAE relative to the naive panel.
pub fn metrics(panel: &ForecastPanel, naive_panel: &ForecastPanel) -> Result<Metrics> {
    panel.check_aligned(naive_panel)?;
    if panel.actuals != naive_panel.actuals {
        return Err(Error::InvalidArgument(
            "model and naive panels carry different actuals".into(),
        ));
    }
    let naive_mae = naive_panel.mae();
    if naive_mae == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    let mae = panel.mae();
    Ok(Metrics {
        mae,
        rmse: panel.rmse(),
        smape: panel.smape(),
        rmae: mae / naive_mae,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_days: usize,
}

/// One-sided DM test of H1 "B forecasts better than A" on daily L1 losses.
/// A small p-value means B is significantly better.
pub fn dm_test(panel_a: &ForecastPanel, panel_b: &ForecastPanel) -> Result<DmResult> {
    panel_a.check_aligned(panel_b)?;
    let delta: Vec<f64> = panel_a
        .daily_l1()
        .iter()
        .zip(panel_b.daily_l1())
        .map(|(a, b)| a - b)
        .collect();
    dm_from_differential(&delta)
}

/// DM statistic `sqrt(N) * mean / sd` with the `n - 1` standard deviation.
pub fn dm_from_differential(delta: &[f64]) -> Result<DmResult> {
    let n = delta.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "DM test needs at least two days".into(),
        ));
    }
    let mean = delta.iter().sum::<f64>() / n as f64;
    let var = delta.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateDifferential);
    }
    let statistic = (n as f64).sqrt() * mean / sd;
    Ok(DmResult {
        statistic,
        p_value: normal_cdf(-statistic),
        n_days: n,
    })
}

/// Standard normal CDF, `0.5 * erfc(-x / sqrt 2)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Writes `market,strategy,mae,rmse,smape,rmae` rows.
pub fn write_metrics_csv<W: Write>(rows: &[(String, String, Metrics)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["market", "strategy", "mae", "rmse", "smape", "rmae"])?;
    for (market, strategy, m) in rows {
        w.write_record([
            market.clone(),
            strategy.clone(),
            m.mae.to_string(),
            m.rmse.to_string(),
            m.smape.to_string(),
            m.rmae.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

/// Pairwise p-values: cell (row `y`, column `x`) tests "x better than y".
/// Diagonal and degenerate pairs are `None`.
pub fn dm_grid(panels: &[(String, ForecastPanel)]) -> Result<Vec<Vec<Option<f64>>>> {
    let n = panels.len();
    let mut grid = vec![vec![None; n]; n];
    for (y, row) in grid.iter_mut().enumerate() {
        for (x, cell) in row.iter_mut().enumerate() {
            if x == y {
                continue;
            }
            *cell = match dm_test(&panels[y].1, &panels[x].1) {
                Ok(r) => Some(r.p_value),
                Err(Error::DegenerateDifferential) => None,
                Err(e) => return Err(e),
            };
        }
    }
    Ok(grid)
}

pub fn write_dm_grid_csv<W: Write>(labels: &[String], grid: &[Vec<Option<f64>>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![String::new()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for (label, row) in labels.iter().zip(grid) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|c| c.map_or_else(|| "NA".to_string(), |p| p.to_string())));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<dm>", e))?;
    Ok(())
}
