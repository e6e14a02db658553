//! Daily recalibration over the test days.

use std::time::Instant;

use chrono::{Duration, NaiveDate};

use super::config::{ExperimentConfig, FinetuneFrom, MarketData, Strategy, WindowSpec};
use super::report::{ensemble, EvaluationReport};
use super::runner::{assemble_report, check_markets, fixed_sources, Calibration, Fitted, Prepared};
use crate::error::{Error, Result};
use crate::features::HORIZON;
use crate::neural::MlpModel;
use crate::timeseries::DayRange;

/// Calibration window for test day `day`, split chronologically into
/// training and validation days by `train_val_ratio`.
pub fn rolling_calibration(config: &ExperimentConfig, day: NaiveDate) -> Result<(DayRange, DayRange)> {
    let start = match config.rolling.window_days {
        WindowSpec::Expanding => config.split.train.start,
        WindowSpec::Days(n) => day - Duration::days(n as i64),
    };
    let total = (day - start).num_days();
    let needed = config.feature_spec.lookback() + HORIZON;
    if total < 2 || (total as usize) * HORIZON < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: total.max(0) as usize * HORIZON,
        });
    }
    let train_days = ((total as f64) * config.rolling.train_val_ratio).round() as i64;
    let train_days = train_days.clamp(1, total - 1);
    let split = start + Duration::days(train_days);
    Ok((DayRange::new(start, split), DayRange::new(split, day)))
}

/// Recalibrates the configured strategy before each test day and forecasts
/// that day only. `source_markets = "auto"` uses every candidate market.
pub fn rolling_recalibrate(config: &ExperimentConfig, data: &MarketData) -> Result<EvaluationReport> {
    config.validate()?;
    if !config.rolling.enabled {
        return Err(Error::Config("rolling mode is not enabled in the config".into()));
    }
    check_markets(config, data)?;
    if config.ensemble_size > 1 {
        let members = (0..config.ensemble_size as u64)
            .map(|i| {
                let member = ExperimentConfig {
                    seed: config.seed.wrapping_add(i),
                    ensemble_size: 1,
                    ..config.clone()
                };
                rolling_recalibrate(&member, data)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = ensemble(&members)?;
        out.name = format!("rolling_{}", config.strategy);
        out.config = config.clone();
        return Ok(out);
    }

    let started = Instant::now();
    let sources = fixed_sources(config, data).unwrap_or_else(|| config.candidate_sources(data));
    let days: Vec<NaiveDate> = config.split.test.iter_days().collect();
    let mut forecasts = Vec::with_capacity(days.len());
    let mut traces = Vec::new();
    let mut fits = 0;
    let mut previous: Option<MlpModel> = None;
    for &day in &days {
        let (train, validation) = rolling_calibration(config, day)?;
        let prep = Prepared::new(config, data, &sources, Calibration { train, validation })?;
        let carry = config.strategy == Strategy::PretrainFinetune
            && config.rolling.finetune_from == FinetuneFrom::PreviousDay;
        let outcome = prep.fit(if carry { previous.as_ref() } else { None })?;
        forecasts.extend(prep.forecast(&outcome.fitted, &[day])?);
        if carry {
            if let Fitted::Mlp { model, .. } = &outcome.fitted {
                previous = Some(model.clone());
            }
        }
        traces.extend(outcome.traces);
        fits += outcome.fits;
    }
    let mut report = assemble_report(config, data, days, forecasts, sources, Vec::new(), traces, fits, started)?;
    report.name = format!("rolling_{}", config.strategy);
    Ok(report)
}
