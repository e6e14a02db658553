//! Training-fraction ablation: basic vs pretrain-finetune per fraction.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, MarketData, SourceSelection, Strategy};
use super::report::EvaluationReport;
use super::runner::{check_markets, fixed_sources, pretrain_static, run_strategy_with, select_sources};
use crate::error::{Error, Result};
use crate::evaluation::{dm_test, DmResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub basic_mae: f64,
    pub transfer_mae: f64,
    /// One-sided DM test of "pretrain_finetune better than basic";
    /// `None` when the loss differential is degenerate.
    pub dm: Option<DmResult>,
}

impl SweepRow {
    /// `basic_mae - transfer_mae`; positive when transfer helps.
    pub fn gap(&self) -> f64 {
        self.basic_mae - self.transfer_mae
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub market: String,
    pub sources: Vec<String>,
    pub rows: Vec<SweepRow>,
    /// One basic and one fine-tuned model per fraction.
    pub trained_models: usize,
    /// Pre-training runs shared by all fractions (0 or 1).
    pub pretraining_runs: usize,
    #[serde(skip)]
    pub reports: Vec<(EvaluationReport, EvaluationReport)>,
}

impl SweepResult {
    /// `fraction,basic_mae,transfer_mae,gap,dm_statistic,dm_p_value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["fraction", "basic_mae", "transfer_mae", "gap", "dm_statistic", "dm_p_value"])?;
        for r in &self.rows {
            let (stat, p) = r.dm.map_or(("NA".into(), "NA".into()), |d| {
                (d.statistic.to_string(), d.p_value.to_string())
            });
            w.write_record([
                r.fraction.to_string(),
                r.basic_mae.to_string(),
                r.transfer_mae.to_string(),
                r.gap().to_string(),
                stat,
                p,
            ])?;
        }
        w.flush().map_err(|e| Error::io("<sweep>", e))?;
        Ok(())
    }
}

/// Runs basic and pretrain_finetune at each fraction of the target training
/// samples. Sources are resolved once and the pre-trained model is shared.
pub fn fraction_sweep(config: &ExperimentConfig, data: &MarketData, fractions: &[f64]) -> Result<SweepResult> {
    if fractions.is_empty() {
        return Err(Error::InvalidArgument("no fractions given".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::InvalidArgument(format!("fraction {f} outside (0, 1]")));
    }
    let base = ExperimentConfig {
        strategy: Strategy::PretrainFinetune,
        ensemble_size: 1,
        ..config.clone()
    };
    base.validate()?;
    check_markets(&base, data)?;
    let sources = match fixed_sources(&base, data) {
        Some(s) => s,
        None => select_sources(&base, data)?.best,
    };
    let pretrained = pretrain_static(&base, data, &sources)?;

    let mut rows = Vec::with_capacity(fractions.len());
    let mut reports = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let transfer_cfg = ExperimentConfig {
            training_fraction: fraction,
            source_markets: SourceSelection::List(sources.clone()),
            ..base.clone()
        };
        let basic_cfg = ExperimentConfig {
            strategy: Strategy::Basic,
            source_markets: SourceSelection::List(Vec::new()),
            ..transfer_cfg.clone()
        };
        let basic = run_strategy_with(&basic_cfg, data, None)?;
        let transfer = run_strategy_with(&transfer_cfg, data, pretrained.as_ref())?;
        let dm = match dm_test(&basic.panel, &transfer.panel) {
            Ok(d) => Some(d),
            Err(Error::DegenerateDifferential) => None,
            Err(e) => return Err(e),
        };
        rows.push(SweepRow {
            fraction,
            basic_mae: basic.metrics.mae,
            transfer_mae: transfer.metrics.mae,
            dm,
        });
        reports.push((basic, transfer));
    }
    Ok(SweepResult {
        market: base.target_market.clone(),
        sources,
        trained_models: 2 * rows.len(),
        pretraining_runs: usize::from(pretrained.is_some()),
        rows,
        reports,
    })
}
