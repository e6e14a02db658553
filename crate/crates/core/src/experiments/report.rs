use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Strategy};
use crate::error::{Error, Result};
use crate::evaluation::{metrics, write_metrics_csv, ForecastPanel, Metrics};
use crate::neural::TrainTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: String,
    pub trace: TrainTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub sources: Vec<String>,
    pub validation_mae: f64,
}

/// Outcome of one experiment on the target market's test days.
///
/// The report is self-verifying: [`EvaluationReport::verify`] recomputes the
/// metrics from the embedded model and naive panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Label used in file layouts and CSVs; the strategy name for single runs.
    pub name: String,
    pub market: String,
    pub strategy: Strategy,
    pub config: ExperimentConfig,
    pub panel: ForecastPanel,
    pub naive_forecasts: Vec<Vec<f64>>,
    pub metrics: Metrics,
    pub selected_sources: Vec<String>,
    pub subset_table: Vec<SubsetScore>,
    pub traces: Vec<StageTrace>,
    /// Number of model fits performed (each training stage counts once).
    pub fits: usize,
    pub wall_clock_seconds: f64,
}

impl EvaluationReport {
    pub fn naive_panel(&self) -> ForecastPanel {
        ForecastPanel {
            days: self.panel.days.clone(),
            actuals: self.panel.actuals.clone(),
            forecasts: self.naive_forecasts.clone(),
        }
    }

    pub fn recompute_metrics(&self) -> Result<Metrics> {
        metrics(&self.panel, &self.naive_panel())
    }

    pub fn verify(&self) -> Result<()> {
        let m = self.recompute_metrics()?;
        if m != self.metrics {
            return Err(Error::Report(format!(
                "stored metrics {:?} differ from recomputed {:?}",
                self.metrics, m
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Writes `report.json`, `metrics.csv` and `panel.csv` under
    /// `{out}/{market}/{name}/` and returns that directory.
    pub fn write(&self, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = out_dir.as_ref().join(&self.market).join(&self.name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let io = |p: &Path, e| Error::io(p, e);

        let json = dir.join("report.json");
        fs::write(&json, self.to_json()?).map_err(|e| io(&json, e))?;

        let mcsv = dir.join("metrics.csv");
        let f = fs::File::create(&mcsv).map_err(|e| io(&mcsv, e))?;
        write_metrics_csv(&[(self.market.clone(), self.name.clone(), self.metrics)], f)?;

        let pcsv = dir.join("panel.csv");
        let f = fs::File::create(&pcsv).map_err(|e| io(&pcsv, e))?;
        self.write_panel_csv(f)?;
        Ok(dir)
    }

    /// Long format: `day,hour,actual,forecast,naive`.
    pub fn write_panel_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["day", "hour", "actual", "forecast", "naive"])?;
        for (d, day) in self.panel.days.iter().enumerate() {
            for h in 0..self.panel.width() {
                w.write_record([
                    day.to_string(),
                    h.to_string(),
                    self.panel.actuals[d][h].to_string(),
                    self.panel.forecasts[d][h].to_string(),
                    self.naive_forecasts[d][h].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<panel>", e))?;
        Ok(())
    }
}

/// Arithmetic mean of member forecasts per day and hour.
pub fn ensemble(reports: &[EvaluationReport]) -> Result<EvaluationReport> {
    if reports.len() < 2 {
        return Err(Error::InvalidArgument(
            "an ensemble needs at least two reports".into(),
        ));
    }
    let first = &reports[0];
    for r in &reports[1..] {
        if r.panel.days != first.panel.days
            || r.panel.actuals != first.panel.actuals
            || r.market != first.market
        {
            return Err(Error::InvalidArgument(format!(
                "report {} is not aligned with {}",
                r.name, first.name
            )));
        }
    }
    let k = reports.len() as f64;
    let forecasts: Vec<Vec<f64>> = (0..first.panel.n_days())
        .map(|d| {
            (0..first.panel.width())
                .map(|h| reports.iter().map(|r| r.panel.forecasts[d][h]).sum::<f64>() / k)
                .collect()
        })
        .collect();
    let panel = ForecastPanel::new(first.panel.days.clone(), first.panel.actuals.clone(), forecasts)?;
    let mut out = EvaluationReport {
        name: format!("ensemble_{}", first.name),
        market: first.market.clone(),
        strategy: first.strategy,
        config: first.config.clone(),
        panel,
        naive_forecasts: first.naive_forecasts.clone(),
        metrics: first.metrics,
        selected_sources: first.selected_sources.clone(),
        subset_table: Vec::new(),
        traces: reports.iter().flat_map(|r| r.traces.iter().cloned()).collect(),
        fits: reports.iter().map(|r| r.fits).sum(),
        wall_clock_seconds: reports.iter().map(|r| r.wall_clock_seconds).sum(),
    };
    out.metrics = out.recompute_metrics()?;
    Ok(out)
}
