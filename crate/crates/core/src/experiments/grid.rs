//! Market x strategy comparison grid, DM matrices from stored reports and
//! repetition over seeds.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, MarketData, SourceSelection, Strategy};
use super::report::EvaluationReport;
use super::runner::run_strategy;
use crate::error::{Error, Result};
use crate::evaluation::{dm_grid, write_dm_grid_csv, write_metrics_csv, Metrics};

pub type MetricRow = (String, String, Metrics);

/// Config for one grid cell derived from a template. Source-using strategies
/// take the template's sources minus the target, or every other market when
/// that leaves nothing.
pub fn cell_config(template: &ExperimentConfig, market: &str, strategy: Strategy) -> ExperimentConfig {
    let source_markets = if !strategy.uses_sources() {
        SourceSelection::List(Vec::new())
    } else {
        match &template.source_markets {
            SourceSelection::List(l) => {
                let l: Vec<String> = l.iter().filter(|m| *m != market).cloned().collect();
                if l.is_empty() {
                    SourceSelection::All
                } else {
                    SourceSelection::List(l)
                }
            }
            other => other.clone(),
        }
    };
    ExperimentConfig {
        strategy,
        target_market: market.to_string(),
        source_markets,
        ..template.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Market-major, strategies in table order.
    pub reports: Vec<EvaluationReport>,
}

impl GridResult {
    pub fn metric_rows(&self) -> Vec<MetricRow> {
        self.reports
            .iter()
            .map(|r| (r.market.clone(), r.name.clone(), r.metrics))
            .collect()
    }

    /// Writes each report under `{out}/{market}/{strategy}/` plus
    /// `metrics.csv` and the table-shaped `summary.csv`.
    pub fn write(&self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let dirs = self
            .reports
            .iter()
            .map(|r| r.write(out_dir))
            .collect::<Result<Vec<_>>>()?;
        let rows = self.metric_rows();
        write_file(&out_dir.join("metrics.csv"), |f| write_metrics_csv(&rows, f))?;
        write_file(&out_dir.join("summary.csv"), |f| write_summary_csv(&rows, f))?;
        Ok(dirs)
    }
}

pub(crate) fn write_file(path: &Path, body: impl FnOnce(fs::File) -> Result<()>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    body(fs::File::create(path).map_err(|e| Error::io(path, e))?)
}

/// Every strategy for every market in `data`.
pub fn run_grid(template: &ExperimentConfig, data: &MarketData) -> Result<GridResult> {
    let mut reports = Vec::with_capacity(data.len() * Strategy::ALL.len());
    for market in data.keys() {
        for strategy in Strategy::ALL {
            reports.push(run_strategy(&cell_config(template, market, strategy), data)?);
        }
    }
    Ok(GridResult { reports })
}

/// One row per market and metric, one column per strategy:
/// `market,metric,naive,lear,...`.
pub fn write_summary_csv<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut strategies: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<&str, BTreeMap<&str, Metrics>> = BTreeMap::new();
    for (market, strategy, m) in rows {
        if !strategies.contains(&strategy.as_str()) {
            strategies.push(strategy);
        }
        cells.entry(market).or_default().insert(strategy, *m);
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["market", "metric"];
    header.extend(&strategies);
    w.write_record(&header)?;
    let metric_fns: [(&str, fn(&Metrics) -> f64); 4] = [
        ("mae", |m| m.mae),
        ("rmse", |m| m.rmse),
        ("smape", |m| m.smape),
        ("rmae", |m| m.rmae),
    ];
    for (market, by_strategy) in &cells {
        for (name, get) in metric_fns {
            let mut rec = vec![market.to_string(), name.to_string()];
            rec.extend(
                strategies
                    .iter()
                    .map(|s| by_strategy.get(s).map_or_else(|| "NA".to_string(), |m| get(m).to_string())),
            );
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<summary>", e))?;
    Ok(())
}

/// Per-(market, strategy) mean over seed repetitions, in first-seen order.
pub fn mean_metrics(per_seed: &[Vec<MetricRow>]) -> Vec<MetricRow> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut sums: BTreeMap<(String, String), (Metrics, usize)> = BTreeMap::new();
    for (market, strategy, m) in per_seed.iter().flatten() {
        let key = (market.clone(), strategy.clone());
        let e = sums.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (
                Metrics {
                    mae: 0.0,
                    rmse: 0.0,
                    smape: 0.0,
                    rmae: 0.0,
                },
                0,
            )
        });
        e.0.mae += m.mae;
        e.0.rmse += m.rmse;
        e.0.smape += m.smape;
        e.0.rmae += m.rmae;
        e.1 += 1;
    }
    order
        .into_iter()
        .map(|key| {
            let (s, n) = sums[&key];
            let n = n as f64;
            let m = Metrics {
                mae: s.mae / n,
                rmse: s.rmse / n,
                smape: s.smape / n,
                rmae: s.rmae / n,
            };
            (key.0, key.1, m)
        })
        .collect()
}

/// Pairwise DM p-values from every `report.json` under `{dir}/{market}/*/`,
/// written to `{dir}/{market}/dm_pvalues.csv`. Returns the written files.
pub fn dm_directory(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for market_dir in sorted_subdirs(dir)? {
        let mut reports = Vec::new();
        for run_dir in sorted_subdirs(&market_dir)? {
            let path = run_dir.join("report.json");
            if path.is_file() {
                reports.push(EvaluationReport::load(&path)?);
            }
        }
        if reports.len() < 2 {
            continue;
        }
        reports.sort_by(|a, b| (a.strategy, &a.name).cmp(&(b.strategy, &b.name)));
        let panels: Vec<_> = reports.iter().map(|r| (r.name.clone(), r.panel.clone())).collect();
        let grid = dm_grid(&panels)?;
        let labels: Vec<String> = panels.into_iter().map(|(l, _)| l).collect();
        let out = market_dir.join("dm_pvalues.csv");
        write_file(&out, |f| write_dm_grid_csv(&labels, &grid, f))?;
        written.push(out);
    }
    if written.is_empty() {
        return Err(Error::Empty("no market directory holds two or more reports"));
    }
    Ok(written)
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}
