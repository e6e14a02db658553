//! Experiment orchestration: strategy runs, source-subset selection,
//! training-fraction sweeps, rolling recalibration, grids and ensembles.

mod config;
mod grid;
mod report;
mod rolling;
mod runner;
mod sweep;

pub use config::{
    DataSource, ExperimentConfig, FinetuneFrom, MarketData, RollingConfig, SourceSelection, Strategy, WindowSpec,
};
pub use grid::{cell_config, dm_directory, mean_metrics, run_grid, write_summary_csv, GridResult, MetricRow};
pub use report::{ensemble, EvaluationReport, StageTrace, SubsetScore};
pub use rolling::{rolling_calibration, rolling_recalibrate};
pub use runner::{enumerate_subsets, run_strategy, select_sources, SourceChoice};
pub use sweep::{fraction_sweep, SweepResult, SweepRow};
