//! Command-line front end. Errors are printed to stderr as one JSON line:
//! `{"error":"<kind>","message":"<text>"}`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use epf_transfer::evaluation::write_metrics_csv;
use epf_transfer::experiments::{
    dm_directory, ensemble, fraction_sweep, mean_metrics, rolling_recalibrate, run_grid, run_strategy,
    write_summary_csv, EvaluationReport, ExperimentConfig, MarketData, MetricRow,
};
use epf_transfer::timeseries::{describe, emit_csv, ingest_csv, write_describe_csv, SyntheticSpec};
use epf_transfer::{Error, Result};

#[derive(Parser)]
#[command(name = "epf", version, about = "Day-ahead electricity price forecasting experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Repeat with seeds `seed, seed + 1, ...` and report per-seed and mean metrics.
    #[arg(long, global = true, default_value_t = 1)]
    seeds: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Read a market CSV, repair DST artefacts and write the clean series.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        market: String,
    },
    /// Generate correlated synthetic markets as CSVs.
    Synth {
        #[arg(long)]
        markets: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        correlation: Option<f64>,
    },
    /// Yearly mean and standard deviation of prices per market.
    Describe {
        /// Market CSVs; the file stem is the market id. Defaults to the config's data.
        inputs: Vec<PathBuf>,
    },
    /// Run one experiment (rolling when enabled in the config).
    Run,
    /// Every strategy for every market.
    Grid,
    /// Training-fraction ablation.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,1.0")]
        fractions: Vec<f64>,
    },
    /// Daily recalibration over the test days.
    Rolling,
    /// Pairwise DM p-values from stored reports.
    Dm {
        /// Directory holding `{market}/{run}/report.json`; defaults to --out-dir.
        dir: Option<PathBuf>,
    },
    /// Average the forecasts of stored reports.
    Ensemble {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if g.seeds == 0 {
        return Err(Error::InvalidArgument("--seeds must be at least 1".into()));
    }
    match cli.command {
        Command::Ingest { input, market } => {
            let series = ingest_csv(&input, &market)?;
            let out = g.out_dir.join(format!("{market}.csv"));
            mkdir(&g.out_dir)?;
            emit_csv(&series, &out)?;
            println!("{} hours from {} written to {}", series.len(), series.start(), out.display());
        }
        Command::Synth {
            markets,
            days,
            correlation,
        } => {
            let mut spec = match g.config.as_deref().map(ExperimentConfig::load).transpose()? {
                Some(ExperimentConfig {
                    data: Some(epf_transfer::experiments::DataSource::Synthetic(s)),
                    ..
                }) => s,
                _ => SyntheticSpec::default(),
            };
            spec.n_markets = markets.unwrap_or(spec.n_markets);
            spec.days = days.unwrap_or(spec.days);
            spec.correlation = correlation.unwrap_or(spec.correlation);
            spec.seed = g.seed.unwrap_or(spec.seed);
            mkdir(&g.out_dir)?;
            for s in spec.generate()? {
                let out = g.out_dir.join(format!("{}.csv", s.market_id()));
                emit_csv(&s, &out)?;
                println!("{}", out.display());
            }
        }
        Command::Describe { inputs } => {
            let data: MarketData = if inputs.is_empty() {
                load_data(&config(g)?)?
            } else {
                inputs
                    .iter()
                    .map(|p| {
                        let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("market").to_string();
                        Ok((id.clone(), ingest_csv(p, &id)?))
                    })
                    .collect::<Result<_>>()?
            };
            let stats: Vec<_> = data.values().map(describe).collect();
            mkdir(&g.out_dir)?;
            let out = g.out_dir.join("describe.csv");
            write_describe_csv(&stats, create(&out)?)?;
            write_describe_csv(&stats, std::io::stdout())?;
        }
        Command::Run => {
            let cfg = config(g)?;
            let data = load_data(&cfg)?;
            per_seed(g, &cfg, |c, out| {
                let report = if c.rolling.enabled {
                    rolling_recalibrate(c, &data)?
                } else {
                    run_strategy(c, &data)?
                };
                Ok(vec![written(report, out)?])
            })?;
        }
        Command::Rolling => {
            let mut cfg = config(g)?;
            cfg.rolling.enabled = true;
            let data = load_data(&cfg)?;
            per_seed(g, &cfg, |c, out| Ok(vec![written(rolling_recalibrate(c, &data)?, out)?]))?;
        }
        Command::Grid => {
            let cfg = config(g)?;
            let data = load_data(&cfg)?;
            per_seed(g, &cfg, |c, out| {
                let grid = run_grid(c, &data)?;
                grid.write(out)?;
                println!("{} reports, summary at {}", grid.reports.len(), out.join("summary.csv").display());
                Ok(grid.metric_rows())
            })?;
        }
        Command::Sweep { fractions } => {
            let cfg = config(g)?;
            let data = load_data(&cfg)?;
            per_seed(g, &cfg, |c, out| {
                let sweep = fraction_sweep(c, &data, &fractions)?;
                let dir = out.join(&sweep.market);
                mkdir(&dir)?;
                let csv_path = dir.join("sweep.csv");
                sweep.write_csv(create(&csv_path)?)?;
                let json = dir.join("sweep.json");
                fs::write(&json, serde_json::to_string_pretty(&sweep)?).map_err(|e| io(&json, e))?;
                println!("{}", csv_path.display());
                let mut rows: Vec<MetricRow> = Vec::new();
                for (basic, transfer) in &sweep.reports {
                    let f = transfer.config.training_fraction;
                    rows.push((sweep.market.clone(), format!("basic@{f}"), basic.metrics));
                    rows.push((sweep.market.clone(), format!("pretrain_finetune@{f}"), transfer.metrics));
                }
                Ok(rows)
            })?;
        }
        Command::Dm { dir } => {
            for path in dm_directory(dir.as_deref().unwrap_or(&g.out_dir))? {
                println!("{}", path.display());
            }
        }
        Command::Ensemble { reports } => {
            let members = reports.iter().map(EvaluationReport::load).collect::<Result<Vec<_>>>()?;
            let out = ensemble(&members)?;
            written(out, &g.out_dir)?;
        }
    }
    Ok(())
}

fn config(g: &Global) -> Result<ExperimentConfig> {
    let path = g
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("this command needs --config".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_data(cfg: &ExperimentConfig) -> Result<MarketData> {
    cfg.data
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [data] section".into()))?
        .load()
}

/// Runs `body` once, or once per seed under `seed_{s}/` followed by
/// `metrics.csv` (all seeds) and `metrics_mean.csv` at the top level.
fn per_seed(
    g: &Global,
    cfg: &ExperimentConfig,
    mut body: impl FnMut(&ExperimentConfig, &Path) -> Result<Vec<MetricRow>>,
) -> Result<()> {
    if g.seeds == 1 {
        body(cfg, &g.out_dir)?;
        return Ok(());
    }
    let mut per = Vec::with_capacity(g.seeds);
    let mut all = Vec::new();
    for i in 0..g.seeds as u64 {
        let c = ExperimentConfig {
            seed: cfg.seed.wrapping_add(i),
            ..cfg.clone()
        };
        let rows = body(&c, &g.out_dir.join(format!("seed_{}", c.seed)))?;
        all.extend(
            rows.iter()
                .map(|(m, s, x)| (m.clone(), format!("{s}#seed_{}", c.seed), *x)),
        );
        per.push(rows);
    }
    let mean = mean_metrics(&per);
    mkdir(&g.out_dir)?;
    write_metrics_csv(&all, create(&g.out_dir.join("metrics.csv"))?)?;
    write_metrics_csv(&mean, create(&g.out_dir.join("metrics_mean.csv"))?)?;
    write_summary_csv(&mean, create(&g.out_dir.join("summary_mean.csv"))?)?;
    println!("mean metrics at {}", g.out_dir.join("metrics_mean.csv").display());
    Ok(())
}

fn written(report: EvaluationReport, out: &Path) -> Result<MetricRow> {
    let dir = report.write(out)?;
    let m = report.metrics;
    println!(
        "{} {}: mae {} rmse {} smape {} rmae {} -> {}",
        report.market,
        report.name,
        m.mae,
        m.rmse,
        m.smape,
        m.rmae,
        dir.display()
    );
    Ok((report.market, report.name, m))
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| io(path, e))
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}
