//! Every strategy on every market, then pairwise DM p-values.
//!
//! cargo run --release --example strategy_grid -- [out_dir]

use chrono::NaiveDate;
use epf_transfer::experiments::{dm_directory, run_grid, ExperimentConfig, MarketData, Strategy};
use epf_transfer::timeseries::{generate_synthetic, SplitSpec};

fn main() -> epf_transfer::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/grid-example".into());
    let data: MarketData = generate_synthetic(9, 3, 120, 0.9)?
        .into_iter()
        .map(|s| (s.market_id().to_string(), s))
        .collect();
    let mut template = ExperimentConfig::new(
        Strategy::Basic,
        "M1",
        SplitSpec::consecutive(NaiveDate::from_ymd_opt(2013, 1, 1).unwrap(), 80, 14, 14),
    );
    template.train_config.max_epochs = 20;
    template.fine_tune_config.max_epochs = 20;

    let grid = run_grid(&template, &data)?;
    for (market, strategy, m) in grid.metric_rows() {
        println!("{market:<4} {strategy:<18} MAE {:>7.3}  rMAE {:.3}", m.mae, m.rmae);
    }
    let dir = std::path::Path::new(&out);
    grid.write(dir)?;
    for p in dm_directory(dir)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
