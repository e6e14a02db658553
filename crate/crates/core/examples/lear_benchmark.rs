//! Naive, LEAR and a single network on the same split.
//!
//! LEAR runs many coordinate descent sweeps; use --release.

use chrono::NaiveDate;
use epf_transfer::experiments::{run_strategy, ExperimentConfig, MarketData, Strategy};
use epf_transfer::timeseries::{generate_synthetic, SplitSpec};

fn main() -> epf_transfer::Result<()> {
    let data: MarketData = generate_synthetic(2, 1, 140, 0.9)?
        .into_iter()
        .map(|s| (s.market_id().to_string(), s))
        .collect();
    let split = SplitSpec::consecutive(NaiveDate::from_ymd_opt(2013, 1, 1).unwrap(), 100, 14, 26);

    println!("{:<8} {:>8} {:>8} {:>8} {:>6}", "model", "MAE", "RMSE", "sMAPE", "rMAE");
    for strategy in [Strategy::Naive, Strategy::Lear, Strategy::Basic] {
        let mut config = ExperimentConfig::new(strategy, "M1", split.clone());
        config.train_config.max_epochs = 60;
        let r = run_strategy(&config, &data)?;
        let m = r.metrics;
        println!("{:<8} {:>8.3} {:>8.3} {:>8.2} {:>6.3}", strategy.as_str(), m.mae, m.rmse, m.smape, m.rmae);
    }
    Ok(())
}
