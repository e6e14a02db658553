//! Same network with and without temperature lags and weekday dummies.

use chrono::NaiveDate;
use epf_transfer::features::FeatureSpec;
use epf_transfer::experiments::{run_strategy, ExperimentConfig, MarketData, Strategy};
use epf_transfer::timeseries::{generate_synthetic, SplitSpec};

fn main() -> epf_transfer::Result<()> {
    let data: MarketData = generate_synthetic(8, 1, 160, 0.9)?
        .into_iter()
        .map(|s| (s.market_id().to_string(), s))
        .collect();
    let split = SplitSpec::consecutive(NaiveDate::from_ymd_opt(2013, 1, 1).unwrap(), 110, 20, 30);

    for (label, spec) in [("full", FeatureSpec::default()), ("price only", FeatureSpec::price_only())] {
        let mut config = ExperimentConfig::new(Strategy::Basic, "M1", split.clone());
        config.feature_spec = spec;
        config.train_config.max_epochs = 60;
        let r = run_strategy(&config, &data)?;
        println!("{label:<11} inputs {:>3}  MAE {:.3}", spec.input_dim(), r.metrics.mae);
    }
    Ok(())
}
