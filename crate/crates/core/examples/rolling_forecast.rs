//! Refit every day on a sliding window and forecast the next day.

use chrono::NaiveDate;
use epf_transfer::experiments::{
    rolling_recalibrate, ExperimentConfig, MarketData, SourceSelection, Strategy, WindowSpec,
};
use epf_transfer::timeseries::{generate_synthetic, SplitSpec};

fn main() -> epf_transfer::Result<()> {
    let data: MarketData = generate_synthetic(4, 2, 130, 0.9)?
        .into_iter()
        .map(|s| (s.market_id().to_string(), s))
        .collect();
    let mut config = ExperimentConfig::new(
        Strategy::PretrainFinetune,
        "M1",
        SplitSpec::consecutive(NaiveDate::from_ymd_opt(2013, 1, 1).unwrap(), 100, 20, 7),
    );
    config.source_markets = SourceSelection::All;
    config.train_config.max_epochs = 20;
    config.rolling.enabled = true;
    config.rolling.window_days = WindowSpec::Days(90);

    let r = rolling_recalibrate(&config, &data)?;
    for (day, (f, a)) in r.panel.days.iter().zip(r.panel.forecasts.iter().zip(&r.panel.actuals)) {
        let mae = f.iter().zip(a).map(|(f, a)| (f - a).abs()).sum::<f64>() / 24.0;
        println!("{day}  MAE {mae:.3}");
    }
    println!("{} fits, overall MAE {:.3}", r.fits, r.metrics.mae);
    Ok(())
}
