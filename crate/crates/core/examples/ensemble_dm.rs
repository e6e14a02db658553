//! Average two seeds and test whether the ensemble beats a single member.

use chrono::NaiveDate;
use epf_transfer::evaluation::dm_test;
use epf_transfer::experiments::{ensemble, run_strategy, ExperimentConfig, MarketData, Strategy};
use epf_transfer::timeseries::{generate_synthetic, SplitSpec};

fn main() -> epf_transfer::Result<()> {
    let data: MarketData = generate_synthetic(6, 1, 150, 0.9)?
        .into_iter()
        .map(|s| (s.market_id().to_string(), s))
        .collect();
    let split = SplitSpec::consecutive(NaiveDate::from_ymd_opt(2013, 1, 1).unwrap(), 100, 20, 30);

    let members = (1..=3)
        .map(|seed| {
            let mut c = ExperimentConfig::new(Strategy::Basic, "M1", split.clone());
            c.seed = seed;
            c.train_config.max_epochs = 40;
            run_strategy(&c, &data)
        })
        .collect::<epf_transfer::Result<Vec<_>>>()?;
    for m in &members {
        println!("seed {}: MAE {:.3}", m.config.seed, m.metrics.mae);
    }
    let avg = ensemble(&members)?;
    println!("ensemble: MAE {:.3}", avg.metrics.mae);

    // small p: the second panel is more accurate
    let dm = dm_test(&members[0].panel, &avg.panel)?;
    println!("DM statistic {:.3}, p {:.4}", dm.statistic, dm.p_value);
    Ok(())
}
