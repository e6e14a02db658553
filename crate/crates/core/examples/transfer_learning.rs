//! Pre-train on three correlated synthetic markets, fine-tune on the fourth,
//! and compare against a model trained on the target alone.
//!
//! cargo run --release --example transfer_learning -- [seed] [fraction]

use chrono::NaiveDate;
use epf_transfer::evaluation::dm_test;
use epf_transfer::experiments::{fraction_sweep, ExperimentConfig, MarketData, SourceSelection, Strategy};
use epf_transfer::timeseries::{generate_synthetic, SplitSpec};

fn main() -> epf_transfer::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let fraction: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.1);

    let data: MarketData = generate_synthetic(seed, 4, 200, 0.9)?
        .into_iter()
        .map(|s| (s.market_id().to_string(), s))
        .collect();

    let start = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
    let mut config = ExperimentConfig::new(
        Strategy::PretrainFinetune,
        "M1",
        SplitSpec::consecutive(start, 150, 20, 30),
    );
    config.source_markets = SourceSelection::All;
    config.seed = seed;
    config.train_config.max_epochs = 60;

    let t = std::time::Instant::now();
    let sweep = fraction_sweep(&config, &data, &[fraction, 1.0])?;
    for row in &sweep.rows {
        println!(
            "fraction {:>4}: basic MAE {:.3}  fine-tuned MAE {:.3}  DM p {}",
            row.fraction,
            row.basic_mae,
            row.transfer_mae,
            row.dm.map_or("n/a".to_string(), |d| format!("{:.4}", d.p_value)),
        );
    }
    let (basic, transfer) = &sweep.reports[0];
    for r in [basic, transfer] {
        for s in &r.traces {
            println!(
                "  {} {}: best epoch {} of {}",
                r.name, s.stage, s.trace.best_epoch, s.trace.stopped_epoch
            );
        }
    }
    let dm = dm_test(&basic.panel, &transfer.panel)?;
    println!("sources {:?}, {:.1}s", sweep.sources, t.elapsed().as_secs_f64());
    println!("DM statistic {:.3}", dm.statistic);
    Ok(())
}
