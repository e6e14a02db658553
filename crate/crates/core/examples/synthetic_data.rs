//! Generate correlated synthetic markets, print yearly statistics and
//! check the price transform round trip.
//!
//! cargo run --example synthetic_data -- [out.csv]

use epf_transfer::timeseries::{describe, emit_csv, generate_synthetic};
use epf_transfer::transform::MarketTransform;

fn main() -> epf_transfer::Result<()> {
    let markets = generate_synthetic(3, 3, 400, 0.8)?;
    for s in &markets {
        let stats = describe(s);
        for y in &stats.years {
            println!("{} {}: mean {:.2} std {:.2}", s.market_id(), y.year, y.mean, y.std);
        }
        let t = MarketTransform::fit(s.prices(), s.temperatures())?;
        let worst = s
            .prices()
            .iter()
            .map(|&p| (t.price.inverse(t.price.forward(p)) - p).abs())
            .fold(0.0, f64::max);
        println!("  median {:.2}, MAD {:.2}, round-trip error {worst:.1e}", t.price.median, t.price.mad);
    }
    if let Some(path) = std::env::args().nth(1) {
        emit_csv(&markets[0], &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
