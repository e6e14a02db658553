//! Build lagged samples for one market and train the 64/32 network directly,
//! without the experiment runner.

use epf_transfer::features::{build_samples_in, FeatureSpec, TargetWindow};
use epf_transfer::neural::{batch_mae, train, MlpModel, TrainConfig};
use epf_transfer::timeseries::generate_synthetic;
use epf_transfer::transform::MarketTransform;

fn main() -> epf_transfer::Result<()> {
    let s = generate_synthetic(5, 1, 120, 0.9)?.remove(0);
    let day = |k: i64| s.start().date() + chrono::Duration::days(k);
    let fit_on = s.slice(s.start(), day(90).and_hms_opt(0, 0, 0).unwrap());
    let t = MarketTransform::fit(fit_on.prices(), fit_on.temperatures())?;

    let spec = FeatureSpec::default();
    let train_set = build_samples_in(&s, &t, &spec, 1, Some(TargetWindow::days(day(7), day(90))))?;
    let val_set = build_samples_in(&s, &t, &spec, 24, Some(TargetWindow::days(day(90), day(120))))?;
    println!("{} training rows, {} validation days, {} inputs", train_set.len(), val_set.len(), spec.input_dim());

    let model = MlpModel::init(spec.input_dim(), 64, 32, 24, 1)?;
    let config = TrainConfig {
        max_epochs: 40,
        ..TrainConfig::default()
    };
    let (trained, trace) = train(&model, &train_set, &val_set, &config)?;
    println!(
        "epochs {} (best {}), validation MAE {:.4} in transformed units",
        trace.stopped_epoch,
        trace.best_epoch,
        batch_mae(&trained, val_set.inputs.view(), val_set.targets.view())?
    );
    Ok(())
}
