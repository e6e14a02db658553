//! Static-split strategy runs and source-subset selection.

use std::collections::BTreeMap;
use std::time::Instant;

use chrono::{Duration, NaiveDate};
use ndarray::Axis;

use super::config::{ExperimentConfig, MarketData, SourceSelection, Strategy};
use super::report::{ensemble, EvaluationReport, StageTrace, SubsetScore};
use crate::error::{Error, Result};
use crate::evaluation::{metrics, ForecastPanel};
use crate::features::{build_integrated_in, build_samples_in, stack, SampleSet, TargetWindow, HORIZON};
use crate::linear::{lear_fit, naive_forecast, LearModel};
use crate::neural::{fine_tune, train, MlpModel, TrainConfig, TrainTrace};
use crate::timeseries::{DayRange, HourlySeries};
use crate::transform::MarketTransform;

const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_PRETRAIN_INIT: u64 = 3;
const STREAM_PRETRAIN: u64 = 4;
const STREAM_FINETUNE: u64 = 5;
const STREAM_STACK: u64 = 6;

/// SplitMix64 finaliser over `seed + stream * golden`.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Training and validation days used to calibrate one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Calibration {
    pub train: DayRange,
    pub validation: DayRange,
}

fn window(r: DayRange) -> TargetWindow {
    TargetWindow::days(r.start, r.end)
}

pub(crate) enum Fitted {
    Naive,
    Lear(LearModel),
    Mlp {
        model: MlpModel,
        /// Market order of the input blocks for integrated models.
        integrated: Option<Vec<String>>,
    },
}

/// A calibrated model plus what it took to get there.
pub(crate) struct FitOutcome {
    pub fitted: Fitted,
    pub traces: Vec<StageTrace>,
    pub fits: usize,
}

/// Data, sources and per-market transforms for one calibration window.
pub(crate) struct Prepared<'a> {
    pub config: &'a ExperimentConfig,
    pub data: &'a MarketData,
    pub sources: Vec<String>,
    pub cal: Calibration,
    transforms: BTreeMap<String, MarketTransform>,
}

fn series<'a>(data: &'a MarketData, market: &str) -> Result<&'a HourlySeries> {
    data.get(market)
        .ok_or_else(|| Error::Config(format!("no data for market {market}")))
}

impl<'a> Prepared<'a> {
    /// Fits each involved market's transform on its own training window.
    pub fn new(
        config: &'a ExperimentConfig,
        data: &'a MarketData,
        sources: &[String],
        cal: Calibration,
    ) -> Result<Self> {
        let mut transforms = BTreeMap::new();
        for m in std::iter::once(&config.target_market).chain(sources) {
            let s = series(data, m)?;
            let fit_slice = s.slice(cal.train.start_time(), cal.train.end_time());
            if fit_slice.is_empty() {
                return Err(Error::InsufficientHistory {
                    needed: cal.train.days() as usize * 24,
                    available: 0,
                });
            }
            transforms.insert(
                m.clone(),
                MarketTransform::fit(fit_slice.prices(), fit_slice.temperatures())?,
            );
        }
        Ok(Self {
            config,
            data,
            sources: sources.to_vec(),
            cal,
            transforms,
        })
    }

    fn target(&self) -> &str {
        &self.config.target_market
    }

    fn samples(&self, market: &str, range: DayRange, stride: usize) -> Result<SampleSet> {
        build_samples_in(
            series(self.data, market)?,
            &self.transforms[market],
            &self.config.feature_spec,
            stride,
            Some(window(range)),
        )
    }

    fn integrated_markets(&self) -> Vec<String> {
        std::iter::once(self.target().to_string())
            .chain(self.sources.iter().cloned())
            .collect()
    }

    fn integrated_samples(&self, range: DayRange, stride: usize) -> Result<SampleSet> {
        let markets = self.integrated_markets();
        let list = markets
            .iter()
            .map(|m| series(self.data, m))
            .collect::<Result<Vec<_>>>()?;
        let tfs: Vec<MarketTransform> = markets.iter().map(|m| self.transforms[m]).collect();
        build_integrated_in(
            &list,
            &tfs,
            &self.config.feature_spec,
            self.target(),
            stride,
            Some(window(range)),
        )
    }

    fn target_train(&self) -> Result<SampleSet> {
        self.samples(self.target(), self.cal.train, 1)?
            .truncate_recent(self.config.training_fraction)
    }

    fn target_val(&self) -> Result<SampleSet> {
        self.samples(self.target(), self.cal.validation, 1)
    }

    fn stacked(&self, markets: &[String], range: DayRange) -> Result<SampleSet> {
        let sets = markets
            .iter()
            .map(|m| self.samples(m, range, 1))
            .collect::<Result<Vec<_>>>()?;
        if sets.is_empty() {
            return Ok(SampleSet::empty(self.config.feature_spec.input_dim()));
        }
        stack(&sets)
    }

    fn new_model(&self, input_dim: usize, stream: u64) -> Result<MlpModel> {
        let mut widths = vec![input_dim];
        widths.extend(&self.config.hidden_layers);
        widths.push(HORIZON);
        let mut model = MlpModel::new(&widths, derive_seed(self.config.seed, stream))?;
        model.spec = Some(self.config.feature_spec);
        Ok(model)
    }

    fn train_config(&self, base: &TrainConfig, stream: u64) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.config.seed, stream),
            ..*base
        }
    }

    fn label(&self, mut model: MlpModel) -> MlpModel {
        let t = self.transforms[self.target()];
        model.transforms.insert("price".into(), t.price);
        if self.config.feature_spec.use_temperature {
            model.transforms.insert("temperature".into(), t.temperature);
        }
        model
    }

    fn train_basic(&self) -> Result<FitOutcome> {
        let train_set = self.target_train()?;
        let val_set = self.target_val()?;
        let model = self.new_model(train_set.input_dim(), STREAM_INIT)?;
        let (model, trace) = train(
            &model,
            &train_set,
            &val_set,
            &self.train_config(&self.config.train_config, STREAM_TRAIN),
        )?;
        Ok(FitOutcome {
            fitted: Fitted::Mlp {
                model: self.label(model),
                integrated: None,
            },
            traces: vec![stage("train", trace)],
            fits: 1,
        })
    }

    /// Trains on stacked, shuffled source-market samples validated on stacked
    /// source validation samples. `None` when the sources yield no samples.
    pub fn pretrain(&self) -> Result<Option<(MlpModel, TrainTrace)>> {
        let train_set = self.stacked(&self.sources, self.cal.train)?;
        let val_set = self.stacked(&self.sources, self.cal.validation)?;
        if train_set.is_empty() || val_set.is_empty() {
            return Ok(None);
        }
        let train_set = train_set.shuffle(derive_seed(self.config.seed, STREAM_STACK));
        let model = self.new_model(train_set.input_dim(), STREAM_PRETRAIN_INIT)?;
        let (model, trace) = train(
            &model,
            &train_set,
            &val_set,
            &self.train_config(&self.config.train_config, STREAM_PRETRAIN),
        )?;
        Ok(Some((model, trace)))
    }

    /// Calibrates the configured strategy. `pretrained` replaces the
    /// pre-training stage of `pretrain_finetune` when given.
    pub fn fit(&self, pretrained: Option<&MlpModel>) -> Result<FitOutcome> {
        match self.config.strategy {
            Strategy::Naive => Ok(FitOutcome {
                fitted: Fitted::Naive,
                traces: Vec::new(),
                fits: 0,
            }),
            Strategy::Lear => {
                let model = lear_fit(&self.target_train()?, self.config.lear_lambda)?;
                Ok(FitOutcome {
                    fitted: Fitted::Lear(model),
                    traces: Vec::new(),
                    fits: 1,
                })
            }
            Strategy::Basic => self.train_basic(),
            Strategy::Integrate => {
                let train_set = self
                    .integrated_samples(self.cal.train, 1)?
                    .truncate_recent(self.config.training_fraction)?;
                let val_set = self.integrated_samples(self.cal.validation, 1)?;
                let model = self.new_model(train_set.input_dim(), STREAM_INIT)?;
                let (model, trace) = train(
                    &model,
                    &train_set,
                    &val_set,
                    &self.train_config(&self.config.train_config, STREAM_TRAIN),
                )?;
                Ok(FitOutcome {
                    fitted: Fitted::Mlp {
                        model: self.label(model),
                        integrated: Some(self.integrated_markets()),
                    },
                    traces: vec![stage("train", trace)],
                    fits: 1,
                })
            }
            Strategy::PretrainOnly => {
                let (model, trace) = self.pretrain()?.ok_or(Error::Empty(
                    "pretrain_only: source markets yield no samples",
                ))?;
                Ok(FitOutcome {
                    fitted: Fitted::Mlp {
                        model: self.label(model.clone()),
                        integrated: None,
                    },
                    traces: vec![stage("pretrain", trace)],
                    fits: 1,
                })
            }
            Strategy::MultiTask => {
                let mut train_sets = vec![self.target_train()?];
                let mut val_sets = vec![self.target_val()?];
                for m in &self.sources {
                    train_sets.push(self.samples(m, self.cal.train, 1)?);
                    val_sets.push(self.samples(m, self.cal.validation, 1)?);
                }
                let train_set = stack(&train_sets)?.shuffle(derive_seed(self.config.seed, STREAM_STACK));
                let val_set = stack(&val_sets)?;
                let model = self.new_model(train_set.input_dim(), STREAM_INIT)?;
                let (model, trace) = train(
                    &model,
                    &train_set,
                    &val_set,
                    &self.train_config(&self.config.train_config, STREAM_TRAIN),
                )?;
                Ok(FitOutcome {
                    fitted: Fitted::Mlp {
                        model: self.label(model),
                        integrated: None,
                    },
                    traces: vec![stage("train", trace)],
                    fits: 1,
                })
            }
            Strategy::PretrainFinetune => {
                let (base, mut traces, mut fits) = match pretrained {
                    Some(m) => (m.clone(), Vec::new(), 0),
                    None => match self.pretrain()? {
                        Some((m, t)) => (m, vec![stage("pretrain", t)], 1),
                        // nothing to pre-train on: fall back to the basic model
                        None => return self.train_basic(),
                    },
                };
                let (model, trace) = fine_tune(
                    &base,
                    &self.target_train()?,
                    &self.target_val()?,
                    &self.train_config(&self.config.fine_tune_config, STREAM_FINETUNE),
                )?;
                traces.push(stage("fine_tune", trace));
                fits += 1;
                Ok(FitOutcome {
                    fitted: Fitted::Mlp {
                        model: self.label(model),
                        integrated: None,
                    },
                    traces,
                    fits,
                })
            }
        }
    }

    /// Day-ahead forecasts in price units for each requested day.
    pub fn forecast(&self, fitted: &Fitted, days: &[NaiveDate]) -> Result<Vec<Vec<f64>>> {
        let Some((&first, &last)) = days.iter().min().zip(days.iter().max()) else {
            return Ok(Vec::new());
        };
        let target = series(self.data, self.target())?;
        if let Fitted::Naive = fitted {
            return days.iter().map(|&d| naive_forecast(target, d)).collect();
        }
        let range = DayRange::new(first, last + Duration::days(1));
        let set = match fitted {
            Fitted::Mlp {
                integrated: Some(_), ..
            } => self.integrated_samples(range, HORIZON)?,
            _ => self.samples(self.target(), range, HORIZON)?,
        };
        let price_tf = self.transforms[self.target()].price;
        let rows = days
            .iter()
            .map(|d| {
                set.anchors
                    .iter()
                    .position(|a| a.date() == *d)
                    .ok_or(Error::InsufficientHistory {
                        needed: self.config.feature_spec.lookback() + HORIZON,
                        available: target.len(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let inputs = set.inputs.select(Axis(0), &rows);
        let transformed: Vec<Vec<f64>> = match fitted {
            Fitted::Mlp { model, .. } => model
                .forward_batch(inputs.view())?
                .outer_iter()
                .map(|r| r.to_vec())
                .collect(),
            Fitted::Lear(model) => inputs
                .outer_iter()
                .map(|r| model.forecast(&r.to_vec()))
                .collect::<Result<_>>()?,
            Fitted::Naive => unreachable!(),
        };
        Ok(transformed.iter().map(|y| price_tf.inverse_slice(y)).collect())
    }

    pub fn actuals(&self, days: &[NaiveDate]) -> Result<Vec<Vec<f64>>> {
        actuals(self.data, self.target(), days)
    }
}

pub(crate) fn actuals(data: &MarketData, market: &str, days: &[NaiveDate]) -> Result<Vec<Vec<f64>>> {
    let s = series(data, market)?;
    days.iter()
        .map(|&d| {
            s.day_prices(d).map(<[f64]>::to_vec).ok_or_else(|| {
                Error::Config(format!("market {market} has no prices for {d}"))
            })
        })
        .collect()
}

fn stage(name: &str, trace: TrainTrace) -> StageTrace {
    StageTrace {
        stage: name.to_string(),
        trace,
    }
}

fn price_mae(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let (sum, n) = a
        .iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y))
        .fold((0.0, 0usize), |(s, n), (x, y)| (s + (x - y).abs(), n + 1));
    sum / n as f64
}

/// Result of calibrating once and forecasting the test days.
pub(crate) struct SingleRun {
    pub forecasts: Vec<Vec<f64>>,
    pub validation_mae: Option<f64>,
    pub traces: Vec<StageTrace>,
    pub fits: usize,
}

pub(crate) fn run_once(
    config: &ExperimentConfig,
    data: &MarketData,
    sources: &[String],
    cal: Calibration,
    test_days: &[NaiveDate],
    score_validation: bool,
    pretrained: Option<&MlpModel>,
) -> Result<SingleRun> {
    let prep = Prepared::new(config, data, sources, cal)?;
    let outcome = prep.fit(pretrained)?;
    let forecasts = prep.forecast(&outcome.fitted, test_days)?;
    let validation_mae = if score_validation {
        let days: Vec<NaiveDate> = cal.validation.iter_days().collect();
        let f = prep.forecast(&outcome.fitted, &days)?;
        Some(price_mae(&f, &prep.actuals(&days)?))
    } else {
        None
    };
    Ok(SingleRun {
        forecasts,
        validation_mae,
        traces: outcome.traces,
        fits: outcome.fits,
    })
}

/// Every non-empty subset of `candidates` (sorted), in lexicographic order.
pub fn enumerate_subsets(candidates: &[String]) -> Vec<Vec<String>> {
    let mut sorted = candidates.to_vec();
    sorted.sort();
    sorted.dedup();
    let n = sorted.len();
    let mut subsets: Vec<Vec<String>> = (1u64..(1 << n))
        .map(|mask| {
            (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| sorted[i].clone())
                .collect()
        })
        .collect();
    subsets.sort();
    subsets
}

/// Best subset by target-validation MAE in price units; ties go to the first
/// subset in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceChoice {
    pub best: Vec<String>,
    pub table: Vec<SubsetScore>,
}

fn search(
    config: &ExperimentConfig,
    data: &MarketData,
    candidates: &[String],
    cal: Calibration,
    test_days: &[NaiveDate],
) -> Result<(SourceChoice, SingleRun)> {
    if candidates.is_empty() {
        return Err(Error::Config("source selection needs at least one candidate".into()));
    }
    let mut table = Vec::new();
    let mut best: Option<(Vec<String>, f64, SingleRun)> = None;
    for subset in enumerate_subsets(candidates) {
        let run = run_once(config, data, &subset, cal, test_days, true, None)?;
        let score = run.validation_mae.expect("scored");
        table.push(SubsetScore {
            sources: subset.clone(),
            validation_mae: score,
        });
        if best.as_ref().map_or(true, |(_, b, _)| score < *b) {
            best = Some((subset, score, run));
        }
    }
    let (best, _, run) = best.expect("at least one subset");
    Ok((SourceChoice { best, table }, run))
}

fn static_calibration(config: &ExperimentConfig) -> Calibration {
    Calibration {
        train: config.split.train,
        validation: config.split.validation,
    }
}

/// Enumerates source subsets for the configured strategy on the static split.
pub fn select_sources(config: &ExperimentConfig, data: &MarketData) -> Result<SourceChoice> {
    config.validate()?;
    let candidates = match &config.source_markets {
        SourceSelection::List(l) if !l.is_empty() => l.clone(),
        _ => config.candidate_sources(data),
    };
    let (choice, _) = search(config, data, &candidates, static_calibration(config), &[])?;
    Ok(choice)
}

pub(crate) fn check_markets(config: &ExperimentConfig, data: &MarketData) -> Result<()> {
    series(data, &config.target_market)?;
    if let SourceSelection::List(l) = &config.source_markets {
        for m in l {
            series(data, m)?;
        }
    }
    Ok(())
}

/// Fixed source list implied by the config, or `None` when a search is needed.
pub(crate) fn fixed_sources(config: &ExperimentConfig, data: &MarketData) -> Option<Vec<String>> {
    if !config.strategy.uses_sources() {
        return Some(Vec::new());
    }
    match &config.source_markets {
        SourceSelection::Auto => None,
        SourceSelection::All => Some(config.candidate_sources(data)),
        SourceSelection::List(l) => Some(l.clone()),
    }
}

pub(crate) fn assemble_report(
    config: &ExperimentConfig,
    data: &MarketData,
    days: Vec<NaiveDate>,
    forecasts: Vec<Vec<f64>>,
    selected_sources: Vec<String>,
    subset_table: Vec<SubsetScore>,
    traces: Vec<StageTrace>,
    fits: usize,
    started: Instant,
) -> Result<EvaluationReport> {
    let target = series(data, &config.target_market)?;
    let actual = actuals(data, &config.target_market, &days)?;
    let naive = days
        .iter()
        .map(|&d| naive_forecast(target, d))
        .collect::<Result<Vec<_>>>()?;
    let panel = ForecastPanel::new(days.clone(), actual.clone(), forecasts)?;
    let naive_panel = ForecastPanel::new(days, actual, naive.clone())?;
    let metrics = metrics(&panel, &naive_panel)?;
    Ok(EvaluationReport {
        name: config.strategy.as_str().to_string(),
        market: config.target_market.clone(),
        strategy: config.strategy,
        config: config.clone(),
        panel,
        naive_forecasts: naive,
        metrics,
        selected_sources,
        subset_table,
        traces,
        fits,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Runs one experiment on the static train / validation / test split.
pub fn run_strategy(config: &ExperimentConfig, data: &MarketData) -> Result<EvaluationReport> {
    run_strategy_with(config, data, None)
}

/// As [`run_strategy`], reusing a pre-trained model for `pretrain_finetune`.
pub(crate) fn run_strategy_with(
    config: &ExperimentConfig,
    data: &MarketData,
    pretrained: Option<&MlpModel>,
) -> Result<EvaluationReport> {
    config.validate()?;
    check_markets(config, data)?;
    if config.ensemble_size > 1 {
        let members = (0..config.ensemble_size as u64)
            .map(|i| {
                let member = ExperimentConfig {
                    seed: config.seed.wrapping_add(i),
                    ensemble_size: 1,
                    ..config.clone()
                };
                run_strategy_with(&member, data, None)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = ensemble(&members)?;
        out.name = config.strategy.as_str().to_string();
        out.config = config.clone();
        return Ok(out);
    }

    let started = Instant::now();
    let cal = static_calibration(config);
    let test_days: Vec<NaiveDate> = config.split.test.iter_days().collect();
    let (sources, table, run) = match fixed_sources(config, data) {
        Some(sources) => {
            let run = run_once(config, data, &sources, cal, &test_days, false, pretrained)?;
            (sources, Vec::new(), run)
        }
        None => {
            let candidates = config.candidate_sources(data);
            let (choice, run) = search(config, data, &candidates, cal, &test_days)?;
            (choice.best, choice.table, run)
        }
    };
    let fits = run.fits + table.len().saturating_sub(1) * run.fits;
    assemble_report(
        config,
        data,
        test_days,
        run.forecasts,
        sources,
        table,
        run.traces,
        fits,
        started,
    )
}

/// Pre-trains once on the given sources over the static split.
pub(crate) fn pretrain_static(
    config: &ExperimentConfig,
    data: &MarketData,
    sources: &[String],
) -> Result<Option<MlpModel>> {
    let prep = Prepared::new(config, data, sources, static_calibration(config))?;
    Ok(prep.pretrain()?.map(|(m, _)| m))
}
