use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::linear::DEFAULT_LAMBDA;
use crate::neural::{TrainConfig, DEFAULT_HIDDEN};
use crate::timeseries::{ingest_csv, HourlySeries, SplitSpec, SyntheticSpec};

pub type MarketData = BTreeMap<String, HourlySeries>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Naive,
    Lear,
    Basic,
    Integrate,
    PretrainOnly,
    MultiTask,
    PretrainFinetune,
}

impl Strategy {
    /// Table order: benchmarks first, transfer last.
    pub const ALL: [Strategy; 7] = [
        Strategy::Naive,
        Strategy::Lear,
        Strategy::Basic,
        Strategy::Integrate,
        Strategy::PretrainOnly,
        Strategy::MultiTask,
        Strategy::PretrainFinetune,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::Lear => "lear",
            Strategy::Basic => "basic",
            Strategy::Integrate => "integrate",
            Strategy::PretrainOnly => "pretrain_only",
            Strategy::MultiTask => "multi_task",
            Strategy::PretrainFinetune => "pretrain_finetune",
        }
    }

    /// Whether the strategy draws on other markets.
    pub fn uses_sources(self) -> bool {
        matches!(
            self,
            Strategy::Integrate | Strategy::PretrainOnly | Strategy::MultiTask | Strategy::PretrainFinetune
        )
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

/// `"auto"` searches every non-empty subset of the other markets by
/// validation MAE, `"all"` uses every other market, a list is used as given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSources", into = "RawSources")]
pub enum SourceSelection {
    Auto,
    All,
    List(Vec<String>),
}

impl Default for SourceSelection {
    fn default() -> Self {
        SourceSelection::List(Vec::new())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawSources {
    Keyword(String),
    List(Vec<String>),
}

impl TryFrom<RawSources> for SourceSelection {
    type Error = String;

    fn try_from(raw: RawSources) -> std::result::Result<Self, String> {
        match raw {
            RawSources::Keyword(k) if k == "auto" => Ok(SourceSelection::Auto),
            RawSources::Keyword(k) if k == "all" => Ok(SourceSelection::All),
            RawSources::Keyword(k) => Err(format!("expected \"auto\", \"all\" or a list, found \"{k}\"")),
            RawSources::List(l) => Ok(SourceSelection::List(l)),
        }
    }
}

impl From<SourceSelection> for RawSources {
    fn from(s: SourceSelection) -> Self {
        match s {
            SourceSelection::Auto => RawSources::Keyword("auto".into()),
            SourceSelection::All => RawSources::Keyword("all".into()),
            SourceSelection::List(l) => RawSources::List(l),
        }
    }
}

/// Calibration window length for rolling mode: `"expanding"` or a number of days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow", into = "RawWindow")]
pub enum WindowSpec {
    Expanding,
    Days(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawWindow {
    Days(usize),
    Keyword(String),
}

impl TryFrom<RawWindow> for WindowSpec {
    type Error = String;

    fn try_from(raw: RawWindow) -> std::result::Result<Self, String> {
        match raw {
            RawWindow::Days(d) => Ok(WindowSpec::Days(d)),
            RawWindow::Keyword(k) if k == "expanding" => Ok(WindowSpec::Expanding),
            RawWindow::Keyword(k) => Err(format!("expected \"expanding\" or a day count, found \"{k}\"")),
        }
    }
}

impl From<WindowSpec> for RawWindow {
    fn from(w: WindowSpec) -> Self {
        match w {
            WindowSpec::Expanding => RawWindow::Keyword("expanding".into()),
            WindowSpec::Days(d) => RawWindow::Days(d),
        }
    }
}

/// Starting point for each day's fine-tuning in rolling mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinetuneFrom {
    /// Pre-train on the day's source window, then fine-tune from it.
    Pretrained,
    /// Fine-tune from yesterday's fine-tuned model (pre-train only on day one).
    PreviousDay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RollingConfig {
    pub enabled: bool,
    pub train_val_ratio: f64,
    pub window_days: WindowSpec,
    pub finetune_from: FinetuneFrom,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            train_val_ratio: 0.75,
            window_days: WindowSpec::Expanding,
            finetune_from: FinetuneFrom::Pretrained,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// `{dir}/{market}.csv` for every listed market.
    Csv { dir: PathBuf, markets: Vec<String> },
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<MarketData> {
        match self {
            DataSource::Csv { dir, markets } => markets
                .iter()
                .map(|m| Ok((m.clone(), ingest_csv(dir.join(format!("{m}.csv")), m)?)))
                .collect(),
            DataSource::Synthetic(spec) => Ok(spec
                .generate()?
                .into_iter()
                .map(|s| (s.market_id().to_string(), s))
                .collect()),
        }
    }
}

/// One experiment. The experiment `seed` drives every random stream
/// (initialisation, shuffling, stacking); the `seed` fields inside the
/// training configs are overwritten with values derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub strategy: Strategy,
    pub target_market: String,
    #[serde(default)]
    pub source_markets: SourceSelection,
    #[serde(default)]
    pub feature_spec: FeatureSpec,
    #[serde(default)]
    pub train_config: TrainConfig,
    /// Fields left out fall back to the fine-tuning defaults, not the
    /// general training defaults.
    #[serde(default = "TrainConfig::fine_tune_default", deserialize_with = "fine_tune_patch")]
    pub fine_tune_config: TrainConfig,
    pub split: SplitSpec,
    #[serde(default = "one")]
    pub training_fraction: f64,
    #[serde(default)]
    pub rolling: RollingConfig,
    #[serde(default = "one_usize")]
    pub ensemble_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hidden")]
    pub hidden_layers: Vec<usize>,
    #[serde(default = "default_lambda")]
    pub lear_lambda: f64,
    #[serde(default)]
    pub data: Option<DataSource>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainPatch {
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    max_epochs: Option<usize>,
    patience: Option<usize>,
    adam_beta1: Option<f64>,
    adam_beta2: Option<f64>,
    adam_epsilon: Option<f64>,
    seed: Option<u64>,
}

fn fine_tune_patch<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<TrainConfig, D::Error> {
    let p = TrainPatch::deserialize(d)?;
    let b = TrainConfig::fine_tune_default();
    Ok(TrainConfig {
        learning_rate: p.learning_rate.unwrap_or(b.learning_rate),
        batch_size: p.batch_size.unwrap_or(b.batch_size),
        max_epochs: p.max_epochs.unwrap_or(b.max_epochs),
        patience: p.patience.unwrap_or(b.patience),
        adam_beta1: p.adam_beta1.unwrap_or(b.adam_beta1),
        adam_beta2: p.adam_beta2.unwrap_or(b.adam_beta2),
        adam_epsilon: p.adam_epsilon.unwrap_or(b.adam_epsilon),
        seed: p.seed.unwrap_or(b.seed),
    })
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_hidden() -> Vec<usize> {
    DEFAULT_HIDDEN.to_vec()
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

impl ExperimentConfig {
    pub fn new(strategy: Strategy, target_market: impl Into<String>, split: SplitSpec) -> Self {
        Self {
            strategy,
            target_market: target_market.into(),
            source_markets: SourceSelection::default(),
            feature_spec: FeatureSpec::default(),
            train_config: TrainConfig::default(),
            fine_tune_config: TrainConfig::fine_tune_default(),
            split,
            training_fraction: 1.0,
            rolling: RollingConfig::default(),
            ensemble_size: 1,
            seed: 0,
            hidden_layers: default_hidden(),
            lear_lambda: DEFAULT_LAMBDA,
            data: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Internal consistency checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.feature_spec.validate()?;
        self.train_config.validate()?;
        self.fine_tune_config.validate()?;
        if !(self.training_fraction > 0.0 && self.training_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "training_fraction {} outside (0, 1]",
                self.training_fraction
            )));
        }
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble_size must be at least 1".into()));
        }
        if self.hidden_layers.iter().any(|&w| w == 0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if !(self.lear_lambda >= 0.0) {
            return Err(Error::Config("lear_lambda must be non-negative".into()));
        }
        if let SourceSelection::List(list) = &self.source_markets {
            if list.contains(&self.target_market) {
                return Err(Error::Config(format!(
                    "target market {} listed among its own sources",
                    self.target_market
                )));
            }
            if !self.strategy.uses_sources() && !list.is_empty() {
                return Err(Error::Config(format!(
                    "strategy {} does not take source markets",
                    self.strategy
                )));
            }
        }
        if self.strategy == Strategy::PretrainOnly
            && self.source_markets == SourceSelection::List(Vec::new())
        {
            return Err(Error::Config("pretrain_only needs source markets".into()));
        }
        if self.rolling.enabled {
            let r = self.rolling.train_val_ratio;
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Config("rolling.train_val_ratio must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }

    /// Candidate sources: every market other than the target, in name order.
    pub fn candidate_sources(&self, data: &MarketData) -> Vec<String> {
        data.keys().filter(|m| **m != self.target_market).cloned().collect()
    }
}
