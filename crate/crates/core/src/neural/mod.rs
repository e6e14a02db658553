//! Dense feed-forward network trained with MAE loss and Adam.
//!
//! Weights are stored `out x in` so a batch forward pass is
//! `Z = A W^T + b`. Hidden layers use ReLU, the output layer is linear.

mod adam;
mod train;

pub use adam::Adam;
pub use train::{fine_tune, train, EarlyStopping, StopDecision, TrainConfig, TrainTrace};

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::transform::TransformParams;

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
    pub trainable: bool,
}

impl DenseLayer {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn preactivation(&self, a: &ArrayView2<f64>) -> Array2<f64> {
        a.dot(&self.weights.t()) + &self.bias
    }
}

/// Per-layer `(d weights, d bias)` in layer order. Frozen layers hold zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    /// Transform parameters needed to invert predictions, keyed by feature
    /// group (`price`, `temperature`, ...).
    pub transforms: BTreeMap<String, TransformParams>,
    pub seed: u64,
    pub spec: Option<FeatureSpec>,
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases, ReLU hidden layers and a linear
    /// output layer. `widths` lists every layer width including input and
    /// output.
    pub fn new(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument(format!(
                "invalid layer widths {widths:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_layers = widths.len() - 1;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights =
                    Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-limit..limit));
                DenseLayer {
                    weights,
                    bias: Array1::zeros(fan_out),
                    activation: if l + 1 == n_layers {
                        Activation::Linear
                    } else {
                        Activation::Relu
                    },
                    trainable: true,
                }
            })
            .collect();
        Ok(Self {
            layers,
            transforms: BTreeMap::new(),
            seed,
            spec: None,
        })
    }

    /// Two hidden layers of widths 64 and 32.
    pub fn init(
        input_dim: usize,
        hidden1: usize,
        hidden2: usize,
        output_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::new(&[input_dim, hidden1, hidden2, output_dim], seed)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(DenseLayer::output_dim))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn with_transform(mut self, group: &str, params: TransformParams) -> Self {
        self.transforms.insert(group.to_string(), params);
        self
    }

    /// Freezes every layer except the output layer.
    pub fn freeze_hidden(&mut self) {
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.trainable = i == last;
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("contiguous row");
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: inputs.ncols(),
            });
        }
        let mut a = self.layers[0].preactivation(&inputs);
        self.layers[0].activation.apply(&mut a);
        for layer in &self.layers[1..] {
            let mut z = layer.preactivation(&a.view());
            layer.activation.apply(&mut z);
            a = z;
        }
        Ok(a)
    }

    /// Mean absolute error over all entries of the batch and its gradient
    /// with respect to every trainable parameter. The subgradient of `|r|`
    /// at `r = 0` is taken as 0.
    pub fn loss_and_gradients(
        &self,
        inputs: ArrayView2<f64>,
        targets: ArrayView2<f64>,
    ) -> Result<(f64, Gradients)> {
        if inputs.nrows() == 0 {
            return Err(Error::Empty("empty batch"));
        }
        if targets.dim() != (inputs.nrows(), self.output_dim()) {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: targets.ncols(),
            });
        }
        let lowest_trainable = self.layers.iter().position(|l| l.trainable);

        // forward, keeping pre-activations and activations
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = if i == 0 {
                layer.preactivation(&inputs)
            } else {
                layer.preactivation(&acts[i - 1].view())
            };
            let mut a = z.clone();
            layer.activation.apply(&mut a);
            pre.push(z);
            acts.push(a);
        }

        let out = acts.last().unwrap();
        let scale = 1.0 / out.len() as f64;
        let loss = (out - &targets).mapv(f64::abs).sum() * scale;
        let mut delta = (out - &targets).mapv(|r| {
            if r > 0.0 {
                scale
            } else if r < 0.0 {
                -scale
            } else {
                0.0
            }
        });

        let mut grads: Vec<(Array2<f64>, Array1<f64>)> = self
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
            .collect();
        let Some(lowest) = lowest_trainable else {
            return Ok((loss, Gradients { layers: grads }));
        };

        for i in (lowest..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if layer.activation == Activation::Relu {
                delta.zip_mut_with(&pre[i], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            if layer.trainable {
                grads[i].0 = if i == 0 {
                    delta.t().dot(&inputs)
                } else {
                    delta.t().dot(&acts[i - 1])
                };
                grads[i].1 = delta.sum_axis(Axis(0));
            }
            if i > lowest {
                delta = delta.dot(&layer.weights);
            }
        }
        Ok((loss, Gradients { layers: grads }))
    }

    /// Forward pass followed by the inverse price transform.
    pub fn predict_prices(&self, input: &[f64], target: &TransformParams) -> Result<Vec<f64>> {
        Ok(target.inverse_slice(&self.forward(input)?))
    }
}

/// Mean of absolute differences.
pub fn loss_mae(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: pred.len(),
            got: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("loss over empty vectors"));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// MAE over every entry of a batch.
pub fn batch_mae(model: &MlpModel, inputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<f64> {
    let pred = model.forward_batch(inputs)?;
    if pred.dim() != targets.dim() {
        return Err(Error::DimensionMismatch {
            expected: pred.ncols(),
            got: targets.ncols(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("empty evaluation set"));
    }
    Ok((pred - targets).mapv(f64::abs).mean().unwrap())
}
