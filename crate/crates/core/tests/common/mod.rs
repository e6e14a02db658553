#![allow(dead_code)]

use chrono::NaiveDate;
use epf_transfer::experiments::MarketData;
use epf_transfer::neural::{Activation, EarlyStopping, MlpModel, StopDecision};
use epf_transfer::timeseries::{generate_synthetic, HourlySeries};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-scale..scale))
}

pub fn to_map(series: Vec<HourlySeries>) -> MarketData {
    series
        .into_iter()
        .map(|s| (s.market_id().to_string(), s))
        .collect()
}

pub fn synthetic(seed: u64, markets: usize, days: usize, correlation: f64) -> MarketData {
    to_map(generate_synthetic(seed, markets, days, correlation).unwrap())
}

/// Plain-loop forward pass and MAE, independent of the library's matrix
/// code. Also returns the sign pattern of every hidden pre-activation and
/// every residual, which fixes the piece of the piecewise-smooth loss.
pub fn reference_loss(model: &MlpModel, x: &Array2<f64>, y: &Array2<f64>) -> (f64, Vec<i8>) {
    let mut pattern = Vec::new();
    let mut total = 0.0;
    for (row, target) in x.rows().into_iter().zip(y.rows()) {
        let mut a: Vec<f64> = row.to_vec();
        for layer in &model.layers {
            let mut next = Vec::with_capacity(layer.output_dim());
            for o in 0..layer.output_dim() {
                let mut z = layer.bias[o];
                for (i, v) in a.iter().enumerate() {
                    z += layer.weights[[o, i]] * v;
                }
                if layer.activation == Activation::Relu {
                    pattern.push(sign(z));
                    next.push(z.max(0.0));
                } else {
                    next.push(z);
                }
            }
            a = next;
        }
        for (p, t) in a.iter().zip(target) {
            pattern.push(sign(p - t));
            total += (p - t).abs();
        }
    }
    (total / y.len() as f64, pattern)
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Compares analytic gradients against central differences with step `h`.
/// A coordinate is skipped when the perturbation moves any hidden unit or
/// residual across zero (the loss is not differentiable there) or when a
/// residual is within `1e-8` of zero. Relative error uses the denominator
/// `max(|analytic|, |numeric|, 1e-3)`.
pub fn gradient_check(model: &MlpModel, x: &Array2<f64>, y: &Array2<f64>, h: f64) -> GradCheck {
    let (_, grads) = model.loss_and_gradients(x.view(), y.view()).unwrap();
    let (_, base_pattern) = reference_loss(model, x, y);
    let near_zero_residual = {
        let pred = model.forward_batch(x.view()).unwrap();
        (&pred - y).iter().any(|r| r.abs() < 1e-8)
    };
    let mut out = GradCheck::default();
    let mut probe = model.clone();
    for (l, layer) in model.layers.iter().enumerate() {
        let n_w = layer.weights.len();
        for k in 0..n_w + layer.bias.len() {
            let (analytic, original) = if k < n_w {
                let idx = (k / layer.input_dim(), k % layer.input_dim());
                (grads.layers[l].0[idx], layer.weights[idx])
            } else {
                (grads.layers[l].1[k - n_w], layer.bias[k - n_w])
            };
            let mut eval = |v: f64| {
                if k < n_w {
                    probe.layers[l].weights[(k / layer.input_dim(), k % layer.input_dim())] = v;
                } else {
                    probe.layers[l].bias[k - n_w] = v;
                }
                reference_loss(&probe, x, y)
            };
            let (plus, p_pattern) = eval(original + h);
            let (minus, m_pattern) = eval(original - h);
            eval(original);
            if near_zero_residual || p_pattern != base_pattern || m_pattern != base_pattern {
                out.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
            out.max_rel_error = out.max_rel_error.max(rel);
            out.checked += 1;
        }
    }
    out
}

/// Largest violation of the lasso optimality conditions for
/// `|y - b - X beta|^2 + lambda |beta|_1`: for nonzero `beta_j`,
/// `2 x_j' r = lambda sign(beta_j)`; for zero `beta_j`, `|2 x_j' r| <= lambda`.
pub fn kkt_violation(x: &Array2<f64>, y: &Array1<f64>, beta: &Array1<f64>, intercept: f64, lambda: f64) -> f64 {
    let r: Array1<f64> = y - &x.dot(beta) - intercept;
    let mut worst = r.sum().abs() * 2.0; // intercept stationarity
    for j in 0..beta.len() {
        let g = 2.0 * x.column(j).dot(&r);
        let v = if beta[j] != 0.0 {
            (g - lambda * beta[j].signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Lasso objective with intercept.
pub fn lasso_objective(x: &Array2<f64>, y: &Array1<f64>, beta: &Array1<f64>, intercept: f64, lambda: f64) -> f64 {
    let r: Array1<f64> = y - &x.dot(beta) - intercept;
    r.dot(&r) + lambda * beta.mapv(f64::abs).sum()
}

/// Scripted validation-loss sequences with hand-derived early-stopping
/// outcomes: `(patience, losses, stopped_epoch, best_epoch)`. Epochs are
/// 1-based; when no stop fires the run ends at the last listed epoch.
pub fn early_stopping_cases() -> Vec<(usize, Vec<f64>, usize, usize)> {
    let rep = |v: f64, n: usize| vec![v; n];
    let cat = |parts: &[Vec<f64>]| parts.concat();
    vec![
        (1, vec![5.0, 4.0, 4.5], 3, 2),
        (1, vec![5.0, 4.0, 3.0, 2.0, 1.0], 5, 5),
        (1, vec![1.0, 2.0], 2, 1),
        (1, vec![3.0, 3.0], 2, 1),
        (1, vec![4.0, 3.0, 3.5, 2.0], 3, 2),
        (1, vec![10.0], 1, 1),
        (1, vec![2.0, 1.0, 1.0], 3, 2),
        (1, vec![5.0, 4.0, 3.0, 3.0000001], 4, 3),
        (1, vec![9.0, 8.0, 7.0, 6.0, 7.0, 1.0], 5, 4),
        (1, vec![1.0, 0.5, 0.25, 0.3, 0.1], 4, 3),
        (10, cat(&[vec![5.0, 4.0], rep(4.5, 10), vec![1.0]]), 12, 2),
        (10, cat(&[vec![5.0, 4.0], rep(4.5, 9), vec![3.9], rep(4.0, 10)]), 22, 12),
        (10, (0..15).map(|i| 20.0 - i as f64).collect(), 15, 15),
        (10, cat(&[vec![1.0], rep(2.0, 10)]), 11, 1),
        (10, cat(&[vec![1.0], rep(2.0, 9), vec![0.5], rep(0.5, 10)]), 21, 11),
        (10, rep(3.0, 11), 11, 1),
        (10, vec![5.0, 6.0, 7.0, 8.0, 9.0], 5, 1),
        (10, cat(&[vec![2.0, 1.0], rep(1.5, 9)]), 11, 2),
        (10, cat(&[vec![2.0, 1.0], rep(1.5, 10), vec![0.1]]), 12, 2),
        (10, cat(&[vec![10.0, 9.0, 8.0], rep(8.5, 10), vec![0.0]]), 13, 3),
    ]
}

/// Feeds `losses` to an early stopper; returns `(stopped_epoch, best_epoch)`.
pub fn run_script(patience: usize, losses: &[f64]) -> (usize, usize) {
    let mut stopper = EarlyStopping::new(patience);
    let mut stopped = 0;
    for (i, &loss) in losses.iter().enumerate() {
        stopped = i + 1;
        if stopper.observe(stopped, loss) == StopDecision::Stop {
            break;
        }
    }
    (stopped, stopper.best_epoch())
}
