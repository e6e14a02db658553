//! Benchmarks: the calendar naive rule and LEAR, a per-hour lasso
//! regression on the same regressors the network sees.
//!
//! The lasso objective is the plain residual sum of squares plus
//! `lambda * sum |beta|` (no 1/2 or 1/n factor), so each coordinate is
//! soft-thresholded at `lambda / 2`.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SampleSet;
use crate::timeseries::HourlySeries;

pub const DEFAULT_LAMBDA: f64 = 0.001;

/// Copies the prices of `d - 7` on Monday, Saturday and Sunday and the prices
/// of `d - 1` on the other days.
pub fn naive_forecast(history: &HourlySeries, target_day: NaiveDate) -> Result<Vec<f64>> {
    let lag = match target_day.weekday() {
        Weekday::Mon | Weekday::Sat | Weekday::Sun => 7,
        _ => 1,
    };
    let source = target_day - Duration::days(lag);
    history
        .day_prices(source)
        .map(<[f64]>::to_vec)
        .ok_or(Error::InsufficientHistory {
            needed: (lag as usize) * 24,
            available: history.len(),
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub record_objective: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_sweeps: 10_000,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub coef: Array1<f64>,
    pub intercept: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective after each sweep when requested (index 0 = start).
    pub objective: Vec<f64>,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Per-response outcome of [`solve_gram`].
struct GramSolution {
    beta: Array1<f64>,
    sweeps: usize,
    converged: bool,
    objective: Vec<f64>,
}

/// Cyclic coordinate descent in covariance form for `k` responses sharing
/// one design: with `gram = X'X`, `xty = X'Y` (`p x k`) and `yty[h] = y_h'y_h`,
/// minimises `RSS_h + lambda * |beta_h|_1` for every column `h`. Each
/// response follows exactly the iterates of a separate solve and stops
/// updating once its own largest coordinate change drops below tolerance.
fn solve_gram(
    gram: ArrayView2<f64>,
    xty: ArrayView2<f64>,
    yty: &[f64],
    lambda: f64,
    opts: &LassoOptions,
) -> Vec<GramSolution> {
    let (p, k) = xty.dim();
    let mut beta = Array2::<f64>::zeros((p, k));
    let mut q = Array2::<f64>::zeros((p, k)); // gram * beta
    let half = 0.5 * lambda;
    let objective = |h: usize, beta: &Array2<f64>, q: &Array2<f64>| {
        let b = beta.column(h);
        yty[h] - 2.0 * b.dot(&xty.column(h)) + b.dot(&q.column(h)) + lambda * b.mapv(f64::abs).sum()
    };
    let mut traces = vec![Vec::new(); k];
    if opts.record_objective {
        for (h, t) in traces.iter_mut().enumerate() {
            t.push(objective(h, &beta, &q));
        }
    }
    let mut active = vec![true; k];
    let mut sweeps = vec![0; k];
    let mut converged = vec![false; k];
    let mut max_change = vec![0.0f64; k];
    let mut delta = vec![0.0f64; k];
    let mut sweep = 0;
    while sweep < opts.max_sweeps && active.contains(&true) {
        sweep += 1;
        max_change.fill(0.0);
        for j in 0..p {
            let gjj = gram[[j, j]];
            if gjj <= 0.0 {
                continue;
            }
            let mut moved = false;
            for h in 0..k {
                delta[h] = 0.0;
                if !active[h] {
                    continue;
                }
                let old = beta[[j, h]];
                let rho = xty[[j, h]] - (q[[j, h]] - gjj * old);
                let new = soft_threshold(rho, half) / gjj;
                let d = new - old;
                if d != 0.0 {
                    beta[[j, h]] = new;
                    delta[h] = d;
                    max_change[h] = max_change[h].max(d.abs());
                    moved = true;
                }
            }
            if moved {
                let q = q.as_slice_mut().expect("standard layout");
                for (row, &g) in q.chunks_exact_mut(k).zip(gram.column(j)) {
                    for (qh, &d) in row.iter_mut().zip(&delta) {
                        *qh += d * g;
                    }
                }
            }
        }
        for h in 0..k {
            if !active[h] {
                continue;
            }
            sweeps[h] = sweep;
            if opts.record_objective {
                traces[h].push(objective(h, &beta, &q));
            }
            if max_change[h] < opts.tolerance {
                converged[h] = true;
                active[h] = false;
            }
        }
    }
    traces
        .into_iter()
        .enumerate()
        .map(|(h, objective)| GramSolution {
            beta: beta.column(h).to_owned(),
            sweeps: sweeps[h],
            converged: converged[h],
            objective,
        })
        .collect()
}

/// Lasso on a raw design matrix. With `fit_intercept`, columns and response
/// are centred first and the intercept is left unpenalised.
pub fn lasso_cd(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    fit_intercept: bool,
    opts: &LassoOptions,
) -> Result<LassoSolution> {
    if x.nrows() == 0 {
        return Err(Error::Empty("lasso design matrix"));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument("lambda must be non-negative".into()));
    }
    let (xc, yc, x_mean, y_mean) = if fit_intercept {
        let xm = x.mean_axis(Axis(0)).unwrap();
        let ym = y.mean().unwrap();
        (&x - &xm, &y - ym, xm, ym)
    } else {
        (x.to_owned(), y.to_owned(), Array1::zeros(x.ncols()), 0.0)
    };
    let gram = xc.t().dot(&xc);
    let xty = xc.t().dot(&yc);
    let xty = xty.insert_axis(Axis(1));
    let GramSolution {
        beta: coef,
        sweeps,
        converged,
        objective,
    } = solve_gram(gram.view(), xty.view(), &[yc.dot(&yc)], lambda, opts).remove(0);
    let intercept = y_mean - x_mean.dot(&coef);
    Ok(LassoSolution {
        coef,
        intercept,
        sweeps,
        converged,
        objective,
    })
}

/// 24 hourly lasso models over standardised regressors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearModel {
    /// `coefficients[h][j]`, in standardised feature space.
    pub coefficients: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub lambda: f64,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
}

impl LearModel {
    pub fn input_dim(&self) -> usize {
        self.feature_means.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.input_dim();
        if self.feature_scales.len() != p
            || self.intercepts.len() != self.coefficients.len()
            || self.coefficients.iter().any(|c| c.len() != p)
        {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: self.feature_scales.len(),
            });
        }
        if self
            .coefficients
            .iter()
            .flatten()
            .chain(&self.intercepts)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("non-finite LEAR coefficient".into()));
        }
        Ok(())
    }

    /// Per-hour affine prediction in transformed units.
    pub fn forecast(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let z: Vec<f64> = input
            .iter()
            .zip(&self.feature_means)
            .zip(&self.feature_scales)
            .map(|((x, m), s)| (x - m) / s)
            .collect();
        Ok(self
            .coefficients
            .iter()
            .zip(&self.intercepts)
            .map(|(beta, b0)| b0 + beta.iter().zip(&z).map(|(b, v)| b * v).sum::<f64>())
            .collect())
    }
}

/// Fits one lasso per target hour. Regressors are standardised to zero mean
/// and unit population variance; constant columns get scale 1 and end up
/// with a zero coefficient.
pub fn lear_fit(train_set: &SampleSet, lambda: f64) -> Result<LearModel> {
    lear_fit_with(train_set, lambda, &LassoOptions::default())
}

pub fn lear_fit_with(train_set: &SampleSet, lambda: f64, opts: &LassoOptions) -> Result<LearModel> {
    if train_set.is_empty() {
        return Err(Error::Empty("LEAR training set"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument("lambda must be non-negative".into()));
    }
    let x = &train_set.inputs;
    let n = x.nrows() as f64;
    let means = x.mean_axis(Axis(0)).unwrap();
    let scales = x
        .axis_iter(Axis(1))
        .zip(&means)
        .map(|(col, m)| {
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect::<Array1<f64>>();
    let z: Array2<f64> = (x - &means) / &scales;
    let gram = z.t().dot(&z);

    let y = &train_set.targets;
    let y_means = y.mean_axis(Axis(0)).unwrap();
    let yc = y - &y_means;
    let xty = z.t().dot(&yc);
    let yty: Vec<f64> = yc.axis_iter(Axis(1)).map(|c| c.dot(&c)).collect();
    let coefficients: Vec<Vec<f64>> = solve_gram(gram.view(), xty.view(), &yty, lambda, opts)
        .into_iter()
        .map(|s| s.beta.to_vec())
        .collect();
    let intercepts = y_means.to_vec();
    let model = LearModel {
        coefficients,
        intercepts,
        lambda,
        feature_means: means.to_vec(),
        feature_scales: scales.to_vec(),
    };
    model.validate()?;
    Ok(model)
}
