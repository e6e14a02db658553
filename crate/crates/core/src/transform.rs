//! Variance-stabilising transform: median/MAD normalisation followed by
//! `asinh`, and its inverse `sinh(y) * mad + median`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub median: f64,
    pub mad: f64,
}

impl TransformParams {
    /// Sample median and raw median absolute deviation (no consistency
    /// constant).
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("cannot fit transform on no values"));
        }
        let median = median_inplace(values.to_vec());
        let mad = median_inplace(values.iter().map(|v| (v - median).abs()).collect());
        if !(mad > 0.0) {
            return Err(Error::DegenerateSeries);
        }
        Ok(Self { median, mad })
    }

    pub fn new(median: f64, mad: f64) -> Result<Self> {
        if !(mad > 0.0) || !mad.is_finite() || !median.is_finite() {
            return Err(Error::DegenerateSeries);
        }
        Ok(Self { median, mad })
    }

    pub fn forward(&self, p: f64) -> f64 {
        ((p - self.median) / self.mad).asinh()
    }

    pub fn inverse(&self, y: f64) -> f64 {
        y.sinh() * self.mad + self.median
    }

    pub fn forward_slice(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&p| self.forward(p)).collect()
    }

    pub fn inverse_slice(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&y| self.inverse(y)).collect()
    }
}

fn median_inplace(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Price and temperature transforms for one market, fit on its training window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketTransform {
    pub price: TransformParams,
    pub temperature: TransformParams,
}

impl MarketTransform {
    pub fn fit(prices: &[f64], temperatures: &[f64]) -> Result<Self> {
        Ok(Self {
            price: TransformParams::fit(prices)?,
            temperature: TransformParams::fit(temperatures)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fit_odd_and_even() {
        let p = TransformParams::fit(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((p.median, p.mad), (3.0, 1.0));
        let p = TransformParams::fit(&[0.0, 10.0]).unwrap();
        assert_eq!((p.median, p.mad), (5.0, 5.0));
    }

    #[test]
    fn fit_rejects_constant() {
        let err = TransformParams::fit(&[7.0, 7.0, 7.0]).unwrap_err();
        assert!(err.to_string().contains("degenerate series"));
        assert!(TransformParams::fit(&[]).is_err());
    }

    #[test]
    fn closed_form_values() {
        let p = TransformParams::new(3.0, 1.0).unwrap();
        assert_eq!(p.forward(3.0), 0.0);
        let y1 = (1.0 + 2f64.sqrt()).ln();
        assert!((p.forward(4.0) - y1).abs() < 1e-15);
        assert!((p.forward(4.0) - 0.881374).abs() < 1e-6);
        assert!((p.forward(5.0) - (2.0 + 5f64.sqrt()).ln()).abs() < 1e-15);
        assert!((p.forward(5.0) - 1.443635).abs() < 1e-6);
        assert!((p.inverse(y1) - 4.0).abs() < 1e-12);
        assert_eq!(p.inverse(0.0), 3.0);
    }

    #[test]
    fn round_trip_examples() {
        let p = TransformParams::new(42.0, 9.5).unwrap();
        for x in [-100.0, 0.0, 3.7, 1e4] {
            let back = p.inverse(p.forward(x));
            assert!((back - x).abs() <= 1e-9 * f64::max(1.0, x.abs()));
        }
    }

    proptest! {
        #[test]
        fn round_trip(p in -1e4f64..1e4, median in -100f64..200.0, mad in 0.1f64..100.0) {
            let t = TransformParams::new(median, mad).unwrap();
            let back = t.inverse(t.forward(p));
            prop_assert!((back - p).abs() <= 1e-9 * f64::max(1.0, p.abs()));
        }

        #[test]
        fn monotone_and_antisymmetric(a in -1e3f64..1e3, d in 0.0f64..1e3) {
            let t = TransformParams::new(20.0, 4.0).unwrap();
            prop_assert!(t.forward(a + d + 1e-6) > t.forward(a));
            prop_assert!((t.forward(20.0 + d) + t.forward(20.0 - d)).abs() < 1e-12);
        }
    }
}
