//! Deterministic multi-market stand-in data.
//!
//! Algorithm (ChaCha8 stream seeded with `seed`, standard normals drawn in a
//! fixed order per hour: shared price shock, shared temperature shock,
//! shared white noise, then per market its idiosyncratic triple):
//!
//! ```text
//! s_t   = 0.97 s_{t-1} + sqrt(1 - 0.97^2) e_t          (shared, idem per market)
//! tau_t = 0.99 tau_{t-1} + sqrt(1 - 0.99^2) u_t
//! mix(a, b) = sqrt(c) a + sqrt(1 - c) b                  (c = correlation)
//! temp_m,t  = 10 + 2m + 8 cos(2pi (doy - 200) / 365) + 4 sin(2pi (h - 9) / 24)
//!             + noise * 3 mix(tau, tau_m)
//! price_m,t = 40 + 6m + 10 daily(h) + 4 cos(2pi t / 168)
//!             + noise * (8 mix(s, s_m) - 4 mix(tau, tau_m) + 2 mix(w, w_m))
//! daily(h)  = sin(2pi (h - 6) / 24) + 0.5 sin(4pi (h - 6) / 24)
//! ```
//!
//! With `correlation = 1` every stochastic term is shared, so markets differ
//! only by their constant offsets.

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::HourlySeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_markets: usize,
    pub days: usize,
    pub correlation: f64,
    pub noise_scale: f64,
    pub start: NaiveDate,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_markets: 4,
            days: 200,
            correlation: 0.9,
            noise_scale: 1.0,
            start: NaiveDate::from_ymd_opt(2013, 1, 1).unwrap(),
        }
    }
}

impl SyntheticSpec {
    pub fn market_name(index: usize) -> String {
        format!("M{}", index + 1)
    }

    pub fn generate(&self) -> Result<Vec<HourlySeries>> {
        if self.n_markets < 1 {
            return Err(Error::InvalidArgument("n_markets must be at least 1".into()));
        }
        if self.days < 15 {
            return Err(Error::InvalidArgument("synthetic data needs at least 15 days".into()));
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return Err(Error::InvalidArgument("correlation must lie in [0, 1]".into()));
        }
        let c = self.correlation;
        let (wc, wi) = (c.sqrt(), (1.0 - c).sqrt());
        let mix = |a: f64, b: f64| wc * a + wi * b;
        let (phi_p, phi_t) = (0.97f64, 0.99f64);
        let (kp, kt) = ((1.0 - phi_p * phi_p).sqrt(), (1.0 - phi_t * phi_t).sqrt());

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

        let n = self.days * 24;
        let m = self.n_markets;
        let mut prices = vec![Vec::with_capacity(n); m];
        let mut temps = vec![Vec::with_capacity(n); m];
        let (mut s, mut tau) = (0.0, 0.0);
        let mut s_m = vec![0.0; m];
        let mut tau_m = vec![0.0; m];
        let start: NaiveDateTime = self.start.and_hms_opt(0, 0, 0).unwrap();
        let two_pi = std::f64::consts::TAU;

        for t in 0..n {
            let ts = start + chrono::Duration::hours(t as i64);
            let h = ts.hour() as f64;
            let doy = ts.ordinal0() as f64;
            s = phi_p * s + kp * normal();
            tau = phi_t * tau + kt * normal();
            let w = normal();
            let daily = (two_pi * (h - 6.0) / 24.0).sin() + 0.5 * (2.0 * two_pi * (h - 6.0) / 24.0).sin();
            let weekly = 4.0 * (two_pi * t as f64 / 168.0).cos();
            let annual = 8.0 * (two_pi * (doy - 200.0) / 365.0).cos();
            let diurnal = 4.0 * (two_pi * (h - 9.0) / 24.0).sin();
            for k in 0..m {
                s_m[k] = phi_p * s_m[k] + kp * normal();
                tau_m[k] = phi_t * tau_m[k] + kt * normal();
                let w_k = normal();
                let temp_anom = mix(tau, tau_m[k]);
                let km = k as f64;
                temps[k].push(10.0 + 2.0 * km + annual + diurnal + self.noise_scale * 3.0 * temp_anom);
                prices[k].push(
                    40.0 + 6.0 * km
                        + 10.0 * daily
                        + weekly
                        + self.noise_scale * (8.0 * mix(s, s_m[k]) - 4.0 * temp_anom + 2.0 * mix(w, w_k)),
                );
            }
        }

        prices
            .into_iter()
            .zip(temps)
            .enumerate()
            .map(|(k, (p, tmp))| HourlySeries::new(Self::market_name(k), start, p, tmp))
            .collect()
    }
}

/// Shorthand for [`SyntheticSpec::generate`] with unit noise scale.
pub fn generate_synthetic(
    seed: u64,
    n_markets: usize,
    days: usize,
    correlation: f64,
) -> Result<Vec<HourlySeries>> {
    SyntheticSpec {
        seed,
        n_markets,
        days,
        correlation,
        ..SyntheticSpec::default()
    }
    .generate()
}
