//! Geometric Brownian motion and normal tail frequencies.
//!
//! The classical baseline against which the flow model is contrasted:
//! log-returns are independent normal increments, so a move of `k` standard
//! deviations has probability `Phi(-k)` per step.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    /// Expected return per unit time.
    pub mu: f64,
    /// Volatility per square-root unit time.
    pub sigma: f64,
    pub dt: f64,
    pub n: usize,
    pub seed: u64,
}

impl GbmParams {
    fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::InvalidArgument(format!("mu must be finite, got {}", self.mu)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sigma must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmPath {
    pub times: Vec<f64>,
    pub prices: Vec<f64>,
}

impl GbmPath {
    /// Successive differences of `ln P`.
    pub fn log_returns(&self) -> Vec<f64> {
        self.prices
            .windows(2)
            .map(|w| (w[1] / w[0]).ln())
            .collect()
    }

    /// CSV with header `t,P` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,P\n");
        for (t, p) in self.times.iter().zip(&self.prices) {
            writeln!(out, "{t:.16e},{p:.16e}").unwrap();
        }
        out
    }
}

/// Standard normal variates by the Box–Muller transform: exactly two
/// uniforms per pair, so the stream is a fixed function of the seed.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - [0, 1) keeps the logarithm finite.
        let u1: f64 = 1.0 - self.rng.gen::<f64>();
        let u2: f64 = self.rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// Exact log-normal stepping from `p0`:
/// `ln P(t + dt) = ln P(t) + (mu - sigma^2/2) dt + sigma sqrt(dt) Z`.
///
/// ```
/// use cryptoflow::gbm::{gbm_simulate, GbmParams};
///
/// let p = GbmParams { mu: 0.1, sigma: 0.0, dt: 1.0, n: 10, seed: 0 };
/// let path = gbm_simulate(&p, 1.0).unwrap();
/// assert_eq!(path.prices.len(), 11);
/// assert!((path.prices[10] - 1f64.exp()).abs() < 1e-12);
/// ```
pub fn gbm_simulate(params: &GbmParams, p0: f64) -> Result<GbmPath> {
    params.validate()?;
    if !(p0 > 0.0) || !p0.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "initial price must be positive, got {p0}"
        )));
    }
    let drift = params.mu - 0.5 * params.sigma * params.sigma;
    let diffusion = params.sigma * params.dt.sqrt();
    let mut normals = NormalStream::new(params.seed);
    let mut times = Vec::with_capacity(params.n + 1);
    let mut prices = Vec::with_capacity(params.n + 1);
    let log_p0 = p0.ln();
    let mut noise = 0.0;
    times.push(0.0);
    prices.push(p0);
    for k in 1..=params.n {
        noise += normals.next();
        let t = k as f64 * params.dt;
        times.push(t);
        prices.push((log_p0 + drift * t + diffusion * noise).exp());
    }
    Ok(GbmPath { times, prices })
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Lower-tail probability `Phi(-k)` of a `k`-sigma move.
///
/// ```
/// use cryptoflow::gbm::normal_tail;
///
/// assert_eq!(normal_tail(0.0), 0.5);
/// let p6 = normal_tail(6.0);
/// assert!(9.86e-10 < p6 && p6 < 9.87e-10);
/// ```
pub fn normal_tail(k: f64) -> f64 {
    0.5 * libm::erfc(k / SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceReport {
    /// The drop in units of the daily volatility.
    pub k: f64,
    pub probability: f64,
    /// Expected number of days between such drops, `1 / probability`.
    pub recurrence_days: f64,
}

/// Normal-model frequency of a daily drop of size `drop` when daily
/// volatility is `sigma_daily`.
pub fn exceedance_report(sigma_daily: f64, drop: f64) -> Result<ExceedanceReport> {
    if !(sigma_daily > 0.0) || !sigma_daily.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "daily volatility must be positive, got {sigma_daily}"
        )));
    }
    if !(drop > 0.0) || !drop.is_finite() {
        return Err(Error::InvalidArgument(format!("drop must be positive, got {drop}")));
    }
    let k = drop / sigma_daily;
    let probability = normal_tail(k);
    Ok(ExceedanceReport {
        k,
        probability,
        recurrence_days: 1.0 / probability,
    })
}

/// Order of magnitude of the observed daily frequency of such drops in
/// equity index data. A citation, never computed here.
pub const CITED_EMPIRICAL_FREQUENCY: f64 = 1e-3;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_growth_without_noise() {
        let p = GbmParams {
            mu: 0.1,
            sigma: 0.0,
            dt: 1.0,
            n: 10,
            seed: 3,
        };
        let path = gbm_simulate(&p, 1.0).unwrap();
        assert!((path.prices[10] - 2.718282).abs() < 1e-6);
        assert_eq!(path.times[10], 10.0);
    }

    #[test]
    fn same_seed_same_path() {
        let p = GbmParams {
            mu: 0.0,
            sigma: 0.2,
            dt: 0.5,
            n: 100,
            seed: 42,
        };
        assert_eq!(gbm_simulate(&p, 2.0).unwrap(), gbm_simulate(&p, 2.0).unwrap());
        let other = GbmParams { seed: 43, ..p };
        assert_ne!(gbm_simulate(&p, 2.0).unwrap(), gbm_simulate(&other, 2.0).unwrap());
    }

    #[test]
    fn bad_inputs() {
        let p = GbmParams {
            mu: 0.0,
            sigma: -1.0,
            dt: 1.0,
            n: 1,
            seed: 0,
        };
        assert!(gbm_simulate(&p, 1.0).is_err());
        assert!(gbm_simulate(&GbmParams { sigma: 0.1, n: 0, ..p }, 1.0).is_err());
        assert!(gbm_simulate(&GbmParams { sigma: 0.1, ..p }, 0.0).is_err());
        assert!(exceedance_report(0.0075, 0.0).is_err());
        assert!(exceedance_report(0.0, 0.01).is_err());
    }

    #[test]
    fn one_sigma_drop() {
        let r = exceedance_report(0.01, 0.01).unwrap();
        assert_eq!(r.k, 1.0);
        assert!((r.probability - 0.158655).abs() < 1e-6);
    }

    #[test]
    fn csv_header() {
        let p = GbmParams {
            mu: 0.0,
            sigma: 0.0,
            dt: 1.0,
            n: 1,
            seed: 0,
        };
        let csv = gbm_simulate(&p, 1.0).unwrap().to_csv();
        assert_eq!(
            csv,
            "t,P\n0.0000000000000000e0,1.0000000000000000e0\n1.0000000000000000e0,1.0000000000000000e0\n"
        );
    }
}
