//! Closed-form capacity and delay relations for a single conflict point.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::params::FlowParameters;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("conflict fraction must lie in [0, 1], got {0}")]
    AlphaRange(f64),
    #[error("platoon size must be at least 1")]
    EmptyPlatoon,
    #[error("mean inter-arrival time must be positive, got {0}")]
    BadMean(f64),
}

/// Throughput of a lane whose vehicles meet a crossing stream a fraction `alpha` of the time.
pub fn capacity_alpha(fp: &FlowParameters, alpha: f64) -> Result<f64, AnalyticsError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(AnalyticsError::AlphaRange(alpha));
    }
    Ok(1.0 / (alpha * fp.tau_c + (1.0 - alpha) * fp.tau_f + fp.body_time()))
}

/// Throughput when vehicles cross in platoons of `n`.
pub fn capacity_platoon(fp: &FlowParameters, n: u32) -> Result<f64, AnalyticsError> {
    if n < 1 {
        return Err(AnalyticsError::EmptyPlatoon);
    }
    capacity_alpha(fp, 1.0 / n as f64)
}

/// Mean wait of a vehicle in a platoon released when its `n`-th member arrives.
pub fn expected_platoon_delay(n: u32, mu: f64) -> Result<f64, AnalyticsError> {
    if n < 1 {
        return Err(AnalyticsError::EmptyPlatoon);
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(AnalyticsError::BadMean(mu));
    }
    Ok((n as f64 - 1.0) * mu / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interarrival {
    Deterministic,
    Exponential,
}

#[derive(Debug, Clone, Copy)]
pub struct RenewalEstimate {
    pub mean_wait: f64,
    pub std_error: f64,
    pub platoons: usize,
}

/// Monte-Carlo estimate of the per-vehicle accumulation wait.
///
/// Each sample forms one platoon of `n` vehicles and averages their waits
/// until the `n`-th arrival; the standard error is taken over platoons.
pub fn simulate_platoon_accumulation(
    n: u32,
    mu: f64,
    kind: Interarrival,
    platoons: usize,
    seed: u64,
) -> Result<RenewalEstimate, AnalyticsError> {
    expected_platoon_delay(n, mu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exp = Exp::new(1.0 / mu).expect("positive rate");
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut arrivals = Vec::with_capacity(n as usize);
    for _ in 0..platoons {
        arrivals.clear();
        let mut t = 0.0;
        arrivals.push(t);
        for _ in 1..n {
            t += match kind {
                Interarrival::Deterministic => mu,
                Interarrival::Exponential => exp.sample(&mut rng),
            };
            arrivals.push(t);
        }
        let release = t;
        let w = arrivals.iter().map(|a| release - a).sum::<f64>() / n as f64;
        sum += w;
        sum_sq += w * w;
    }
    let k = platoons.max(1) as f64;
    let mean = sum / k;
    let var = if platoons > 1 {
        ((sum_sq - k * mean * mean) / (k - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(RenewalEstimate {
        mean_wait: mean,
        std_error: (var / k).sqrt(),
        platoons,
    })
}
