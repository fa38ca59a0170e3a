//! Seeded synthetic price paths for tests and demo corpora.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FrequencyKind, IngestError, Observation, PriceSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Arithmetic random walk with Gaussian steps of st.dev. `sigma`.
    Brownian,
    /// Brownian motion read on a stochastic-volatility clock.
    TimeChanged,
    /// Piecewise-constant path moving by `±jump_size` at every step.
    Jump,
}

impl std::str::FromStr for SyntheticKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "brownian" => Ok(Self::Brownian),
            "time_changed" => Ok(Self::TimeChanged),
            "jump" => Ok(Self::Jump),
            other => Err(format!(
                "unknown generator {other:?} (expected brownian, time_changed or jump)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub start_price: f64,
    /// Per-step standard deviation (brownian) or base volatility (time_changed).
    pub sigma: f64,
    /// St.dev. of the log-volatility innovations of the time_changed clock.
    pub vol_of_vol: f64,
    /// AR(1) coefficient of the log-volatility, in `[0, 1)`.
    pub vol_persistence: f64,
    /// Jump magnitude in price units (jump kind).
    pub jump_size: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            start_price: 100.0,
            sigma: 0.05,
            vol_of_vol: 0.2,
            vol_persistence: 0.95,
            jump_size: 0.25,
        }
    }
}

impl GeneratorParams {
    fn validate(&self, kind: SyntheticKind) -> Result<(), IngestError> {
        let bad = |msg: &str| Err(IngestError::InvalidParams(msg.to_string()));
        if !(self.start_price.is_finite() && self.start_price > 0.0) {
            return bad("start_price must be positive");
        }
        match kind {
            SyntheticKind::Brownian => {
                if !(self.sigma.is_finite() && self.sigma >= 0.0) {
                    return bad("sigma must be non-negative");
                }
            }
            SyntheticKind::TimeChanged => {
                if !(self.sigma.is_finite() && self.sigma > 0.0) {
                    return bad("sigma must be positive for a strictly increasing clock");
                }
                if !(self.vol_of_vol.is_finite() && self.vol_of_vol >= 0.0) {
                    return bad("vol_of_vol must be non-negative");
                }
                if !(0.0..1.0).contains(&self.vol_persistence) {
                    return bad("vol_persistence must lie in [0, 1)");
                }
            }
            SyntheticKind::Jump => {
                if !(self.jump_size.is_finite() && self.jump_size > 0.0) {
                    return bad("jump_size must be positive");
                }
            }
        }
        Ok(())
    }
}

/// Generates `n` tick observations at timestamps `0, 1, ..., n-1`.
///
/// The output is a pure function of `(kind, n, params, seed)`.
pub fn generate_synthetic_path(
    instrument_id: impl Into<String>,
    kind: SyntheticKind,
    n: usize,
    params: &GeneratorParams,
    seed: u64,
) -> Result<PriceSeries, IngestError> {
    if n < 2 {
        return Err(IngestError::InvalidParams(format!(
            "n = {n}, need at least 2"
        )));
    }
    params.validate(kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prices = Vec::with_capacity(n);
    prices.push(params.start_price);

    match kind {
        SyntheticKind::Brownian => {
            let mut x = params.start_price;
            for _ in 1..n {
                let z: f64 = rng.sample(StandardNormal);
                x += params.sigma * z;
                prices.push(x);
            }
        }
        SyntheticKind::TimeChanged => {
            let mut x = params.start_price;
            let mut log_vol = 0.0f64;
            let innovation_scale =
                params.vol_of_vol * (1.0 - params.vol_persistence * params.vol_persistence).sqrt();
            for _ in 1..n {
                let eps: f64 = rng.sample(StandardNormal);
                log_vol = params.vol_persistence * log_vol + innovation_scale * eps;
                let clock_step = params.sigma * params.sigma * (2.0 * log_vol).exp();
                let z: f64 = rng.sample(StandardNormal);
                x += clock_step.sqrt() * z;
                prices.push(x);
            }
        }
        SyntheticKind::Jump => {
            // Integer jump index keeps every price an exact multiple of jump_size.
            let mut index: i64 = 0;
            for _ in 1..n {
                index += if rng.random::<bool>() { 1 } else { -1 };
                prices.push(params.start_price + index as f64 * params.jump_size);
            }
        }
    }

    if let Some(pos) = prices.iter().position(|&p| p <= 0.0) {
        return Err(IngestError::InvalidParams(format!(
            "path reached a non-positive price at step {pos}; raise start_price or lower the volatility"
        )));
    }
    let observations = prices
        .into_iter()
        .enumerate()
        .map(|(i, price)| Observation {
            timestamp: i as f64,
            price,
        })
        .collect();
    PriceSeries::new(instrument_id, observations, FrequencyKind::Tick)
}
