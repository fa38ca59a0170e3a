//! Spatial skeleton of a path: the times at which it moves a fixed distance.
//!
//! Starting from the first sample, a level index `k` tracks the current
//! skeleton level `base_level + k * delta`. Each time the path moves at least
//! `delta` away from that level, one event is emitted, the level moves one
//! step toward the path, and the event time is linearly interpolated inside
//! the triggering sample interval. The event index `i` doubles as the
//! time-change estimate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PriceSeries;
use crate::quantise::{Provenance, SymbolSequence};

/// Relative slack on the crossing threshold, so that moves which are exact
/// multiples of `delta` in decimal arithmetic are not lost to rounding.
const CROSSING_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DecomposeError {
    #[error("delta must be positive and finite, got {0}")]
    InvalidDelta(f64),
    #[error("path has {0} samples, need at least 2")]
    TooShort(usize),
    #[error("path values must be finite (sample {0})")]
    NonFinite(usize),
    #[error("times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
    #[error("delta {delta} is below the floating-point resolution of the path near {level}")]
    DeltaTooSmall { delta: f64, level: f64 },
}

/// How many events a single sample interval may produce.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossingMode {
    /// One event per `delta` crossed; the residual stays below `delta`.
    #[default]
    Multi,
    /// At most one event per sample interval, as in the original recipe.
    Single,
}

/// Which real-valued path is decomposed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Raw prices in monetary units.
    #[default]
    Price,
    /// Cumulative log return `ln(p_t) - ln(p_0)`.
    #[serde(rename = "logpath")]
    LogPath,
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "price" => Ok(Self::Price),
            "logpath" => Ok(Self::LogPath),
            other => Err(format!(
                "unknown domain {other:?} (expected price or logpath)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonEvent {
    /// Interpolated crossing time `T_i`.
    pub time: f64,
    /// Level index `k_i`; the level is `base_level + k_i * delta`.
    pub level_index: i64,
    /// `+1` for an up move, `-1` for a down move.
    pub direction: i8,
    /// Index `j` of the sample that completed the crossing.
    pub sample: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSeries {
    pub instrument_id: String,
    pub delta: f64,
    pub base_level: f64,
    pub domain: Domain,
    pub events: Vec<SkeletonEvent>,
}

impl SkeletonSeries {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn level(&self, level_index: i64) -> f64 {
        self.base_level + level_index as f64 * self.delta
    }

    /// Skeleton levels `V(i)` for every event.
    pub fn levels(&self) -> Vec<f64> {
        self.events
            .iter()
            .map(|e| self.level(e.level_index))
            .collect()
    }

    pub fn directions(&self) -> impl Iterator<Item = i8> + '_ {
        self.events.iter().map(|e| e.direction)
    }
}

/// Extracts the path to decompose from a price series.
pub fn domain_path(series: &PriceSeries, domain: Domain) -> (Vec<f64>, Vec<f64>) {
    let times = series.timestamps();
    let values = match domain {
        Domain::Price => series.prices(),
        Domain::LogPath => {
            let obs = series.observations();
            let origin = obs.first().map_or(0.0, |o| o.price.ln());
            obs.iter().map(|o| o.price.ln() - origin).collect()
        }
    };
    (times, values)
}

/// Decomposes a price series in the chosen domain. See [`decompose_path`].
pub fn decompose(
    series: &PriceSeries,
    delta: f64,
    domain: Domain,
    mode: CrossingMode,
) -> Result<SkeletonSeries, DecomposeError> {
    let (times, values) = domain_path(series, domain);
    let mut skeleton = decompose_path(&times, &values, delta, mode)?;
    skeleton.instrument_id = series.instrument_id().to_string();
    skeleton.domain = domain;
    Ok(skeleton)
}

/// Decomposes a sampled path `values[j]` at `times[j]` into its skeleton.
///
/// In [`CrossingMode::Multi`] the residual `|values[j] - level| < delta`
/// holds after every sample. Event times always lie inside the sample
/// interval that triggered them.
pub fn decompose_path(
    times: &[f64],
    values: &[f64],
    delta: f64,
    mode: CrossingMode,
) -> Result<SkeletonSeries, DecomposeError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(DecomposeError::InvalidDelta(delta));
    }
    if times.len() != values.len() {
        return Err(DecomposeError::LengthMismatch {
            times: times.len(),
            values: values.len(),
        });
    }
    if values.len() < 2 {
        return Err(DecomposeError::TooShort(values.len()));
    }
    if let Some(j) = values.iter().position(|v| !v.is_finite()) {
        return Err(DecomposeError::NonFinite(j));
    }

    let base_level = values[0];
    let threshold = delta * (1.0 - CROSSING_SLACK);
    let level_of = |k: i64| base_level + k as f64 * delta;

    let mut events = Vec::new();
    let mut k: i64 = 0;
    for j in 1..values.len() {
        let (t0, t1) = (times[j - 1], times[j]);
        let (x0, x1) = (values[j - 1], values[j]);
        loop {
            let level = level_of(k);
            let gap = x1 - level;
            if gap.abs() < threshold {
                break;
            }
            let direction: i8 = if gap > 0.0 { 1 } else { -1 };
            let next_k = k + i64::from(direction);
            let next_level = level_of(next_k);
            if next_level == level {
                return Err(DecomposeError::DeltaTooSmall { delta, level });
            }
            let time = if t1 == t0 || x1 == x0 {
                t1
            } else {
                let fraction = ((next_level - x0) / (x1 - x0)).clamp(0.0, 1.0);
                t0 + fraction * (t1 - t0)
            };
            events.push(SkeletonEvent {
                time,
                level_index: next_k,
                direction,
                sample: j,
            });
            k = next_k;
            if mode == CrossingMode::Single {
                break;
            }
        }
        debug_assert!(mode == CrossingMode::Single || (x1 - level_of(k)).abs() < delta);
    }

    Ok(SkeletonSeries {
        instrument_id: String::new(),
        delta,
        base_level,
        domain: Domain::Price,
        events,
    })
}

/// Binary up/down sequence of a skeleton: 1 for up, 0 for down.
pub fn skeleton_to_symbols(skeleton: &SkeletonSeries) -> SymbolSequence {
    let symbols = skeleton
        .directions()
        .map(|d| if d > 0 { 1 } else { 0 })
        .collect();
    SymbolSequence::new(
        skeleton.instrument_id.clone(),
        2,
        symbols,
        Provenance::Skeleton,
    )
    .expect("binary symbols are always in range")
}

/// Writes skeletons as `instrument,delta,i,T_i,level,direction`.
/// Event numbering starts at 1 (event 0 is the starting point).
pub fn write_skeleton_csv<W: std::io::Write>(
    out: W,
    skeletons: &[SkeletonSeries],
) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["instrument", "delta", "i", "T_i", "level", "direction"])?;
    for s in skeletons {
        for (i, e) in s.events.iter().enumerate() {
            writer.write_record([
                s.instrument_id.clone(),
                s.delta.to_string(),
                (i + 1).to_string(),
                e.time.to_string(),
                s.level(e.level_index).to_string(),
                e.direction.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}
