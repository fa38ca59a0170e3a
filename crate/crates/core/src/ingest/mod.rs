//! Price loading, eligibility filtering and log returns.

mod synthetic;

pub use synthetic::{generate_synthetic_path, GeneratorParams, SyntheticKind};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DAILY_HEADER: [&str; 7] = [
    "instrument",
    "date",
    "open",
    "high",
    "low",
    "close",
    "volume",
];
pub const TICK_HEADER: [&str; 4] = ["instrument", "timestamp", "price", "volume"];

/// Default minimum number of daily observations for an instrument to be studied.
pub const DEFAULT_MIN_DAILY: usize = 1000;
/// Default minimum number of price changes for a tick series to be studied.
pub const DEFAULT_MIN_TICK_CHANGES: usize = 2500;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: unexpected header {found:?}, expected {expected:?}")]
    BadHeader {
        line: u64,
        found: Vec<String>,
        expected: Vec<String>,
    },
    #[error("line {line}: malformed row: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: non-positive price {price} for instrument {instrument}")]
    NonPositivePrice {
        line: u64,
        instrument: String,
        price: f64,
    },
    #[error("line {line}: non-monotone timestamp {timestamp} for instrument {instrument}")]
    NonMonotone {
        line: u64,
        instrument: String,
        timestamp: f64,
    },
    #[error(
        "series {instrument}: non-positive or non-finite price {price} at position {position}"
    )]
    InvalidObservation {
        instrument: String,
        position: usize,
        price: f64,
    },
    #[error("series {instrument}: timestamps out of order at position {position}")]
    OutOfOrder { instrument: String, position: usize },
    #[error("series {instrument} has {len} observations, need at least 2")]
    TooShort { instrument: String, len: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyKind {
    Daily,
    Tick,
}

impl std::str::FromStr for FrequencyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "daily" => Ok(Self::Daily),
            "tick" => Ok(Self::Tick),
            other => Err(format!("unknown format {other:?} (expected daily or tick)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Epoch seconds for tick data, days since 1970-01-01 for daily data.
    pub timestamp: f64,
    pub price: f64,
}

/// Timestamped positive prices for one instrument.
///
/// Daily timestamps are strictly increasing; tick timestamps may repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    instrument_id: String,
    observations: Vec<Observation>,
    frequency: FrequencyKind,
}

impl PriceSeries {
    pub fn new(
        instrument_id: impl Into<String>,
        observations: Vec<Observation>,
        frequency: FrequencyKind,
    ) -> Result<Self, IngestError> {
        let instrument_id = instrument_id.into();
        for (position, obs) in observations.iter().enumerate() {
            if !(obs.price.is_finite() && obs.price > 0.0) {
                return Err(IngestError::InvalidObservation {
                    instrument: instrument_id,
                    position,
                    price: obs.price,
                });
            }
            if position > 0 {
                let prev = observations[position - 1].timestamp;
                if !timestamp_follows(prev, obs.timestamp, frequency) {
                    return Err(IngestError::OutOfOrder {
                        instrument: instrument_id,
                        position,
                    });
                }
            }
        }
        Ok(Self {
            instrument_id,
            observations,
            frequency,
        })
    }

    /// Builds a series from prices sampled at integer timestamps `0, 1, 2, ...`.
    pub fn from_prices(
        instrument_id: impl Into<String>,
        prices: &[f64],
        frequency: FrequencyKind,
    ) -> Result<Self, IngestError> {
        let observations = prices
            .iter()
            .enumerate()
            .map(|(i, &price)| Observation {
                timestamp: i as f64,
                price,
            })
            .collect();
        Self::new(instrument_id, observations, frequency)
    }

    pub fn instrument_id(&self) -> &str {
        &self.instrument_id
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn frequency(&self) -> FrequencyKind {
        self.frequency
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.timestamp).collect()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.price).collect()
    }

    /// Number of consecutive observations whose price differs from the previous one.
    pub fn price_changes(&self) -> usize {
        self.observations
            .windows(2)
            .filter(|w| w[1].price != w[0].price)
            .count()
    }

    /// Observations with repeated prices removed (the first of each run is kept).
    pub fn without_zero_changes(&self) -> Vec<Observation> {
        let mut kept: Vec<Observation> = Vec::with_capacity(self.observations.len());
        for obs in &self.observations {
            if kept.last().is_none_or(|last| last.price != obs.price) {
                kept.push(*obs);
            }
        }
        kept
    }
}

fn timestamp_follows(prev: f64, next: f64, frequency: FrequencyKind) -> bool {
    match frequency {
        FrequencyKind::Daily => next > prev,
        FrequencyKind::Tick => next >= prev,
    }
}

/// Log returns of one instrument, `r_t = ln(p_t / p_{t-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub instrument_id: String,
    pub returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

/// Computes log returns. With `drop_zero`, observations repeating the previous
/// price are removed before differencing, so every emitted return is nonzero.
pub fn log_returns(series: &PriceSeries, drop_zero: bool) -> Result<ReturnSeries, IngestError> {
    if series.len() < 2 {
        return Err(IngestError::TooShort {
            instrument: series.instrument_id.clone(),
            len: series.len(),
        });
    }
    let prices: Vec<f64> = if drop_zero {
        series
            .without_zero_changes()
            .iter()
            .map(|o| o.price)
            .collect()
    } else {
        series.prices()
    };
    let returns = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    Ok(ReturnSeries {
        instrument_id: series.instrument_id.clone(),
        returns,
    })
}

/// Keeps daily series with at least `min_daily` observations and tick series
/// with at least `min_tick_changes` price changes.
pub fn filter_eligible(
    series: &[PriceSeries],
    min_daily: usize,
    min_tick_changes: usize,
) -> Vec<PriceSeries> {
    series
        .iter()
        .filter(|s| is_eligible(s, min_daily, min_tick_changes))
        .cloned()
        .collect()
}

pub fn is_eligible(series: &PriceSeries, min_daily: usize, min_tick_changes: usize) -> bool {
    match series.frequency {
        FrequencyKind::Daily => series.len() >= min_daily,
        FrequencyKind::Tick => series.price_changes() >= min_tick_changes,
    }
}

/// Loads a daily or tick CSV file into one series per instrument, ordered by
/// instrument id. Rows of one instrument must already be in time order.
pub fn load_prices(path: &Path, format: FrequencyKind) -> Result<Vec<PriceSeries>, IngestError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
    parse_prices(&text, format)
}

/// Parses CSV text in the daily or tick layout. See [`load_prices`].
pub fn parse_prices(text: &str, format: FrequencyKind) -> Result<Vec<PriceSeries>, IngestError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let expected: &[&str] = match format {
        FrequencyKind::Daily => &DAILY_HEADER,
        FrequencyKind::Tick => &TICK_HEADER,
    };
    let header = reader.headers().map_err(|e| IngestError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(IngestError::BadHeader {
            line: 1,
            found: header.iter().map(String::from).collect(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        });
    }

    let mut grouped: BTreeMap<String, Vec<Observation>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |message: String| IngestError::Malformed { line, message };

        let instrument = record.get(0).unwrap_or_default();
        if instrument.is_empty() {
            return Err(malformed("empty instrument id".into()));
        }
        let (timestamp, price_field) = match format {
            FrequencyKind::Daily => (parse_date(&record[1]).map_err(malformed)?, &record[5]),
            FrequencyKind::Tick => (
                parse_number(&record[1], "timestamp").map_err(malformed)?,
                &record[2],
            ),
        };
        let price = parse_number(price_field, "price").map_err(malformed)?;
        if price <= 0.0 {
            return Err(IngestError::NonPositivePrice {
                line,
                instrument: instrument.to_string(),
                price,
            });
        }

        let rows = grouped.entry(instrument.to_string()).or_default();
        if let Some(prev) = rows.last() {
            if !timestamp_follows(prev.timestamp, timestamp, format) {
                return Err(IngestError::NonMonotone {
                    line,
                    instrument: instrument.to_string(),
                    timestamp,
                });
            }
        }
        rows.push(Observation { timestamp, price });
    }

    grouped
        .into_iter()
        .map(|(id, obs)| PriceSeries::new(id, obs, format))
        .collect()
}

fn parse_number(field: &str, what: &str) -> Result<f64, String> {
    let value: f64 = field
        .parse()
        .map_err(|_| format!("cannot parse {what} {field:?}"))?;
    if !value.is_finite() {
        return Err(format!("{what} {field:?} is not finite"));
    }
    Ok(value)
}

fn parse_date(field: &str) -> Result<f64, String> {
    let date = NaiveDate::parse_from_str(field, "%Y%m%d")
        .map_err(|_| format!("cannot parse date {field:?} (expected YYYYMMDD)"))?;
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    Ok((date - epoch).num_days() as f64)
}

/// Writes series in the tick CSV layout (`instrument,timestamp,price,volume`).
/// Volume is not modelled and written as 0.
pub fn write_tick_csv<W: std::io::Write>(out: W, series: &[PriceSeries]) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(TICK_HEADER)?;
    for s in series {
        for obs in &s.observations {
            writer.write_record([
                s.instrument_id.as_str(),
                &obs.timestamp.to_string(),
                &obs.price.to_string(),
                "0",
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}
