//! Equal-count discretisation of real-valued sequences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::ReturnSeries;

#[derive(Debug, Error, PartialEq)]
pub enum QuantiseError {
    #[error("alphabet size must be 2 or 4, got {0}")]
    UnsupportedAlphabet(usize),
    #[error("sequence of length {len} is shorter than the alphabet size {m}")]
    TooShort { len: usize, m: usize },
    #[error("value at position {0} is not finite")]
    NonFinite(usize),
    #[error("symbol {symbol} at position {position} is outside an alphabet of size {m}")]
    SymbolOutOfRange {
        symbol: u8,
        position: usize,
        m: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    OriginalDiscretised,
    Skeleton,
}

/// Finite-alphabet sequence; every symbol is below `alphabet_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence {
    instrument_id: String,
    alphabet_size: usize,
    symbols: Vec<u8>,
    provenance: Provenance,
}

impl SymbolSequence {
    pub fn new(
        instrument_id: impl Into<String>,
        alphabet_size: usize,
        symbols: Vec<u8>,
        provenance: Provenance,
    ) -> Result<Self, QuantiseError> {
        if alphabet_size != 2 && alphabet_size != 4 {
            return Err(QuantiseError::UnsupportedAlphabet(alphabet_size));
        }
        if let Some(position) = symbols.iter().position(|&s| s as usize >= alphabet_size) {
            return Err(QuantiseError::SymbolOutOfRange {
                symbol: symbols[position],
                position,
                m: alphabet_size,
            });
        }
        Ok(Self {
            instrument_id: instrument_id.into(),
            alphabet_size,
            symbols,
            provenance,
        })
    }

    pub fn instrument_id(&self) -> &str {
        &self.instrument_id
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Bin boundaries: the `ceil(k*n/m)`-th smallest values for `k = 1..m`.
pub fn quantile_boundaries(values: &[f64], m: usize) -> Result<Vec<f64>, QuantiseError> {
    if m != 2 && m != 4 {
        return Err(QuantiseError::UnsupportedAlphabet(m));
    }
    let n = values.len();
    if n < m {
        return Err(QuantiseError::TooShort { len: n, m });
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(QuantiseError::NonFinite(pos));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok((1..m).map(|k| sorted[(k * n).div_ceil(m) - 1]).collect())
}

/// Symbol of `x`: the number of boundaries strictly below it. Ties go to the lower bin.
pub fn symbol_for(x: f64, boundaries: &[f64]) -> u8 {
    boundaries.iter().filter(|&&b| b < x).count() as u8
}

/// Discretises returns into `m` equal-count bins (m = 2 or 4).
pub fn quantile_bins(returns: &ReturnSeries, m: usize) -> Result<SymbolSequence, QuantiseError> {
    let boundaries = quantile_boundaries(&returns.returns, m)?;
    let symbols = returns
        .returns
        .iter()
        .map(|&x| symbol_for(x, &boundaries))
        .collect();
    SymbolSequence::new(
        returns.instrument_id.clone(),
        m,
        symbols,
        Provenance::OriginalDiscretised,
    )
}

/// Per-symbol counts; the result has `alphabet_size` entries summing to the length.
pub fn bin_counts(seq: &SymbolSequence) -> Vec<usize> {
    let mut counts = vec![0; seq.alphabet_size];
    for &s in &seq.symbols {
        counts[s as usize] += 1;
    }
    counts
}

/// Writes `instrument,variant,position,symbol` rows. Positions start at 0.
pub fn write_symbols_csv<W: std::io::Write>(
    out: W,
    sequences: &[(&str, &SymbolSequence)],
) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["instrument", "variant", "position", "symbol"])?;
    for (variant, seq) in sequences {
        for (i, s) in seq.symbols.iter().enumerate() {
            writer.write_record([
                seq.instrument_id.as_str(),
                variant,
                &i.to_string(),
                &s.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}
