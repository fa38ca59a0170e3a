//! Cross-instrument aggregation: kernel densities, Pearson correlations and
//! per-delta summaries.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

/// Points on every density grid.
pub const KDE_GRID_POINTS: usize = 512;
/// Grid half-margin beyond the data range, in bandwidths.
pub const KDE_GRID_MARGIN: f64 = 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("values must be finite")]
    NonFinite,
    #[error("all values are identical; pass an explicit bandwidth")]
    DegenerateSpread,
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("fewer than 2 instruments have every variant ({0} found)")]
    TooFewInstruments(usize),
    #[error("variant {0} has zero variance across instruments")]
    ConstantVariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule of thumb.
    Auto,
    Fixed(f64),
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_sd(values: &[f64]) -> f64 {
    let mu = mean(values);
    let ss: f64 = values.iter().map(|v| (v - mu).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Linear-interpolation quantile of sorted data (`0 <= q <= 1`).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman bandwidth `0.9 * min(sd, IQR/1.34) * n^(-1/5)`.
/// Falls back to the standard deviation alone when the IQR is zero.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64, StatsError> {
    check_values(values)?;
    let sd = sample_sd(values);
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if spread <= 0.0 {
        return Err(StatsError::DegenerateSpread);
    }
    Ok(0.9 * spread * (values.len() as f64).powf(-0.2))
}

fn check_values(values: &[f64]) -> Result<(), StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

fn resolve_bandwidth(values: &[f64], bandwidth: Bandwidth) -> Result<f64, StatsError> {
    match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(values),
        Bandwidth::Fixed(h) if h.is_finite() && h > 0.0 => Ok(h),
        Bandwidth::Fixed(h) => Err(StatsError::InvalidBandwidth(h)),
    }
}

/// Gaussian kernel density `f(x) = 1/(n h) sum phi((x - v_i)/h)` at each grid point.
///
/// No minimum sample size is imposed with a fixed bandwidth; `Auto` needs two
/// or more values with nonzero spread.
pub fn kernel_density(
    values: &[f64],
    grid: &[f64],
    bandwidth: Bandwidth,
) -> Result<Vec<(f64, f64)>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::TooFewValues { needed: 1, got: 0 });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let h = resolve_bandwidth(values, bandwidth)?;
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&x| {
            let sum: f64 = values
                .iter()
                .map(|v| {
                    let z = (x - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum();
            (x, norm * sum)
        })
        .collect())
}

/// Evenly spaced grid over `[min - 5h, max + 5h]`.
pub fn default_grid(values: &[f64], h: f64) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - KDE_GRID_MARGIN * h;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + KDE_GRID_MARGIN * h;
    let step = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
    (0..KDE_GRID_POINTS).map(|i| lo + i as f64 * step).collect()
}

/// Density curve on the default grid.
pub fn kde_curve(values: &[f64], bandwidth: Bandwidth) -> Result<Vec<(f64, f64)>, StatsError> {
    check_values(values)?;
    let h = resolve_bandwidth(values, bandwidth)?;
    kernel_density(values, &default_grid(values, h), Bandwidth::Fixed(h))
}

/// Trapezoidal integral of a sampled curve.
pub fn trapezoid(curve: &[(f64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[1].1 + w[0].1))
        .sum()
}

/// Pearson product-moment correlation, clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    check_values(x)?;
    check_values(y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// One estimated entropy rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub instrument: String,
    pub variant: String,
    pub entropy: f64,
    pub n: usize,
}

/// Symmetric variant-by-variant correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub variants: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Instruments used (those having every variant).
    pub instruments: Vec<String>,
    /// Instruments dropped because a variant was missing.
    pub dropped: Vec<String>,
}

/// Pairwise Pearson correlations over instruments that have all `variants`.
pub fn correlation_matrix(
    rows: &[ResultRow],
    variants: &[String],
) -> Result<CorrelationMatrix, StatsError> {
    let mut table: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for row in rows {
        table
            .entry(row.instrument.as_str())
            .or_default()
            .insert(row.variant.as_str(), row.entropy);
    }
    let (complete, dropped): (Vec<_>, Vec<_>) = table
        .iter()
        .partition(|(_, by_variant)| variants.iter().all(|v| by_variant.contains_key(v.as_str())));
    if complete.len() < 2 {
        return Err(StatsError::TooFewInstruments(complete.len()));
    }
    let columns: Vec<Vec<f64>> = variants
        .iter()
        .map(|v| complete.iter().map(|(_, by)| by[v.as_str()]).collect())
        .collect();

    let k = variants.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in i + 1..k {
            let r = pearson(&columns[i], &columns[j]).map_err(|e| match e {
                StatsError::ZeroVariance => {
                    let constant = if sample_sd(&columns[i]) == 0.0 { i } else { j };
                    StatsError::ConstantVariant(variants[constant].clone())
                }
                other => other,
            })?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    if k == 1 && sample_sd(&columns[0]) == 0.0 {
        return Err(StatsError::ConstantVariant(variants[0].clone()));
    }
    Ok(CorrelationMatrix {
        variants: variants.to_vec(),
        values,
        instruments: complete.iter().map(|(i, _)| i.to_string()).collect(),
        dropped: dropped.iter().map(|(i, _)| i.to_string()).collect(),
    })
}

/// Mean entropy per delta, in ascending delta order.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSummaryRow {
    pub delta: f64,
    pub mean_entropy: f64,
    pub instruments: usize,
}

/// Averages entropy over instruments for each delta. `rows` pairs each delta
/// with one instrument's entropy rate.
pub fn delta_summary(rows: &[(f64, f64)]) -> Vec<DeltaSummaryRow> {
    let mut by_delta: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for &(delta, entropy) in rows {
        // positive floats order like their bit patterns
        by_delta
            .entry(delta.to_bits())
            .or_insert_with(|| (delta, Vec::new()))
            .1
            .push(entropy);
    }
    by_delta
        .into_values()
        .map(|(delta, values)| DeltaSummaryRow {
            delta,
            mean_entropy: mean(&values),
            instruments: values.len(),
        })
        .collect()
}

/// Renders the summary as a two-column text table.
pub fn render_summary_table(summary: &[DeltaSummaryRow]) -> String {
    let mut out = String::from("delta   mean H_ctw\n");
    for row in summary {
        out.push_str(&format!("{:<7.2} {:.2}\n", row.delta, row.mean_entropy));
    }
    out
}

/// Instruments present in both variants, with their paired values.
pub fn scatter_pairs(rows: &[ResultRow], a: &str, b: &str) -> Vec<(String, f64, f64)> {
    let pick = |variant: &str| -> BTreeMap<&str, f64> {
        rows.iter()
            .filter(|r| r.variant == variant)
            .map(|r| (r.instrument.as_str(), r.entropy))
            .collect()
    };
    let (left, right) = (pick(a), pick(b));
    let common: BTreeSet<&str> = left
        .keys()
        .filter(|k| right.contains_key(*k))
        .copied()
        .collect();
    common
        .into_iter()
        .map(|k| (k.to_string(), left[k], right[k]))
        .collect()
}
