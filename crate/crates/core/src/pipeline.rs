//! End-to-end study: load, filter, discretise, decompose, estimate, aggregate.
//!
//! Work fans out per instrument; results are merged in instrument order, so
//! the outputs do not depend on the worker count.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctw::{self, DEFAULT_DEPTH};
use crate::homogenise::{self, CrossingMode, Domain};
use crate::ingest::{
    self, FrequencyKind, GeneratorParams, PriceSeries, SyntheticKind, DEFAULT_MIN_DAILY,
    DEFAULT_MIN_TICK_CHANGES,
};
use crate::par;
use crate::quantise;
use crate::stats::{self, Bandwidth, CorrelationMatrix, DeltaSummaryRow, ResultRow};

pub const DEFAULT_DELTAS: [f64; 6] = [0.05, 0.1, 0.25, 0.5, 0.75, 1.0];
pub const DEFAULT_MIN_SKELETON_EVENTS: usize = 1000;
/// Environment variable capping the worker count (0 = one per core).
pub const THREADS_ENV: &str = "VOHO_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: PathBuf,
    pub format: FrequencyKind,
}

/// Variant families computed per instrument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantFamily {
    Orig2,
    Orig4,
    /// One binary skeleton sequence per configured delta.
    Skeleton,
}

/// A group of synthetic instruments sharing one generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticGroup {
    pub kind: SyntheticKind,
    pub instruments: usize,
    pub n: usize,
    #[serde(default)]
    pub prefix: Option<String>,
    #[serde(default)]
    pub params: GeneratorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub inputs: Vec<InputSpec>,
    pub deltas: Vec<f64>,
    pub depth: i64,
    pub variants: Vec<VariantFamily>,
    pub min_daily: usize,
    pub min_tick_changes: usize,
    pub min_skeleton_events: usize,
    pub domain: Domain,
    pub crossing: CrossingMode,
    pub seed: u64,
    pub synthetic: Vec<SyntheticGroup>,
    pub out_dir: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            deltas: DEFAULT_DELTAS.to_vec(),
            depth: DEFAULT_DEPTH as i64,
            variants: vec![
                VariantFamily::Orig2,
                VariantFamily::Orig4,
                VariantFamily::Skeleton,
            ],
            min_daily: DEFAULT_MIN_DAILY,
            min_tick_changes: DEFAULT_MIN_TICK_CHANGES,
            min_skeleton_events: DEFAULT_MIN_SKELETON_EVENTS,
            domain: Domain::Price,
            crossing: CrossingMode::Multi,
            seed: 0,
            synthetic: Vec::new(),
            out_dir: None,
        }
    }
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, StudyError> {
        let text = fs::read_to_string(path).map_err(|e| {
            StudyError::Validation(vec![format!("cannot read config {}: {e}", path.display())])
        })?;
        Self::from_json(&text).map_err(|e| {
            StudyError::Validation(vec![format!("invalid config {}: {e}", path.display())])
        })
    }

    /// Variants in output order: orig2, orig4, then deltas ascending.
    pub fn variant_list(&self) -> Vec<Variant> {
        let mut out = Vec::new();
        if self.variants.contains(&VariantFamily::Orig2) {
            out.push(Variant::Orig2);
        }
        if self.variants.contains(&VariantFamily::Orig4) {
            out.push(Variant::Orig4);
        }
        if self.variants.contains(&VariantFamily::Skeleton) {
            out.extend(self.deltas.iter().map(|&d| Variant::Delta(d)));
        }
        out
    }
}

/// Reports every configuration problem at once.
pub fn validate_config(config: &StudyConfig) -> Result<(), Vec<String>> {
    let mut errors = Vec::new();
    if config.depth < 0 {
        errors.push(format!("depth must be >= 0, got {}", config.depth));
    }
    if (config.variants.contains(&VariantFamily::Skeleton) || config.variants.is_empty())
        && config.deltas.is_empty()
    {
        errors.push("deltas must not be empty".to_string());
    }
    if config.deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        errors.push(format!(
            "deltas must be positive and finite: {:?}",
            config.deltas
        ));
    }
    if config.deltas.windows(2).any(|w| w[1] <= w[0]) {
        errors.push(format!(
            "deltas must be strictly increasing: {:?}",
            config.deltas
        ));
    }
    if config.variants.is_empty() {
        errors.push("variants must not be empty".to_string());
    }
    if config.min_daily < 2 {
        errors.push(format!("min_daily must be >= 2, got {}", config.min_daily));
    }
    if config.min_tick_changes < 2 {
        errors.push(format!(
            "min_tick_changes must be >= 2, got {}",
            config.min_tick_changes
        ));
    }
    if config.inputs.is_empty() && config.synthetic.is_empty() {
        errors.push("no inputs and no synthetic generator configured".to_string());
    }
    for (g, group) in config.synthetic.iter().enumerate() {
        if group.instruments == 0 {
            errors.push(format!("synthetic[{g}]: instruments must be >= 1"));
        }
        if group.n < 2 {
            errors.push(format!("synthetic[{g}]: n must be >= 2"));
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Orig2,
    Orig4,
    Delta(f64),
}

impl Variant {
    pub fn alphabet_size(&self) -> usize {
        match self {
            Variant::Orig4 => 4,
            _ => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Orig2 => f.write_str("orig2"),
            Variant::Orig4 => f.write_str("orig4"),
            Variant::Delta(d) => write!(f, "delta_{}", format_delta(*d)),
        }
    }
}

/// At least two decimals (`0.10`, `1.00`), more when the value needs them.
pub fn format_delta(delta: f64) -> String {
    let short = delta.to_string();
    let two = format!("{delta:.2}");
    if two.parse::<f64>() == Ok(delta) {
        two
    } else {
        short
    }
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("data error: {0}")]
    Data(String),
    #[error("no eligible instruments")]
    NoEligible,
    #[error("all {0} instruments failed")]
    AllFailed(usize),
    #[error("cannot write output {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl StudyError {
    /// 1 validation error, 2 data error, 3 all instruments failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            StudyError::Validation(_) => 1,
            StudyError::Data(_) | StudyError::NoEligible | StudyError::Output { .. } => 2,
            StudyError::AllFailed(_) => 3,
        }
    }
}

/// A variant that was not estimated for an instrument, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub instrument: String,
    pub variant: String,
    pub reason: String,
}

/// Estimates for one instrument.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InstrumentOutcome {
    pub rows: Vec<ResultRow>,
    pub skipped: Vec<Skipped>,
}

/// Two variant names and the per-instrument `(instrument, a, b)` points.
pub type ScatterSet = (String, String, Vec<(String, f64, f64)>);

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub depth: usize,
    pub variants: Vec<String>,
    /// Ordered by instrument, then variant.
    pub rows: Vec<ResultRow>,
    pub skipped: Vec<Skipped>,
    pub failed: Vec<(String, String)>,
    pub kde_curves: Vec<(String, Vec<(f64, f64)>)>,
    pub correlation: Option<CorrelationMatrix>,
    pub scatter: Vec<ScatterSet>,
    pub summary: Vec<DeltaSummaryRow>,
}

/// Per-instrument settings shared by the study and the `entropy` subcommand.
#[derive(Debug, Clone)]
pub struct EstimationPlan {
    pub variants: Vec<Variant>,
    pub depth: usize,
    pub domain: Domain,
    pub crossing: CrossingMode,
    pub min_skeleton_events: usize,
}

impl EstimationPlan {
    pub fn from_config(config: &StudyConfig) -> Self {
        Self {
            variants: config.variant_list(),
            depth: config.depth.max(0) as usize,
            domain: config.domain,
            crossing: config.crossing,
            min_skeleton_events: config.min_skeleton_events,
        }
    }
}

/// Discretised symbols of one variant of one instrument, or why there are none.
pub fn variant_symbols(
    series: &PriceSeries,
    variant: Variant,
    plan: &EstimationPlan,
) -> Result<Result<quantise::SymbolSequence, String>, String> {
    match variant {
        Variant::Orig2 | Variant::Orig4 => {
            let drop_zero = series.frequency() == FrequencyKind::Tick;
            let returns = ingest::log_returns(series, drop_zero).map_err(|e| e.to_string())?;
            let m = variant.alphabet_size();
            if returns.len() < m {
                return Ok(Err(format!("{} returns, fewer than {m}", returns.len())));
            }
            quantise::quantile_bins(&returns, m)
                .map(Ok)
                .map_err(|e| e.to_string())
        }
        Variant::Delta(delta) => {
            let skeleton = homogenise::decompose(series, delta, plan.domain, plan.crossing)
                .map_err(|e| e.to_string())?;
            let events = skeleton.len();
            if events == 0 || events < plan.min_skeleton_events {
                return Ok(Err(format!(
                    "{events} skeleton events, need {}",
                    plan.min_skeleton_events.max(1)
                )));
            }
            Ok(Ok(homogenise::skeleton_to_symbols(&skeleton)))
        }
    }
}

/// Estimates every planned variant for one instrument.
pub fn estimate_instrument(
    series: &PriceSeries,
    plan: &EstimationPlan,
) -> Result<InstrumentOutcome, String> {
    let mut outcome = InstrumentOutcome::default();
    let id = series.instrument_id();
    for &variant in &plan.variants {
        let name = variant.to_string();
        match variant_symbols(series, variant, plan)? {
            Ok(symbols) => {
                let est = ctw::entropy_rate(&symbols, plan.depth).map_err(|e| e.to_string())?;
                outcome.rows.push(ResultRow {
                    instrument: id.to_string(),
                    variant: name,
                    entropy: est.value,
                    n: est.sequence_length,
                });
            }
            Err(reason) => outcome.skipped.push(Skipped {
                instrument: id.to_string(),
                variant: name,
                reason,
            }),
        }
    }
    Ok(outcome)
}

/// Worker count from `VOHO_THREADS` (0 or unset = one per core).
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of instrument `index` in synthetic group `group`.
pub fn synthetic_seed(base: u64, group: usize, index: usize) -> u64 {
    splitmix64(splitmix64(base ^ ((group as u64) << 40)) ^ index as u64)
}

/// Generates the configured synthetic instruments.
pub fn synthetic_series(config: &StudyConfig) -> Result<Vec<PriceSeries>, StudyError> {
    let mut jobs = Vec::new();
    for (g, group) in config.synthetic.iter().enumerate() {
        let prefix = group
            .prefix
            .clone()
            .unwrap_or_else(|| format!("syn{g}_{}", kind_name(group.kind)));
        for i in 0..group.instruments {
            jobs.push((
                format!("{prefix}{i:03}"),
                group,
                synthetic_seed(config.seed, g, i),
            ));
        }
    }
    par::map(&jobs, |(id, group, seed)| {
        ingest::generate_synthetic_path(id.clone(), group.kind, group.n, &group.params, *seed)
    })
    .into_iter()
    .collect::<Result<_, _>>()
    .map_err(|e| StudyError::Data(e.to_string()))
}

fn kind_name(kind: SyntheticKind) -> &'static str {
    match kind {
        SyntheticKind::Brownian => "brownian",
        SyntheticKind::TimeChanged => "time_changed",
        SyntheticKind::Jump => "jump",
    }
}

fn load_all(config: &StudyConfig) -> Result<Vec<PriceSeries>, StudyError> {
    let loaded = par::map(&config.inputs, |input| {
        ingest::load_prices(&input.path, input.format)
            .map_err(|e| format!("{}: {e}", input.path.display()))
    });
    let mut all = Vec::new();
    for batch in loaded {
        all.extend(batch.map_err(StudyError::Data)?);
    }
    all.extend(synthetic_series(config)?);
    let mut seen = BTreeSet::new();
    for s in &all {
        if !seen.insert(s.instrument_id().to_string()) {
            return Err(StudyError::Data(format!(
                "instrument {} appears in more than one input",
                s.instrument_id()
            )));
        }
    }
    all.sort_by(|a, b| a.instrument_id().cmp(b.instrument_id()));
    Ok(all)
}

/// Runs the study with the worker count from `VOHO_THREADS`.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult, StudyError> {
    run_study_with_threads(config, threads_from_env())
}

pub fn run_study_with_threads(
    config: &StudyConfig,
    threads: usize,
) -> Result<StudyResult, StudyError> {
    validate_config(config).map_err(StudyError::Validation)?;
    let result = par::with_threads(threads, || compute_study(config))?;
    if let Some(dir) = &config.out_dir {
        write_outputs(&result, dir)?;
    }
    Ok(result)
}

fn compute_study(config: &StudyConfig) -> Result<StudyResult, StudyError> {
    let all = load_all(config)?;
    let eligible = ingest::filter_eligible(&all, config.min_daily, config.min_tick_changes);
    log::info!("{} of {} instruments eligible", eligible.len(), all.len());
    if eligible.is_empty() {
        return Err(StudyError::NoEligible);
    }

    let plan = EstimationPlan::from_config(config);
    let outcomes = par::map(&eligible, |s| estimate_instrument(s, &plan));

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut failed = Vec::new();
    for (series, outcome) in eligible.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                rows.extend(o.rows);
                skipped.extend(o.skipped);
            }
            Err(e) => {
                log::warn!("instrument {} failed: {e}", series.instrument_id());
                failed.push((series.instrument_id().to_string(), e));
            }
        }
    }
    if failed.len() == eligible.len() {
        return Err(StudyError::AllFailed(failed.len()));
    }
    for s in &skipped {
        log::debug!("skipped {} {}: {}", s.instrument, s.variant, s.reason);
    }

    let variants: Vec<String> = plan.variants.iter().map(|v| v.to_string()).collect();
    Ok(aggregate(
        config, plan.depth, variants, rows, skipped, failed,
    ))
}

fn aggregate(
    config: &StudyConfig,
    depth: usize,
    variants: Vec<String>,
    rows: Vec<ResultRow>,
    skipped: Vec<Skipped>,
    failed: Vec<(String, String)>,
) -> StudyResult {
    let values_of = |variant: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.variant == variant)
            .map(|r| r.entropy)
            .collect()
    };

    let curves = par::map(&variants, |v| {
        stats::kde_curve(&values_of(v), Bandwidth::Auto)
    });
    let mut kde_curves = Vec::new();
    for (variant, curve) in variants.iter().zip(curves) {
        match curve {
            Ok(c) => kde_curves.push((variant.clone(), c)),
            Err(e) => log::warn!("no density for {variant}: {e}"),
        }
    }

    // Variants without spread or with fewer than two instruments cannot be correlated.
    let corr_variants: Vec<String> = variants
        .iter()
        .filter(|v| {
            let vals = values_of(v);
            let ok = vals.len() >= 2 && vals.iter().any(|x| *x != vals[0]);
            if !ok {
                log::warn!("variant {v} left out of the correlation matrix");
            }
            ok
        })
        .cloned()
        .collect();
    let correlation = if corr_variants.is_empty() {
        None
    } else {
        match stats::correlation_matrix(&rows, &corr_variants) {
            Ok(m) => {
                if !m.dropped.is_empty() {
                    log::info!(
                        "{} instruments lack a variant and are left out of the correlation matrix",
                        m.dropped.len()
                    );
                }
                Some(m)
            }
            Err(e) => {
                log::warn!("no correlation matrix: {e}");
                None
            }
        }
    };

    let smallest_delta = config
        .deltas
        .first()
        .filter(|_| config.variants.contains(&VariantFamily::Skeleton))
        .map(|&d| Variant::Delta(d).to_string());
    let mut scatter = Vec::new();
    if let Some(target) = smallest_delta {
        for orig in ["orig4", "orig2"] {
            if variants.iter().any(|v| v == orig) {
                let pairs = stats::scatter_pairs(&rows, orig, &target);
                scatter.push((orig.to_string(), target.clone(), pairs));
            }
        }
    }

    let delta_rows: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            config
                .deltas
                .iter()
                .find(|&&d| Variant::Delta(d).to_string() == r.variant)
                .map(|&d| (d, r.entropy))
        })
        .collect();
    let summary = stats::delta_summary(&delta_rows);

    StudyResult {
        depth,
        variants,
        rows,
        skipped,
        failed,
        kde_curves,
        correlation,
        scatter,
        summary,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>, StudyError> {
    let path = dir.join(name);
    fs::File::create(&path)
        .map(BufWriter::new)
        .map_err(|source| StudyError::Output {
            path: path.display().to_string(),
            source,
        })
}

fn csv_err(dir: &Path, name: &str) -> impl Fn(csv::Error) -> StudyError {
    let path = dir.join(name).display().to_string();
    move |e| StudyError::Output {
        path: path.clone(),
        source: std::io::Error::other(e),
    }
}

/// Writes the entropy rows as `instrument,variant,n,depth,alphabet,entropy_bits_per_symbol`.
pub fn write_entropy_csv<W: Write>(
    out: W,
    rows: &[ResultRow],
    depth: usize,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "instrument",
        "variant",
        "n",
        "depth",
        "alphabet",
        "entropy_bits_per_symbol",
    ])?;
    for r in rows {
        let alphabet = if r.variant == "orig4" { 4 } else { 2 };
        w.write_record([
            r.instrument.clone(),
            r.variant.clone(),
            r.n.to_string(),
            depth.to_string(),
            alphabet.to_string(),
            r.entropy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every study output into `dir`.
pub fn write_outputs(result: &StudyResult, dir: &Path) -> Result<(), StudyError> {
    fs::create_dir_all(dir).map_err(|source| StudyError::Output {
        path: dir.display().to_string(),
        source,
    })?;

    let name = "entropy.csv";
    write_entropy_csv(create(dir, name)?, &result.rows, result.depth)
        .map_err(csv_err(dir, name))?;

    for (variant, curve) in &result.kde_curves {
        let name = format!("kde_{variant}.csv");
        let mut w = csv::Writer::from_writer(create(dir, &name)?);
        let res: Result<(), csv::Error> = (|| {
            w.write_record(["x", "density"])?;
            for (x, d) in curve {
                w.write_record([x.to_string(), d.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })();
        res.map_err(csv_err(dir, &name))?;
    }

    if let Some(m) = &result.correlation {
        let name = "corr.csv";
        let mut w = csv::Writer::from_writer(create(dir, name)?);
        let res: Result<(), csv::Error> = (|| {
            let mut header = vec!["variant".to_string()];
            header.extend(m.variants.iter().cloned());
            w.write_record(&header)?;
            for (v, row) in m.variants.iter().zip(&m.values) {
                let mut rec = vec![v.clone()];
                rec.extend(row.iter().map(|x| x.to_string()));
                w.write_record(&rec)?;
            }
            w.flush()?;
            Ok(())
        })();
        res.map_err(csv_err(dir, name))?;
    }

    for (a, b, pairs) in &result.scatter {
        let name = format!("scatter_{a}_{b}.csv");
        let mut w = csv::Writer::from_writer(create(dir, &name)?);
        let res: Result<(), csv::Error> = (|| {
            w.write_record(["instrument", &format!("value_{a}"), &format!("value_{b}")])?;
            for (inst, x, y) in pairs {
                w.write_record([inst.clone(), x.to_string(), y.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })();
        res.map_err(csv_err(dir, &name))?;
    }

    let name = "summary.csv";
    let mut w = csv::Writer::from_writer(create(dir, name)?);
    let res: Result<(), csv::Error> = (|| {
        w.write_record(["delta", "mean_entropy"])?;
        for row in &result.summary {
            w.write_record([format_delta(row.delta), row.mean_entropy.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(csv_err(dir, name))?;

    let name = "summary.txt";
    let mut f = create(dir, name)?;
    f.write_all(stats::render_summary_table(&result.summary).as_bytes())
        .and_then(|_| f.flush())
        .map_err(|source| StudyError::Output {
            path: dir.join(name).display().to_string(),
            source,
        })?;
    Ok(())
}
