use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use voho::ctw::DEFAULT_DEPTH;
use voho::homogenise::{self, CrossingMode, Domain};
use voho::ingest::{self, FrequencyKind, GeneratorParams, PriceSeries, SyntheticKind};
use voho::par;
use voho::pipeline::{self, EstimationPlan, StudyConfig, StudyError, Variant};
use voho::quantise;

const EXIT_VALIDATION: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Parser)]
#[command(
    name = "voho",
    version,
    about = "Volatility homogenisation and CTW entropy rates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a price file and report per-instrument eligibility.
    Ingest {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = ingest::DEFAULT_MIN_DAILY)]
        min_daily: usize,
        #[arg(long, default_value_t = ingest::DEFAULT_MIN_TICK_CHANGES)]
        min_tick_changes: usize,
    },
    /// Write the skeleton of every instrument as CSV.
    Decompose {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        delta: f64,
        #[command(flatten)]
        decomposition: DecompositionArgs,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate entropy rates of the original and decomposed sequences.
    Entropy {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_delimiter = ',', default_values_t = pipeline::DEFAULT_DELTAS)]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        #[command(flatten)]
        decomposition: DecompositionArgs,
        /// Minimum skeleton events for a delta variant to be estimated.
        #[arg(long, default_value_t = 1)]
        min_events: usize,
        /// Also write the symbol sequences here.
        #[arg(long)]
        symbols_out: Option<PathBuf>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full study described by a JSON config.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
        #[arg(long, allow_negative_numbers = true)]
        depth: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        single_crossing: bool,
        #[arg(long)]
        domain: Option<Domain>,
    },
    /// Emit a synthetic tick dataset.
    Synth {
        #[arg(long, default_value = "brownian")]
        kind: SyntheticKind,
        #[arg(long, default_value_t = 10)]
        instruments: usize,
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        start_price: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        jump_size: Option<f64>,
        #[arg(long)]
        vol_of_vol: Option<f64>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "tick")]
    format: FrequencyKind,
}

#[derive(Args)]
struct DecompositionArgs {
    /// At most one event per input row.
    #[arg(long)]
    single_crossing: bool,
    #[arg(long, default_value = "price")]
    domain: Domain,
}

impl DecompositionArgs {
    fn crossing(&self) -> CrossingMode {
        if self.single_crossing {
            CrossingMode::Single
        } else {
            CrossingMode::Multi
        }
    }
}

fn output(path: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(input: &InputArgs) -> Result<Vec<PriceSeries>, ExitCode> {
    ingest::load_prices(&input.input, input.format).map_err(|e| {
        eprintln!("error: {}: {e}", input.input.display());
        ExitCode::from(EXIT_DATA)
    })
}

fn data_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_DATA)
}

fn run(command: Command) -> Result<(), ExitCode> {
    match command {
        Command::Ingest {
            input,
            min_daily,
            min_tick_changes,
        } => {
            let series = load(&input)?;
            let mut out = output(None).map_err(data_error)?;
            let mut report = || -> io::Result<()> {
                writeln!(out, "instrument,kind,observations,price_changes,eligible")?;
                for s in &series {
                    writeln!(
                        out,
                        "{},{:?},{},{},{}",
                        s.instrument_id(),
                        s.frequency(),
                        s.len(),
                        s.price_changes(),
                        ingest::is_eligible(s, min_daily, min_tick_changes)
                    )?;
                }
                out.flush()
            };
            report().map_err(data_error)
        }
        Command::Decompose {
            input,
            delta,
            decomposition,
            out,
        } => {
            let series = load(&input)?;
            let crossing = decomposition.crossing();
            let skeletons = par::map(&series, |s| {
                homogenise::decompose(s, delta, decomposition.domain, crossing)
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_VALIDATION)
            })?;
            let writer = output(out.as_ref()).map_err(data_error)?;
            homogenise::write_skeleton_csv(writer, &skeletons).map_err(data_error)
        }
        Command::Entropy {
            input,
            deltas,
            depth,
            decomposition,
            min_events,
            symbols_out,
            out,
        } => {
            let series = load(&input)?;
            let mut variants = vec![Variant::Orig2, Variant::Orig4];
            variants.extend(deltas.iter().map(|&d| Variant::Delta(d)));
            let plan = EstimationPlan {
                variants,
                depth,
                domain: decomposition.domain,
                crossing: decomposition.crossing(),
                min_skeleton_events: min_events,
            };
            let outcomes = par::with_threads(pipeline::threads_from_env(), || {
                par::map(&series, |s| pipeline::estimate_instrument(s, &plan))
            });
            let mut rows = Vec::new();
            for (s, outcome) in series.iter().zip(outcomes) {
                match outcome {
                    Ok(o) => {
                        for skip in o.skipped {
                            eprintln!(
                                "skipped {} {}: {}",
                                skip.instrument, skip.variant, skip.reason
                            );
                        }
                        rows.extend(o.rows);
                    }
                    Err(e) => eprintln!("instrument {} failed: {e}", s.instrument_id()),
                }
            }
            if let Some(path) = symbols_out {
                let mut named = Vec::new();
                for s in &series {
                    for &v in &plan.variants {
                        if let Ok(Ok(seq)) = pipeline::variant_symbols(s, v, &plan) {
                            named.push((v.to_string(), seq));
                        }
                    }
                }
                let refs: Vec<(&str, &quantise::SymbolSequence)> =
                    named.iter().map(|(v, s)| (v.as_str(), s)).collect();
                let writer = output(Some(&path)).map_err(data_error)?;
                quantise::write_symbols_csv(writer, &refs).map_err(data_error)?;
            }
            let writer = output(out.as_ref()).map_err(data_error)?;
            pipeline::write_entropy_csv(writer, &rows, depth).map_err(data_error)
        }
        Command::Study {
            config,
            deltas,
            depth,
            out,
            single_crossing,
            domain,
        } => {
            let mut cfg = StudyConfig::load(&config).map_err(report_study_error)?;
            if let Some(d) = deltas {
                cfg.deltas = d;
            }
            if let Some(d) = depth {
                cfg.depth = d;
            }
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            if single_crossing {
                cfg.crossing = CrossingMode::Single;
            }
            if let Some(d) = domain {
                cfg.domain = d;
            }
            if cfg.out_dir.is_none() {
                cfg.out_dir = Some(PathBuf::from("voho_out"));
            }
            let result = pipeline::run_study(&cfg).map_err(report_study_error)?;
            eprintln!(
                "{} estimates, {} skipped, {} failed instruments; outputs in {}",
                result.rows.len(),
                result.skipped.len(),
                result.failed.len(),
                cfg.out_dir
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default()
            );
            print!("{}", voho::stats::render_summary_table(&result.summary));
            Ok(())
        }
        Command::Synth {
            kind,
            instruments,
            n,
            seed,
            start_price,
            sigma,
            jump_size,
            vol_of_vol,
            out,
        } => {
            let defaults = GeneratorParams::default();
            let params = GeneratorParams {
                start_price: start_price.unwrap_or(defaults.start_price),
                sigma: sigma.unwrap_or(defaults.sigma),
                jump_size: jump_size.unwrap_or(defaults.jump_size),
                vol_of_vol: vol_of_vol.unwrap_or(defaults.vol_of_vol),
                ..defaults
            };
            let ids: Vec<usize> = (0..instruments).collect();
            let series = par::map(&ids, |&i| {
                ingest::generate_synthetic_path(
                    format!("syn{i:03}"),
                    kind,
                    n,
                    &params,
                    pipeline::synthetic_seed(seed, 0, i),
                )
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_VALIDATION)
            })?;
            let writer = output(out.as_ref()).map_err(data_error)?;
            ingest::write_tick_csv(writer, &series).map_err(data_error)
        }
    }
}

fn report_study_error(e: StudyError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
