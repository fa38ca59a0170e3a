//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.
//!
//! Run with `cargo test -p voho --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::*;
use voho::ctw::{entropy_rate_of, log2_mixture_probability};
use voho::homogenise::{decompose_path, skeleton_to_symbols, CrossingMode};
use voho::ingest::{generate_synthetic_path, GeneratorParams, SyntheticKind};
use voho::par;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

const ONE_MINUTE: Duration = Duration::from_secs(60);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ctw_oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for depth in 0..=3 {
        let sets = suffix_sets(depth, 2);
        for n in 1..=8 {
            for seq in all_sequences(n, 2) {
                let oracle = log2_q(&brute_force_mixture(&seq, 2, depth, &sets));
                let ours = log2_mixture_probability(&seq, 2, depth).map_err(|e| e.to_string())?;
                let rel = (ours - oracle).abs() / oracle.abs();
                worst = worst.max(rel);
                ensure(
                    rel <= 1e-9,
                    format!("{seq:?} D={depth}: {ours} vs {oracle}"),
                )?;
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < ONE_MINUTE, format!("took {elapsed:?}"))?;
    Ok(format!(
        "{checked} (sequence, depth) pairs, worst rel err {worst:.1e}, {elapsed:.2?}"
    ))
}

fn ctw_normalisation() -> Verdict {
    let mut worst = 0.0f64;
    for (m, max_n) in [(2usize, 8usize), (4, 6)] {
        for depth in 0..=2 {
            for n in 1..=max_n {
                let total: f64 = all_sequences(n, m)
                    .map(|s| log2_mixture_probability(&s, m, depth).unwrap().exp2())
                    .sum();
                worst = worst.max((total - 1.0).abs());
                ensure(
                    (total - 1.0).abs() <= 1e-9,
                    format!("m={m} D={depth} n={n}: sum {total}"),
                )?;
            }
        }
    }
    Ok(format!("max |sum - 1| = {worst:.1e}"))
}

fn uniform(n: usize, m: u8, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0..m)).collect()
}

fn estimator_calibration() -> Verdict {
    let start = Instant::now();
    let n = 10_000;
    let seeds: Vec<u64> = (0..20).collect();
    let binary = par::map(&seeds, |&s| {
        entropy_rate_of(&uniform(n, 2, s), 2, 20).unwrap().value
    });
    let mean_binary = binary.iter().sum::<f64>() / binary.len() as f64;
    ensure(
        (0.98..=1.05).contains(&mean_binary),
        format!("mean binary {mean_binary}"),
    )?;

    let zeros = entropy_rate_of(&vec![0; n], 2, 20).unwrap().value;
    ensure(zeros <= 0.02, format!("all-zeros {zeros}"))?;
    let alternating: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let alt = entropy_rate_of(&alternating, 2, 20).unwrap().value;
    ensure(alt <= 0.02, format!("alternating {alt}"))?;

    let quaternary = par::map(&seeds[..5], |&s| {
        entropy_rate_of(&uniform(n, 4, 100 + s), 4, 20)
            .unwrap()
            .value
    });
    for q in &quaternary {
        ensure((1.96..=2.10).contains(q), format!("quaternary {q}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < ONE_MINUTE, format!("took {elapsed:?}"))?;
    Ok(format!(
        "binary mean {mean_binary:.4}, zeros {zeros:.4}, alternating {alt:.4}, quaternary {:.4}..{:.4}, {elapsed:.2?}",
        quaternary.iter().copied().fold(f64::INFINITY, f64::min),
        quaternary.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ))
}

fn decomposition_fixture() -> Verdict {
    let s = decompose_path(
        &[0.0, 1.0, 2.0, 3.0],
        &[10.00, 10.30, 10.10, 9.70],
        0.25,
        CrossingMode::Multi,
    )
    .map_err(|e| e.to_string())?;
    let expected = [
        (0.25 / 0.30, 10.25, 1i8),
        (2.25, 10.00, -1),
        (2.875, 9.75, -1),
    ];
    ensure(s.len() == 3, format!("{} events", s.len()))?;
    for (e, (t, level, dir)) in s.events.iter().zip(expected) {
        ensure(
            (e.time - t).abs() < 1e-12,
            format!("time {} vs {t}", e.time),
        )?;
        ensure(
            (s.level(e.level_index) - level).abs() < 1e-12,
            format!("level {} vs {level}", s.level(e.level_index)),
        )?;
        ensure(e.direction == dir, "direction")?;
    }
    Ok("3 events match the hand trace".into())
}

fn decomposition_residual_property() -> Verdict {
    let mut total_events = 0usize;
    for case in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let n = rng.random_range(2..300);
        let delta = rng.random_range(0.01..2.0);
        let scale = delta * rng.random_range(0.05..8.0);
        let mut t = vec![0.0];
        let mut x = vec![rng.random_range(-50.0..50.0)];
        for _ in 1..n {
            let dt = if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(0.0..3.0)
            };
            let z: f64 = rng.sample(StandardNormal);
            t.push(t.last().unwrap() + dt);
            x.push(x.last().unwrap() + scale * z);
        }
        let s = decompose_path(&t, &x, delta, CrossingMode::Multi).map_err(|e| e.to_string())?;
        total_events += s.len();

        let mut next_event = 0;
        let mut k = 0i64;
        for j in 1..n {
            while next_event < s.len() && s.events[next_event].sample == j {
                let e = &s.events[next_event];
                ensure(
                    e.level_index - k == i64::from(e.direction) && e.direction.abs() == 1,
                    format!("case {case}: level step {} -> {}", k, e.level_index),
                )?;
                ensure(
                    e.time >= t[j - 1] && e.time <= t[j],
                    format!(
                        "case {case}: event time {} outside [{}, {}]",
                        e.time,
                        t[j - 1],
                        t[j]
                    ),
                )?;
                k = e.level_index;
                next_event += 1;
            }
            let residual = (x[j] - s.level(k)).abs();
            ensure(
                residual < delta,
                format!("case {case}: residual {residual} >= delta {delta} at sample {j}"),
            )?;
        }
        ensure(
            next_event == s.len(),
            format!("case {case}: events out of sample order"),
        )?;
    }
    Ok(format!(
        "1000 paths, {total_events} events, residual < delta after every sample"
    ))
}

fn jump_mechanism() -> Verdict {
    let delta = 0.25;
    let events = 2000;
    let jump = GeneratorParams {
        jump_size: 5.0 * delta,
        ..Default::default()
    };
    let path = generate_synthetic_path("jump", SyntheticKind::Jump, events / 5 + 1, &jump, 5)
        .map_err(|e| e.to_string())?;
    let skeleton = decompose_path(
        &path.timestamps(),
        &path.prices(),
        delta,
        CrossingMode::Multi,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        skeleton.len() == events,
        format!("jump skeleton has {} events", skeleton.len()),
    )?;
    let runs_ok = skeleton_to_symbols(&skeleton)
        .symbols()
        .chunks(5)
        .all(|c| c.iter().all(|&s| s == c[0]));
    ensure(runs_ok, "jump skeleton is not made of 5-runs")?;
    let h_jump = entropy_rate_of(skeleton_to_symbols(&skeleton).symbols(), 2, 20)
        .unwrap()
        .value;

    let walk = GeneratorParams {
        start_price: 1000.0,
        sigma: 0.1 * delta,
        ..Default::default()
    };
    let path = generate_synthetic_path("walk", SyntheticKind::Brownian, 300_000, &walk, 5)
        .map_err(|e| e.to_string())?;
    let skeleton = decompose_path(
        &path.timestamps(),
        &path.prices(),
        delta,
        CrossingMode::Multi,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        skeleton.len() >= events,
        format!("walk skeleton has {} events", skeleton.len()),
    )?;
    let symbols = skeleton_to_symbols(&skeleton);
    let h_walk = entropy_rate_of(&symbols.symbols()[..events], 2, 20)
        .unwrap()
        .value;

    ensure(h_jump <= 0.5, format!("jump H {h_jump}"))?;
    ensure((0.95..=1.05).contains(&h_walk), format!("walk H {h_walk}"))?;
    ensure(h_walk - h_jump >= 0.3, format!("gap {}", h_walk - h_jump))?;
    Ok(format!(
        "jump H {h_jump:.4}, walk H {h_walk:.4}, gap {:.4}",
        h_walk - h_jump
    ))
}

fn corpus_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_study.json")
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_cli(config: &Path, out: &Path, threads: &str) -> Result<(), String> {
    let output = Command::new(env!("CARGO_BIN_EXE_voho"))
        .arg("study")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("VOHO_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        output.status.success(),
        format!(
            "voho study exited with {:?}: {}",
            output.status.code(),
            String::from_utf8_lossy(&output.stderr)
        ),
    )
}

fn read_dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn parse_corr(bytes: &[u8]) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let text = String::from_utf8(bytes.to_vec()).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or("empty corr.csv")?
        .split(',')
        .skip(1)
        .map(String::from)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .skip(1)
                .map(|v| v.parse::<f64>().unwrap())
                .collect()
        })
        .collect();
    Ok((header, rows))
}

fn check_matrix(variants: &[String], m: &[Vec<f64>]) -> Result<(), String> {
    ensure(m.len() == variants.len(), "matrix is not square")?;
    for (i, row) in m.iter().enumerate() {
        ensure(row[i] == 1.0, format!("diagonal {i} = {}", row[i]))?;
        for (j, &v) in row.iter().enumerate() {
            ensure(v == m[j][i], format!("asymmetric at ({i},{j})"))?;
            ensure(
                (-1.0..=1.0).contains(&v),
                format!("out of range at ({i},{j})"),
            )?;
        }
    }
    Ok(())
}

fn write_daily_dataset(path: &Path) {
    let start = NaiveDate::from_ymd_opt(2005, 1, 3).unwrap();
    let params = GeneratorParams {
        start_price: 200.0,
        sigma: 0.6,
        vol_of_vol: 0.4,
        ..Default::default()
    };
    let mut text = String::from("instrument,date,open,high,low,close,volume\n");
    for i in 0..6 {
        let s = generate_synthetic_path(
            format!("D{i}"),
            SyntheticKind::TimeChanged,
            1500,
            &params,
            900 + i,
        )
        .unwrap();
        for (day, p) in s.prices().iter().enumerate() {
            let date = start.checked_add_days(Days::new(day as u64)).unwrap();
            text.push_str(&format!(
                "D{i},{},{p},{p},{p},{p},1000\n",
                date.format("%Y%m%d")
            ));
        }
    }
    fs::write(path, text).unwrap();
}

fn table_and_correlation_outputs() -> Verdict {
    // Real-data stand-in: a daily file in the exchange layout.
    let dir = scratch_dir("daily");
    let data = dir.join("daily.csv");
    write_daily_dataset(&data);
    let config = dir.join("study.json");
    fs::write(
        &config,
        format!(
            r#"{{"inputs": [{{"path": {:?}, "format": "daily"}}], "min_skeleton_events": 100}}"#,
            data
        ),
    )
    .unwrap();
    let out = dir.join("out");
    run_cli(&config, &out, "0")?;
    let files = read_dir_files(&out);
    let summary = String::from_utf8(files["summary.csv"].clone()).unwrap();
    let deltas: Vec<&str> = summary
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    ensure(
        summary.starts_with("delta,mean_entropy\n")
            && deltas == ["0.05", "0.10", "0.25", "0.50", "0.75", "1.00"],
        format!("summary layout: {summary}"),
    )?;
    let table = String::from_utf8(files["summary.txt"].clone()).unwrap();
    ensure(table.lines().count() == 7, format!("table: {table}"))?;
    let (variants, m) = parse_corr(&files["corr.csv"])?;
    ensure(
        variants.len() == 8,
        format!("daily corr variants {variants:?}"),
    )?;
    check_matrix(&variants, &m)?;

    // Bundled synthetic corpus, twice.
    let a = scratch_dir("corpus_a");
    let b = scratch_dir("corpus_b");
    run_cli(&corpus_config(), &a, "0")?;
    run_cli(&corpus_config(), &b, "0")?;
    let (fa, fb) = (read_dir_files(&a), read_dir_files(&b));
    ensure(fa == fb, "repeated corpus runs differ")?;
    let (variants, m) = parse_corr(&fa["corr.csv"])?;
    check_matrix(&variants, &m)?;
    Ok(format!(
        "daily: 6-row table + {}x{} matrix; corpus: {}x{} symmetric unit-diagonal matrix, {} files identical",
        8,
        8,
        m.len(),
        m.len(),
        fa.len()
    ))
}

fn pipeline_determinism() -> Verdict {
    let one = scratch_dir("threads_1");
    let eight = scratch_dir("threads_8");
    run_cli(&corpus_config(), &one, "1")?;
    run_cli(&corpus_config(), &eight, "8")?;
    let (f1, f8) = (read_dir_files(&one), read_dir_files(&eight));
    ensure(!f1.is_empty(), "no outputs")?;
    for (name, bytes) in &f1 {
        ensure(
            f8.get(name) == Some(bytes),
            format!("{name} differs between 1 and 8 threads"),
        )?;
    }
    ensure(f1.len() == f8.len(), "different file sets")?;
    let rows = String::from_utf8_lossy(&f1["entropy.csv"]).lines().count() - 1;
    Ok(format!(
        "{} files byte-identical, {rows} entropy rows",
        f1.len()
    ))
}

fn linear_scaling() -> Verdict {
    let time = |n: usize| {
        let bits = uniform(n, 2, 77);
        let mut samples: Vec<Duration> = (0..3)
            .map(|_| {
                let start = Instant::now();
                let h = entropy_rate_of(&bits, 2, 20).unwrap();
                std::hint::black_box(h);
                start.elapsed()
            })
            .collect();
        samples.sort();
        samples[1]
    };
    let small = time(100_000);
    let large = time(200_000);
    let ratio = large.as_secs_f64() / small.as_secs_f64();
    ensure(
        ratio <= 3.0,
        format!("ratio {ratio:.2} ({small:?} vs {large:?})"),
    )?;
    Ok(format!(
        "{small:.2?} at 1e5, {large:.2?} at 2e5, ratio {ratio:.2}"
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "CTW oracle equivalence (m=2, D<=3, n<=8)",
            ctw_oracle_equivalence,
        ),
        (
            "CTW normalisation (D<=2; m=2 n<=8, m=4 n<=6)",
            ctw_normalisation,
        ),
        (
            "Estimator calibration (uniform, constant, alternating)",
            estimator_calibration,
        ),
        ("Decomposition fixture", decomposition_fixture),
        (
            "Decomposition residual property (1000 paths)",
            decomposition_residual_property,
        ),
        ("Jump vs Brownian skeleton entropy", jump_mechanism),
        (
            "Table layout and correlation matrix outputs",
            table_and_correlation_outputs,
        ),
        (
            "Pipeline determinism (VOHO_THREADS=1 vs 8)",
            pipeline_determinism,
        ),
        ("Linear scaling of entropy_rate", linear_scaling),
    ];
    let mut failures = 0;
    for (name, criterion) in criteria {
        let start = Instant::now();
        let verdict =
            std::panic::catch_unwind(criterion).unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed();
        match verdict {
            Ok(detail) => println!("[PASS] {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] {name}: {detail} ({elapsed:.2?})");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
