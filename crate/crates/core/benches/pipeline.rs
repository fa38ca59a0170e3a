use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voho::ctw;
use voho::ingest::{generate_synthetic_path, GeneratorParams, PriceSeries, SyntheticKind};
use voho::par;
use voho::pipeline::{estimate_instrument, EstimationPlan, Variant};
use voho::{homogenise::Domain, CrossingMode};

fn random_bits(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

fn bench_ctw(c: &mut Criterion) {
    let mut group = c.benchmark_group("ctw_entropy_rate");
    for n in [10_000usize, 100_000] {
        let bits = random_bits(n, 1);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("depth20", n), &bits, |b, bits| {
            b.iter(|| ctw::entropy_rate_of(black_box(bits), 2, 20).unwrap())
        });
    }
    group.finish();
}

fn corpus() -> Vec<PriceSeries> {
    let params = GeneratorParams {
        sigma: 0.05,
        ..Default::default()
    };
    (0..16)
        .map(|i| {
            generate_synthetic_path(format!("b{i}"), SyntheticKind::Brownian, 20_000, &params, i)
                .unwrap()
        })
        .collect()
}

fn bench_fanout(c: &mut Criterion) {
    let series = corpus();
    let plan = EstimationPlan {
        variants: vec![
            Variant::Orig2,
            Variant::Orig4,
            Variant::Delta(0.05),
            Variant::Delta(0.1),
        ],
        depth: 20,
        domain: Domain::Price,
        crossing: CrossingMode::Multi,
        min_skeleton_events: 1,
    };
    let mut group = c.benchmark_group("instrument_fanout");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| par::map_sequential(black_box(&series), |s| estimate_instrument(s, &plan)))
    });
    group.bench_function(
        if par::is_parallel() {
            "parallel"
        } else {
            "parallel_disabled"
        },
        |b| b.iter(|| par::map(black_box(&series), |s| estimate_instrument(s, &plan))),
    );
    group.finish();
}

fn bench_monte_carlo(c: &mut Criterion) {
    let seeds: Vec<u64> = (0..20).collect();
    let mut group = c.benchmark_group("calibration_seeds");
    group.sample_size(10);
    let run = |s: &u64| {
        ctw::entropy_rate_of(&random_bits(10_000, *s), 2, 20)
            .unwrap()
            .value
    };
    group.bench_function("sequential", |b| {
        b.iter(|| par::map_sequential(&seeds, run))
    });
    group.bench_function("parallel", |b| b.iter(|| par::map(&seeds, run)));
    group.finish();
}

criterion_group!(benches, bench_ctw, bench_fanout, bench_monte_carlo);
criterion_main!(benches);
