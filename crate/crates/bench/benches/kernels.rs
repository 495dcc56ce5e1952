use std::hint::black_box;

use bcmarkov_bench::{fgm_model, sparse_chain};
use bcmarkov_core::copula::{criterion_integral, prob_concomitant_leq};
use bcmarkov_core::falpha::{example41_scenario, simulate_scheme, FalphaSeries};
use bcmarkov_core::markov::{brute_force_window, simulate_chain, tail_union_window};
use bcmarkov_core::series::{classify, Budget, SeriesFamily};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn windows(c: &mut Criterion) {
    let mut group = c.benchmark_group("window_union");
    for end in [1_000u64, 100_000] {
        group.bench_with_input(BenchmarkId::new("chain_rule", end), &end, |b, &end| {
            b.iter(|| {
                let k = sparse_chain(0.5, 2.0);
                tail_union_window(&k, 10, black_box(end)).unwrap()
            })
        });
    }
    let k = sparse_chain(0.5, 1.0);
    group.bench_function("enumeration_width_12", |b| b.iter(|| brute_force_window(&k, 5, black_box(17)).unwrap()));
    group.finish();
}

fn series(c: &mut Criterion) {
    let budget = Budget::default();
    let mut group = c.benchmark_group("classify");
    for family in [SeriesFamily::PSeries { p: 1.5 }, SeriesFamily::LogPower { q: 1.0 }] {
        group.bench_function(family.to_string(), |b| b.iter(|| classify(&family.terms(), &budget).unwrap()));
    }
    let sc = example41_scenario(2.0).unwrap();
    group.bench_function("maxima_gamma_2", |b| {
        b.iter(|| classify(&bcmarkov_core::falpha::series_terms_unchecked(&sc, FalphaSeries::Prop41), &budget).unwrap())
    });
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    let k = sparse_chain(0.5, 1.0);
    group.bench_function("chain_10k", |b| b.iter(|| simulate_chain(&k, 10_000, black_box(7)).unwrap()));
    let sc = example41_scenario(0.5).unwrap();
    group.bench_function("scheme_10k", |b| b.iter(|| simulate_scheme(&sc, 10_000, black_box(7))));
    group.finish();
}

fn concomitants(c: &mut Criterion) {
    let m = fgm_model(1.0);
    let mut group = c.benchmark_group("concomitant");
    group.bench_function("prob_leq_n50", |b| b.iter(|| prob_concomitant_leq(&m, black_box(50), 0.5).unwrap()));
    group.bench_function("criterion_integral", |b| b.iter(|| criterion_integral(&m, black_box(0.5)).unwrap()));
    group.finish();
}

criterion_group!(benches, windows, series, simulation, concomitants);
criterion_main!(benches);
