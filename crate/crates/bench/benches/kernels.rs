use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mfa_core::cgra::{kf_workload, mfa_workload, simulate_pe, Mode, SimConfig};
use mfa_core::dense::{gemm, gemm_blocked, geqrf, getrf};
use mfa_core::faddeeva::{build_compound, mfa};
use mfa_core::gen::{self, DEFAULT_SEED};
use mfa_core::kalman::{make_constant_velocity, run_scenario, Engine};
use mfa_core::Matrix;

fn dense(c: &mut Criterion) {
    let mut g = c.benchmark_group("dense");
    for n in [16usize, 64] {
        let mut r = gen::rng(DEFAULT_SEED);
        let a = gen::uniform(n, n, &mut r);
        let b = gen::uniform(n, n, &mut r);
        let z = Matrix::zeros(n, n);
        let dd = gen::diag_dominant(n, &mut r);
        g.bench_with_input(BenchmarkId::new("gemm", n), &n, |bch, _| {
            bch.iter(|| gemm(1.0, black_box(&a), black_box(&b), 0.0, &z).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("gemm_blocked", n), &n, |bch, _| {
            bch.iter(|| gemm_blocked(1.0, black_box(&a), black_box(&b), 0.0, &z, 16).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("geqrf", n), &n, |bch, _| {
            bch.iter(|| geqrf(black_box(&a), 16).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("getrf", n), &n, |bch, _| {
            bch.iter(|| getrf(black_box(&dd), false, 16).unwrap())
        });
    }
    g.finish();
}

fn faddeeva(c: &mut Criterion) {
    let mut g = c.benchmark_group("mfa");
    for n in [8usize, 32] {
        let mut r = gen::rng(DEFAULT_SEED);
        let cm = build_compound(
            &gen::diag_dominant(n, &mut r),
            &gen::uniform(n, n, &mut r),
            &gen::uniform(n, n, &mut r),
            &gen::uniform(n, n, &mut r),
        )
        .unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &cm, |b, cm| {
            b.iter(|| mfa(black_box(cm)).unwrap())
        });
    }
    g.finish();
}

fn kalman(c: &mut Criterion) {
    let sc = make_constant_velocity(1.0, 0.01, 0.25, DEFAULT_SEED, 100).unwrap();
    let mut g = c.benchmark_group("kf_100_steps");
    g.bench_function("mfa", |b| {
        b.iter(|| run_scenario(black_box(&sc), Engine::Mfa).unwrap())
    });
    g.bench_function("direct", |b| {
        b.iter(|| run_scenario(black_box(&sc), Engine::Direct).unwrap())
    });
    g.finish();
}

fn cycle_model(c: &mut Criterion) {
    let cfg = SimConfig::default();
    let mut g = c.benchmark_group("simulate_pe");
    g.sample_size(10);
    let kf = kf_workload(16, DEFAULT_SEED).unwrap();
    let schur = mfa_workload(16, 16, 16, DEFAULT_SEED).unwrap();
    for mode in Mode::ALL {
        g.bench_with_input(BenchmarkId::new("kf16", mode), &mode, |b, &m| {
            b.iter(|| simulate_pe(black_box(&kf), &cfg, m).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("mfa16", mode), &mode, |b, &m| {
            b.iter(|| simulate_pe(black_box(&schur), &cfg, m).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, dense, faddeeva, kalman, cycle_model);
criterion_main!(benches);
