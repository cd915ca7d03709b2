use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use nllvm_core::exec;
use nllvm_core::grid::GridSpec;
use nllvm_core::harness;
use nllvm_core::transfer::{mixture_density_with, MixtureRule, TransferFunction};

fn mixture(c: &mut Criterion) {
    let mu = TransferFunction::from_fn(64, |t| (6.0 * t).sin() + t).unwrap();
    let g = GridSpec::new(-2.0, 3.0, 4001).unwrap();
    let rule = MixtureRule::Midpoint { m: 8192, refine: false };
    let mut group = c.benchmark_group("mixture_density");
    for sequential in [true, false] {
        let label = if sequential { "sequential" } else { "parallel" };
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            exec::set_sequential(sequential);
            b.iter(|| mixture_density_with(&mu, 0.05, &g, rule).unwrap());
        });
    }
    group.finish();
    exec::set_sequential(false);
}

fn hellinger_check(c: &mut Criterion) {
    let mut group = c.benchmark_group("hellinger_bound");
    group.sample_size(10);
    for sequential in [true, false] {
        let label = if sequential { "sequential" } else { "parallel" };
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            exec::set_sequential(sequential);
            b.iter(|| harness::check_hellinger_bound(100, 1).unwrap());
        });
    }
    group.finish();
    exec::set_sequential(false);
}

criterion_group!(benches, mixture, hellinger_check);
criterion_main!(benches);
