use std::sync::Arc;

use aep_bench::{model, LADDER};
use aep_core::farfield::{radiate, ScanPlane};
use aep_core::pipeline::{run_decomposed, run_oracle};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn paths(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for (nx, ny) in LADDER {
        let m = model(nx, ny);
        let id = format!("{nx}x{ny}");
        group.bench_with_input(BenchmarkId::new("decomposed", &id), &m, |b, m| {
            b.iter(|| run_decomposed(m).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("reference", &id), &m, |b, m| {
            b.iter(|| run_oracle(m).unwrap())
        });
    }
    group.finish();
}

fn far_field(c: &mut Criterion) {
    let m = model(7, 5);
    let run = run_decomposed(&m).unwrap();
    let grid = Arc::new(ScanPlane::Horizon.cut(0.5).unwrap());
    c.bench_function("radiate 7x5 port, 361 samples", |b| {
        b.iter(|| radiate(&run.estimates[17], &m.lattice, &m.element, &grid).unwrap())
    });
}

criterion_group!(benches, paths, far_field);
criterion_main!(benches);
