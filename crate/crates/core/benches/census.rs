use conic_brauer::census::{count, redei_count, CensusRequest};
use conic_brauer::exec::{default_threads, Exec};
use conic_brauer::family::{builtin, Mode};
use conic_brauer::localdens::{leading_constant, EulerOptions};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn policies() -> Vec<(&'static str, Exec)> {
    let threads = default_threads().max(2);
    vec![("sequential", Exec::Sequential), ("parallel", Exec::from_threads(threads))]
}

fn planar_census(c: &mut Criterion) {
    let mut group = c.benchmark_group("planar-census");
    group.sample_size(10);
    for (label, exec) in policies() {
        for t in [40u64, 80] {
            let mut req = CensusRequest::new(builtin("planar").unwrap(), t);
            req.primes_bound = None;
            req.exec = exec;
            group.bench_with_input(BenchmarkId::new(label, t), &req, |b, req| {
                b.iter(|| black_box(count(req).unwrap().total))
            });
        }
    }
    group.finish();
}

fn redei_census(c: &mut Criterion) {
    let mut group = c.benchmark_group("redei-census");
    group.sample_size(10);
    for (label, exec) in policies() {
        group.bench_with_input(BenchmarkId::new(label, 60), &exec, |b, &exec| {
            b.iter(|| black_box(redei_count(60, exec, None).unwrap().total))
        });
    }
    group.finish();
}

fn constant(c: &mut Criterion) {
    let mut group = c.benchmark_group("leading-constant");
    group.sample_size(10);
    let fam = builtin("example31").unwrap();
    for (label, exec) in policies() {
        let opts = EulerOptions { primes_bound: 5_000, exec, ..Default::default() };
        group.bench_with_input(BenchmarkId::new(label, "example31"), &opts, |b, opts| {
            b.iter(|| black_box(leading_constant(&fam, Mode::Affine, opts).unwrap().constant))
        });
    }
    group.finish();
}

criterion_group!(benches, planar_census, redei_census, constant);
criterion_main!(benches);
