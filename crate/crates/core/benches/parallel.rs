//! Worker pool against calling thread for the two data-parallel stages:
//! an energy sweep of the two-channel scenario and the free sojourn
//! integrals of the square-well packet.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wgdelay::scattering::compute_sweep;
use wgdelay::scenario::Scenario;
use wgdelay::timedomain::sojourn_free;
use wgdelay::Execution;

const PATHS: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn sweep(c: &mut Criterion) {
    let sc = Scenario::builtin("two_channel").unwrap();
    let basis = sc.basis().unwrap();
    let coupling = sc.coupling(&basis).unwrap();
    let (lo, hi, _) = sc.sweep_range(&basis).unwrap();
    let mut group = c.benchmark_group("smatrix_sweep");
    group.sample_size(10);
    for (name, exec) in PATHS {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| compute_sweep(&coupling, &basis, lo, hi, 64, &sc.solver.options, exec).unwrap())
        });
    }
    group.finish();
}

fn free_sojourn(c: &mut Criterion) {
    let sc = Scenario::builtin("square_well").unwrap();
    let packet = sc.packet().unwrap();
    let radii = sc.radii();
    let mut group = c.benchmark_group("free_sojourn");
    group.sample_size(10);
    for (name, exec) in PATHS {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| sojourn_free(&packet, &radii, &sc.time.options.free, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, free_sojourn);
criterion_main!(benches);
