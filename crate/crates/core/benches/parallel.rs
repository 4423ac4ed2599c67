use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sipsense_core::analysis::effectiveness_table_with;
use sipsense_core::sensing::{run_detector_batch, DetectorConfig};
use sipsense_core::simulator::{gen_study, gen_traces, PerKind, StudyProfile, TraceScenario};
use sipsense_core::Execution;

const PATHS: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn effectiveness(c: &mut Criterion) {
    let profile = StudyProfile {
        users: 40,
        event_counts: PerKind { historical: 6000, tier_change: 8000, notification: 16000 },
        ..Default::default()
    };
    let log = gen_study(&profile).unwrap();
    let mut group = c.benchmark_group("effectiveness_table");
    for (name, exec) in PATHS {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| effectiveness_table_with(black_box(&log), exec))
        });
    }
    group.finish();
}

fn detector(c: &mut Criterion) {
    let scenarios: Vec<_> = (0..64).map(|s| TraceScenario::random(s, 1.0)).collect();
    let traces: Vec<_> = gen_traces(&scenarios, Execution::Sequential)
        .into_iter()
        .map(|t| t.unwrap().samples)
        .collect();
    let cfg = DetectorConfig::default();
    let mut group = c.benchmark_group("run_detector_batch");
    for (name, exec) in PATHS {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_detector_batch(black_box(&traces), &cfg, exec))
        });
    }
    group.finish();
}

fn traces(c: &mut Criterion) {
    let scenarios: Vec<_> = (0..64).map(|s| TraceScenario::random(s, 1.0)).collect();
    let mut group = c.benchmark_group("gen_traces");
    for (name, exec) in PATHS {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| gen_traces(black_box(&scenarios), exec))
        });
    }
    group.finish();
}

criterion_group!(benches, effectiveness, detector, traces);
criterion_main!(benches);
