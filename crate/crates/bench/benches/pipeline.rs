use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use emgcode::dsp::extract_series;
use emgcode::eval::{fused_det, SweepGrid};
use emgcode::matcher::{enroll_series, score_attempt};
use emgcode::{ChannelSelection, CodeWeights, FdtConfig, RecordKey, WindowSpec};
use emgcode_bench::{pools, record, trials};

fn features(c: &mut Criterion) {
    let rec = record(RecordKey::new(1, 1, 1, 1));
    let (spec, cfg) = (WindowSpec::default(), FdtConfig::default());
    for sel in [ChannelSelection::forearm(), ChannelSelection::wrist()] {
        c.bench_function(&format!("extract_series/{}", sel.name), |b| {
            b.iter(|| extract_series(black_box(&rec), &sel, &spec, &cfg).unwrap())
        });
    }
}

fn scoring(c: &mut Criterion) {
    let series = trials(1, 1, 1);
    let (enrolled, probe) = series.split_at(6);
    let enrolled: Vec<_> = enrolled.iter().collect();
    c.bench_function("enroll/6 trials", |b| {
        b.iter(|| enroll_series(black_box(&enrolled), 1, 1, 0.01).unwrap())
    });
    let t = enroll_series(&enrolled, 1, 1, 0.01).unwrap();
    c.bench_function("score_attempt", |b| {
        b.iter(|| score_attempt(black_box(&probe[0]), &t).unwrap())
    });
}

fn fusion(c: &mut Criterion) {
    let grid = SweepGrid::new(512);
    for m in [1, 3, 6] {
        let p = pools(m, 200, 2000);
        let w = CodeWeights::uniform(m);
        c.bench_function(&format!("fused_det/M={m}"), |b| {
            b.iter(|| fused_det(black_box(&p), &w, &grid).unwrap())
        });
    }
}

criterion_group! {
    name = pipeline;
    config = Criterion::default().sample_size(20);
    targets = features, scoring, fusion
}
criterion_main!(pipeline);
