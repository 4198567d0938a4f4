use criterion::{criterion_group, criterion_main, Criterion};
use smartex_core::dataflow::{hardware_preset, preset};
use smartex_core::dse::{optimize, Objective};
use smartex_core::perfmodel::{count_analytical, count_oracle, evaluate};
use smartex_core::workload::workload_preset;
use smartex_core::{LayerSpec, Metric, SearchMode, Style, Workload};

fn bench_counts(c: &mut Criterion) {
    let hw = hardware_preset("65nm").unwrap();
    let alexnet = workload_preset("alexnet").unwrap();
    let conv5 = alexnet.layer("conv5").unwrap();
    let df = preset(Style::RowStationary, conv5, &hw).unwrap();
    c.bench_function("count_analytical/alexnet_conv5_rs", |b| {
        b.iter(|| count_analytical(&df, conv5).unwrap())
    });
    c.bench_function("evaluate/alexnet_all_os", |b| {
        b.iter(|| {
            for layer in &alexnet.layers {
                let df = preset(Style::OutputStationary, layer, &hw).unwrap();
                evaluate(&df, layer, &hw).unwrap();
            }
        })
    });
    let small = LayerSpec::conv("small", 4, 3, 3, 4, 1);
    let df = preset(Style::OutputStationary, &small, &hw).unwrap();
    c.bench_function("count_oracle/small_os", |b| b.iter(|| count_oracle(&df, &small).unwrap()));
}

fn bench_search(c: &mut Criterion) {
    let hw = hardware_preset("65nm").unwrap();
    let w = Workload::new("w", vec![LayerSpec::conv("c", 8, 4, 3, 6, 1)]).unwrap();
    let mut group = c.benchmark_group("optimize");
    group.sample_size(10);
    for (name, mode) in [("exhaustive", SearchMode::Exhaustive), ("pruned", SearchMode::Pruned)] {
        group.bench_function(name, |b| {
            b.iter(|| optimize(&w, &hw, Objective::new(Metric::Energy), mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_counts, bench_search);
criterion_main!(benches);
