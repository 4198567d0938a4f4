use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smartex_core::sxform::{compress_layer, decompose, weight_dims, BitWidths};
use smartex_core::{LayerSpec, Matrix, SeParams, WeightTensor};

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn bench_decompose(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = SeParams::default();
    let mut group = c.benchmark_group("decompose");
    for rows in [16, 64, 256] {
        let w = random(&mut rng, rows, 3);
        group.bench_with_input(BenchmarkId::from_parameter(rows), &w, |b, w| {
            b.iter(|| decompose(w, &params).unwrap())
        });
    }
    group.finish();
}

fn bench_compress_layer(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let layer = LayerSpec::conv("conv", 32, 16, 3, 8, 1);
    let dims = weight_dims(&layer);
    let n: usize = dims.iter().product();
    let t = WeightTensor::new(dims, (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap();
    let params = SeParams::default();
    c.bench_function("compress_layer/conv32x16x3x3", |b| {
        b.iter(|| compress_layer(&t, &layer, &params, BitWidths::default(), &[]).unwrap())
    });
}

criterion_group!(benches, bench_decompose, bench_compress_layer);
criterion_main!(benches);
