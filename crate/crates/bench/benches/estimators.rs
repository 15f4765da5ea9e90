use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use subspace_bayes::{
    conditional_bingham_params, gibbs_estimate, imap_estimate, sample_bingham, svd_estimate,
};
use subspace_bayes_bench::reference_dataset;

fn bench_sample_bingham(c: &mut Criterion) {
    let data = reference_dataset(6, 1);
    let params = conditional_bingham_params(&data, 1, &[data.h_true[0].clone()]).unwrap();
    let init = data.h_true[1].clone();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    c.bench_function("sample_bingham_m8_r2", |b| {
        b.iter(|| {
            let draw = sample_bingham(black_box(&params), 2, &init, 1, &mut rng).unwrap();
            black_box(draw)
        })
    });
}

fn bench_estimators(c: &mut Criterion) {
    let data = reference_dataset(6, 3);

    c.bench_function("svd_estimate_t6", |b| {
        b.iter(|| black_box(svd_estimate(black_box(&data.x[0]), 2).unwrap()))
    });

    c.bench_function("imap_estimate_t6", |b| {
        b.iter(|| black_box(imap_estimate(black_box(&data)).unwrap()))
    });

    let mut group = c.benchmark_group("gibbs");
    group.sample_size(10);
    group.bench_function("gibbs_estimate_t6", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        b.iter(|| black_box(gibbs_estimate(black_box(&data), &mut rng).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_sample_bingham, bench_estimators);
criterion_main!(benches);
