use criterion::{criterion_group, criterion_main, Criterion};
use prestige_core::data::{synth_two_gaussians, SyntheticSpec};
use prestige_core::mech::{privatize_gradient, rescale_gradient, sample_hemisphere, scalar_bound, BoundConvention, PrivacySpec};
use prestige_core::model::{LossSpec, RegularizedObjective};
use prestige_core::optim::{train, Method, TrainConfig};
use prestige_core::RngHandle;
use std::hint::black_box;

fn unit_direction(dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|i| 1.0 + i as f64).collect();
    let norm = prestige_core::model::l2_norm(&v);
    v.into_iter().map(|x| x / norm).collect()
}

fn bench_privatize(c: &mut Criterion) {
    let mut group = c.benchmark_group("privatize_gradient");
    for dim in [20usize, 200] {
        let spec = PrivacySpec::new(0.2, 0.8, 1.0, BoundConvention::Unbiased).unwrap();
        let g: Vec<f64> = unit_direction(dim).into_iter().map(|x| 0.7 * x).collect();
        let mut rng = RngHandle::from_seed(1);
        group.bench_function(format!("d{dim}"), |b| {
            b.iter(|| privatize_gradient(black_box(&g), &spec, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn bench_sampling_parts(c: &mut Criterion) {
    let dir = unit_direction(50);
    let mut rng = RngHandle::from_seed(2);
    c.bench_function("sample_hemisphere_d50", |b| {
        b.iter(|| sample_hemisphere(black_box(&dir), &mut rng).unwrap())
    });
    let g: Vec<f64> = dir.iter().map(|x| 0.4 * x).collect();
    c.bench_function("rescale_gradient_d50", |b| {
        b.iter(|| rescale_gradient(black_box(&g), 1.0, &mut rng).unwrap())
    });
    c.bench_function("scalar_bound_d10000", |b| {
        b.iter(|| scalar_bound(1.0, black_box(10_000), 0.8, BoundConvention::Unbiased).unwrap())
    });
}

fn bench_losses(c: &mut Criterion) {
    let specs = [
        LossSpec::hinge(),
        LossSpec::logistic(),
        LossSpec::gompertz(2.0).unwrap(),
        LossSpec::ramp(-1.0).unwrap(),
    ];
    c.bench_function("loss_subgradients_x4", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for spec in &specs {
                acc += spec.subgradient(black_box(0.3)).unwrap();
            }
            acc
        })
    });
}

fn bench_training_epoch(c: &mut Criterion) {
    let data = synth_two_gaussians(&SyntheticSpec::new(1000, 20, 4.0, 0.2, 5).unwrap());
    let objective = RegularizedObjective::new(1.0, LossSpec::hinge(), 1.0).unwrap();
    let privacy = PrivacySpec::new(0.2, 0.8, 1.0, BoundConvention::Unbiased).unwrap();
    let mut group = c.benchmark_group("train_one_epoch_n1000_d20");
    group.sample_size(20);
    for method in [Method::Sgd, Method::Djw, Method::Prestige] {
        let mut cfg = TrainConfig::new(method, objective, privacy);
        cfg.epochs = 1;
        cfg.seed = 9;
        group.bench_function(method.name(), |b| {
            b.iter(|| train(black_box(&data), None, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_privatize,
    bench_sampling_parts,
    bench_losses,
    bench_training_epoch
);
criterion_main!(benches);
