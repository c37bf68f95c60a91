use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use kforms::data::{gen_paths, gen_surfaces, PathDatasetSpec, SurfaceDatasetSpec};
use kforms::model::{HeadKind, KFormClassifier};
use kforms::quadrature::{integration_matrix, integration_matrix_backward, integration_matrix_cached};
use kforms::{Activation, Mlp, NeuralKForm, QuadraturePlan, SimplexSubdivision, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn subdivision(c: &mut Criterion) {
    let mut g = c.benchmark_group("subdivision");
    for (k, h) in [(1, 64), (2, 16), (3, 8)] {
        g.bench_with_input(BenchmarkId::new(format!("k{k}"), h), &(k, h), |b, &(k, h)| {
            b.iter(|| QuadraturePlan::new(black_box(k), black_box(h)).unwrap())
        });
    }
    g.bench_function("cells k2 h16", |b| b.iter(|| SimplexSubdivision::new(2, black_box(16)).unwrap()));
    g.finish();
}

fn mlp_forward(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mlp = Mlp::new(&[3, 16, 8, 6], Activation::Relu, &mut rng).unwrap();
    let mut g = c.benchmark_group("mlp forward");
    for batch in [1usize, 64, 1024] {
        let x: Vec<f64> = (0..3 * batch).map(|i| (i as f64 * 0.37).sin()).collect();
        g.bench_with_input(BenchmarkId::from_parameter(batch), &batch, |b, &batch| {
            b.iter(|| mlp.forward_batch(black_box(&x), batch).unwrap())
        });
    }
    g.finish();
}

fn integration(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let paths = gen_paths(&PathDatasetSpec { samples_per_class: 1, ..Default::default() }).unwrap();
    let surfaces = gen_surfaces(&SurfaceDatasetSpec { samples_per_class: 1, ..Default::default() }).unwrap();
    let path_form = NeuralKForm::new(2, 1, 3, &[16, 8], Activation::Relu, &mut rng).unwrap();
    let surface_form = NeuralKForm::new(3, 2, 2, &[16, 8], Activation::Relu, &mut rng).unwrap();
    let plan1 = QuadraturePlan::new(1, 5).unwrap();
    let plan2 = QuadraturePlan::new(2, 5).unwrap();
    let (p, s) = (&paths.items[0], &surfaces.items[0]);

    let mut g = c.benchmark_group("integration matrix");
    g.bench_function("path forward", |b| {
        b.iter(|| integration_matrix(&path_form, &p.complex, &p.embedding, &p.chains, &plan1).unwrap())
    });
    g.bench_function("surface forward", |b| {
        b.iter(|| integration_matrix(&surface_form, &s.complex, &s.embedding, &s.chains, &plan2).unwrap())
    });
    g.bench_function("surface backward", |b| {
        b.iter_batched(
            || integration_matrix_cached(&surface_form, &s.complex, &s.embedding, &s.chains, &plan2).unwrap(),
            |(x, cache)| integration_matrix_backward(&surface_form, &cache, &x.mapv(|_| 1.0)).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();

    let cfg = TrainConfig { head: HeadKind::Mlp, ..TrainConfig::for_surfaces() };
    let model = KFormClassifier::from_config(&cfg, 3, 2, &mut rng).unwrap();
    c.bench_function("classifier loss and gradients (surface)", |b| b.iter(|| model.loss_and_grads(s).unwrap()));
}

criterion_group!(benches, subdivision, mlp_forward, integration);
criterion_main!(benches);
