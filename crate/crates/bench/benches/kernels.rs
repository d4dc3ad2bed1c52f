use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use geokan::data::{recipes_for, GenerateOptions};
use geokan::nn::Activation;
use geokan::thermo::{batch_equilibrate, equilibrate};
use geokan::train::{train_step, Adam};
use geokan::{CaseStudy, KanConfig, MlpConfig, Network, NetworkConfig, SplineGrid, Tensor, ThermoData};

fn inputs(rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

fn spline_basis(c: &mut Criterion) {
    let mut group = c.benchmark_group("spline_basis");
    for degree in [3, 7, 10] {
        let grid = SplineGrid::new(degree, 12, 0.0, 1.0).unwrap();
        let mut out = vec![0.0; grid.num_basis()];
        group.bench_function(format!("d{degree}_g12"), |b| {
            b.iter(|| grid.basis_into(black_box(0.4321), &mut out))
        });
    }
    group.finish();
}

fn predict(c: &mut Criterion) {
    let nets = [
        ("kan_4-25x4-15_d10_g12", NetworkConfig::Kan(KanConfig::new(4, vec![25; 4], 15, 10, 12))),
        ("kan_3-24x3-10_d8_g12", NetworkConfig::Kan(KanConfig::new(3, vec![24; 3], 10, 8, 12))),
        ("mlp_3-192x5-18_mish", NetworkConfig::Mlp(MlpConfig::new(3, vec![192; 5], 18, Activation::Mish))),
    ];
    let mut group = c.benchmark_group("predict_1000_rows");
    group.sample_size(20);
    group.throughput(Throughput::Elements(1000));
    for (name, cfg) in nets {
        let net = Network::init(&cfg, 0).unwrap();
        let x = inputs(1000, cfg.input_dim());
        group.bench_function(name, |b| b.iter(|| net.predict(black_box(&x)).unwrap()));
    }
    group.finish();
}

fn training_step(c: &mut Criterion) {
    let cfg = NetworkConfig::Kan(KanConfig::new(3, vec![24; 3], 10, 8, 12));
    let x = inputs(192, 3);
    let y = inputs(192, 10);
    let mut group = c.benchmark_group("train_step_batch_192");
    group.sample_size(20);
    group.bench_function("kan_3-24x3-10_d8_g12", |b| {
        b.iter_batched(
            || (Network::init(&cfg, 0).unwrap(), Adam::new()),
            |(mut net, mut adam)| train_step(&mut net, &mut adam, x.clone(), y.clone(), 1e-3).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let data = ThermoData::default();
    let mut group = c.benchmark_group("equilibrate");
    for case in [CaseStudy::MechMix, CaseStudy::BinarySs, CaseStudy::TernarySs] {
        let recipes = recipes_for(&GenerateOptions::new(case, 10), 0, 256).unwrap();
        let model = case.model().unwrap();
        group.throughput(Throughput::Elements(recipes.len() as u64));
        group.bench_function(case.name(), |b| {
            b.iter(|| {
                for r in &recipes {
                    black_box(equilibrate(r, &model, &data).unwrap());
                }
            })
        });
    }
    let recipes = recipes_for(&GenerateOptions::new(CaseStudy::TernarySs, 13), 0, 5000).unwrap();
    let model = CaseStudy::TernarySs.model().unwrap();
    group.sample_size(10);
    group.throughput(Throughput::Elements(5000));
    group.bench_function("batch_ternary_5000", |b| {
        b.iter(|| batch_equilibrate(black_box(&recipes), &model, &data, 1))
    });
    group.finish();
}

criterion_group!(benches, spline_basis, predict, training_step, oracle);
criterion_main!(benches);
