use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use d2dsim_core::caching::{optimize_policy, CachePlacer};
use d2dsim_core::geometry::{build_grid, grid_from_target_side, pair_within_clusters, CachePlacement, Subspace};
use d2dsim_core::harness::validate::ReferenceNetwork;
use d2dsim_core::schemes::{run_scenario1, FrequencyPlan};
use d2dsim_core::{NetworkRealization, PhyConfig, PopularityModel};

fn water_filling(c: &mut Criterion) {
    let model = PopularityModel::new(10_000, 0.8, 20.0).unwrap();
    c.bench_function("optimize_policy m=1e4", |b| {
        b.iter(|| optimize_policy(black_box(&model), 4, black_box(500.0)).unwrap())
    });
}

fn pairing(c: &mut Criterion) {
    let model = PopularityModel::new(400, 0.6, 20.0).unwrap();
    let policy = optimize_policy(&model, 2, 100.0).unwrap();
    let placer = CachePlacer::new(&policy);
    let real = NetworkRealization::generate(20_000, &model, CachePlacement::Single(&placer), 7).unwrap();
    let k = grid_from_target_side(0.07).unwrap().k;
    c.bench_function("grid + pairing n=2e4", |b| {
        b.iter(|| {
            let grid = build_grid(k, &real.positions).unwrap();
            pair_within_clusters(black_box(&real), &grid, Subspace::Whole)
        })
    });
}

fn scenario1_trial(c: &mut Criterion) {
    let net = ReferenceNetwork::new(FrequencyPlan::Reuse).unwrap();
    let phy = PhyConfig::default();
    let mut group = c.benchmark_group("scenario1");
    group.sample_size(10);
    group.bench_function("reference trial", |b| {
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            let real = net.realization(seed).unwrap();
            run_scenario1(&real, &net.model, &net.scheme, &phy).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, water_filling, pairing, scenario1_trial);
criterion_main!(benches);
