use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use lfci_core::citest::{sample_covariance, CiTester};
use lfci_core::discovery::{
    fci, lfci, lfci_mb, skeleton_search, Eta, FciOptions, PoolStrategy, SearchMode, SkeletonOptions,
};
use lfci_core::separation::{m_separated, moral_graph};
use lfci_core::simbench::{make_instance, ExperimentConfig, Family, Instance};

fn instance(family: Family, p: usize, n: usize) -> Instance {
    let cfg = ExperimentConfig { family, p, n, replicates: 1, seed: 42, ..Default::default() };
    make_instance(&cfg, 0).expect("instance")
}

fn oracle_pipelines(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    for p in [20, 50] {
        let inst = instance(Family::PL, p, 0);
        let q = inst.mag.n_nodes();
        group.bench_with_input(BenchmarkId::new("lfci", p), &inst, |b, inst| {
            b.iter(|| lfci(&CiTester::local_oracle(inst.mag.clone(), 6), q, 3, 6).unwrap())
        });
        let moral = moral_graph(&inst.mag, Some(6));
        group.bench_with_input(BenchmarkId::new("lfci_mb", p), &inst, |b, inst| {
            b.iter(|| lfci_mb(&CiTester::local_oracle(inst.mag.clone(), 6), q, 3, 6, &moral).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fci", p), &inst, |b, inst| {
            let opts = FciOptions { allow_large: true, max_pdsep_size: None };
            b.iter(|| fci(&CiTester::graph_oracle(inst.mag.clone()), q, opts).unwrap())
        });
    }
    group.finish();
}

fn sample_skeleton(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_skeleton");
    group.sample_size(10);
    let inst = instance(Family::ER, 100, 1000);
    let est = sample_covariance(&inst.data).unwrap();
    let q = inst.mag.n_nodes();
    for (name, mode) in [("sequential", SearchMode::Sequential), ("batch", SearchMode::Batch)] {
        group.bench_function(name, |b| {
            let mut opts = SkeletonOptions::new(PoolStrategy::Gamma(5), Eta::Bounded(2));
            opts.mode = mode;
            b.iter(|| skeleton_search(&CiTester::sample_test(est.clone(), 1e-3), q, &opts).unwrap())
        });
    }
    group.finish();
}

fn separation(c: &mut Criterion) {
    let inst = instance(Family::ER, 200, 0);
    let q = inst.mag.n_nodes();
    let s: Vec<usize> = (2..q).step_by(7).collect();
    c.bench_function("m_separated/p200", |b| {
        b.iter(|| m_separated(&inst.mag, black_box(0), black_box(1), &s).unwrap())
    });
}

criterion_group!(benches, oracle_pipelines, sample_skeleton, separation);
criterion_main!(benches);
