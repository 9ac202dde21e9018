use std::hint::black_box;

use airvote::analysis::mc_error_prob;
use airvote::channel::ChannelConfig;
use airvote::harness::{Experiment, ExperimentConfig, Scheme};
use airvote::learner::{
    compute_local_gradient, make_synthetic_dataset, Architecture, DatasetShard, ModelKind,
};
use airvote::{AirInterface, SignReport};
use criterion::{criterion_group, criterion_main, Criterion};

fn gradients(c: &mut Criterion) {
    let data = make_synthetic_dataset(10_000, 16, 10, 1).unwrap();
    let shard = DatasetShard {
        owner: 0,
        sample_indices: (0..data.len()).collect(),
    };
    for kind in [ModelKind::Logistic, ModelKind::Mlp] {
        let arch = Architecture::for_dataset(kind, &data);
        let model = arch.init(1);
        c.bench_function(&format!("local_gradient_{kind:?}_b128"), |b| {
            b.iter(|| compute_local_gradient(&arch, &model, &data, &shard, 128, black_box(7)).unwrap())
        });
    }
}

fn uplink(c: &mut Criterion) {
    let q = 170;
    let channel = ChannelConfig {
        noise_var: 1.0,
        sync_error_max: 0.25,
        ..ChannelConfig::default()
    };
    let air = AirInterface::new(q, 64, 2, channel).unwrap();
    let reports: Vec<SignReport> = (0..31)
        .map(|m| SignReport::new((0..q).map(|i| if (i * 7 + m) % 3 == 0 { -1 } else { 1 }).collect()).unwrap())
        .collect();
    let powers = vec![1.0; 31];
    c.bench_function("transmit_31x170", |b| {
        b.iter(|| air.transmit(&reports, &powers, black_box(3)).unwrap())
    });
}

fn monte_carlo(c: &mut Criterion) {
    c.bench_function("mc_error_prob_k31_10k", |b| {
        b.iter(|| mc_error_prob(31, 0.2, 2.0, 10_000, black_box(1)).unwrap())
    });
}

fn round(c: &mut Criterion) {
    let cfg = ExperimentConfig::desk_default(Scheme::FskMvDpc, 1, "unused.jsonl");
    let exp = Experiment::new(cfg).unwrap();
    let state = exp.initial_state();
    c.bench_function("desk_round_fsk_mv_dpc", |b| {
        b.iter(|| exp.run_round(&state, black_box(0)).unwrap())
    });
}

criterion_group!(benches, gradients, uplink, monte_carlo, round);
criterion_main!(benches);
