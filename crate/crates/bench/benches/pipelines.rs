use std::hint::black_box;

use ampload::grover::grover_power;
use ampload::heston::{build_heston_A, GridSpec, HestonParams, HestonTables};
use ampload::mitigation::{NoiseModel, NoisySampler};
use ampload::mlae::{mlae_estimate, MlaeSchedule};
use ampload::pipelines::{gate_count_grid, sin2_operator};
use ampload::quadrature::{QuadratureSpec, Rule};
use ampload::statevector::{sample, simulate};
use ampload::transpile::{lower, TopologyKind, TopologySpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_power");
    for n in [2u32, 6, 10] {
        let a = sin2_operator(&QuadratureSpec::new(Rule::Midpoint, n, 0.7).unwrap()).unwrap();
        let power = grover_power(&a, 8, true).unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(n),
            &power.circuit,
            |b, circuit| b.iter(|| simulate(black_box(circuit)).unwrap()),
        );
    }
    group.finish();
}

fn mlae(c: &mut Criterion) {
    let a = sin2_operator(&QuadratureSpec::new(Rule::Midpoint, 1, 0.7).unwrap()).unwrap();
    let schedule = MlaeSchedule::exponential(6, 8192);
    let hits: Vec<f64> = schedule
        .powers
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let s = simulate(&grover_power(&a, k, true).unwrap().circuit).unwrap();
            sample(&s, &a.flags, 8192, i as u64).unwrap().good_hits as f64
        })
        .collect();
    c.bench_function("mlae_estimate_kmax6", |b| {
        b.iter(|| mlae_estimate(black_box(&schedule), black_box(&hits)).unwrap())
    });
}

fn transpile(c: &mut Criterion) {
    c.bench_function("gate_count_grid_3q", |b| {
        b.iter(|| {
            gate_count_grid(
                3,
                TopologyKind::LinearChain,
                true,
                black_box(&[1, 2, 4, 8, 16]),
            )
            .unwrap()
        })
    });
}

fn noisy_sampling(c: &mut Criterion) {
    let a = sin2_operator(&QuadratureSpec::new(Rule::Midpoint, 1, 0.7).unwrap()).unwrap();
    let power = grover_power(&a, 2, true).unwrap();
    let lowered = lower(&power.circuit, &TopologySpec::all_to_all(2)).unwrap();
    let sampler = NoisySampler::new(&lowered.circuit, &NoiseModel::default()).unwrap();
    c.bench_function("noisy_sample_100k", |b| {
        b.iter(|| sampler.sample_counts(100_000, black_box(7)))
    });
}

fn heston(c: &mut Criterion) {
    let params = HestonParams::example();
    let grids = GridSpec::example();
    c.bench_function("heston_tables_and_circuit", |b| {
        b.iter(|| {
            let t = HestonTables::compute(black_box(&params), &grids).unwrap();
            let h = build_heston_A(&params, &grids, &t).unwrap();
            simulate(&h.operator.circuit)
                .unwrap()
                .good_probability(&h.operator.flags)
        })
    });
}

criterion_group!(benches, simulation, mlae, transpile, noisy_sampling, heston);
criterion_main!(benches);
