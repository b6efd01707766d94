use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qtopo_bench::{bell_ring, engine, random_settings, w_bell_experiment};
use qtopo_core::simcore::rng::rng_from_seed;
use qtopo_core::simcore::{sample_outcomes, OutcomeDistribution};
use qtopo_core::varopt::parameter_shift_gradient;
use qtopo_core::{
    decode_topology, gradient_descent, infer_pipeline, same_topology, CostKind, CostSpec, OptimizerConfig,
    PipelineConfig, QubitNodeAssignment, ShotConfig, TopologySampler,
};
use std::hint::black_box;

fn measurement(c: &mut Criterion) {
    let mut group = c.benchmark_group("probabilities");
    for n in [2, 4] {
        let exp = bell_ring(n);
        let e = engine(&exp);
        let q = exp.n_qubits();
        let settings = random_settings(q, 1);
        let all: Vec<usize> = (0..q).collect();
        group.bench_with_input(BenchmarkId::new("pair", q), &settings, |b, s| {
            b.iter(|| e.probabilities(black_box(&[0, 3]), s).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("joint", q), &settings, |b, s| {
            b.iter(|| e.probabilities(black_box(&all), s).unwrap())
        });
    }
    group.finish();

    let exact = OutcomeDistribution::analytic(vec![1.0 / 256.0; 256]).unwrap();
    c.bench_function("sample_outcomes/10000", |b| b.iter(|| sample_outcomes(&exact, 10_000, black_box(7))));
}

fn gradients(c: &mut Criterion) {
    let e = engine(&w_bell_experiment());
    let settings = random_settings(5, 2);
    let mut group = c.benchmark_group("parameter_shift");
    for (name, kind) in [
        ("mi_pair", CostKind::MeasuredMIPair(0, 1)),
        ("covariance_norm", CostKind::CovarianceNorm((0..5).collect())),
        ("network_mi", CostKind::ClassicalMINetwork((0..5).collect())),
    ] {
        let spec = CostSpec::new(e.clone(), kind, ShotConfig::Analytic).unwrap();
        group.bench_function(name, |b| b.iter(|| parameter_shift_gradient(&spec, black_box(&settings)).unwrap()));
    }
    group.finish();

    let spec = CostSpec::new(e.clone(), CostKind::MeasuredMIPair(0, 1), ShotConfig::Analytic).unwrap();
    c.bench_function("gradient_descent/mi_pair", |b| {
        b.iter(|| gradient_descent(&spec, black_box(&OptimizerConfig::default())).unwrap())
    });
}

fn pipeline(c: &mut Criterion) {
    let exp = w_bell_experiment();
    let mut group = c.benchmark_group("infer_pipeline");
    group.sample_size(10);
    group.bench_function("w_bell_covariance", |b| {
        b.iter(|| infer_pipeline(&exp, black_box(&PipelineConfig::default())).unwrap())
    });
    let shots = PipelineConfig {
        shots: ShotConfig::Finite { shots: 1000, seed: 3 },
        ..Default::default()
    };
    group.bench_function("w_bell_covariance_1000_shots", |b| {
        b.iter(|| infer_pipeline(&exp, black_box(&shots)).unwrap())
    });
    group.finish();
}

fn topology(c: &mut Criterion) {
    let sampler = TopologySampler {
        max_qubits: 12,
        ..Default::default()
    };
    let mut rng = rng_from_seed(4);
    let pairs: Vec<_> = (0..32).map(|_| (sampler.sample(&mut rng), sampler.sample(&mut rng))).collect();
    c.bench_function("decode_topology/32", |b| {
        b.iter(|| {
            for (t, _) in &pairs {
                decode_topology(&t.expected_binary_matrix(), &QubitNodeAssignment::from_topology(t)).unwrap();
            }
        })
    });
    c.bench_function("same_topology/32", |b| {
        b.iter(|| pairs.iter().filter(|(a, b)| same_topology(a, b)).count())
    });
}

criterion_group!(benches, measurement, gradients, pipeline, topology);
criterion_main!(benches);
