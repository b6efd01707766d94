//! Acceptance checks. Prints one line per criterion and exits non-zero if
//! any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use qtopo_core::infer::{
    compare_node_matrices, decode_topology, infer_pipeline, measure_correlations, InferenceMethod,
    NetworkExperiment, PipelineConfig, QubitNodeAssignment,
};
use qtopo_core::netmodel::{same_topology, NetworkTopology, TopologySampler};
use qtopo_core::quantify::{
    assemble_qubit_matrix, entropy_bits, mutual_information, pair_covariance, pair_mutual_information, theory,
    CorrelationMatrix, MatrixKind, SettingsLayout, Threshold,
};
use qtopo_core::simcore::rng::{derive_seed, rng_from_seed};
use qtopo_core::simcore::{
    angles_for_axis, apply_link_channels, prepare_network_state, DensityMatrix, KrausChannel, MeasurementEngine,
    MeasurementSettings, OutcomeDistribution, ShotConfig, StatePrep, C64, SIGMA_X,
};
use qtopo_core::varopt::{
    evaluate_cost, gradient_descent, parameter_shift_gradient, CostKind, CostSpec, DescentReport, OptimizerConfig,
};

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn gamma_grid() -> Vec<f64> {
    (0..10).map(|k| k as f64 / 10.0).collect()
}

fn bell() -> DensityMatrix {
    StatePrep::bell().density_matrix().unwrap()
}

fn noisy_bell(channel: impl Fn(f64) -> KrausChannel, gamma: f64) -> DensityMatrix {
    apply_link_channels(&bell(), &[channel(gamma), channel(gamma)]).unwrap()
}

fn depolarizing(g: f64) -> KrausChannel {
    KrausChannel::depolarizing(g).unwrap()
}

fn damping(g: f64) -> KrausChannel {
    KrausChannel::amplitude_damping(g).unwrap()
}

fn engine(rho: DensityMatrix) -> Arc<MeasurementEngine> {
    Arc::new(MeasurementEngine::new(rho))
}

fn descend(engine: &Arc<MeasurementEngine>, kind: CostKind, config: &OptimizerConfig) -> DescentReport {
    let spec = CostSpec::new(engine.clone(), kind, ShotConfig::Analytic).unwrap();
    gradient_descent(&spec, config).unwrap()
}

fn pair_cov(engine: &MeasurementEngine, i: usize, j: usize, settings: &MeasurementSettings) -> f64 {
    pair_covariance(&engine.probabilities(&[i, j], settings).unwrap()).abs()
}

fn paper_config(seed: u64) -> OptimizerConfig {
    OptimizerConfig { step_size: 0.05, steps: 30, restarts: 10, seed, ..Default::default() }
}

/// Optimized covariance and MI of noisy Bell pairs against closed forms.
fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut where_ = String::new();
    for (label, channel, cov_theory, mi_theory) in [
        ("depolarizing", depolarizing as fn(f64) -> KrausChannel, theory::depolarized_bell_cov as fn(f64) -> f64, theory::depolarized_bell_mi as fn(f64) -> f64),
        ("damping", damping, theory::amplitude_damped_bell_cov, theory::amplitude_damped_bell_mi),
    ] {
        for (k, &g) in gamma_grid().iter().enumerate() {
            let e = engine(noisy_bell(channel, g));
            let seed = derive_seed(SEED, &[1, k as u64]);
            let cov_run = descend(&e, CostKind::CovarianceNorm(vec![0, 1]), &paper_config(seed));
            let cov = pair_cov(&e, 0, 1, &cov_run.best().final_settings);
            let mi_run = descend(&e, CostKind::MeasuredMIPair(0, 1), &paper_config(seed ^ 1));
            let mi = -mi_run.best().final_cost;
            for (name, got, want) in [("cov", cov, cov_theory(g)), ("mi", mi, mi_theory(g))] {
                let d = (got - want).abs();
                if d > worst {
                    worst = d;
                    where_ = format!("{label} {name} at gamma={g}: {got:.6} vs {want:.6}");
                }
            }
        }
    }
    outcome(worst <= 5e-3, format!("max deviation {worst:.2e} ({where_})"))
}

fn triangle_networks() -> (NetworkTopology, NetworkTopology) {
    let bell3 = NetworkTopology::new(
        6,
        vec![vec![0, 1], vec![2, 3], vec![4, 5]],
        vec![vec![0, 5], vec![1, 2], vec![3, 4]],
    )
    .unwrap();
    let ghz2 = NetworkTopology::new(6, vec![vec![0, 2, 4], vec![1, 3, 5]], vec![vec![0, 1], vec![2, 3], vec![4, 5]])
        .unwrap();
    (bell3, ghz2)
}

fn source_depolarized(t: &NetworkTopology, preps: &[StatePrep], g: f64) -> MeasurementEngine {
    let mut rho = prepare_network_state(t, preps).unwrap();
    for s in t.sources() {
        rho = KrausChannel::depolarizing_multi(s.len(), g).unwrap().apply(&rho, s).unwrap();
    }
    MeasurementEngine::new(rho)
}

fn node_pair_mi(engine: &MeasurementEngine, t: &NetworkTopology, a: usize, b: usize) -> f64 {
    let qubits: Vec<usize> = t.nodes()[a].iter().chain(&t.nodes()[b]).copied().collect();
    let settings = MeasurementSettings::computational(engine.n_qubits());
    let dist = OutcomeDistribution::analytic(engine.probabilities(&qubits, &settings).unwrap()).unwrap();
    let na = t.nodes()[a].len();
    let first: Vec<usize> = (0..na).collect();
    let second: Vec<usize> = (na..qubits.len()).collect();
    mutual_information(&dist, &first, &second).unwrap()
}

/// Closed forms at the known optimal bases.
fn criterion_2() -> Outcome {
    let (net1, net2) = triangle_networks();
    let mut worst: f64 = 0.0;
    let mut where_ = String::new();
    let mut check = |label: String, got: f64, want: f64| {
        let d = (got - want).abs();
        if d > worst || d.is_nan() {
            worst = if d.is_nan() { f64::INFINITY } else { d };
            where_ = format!("{label}: {got:.12} vs {want:.12}");
        }
    };
    for &g in &gamma_grid() {
        let z = MeasurementSettings::computational(2);
        let x = MeasurementSettings::uniform(2, SIGMA_X);
        let dep = MeasurementEngine::new(noisy_bell(depolarizing, g));
        let p = dep.probabilities(&[0, 1], &z).unwrap();
        check(format!("depolarized mi {g}"), pair_mutual_information(&p), theory::depolarized_bell_mi(g));
        check(format!("depolarized cov {g}"), pair_covariance(&p), theory::depolarized_bell_cov(g));
        let ad = MeasurementEngine::new(noisy_bell(damping, g));
        let p = ad.probabilities(&[0, 1], &x).unwrap();
        check(format!("damped mi {g}"), pair_mutual_information(&p), theory::amplitude_damped_bell_mi(g));
        check(format!("damped cov {g}"), pair_covariance(&p), theory::amplitude_damped_bell_cov(g));
        let e1 = source_depolarized(&net1, &[StatePrep::bell(), StatePrep::bell(), StatePrep::bell()], g);
        let e2 = source_depolarized(&net2, &[StatePrep::ghz(3), StatePrep::ghz(3)], g);
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let m1 = node_pair_mi(&e1, &net1, a, b);
            let m2 = node_pair_mi(&e2, &net2, a, b);
            check(format!("network 1 nodes {a}{b} at {g}"), m1, theory::triangle_bell_mi(g));
            check(format!("network 2 nodes {a}{b} at {g}"), m2, theory::triangle_ghz_mi(g));
            check(format!("ratio nodes {a}{b} at {g}"), m2, 2.0 * m1);
        }
    }
    outcome(worst <= 1e-9, format!("max deviation {worst:.2e} ({where_})"))
}

fn w_bell_topology() -> NetworkTopology {
    NetworkTopology::new(5, vec![vec![0, 1, 2], vec![3, 4]], (0..5).map(|q| vec![q]).collect()).unwrap()
}

/// W⊗Φ ideal covariance matrix, W entropies and W pair information.
fn criterion_3() -> Outcome {
    let rho = prepare_network_state(&w_bell_topology(), &[StatePrep::w(3), StatePrep::bell()]).unwrap();
    let e = engine(rho);
    let t = 2.0 / 3.0;
    let ideal = CorrelationMatrix::from_rows(
        MatrixKind::Covariance,
        vec![
            vec![1.0, t, t, 0.0, 0.0],
            vec![t, 1.0, t, 0.0, 0.0],
            vec![t, t, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 1.0],
            vec![0.0, 0.0, 0.0, 1.0, 1.0],
        ],
    )
    .unwrap();
    let c = assemble_qubit_matrix(
        &e,
        &SettingsLayout::Shared(MeasurementSettings::uniform(5, SIGMA_X)),
        MatrixKind::Covariance,
        ShotConfig::Analytic,
    )
    .unwrap();
    let cov_dev = c.as_flat().iter().zip(ideal.as_flat()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let entropy_config = |q: u64| OptimizerConfig {
        step_size: 0.1,
        steps: 300,
        restarts: 10,
        seed: derive_seed(SEED, &[3, 0, q]),
        ..Default::default()
    };
    let s_w = theory::w_marginal_entropy(3);
    let ent_dev = (0..3)
        .map(|q| (descend(&e, CostKind::VnEntropy(q), &entropy_config(q as u64)).best().final_cost - s_w).abs())
        .fold(0.0, f64::max);
    let i_w = theory::w_pair_equatorial_mi(3);
    let mi_dev = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| {
            let config = OptimizerConfig { steps: 200, seed: derive_seed(SEED, &[3, 1, i, j]), ..Default::default() };
            (-descend(&e, CostKind::MeasuredMIPair(i as usize, j as usize), &config).best().final_cost - i_w).abs()
        })
        .fold(0.0, f64::max);
    outcome(
        cov_dev <= 1e-12 && ent_dev <= 1e-4 && mi_dev <= 1e-3,
        format!("covariance {cov_dev:.1e}, entropy {ent_dev:.1e} (S_W = {s_w:.6}), pair MI {mi_dev:.1e} (I_W = {i_w:.6})"),
    )
}

fn random_preps(t: &NetworkTopology, rng: &mut impl Rng) -> Vec<StatePrep> {
    t.sources()
        .iter()
        .map(|s| {
            let base = if rng.random_bool(0.5) { StatePrep::ghz(s.len()) } else { StatePrep::w(s.len()) };
            let rotations = (0..s.len())
                .map(|_| [0, 1, 2].map(|_| rng.random_range(0.0..std::f64::consts::TAU)))
                .collect();
            base.with_rotations(rotations)
        })
        .collect()
}

/// Covariance pipeline on random topologies with hidden local frames.
fn criterion_4() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (label, gamma) in [("noiseless", 0.0), ("depolarizing 0.3", 0.3)] {
        let hits: usize = (0..50u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = rng_from_seed(derive_seed(SEED, &[4, k]));
                let t = TopologySampler::default().sample(&mut rng);
                let preps = random_preps(&t, &mut rng);
                let channels: Vec<KrausChannel> = if gamma > 0.0 {
                    (0..t.n_qubits()).map(|_| depolarizing(gamma)).collect()
                } else {
                    Vec::new()
                };
                let exp = NetworkExperiment::from_topology(&t, &preps, &channels).unwrap();
                let config = PipelineConfig {
                    optimizer: OptimizerConfig { seed: derive_seed(SEED, &[4, k, 1]), ..Default::default() },
                    ..Default::default()
                };
                match infer_pipeline(&exp, &config) {
                    Ok((r, _)) => usize::from(same_topology(&r.topology, &t)),
                    Err(_) => 0,
                }
            })
            .sum();
        pass &= hits == 50;
        lines.push(format!("{label} {hits}/50"));
    }
    outcome(pass, lines.join(", "))
}

fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut labels: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..n {
        labels = labels
            .into_iter()
            .flat_map(|p| {
                let blocks = p.iter().copied().max().map_or(0, |m| m + 1);
                (0..=blocks).map(move |b| {
                    let mut e = p.clone();
                    e.push(b);
                    e
                })
            })
            .collect();
    }
    labels
        .into_iter()
        .map(|l| {
            let k = l.iter().copied().max().map_or(0, |m| m + 1);
            (0..k).map(|b| (0..n).filter(|&q| l[q] == b).collect()).collect()
        })
        .collect()
}

/// Decoder against every qubit-level topology with at most six qubits.
fn criterion_5() -> Outcome {
    let mut total = 0usize;
    let mut failures = 0usize;
    for n in 1..=6 {
        let parts = set_partitions(n);
        let (t, f) = parts
            .par_iter()
            .map(|s| {
                let mut fails = 0;
                for m in &parts {
                    let topo = NetworkTopology::new(n, s.clone(), m.clone()).unwrap();
                    let ok = decode_topology(&topo.expected_binary_matrix(), &QubitNodeAssignment::from_topology(&topo))
                        .map(|r| same_topology(&r.topology, &topo))
                        .unwrap_or(false);
                    fails += usize::from(!ok);
                }
                (parts.len(), fails)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        total += t;
        failures += f;
    }
    outcome(failures == 0, format!("{} of {total} topologies decoded to an isomorphic network", total - failures))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    permutations(n - 1)
        .into_iter()
        .flat_map(|p| {
            (0..=p.len()).map(move |k| {
                let mut q = p.clone();
                q.insert(k, n - 1);
                q
            })
        })
        .collect()
}

fn brute_force_isomorphic(a: &NetworkTopology, b: &NetworkTopology) -> bool {
    if a.n_sources() != b.n_sources() || a.n_nodes() != b.n_nodes() || a.n_qubits() != b.n_qubits() {
        return false;
    }
    let (wa, wb) = (a.link_weights(), b.link_weights());
    let np = permutations(a.n_nodes());
    permutations(a.n_sources()).iter().any(|s| {
        np.iter()
            .any(|n| (0..s.len()).all(|i| (0..n.len()).all(|j| wa[i][j] == wb[s[i]][n[j]])))
    })
}

/// Node-matrix equality against bijection enumeration.
fn criterion_6() -> Outcome {
    let sampler = TopologySampler {
        min_qubits: 2,
        max_qubits: 12,
        min_source_size: 2,
        max_sources: 4,
        max_nodes: 4,
        one_qubit_per_node: true,
    };
    let mut agree = 0;
    let mut positives = 0;
    for k in 0..100u64 {
        let mut rng = rng_from_seed(derive_seed(SEED, &[6, k]));
        let a = sampler.sample(&mut rng);
        let b = if k % 2 == 0 {
            let mut sp: Vec<usize> = (0..a.n_sources()).collect();
            let mut np: Vec<usize> = (0..a.n_nodes()).collect();
            sp.shuffle(&mut rng);
            np.shuffle(&mut rng);
            a.relabeled(&sp, &np).unwrap()
        } else {
            sampler.sample(&mut rng)
        };
        let (ma, mb) = (a.expected_characteristic_matrix().unwrap(), b.expected_characteristic_matrix().unwrap());
        let by_matrix = ma.size() == mb.size() && compare_node_matrices(&ma, &mb, 1e-9).unwrap();
        let truth = brute_force_isomorphic(&a, &b);
        positives += usize::from(truth);
        agree += usize::from(by_matrix == truth);
    }
    outcome(agree == 100, format!("{agree}/100 agree ({positives} isomorphic pairs)"))
}

fn random_state(n: usize, seed: u64) -> DensityMatrix {
    let mut rng = rng_from_seed(seed);
    let d = 1 << n;
    let g = DMatrix::<C64>::from_fn(d, d, |_, _| {
        C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    });
    let m = &g * g.adjoint();
    let tr = m.trace();
    DensityMatrix::new(m / tr).unwrap()
}

/// Parameter-shift against central differences.
fn criterion_7() -> Outcome {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let seed = derive_seed(SEED, &[7, k]);
        let n = 2 + (k % 2) as usize;
        let e = engine(random_state(n, seed));
        let all: Vec<usize> = (0..n).collect();
        let kind = match k % 5 {
            0 => CostKind::VnEntropy(n - 1),
            1 => CostKind::MeasuredMIPair(0, n - 1),
            2 => CostKind::MeasuredMIPairs(vec![(0, 1), (1, n - 1)]),
            3 => CostKind::ClassicalMINetwork(all),
            _ => CostKind::CovarianceNorm(all),
        };
        let kind = match kind {
            CostKind::MeasuredMIPairs(p) if n == 2 => CostKind::MeasuredMIPairs(vec![p[0]]),
            other => other,
        };
        let spec = CostSpec::new(e, kind, ShotConfig::Analytic).unwrap();
        let settings = MeasurementSettings::random(n, &mut rng_from_seed(seed ^ 0xabc));
        let grad = parameter_shift_gradient(&spec, &settings).unwrap();
        let flat = settings.to_flat();
        for (p, g) in grad.iter().enumerate() {
            let shifted = |d: f64| {
                let mut v = flat.clone();
                v[p] += d;
                evaluate_cost(&spec, &MeasurementSettings::from_flat(&v).unwrap()).unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            worst = worst.max((fd - g).abs());
        }
    }
    outcome(worst <= 1e-5, format!("max component deviation {worst:.2e} over 100 instances"))
}

/// Joint Shannon entropy lower bounds for the shared random bit and Φ.
fn criterion_8() -> Outcome {
    let z = C64::new(0.0, 0.0);
    let half = C64::new(0.5, 0.0);
    let sigma2 = DensityMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![half, z, z, half])))
        .unwrap();
    let mut lowest = f64::INFINITY;
    let mut at_z: f64 = 0.0;
    for rho in [sigma2, bell()] {
        let e = MeasurementEngine::new(rho);
        let mut rng = rng_from_seed(derive_seed(SEED, &[8]));
        for _ in 0..1000 {
            let s = MeasurementSettings::random(2, &mut rng);
            lowest = lowest.min(entropy_bits(&e.probabilities(&[0, 1], &s).unwrap()));
        }
        let h = entropy_bits(&e.probabilities(&[0, 1], &MeasurementSettings::computational(2)).unwrap());
        at_z = at_z.max((h - 1.0).abs());
    }
    outcome(
        lowest >= 1.0 - 1e-9 && at_z <= 1e-12,
        format!("min over 2000 settings {lowest:.12}, computational basis |H - 1| = {at_z:.1e}"),
    )
}

/// Low-shot behaviour on uncorrelated pairs and error trend with shots.
fn criterion_9() -> Outcome {
    let e = engine(DensityMatrix::zero_state(2));
    let tau = Threshold::DEFAULT.value();
    let trials: Vec<(f64, f64)> = (0..10u64)
        .into_par_iter()
        .map(|k| {
            let shots = ShotConfig::Finite { shots: 100, seed: derive_seed(SEED, &[9, k, 0]) };
            let config = paper_config(derive_seed(SEED, &[9, k, 1]));
            let mi_spec = CostSpec::new(e.clone(), CostKind::MeasuredMIPair(0, 1), shots).unwrap();
            let mi = -gradient_descent(&mi_spec, &config).unwrap().best().final_cost;
            let cov_spec = CostSpec::new(e.clone(), CostKind::CovarianceNorm(vec![0, 1]), shots).unwrap();
            let report = gradient_descent(&cov_spec, &config).unwrap();
            let best = report.best();
            // re-evaluate the final step on the stream the optimizer used
            let step_seed = derive_seed(config.seed, &[1, best.restart as u64, config.steps as u64]);
            let terms = cov_spec
                .clone()
                .with_shots(shots.reseeded(step_seed))
                .evaluate_terms(&best.final_settings)
                .unwrap();
            let cov = (-terms[2] / 2.0).sqrt();
            (mi, cov)
        })
        .collect();
    let mi_below = trials.iter().filter(|t| t.0 < tau).count();
    let cov_above = trials.iter().filter(|t| t.1 > tau).count();
    let mean_error = |shots: u64| -> f64 {
        let total: f64 = (0..10u64)
            .into_par_iter()
            .map(|k| {
                let exp = NetworkExperiment::from_topology(&w_bell_topology(), &[StatePrep::w(3), StatePrep::bell()], &[])
                    .unwrap();
                let config = PipelineConfig {
                    method: InferenceMethod::Covariance,
                    shots: ShotConfig::Finite { shots, seed: derive_seed(SEED, &[9, 1, k, 0]) },
                    optimizer: paper_config(derive_seed(SEED, &[9, 1, k, 1])),
                    ..Default::default()
                };
                let run = measure_correlations(&exp, &config).unwrap();
                *run.inference_errors.unwrap().last().unwrap()
            })
            .sum();
        total / 10.0
    };
    let (low, high) = (mean_error(100), mean_error(10_000));
    outcome(
        mi_below >= 8 && cov_above >= 5 && high < low,
        format!(
            "MI below tau {mi_below}/10, covariance above tau {cov_above}/10, mean final error {low:.4} at 1e2 shots vs {high:.4} at 1e4"
        ),
    )
}

fn remark_state() -> DensityMatrix {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let id = DMatrix::<C64>::identity(2, 2);
    let x = DMatrix::from_row_slice(2, 2, &[z, one, one, z]);
    let y = DMatrix::from_row_slice(2, 2, &[z, -i, i, z]);
    let zz = DMatrix::from_row_slice(2, 2, &[one, z, z, -one]);
    let k3 = |a: &DMatrix<C64>, b: &DMatrix<C64>, c: &DMatrix<C64>| a.kronecker(b).kronecker(c);
    let m = k3(&id, &id, &id) + (k3(&x, &x, &id) + k3(&y, &id, &y) + k3(&id, &zz, &zz)) * C64::new(0.5, 0.0);
    DensityMatrix::new(m * C64::new(0.125, 0.0)).unwrap()
}

/// `K[a][b]`: covariance along basis axes `e_a` on `i`, `e_b` on `j`.
fn kernel(e: &MeasurementEngine, i: usize, j: usize) -> [[f64; 3]; 3] {
    let axis = |a: usize| {
        let mut v = [0.0; 3];
        v[a] = 1.0;
        angles_for_axis(v)
    };
    let mut k = [[0.0; 3]; 3];
    for (a, row) in k.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            let mut s = MeasurementSettings::computational(e.n_qubits());
            s.set(i, axis(a));
            s.set(j, axis(b));
            *v = pair_covariance(&e.probabilities(&[i, j], &s).unwrap());
        }
    }
    k
}

fn sphere_grid(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Per-pair covariance reaches 1/2 everywhere; no shared basis does.
fn criterion_10() -> Outcome {
    let e = engine(remark_state());
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let per_pair = pairs
        .iter()
        .map(|&(i, j)| {
            let config = OptimizerConfig { steps: 200, seed: derive_seed(SEED, &[10, i as u64, j as u64]), ..Default::default() };
            let r = descend(&e, CostKind::CovarianceNorm(vec![i, j]), &config);
            pair_cov(&e, i, j, &r.best().final_settings)
        })
        .fold(f64::INFINITY, f64::min);
    let config = OptimizerConfig { steps: 200, seed: derive_seed(SEED, &[10, 9]), ..Default::default() };
    let shared = descend(&e, CostKind::CovarianceNorm(vec![0, 1, 2]), &config);
    let shared_min = pairs
        .iter()
        .map(|&(i, j)| pair_cov(&e, i, j, &shared.best().final_settings))
        .fold(f64::INFINITY, f64::min);
    // grid oracle: maximize the norm over shared axes, then read the worst pair
    let grid = sphere_grid(500);
    let ks: Vec<[[f64; 3]; 3]> = pairs.iter().map(|&(i, j)| kernel(&e, i, j)).collect();
    let table = |k: &[[f64; 3]; 3]| -> Vec<f64> {
        let mut t = Vec::with_capacity(grid.len() * grid.len());
        for u in &grid {
            for v in &grid {
                t.push((0..3).map(|a| (0..3).map(|b| u[a] * k[a][b] * v[b]).sum::<f64>()).sum());
            }
        }
        t
    };
    let (t01, t02, t12) = (table(&ks[0]), table(&ks[1]), table(&ks[2]));
    let g = grid.len();
    let (best_norm, best_min, max_min) = (0..g)
        .into_par_iter()
        .map(|a| {
            let mut local = (f64::NEG_INFINITY, 0.0, 0.0f64);
            for b in 0..g {
                let c01 = t01[a * g + b];
                for c in 0..g {
                    let (c02, c12) = (t02[a * g + c], t12[b * g + c]);
                    let norm = c01 * c01 + c02 * c02 + c12 * c12;
                    let min = c01.abs().min(c02.abs()).min(c12.abs());
                    if norm > local.0 {
                        local.0 = norm;
                        local.1 = min;
                    }
                    local.2 = local.2.max(min);
                }
            }
            local
        })
        .reduce(
            || (f64::NEG_INFINITY, 0.0, 0.0),
            |x, y| {
                let (n, m) = if x.0 >= y.0 { (x.0, x.1) } else { (y.0, y.1) };
                (n, m, x.2.max(y.2))
            },
        );
    let pass = per_pair >= 0.5 - 1e-3 && shared_min < 0.45 && best_min < 0.45;
    outcome(
        pass,
        format!(
            "per-pair min {per_pair:.6}; shared descent worst pair {shared_min:.4}; grid optimum worst pair {best_min:.4} (norm {best_norm:.4}), best worst-pair over grid {max_min:.4}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("noise curves of optimized Bell correlations", criterion_1),
        ("closed forms at optimal bases", criterion_2),
        ("W x Bell ideal matrices", criterion_3),
        ("topology round trip, covariance pipeline", criterion_4),
        ("decoder on all topologies up to six qubits", criterion_5),
        ("node matrices versus bijection search", criterion_6),
        ("parameter-shift gradients", criterion_7),
        ("joint entropy lower bounds", criterion_8),
        ("finite-shot behaviour", criterion_9),
        ("shared versus per-pair bases", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", k + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.ends_with(&format!(" {f}"))) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "{id:>12}: {} | {name} | {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
