//! Balance-coupled operations collapse exactly to their plain versions
//! when the coupling is zero.

use proptest::prelude::*;
use rand::Rng;
use ripplebalance::balance::Kernel;
use ripplebalance::plasticity::{accumulate_batch, balance_regularized_update, hebbian_update, PlasticityConfig};
use ripplebalance::population::{
    balanced_manifold_step, build_trial_blocks, manifold_step, ManifoldState, PlaceFieldPopulation,
};
use ripplebalance::ripple::{
    balance_weighted_replay, cosine_similarity, generate_event, replay_probabilities, RippleConfig,
};
use ripplebalance::seed::rng_from_seed;
use ripplebalance::matrix::SynapticMatrix;

fn spikes(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

proptest! {
    #[test]
    fn zero_gamma_replay_is_plain_replay(
        seed in any::<u64>(),
        k in 1usize..10,
        beta in 0.0f64..50.0,
        energy_scale in 0.0f64..1e3,
    ) {
        let mut rng = rng_from_seed(seed);
        let query: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let candidates: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let energies: Vec<f64> = (0..k).map(|_| energy_scale * rng.random::<f64>()).collect();
        let sims: Vec<f64> = candidates.iter().map(|c| cosine_similarity(&query, c).unwrap()).collect();
        let plain = replay_probabilities(&query, &candidates, beta).unwrap();
        let balanced = balance_weighted_replay(&sims, &energies, beta, 0.0).unwrap();
        prop_assert_eq!(plain, balanced);
    }

    #[test]
    fn zero_lambda_is_hebbian(seed in any::<u64>(), n in 2usize..20, p in 0.0f64..=1.0, eta in 1e-4f64..1.0) {
        let w = SynapticMatrix::random_uniform(n, &mut rng_from_seed(seed));
        let s = spikes(n, seed ^ 1);
        for kernel in [Kernel::Fast, Kernel::Naive] {
            let cfg = PlasticityConfig { kernel, ..PlasticityConfig::hebbian(eta) };
            prop_assert_eq!(
                balance_regularized_update(&w, &s, p, &cfg).unwrap(),
                hebbian_update(&w, &s, p, eta).unwrap()
            );
        }
    }

    #[test]
    fn zero_alpha_step_is_plain_step(
        seed in any::<u64>(),
        z in prop::array::uniform2(-2.0f64..2.0),
        v in prop::array::uniform2(-1.0f64..1.0),
        g in prop::array::uniform2(-1e3f64..1e3),
        noise in 0.0f64..1.0,
    ) {
        let state = ManifoldState { z, drift_v: v, dt: 0.01, noise_cov_scale: noise };
        let plain = manifold_step(&state, &mut rng_from_seed(seed));
        let balanced = balanced_manifold_step(&state, g, 0.0, &mut rng_from_seed(seed));
        prop_assert_eq!(plain, balanced);
    }
}

#[test]
fn zero_couplings_leave_events_unchanged() {
    let pop = PlaceFieldPopulation::sample_uniform(30, 0.1, 0.1, &mut rng_from_seed(1)).unwrap();
    let blocks = build_trial_blocks(&pop, 6, 0.2, 0.8).unwrap();
    let cfg = RippleConfig::default();
    let energies = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0];
    for m in 0..20 {
        let plain = generate_event(&blocks, &cfg, &[0.0; 6], &mut rng_from_seed(m)).unwrap();
        let coupled = generate_event(&blocks, &cfg, &energies, &mut rng_from_seed(m)).unwrap();
        assert_eq!(plain, coupled);
    }
}

#[test]
fn hebbian_increment_is_outer_product() {
    let n = 12;
    let w = SynapticMatrix::random_uniform(n, &mut rng_from_seed(3));
    let s = spikes(n, 4);
    let p = 0.37;
    let next = hebbian_update(&w, &s, p, 0.05).unwrap();
    for i in 0..n {
        for j in 0..n {
            let expected = if i == j { 0.0 } else { 0.05 * p * s[i] * s[j] };
            assert!((next.get(i, j) - w.get(i, j) - expected).abs() < 1e-15);
        }
    }
}

#[test]
fn two_hebbian_events_commute() {
    use ripplebalance::ripple::RippleEvent;
    let n = 8;
    let w = SynapticMatrix::random_uniform(n, &mut rng_from_seed(5));
    let event = |seed: u64, p: f64| RippleEvent {
        trajectory: vec![[0.0, 0.0]],
        similarities: vec![1.0, 0.0],
        probabilities: vec![p, 1.0 - p],
        selected_block: 0,
        spikes: spikes(n, seed),
        decoded_block: 0,
    };
    let (e1, e2) = (event(6, 0.7), event(7, 0.4));
    let cfg = PlasticityConfig::hebbian(0.1);
    let ab = accumulate_batch(&w, &[e1.clone(), e2.clone()], &cfg).unwrap();
    let ba = accumulate_batch(&w, &[e2.clone(), e1.clone()], &cfg).unwrap();
    for i in 0..n {
        for j in 0..n {
            let direct = if i == j {
                0.0
            } else {
                w.get(i, j) + 0.1 * (0.7 * e1.spikes[i] * e1.spikes[j] + 0.4 * e2.spikes[i] * e2.spikes[j])
            };
            assert!((ab.get(i, j) - direct).abs() < 1e-14);
            assert!((ba.get(i, j) - direct).abs() < 1e-14);
        }
    }
}

#[test]
fn regularized_update_kernels_agree() {
    let n = 10;
    let w = SynapticMatrix::random_uniform(n, &mut rng_from_seed(8));
    let s = spikes(n, 9);
    let cfg = |kernel| PlasticityConfig {
        lambda_balance: 0.5,
        kernel,
        ..PlasticityConfig::hebbian(0.05)
    };
    let fast = balance_regularized_update(&w, &s, 0.8, &cfg(Kernel::Fast)).unwrap();
    let naive = balance_regularized_update(&w, &s, 0.8, &cfg(Kernel::Naive)).unwrap();
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (fast.get(i, j), naive.get(i, j));
            assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0));
        }
    }
}
