//! Balance kernels checked against independent reference computations.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ripplebalance::balance::{
    balance_energy_fast, balance_energy_naive, balance_gradient_fast, balance_gradient_naive, descend_balance,
    enumerate_triads, relative_deviation, DescentConfig,
};
use ripplebalance::matrix::SynapticMatrix;

fn seeded(n: usize, seed: u64) -> SynapticMatrix {
    SynapticMatrix::random_uniform(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn to_rows(w: &SynapticMatrix) -> Vec<Vec<f64>> {
    (0..w.n()).map(|i| (0..w.n()).map(|j| w.get(i, j)).collect()).collect()
}

/// Sum over all ordered triples of distinct indices, divided by the six
/// orderings of each triad.
fn energy_ordered_oracle(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i != j && j != k && i != k {
                    let t = w[i][j] * w[j][k] * w[k][i] + 1.0;
                    total += t * t;
                }
            }
        }
    }
    total / 6.0
}

/// Dense cube traces built from explicit matrix products.
fn energy_trace_oracle(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    let mul = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
            .collect()
    };
    let a: Vec<Vec<f64>> = w.iter().map(|r| r.iter().map(|v| v * v).collect()).collect();
    let w3 = mul(&mul(w, w), w);
    let a3 = mul(&mul(&a, &a), &a);
    let tr = |m: &[Vec<f64>]| (0..n).map(|i| m[i][i]).sum::<f64>();
    let c = (n * n.saturating_sub(1) * n.saturating_sub(2)) as f64 / 6.0;
    c + tr(&w3) / 3.0 + tr(&a3) / 6.0
}

/// Central differences of the naive energy, moving `W_ij` and `W_ji`
/// together.
fn fd_gradient(w: &SynapticMatrix, h: f64) -> Vec<Vec<f64>> {
    let n = w.n();
    let base = to_rows(w);
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[i][j] += h;
            plus[j][i] += h;
            minus[i][j] -= h;
            minus[j][i] -= h;
            let ep = balance_energy_naive(&SynapticMatrix::from_rows(&plus).unwrap());
            let em = balance_energy_naive(&SynapticMatrix::from_rows(&minus).unwrap());
            g[i][j] = (ep - em) / (2.0 * h);
            g[j][i] = g[i][j];
        }
    }
    g
}

#[test]
fn all_ones_triangle() {
    let w = SynapticMatrix::from_upper(3, |_, _| 1.0);
    assert_eq!(balance_energy_naive(&w), 4.0);
    assert_eq!(balance_energy_fast(&w), 4.0);
    assert_eq!(energy_ordered_oracle(&to_rows(&w)), 4.0);
    for grad in [balance_gradient_naive(&w), balance_gradient_fast(&w)] {
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(grad.get(i, j), if i == j { 0.0 } else { 4.0 });
            }
        }
    }
}

#[test]
fn seed_42_n20_energy() {
    let w = seeded(20, 42);
    let oracle = energy_ordered_oracle(&to_rows(&w));
    assert!(relative_deviation(balance_energy_naive(&w), oracle) < 1e-12);
    assert!(relative_deviation(balance_energy_fast(&w), oracle) < 1e-12);
    assert!(relative_deviation(energy_trace_oracle(&to_rows(&w)), oracle) < 1e-12);
}

#[test]
fn n10_gradients_match_finite_differences() {
    let w = seeded(10, 7);
    let fd = fd_gradient(&w, 1e-5);
    let naive = balance_gradient_naive(&w);
    let fast = balance_gradient_fast(&w);
    for i in 0..10 {
        for j in 0..10 {
            assert!((naive.get(i, j) - fd[i][j]).abs() < 1e-6, "naive ({i},{j})");
            assert!((fast.get(i, j) - fd[i][j]).abs() < 1e-6, "fast ({i},{j})");
        }
    }
}

#[test]
fn n25_gradients_agree() {
    let w = seeded(25, 25);
    let naive = balance_gradient_naive(&w);
    let fast = balance_gradient_fast(&w);
    for i in 0..25 {
        for j in 0..25 {
            assert!(relative_deviation(naive.get(i, j), fast.get(i, j)) < 1e-9);
        }
    }
}

#[test]
fn triads_match_direct_products() {
    let w = seeded(5, 3);
    let triads = enumerate_triads(&w);
    assert_eq!(triads.len(), 10);
    let mut expected = Vec::new();
    for i in 0..5 {
        for j in i + 1..5 {
            for k in j + 1..5 {
                expected.push((i, j, k, w.get(i, j) * w.get(j, k) * w.get(k, i)));
            }
        }
    }
    for (t, (i, j, k, p)) in triads.iter().zip(expected) {
        assert_eq!((t.i, t.j, t.k), (i, j, k));
        assert!((t.product - p).abs() < 1e-15);
        assert_eq!(t.balanced, p > 0.0);
    }
}

#[test]
fn descent_trace_on_n10() {
    let w = seeded(10, 10);
    let (_, trace) = descend_balance(&w, &DescentConfig::new(0.001, 200)).unwrap();
    assert_eq!(trace.len(), 201);
    assert!(trace.windows(2).all(|p| p[1] <= p[0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_agree_for_small_n(n in 3usize..=30, seed in any::<u64>()) {
        let w = seeded(n, seed);
        prop_assert!(relative_deviation(balance_energy_naive(&w), balance_energy_fast(&w)) <= 1e-9);
        let (a, b) = (balance_gradient_naive(&w), balance_gradient_fast(&w));
        for i in 0..n {
            for j in 0..n {
                prop_assert!(relative_deviation(a.get(i, j), b.get(i, j)) <= 1e-9);
            }
        }
    }

    #[test]
    fn energy_is_permutation_invariant(n in 3usize..=15, seed in any::<u64>(), shuffle in any::<u64>()) {
        use rand::seq::SliceRandom;
        let w = seeded(n, seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let p = w.permuted(&perm);
        prop_assert!(relative_deviation(balance_energy_fast(&w), balance_energy_fast(&p)) <= 1e-12);
        prop_assert!(relative_deviation(balance_energy_naive(&w), balance_energy_naive(&p)) <= 1e-12);
        let (g, gp) = (balance_gradient_fast(&w), balance_gradient_fast(&p));
        for i in 0..n {
            for j in 0..n {
                prop_assert!(relative_deviation(g.get(i, j), gp.get(perm[i], perm[j])) <= 1e-12);
            }
        }
    }

    #[test]
    fn energy_is_sign_flip_invariant(n in 3usize..=12, seed in any::<u64>(), mask in any::<u32>()) {
        // Flipping every edge of one neuron leaves each triad product unchanged.
        let w = seeded(n, seed);
        let flip = |i: usize| if mask >> (i % 32) & 1 == 1 { -1.0 } else { 1.0 };
        let f = SynapticMatrix::from_upper(n, |i, j| flip(i) * flip(j) * w.get(i, j));
        prop_assert!(relative_deviation(balance_energy_fast(&w), balance_energy_fast(&f)) <= 1e-12);
    }

    #[test]
    fn energy_is_at_least_zero(n in 3usize..=12, seed in any::<u64>()) {
        prop_assert!(balance_energy_fast(&seeded(n, seed)) >= -1e-9);
    }
}
