//! Place-field population, trial-block templates and manifold dynamics.

use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use thiserror::Error;

use crate::io::fmt_f64;

/// A point on the 2-D replay manifold.
pub type Point2 = [f64; 2];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PopulationError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("block index {k} out of range for {k_blocks} blocks")]
    BlockOutOfRange { k: usize, k_blocks: usize },
}

fn invalid(msg: impl Into<String>) -> PopulationError {
    PopulationError::InvalidParameter(msg.into())
}

/// Gaussian tuning curve `exp(-(x - pref)² / (2σ²))`.
pub fn place_field(x: f64, pref: f64, sigma: f64) -> Result<f64, PopulationError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("place-field width must be > 0, got {sigma}")));
    }
    Ok(gaussian(x, pref, sigma))
}

#[inline]
fn gaussian(x: f64, pref: f64, sigma: f64) -> f64 {
    let d = x - pref;
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceFieldPopulation {
    preferred: Vec<f64>,
    sigma_pf: f64,
    noise_sigma: f64,
}

impl PlaceFieldPopulation {
    pub fn new(preferred: Vec<f64>, sigma_pf: f64, noise_sigma: f64) -> Result<Self, PopulationError> {
        if preferred.is_empty() {
            return Err(invalid("population needs at least one neuron"));
        }
        if let Some(p) = preferred.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(invalid(format!("preferred position {p} outside [0, 1]")));
        }
        if !(sigma_pf > 0.0 && sigma_pf.is_finite()) {
            return Err(invalid(format!("sigma_pf must be > 0, got {sigma_pf}")));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(invalid(format!("noise_sigma must be >= 0, got {noise_sigma}")));
        }
        Ok(Self {
            preferred,
            sigma_pf,
            noise_sigma,
        })
    }

    /// `n` neurons with preferred positions drawn uniformly from `[0, 1]`.
    pub fn sample_uniform<R: Rng + ?Sized>(
        n: usize,
        sigma_pf: f64,
        noise_sigma: f64,
        rng: &mut R,
    ) -> Result<Self, PopulationError> {
        let preferred = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        Self::new(preferred, sigma_pf, noise_sigma)
    }

    pub fn n(&self) -> usize {
        self.preferred.len()
    }

    pub fn preferred(&self) -> &[f64] {
        &self.preferred
    }

    pub fn sigma_pf(&self) -> f64 {
        self.sigma_pf
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// Deterministic place-field response `f(x)`.
    pub fn noise_free_rates(&self, x: f64) -> Vec<f64> {
        self.preferred
            .iter()
            .map(|&p| gaussian(x, p, self.sigma_pf))
            .collect()
    }

    /// `f(x) + ε` with `ε ~ N(0, noise_sigma²)` per neuron. Rates are not
    /// clipped.
    pub fn rates<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Vec<f64> {
        let mut r = self.noise_free_rates(x);
        if self.noise_sigma > 0.0 {
            for v in &mut r {
                let e: f64 = rng.sample(StandardNormal);
                *v += self.noise_sigma * e;
            }
        }
        r
    }
}

/// `(cos(2πk/K), sin(2πk/K))`.
pub fn circular_embed(k: usize, k_blocks: usize) -> Result<Point2, PopulationError> {
    if k >= k_blocks {
        return Err(PopulationError::BlockOutOfRange { k, k_blocks });
    }
    let theta = 2.0 * PI * k as f64 / k_blocks as f64;
    Ok([theta.cos(), theta.sin()])
}

/// Past trial blocks: positions, noise-free templates and embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialBlockSet {
    pub positions: Vec<f64>,
    pub templates: Vec<Vec<f64>>,
    pub embeddings: Vec<Point2>,
}

impl TrialBlockSet {
    pub fn k_blocks(&self) -> usize {
        self.positions.len()
    }

    pub fn n_neurons(&self) -> usize {
        self.templates.first().map_or(0, Vec::len)
    }

    /// `block,position,z1,z2`
    pub fn blocks_csv(&self) -> String {
        let mut out = String::from("block,position,z1,z2\n");
        for (k, (p, z)) in self.positions.iter().zip(&self.embeddings).enumerate() {
            out.push_str(&format!("{k},{},{},{}\n", fmt_f64(*p), fmt_f64(z[0]), fmt_f64(z[1])));
        }
        out
    }

    /// One header-less row of `n` rates per block.
    pub fn templates_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.templates {
            let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// `k_blocks` positions evenly spaced over `[lo, hi]` (the midpoint when
/// there is a single block).
pub fn build_trial_blocks(
    pop: &PlaceFieldPopulation,
    k_blocks: usize,
    lo: f64,
    hi: f64,
) -> Result<TrialBlockSet, PopulationError> {
    if k_blocks == 0 {
        return Err(invalid("k_blocks must be >= 1"));
    }
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(invalid(format!("position range [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1")));
    }
    let positions: Vec<f64> = if k_blocks == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        let step = (hi - lo) / (k_blocks - 1) as f64;
        (0..k_blocks)
            .map(|k| if k == k_blocks - 1 { hi } else { lo + step * k as f64 })
            .collect()
    };
    let templates = positions.iter().map(|&x| pop.noise_free_rates(x)).collect();
    let embeddings = (0..k_blocks)
        .map(|k| circular_embed(k, k_blocks))
        .collect::<Result<_, _>>()?;
    Ok(TrialBlockSet {
        positions,
        templates,
        embeddings,
    })
}

/// State of the drift process `z ← z + v·Δt + ξ`, `ξ ~ N(0, c·I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldState {
    pub z: Point2,
    pub drift_v: Point2,
    pub dt: f64,
    pub noise_cov_scale: f64,
}

impl ManifoldState {
    pub fn validate(&self) -> Result<(), PopulationError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.noise_cov_scale >= 0.0 && self.noise_cov_scale.is_finite()) {
            return Err(invalid(format!(
                "noise_cov_scale must be >= 0, got {}",
                self.noise_cov_scale
            )));
        }
        if !self.z.iter().chain(&self.drift_v).all(|v| v.is_finite()) {
            return Err(invalid("manifold coordinates must be finite"));
        }
        Ok(())
    }
}

pub fn manifold_step<R: Rng + ?Sized>(state: &ManifoldState, rng: &mut R) -> Point2 {
    balanced_manifold_step(state, [0.0, 0.0], 0.0, rng)
}

/// `z + v·Δt − α·g + ξ`. Two standard normals are drawn per call whatever
/// the noise scale, so streams stay aligned across configurations.
pub fn balanced_manifold_step<R: Rng + ?Sized>(
    state: &ManifoldState,
    energy_gradient: Point2,
    alpha: f64,
    rng: &mut R,
) -> Point2 {
    let std = state.noise_cov_scale.sqrt();
    let mut out = [0.0; 2];
    for (d, o) in out.iter_mut().enumerate() {
        let xi: f64 = rng.sample(StandardNormal);
        *o = state.z[d] + state.drift_v[d] * state.dt - alpha * energy_gradient[d] + std * xi;
    }
    out
}

/// Smooth energy landscape over the manifold, interpolating per-block
/// energies at their embeddings with inverse-squared-distance weights
/// `w_k = 1 / (‖z − z_k‖² + 1e-6)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyField {
    anchors: Vec<Point2>,
    energies: Vec<f64>,
}

const FIELD_EPS: f64 = 1e-6;

impl EnergyField {
    pub fn new(anchors: Vec<Point2>, energies: Vec<f64>) -> Result<Self, PopulationError> {
        if anchors.is_empty() || anchors.len() != energies.len() {
            return Err(invalid(format!(
                "energy field needs matching non-empty anchors and energies ({} vs {})",
                anchors.len(),
                energies.len()
            )));
        }
        Ok(Self { anchors, energies })
    }

    fn weight(&self, z: Point2, k: usize) -> (f64, Point2) {
        let d = [z[0] - self.anchors[k][0], z[1] - self.anchors[k][1]];
        let w = 1.0 / (d[0] * d[0] + d[1] * d[1] + FIELD_EPS);
        (w, d)
    }

    pub fn value(&self, z: Point2) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (k, e) in self.energies.iter().enumerate() {
            let (w, _) = self.weight(z, k);
            num += w * e;
            den += w;
        }
        num / den
    }

    /// Analytic gradient: `∇E = Σ_k ∇w_k (E_k − E(z)) / Σ_k w_k` with
    /// `∇w_k = −2 w_k² (z − z_k)`.
    pub fn gradient(&self, z: Point2) -> Point2 {
        let value = self.value(z);
        let mut den = 0.0;
        let mut g = [0.0; 2];
        for (k, e) in self.energies.iter().enumerate() {
            let (w, d) = self.weight(z, k);
            den += w;
            let scale = -2.0 * w * w * (e - value);
            g[0] += scale * d[0];
            g[1] += scale * d[1];
        }
        [g[0] / den, g[1] / den]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn place_field_values() {
        assert_eq!(place_field(0.5, 0.5, 0.1).unwrap(), 1.0);
        assert!((place_field(0.6, 0.5, 0.1).unwrap() - 0.606531).abs() < 1e-6);
        assert!((place_field(0.5, 0.9, 0.1).unwrap() - 3.3546e-4).abs() < 1e-8);
        assert!(place_field(0.5, 0.5, 0.0).is_err());
        assert!(place_field(0.5, 0.5, -1.0).is_err());
    }

    #[test]
    fn population_validation() {
        assert!(PlaceFieldPopulation::new(vec![0.5, 1.2], 0.1, 0.0).is_err());
        assert!(PlaceFieldPopulation::new(vec![0.5], 0.0, 0.0).is_err());
        assert!(PlaceFieldPopulation::new(vec![0.5], 0.1, -0.1).is_err());
        assert!(PlaceFieldPopulation::new(vec![], 0.1, 0.0).is_err());
    }

    #[test]
    fn noise_free_rates_example() {
        let pop = PlaceFieldPopulation::new(vec![0.3, 0.7], 0.1, 0.0).unwrap();
        let r = pop.rates(0.3, &mut rng_from_seed(1));
        assert_eq!(r, vec![1.0, place_field(0.3, 0.7, 0.1).unwrap()]);
    }

    #[test]
    fn rates_are_seeded() {
        let pop = PlaceFieldPopulation::new(vec![0.1, 0.4, 0.9], 0.1, 0.2).unwrap();
        assert_eq!(pop.rates(0.4, &mut rng_from_seed(5)), pop.rates(0.4, &mut rng_from_seed(5)));
    }

    #[test]
    fn noisy_rates_mean_matches_clt_bound() {
        let pop = PlaceFieldPopulation::new(vec![0.2, 0.5, 0.55], 0.1, 0.1).unwrap();
        let clean = pop.noise_free_rates(0.5);
        let mut rng = rng_from_seed(77);
        let draws = 10_000;
        let mut sum = [0.0; 3];
        for _ in 0..draws {
            for (s, r) in sum.iter_mut().zip(pop.rates(0.5, &mut rng)) {
                *s += r;
            }
        }
        for (s, c) in sum.iter().zip(&clean) {
            assert!((s / draws as f64 - c).abs() < 4.0 * 0.1 / 100.0);
        }
    }

    #[test]
    fn trial_block_positions() {
        let pop = PlaceFieldPopulation::new(vec![0.5; 4], 0.1, 0.0).unwrap();
        let b = build_trial_blocks(&pop, 3, 0.2, 0.8).unwrap();
        assert_eq!(b.positions.len(), 3);
        for (p, e) in b.positions.iter().zip([0.2, 0.5, 0.8]) {
            assert!((p - e).abs() < 1e-15);
        }
        let single = build_trial_blocks(&pop, 1, 0.2, 0.8).unwrap();
        assert_eq!(single.positions, vec![0.5]);
        assert!(build_trial_blocks(&pop, 0, 0.2, 0.8).is_err());
        assert!(build_trial_blocks(&pop, 2, 0.8, 0.2).is_err());
        assert!(build_trial_blocks(&pop, 2, -0.1, 0.2).is_err());
    }

    #[test]
    fn templates_are_noise_free_rates() {
        let pop = PlaceFieldPopulation::sample_uniform(40, 0.1, 0.3, &mut rng_from_seed(2)).unwrap();
        let b = build_trial_blocks(&pop, 8, 0.2, 0.8).unwrap();
        for (k, x) in b.positions.iter().enumerate() {
            let direct: Vec<f64> = pop
                .preferred()
                .iter()
                .map(|&p| place_field(*x, p, 0.1).unwrap())
                .collect();
            assert_eq!(b.templates[k], direct);
            assert!((b.embeddings[k][0].hypot(b.embeddings[k][1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn embed_examples() {
        let close = |a: Point2, b: Point2| (a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6;
        assert!(close(circular_embed(0, 4).unwrap(), [1.0, 0.0]));
        assert!(close(circular_embed(1, 4).unwrap(), [0.0, 1.0]));
        assert!(close(circular_embed(2, 3).unwrap(), [-0.5, -0.866025]));
        assert_eq!(
            circular_embed(4, 4),
            Err(PopulationError::BlockOutOfRange { k: 4, k_blocks: 4 })
        );
    }

    #[test]
    fn embeddings_are_distinct() {
        for k_blocks in 2..20 {
            let pts: Vec<Point2> = (0..k_blocks).map(|k| circular_embed(k, k_blocks).unwrap()).collect();
            for a in 0..k_blocks {
                for b in a + 1..k_blocks {
                    let d = (pts[a][0] - pts[b][0]).hypot(pts[a][1] - pts[b][1]);
                    assert!(d > 1e-9);
                }
            }
        }
    }

    #[test]
    fn noiseless_steps() {
        let mut rng = rng_from_seed(0);
        let s = ManifoldState {
            z: [0.0, 0.0],
            drift_v: [1.0, 0.0],
            dt: 0.1,
            noise_cov_scale: 0.0,
        };
        assert_eq!(manifold_step(&s, &mut rng), [0.1, 0.0]);
        let still = ManifoldState { z: [0.3, -0.2], drift_v: [0.0, 0.0], ..s };
        assert_eq!(manifold_step(&still, &mut rng), [0.3, -0.2]);
    }

    #[test]
    fn noisy_step_mean_matches_clt_bound() {
        let s = ManifoldState {
            z: [0.5, -0.25],
            drift_v: [0.2, 0.1],
            dt: 0.5,
            noise_cov_scale: 0.05,
        };
        let mut rng = rng_from_seed(123);
        let steps = 100_000;
        let mut sum = [0.0; 2];
        for _ in 0..steps {
            let z = manifold_step(&s, &mut rng);
            sum[0] += z[0];
            sum[1] += z[1];
        }
        let bound = 4.0 * 0.05f64.sqrt() / (steps as f64).sqrt();
        assert!((sum[0] / steps as f64 - 0.6).abs() < bound);
        assert!((sum[1] / steps as f64 - -0.2).abs() < bound);
    }

    #[test]
    fn balanced_step_reductions() {
        let s = ManifoldState {
            z: [0.2, 0.4],
            drift_v: [0.3, -0.1],
            dt: 0.05,
            noise_cov_scale: 0.02,
        };
        let plain = manifold_step(&s, &mut rng_from_seed(9));
        let balanced = balanced_manifold_step(&s, [3.0, -7.0], 0.0, &mut rng_from_seed(9));
        assert_eq!(plain, balanced);

        let origin = ManifoldState {
            z: [0.0, 0.0],
            drift_v: [0.0, 0.0],
            dt: 0.7,
            noise_cov_scale: 0.0,
        };
        let z = balanced_manifold_step(&origin, [1.0, 0.0], 0.5, &mut rng_from_seed(1));
        assert_eq!(z, [-0.5, 0.0]);
    }

    #[test]
    fn energy_field_gradient_matches_finite_differences() {
        let anchors: Vec<Point2> = (0..6).map(|k| circular_embed(k, 6).unwrap()).collect();
        let field = EnergyField::new(anchors, vec![3.0, 1.0, 4.0, 1.5, 9.0, 2.6]).unwrap();
        let h = 1e-6;
        for z in [[0.3, 0.1], [-0.4, 0.7], [0.9, -0.2]] {
            let g = field.gradient(z);
            for d in 0..2 {
                let mut zp = z;
                let mut zm = z;
                zp[d] += h;
                zm[d] -= h;
                let fd = (field.value(zp) - field.value(zm)) / (2.0 * h);
                assert!((fd - g[d]).abs() < 1e-5 * (1.0 + fd.abs()), "{fd} vs {}", g[d]);
            }
        }
    }

    #[test]
    fn balanced_step_moves_downhill() {
        let anchors: Vec<Point2> = (0..4).map(|k| circular_embed(k, 4).unwrap()).collect();
        let field = EnergyField::new(anchors, vec![0.0, 5.0, 10.0, 5.0]).unwrap();
        let s = ManifoldState {
            z: [0.1, 0.3],
            drift_v: [0.0, 0.0],
            dt: 0.1,
            noise_cov_scale: 0.0,
        };
        let g = field.gradient(s.z);
        let z = balanced_manifold_step(&s, g, 1e-3, &mut rng_from_seed(4));
        assert!(field.value(z) < field.value(s.z));
    }

    #[test]
    fn manifold_state_validation() {
        let ok = ManifoldState {
            z: [0.0, 0.0],
            drift_v: [0.0, 0.0],
            dt: 0.1,
            noise_cov_scale: 0.0,
        };
        assert!(ok.validate().is_ok());
        assert!(ManifoldState { dt: 0.0, ..ok }.validate().is_err());
        assert!(ManifoldState { noise_cov_scale: -1.0, ..ok }.validate().is_err());
        assert!(ManifoldState { z: [f64::NAN, 0.0], ..ok }.validate().is_err());
    }
}
