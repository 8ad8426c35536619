//! Lloyd's k-means with k-means++ seeding.

use rand::Rng;

use super::{invalid, nearest, sq_dist, EmbeddingSet, InterpretError};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    /// Nearest centroid of each point (ties to the lowest index).
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step, starting from the seeding.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn predict(&self, point: &[f64]) -> usize {
        nearest(point, &self.centroids).0
    }
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let assignments = points
        .iter()
        .map(|p| {
            let (j, d) = nearest(p, centroids);
            inertia += d;
            j
        })
        .collect();
    (assignments, inertia)
}

/// The first centroid is a uniformly random point; each further one is
/// drawn with probability proportional to its squared distance from the
/// nearest chosen centroid. When every remaining distance is zero the
/// lowest-index unchosen point is used.
fn seed_plus_plus<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut chosen = vec![rng.random_range(0..points.len())];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if u < acc && *d > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|d| *d > 0.0).expect("total > 0"))
        } else {
            (0..points.len())
                .find(|i| !chosen.contains(i))
                .expect("k <= number of points")
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Lloyd iterations until the assignments stop changing or `max_iters`
/// updates have run. A centroid that loses all its points is moved onto
/// the point farthest from its current centroid.
pub fn kmeans_fit<R: Rng + ?Sized>(
    data: &EmbeddingSet,
    k: usize,
    max_iters: usize,
    rng: &mut R,
) -> Result<ClusterModel, InterpretError> {
    let points = data.vectors();
    if k == 0 || k > points.len() {
        return Err(invalid(format!(
            "k = {k} must be between 1 and the number of points ({})",
            points.len()
        )));
    }
    if max_iters == 0 {
        return Err(invalid("max_iters must be >= 1"));
    }
    let dim = data.dim();
    let mut centroids = seed_plus_plus(points, k, rng);
    let (mut assignments, mut inertia) = assign(points, &centroids);
    let mut inertia_history = vec![inertia];

    for _ in 0..max_iters {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let mut far = (0, -1.0);
                for (i, (p, &a)) in points.iter().zip(&assignments).enumerate() {
                    let d = sq_dist(p, &centroids[a]);
                    if d > far.1 {
                        far = (i, d);
                    }
                }
                centroids[c] = points[far.0].clone();
            }
        }
        let (next, next_inertia) = assign(points, &centroids);
        inertia_history.push(next_inertia);
        inertia = next_inertia;
        let stable = next == assignments;
        assignments = next;
        if stable {
            break;
        }
    }

    Ok(ClusterModel {
        centroids,
        assignments,
        inertia,
        inertia_history,
    })
}
