use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ClusterError;
use crate::scalar::Scalar;

pub const MAX_ITERATIONS: usize = 300;
pub const MAX_RESEEDS: usize = 5;

pub(crate) fn squared_distance<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

/// Greedy farthest-point seeding: the first seed is drawn from `rng`, each
/// following seed is the point farthest from all seeds chosen so far (lowest
/// index on ties).
pub(crate) fn farthest_point_seeds<T: Scalar>(
    points: ArrayView2<'_, T>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = points.nrows();
    let mut seeds = vec![rng.random_range(0..n)];
    let mut nearest: Vec<T> = (0..n)
        .map(|i| squared_distance(points.row(i), points.row(seeds[0])))
        .collect();
    while seeds.len() < k {
        let mut best = 0;
        for i in 1..n {
            if nearest[i] > nearest[best] {
                best = i;
            }
        }
        seeds.push(best);
        for i in 0..n {
            let d = squared_distance(points.row(i), points.row(best));
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
    }
    seeds
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T> {
    pub assignment: Vec<usize>,
    pub centroids: Array2<T>,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub history: Vec<T>,
}

impl<T: Scalar> KMeansResult<T> {
    pub fn inertia(&self) -> T {
        *self.history.last().expect("at least one iteration")
    }
}

fn nearest_center<T: Scalar>(point: ArrayView1<'_, T>, centers: &Array2<T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, center) in centers.rows().into_iter().enumerate() {
        let d = squared_distance(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd<T: Scalar>(points: ArrayView2<'_, T>, seeds: &[usize]) -> (KMeansResult<T>, bool) {
    let (n, dim) = points.dim();
    let k = seeds.len();
    let mut centroids = Array2::zeros((k, dim));
    for (c, &s) in seeds.iter().enumerate() {
        centroids.row_mut(c).assign(&points.row(s));
    }
    let mut assignment = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for i in 0..n {
            let (c, _) = nearest_center(points.row(i), &centroids);
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        let mut sums = Array2::<T>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assignment[i];
            counts[c] += 1;
            let mut row = sums.row_mut(c);
            row += &points.row(i);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = T::one() / T::of(counts[c] as f64);
                centroids.row_mut(c).assign(&sums.row(c).mapv(|v| v * inv));
            }
        }
        let inertia = (0..n).fold(T::zero(), |acc, i| {
            acc + squared_distance(points.row(i), centroids.row(assignment[i]))
        });
        history.push(inertia);
        if !changed {
            break;
        }
    }
    let mut counts = vec![0usize; k];
    for &c in &assignment {
        counts[c] += 1;
    }
    let all_used = counts.iter().all(|&c| c > 0);
    (
        KMeansResult {
            assignment,
            centroids,
            history,
        },
        all_used,
    )
}

/// Lloyd's k-means with farthest-point seeding. Runs until the assignment
/// stops changing (at most [`MAX_ITERATIONS`]); if a cluster ends up empty the
/// seeding is redrawn up to [`MAX_RESEEDS`] times.
pub fn kmeans<T: Scalar>(
    points: ArrayView2<'_, T>,
    k: usize,
    seed: u64,
) -> Result<KMeansResult<T>, ClusterError> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(ClusterError::BadCount { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..=MAX_RESEEDS {
        let seeds = farthest_point_seeds(points, k, &mut rng);
        let (result, all_used) = lloyd(points, &seeds);
        if all_used {
            return Ok(result);
        }
    }
    Err(ClusterError::EmptyCluster {
        k,
        attempts: MAX_RESEEDS + 1,
    })
}
