use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kmeans::{farthest_point_seeds, squared_distance, MAX_ITERATIONS};
use super::ClusterError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct KMedoidsResult<T> {
    pub assignment: Vec<usize>,
    /// Point index of each medoid.
    pub medoids: Vec<usize>,
    /// Sum of member-to-medoid distances after each iteration.
    pub history: Vec<T>,
}

impl<T: Scalar> KMedoidsResult<T> {
    pub fn cost(&self) -> T {
        *self.history.last().expect("at least one iteration")
    }
}

/// Assign each point to its nearest medoid; a medoid always belongs to its
/// own cluster even when another medoid is an identical point.
fn assign<T: Scalar>(
    dist: &[Vec<T>],
    medoids: &[usize],
) -> (Vec<usize>, T) {
    let n = dist.len();
    let mut assignment = vec![0; n];
    let mut cost = T::zero();
    for i in 0..n {
        if let Some(c) = medoids.iter().position(|&m| m == i) {
            assignment[i] = c;
            continue;
        }
        let mut best = (0, T::infinity());
        for (c, &m) in medoids.iter().enumerate() {
            if dist[i][m] < best.1 {
                best = (c, dist[i][m]);
            }
        }
        assignment[i] = best.0;
        cost += best.1;
    }
    (assignment, cost)
}

/// Alternating (Voronoi iteration) k-medoids with squared Euclidean distance
/// and farthest-point seeding. Medoids are always actual points.
pub fn kmedoids<T: Scalar>(
    points: ArrayView2<'_, T>,
    k: usize,
    seed: u64,
) -> Result<KMedoidsResult<T>, ClusterError> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(ClusterError::BadCount { k, n });
    }
    let dist: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| squared_distance(points.row(i), points.row(j)))
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids = farthest_point_seeds(points, k, &mut rng);
    // identical points can be picked twice; replace repeats with unused points
    for c in 0..k {
        if medoids[..c].contains(&medoids[c]) {
            medoids[c] = (0..n).find(|i| !medoids.contains(i)).expect("k <= n");
        }
    }
    let (mut assignment, mut cost) = assign(&dist, &medoids);
    let mut history = vec![cost];
    for _ in 0..MAX_ITERATIONS {
        let mut next = medoids.clone();
        for (c, slot) in next.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| assignment[i] == c).collect();
            let within = |cand: usize| {
                members
                    .iter()
                    .fold(T::zero(), |acc, &i| acc + dist[cand][i])
            };
            let mut best = (*slot, within(*slot));
            for &cand in &members {
                let d = within(cand);
                if d < best.1 {
                    best = (cand, d);
                }
            }
            *slot = best.0;
        }
        if next == medoids {
            break;
        }
        let (a, new_cost) = assign(&dist, &next);
        if new_cost > cost {
            break;
        }
        medoids = next;
        assignment = a;
        cost = new_cost;
        history.push(cost);
    }
    Ok(KMedoidsResult {
        assignment,
        medoids,
        history,
    })
}
