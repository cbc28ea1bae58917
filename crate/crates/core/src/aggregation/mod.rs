//! Temporal aggregation: hours clustered into system states (k-means) and
//! days clustered into representative days (k-medoids), plus the transition
//! bookkeeping the reduced models use to keep chronology.

mod kmeans;
mod kmedoids;
mod transitions;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kmeans::{kmeans, KMeansResult};
pub use kmedoids::{kmedoids, KMedoidsResult};
pub use transitions::{
    build_frequency_matrices, build_reduced_frequency_matrices, build_rp_transition_matrix,
    build_transition_matrix, default_checkpoints, TransitionCounts, TransitionMatrices,
};

use crate::scalar::Scalar;
use crate::timeseries::{NormalizedFeatures, HOURS_PER_DAY};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cannot form {k} clusters from {n} points")]
    BadCount { k: usize, n: usize },
    #[error("a cluster stayed empty after {attempts} seedings of {k} clusters")]
    EmptyCluster { k: usize, attempts: usize },
    #[error("checkpoint window {window} h is not in 1..={horizon}")]
    BadWindow { window: usize, horizon: usize },
    #[error("aggregation file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Relabel clusters in order of first appearance so identical partitions
/// always carry identical labels. Returns the new assignment and the old
/// label of each new label.
fn relabel(assignment: &[usize], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut map = vec![usize::MAX; k];
    let mut order = Vec::with_capacity(k);
    for &c in assignment {
        if map[c] == usize::MAX {
            map[c] = order.len();
            order.push(c);
        }
    }
    (assignment.iter().map(|&c| map[c]).collect(), order)
}

/// Hours grouped into system states. Centroids are composite hours in
/// physical units, laid out like the feature vector (demand per bus,
/// renewable per bus, inflow per storage unit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateClustering<T: Scalar = f64> {
    pub num_states: usize,
    pub num_nodes: usize,
    pub num_storage: usize,
    /// hour → state
    pub assignment: Vec<usize>,
    /// state × feature
    pub centroids: Vec<Vec<T>>,
    /// Hours represented by each state.
    pub durations: Vec<usize>,
    pub seed: u64,
}

impl<T: Scalar> StateClustering<T> {
    pub fn demand(&self, state: usize, node: usize) -> T {
        self.centroids[state][node]
    }

    pub fn renewable(&self, state: usize, node: usize) -> T {
        self.centroids[state][self.num_nodes + node]
    }

    pub fn inflow(&self, state: usize, unit: usize) -> T {
        self.centroids[state][2 * self.num_nodes + unit]
    }

    pub fn horizon_hours(&self) -> usize {
        self.assignment.len()
    }

    /// Build from a given assignment by averaging member hours of a physical
    /// feature matrix (hour × feature).
    pub fn from_assignment(
        assignment: Vec<usize>,
        num_states: usize,
        physical: &ndarray::Array2<T>,
        num_nodes: usize,
        num_storage: usize,
        seed: u64,
    ) -> Self {
        let dim = physical.ncols();
        let mut sums = vec![vec![T::zero(); dim]; num_states];
        let mut durations = vec![0usize; num_states];
        for (h, &s) in assignment.iter().enumerate() {
            durations[s] += 1;
            for j in 0..dim {
                sums[s][j] += physical[[h, j]];
            }
        }
        let centroids = sums
            .into_iter()
            .zip(&durations)
            .map(|(row, &d)| {
                let inv = T::one() / T::of(d.max(1) as f64);
                row.into_iter().map(|v| v * inv).collect()
            })
            .collect();
        Self {
            num_states,
            num_nodes,
            num_storage,
            assignment,
            centroids,
            durations,
            seed,
        }
    }
}

/// k-means over hourly feature points; states are numbered by first
/// appearance in time.
pub fn cluster_states<T: Scalar>(
    features: &NormalizedFeatures<T>,
    num_nodes: usize,
    num_storage: usize,
    num_states: usize,
    seed: u64,
) -> Result<StateClustering<T>, ClusterError> {
    let result = kmeans(features.values.view(), num_states, seed)?;
    let (assignment, order) = relabel(&result.assignment, num_states);
    let mut durations = vec![0usize; num_states];
    for &s in &assignment {
        durations[s] += 1;
    }
    let centroids = order
        .iter()
        .map(|&old| {
            result
                .centroids
                .row(old)
                .iter()
                .enumerate()
                .map(|(j, &v)| features.denormalize(j, v))
                .collect()
        })
        .collect();
    Ok(StateClustering {
        num_states,
        num_nodes,
        num_storage,
        assignment,
        centroids,
        durations,
        seed,
    })
}

/// Days grouped around real medoid days.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepPeriodClustering {
    pub num_rp: usize,
    /// day → representative period (the cluster indices vector)
    pub day_assignment: Vec<usize>,
    /// Day index of each representative period's medoid.
    pub medoid_days: Vec<usize>,
    /// Number of days each representative period stands for.
    pub weights: Vec<u32>,
    pub periods_per_rp: usize,
    pub seed: u64,
}

impl RepPeriodClustering {
    pub fn from_assignment(
        day_assignment: Vec<usize>,
        medoid_days: Vec<usize>,
        seed: u64,
    ) -> Self {
        let num_rp = medoid_days.len();
        let mut weights = vec![0u32; num_rp];
        for &r in &day_assignment {
            weights[r] += 1;
        }
        Self {
            num_rp,
            day_assignment,
            medoid_days,
            weights,
            periods_per_rp: HOURS_PER_DAY,
            seed,
        }
    }

    pub fn num_days(&self) -> usize {
        self.day_assignment.len()
    }

    pub fn horizon_hours(&self) -> usize {
        self.num_days() * self.periods_per_rp
    }

    /// Representative period of real hour `hour` (0-based).
    pub fn rp_of_hour(&self, hour: usize) -> usize {
        self.day_assignment[hour / self.periods_per_rp]
    }

    /// Real hour of the medoid day that stands in for `hour`.
    pub fn mapped_hour(&self, hour: usize) -> usize {
        let rp = self.rp_of_hour(hour);
        self.medoid_days[rp] * self.periods_per_rp + hour % self.periods_per_rp
    }

    /// Index of `hour` in the concatenated representative periods
    /// (`rp * periods_per_rp + offset`).
    pub fn rep_index(&self, hour: usize) -> usize {
        self.rp_of_hour(hour) * self.periods_per_rp + hour % self.periods_per_rp
    }

    /// Real hours of the medoid day of `rp`.
    pub fn rep_hours(&self, rp: usize) -> std::ops::Range<usize> {
        let start = self.medoid_days[rp] * self.periods_per_rp;
        start..start + self.periods_per_rp
    }

    /// Weight of `rp` in hours.
    pub fn weight_hours(&self, rp: usize) -> usize {
        self.weights[rp] as usize * self.periods_per_rp
    }
}

/// k-medoids over day vectors (24 consecutive hourly feature vectors).
pub fn cluster_days<T: Scalar>(
    features: &NormalizedFeatures<T>,
    num_rp: usize,
    seed: u64,
) -> Result<RepPeriodClustering, ClusterError> {
    let days = features.day_vectors();
    let result = kmedoids(days.view(), num_rp, seed)?;
    let (assignment, order) = relabel(&result.assignment, num_rp);
    let medoids = order.iter().map(|&old| result.medoids[old]).collect();
    Ok(RepPeriodClustering::from_assignment(assignment, medoids, seed))
}

/// Everything the reduced formulations need, serializable so models can be
/// rebuilt without re-clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationArtifacts {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<StateClustering<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_matrices: Option<TransitionMatrices>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rep_periods: Option<RepPeriodClustering>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rp_transitions: Option<TransitionCounts>,
}

impl AggregationArtifacts {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifacts serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ClusterError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClusterError> {
        std::fs::write(path, self.to_json()).map_err(|source| ClusterError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ClusterError> {
        let text = std::fs::read_to_string(path).map_err(|source| ClusterError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}
