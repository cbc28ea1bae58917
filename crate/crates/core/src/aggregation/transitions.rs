//! Chronology bookkeeping between clustered periods.
//!
//! Hours are 1-based in the checkpoint sets (`k = P` is the last hour), while
//! assignment vectors are 0-based slices.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ClusterError;

/// Sparse square matrix of transition counts `from → to`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionCounts {
    pub size: usize,
    entries: BTreeMap<(usize, usize), u32>,
}

impl TransitionCounts {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            entries: BTreeMap::new(),
        }
    }

    pub fn get(&self, from: usize, to: usize) -> u32 {
        self.entries.get(&(from, to)).copied().unwrap_or(0)
    }

    pub fn add(&mut self, from: usize, to: usize, count: u32) {
        if count > 0 {
            *self.entries.entry((from, to)).or_default() += count;
        }
    }

    /// Non-zero entries in `(from, to)` order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), u32)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn nonzero(&self) -> usize {
        self.entries.len()
    }

    pub fn total(&self) -> u64 {
        self.entries.values().map(|&v| v as u64).sum()
    }

    /// `self − earlier`, entrywise; `None` if any entry would go negative.
    pub fn checked_sub(&self, earlier: &Self) -> Option<Self> {
        let mut out = self.clone();
        for ((a, b), v) in earlier.iter() {
            let cur = out.entries.get_mut(&(a, b))?;
            *cur = cur.checked_sub(v)?;
            if *cur == 0 {
                out.entries.remove(&(a, b));
            }
        }
        Some(out)
    }

    pub fn sum<'a>(size: usize, mats: impl IntoIterator<Item = &'a Self>) -> Self {
        let mut out = Self::new(size);
        for m in mats {
            for ((a, b), v) in m.iter() {
                out.add(a, b, v);
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct CountsRepr {
    size: usize,
    /// `[from, to, count]`
    entries: Vec<[u64; 3]>,
}

impl Serialize for TransitionCounts {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CountsRepr {
            size: self.size,
            entries: self
                .iter()
                .map(|((a, b), v)| [a as u64, b as u64, v as u64])
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TransitionCounts {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = CountsRepr::deserialize(d)?;
        let mut out = Self::new(repr.size);
        for [a, b, v] in repr.entries {
            out.add(a as usize, b as usize, v as u32);
        }
        Ok(out)
    }
}

/// `N[s][s']`: number of hours `p` with `state(p) = s` and `state(p+1) = s'`,
/// self-transitions included.
pub fn build_transition_matrix(assignment: &[usize], size: usize) -> TransitionCounts {
    let mut n = TransitionCounts::new(size);
    for w in assignment.windows(2) {
        n.add(w[0], w[1], 1);
    }
    n
}

/// Cumulative transition counts up to each checkpoint: `F_k` counts the
/// consecutive pairs `(p, p+1)` with `p + 1 ≤ k`.
pub fn build_frequency_matrices(
    assignment: &[usize],
    size: usize,
    checkpoints: &[usize],
) -> Vec<TransitionCounts> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut running = TransitionCounts::new(size);
    let mut next_pair = 0; // 0-based index p of the next pair (p, p+1)
    for &k in checkpoints {
        // pair (p, p+1) in 1-based hours is (i+1, i+2) for slice index i
        while next_pair + 2 <= k && next_pair + 1 < assignment.len() {
            running.add(assignment[next_pair], assignment[next_pair + 1], 1);
            next_pair += 1;
        }
        out.push(running.clone());
    }
    out
}

/// Per-window counts: the first window keeps `F_{k1}`, later windows the
/// difference to the previous checkpoint.
pub fn build_reduced_frequency_matrices(frequency: &[TransitionCounts]) -> Vec<TransitionCounts> {
    let mut out = Vec::with_capacity(frequency.len());
    for (i, f) in frequency.iter().enumerate() {
        if i == 0 {
            out.push(f.clone());
        } else {
            out.push(
                f.checked_sub(&frequency[i - 1])
                    .expect("frequency matrices are cumulative"),
            );
        }
    }
    out
}

/// Day-to-day cluster transitions.
pub fn build_rp_transition_matrix(day_assignment: &[usize], size: usize) -> TransitionCounts {
    build_transition_matrix(day_assignment, size)
}

/// `{M, 2M, ...}` with the horizon end always included.
pub fn default_checkpoints(horizon: usize, window: usize) -> Result<Vec<usize>, ClusterError> {
    if window == 0 || window > horizon {
        return Err(ClusterError::BadWindow { window, horizon });
    }
    let mut ks: Vec<usize> = (1..=horizon / window).map(|i| i * window).collect();
    if ks.last() != Some(&horizon) {
        ks.push(horizon);
    }
    Ok(ks)
}

/// Transition bookkeeping for the state models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrices {
    pub transitions: TransitionCounts,
    /// 1-based hours at which storage levels are checked; the last is `P`.
    pub checkpoints: Vec<usize>,
    pub frequency: Vec<TransitionCounts>,
    pub reduced_frequency: Vec<TransitionCounts>,
    /// Spacing used to build the checkpoint grid, hours.
    pub window: usize,
}

impl TransitionMatrices {
    pub fn build(assignment: &[usize], size: usize, window: usize) -> Result<Self, ClusterError> {
        let checkpoints = default_checkpoints(assignment.len(), window)?;
        Ok(Self::with_checkpoints(assignment, size, checkpoints, window))
    }

    pub fn with_checkpoints(
        assignment: &[usize],
        size: usize,
        checkpoints: Vec<usize>,
        window: usize,
    ) -> Self {
        let frequency = build_frequency_matrices(assignment, size, &checkpoints);
        let reduced_frequency = build_reduced_frequency_matrices(&frequency);
        Self {
            transitions: build_transition_matrix(assignment, size),
            checkpoints,
            frequency,
            reduced_frequency,
            window,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_chain() {
        let n = build_transition_matrix(&[0, 0, 0, 0], 1);
        assert_eq!(n.get(0, 0), 3);
        assert_eq!(n.nonzero(), 1);
    }

    #[test]
    fn enumerated_chain() {
        // [1,1,2,2,1]
        let n = build_transition_matrix(&[0, 0, 1, 1, 0], 2);
        assert_eq!((n.get(0, 0), n.get(0, 1), n.get(1, 1), n.get(1, 0)), (1, 1, 1, 1));
        assert_eq!(n.total(), 4);
    }

    #[test]
    fn frequency_examples() {
        // [1,2,1]
        let a = [0, 1, 0];
        let f = build_frequency_matrices(&a, 2, &[2]);
        assert_eq!(f[0].get(0, 1), 1);
        assert_eq!(f[0].total(), 1);
        let f = build_frequency_matrices(&a, 2, &[1]);
        assert_eq!(f[0].total(), 0);
        let f = build_frequency_matrices(&a, 2, &[3]);
        assert_eq!(f[0], build_transition_matrix(&a, 2));
    }

    #[test]
    fn reduced_frequency_examples() {
        let a = [0, 1, 0];
        let f = build_frequency_matrices(&a, 2, &[2, 3]);
        let rfm = build_reduced_frequency_matrices(&f);
        assert_eq!(rfm[0].iter().collect::<Vec<_>>(), vec![((0, 1), 1)]);
        assert_eq!(rfm[1].iter().collect::<Vec<_>>(), vec![((1, 0), 1)]);
        let single = build_reduced_frequency_matrices(&build_frequency_matrices(&a, 2, &[3]));
        assert_eq!(single[0], build_transition_matrix(&a, 2));
    }

    #[test]
    fn rp_transitions() {
        let nrpp = build_rp_transition_matrix(&[0, 0, 0, 0, 0], 1);
        assert_eq!(nrpp.get(0, 0), 4);
        let nrpp = build_rp_transition_matrix(&[0, 1, 0, 1], 2);
        assert_eq!((nrpp.get(0, 1), nrpp.get(1, 0)), (2, 1));
        assert_eq!(nrpp.total(), 3);
    }

    #[test]
    fn checkpoint_grids() {
        let ks = default_checkpoints(8760, 168).unwrap();
        assert_eq!(ks.len(), 53);
        assert_eq!(&ks[50..], &[8568, 8736, 8760]);
        assert_eq!(default_checkpoints(48, 48).unwrap(), vec![48]);
        assert_eq!(default_checkpoints(48, 24).unwrap(), vec![24, 48]);
        assert!(default_checkpoints(48, 49).is_err());
        assert!(default_checkpoints(48, 0).is_err());
    }

    #[test]
    fn counts_serialize_as_triples() {
        let n = build_transition_matrix(&[0, 1, 1], 2);
        let json = serde_json::to_string(&n).unwrap();
        assert_eq!(json, r#"{"size":2,"entries":[[0,1,1],[1,1,1]]}"#);
        let back: TransitionCounts = serde_json::from_str(&json).unwrap();
        assert_eq!(back, n);
    }
}
