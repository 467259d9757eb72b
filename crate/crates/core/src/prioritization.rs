//! Pairwise preference aggregation.
//!
//! Residents submit "prioritize A over B" inputs. The inputs of active
//! residents form a count matrix `M[a][b]`; each chore column `b` hands its
//! mass to the chores preferred over it, in proportion to `M[a][b]`, and a
//! column with no preferences spreads uniformly. The priority distribution is
//! the stationary vector of that damped chain,
//!
//! ```text
//! π = (1 − d)/n · 1 + d · P π
//! ```
//!
//! blended afterwards with a uniform floor so that every chore keeps accruing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::{ChoreId, ResidentId};
use crate::scalar::Scalar;
use crate::time::Timestamp;

pub const TOLERANCE: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceInput {
    pub resident: ResidentId,
    pub preferred: ChoreId,
    pub deprioritized: ChoreId,
    pub at: Timestamp,
}

/// Every resident's latest input per unordered chore pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PreferenceBook {
    inputs: BTreeMap<(ResidentId, ChoreId, ChoreId), PreferenceInput>,
}

impl PreferenceBook {
    fn key(input: &PreferenceInput) -> (ResidentId, ChoreId, ChoreId) {
        let (lo, hi) = if input.preferred < input.deprioritized {
            (input.preferred, input.deprioritized)
        } else {
            (input.deprioritized, input.preferred)
        };
        (input.resident.clone(), lo, hi)
    }

    /// Newest input wins for a resident's pair.
    pub fn submit(&mut self, input: PreferenceInput) {
        self.inputs.insert(Self::key(&input), input);
    }

    pub fn inputs(&self) -> impl Iterator<Item = &PreferenceInput> {
        self.inputs.values()
    }

    pub fn matrix(&self, chores: &[ChoreId], residents: &BTreeSet<ResidentId>) -> PreferenceMatrix {
        PreferenceMatrix::from_inputs(chores, self.inputs().filter(|i| residents.contains(&i.resident)))
    }
}

/// `counts[a][b]` = number of residents currently preferring chore `a` over `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceMatrix {
    pub chores: Vec<ChoreId>,
    pub counts: Vec<Vec<u32>>,
}

impl PreferenceMatrix {
    pub fn empty(chores: &[ChoreId]) -> Self {
        let n = chores.len();
        PreferenceMatrix {
            chores: chores.to_vec(),
            counts: vec![vec![0; n]; n],
        }
    }

    /// Inputs naming chores outside `chores` are ignored.
    pub fn from_inputs<'a>(chores: &[ChoreId], inputs: impl IntoIterator<Item = &'a PreferenceInput>) -> Self {
        let mut m = Self::empty(chores);
        let index: BTreeMap<ChoreId, usize> = chores.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        for input in inputs {
            if let (Some(&a), Some(&b)) = (index.get(&input.preferred), index.get(&input.deprioritized)) {
                if a != b {
                    m.counts[a][b] += 1;
                }
            }
        }
        m
    }

    /// Matrix over synthetic chore ids `0..n`.
    pub fn from_counts(counts: Vec<Vec<u32>>) -> Self {
        let chores = (0..counts.len() as u64).map(ChoreId).collect();
        PreferenceMatrix { chores, counts }
    }

    pub fn len(&self) -> usize {
        self.chores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chores.is_empty()
    }

    /// Column-stochastic transition matrix, `p[a][b]` = mass moving from `b` to `a`.
    pub fn transition<F: Scalar>(&self) -> Vec<Vec<F>> {
        let n = self.len();
        let mut p = vec![vec![F::zero(); n]; n];
        for b in 0..n {
            let col: u32 = (0..n).filter(|&a| a != b).map(|a| self.counts[a][b]).sum();
            for (a, row) in p.iter_mut().enumerate() {
                row[b] = if col == 0 {
                    F::one() / F::of_usize(n)
                } else if a == b {
                    F::zero()
                } else {
                    F::from_u32(self.counts[a][b]).unwrap() / F::from_u32(col).unwrap()
                };
            }
        }
        p
    }
}

/// Weights over active chores; always sums to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityDistribution<F> {
    pub weights: BTreeMap<ChoreId, F>,
}

impl<F: Scalar> Default for PriorityDistribution<F> {
    fn default() -> Self {
        PriorityDistribution {
            weights: BTreeMap::new(),
        }
    }
}

impl<F: Scalar> PriorityDistribution<F> {
    pub fn get(&self, chore: ChoreId) -> F {
        self.weights.get(&chore).copied().unwrap_or_else(F::zero)
    }

    pub fn total(&self) -> F {
        self.weights.values().fold(F::zero(), |acc, w| acc + *w)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Damped stationary distribution of the preference chain by power
/// iteration (L1 tolerance `1e-9`, at most 10 000 sweeps), without floor.
pub fn stationary<F: Scalar>(matrix: &PreferenceMatrix, damping: F) -> Result<Vec<F>> {
    let n = matrix.len();
    if n == 0 {
        return Err(EngineError::NoChores);
    }
    if !(damping > F::zero() && damping < F::one()) {
        return Err(EngineError::InvalidPriorityParams("damping must be in (0, 1)".into()));
    }
    let p = matrix.transition::<F>();
    let nf = F::of_usize(n);
    let teleport = (F::one() - damping) / nf;
    let tol = F::of(TOLERANCE);
    let mut pi = vec![F::one() / nf; n];
    let mut next = vec![F::zero(); n];
    for _ in 0..MAX_ITERATIONS {
        for (a, slot) in next.iter_mut().enumerate() {
            let mut acc = F::zero();
            for (b, &mass) in pi.iter().enumerate() {
                acc += p[a][b] * mass;
            }
            *slot = teleport + damping * acc;
        }
        let diff = pi
            .iter()
            .zip(&next)
            .fold(F::zero(), |acc, (x, y)| acc + (*x - *y).abs());
        std::mem::swap(&mut pi, &mut next);
        if diff < tol {
            break;
        }
    }
    normalize(&mut pi);
    Ok(pi)
}

/// Stationary distribution blended with a uniform floor:
/// `w = floor + (1 − n·floor)·π`, renormalized.
pub fn compute_priorities<F: Scalar>(matrix: &PreferenceMatrix, damping: F, floor: F) -> Result<PriorityDistribution<F>> {
    let n = F::of_usize(matrix.len());
    if floor < F::zero() || (!matrix.is_empty() && n * floor >= F::one()) {
        return Err(EngineError::InvalidPriorityParams("floor must satisfy 0 <= n·floor < 1".into()));
    }
    let pi = stationary(matrix, damping)?;
    let scale = F::one() - n * floor;
    let mut w: Vec<F> = pi.into_iter().map(|x| floor + scale * x).collect();
    normalize(&mut w);
    Ok(PriorityDistribution {
        weights: matrix.chores.iter().copied().zip(w).collect(),
    })
}

fn normalize<F: Scalar>(v: &mut [F]) {
    let total = v.iter().fold(F::zero(), |acc, x| acc + *x);
    if total > F::zero() {
        for x in v.iter_mut() {
            *x /= total;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_chore(a_over_b: u32, b_over_a: u32) -> PreferenceMatrix {
        PreferenceMatrix::from_counts(vec![vec![0, a_over_b], vec![b_over_a, 0]])
    }

    #[test]
    fn no_preferences_is_uniform() {
        let m = PreferenceMatrix::from_counts(vec![vec![0; 5]; 5]);
        let d = compute_priorities::<f64>(&m, 0.85, 0.05).unwrap();
        for w in d.weights.values() {
            assert!((w - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn two_chore_worked_example() {
        // Closed form: π_B = 0.5 / 1.425 from the 2×2 fixed point.
        let d = compute_priorities::<f64>(&two_chore(1, 0), 0.85, 0.0).unwrap();
        let b = 0.5 / 1.425;
        assert!((d.get(ChoreId(1)) - b).abs() < 1e-9);
        assert!((d.get(ChoreId(0)) - (1.0 - b)).abs() < 1e-9);
        assert!((d.get(ChoreId(0)) - 0.649).abs() < 1e-3);
    }

    #[test]
    fn works_in_single_precision() {
        let d = compute_priorities::<f32>(&two_chore(1, 0), 0.85, 0.0).unwrap();
        assert!((d.get(ChoreId(0)) - 0.649).abs() < 1e-3);
        assert!((d.total() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn symmetric_disagreement_is_uniform() {
        let d = compute_priorities::<f64>(&two_chore(1, 1), 0.85, 0.0).unwrap();
        assert!((d.get(ChoreId(0)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_chore_gets_everything() {
        let m = PreferenceMatrix::from_counts(vec![vec![0]]);
        let d = compute_priorities::<f64>(&m, 0.85, 0.25).unwrap();
        assert_eq!(d.get(ChoreId(0)), 1.0);
    }

    #[test]
    fn parameter_errors() {
        let empty = PreferenceMatrix::from_counts(vec![]);
        assert_eq!(compute_priorities::<f64>(&empty, 0.85, 0.0), Err(EngineError::NoChores));
        assert!(compute_priorities::<f64>(&two_chore(0, 0), 1.0, 0.0).is_err());
        assert!(compute_priorities::<f64>(&two_chore(0, 0), 0.85, 0.5).is_err());
    }

    #[test]
    fn floor_is_respected() {
        let m = PreferenceMatrix::from_counts(vec![vec![0, 3, 3], vec![0, 0, 3], vec![0, 0, 0]]);
        let floor = 0.25 / 3.0;
        let d = compute_priorities::<f64>(&m, 0.85, floor).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-12);
        assert!(d.weights.values().all(|w| *w >= floor - 1e-12));
    }

    #[test]
    fn newest_input_wins_per_pair() {
        let r = ResidentId::new("r1").unwrap();
        let mut book = PreferenceBook::default();
        book.submit(PreferenceInput {
            resident: r.clone(),
            preferred: ChoreId(0),
            deprioritized: ChoreId(1),
            at: Timestamp(1),
        });
        book.submit(PreferenceInput {
            resident: r.clone(),
            preferred: ChoreId(1),
            deprioritized: ChoreId(0),
            at: Timestamp(2),
        });
        let m = book.matrix(&[ChoreId(0), ChoreId(1)], &[r].into_iter().collect());
        assert_eq!(m.counts, vec![vec![0, 0], vec![1, 0]]);
    }

    #[test]
    fn inactive_residents_and_retired_chores_are_ignored() {
        let mut book = PreferenceBook::default();
        for (who, a, b) in [("r1", 0, 1), ("r2", 0, 1), ("r1", 2, 0)] {
            book.submit(PreferenceInput {
                resident: ResidentId::new(who).unwrap(),
                preferred: ChoreId(a),
                deprioritized: ChoreId(b),
                at: Timestamp(0),
            });
        }
        let active = [ResidentId::new("r1").unwrap()].into_iter().collect();
        let m = book.matrix(&[ChoreId(0), ChoreId(1)], &active);
        assert_eq!(m.counts, vec![vec![0, 1], vec![0, 0]]);
    }
}
