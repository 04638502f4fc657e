//! Subset-spread fusion of redundant measurement stacks.
//!
//! Given `N` readings of the same scalar state, at most `q` of which are
//! corrupted by arbitrary values, the estimator enumerates every subset of
//! size `N - q`, measures each subset's spread (the largest deviation of a
//! member from the subset mean), and returns the mean of the subset with the
//! smallest spread. When `2q < N` and every honest reading is within `gamma`
//! of the truth, the estimate is within `3 * gamma` of the truth regardless
//! of what the corrupted readings contain.
//!
//! The module also provides the matching negative result: when `2q >= N`,
//! [`construct_ambiguity`] produces two different states with attack vectors
//! of support at most `q` that corrupt a noise-free stack into identical
//! observations, so no estimator can tell them apart.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::stack::{MeasurementStack, StackError, SubsetIndex};

/// Largest stack size accepted by the default fusion entry points.
///
/// Subset enumeration visits `C(N, N - q)` subsets; the cap keeps that cost
/// explicit. Use [`fuse_capped`] or [`select_min_spread_subset_capped`] to
/// raise it deliberately.
pub const DEFAULT_STACK_CAP: usize = 24;

/// Errors from the fusion operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FusionError {
    /// A subset references a position outside the stack.
    #[error("subset position {position} out of range for a stack of {len} readings")]
    InvalidSubset { position: usize, len: usize },
    /// Fewer than three readings: there is no redundancy to exploit.
    #[error("insufficient redundancy: got {n} readings, need at least 3")]
    InsufficientRedundancy { n: usize },
    /// The attack budget is too large for the stack: `2q >= N`.
    #[error("not reconstructible: {q} possible attacks among {n} readings (need 2q < N)")]
    NotReconstructible { n: usize, q: usize },
    /// The stack exceeds the subset-enumeration cap.
    #[error("stack of {n} readings exceeds the enumeration cap of {cap}")]
    StackTooLarge { n: usize, cap: usize },
    /// Ambiguity was requested in the regime where the state is
    /// reconstructible (`2q < N`), so no ambiguity exists.
    #[error("no ambiguity exists: {q} attacks among {n} readings is reconstructible (2q < N)")]
    ReconstructibleRegime { n: usize, q: usize },
    /// Ambiguity needs two distinct states.
    #[error("ambiguity requires two distinct states")]
    IdenticalStates,
    /// The requested support size exceeds the stack length.
    #[error("attack budget {q} exceeds the stack length {n}")]
    BudgetExceedsStack { n: usize, q: usize },
    /// Invalid stack or subset construction.
    #[error(transparent)]
    Stack(#[from] StackError),
}

/// Result of fusing one measurement stack.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutcome<S> {
    /// Mean of the selected subset: the secure estimate.
    pub estimate: S,
    /// The selected minimum-spread subset of size `N - q`.
    pub selected: SubsetIndex,
    /// Spread of the selected subset (max deviation of a member from the
    /// subset mean).
    pub spread: S,
    /// Attack budget the fusion ran with.
    pub q_used: usize,
    /// Whether `q_used` is inside the reconstructible regime (`2q < N`).
    /// Always true for outcomes returned by [`fuse`].
    pub reconstructible: bool,
}

/// Two indistinguishable explanations of the same corrupted stack.
///
/// `state + attack` and `alt_state + alt_attack` agree componentwise, both
/// attack vectors have support of size at most `q`, and the two states
/// differ: an observer of the corrupted stack cannot recover the state.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityWitness<S> {
    pub state: S,
    pub alt_state: S,
    pub attack: Vec<S>,
    pub alt_attack: Vec<S>,
}

impl<S: Scalar> AmbiguityWitness<S> {
    /// The stack observed under the first explanation (zero noise).
    pub fn corrupted(&self) -> Vec<S> {
        self.attack.iter().map(|&a| self.state + a).collect()
    }

    /// The stack observed under the second explanation (zero noise).
    pub fn alt_corrupted(&self) -> Vec<S> {
        self.alt_attack.iter().map(|&a| self.alt_state + a).collect()
    }
}

/// True iff a state measured by `n` readings can be reconstructed without
/// ambiguity when up to `q` of them are corrupted: `q < n/2` (strict).
pub fn check_reconstructible(n: usize, q: usize) -> bool {
    2 * q < n
}

fn validate_subset<S: Scalar>(
    stack: &MeasurementStack<S>,
    subset: &SubsetIndex,
) -> Result<(), FusionError> {
    let len = stack.len();
    if subset.max_position() >= len {
        return Err(FusionError::InvalidSubset {
            position: subset.max_position(),
            len,
        });
    }
    Ok(())
}

// Mean anchored at the first member: `x0 + mean(x - x0)`. Equal readings
// average to themselves exactly, so noise-free data fuses with zero error.
fn mean_of_positions<S: Scalar>(stack: &MeasurementStack<S>, positions: &[usize]) -> S {
    let first = stack.value(positions[0]).expect("validated");
    let deviation_sum = positions
        .iter()
        .fold(S::zero(), |acc, &p| acc + (stack.value(p).expect("validated") - first));
    first + deviation_sum / S::from_usize(positions.len()).expect("cardinality fits the scalar")
}

fn spread_of_positions<S: Scalar>(stack: &MeasurementStack<S>, positions: &[usize], mean: S) -> S {
    positions.iter().fold(S::zero(), |acc, &p| {
        let dev = (mean - stack.value(p).expect("validated")).abs();
        if dev > acc {
            dev
        } else {
            acc
        }
    })
}

/// Mean of the readings selected by `subset`.
pub fn subset_mean<S: Scalar>(
    stack: &MeasurementStack<S>,
    subset: &SubsetIndex,
) -> Result<S, FusionError> {
    validate_subset(stack, subset)?;
    Ok(mean_of_positions(stack, subset.members()))
}

/// Largest absolute deviation of a selected reading from the subset mean.
pub fn subset_spread<S: Scalar>(
    stack: &MeasurementStack<S>,
    subset: &SubsetIndex,
) -> Result<S, FusionError> {
    validate_subset(stack, subset)?;
    let mean = mean_of_positions(stack, subset.members());
    Ok(spread_of_positions(stack, subset.members(), mean))
}

/// Advances `positions` to the next `k`-combination of `0..n` in
/// lexicographic order. Returns false when the last combination was reached.
fn next_combination(positions: &mut [usize], n: usize) -> bool {
    let k = positions.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if positions[i] < n - k + i {
            positions[i] += 1;
            for j in i + 1..k {
                positions[j] = positions[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn select_full<S: Scalar>(
    stack: &MeasurementStack<S>,
    q: usize,
    cap: usize,
) -> Result<(SubsetIndex, S, S), FusionError> {
    let n = stack.len();
    if n < 3 {
        return Err(FusionError::InsufficientRedundancy { n });
    }
    if !check_reconstructible(n, q) {
        return Err(FusionError::NotReconstructible { n, q });
    }
    if n > cap {
        return Err(FusionError::StackTooLarge { n, cap });
    }

    let k = n - q;
    let mut positions: Vec<usize> = (0..k).collect();
    let mut best: Option<(S, S, Vec<usize>)> = None;
    loop {
        let mean = mean_of_positions(stack, &positions);
        let spread = spread_of_positions(stack, &positions, mean);
        // Strict `<` keeps the first (lexicographically smallest) argmin.
        // Comparison is exact: ties resolve by enumeration order.
        let improved = match &best {
            None => true,
            Some((best_spread, _, _)) => spread < *best_spread,
        };
        if improved {
            best = Some((spread, mean, positions.clone()));
        }
        if !next_combination(&mut positions, n) {
            break;
        }
    }

    let (spread, mean, members) = best.expect("at least one subset exists");
    let selected = SubsetIndex::new(members)?;
    Ok((selected, mean, spread))
}

/// The subset of size `N - q` with the smallest spread, enumerating all
/// `C(N, N - q)` subsets in lexicographic order; ties resolve to the
/// lexicographically smallest member list.
pub fn select_min_spread_subset<S: Scalar>(
    stack: &MeasurementStack<S>,
    q: usize,
) -> Result<SubsetIndex, FusionError> {
    select_min_spread_subset_capped(stack, q, DEFAULT_STACK_CAP)
}

/// [`select_min_spread_subset`] with an explicit enumeration cap.
pub fn select_min_spread_subset_capped<S: Scalar>(
    stack: &MeasurementStack<S>,
    q: usize,
    cap: usize,
) -> Result<SubsetIndex, FusionError> {
    select_full(stack, q, cap).map(|(subset, _, _)| subset)
}

/// Fuses a stack under attack budget `q`: estimate, selected subset, spread.
pub fn fuse<S: Scalar>(
    stack: &MeasurementStack<S>,
    q: usize,
) -> Result<FusionOutcome<S>, FusionError> {
    fuse_capped(stack, q, DEFAULT_STACK_CAP)
}

/// [`fuse`] with an explicit enumeration cap.
pub fn fuse_capped<S: Scalar>(
    stack: &MeasurementStack<S>,
    q: usize,
    cap: usize,
) -> Result<FusionOutcome<S>, FusionError> {
    let (selected, estimate, spread) = select_full(stack, q, cap)?;
    Ok(FusionOutcome {
        estimate,
        selected,
        spread,
        q_used: q,
        reconstructible: check_reconstructible(stack.len(), q),
    })
}

/// Builds an explicit ambiguity for the non-reconstructible regime
/// (`2q >= n`): two distinct states and two attack vectors, each supported
/// on at most `q` positions, whose corrupted noise-free stacks coincide.
///
/// The supports are the first `q` positions for `attack` and the last `q`
/// positions for `alt_attack`; together they cover the whole stack.
pub fn construct_ambiguity<S: Scalar>(
    n: usize,
    q: usize,
    state: S,
    alt_state: S,
) -> Result<AmbiguityWitness<S>, FusionError> {
    if check_reconstructible(n, q) {
        return Err(FusionError::ReconstructibleRegime { n, q });
    }
    if q > n {
        return Err(FusionError::BudgetExceedsStack { n, q });
    }
    if state == alt_state {
        return Err(FusionError::IdenticalStates);
    }

    // Supports: W = {0..q}, W_alt = {n-q..n}; overlap I = {n-q..q}.
    let overlap_start = n - q;
    let mut attack = vec![S::zero(); n];
    let mut alt_attack = vec![S::zero(); n];
    for j in 0..n {
        let in_first = j < q;
        let in_second = j >= overlap_start;
        match (in_first, in_second) {
            // Only the first support: the first explanation absorbs the gap.
            (true, false) => {
                attack[j] = alt_state - state;
            }
            // Only the second support: the second explanation absorbs it.
            (false, true) => {
                alt_attack[j] = state - alt_state;
            }
            // Overlap: both explanations rewrite the reading outright.
            (true, true) => {
                attack[j] = alt_state;
                alt_attack[j] = state;
            }
            (false, false) => unreachable!("supports cover the stack when 2q >= n"),
        }
    }

    Ok(AmbiguityWitness {
        state,
        alt_state,
        attack,
        alt_attack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stack::{Channel, VehicleId};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stack(values: &[f64]) -> MeasurementStack<f64> {
        let readings = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (VehicleId(i as u32 + 1), v))
            .collect();
        MeasurementStack::new(VehicleId(1), 0, Channel::Lateral, readings).unwrap()
    }

    fn subset(members: &[usize]) -> SubsetIndex {
        SubsetIndex::new(members.to_vec()).unwrap()
    }

    #[test]
    fn reconstructible_boundary() {
        assert!(check_reconstructible(5, 2));
        assert!(!check_reconstructible(4, 2));
        assert!(check_reconstructible(3, 1));
        assert!(!check_reconstructible(3, 2));
        assert!(check_reconstructible(1, 0));
    }

    #[test]
    fn subset_mean_examples() {
        let s = stack(&[1.0, 1.1, 100.0]);
        assert_eq!(subset_mean(&s, &subset(&[0])).unwrap(), 1.0);
        assert_abs_diff_eq!(
            subset_mean(&s, &subset(&[0, 1])).unwrap(),
            1.05,
            epsilon = 1e-12
        );
        let constant = stack(&[4.2, 4.2, 4.2]);
        assert_eq!(subset_mean(&constant, &subset(&[0, 2])).unwrap(), 4.2);
    }

    #[test]
    fn subset_spread_examples() {
        let s = stack(&[1.0, 1.1, 100.0]);
        assert_abs_diff_eq!(
            subset_spread(&s, &subset(&[0, 1])).unwrap(),
            0.05,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            subset_spread(&s, &subset(&[0, 2])).unwrap(),
            49.5,
            epsilon = 1e-12
        );
        let pair = stack(&[7.0, 7.0, 7.0]);
        assert_eq!(subset_spread(&pair, &subset(&[0, 1])).unwrap(), 0.0);
    }

    #[test]
    fn invalid_subset_reported() {
        let s = stack(&[1.0, 2.0]);
        let err = subset_mean(&s, &subset(&[0, 5])).unwrap_err();
        assert_eq!(err, FusionError::InvalidSubset { position: 5, len: 2 });
    }

    #[test]
    fn selects_min_spread_subset() {
        let s = stack(&[1.0, 1.1, 100.0]);
        let selected = select_min_spread_subset(&s, 1).unwrap();
        assert_eq!(selected.members(), &[0, 1]);

        let tied = stack(&[5.0, 5.0, 5.0, 5.0, 5.0]);
        let selected = select_min_spread_subset(&tied, 2).unwrap();
        assert_eq!(selected.members(), &[0, 1, 2]);

        let mixed = stack(&[1.5, 1.49, 1.51, 9.0, -7.0]);
        let selected = select_min_spread_subset(&mixed, 2).unwrap();
        assert_eq!(selected.members(), &[0, 1, 2]);
    }

    #[test]
    fn selection_errors() {
        let s = stack(&[1.0, 2.0]);
        assert_eq!(
            select_min_spread_subset(&s, 0).unwrap_err(),
            FusionError::InsufficientRedundancy { n: 2 }
        );
        let s = stack(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            select_min_spread_subset(&s, 2).unwrap_err(),
            FusionError::NotReconstructible { n: 4, q: 2 }
        );
        assert_eq!(
            select_min_spread_subset_capped(&s, 1, 3).unwrap_err(),
            FusionError::StackTooLarge { n: 4, cap: 3 }
        );
    }

    #[test]
    fn fuse_examples() {
        let s = stack(&[1.0, 1.1, 100.0]);
        let out = fuse(&s, 1).unwrap();
        assert_abs_diff_eq!(out.estimate, 1.05, epsilon = 1e-12);
        assert_eq!(out.selected.members(), &[0, 1]);
        assert_abs_diff_eq!(out.spread, 0.05, epsilon = 1e-12);
        assert_eq!(out.q_used, 1);
        assert!(out.reconstructible);
        assert_eq!(out.selected.len(), s.len() - out.q_used);

        let constant = stack(&[2.5; 5]);
        let out = fuse(&constant, 2).unwrap();
        assert_eq!(out.estimate, 2.5);
        assert_eq!(out.spread, 0.0);
    }

    #[test]
    fn fuse_bounds_error_under_attack() {
        // Truth 1.5, honest noise within 0.05, two arbitrary corruptions:
        // the estimate stays within 3 * 0.05 of the truth.
        let truth = 1.5;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut values = vec![
                truth + rng.gen_range(-0.01..0.01),
                truth + rng.gen_range(-0.02..0.02),
                truth + rng.gen_range(-0.03..0.03),
                truth + rng.gen_range(-0.04..0.04),
                truth + rng.gen_range(-0.05..0.05),
            ];
            let a: usize = rng.gen_range(0..5);
            let mut b: usize = rng.gen_range(0..5);
            while b == a {
                b = rng.gen_range(0..5);
            }
            values[a] += rng.gen_range(-25.0..25.0);
            values[b] += rng.gen_range(-25.0..25.0);
            let out = fuse(&stack(&values), 2).unwrap();
            assert!(
                (out.estimate - truth).abs() <= 0.15,
                "error {} above the 3*gamma bound",
                (out.estimate - truth).abs()
            );
        }
    }

    #[test]
    fn ambiguity_two_readings() {
        let w = construct_ambiguity(2, 1, 0.0, 1.0).unwrap();
        assert_eq!(w.attack, vec![1.0, 0.0]);
        assert_eq!(w.alt_attack, vec![0.0, -1.0]);
        assert_eq!(w.corrupted(), vec![1.0, 0.0]);
        assert_eq!(w.alt_corrupted(), vec![1.0, 0.0]);
    }

    #[test]
    fn ambiguity_even_split() {
        let w = construct_ambiguity(4, 2, 0.0, 2.0).unwrap();
        assert_eq!(w.corrupted(), w.alt_corrupted());
        let support = |v: &[f64]| v.iter().filter(|x| **x != 0.0).count();
        assert!(support(&w.attack) <= 2);
        assert!(support(&w.alt_attack) <= 2);
    }

    #[test]
    fn ambiguity_overlap_regime() {
        // q > n/2 forces the two supports to overlap.
        let w = construct_ambiguity(3, 2, -1.0, 4.0).unwrap();
        assert_eq!(w.corrupted(), w.alt_corrupted());
        assert_ne!(w.state, w.alt_state);
    }

    #[test]
    fn ambiguity_errors() {
        assert_eq!(
            construct_ambiguity(5, 2, 0.0, 1.0).unwrap_err(),
            FusionError::ReconstructibleRegime { n: 5, q: 2 }
        );
        assert_eq!(
            construct_ambiguity(2, 3, 0.0, 1.0).unwrap_err(),
            FusionError::BudgetExceedsStack { n: 2, q: 3 }
        );
        assert_eq!(
            construct_ambiguity(2, 1, 1.0, 1.0).unwrap_err(),
            FusionError::IdenticalStates
        );
    }

    #[test]
    fn attack_free_subsets_survive_counting() {
        // Among every (n - q)-subset of a stack with at most q corrupted
        // readings, at least n - 2q readings are attack-free. Exhaustive for
        // n <= 7.
        for n in 3..=7usize {
            for q in 0..=(n - 1) / 2 {
                let k = n - q;
                // Corrupt the first q positions; enumerate all k-subsets.
                let mut positions: Vec<usize> = (0..k).collect();
                loop {
                    let attack_free = positions.iter().filter(|&&p| p >= q).count();
                    assert!(attack_free >= n - 2 * q);
                    if !next_combination(&mut positions, n) {
                        break;
                    }
                }
            }
        }
    }

    proptest! {
        // Affine maps of all readings leave the selected subset unchanged
        // and map the estimate affinely.
        #[test]
        fn affine_equivariance(
            values in prop::collection::vec(-1e3..1e3f64, 3..9),
            alpha in prop_oneof![0.25..4.0f64, -4.0..-0.25f64],
            beta in -1e3..1e3f64,
            q_seed in 0usize..4,
        ) {
            let n = values.len();
            let q = q_seed % ((n - 1) / 2 + 1);
            let base = stack(&values);
            let mapped_values: Vec<f64> = values.iter().map(|v| alpha * v + beta).collect();
            let mapped = stack(&mapped_values);

            let out = fuse(&base, q).unwrap();
            let out_mapped = fuse(&mapped, q).unwrap();

            prop_assert_eq!(out.selected.members(), out_mapped.selected.members());
            let expected = alpha * out.estimate + beta;
            let scale = 1.0 + expected.abs();
            prop_assert!((out_mapped.estimate - expected).abs() / scale < 1e-9);
        }

        // Relabeling sources permutes positions but selects the same
        // readings and the same estimate.
        #[test]
        fn relabeling_consistency(
            values in prop::collection::vec(-1e3..1e3f64, 3..9),
            shift in 1u32..100,
        ) {
            let n = values.len();
            let q = (n - 1) / 2;
            let base = stack(&values);

            // Relabel source i+1 -> ((i + shift) mod n) + 1: a rotation, so
            // ids stay distinct but canonical order changes.
            let relabeled: Vec<(VehicleId, f64)> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| (VehicleId((i as u32 + shift) % n as u32 + 1), v))
                .collect();
            let rotated =
                MeasurementStack::new(VehicleId(1), 0, Channel::Lateral, relabeled).unwrap();

            let out = fuse(&base, q).unwrap();
            let out_rot = fuse(&rotated, q).unwrap();

            let mut picked: Vec<f64> = out
                .selected
                .members()
                .iter()
                .map(|&p| base.value(p).unwrap())
                .collect();
            let mut picked_rot: Vec<f64> = out_rot
                .selected
                .members()
                .iter()
                .map(|&p| rotated.value(p).unwrap())
                .collect();
            picked.sort_by(|a, b| a.partial_cmp(b).unwrap());
            picked_rot.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assert_eq!(picked, picked_rot);
            let scale = 1.0 + out.estimate.abs();
            prop_assert!((out.estimate - out_rot.estimate).abs() / scale < 1e-12);
        }

        // Attack-free subsets of noisy readings average to within the noise
        // bound of the truth.
        #[test]
        fn attack_free_mean_within_noise_bound(
            truth in -1e3..1e3f64,
            noises in prop::collection::vec(-0.05..0.05f64, 1..9),
        ) {
            let values: Vec<f64> = noises.iter().map(|m| truth + m).collect();
            let s = stack(&values);
            let all = SubsetIndex::new((0..values.len()).collect()).unwrap();
            let mean = subset_mean(&s, &all).unwrap();
            prop_assert!((mean - truth).abs() <= 0.05 + 1e-12);
        }
    }
}
