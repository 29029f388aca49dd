//! Multi-stage evolution and the explicit sum over basis-index paths.
//!
//! A [`StageChain`] is a contiguous run of stages. Its production evaluator
//! folds stage application tick by tick. The path evaluator instead sums,
//! over every assignment of one basis index per intermediate tick, the
//! product of stage coefficients along the path: a finite, discrete sum over
//! histories. The two must agree to near machine precision, which makes the
//! (exponentially priced) path sum the cross-checking oracle for the cheap
//! evaluator.
//!
//! Ranks along a chain may only grow, except at junctions explicitly pushed
//! as reverse stages.

use alloc::vec::Vec;
use core::fmt;

use crate::basis::{BasisIndex, Rank};
use crate::labstate::Labstate;
use crate::stage::{EvolutionError, SemiUnitary};
use crate::Complex64;

/// Default ceiling on the number of enumerated paths.
pub const DEFAULT_PATH_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainError {
    Evolution(EvolutionError),
    /// Stage's source rank disagrees with the previous target rank.
    JunctionRank { stage_number: usize, expected: u32, got: u32 },
    /// Stage's source time disagrees with the previous target time.
    JunctionTime { stage_number: usize, expected: i64, got: i64 },
    /// Rank decreased at a junction not flagged as reverse.
    NonMonotoneRank { stage_number: usize, source: u32, target: u32 },
    /// Requested final index has the wrong rank for this chain.
    FinalRankMismatch { expected: u32, got: u32 },
    /// The explicit path enumeration would exceed its budget.
    PathBudgetExceeded { paths: u128, budget: u64 },
}

impl fmt::Display for ChainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ChainError::Evolution(e) => write!(f, "{e}"),
            ChainError::JunctionRank { stage_number, expected, got } => write!(
                f,
                "stage {stage_number}: source rank {got} does not meet previous target rank {expected}"
            ),
            ChainError::JunctionTime { stage_number, expected, got } => write!(
                f,
                "stage {stage_number}: source time {got} does not meet previous target time {expected}"
            ),
            ChainError::NonMonotoneRank { stage_number, source, target } => write!(
                f,
                "stage {stage_number}: rank drops from {source} to {target}; push it as a reverse stage"
            ),
            ChainError::FinalRankMismatch { expected, got } => {
                write!(f, "final index rank {got} does not match chain final rank {expected}")
            }
            ChainError::PathBudgetExceeded { paths, budget } => {
                write!(f, "path enumeration needs {paths} paths, budget is {budget}")
            }
        }
    }
}

impl core::error::Error for ChainError {}

impl From<EvolutionError> for ChainError {
    fn from(e: EvolutionError) -> Self {
        ChainError::Evolution(e)
    }
}

/// One chain entry: the stage plus whether its junction was flagged reverse.
#[derive(Debug, Clone)]
pub struct ChainLink {
    pub stage: SemiUnitary,
    pub flagged_reverse: bool,
}

/// Contiguous sequence of stages from an initial tick to a final one.
#[derive(Debug, Clone, Default)]
pub struct StageChain {
    links: Vec<ChainLink>,
}

impl StageChain {
    pub fn new() -> StageChain {
        StageChain { links: Vec::new() }
    }

    /// Appends a stage; rank must not decrease here. Use
    /// [`StageChain::push_reverse`] for the sanctioned exception.
    pub fn push(&mut self, stage: SemiUnitary) -> Result<(), ChainError> {
        self.push_inner(stage, false)
    }

    /// Appends an explicitly flagged reverse stage, exempt from rank
    /// monotonicity.
    pub fn push_reverse(&mut self, stage: SemiUnitary) -> Result<(), ChainError> {
        self.push_inner(stage, true)
    }

    fn push_inner(&mut self, stage: SemiUnitary, flagged_reverse: bool) -> Result<(), ChainError> {
        let stage_number = self.links.len() + 1;
        if let Some(last) = self.links.last() {
            let prev = &last.stage;
            if prev.target_rank() != stage.source_rank() {
                return Err(ChainError::JunctionRank {
                    stage_number,
                    expected: prev.target_rank().get(),
                    got: stage.source_rank().get(),
                });
            }
            if prev.target_time() != stage.source_time() {
                return Err(ChainError::JunctionTime {
                    stage_number,
                    expected: prev.target_time(),
                    got: stage.source_time(),
                });
            }
        }
        if !flagged_reverse && stage.target_rank() < stage.source_rank() {
            return Err(ChainError::NonMonotoneRank {
                stage_number,
                source: stage.source_rank().get(),
                target: stage.target_rank().get(),
            });
        }
        self.links.push(ChainLink { stage, flagged_reverse });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn links(&self) -> &[ChainLink] {
        &self.links
    }

    /// Final register rank given the initial state's rank (chains may be
    /// empty).
    pub fn final_rank_for(&self, initial: &Labstate) -> Rank {
        self.links.last().map(|l| l.stage.target_rank()).unwrap_or_else(|| initial.rank())
    }

    /// Left fold of stage application: the labstate at the final tick.
    pub fn evolve(&self, initial: &Labstate) -> Result<Labstate, ChainError> {
        let mut state = initial.clone();
        for link in &self.links {
            state = link.stage.apply(&state)?;
        }
        Ok(state)
    }

    /// Final amplitude at `j` via the iterated evaluator.
    pub fn amplitude(&self, j: BasisIndex, initial: &Labstate) -> Result<Complex64, ChainError> {
        let expected = self.final_rank_for(initial);
        if j.rank() != expected {
            return Err(ChainError::FinalRankMismatch {
                expected: expected.get(),
                got: j.rank().get(),
            });
        }
        Ok(self.evolve(initial)?.amplitude_at(j.value()))
    }

    /// Number of basis-index paths the explicit enumeration visits.
    pub fn path_count(&self) -> u128 {
        self.links.iter().map(|l| l.stage.source_rank().dimension() as u128).product()
    }

    /// Final amplitude at `j` by brute-force enumeration of all index
    /// paths, in lexicographic path order with chronological factor order.
    /// The oracle for [`StageChain::amplitude`]; cost is the full path
    /// count, guarded by `budget`.
    ///
    /// Enumeration is pure linear algebra over the stage matrices; run the
    /// iterated evaluator first when domain admission must be enforced.
    pub fn amplitude_by_paths(
        &self,
        j: BasisIndex,
        initial: &Labstate,
        budget: u64,
    ) -> Result<Complex64, ChainError> {
        let expected = self.final_rank_for(initial);
        if j.rank() != expected {
            return Err(ChainError::FinalRankMismatch {
                expected: expected.get(),
                got: j.rank().get(),
            });
        }
        let first = match self.links.first() {
            None => return Ok(initial.amplitude_at(j.value())),
            Some(first) => &first.stage,
        };
        if initial.rank() != first.source_rank() {
            return Err(EvolutionError::RankMismatch {
                expected: first.source_rank().get(),
                got: initial.rank().get(),
            }
            .into());
        }
        if initial.time() != first.source_time() {
            return Err(EvolutionError::TimeMismatch {
                expected: first.source_time(),
                got: initial.time(),
            }
            .into());
        }
        if !initial.is_normalized() {
            return Err(EvolutionError::StateNotNormalized.into());
        }
        let paths = self.path_count();
        if paths > budget as u128 {
            return Err(ChainError::PathBudgetExceeded { paths, budget });
        }

        let zero = Complex64::new(0.0, 0.0);
        let mut acc = zero;
        let d0 = first.source_rank().dimension();
        for i0 in 0..d0 {
            let a = initial.amplitude_at(i0);
            if a == zero {
                continue;
            }
            self.walk(0, i0, a, j.value(), &mut acc);
        }
        Ok(acc)
    }

    // Depth-first over intermediate indices; exact-zero factors kill whole
    // subtrees without touching the accumulator.
    fn walk(&self, level: usize, idx: u64, partial: Complex64, j: u64, acc: &mut Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let stage = &self.links[level].stage;
        let m = stage.matrix();
        if level + 1 == self.links.len() {
            let f = m[(j as usize, idx as usize)];
            if f != zero {
                *acc += partial * f;
            }
            return;
        }
        for nxt in 0..stage.target_rank().dimension() {
            let f = m[(nxt as usize, idx as usize)];
            if f == zero {
                continue;
            }
            self.walk(level + 1, nxt, partial * f, j, acc);
        }
    }

    /// Absolute deviation of the final total probability from 1.
    pub fn conservation_check(&self, initial: &Labstate) -> Result<f64, ChainError> {
        let final_state = self.evolve(initial)?;
        Ok(libm::fabs(final_state.norm_sqr() - 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisIndex;
    use crate::matrix::CMat;
    use crate::rng::{random_labstate, random_schrodinger_stage, Lcg64};
    use crate::DEFAULT_TOL;
    use alloc::vec;
    use core::f64::consts::FRAC_PI_4;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn r(v: u32) -> Rank {
        Rank::new(v).unwrap()
    }

    fn bi(value: u64, rank: u32) -> BasisIndex {
        BasisIndex::new(value, r(rank)).unwrap()
    }

    fn bs_stage(time: i64) -> SemiUnitary {
        let h = libm::cos(FRAC_PI_4);
        let block = CMat::from_rows(&[vec![c(h, 0.0), c(0.0, h)], vec![c(0.0, h), c(h, 0.0)]])
            .unwrap();
        SemiUnitary::extend_one_signal(&block, &[0, 1], time, time + 1, 1e-12).unwrap()
    }

    #[test]
    fn empty_chain_is_identity() {
        let chain = StageChain::new();
        let s = Labstate::one_signal_state(&[c(0.6, 0.0), c(0.0, 0.8)], r(2), 0).unwrap();
        let out = chain.evolve(&s).unwrap();
        assert_eq!(out, s);
        assert_eq!(chain.amplitude(bi(2, 2), &s).unwrap(), c(0.0, 0.8));
        assert_eq!(chain.amplitude_by_paths(bi(2, 2), &s, 10).unwrap(), c(0.0, 0.8));
        assert!(chain.conservation_check(&s).unwrap() <= 1e-15);
        assert_eq!(chain.path_count(), 1);
    }

    #[test]
    fn identity_chain_preserves_amplitudes() {
        let mut chain = StageChain::new();
        chain.push(SemiUnitary::identity(r(2), 0)).unwrap();
        chain.push(SemiUnitary::identity(r(2), 1)).unwrap();
        let s = Labstate::one_signal_state(&[c(0.6, 0.0), c(0.0, 0.8)], r(2), 0).unwrap();
        let out = chain.evolve(&s).unwrap();
        assert_eq!(out.time(), 2);
        assert_eq!(out.amplitude_at(1), c(0.6, 0.0));
        assert_eq!(out.amplitude_at(2), c(0.0, 0.8));
        // Only the constant path contributes.
        assert_eq!(chain.amplitude_by_paths(bi(1, 2), &s, 100).unwrap(), c(0.6, 0.0));
    }

    #[test]
    fn mach_zehnder_routes_to_detector_two() {
        let mut chain = StageChain::new();
        chain.push(bs_stage(0)).unwrap();
        chain.push(bs_stage(1)).unwrap();
        let s = Labstate::one_signal_state(&[c(1.0, 0.0), c(0.0, 0.0)], r(2), 0).unwrap();
        let out = chain.evolve(&s).unwrap();
        assert!(out.born_probability(bi(1, 2)).unwrap() < 1e-12);
        assert!((out.born_probability(bi(2, 2)).unwrap() - 1.0).abs() < 1e-12);
        let a = chain.amplitude(bi(2, 2), &s).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert!(chain.conservation_check(&s).unwrap() <= 1e-10);
    }

    #[test]
    fn paths_match_iterated_evaluator() {
        let mut rng = Lcg64::new(0x9e3779b97f4a7c15);
        for trial in 0..10 {
            let mut chain = StageChain::new();
            chain.push(random_schrodinger_stage(&mut rng, r(1), r(2), 0)).unwrap();
            chain.push(random_schrodinger_stage(&mut rng, r(2), r(2), 1)).unwrap();
            chain.push(random_schrodinger_stage(&mut rng, r(2), r(3), 2)).unwrap();
            let s = random_labstate(&mut rng, r(1), 0);
            for v in 0..8u64 {
                let j = bi(v, 3);
                let fast = chain.amplitude(j, &s).unwrap();
                let slow = chain.amplitude_by_paths(j, &s, DEFAULT_PATH_BUDGET).unwrap();
                assert!(
                    (fast - slow).norm() <= 1e-12,
                    "trial {trial} index {v}: {fast} vs {slow}"
                );
            }
            assert!(chain.conservation_check(&s).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn budget_guard_trips() {
        let mut chain = StageChain::new();
        for t in 0..3 {
            chain.push(SemiUnitary::identity(r(2), t)).unwrap();
        }
        let s = Labstate::void_state(r(2), 0);
        let e = chain.amplitude_by_paths(bi(0, 2), &s, 63).unwrap_err();
        assert_eq!(e, ChainError::PathBudgetExceeded { paths: 64, budget: 63 });
        assert!(chain.amplitude_by_paths(bi(0, 2), &s, 64).is_ok());
    }

    #[test]
    fn unflagged_rank_drop_rejected() {
        let mut rng = Lcg64::new(42);
        let grow = random_schrodinger_stage(&mut rng, r(1), r(2), 0);
        let back = grow.reverse_stage();
        let mut chain = StageChain::new();
        chain.push(grow).unwrap();
        let e = chain.push(back.clone()).unwrap_err();
        assert!(matches!(e, ChainError::NonMonotoneRank { stage_number: 2, source: 2, target: 1 }));
        chain.push_reverse(back).unwrap();
        assert_eq!(chain.len(), 2);
    }

    #[test]
    fn reverse_roundtrip_restores_state() {
        let mut rng = Lcg64::new(7);
        let s = random_labstate(&mut rng, r(2), 0);
        let u = random_schrodinger_stage(&mut rng, r(2), r(3), 0);
        let mut chain = StageChain::new();
        chain.push(u.clone()).unwrap();
        chain.push_reverse(u.reverse_stage()).unwrap();
        let out = chain.evolve(&s).unwrap();
        assert!(out.max_amplitude_deviation(&s) <= 1e-10);
        assert!(chain.conservation_check(&s).unwrap() <= 1e-10);
    }

    #[test]
    fn junction_mismatches_reported() {
        let mut chain = StageChain::new();
        chain.push(SemiUnitary::identity(r(2), 0)).unwrap();
        let e = chain.push(SemiUnitary::identity(r(3), 1)).unwrap_err();
        assert!(matches!(e, ChainError::JunctionRank { stage_number: 2, expected: 2, got: 3 }));
        let e = chain.push(SemiUnitary::identity(r(2), 5)).unwrap_err();
        assert!(matches!(e, ChainError::JunctionTime { stage_number: 2, expected: 1, got: 5 }));
    }
}
