//! Sparse labstates: the quantum state of the detector register at one tick.
//!
//! A labstate stores only its nonzero amplitudes, keyed by basis index in a
//! sorted map, because the states of interest live in the low signal classes
//! and a dense `2^r` vector wastes memory. Constructors reject unnormalized
//! input instead of silently renormalizing: normalization is treated as a
//! physical requirement, not a convenience. Global phase is not quotiented;
//! states compare amplitude-wise so path-summation tests can demand exact
//! amplitudes, not rays.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::basis::{
    signal_set_of, BasisError, BasisIndex, Rank, SignalSet,
};
use crate::{Complex64, DEFAULT_TOL, PRUNE_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabstateError {
    Basis(BasisError),
    /// Squared norm strayed from 1 beyond the allowed tolerance.
    NotNormalized { norm_sqr: f64, tolerance: f64 },
    /// one_signal_state got a coefficient count different from the rank.
    CoefficientCount { expected: u32, got: usize },
    RankMismatch { expected: u32, got: u32 },
}

impl fmt::Display for LabstateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LabstateError::Basis(e) => write!(f, "{e}"),
            LabstateError::NotNormalized { norm_sqr, tolerance } => {
                let deficit = if norm_sqr >= 1.0 { norm_sqr - 1.0 } else { 1.0 - norm_sqr };
                write!(
                    f,
                    "state not normalized: norm^2 = {norm_sqr:.17e}, deficit {deficit:.3e} exceeds tolerance {tolerance:.3e}"
                )
            }
            LabstateError::CoefficientCount { expected, got } => {
                write!(f, "expected {expected} one-signal coefficients, got {got}")
            }
            LabstateError::RankMismatch { expected, got } => {
                write!(f, "rank mismatch: state has rank {expected}, argument has rank {got}")
            }
        }
    }
}

impl core::error::Error for LabstateError {}

impl From<BasisError> for LabstateError {
    fn from(e: BasisError) -> Self {
        LabstateError::Basis(e)
    }
}

/// Normalized (unless explicitly flagged otherwise) sparse state of the
/// register at observer tick `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct Labstate {
    time: i64,
    rank: Rank,
    amps: BTreeMap<u64, Complex64>,
    normalized: bool,
}

impl Labstate {
    /// The state in which no detector would fire: amplitude 1 at index 0.
    pub fn void_state(rank: Rank, time: i64) -> Labstate {
        let mut amps = BTreeMap::new();
        amps.insert(0u64, Complex64::new(1.0, 0.0));
        Labstate { time, rank, amps, normalized: true }
    }

    /// Superposition of one-signal basis states: coefficient `i` (0-based)
    /// lands at index `2^i`. The coefficient count must equal the rank and
    /// the coefficients must be normalized.
    pub fn one_signal_state(
        coeffs: &[Complex64],
        rank: Rank,
        time: i64,
    ) -> Result<Labstate, LabstateError> {
        if coeffs.len() != rank.get() as usize {
            return Err(LabstateError::CoefficientCount {
                expected: rank.get(),
                got: coeffs.len(),
            });
        }
        Self::general_state_tol(
            coeffs.iter().enumerate().map(|(i, &a)| (1u64 << i, a)),
            rank,
            time,
            DEFAULT_TOL,
        )
    }

    /// Arbitrary sparse state from (index value, amplitude) pairs; repeated
    /// indices accumulate. Checked against [`DEFAULT_TOL`].
    pub fn general_state(
        entries: impl IntoIterator<Item = (u64, Complex64)>,
        rank: Rank,
        time: i64,
    ) -> Result<Labstate, LabstateError> {
        Self::general_state_tol(entries, rank, time, DEFAULT_TOL)
    }

    /// As [`Labstate::general_state`] with an explicit normalization
    /// tolerance.
    pub fn general_state_tol(
        entries: impl IntoIterator<Item = (u64, Complex64)>,
        rank: Rank,
        time: i64,
        tolerance: f64,
    ) -> Result<Labstate, LabstateError> {
        let dim = rank.dimension();
        let mut amps: BTreeMap<u64, Complex64> = BTreeMap::new();
        for (value, amp) in entries {
            if value >= dim {
                return Err(BasisError::IndexOutOfRange { value, rank: rank.get() }.into());
            }
            *amps.entry(value).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        let norm_sqr: f64 = amps.values().map(|a| a.norm_sqr()).sum();
        if libm::fabs(norm_sqr - 1.0) > tolerance {
            return Err(LabstateError::NotNormalized { norm_sqr, tolerance });
        }
        amps.retain(|_, a| a.norm_sqr() > PRUNE_THRESHOLD * PRUNE_THRESHOLD);
        Ok(Labstate { time, rank, amps, normalized: true })
    }

    // Raw assembly for in-crate evolution code, which has already accounted
    // for the norm.
    pub(crate) fn from_parts(
        time: i64,
        rank: Rank,
        amps: BTreeMap<u64, Complex64>,
        normalized: bool,
    ) -> Labstate {
        Labstate { time, rank, amps, normalized }
    }

    pub fn time(&self) -> i64 {
        self.time
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    /// Whether this state was constructed or evolved as normalized. A flag,
    /// not a recomputation.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    /// Number of stored (nonzero) amplitudes.
    pub fn support_len(&self) -> usize {
        self.amps.len()
    }

    /// Stored amplitude at `value`, zero when absent.
    pub fn amplitude_at(&self, value: u64) -> Complex64 {
        self.amps.get(&value).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Stored entries in ascending index order.
    pub fn entries(&self) -> impl Iterator<Item = (BasisIndex, Complex64)> + '_ {
        let rank = self.rank;
        self.amps.iter().map(move |(&v, &a)| (BasisIndex::from_raw(v, rank), a))
    }

    pub(crate) fn raw_entries(&self) -> impl Iterator<Item = (u64, Complex64)> + '_ {
        self.amps.iter().map(|(&v, &a)| (v, a))
    }

    /// Dense amplitude vector of length `2^rank`.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut out = alloc::vec![Complex64::new(0.0, 0.0); self.rank.dimension() as usize];
        for (&v, &a) in &self.amps {
            out[v as usize] = a;
        }
        out
    }

    /// Squared modulus of the amplitude at `index`.
    pub fn born_probability(&self, index: BasisIndex) -> Result<f64, LabstateError> {
        if index.rank() != self.rank {
            return Err(LabstateError::RankMismatch {
                expected: self.rank.get(),
                got: index.rank().get(),
            });
        }
        Ok(self.amplitude_at(index.value()).norm_sqr())
    }

    /// One row per stored amplitude: which detectors fire, with what
    /// probability. Requires a normalized state.
    pub fn outcome_table(&self) -> Result<OutcomeTable, LabstateError> {
        if !self.normalized {
            return Err(LabstateError::NotNormalized {
                norm_sqr: self.norm_sqr(),
                tolerance: DEFAULT_TOL,
            });
        }
        let mut rows = Vec::with_capacity(self.amps.len());
        let mut total = 0.0f64;
        for (&v, &a) in &self.amps {
            let index = BasisIndex::from_raw(v, self.rank);
            let probability = a.norm_sqr();
            total += probability;
            rows.push(OutcomeRow { index, signals: signal_set_of(index), probability });
        }
        Ok(OutcomeTable { rows, total })
    }

    /// Total probability of seeing exactly `k` detectors fire.
    pub fn class_probability(&self, k: u32) -> Result<f64, LabstateError> {
        if k > self.rank.get() {
            return Err(BasisError::ClassOutOfRange { class: k, rank: self.rank.get() }.into());
        }
        Ok(self
            .amps
            .iter()
            .filter(|(&v, _)| v.count_ones() == k)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Linear extension of basis-level signal creation at `site`.
    /// Annihilated terms drop out, so the result can lose norm; it is always
    /// flagged unnormalized.
    pub fn lift_signal_creation(&self, site: u32) -> Result<Labstate, LabstateError> {
        if site < 1 || site > self.rank.get() {
            return Err(BasisError::SiteOutOfRange { site, rank: self.rank.get() }.into());
        }
        let bit = 1u64 << (site - 1);
        let mut amps: BTreeMap<u64, Complex64> = BTreeMap::new();
        for (&v, &a) in &self.amps {
            if v & bit == 0 {
                *amps.entry(v | bit).or_insert(Complex64::new(0.0, 0.0)) += a;
            }
        }
        amps.retain(|_, a| a.norm_sqr() > PRUNE_THRESHOLD * PRUNE_THRESHOLD);
        Ok(Labstate { time: self.time, rank: self.rank, amps, normalized: false })
    }

    /// Largest modulus difference between amplitudes of two states over the
    /// union of their supports, ignoring the time tag. Infinite on rank
    /// mismatch.
    pub fn max_amplitude_deviation(&self, other: &Labstate) -> f64 {
        if self.rank != other.rank {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for (&v, &a) in &self.amps {
            let dev = (a - other.amplitude_at(v)).norm();
            if dev > worst {
                worst = dev;
            }
        }
        for (&v, &b) in &other.amps {
            let dev = (self.amplitude_at(v) - b).norm();
            if dev > worst {
                worst = dev;
            }
        }
        worst
    }
}

/// One readout row: a basis element's fired detectors and Born probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeRow {
    pub index: BasisIndex,
    pub signals: SignalSet,
    pub probability: f64,
}

/// Readout of a normalized labstate, rows ascending by basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable {
    rows: Vec<OutcomeRow>,
    total: f64,
}

impl OutcomeTable {
    pub fn rows(&self) -> &[OutcomeRow] {
        &self.rows
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn r(v: u32) -> Rank {
        Rank::new(v).unwrap()
    }

    fn bi(value: u64, rank: u32) -> BasisIndex {
        BasisIndex::new(value, r(rank)).unwrap()
    }

    /// The rank-two state with all four amplitudes 1/2.
    fn quarter_state() -> Labstate {
        Labstate::general_state((0..4).map(|v| (v, c(0.5, 0.0))), r(2), 0).unwrap()
    }

    #[test]
    fn void_state_basics() {
        let s = Labstate::void_state(r(3), 0);
        assert_eq!(s.amplitude_at(0), c(1.0, 0.0));
        assert_eq!(s.support_len(), 1);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        let (index, _) = s.entries().next().unwrap();
        assert!(signal_set_of(index).is_void());
    }

    #[test]
    fn one_signal_state_examples() {
        let s = Labstate::one_signal_state(&[c(1.0, 0.0), c(0.0, 0.0)], r(2), 0).unwrap();
        assert_eq!(s.amplitude_at(1), c(1.0, 0.0));
        assert_eq!(s.support_len(), 1);

        let h = core::f64::consts::FRAC_1_SQRT_2;
        let s = Labstate::one_signal_state(&[c(h, 0.0), c(h, 0.0)], r(2), 0).unwrap();
        assert_eq!(s.amplitude_at(1), c(h, 0.0));
        assert_eq!(s.amplitude_at(2), c(h, 0.0));

        let bad = Labstate::one_signal_state(&[c(1.0, 0.0), c(1.0, 0.0)], r(2), 0);
        assert!(matches!(bad, Err(LabstateError::NotNormalized { .. })));
    }

    #[test]
    fn general_state_validation() {
        assert!(Labstate::general_state([(0u64, c(1.0, 0.0))], r(1), 0).is_ok());
        let bad = Labstate::general_state([(5u64, c(1.0, 0.0))], r(2), 0);
        assert!(matches!(bad, Err(LabstateError::Basis(BasisError::IndexOutOfRange { .. }))));
    }

    #[test]
    fn born_probabilities() {
        let s = quarter_state();
        assert!((s.born_probability(bi(3, 2)).unwrap() - 0.25).abs() < 1e-15);
        let v = Labstate::void_state(r(3), 0);
        assert_eq!(v.born_probability(bi(0, 3)).unwrap(), 1.0);
        assert_eq!(v.born_probability(bi(1, 3)).unwrap(), 0.0);
        assert!(v.born_probability(bi(0, 2)).is_err());
    }

    #[test]
    fn outcome_table_rows() {
        let t = quarter_state().outcome_table().unwrap();
        let sets: Vec<_> = t.rows().iter().map(|row| row.signals.mask()).collect();
        assert_eq!(sets, vec![0, 1, 2, 3]);
        for row in t.rows() {
            assert!((row.probability - 0.25).abs() < 1e-15);
        }
        assert!((t.total() - 1.0).abs() < 1e-12);

        let v = Labstate::void_state(r(3), 0).outcome_table().unwrap();
        assert_eq!(v.rows().len(), 1);
        assert!(v.rows()[0].signals.is_void());
        assert_eq!(v.rows()[0].probability, 1.0);
    }

    #[test]
    fn class_probabilities() {
        let s = quarter_state();
        assert!((s.class_probability(1).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(Labstate::void_state(r(3), 0).class_probability(0).unwrap(), 1.0);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let one = Labstate::one_signal_state(&[c(h, 0.0), c(h, 0.0)], r(2), 0).unwrap();
        assert_eq!(one.class_probability(2).unwrap(), 0.0);
        assert!(s.class_probability(3).is_err());
    }

    #[test]
    fn lift_examples() {
        let lifted = Labstate::void_state(r(2), 0).lift_signal_creation(1).unwrap();
        assert_eq!(lifted.amplitude_at(1), c(1.0, 0.0));
        assert!(!lifted.is_normalized());

        // Nilpotency: a second excitation of the same site kills the term.
        let dead = lifted.lift_signal_creation(1).unwrap();
        assert_eq!(dead.support_len(), 0);

        let h = core::f64::consts::FRAC_1_SQRT_2;
        let one = Labstate::one_signal_state(&[c(h, 0.0), c(h, 0.0)], r(2), 0).unwrap();
        let up = one.lift_signal_creation(2).unwrap();
        assert_eq!(up.support_len(), 1);
        assert!((up.amplitude_at(3) - c(h, 0.0)).norm() < 1e-15);
        assert!((up.norm_sqr() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lift_commutes_across_sites() {
        let s = quarter_state();
        let ab = s.lift_signal_creation(1).unwrap().lift_signal_creation(2).unwrap();
        let ba = s.lift_signal_creation(2).unwrap().lift_signal_creation(1).unwrap();
        assert!(ab.max_amplitude_deviation(&ba) <= 1e-15);
    }

    #[test]
    fn duplicate_entries_accumulate() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let s = Labstate::general_state(
            [(1u64, c(h / 2.0, 0.0)), (1u64, c(h / 2.0, 0.0)), (2u64, c(0.0, h))],
            r(2),
            0,
        )
        .unwrap();
        assert!((s.amplitude_at(1) - c(h, 0.0)).norm() < 1e-15);
    }
}
