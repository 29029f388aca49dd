//! Bit-level arithmetic for the preferred signal basis.
//!
//! A register of `r` qubits, one per detector, has `2^r` preferred basis
//! elements, each written three equivalent ways:
//!
//! * occupation: the bit sequence `e1..er`, one bit per detector;
//! * computation: the integer `i = sum_j e_j 2^(j-1)`;
//! * signal: the set of fired detectors `{j : e_j = 1}`, whose size is the
//!   signal class of the element.
//!
//! Qubit `j` is bit `j - 1` (qubit 1 is the least significant bit). That is
//! the only index convention in this repository.
//!
//! Everything here is integer arithmetic on those encodings, including the
//! basis-level action of signal creation and annihilation. An annihilated
//! result (creation on an occupied site, annihilation on a void site) is
//! reported as `None` rather than a zero-amplitude state, so this module
//! stays integer-only; the linear lift happens in [`crate::labstate`].

use alloc::vec::Vec;
use core::fmt;

/// Hard upper bound on register rank; dimension is `2^rank` and must stay
/// addressable.
pub const MAX_RANK: u32 = 30;

/// Errors from basis-level operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisError {
    /// Rank outside `1..=MAX_RANK`.
    RankOutOfRange { value: u32 },
    /// Index value does not fit the register dimension.
    IndexOutOfRange { value: u64, rank: u32 },
    /// Qubit index outside `1..=rank`.
    SiteOutOfRange { site: u32, rank: u32 },
    /// Signal class outside `0..=rank`.
    ClassOutOfRange { class: u32, rank: u32 },
}

impl fmt::Display for BasisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BasisError::RankOutOfRange { value } => {
                write!(f, "rank {value} outside 1..={MAX_RANK}")
            }
            BasisError::IndexOutOfRange { value, rank } => {
                write!(f, "basis index {value} too large for rank {rank}")
            }
            BasisError::SiteOutOfRange { site, rank } => {
                write!(f, "qubit {site} outside 1..={rank}")
            }
            BasisError::ClassOutOfRange { class, rank } => {
                write!(f, "signal class {class} outside 0..={rank}")
            }
        }
    }
}

impl core::error::Error for BasisError {}

/// Number of qubits in the register at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rank(u32);

impl Rank {
    pub fn new(value: u32) -> Result<Rank, BasisError> {
        if (1..=MAX_RANK).contains(&value) {
            Ok(Rank(value))
        } else {
            Err(BasisError::RankOutOfRange { value })
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Register dimension `2^rank`.
    pub fn dimension(self) -> u64 {
        1u64 << self.0
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One preferred-basis element: an integer in `[0, 2^rank)` whose bit
/// `j - 1` is the occupation of qubit `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex {
    value: u64,
    rank: Rank,
}

impl BasisIndex {
    pub fn new(value: u64, rank: Rank) -> Result<BasisIndex, BasisError> {
        if value < rank.dimension() {
            Ok(BasisIndex { value, rank })
        } else {
            Err(BasisError::IndexOutOfRange { value, rank: rank.get() })
        }
    }

    // Invariant `value < dimension` is the caller's burden; internal use only.
    pub(crate) fn from_raw(value: u64, rank: Rank) -> BasisIndex {
        debug_assert!(value < rank.dimension());
        BasisIndex { value, rank }
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn rank(self) -> Rank {
        self.rank
    }

    /// Signal class: how many detectors fire in this element.
    pub fn signal_class(self) -> u32 {
        self.value.count_ones()
    }
}

/// Set of fired detectors, as 1-based qubit indices. Empty means void.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignalSet {
    mask: u64,
}

impl SignalSet {
    pub const VOID: SignalSet = SignalSet { mask: 0 };

    /// Bit `j - 1` of `mask` marks qubit `j` as fired.
    pub fn from_mask(mask: u64) -> SignalSet {
        SignalSet { mask }
    }

    pub fn mask(self) -> u64 {
        self.mask
    }

    pub fn class(self) -> u32 {
        self.mask.count_ones()
    }

    pub fn is_void(self) -> bool {
        self.mask == 0
    }

    pub fn contains(self, qubit: u32) -> bool {
        qubit >= 1 && qubit <= 64 && self.mask >> (qubit - 1) & 1 == 1
    }

    /// Fired qubit indices, ascending.
    pub fn qubits(self) -> SignalIter {
        SignalIter { mask: self.mask }
    }
}

impl fmt::Display for SignalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for q in self.qubits() {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{q}")?;
            first = false;
        }
        write!(f, "}}")
    }
}

/// Ascending iterator over the fired qubits of a [`SignalSet`].
#[derive(Debug, Clone)]
pub struct SignalIter {
    mask: u64,
}

impl Iterator for SignalIter {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.mask == 0 {
            return None;
        }
        let tz = self.mask.trailing_zeros();
        self.mask &= self.mask - 1;
        Some(tz + 1)
    }
}

/// Computational map: occupation bits `e1..er` to `sum_j e_j 2^(j-1)`.
/// The sequence length is the rank.
pub fn computational_index(occupation: &[bool]) -> Result<BasisIndex, BasisError> {
    let rank = Rank::new(occupation.len() as u32)?;
    let mut value = 0u64;
    for (j, &bit) in occupation.iter().enumerate() {
        if bit {
            value |= 1u64 << j;
        }
    }
    Ok(BasisIndex { value, rank })
}

/// Inverse of [`computational_index`]; the result has length `rank`.
pub fn occupation_of(index: BasisIndex) -> Vec<bool> {
    (0..index.rank().get()).map(|j| index.value() >> j & 1 == 1).collect()
}

/// Fired detectors of a basis element: `{j : bit j-1 of index is set}`.
pub fn signal_set_of(index: BasisIndex) -> SignalSet {
    SignalSet::from_mask(index.value())
}

/// Size of signal class `k`: the binomial coefficient `C(rank, k)`.
pub fn class_size(rank: Rank, k: u32) -> Result<u64, BasisError> {
    if k > rank.get() {
        return Err(BasisError::ClassOutOfRange { class: k, rank: rank.get() });
    }
    let r = rank.get() as u64;
    let k = k.min(rank.get() - k) as u64;
    // Each step is C(r-k+t, t), so the division is exact; peaks below 2^28
    // for rank <= 30.
    let mut acc = 1u64;
    for t in 1..=k {
        acc = acc * (r - k + t) / t;
    }
    Ok(acc)
}

/// Basis action of signal creation on detector `site`: sets bit `site - 1`,
/// or `None` when the site already carries a signal (per-site nilpotency
/// annihilates the state).
pub fn apply_signal_creation(
    index: BasisIndex,
    site: u32,
) -> Result<Option<BasisIndex>, BasisError> {
    let rank = index.rank();
    if site < 1 || site > rank.get() {
        return Err(BasisError::SiteOutOfRange { site, rank: rank.get() });
    }
    let bit = 1u64 << (site - 1);
    if index.value() & bit != 0 {
        Ok(None)
    } else {
        Ok(Some(BasisIndex { value: index.value() | bit, rank }))
    }
}

/// Dual of [`apply_signal_creation`]: clears bit `site - 1`, or `None` when
/// the site is void.
pub fn apply_signal_annihilation(
    index: BasisIndex,
    site: u32,
) -> Result<Option<BasisIndex>, BasisError> {
    let rank = index.rank();
    if site < 1 || site > rank.get() {
        return Err(BasisError::SiteOutOfRange { site, rank: rank.get() });
    }
    let bit = 1u64 << (site - 1);
    if index.value() & bit == 0 {
        Ok(None)
    } else {
        Ok(Some(BasisIndex { value: index.value() & !bit, rank }))
    }
}
