//! Discrete-time quantum simulation of detector registers.
//!
//! A laboratory is modelled as a register of qubits, one per detector (or any
//! other elementary yes/no information gateway). The register at observer
//! tick `n` has a *rank* `r` — the number of detectors — and dimension `2^r`.
//! Its preferred basis is the signal/void basis: each basis element says which
//! detectors would fire and which would stay silent if the observer looked.
//! The quantum state of the whole register is a [`Labstate`], a normalized
//! sparse superposition of those basis elements.
//!
//! Evolution from one tick to the next is a [`SemiUnitary`] stage: a linear
//! norm-preserving operator `U` with `U†U = I` whose target register may be
//! *larger* than its source, so the apparatus can grow while probability is
//! conserved. Stages that keep the void state isolated (void maps to void,
//! signals never leak into the void) are called Schrödinger stages; they are
//! the discrete analogue of closed unitary evolution and can be assembled
//! from one-signal transition matrices with [`SemiUnitary::extend_one_signal`].
//!
//! Multi-stage experiments are [`StageChain`]s. Final amplitudes can be
//! computed either by folding stage applications or by brute-force summation
//! over all intermediate basis-index paths — a finite, discrete sum over
//! histories that serves as a cross-checking oracle for the iterated
//! evaluator.
//!
//! The crate is `no_std` (alloc required); IO, the experiment file format and
//! the command-line runner live in the companion `heisenet-cli` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod basis;
pub mod labstate;
pub mod matrix;
pub mod pathsum;
pub mod rng;
pub mod stage;

pub use basis::{
    apply_signal_annihilation, apply_signal_creation, class_size, computational_index,
    occupation_of, signal_set_of, BasisError, BasisIndex, Rank, SignalSet, MAX_RANK,
};
pub use labstate::{Labstate, LabstateError, OutcomeRow, OutcomeTable};
pub use matrix::CMat;
pub use pathsum::{ChainError, ChainLink, StageChain, DEFAULT_PATH_BUDGET};
pub use rng::{random_isometry, random_labstate, random_schrodinger_stage, Lcg64};
pub use stage::{EvolutionError, SemiUnitary, ValidationReport, MAX_STAGE_ENTRIES};

/// Complex amplitude type used throughout.
pub type Complex64 = num_complex::Complex<f64>;

/// Default tolerance for normalization and semi-unitarity checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Amplitudes with modulus at or below this threshold are dropped from
/// sparse states after arithmetic, keeping support small under repeated
/// stage application without disturbing checks at the default tolerance.
pub const PRUNE_THRESHOLD: f64 = 1e-15;
