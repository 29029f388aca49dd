//! Semi-unitary stage operators between registers of possibly different
//! rank.
//!
//! A stage carries a `target_dim x source_dim` complex matrix with
//! orthonormal columns (`U'U = I` on its admitted domain), taking the
//! register from one tick to the next. The target rank may exceed the source
//! rank: the apparatus can grow while norms and inner products are
//! preserved. `UU' = I` is deliberately NOT required.
//!
//! A stage is Schrodinger when the void column is exactly the target void
//! unit vector and the void row vanishes on every signal column, the block
//! form of closed-experiment evolution. Such stages can be assembled from a
//! one-signal transition matrix via [`SemiUnitary::extend_one_signal`],
//! which multiplies out per-detector images and therefore hits the per-site
//! nilpotency wall: multi-signal images can collide on one detector and
//! lose norm. That collapse is surfaced as a hard error, never silently
//! renormalized, because silent renormalization would make the evolution
//! nonlinear.
//!
//! Reverse stages (conjugate transposes) realize time-reversal experiments.
//! They are co-isometries, the one sanctioned exception to monotone rank
//! growth.

use alloc::collections::BTreeMap;
use alloc::vec;
use core::fmt;

use crate::basis::{BasisError, Rank};
use crate::labstate::Labstate;
use crate::matrix::CMat;
use crate::{Complex64, PRUNE_THRESHOLD};

/// Largest allowed `target_dim * source_dim` for one stage; dense storage
/// and the Gram check make bigger stages impractical.
pub const MAX_STAGE_ENTRIES: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvolutionError {
    Basis(BasisError),
    /// Matrix shape disagrees with the declared ranks.
    ShapeMismatch { rows: usize, cols: usize, expected_rows: u64, expected_cols: u64 },
    /// Target rank below source rank outside a reverse stage.
    RankOrder { source: u32, target: u32 },
    /// Dense stage would exceed [`MAX_STAGE_ENTRIES`].
    StageTooLarge { entries: u64, budget: u64 },
    /// Gram matrix strayed from the identity.
    NotSemiUnitary { deviation: f64, tolerance: f64 },
    /// One-signal block handed to extend_one_signal is not an isometry.
    BlockNotIsometric { deviation: f64, tolerance: f64 },
    /// The product-rule image of a requested multi-signal basis state lost
    /// norm through per-site nilpotency.
    ClassCollision { source_index: u64, image_norm: f64 },
    /// Stage times must advance.
    TimeOrder { source_time: i64, target_time: i64 },
    RankMismatch { expected: u32, got: u32 },
    TimeMismatch { expected: i64, got: i64 },
    /// Operation requires a Schrodinger stage.
    NotSchrodinger { void_image_deviation: f64, signal_leak_to_void: f64 },
    /// The state touches a signal class the stage does not admit.
    OutOfDomain { index: u64, class: u32 },
    /// apply requires a state flagged normalized.
    StateNotNormalized,
}

impl fmt::Display for EvolutionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EvolutionError::Basis(e) => write!(f, "{e}"),
            EvolutionError::ShapeMismatch { rows, cols, expected_rows, expected_cols } => write!(
                f,
                "stage matrix is {rows}x{cols}, ranks demand {expected_rows}x{expected_cols}"
            ),
            EvolutionError::RankOrder { source, target } => write!(
                f,
                "target rank {target} below source rank {source}; only reverse stages may shrink"
            ),
            EvolutionError::StageTooLarge { entries, budget } => {
                write!(f, "stage needs {entries} dense entries, budget is {budget}")
            }
            EvolutionError::NotSemiUnitary { deviation, tolerance } => write!(
                f,
                "not semi-unitary: Gram deviation {deviation:.3e} exceeds tolerance {tolerance:.3e}"
            ),
            EvolutionError::BlockNotIsometric { deviation, tolerance } => write!(
                f,
                "one-signal block not isometric: deviation {deviation:.3e} exceeds tolerance {tolerance:.3e}"
            ),
            EvolutionError::ClassCollision { source_index, image_norm } => write!(
                f,
                "class collision: image of basis state {source_index} has norm {image_norm:.3e}, not 1"
            ),
            EvolutionError::TimeOrder { source_time, target_time } => {
                write!(f, "stage times must advance: source {source_time}, target {target_time}")
            }
            EvolutionError::RankMismatch { expected, got } => {
                write!(f, "rank mismatch: expected {expected}, got {got}")
            }
            EvolutionError::TimeMismatch { expected, got } => {
                write!(f, "time mismatch: expected {expected}, got {got}")
            }
            EvolutionError::NotSchrodinger { void_image_deviation, signal_leak_to_void } => write!(
                f,
                "stage is not Schrodinger: void image deviation {void_image_deviation:.3e}, signal leak to void {signal_leak_to_void:.3e}"
            ),
            EvolutionError::OutOfDomain { index, class } => write!(
                f,
                "basis state {index} (signal class {class}) is outside the stage's admitted classes"
            ),
            EvolutionError::StateNotNormalized => {
                write!(f, "stage application requires a normalized state")
            }
        }
    }
}

impl core::error::Error for EvolutionError {}

impl From<BasisError> for EvolutionError {
    fn from(e: BasisError) -> Self {
        EvolutionError::Basis(e)
    }
}

/// Numerical diagnostics attached to every stage at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    /// Largest modulus entry of `U'U - I` over the admitted source classes
    /// (of `UU' - I` for reverse stages, whose transpose is the isometry).
    pub max_semiunitarity_deviation: f64,
    /// Void column is the target void unit vector AND the void row vanishes
    /// on all signal columns, both within the stage tolerance.
    pub is_schrodinger: bool,
    /// Euclidean distance between column 0 and the target void unit vector.
    pub void_image_deviation: f64,
    /// Largest modulus among row-0 entries of the signal columns.
    pub signal_leak_to_void: f64,
}

/// A validated stage operator from the register at `source_time` to the
/// register at `target_time`.
#[derive(Debug, Clone)]
pub struct SemiUnitary {
    source_rank: Rank,
    target_rank: Rank,
    source_time: i64,
    target_time: i64,
    matrix: CMat,
    /// Bitmask of admitted source signal classes (bit k = class k);
    /// `None` admits everything. Restricted stages come from
    /// `extend_one_signal`, whose unbuilt columns are zero and must never
    /// receive amplitude.
    class_domain: Option<u64>,
    /// Built as a reverse stage: co-isometric, may shrink rank.
    reverse: bool,
    report: ValidationReport,
    tolerance: f64,
}

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Max modulus deviation of the Gram matrix of `m`'s thin side from the
/// identity, restricted to indices whose popcount class is admitted.
fn gram_deviation(m: &CMat, domain: Option<u64>) -> f64 {
    let g = if m.rows() >= m.cols() { m.dagger().mul(m) } else { m.mul(&m.dagger()) };
    let admitted = |v: usize| match domain {
        None => true,
        Some(mask) => mask >> (v as u64).count_ones() & 1 == 1,
    };
    let mut worst = 0.0f64;
    for i in 0..g.rows() {
        if !admitted(i) {
            continue;
        }
        for j in 0..g.cols() {
            if !admitted(j) {
                continue;
            }
            let target = if i == j { Complex64::new(1.0, 0.0) } else { czero() };
            let dev = (g[(i, j)] - target).norm();
            if dev > worst {
                worst = dev;
            }
        }
    }
    worst
}

/// Schrodinger block-form figures for a stage matrix.
fn schrodinger_figures(m: &CMat) -> (f64, f64) {
    let mut void_dev_sqr = 0.0f64;
    for j in 0..m.rows() {
        let target = if j == 0 { Complex64::new(1.0, 0.0) } else { czero() };
        void_dev_sqr += (m[(j, 0)] - target).norm_sqr();
    }
    let mut leak = 0.0f64;
    for i in 1..m.cols() {
        let a = m[(0, i)].norm();
        if a > leak {
            leak = a;
        }
    }
    (libm::sqrt(void_dev_sqr), leak)
}

fn build_report(m: &CMat, gram_dev: f64, tolerance: f64) -> ValidationReport {
    let (void_image_deviation, signal_leak_to_void) = schrodinger_figures(m);
    ValidationReport {
        max_semiunitarity_deviation: gram_dev,
        is_schrodinger: void_image_deviation <= tolerance && signal_leak_to_void <= tolerance,
        void_image_deviation,
        signal_leak_to_void,
    }
}

fn check_entry_budget(rows: u64, cols: u64) -> Result<(), EvolutionError> {
    let entries = rows * cols;
    if entries > MAX_STAGE_ENTRIES {
        return Err(EvolutionError::StageTooLarge { entries, budget: MAX_STAGE_ENTRIES });
    }
    Ok(())
}

impl SemiUnitary {
    /// Validates and wraps an explicit stage matrix. The matrix must be
    /// `2^target_rank x 2^source_rank` with orthonormal columns within
    /// `tolerance`, and the target rank must not shrink.
    pub fn new(
        matrix: CMat,
        source_rank: Rank,
        target_rank: Rank,
        source_time: i64,
        target_time: i64,
        tolerance: f64,
    ) -> Result<SemiUnitary, EvolutionError> {
        if target_rank < source_rank {
            return Err(EvolutionError::RankOrder {
                source: source_rank.get(),
                target: target_rank.get(),
            });
        }
        if target_time <= source_time {
            return Err(EvolutionError::TimeOrder { source_time, target_time });
        }
        let expected_rows = target_rank.dimension();
        let expected_cols = source_rank.dimension();
        if matrix.rows() as u64 != expected_rows || matrix.cols() as u64 != expected_cols {
            return Err(EvolutionError::ShapeMismatch {
                rows: matrix.rows(),
                cols: matrix.cols(),
                expected_rows,
                expected_cols,
            });
        }
        check_entry_budget(expected_rows, expected_cols)?;
        let gram_dev = gram_deviation(&matrix, None);
        if gram_dev > tolerance {
            return Err(EvolutionError::NotSemiUnitary { deviation: gram_dev, tolerance });
        }
        let report = build_report(&matrix, gram_dev, tolerance);
        Ok(SemiUnitary {
            source_rank,
            target_rank,
            source_time,
            target_time,
            matrix,
            class_domain: None,
            reverse: false,
            report,
            tolerance,
        })
    }

    /// The do-nothing stage on a register of the given rank.
    pub fn identity(rank: Rank, source_time: i64) -> SemiUnitary {
        let dim = rank.dimension() as usize;
        SemiUnitary::new(
            CMat::identity(dim),
            rank,
            rank,
            source_time,
            source_time + 1,
            crate::DEFAULT_TOL,
        )
        .expect("identity is semi-unitary")
    }

    /// Builds a Schrodinger stage from its one-signal transition block.
    ///
    /// `block` is `target_rank x source_rank`: column `i` gives the
    /// coefficients of the image of detector `i+1`'s creation operator over
    /// the target detectors. It must have orthonormal columns. The k-signal
    /// columns of the register stage are the expanded products of the
    /// per-detector images; only columns whose class lies in
    /// `domain_classes` (class 0 is always included) are built, and the
    /// stage refuses states outside that domain.
    ///
    /// When two excitations land on one target detector the term vanishes;
    /// if that drives the image norm of a requested column away from 1 the
    /// construction fails with [`EvolutionError::ClassCollision`].
    pub fn extend_one_signal(
        block: &CMat,
        domain_classes: &[u32],
        source_time: i64,
        target_time: i64,
        tolerance: f64,
    ) -> Result<SemiUnitary, EvolutionError> {
        let source_rank = Rank::new(block.cols() as u32)?;
        let target_rank = Rank::new(block.rows() as u32)?;
        if target_rank < source_rank {
            return Err(EvolutionError::RankOrder {
                source: source_rank.get(),
                target: target_rank.get(),
            });
        }
        if target_time <= source_time {
            return Err(EvolutionError::TimeOrder { source_time, target_time });
        }
        let block_dev = gram_deviation(block, None);
        if block_dev > tolerance {
            return Err(EvolutionError::BlockNotIsometric { deviation: block_dev, tolerance });
        }
        let mut mask = 1u64;
        for &k in domain_classes {
            if k > source_rank.get() {
                return Err(BasisError::ClassOutOfRange { class: k, rank: source_rank.get() }.into());
            }
            mask |= 1u64 << k;
        }
        let src_dim = source_rank.dimension();
        let tgt_dim = target_rank.dimension();
        check_entry_budget(tgt_dim, src_dim)?;

        let mut matrix = CMat::zeros(tgt_dim as usize, src_dim as usize);
        matrix[(0, 0)] = Complex64::new(1.0, 0.0);
        for value in 1..src_dim {
            let k = value.count_ones();
            if mask >> k & 1 == 0 {
                continue;
            }
            // Multiply out the per-site images in ascending site order,
            // dropping terms that re-excite an occupied target detector.
            let mut image: BTreeMap<u64, Complex64> = BTreeMap::new();
            image.insert(0u64, Complex64::new(1.0, 0.0));
            for site in 1..=source_rank.get() {
                if value >> (site - 1) & 1 == 0 {
                    continue;
                }
                let mut next: BTreeMap<u64, Complex64> = BTreeMap::new();
                for (&t, &amp) in &image {
                    for target_site in 1..=target_rank.get() {
                        let bit = 1u64 << (target_site - 1);
                        if t & bit != 0 {
                            continue;
                        }
                        let coeff = block[(target_site as usize - 1, site as usize - 1)];
                        if coeff == czero() {
                            continue;
                        }
                        *next.entry(t | bit).or_insert(czero()) += amp * coeff;
                    }
                }
                image = next;
            }
            let norm_sqr: f64 = image.values().map(|a| a.norm_sqr()).sum();
            let image_norm = libm::sqrt(norm_sqr);
            if libm::fabs(image_norm - 1.0) > tolerance {
                return Err(EvolutionError::ClassCollision { source_index: value, image_norm });
            }
            for (&t, &amp) in &image {
                matrix[(t as usize, value as usize)] = amp;
            }
        }

        let full = mask == (1u64 << (source_rank.get() + 1)) - 1;
        let domain = if full { None } else { Some(mask) };
        let gram_dev = gram_deviation(&matrix, domain);
        if gram_dev > tolerance {
            return Err(EvolutionError::NotSemiUnitary { deviation: gram_dev, tolerance });
        }
        let report = build_report(&matrix, gram_dev, tolerance);
        Ok(SemiUnitary {
            source_rank,
            target_rank,
            source_time,
            target_time,
            matrix,
            class_domain: domain,
            reverse: false,
            report,
            tolerance,
        })
    }

    pub fn source_rank(&self) -> Rank {
        self.source_rank
    }

    pub fn target_rank(&self) -> Rank {
        self.target_rank
    }

    pub fn source_time(&self) -> i64 {
        self.source_time
    }

    pub fn target_time(&self) -> i64 {
        self.target_time
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Admitted source signal classes as a bitmask; `None` admits all.
    pub fn class_domain(&self) -> Option<u64> {
        self.class_domain
    }

    /// Whether this stage was built as a reverse (time-reversal) stage.
    pub fn is_reverse(&self) -> bool {
        self.reverse
    }

    /// The report computed at construction, at the stage's own tolerance.
    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn is_schrodinger(&self) -> bool {
        self.report.is_schrodinger
    }

    /// Re-examines the Schrodinger block form at a caller-chosen tolerance.
    pub fn check_schrodinger(&self, tolerance: f64) -> ValidationReport {
        let (void_image_deviation, signal_leak_to_void) = schrodinger_figures(&self.matrix);
        ValidationReport {
            max_semiunitarity_deviation: self.report.max_semiunitarity_deviation,
            is_schrodinger: void_image_deviation <= tolerance && signal_leak_to_void <= tolerance,
            void_image_deviation,
            signal_leak_to_void,
        }
    }

    /// Applies the stage to a labstate at the source tick.
    pub fn apply(&self, state: &Labstate) -> Result<Labstate, EvolutionError> {
        if state.rank() != self.source_rank {
            return Err(EvolutionError::RankMismatch {
                expected: self.source_rank.get(),
                got: state.rank().get(),
            });
        }
        if state.time() != self.source_time {
            return Err(EvolutionError::TimeMismatch {
                expected: self.source_time,
                got: state.time(),
            });
        }
        if !state.is_normalized() {
            return Err(EvolutionError::StateNotNormalized);
        }
        if let Some(mask) = self.class_domain {
            for (v, _) in state.raw_entries() {
                let class = v.count_ones();
                if mask >> class & 1 == 0 {
                    return Err(EvolutionError::OutOfDomain { index: v, class });
                }
            }
        }
        let tgt_dim = self.target_rank.dimension() as usize;
        let mut dense = vec![czero(); tgt_dim];
        // Source indices ascend, so each target accumulator sees its terms
        // in a fixed order regardless of sparsity pattern.
        for (v, amp) in state.raw_entries() {
            let col = v as usize;
            for (j, slot) in dense.iter_mut().enumerate() {
                let m = self.matrix[(j, col)];
                if m != czero() {
                    *slot += m * amp;
                }
            }
        }
        let mut amps: BTreeMap<u64, Complex64> = BTreeMap::new();
        let mut norm_sqr = 0.0f64;
        for (j, &a) in dense.iter().enumerate() {
            if a.norm_sqr() > PRUNE_THRESHOLD * PRUNE_THRESHOLD {
                norm_sqr += a.norm_sqr();
                amps.insert(j as u64, a);
            }
        }
        let normalized = libm::fabs(norm_sqr - 1.0) <= self.tolerance;
        Ok(Labstate::from_parts(self.target_time, self.target_rank, amps, normalized))
    }

    /// Matrix product `later * earlier` as one stage, revalidated
    /// defensively against floating-point drift.
    pub fn compose(later: &SemiUnitary, earlier: &SemiUnitary) -> Result<SemiUnitary, EvolutionError> {
        if earlier.target_rank != later.source_rank {
            return Err(EvolutionError::RankMismatch {
                expected: earlier.target_rank.get(),
                got: later.source_rank.get(),
            });
        }
        if earlier.target_time != later.source_time {
            return Err(EvolutionError::TimeMismatch {
                expected: earlier.target_time,
                got: later.source_time,
            });
        }
        let matrix = later.matrix.mul(&earlier.matrix);
        let class_domain = match (earlier.class_domain, later.class_domain) {
            (None, None) => None,
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (Some(a), Some(b)) => Some(a & b),
        };
        let tolerance = if earlier.tolerance > later.tolerance {
            earlier.tolerance
        } else {
            later.tolerance
        };
        let gram_dev = gram_deviation(&matrix, class_domain);
        if gram_dev > tolerance {
            return Err(EvolutionError::NotSemiUnitary { deviation: gram_dev, tolerance });
        }
        let report = build_report(&matrix, gram_dev, tolerance);
        Ok(SemiUnitary {
            source_rank: earlier.source_rank,
            target_rank: later.target_rank,
            source_time: earlier.source_time,
            target_time: later.target_time,
            matrix,
            class_domain,
            reverse: earlier.reverse || later.reverse,
            report,
            tolerance,
        })
    }

    /// Conjugate-transpose stage running the experiment backwards: from the
    /// target register at `target_time` to a copy of the source register one
    /// tick later. Composing it after the original gives the identity on
    /// the source register. Rank may shrink here, by design.
    pub fn reverse_stage(&self) -> SemiUnitary {
        let matrix = self.matrix.dagger();
        // The thin-side Gram of the transpose equals the forward Gram, so
        // the stored deviation carries over exactly.
        let report = build_report(&matrix, self.report.max_semiunitarity_deviation, self.tolerance);
        SemiUnitary {
            source_rank: self.target_rank,
            target_rank: self.source_rank,
            source_time: self.target_time,
            target_time: self.target_time + 1,
            matrix,
            class_domain: self.class_domain,
            reverse: true,
            report,
            tolerance: self.tolerance,
        }
    }

    /// Same operator moved to start at `source_time`, duration preserved.
    pub fn retimed(&self, source_time: i64) -> SemiUnitary {
        let duration = self.target_time - self.source_time;
        let mut out = self.clone();
        out.source_time = source_time;
        out.target_time = source_time + duration;
        out
    }

    /// Dense target-space matrix `U A+_site U'`, the evolved image of the
    /// signal creation operator. Requires a Schrodinger stage.
    pub fn conjugate_signal_operator(&self, site: u32) -> Result<CMat, EvolutionError> {
        if site < 1 || site > self.source_rank.get() {
            return Err(BasisError::SiteOutOfRange { site, rank: self.source_rank.get() }.into());
        }
        if !self.report.is_schrodinger {
            return Err(EvolutionError::NotSchrodinger {
                void_image_deviation: self.report.void_image_deviation,
                signal_leak_to_void: self.report.signal_leak_to_void,
            });
        }
        let src_dim = self.source_rank.dimension() as usize;
        let bit = 1usize << (site - 1);
        let mut creation = CMat::zeros(src_dim, src_dim);
        for i in 0..src_dim {
            if i & bit == 0 {
                creation[(i | bit, i)] = Complex64::new(1.0, 0.0);
            }
        }
        Ok(self.matrix.mul(&creation).mul(&self.matrix.dagger()))
    }
}
