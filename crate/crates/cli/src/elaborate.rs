//! Turns a parsed [`ExperimentSpec`] into a concrete initial labstate and
//! stage chain.
//!
//! Builtin stages (`bs`, `phase`, `grow`, `swap`) elaborate through the
//! one-signal block and are validated at a fixed 1e-12 tolerance; explicit
//! `matrix` stages and the initial state use the session tolerance. Grow
//! columns are normalized before embedding, so `0.7071` works as a literal
//! for an even split.
//!
//! Every failure carries a severity that fixes the process exit code:
//! structural mistakes (bad references, shape mismatches) exit 2,
//! numerical validation failures (normalization, semi-unitarity, domain)
//! exit 1, resource limits (rank cap, stage size, path budget) exit 3.

use crate::dsl::{ExperimentSpec, StageKind};
use heisenet::{
    BasisError, CMat, ChainError, Complex64, EvolutionError, Labstate, LabstateError, Rank,
    SemiUnitary, StageChain, ValidationReport, MAX_RANK,
};

/// Validation tolerance for stages built from exact angle formulas.
pub const BUILTIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    /// The file cannot mean anything; exit code 2.
    Structural,
    /// The numbers fail a physical check; exit code 1.
    Validation,
    /// The experiment is too big for this session; exit code 3.
    Resource,
}

impl Severity {
    pub fn exit_code(self) -> i32 {
        match self {
            Severity::Validation => 1,
            Severity::Structural => 2,
            Severity::Resource => 3,
        }
    }
}

/// Elaboration failure, anchored to the source line it came from.
#[derive(Debug, Clone)]
pub struct ElabError {
    pub line: usize,
    pub severity: Severity,
    pub message: String,
}

impl ElabError {
    fn new(line: usize, severity: Severity, message: impl Into<String>) -> ElabError {
        ElabError { line, severity, message: message.into() }
    }
}

/// Ready-to-run experiment.
#[derive(Debug)]
pub struct Elaborated {
    pub chain: StageChain,
    pub initial: Labstate,
    /// Source line of each chain link, parallel to `chain.links()`.
    pub stage_lines: Vec<usize>,
}

/// Severity of a stage-level failure, for exit-code mapping.
pub fn severity_of_evolution(e: &EvolutionError) -> Severity {
    match e {
        EvolutionError::NotSemiUnitary { .. }
        | EvolutionError::BlockNotIsometric { .. }
        | EvolutionError::ClassCollision { .. }
        | EvolutionError::NotSchrodinger { .. }
        | EvolutionError::OutOfDomain { .. }
        | EvolutionError::StateNotNormalized => Severity::Validation,
        EvolutionError::StageTooLarge { .. } => Severity::Resource,
        EvolutionError::Basis(BasisError::RankOutOfRange { .. }) => Severity::Resource,
        EvolutionError::ShapeMismatch { .. }
        | EvolutionError::RankOrder { .. }
        | EvolutionError::TimeOrder { .. }
        | EvolutionError::RankMismatch { .. }
        | EvolutionError::TimeMismatch { .. }
        | EvolutionError::Basis(_) => Severity::Structural,
    }
}

/// Severity of a chain-level failure, for exit-code mapping.
pub fn severity_of_chain(e: &ChainError) -> Severity {
    match e {
        ChainError::Evolution(inner) => severity_of_evolution(inner),
        ChainError::PathBudgetExceeded { .. } => Severity::Resource,
        ChainError::JunctionRank { .. }
        | ChainError::JunctionTime { .. }
        | ChainError::NonMonotoneRank { .. }
        | ChainError::FinalRankMismatch { .. } => Severity::Structural,
    }
}

fn evolution_error(line: usize, e: EvolutionError) -> ElabError {
    ElabError::new(line, severity_of_evolution(&e), e.to_string())
}

fn chain_error(line: usize, e: ChainError) -> ElabError {
    ElabError::new(line, severity_of_chain(&e), e.to_string())
}

fn check_rank_cap(value: u32, cap: u32, line: usize) -> Result<(), ElabError> {
    let cap = cap.min(MAX_RANK);
    if value > cap {
        return Err(ElabError::new(
            line,
            Severity::Resource,
            format!("rank {value} exceeds the session cap {cap}"),
        ));
    }
    Ok(())
}

fn check_qubit(q: u32, rank: u32, line: usize) -> Result<(), ElabError> {
    if q < 1 || q > rank {
        return Err(ElabError::new(
            line,
            Severity::Structural,
            format!("qubit {q} outside 1..={rank}"),
        ));
    }
    Ok(())
}

fn all_classes(rank: u32) -> Vec<u32> {
    (0..=rank).collect()
}

fn bs_block(rank: u32, i: u32, j: u32, theta: f64, phi: f64) -> CMat {
    let mut block = CMat::identity(rank as usize);
    let (i, j) = ((i - 1) as usize, (j - 1) as usize);
    let cos_t = theta.cos();
    let sin_t = theta.sin();
    let i_unit = Complex64::new(0.0, 1.0);
    let phase = Complex64::from_polar(1.0, phi);
    block[(i, i)] = Complex64::new(cos_t, 0.0);
    block[(j, j)] = Complex64::new(cos_t, 0.0);
    block[(i, j)] = i_unit * phase * sin_t;
    block[(j, i)] = i_unit * phase.conj() * sin_t;
    block
}

fn grow_block(
    rank: u32,
    new_rank: u32,
    columns: &[(u32, Vec<(u32, Complex64)>)],
    line: usize,
) -> Result<CMat, ElabError> {
    let mut block = CMat::zeros(new_rank as usize, rank as usize);
    let mut seen = 0u64;
    for (q, terms) in columns {
        check_qubit(*q, rank, line)?;
        let bit = 1u64 << (q - 1);
        if seen & bit != 0 {
            return Err(ElabError::new(
                line,
                Severity::Structural,
                format!("grow lists source qubit {q} twice"),
            ));
        }
        seen |= bit;
        let mut norm_sqr = 0.0;
        let mut targets = 0u64;
        for (t, c) in terms {
            check_qubit(*t, new_rank, line)?;
            let tbit = 1u64 << (t - 1);
            if targets & tbit != 0 {
                return Err(ElabError::new(
                    line,
                    Severity::Structural,
                    format!("grow column {q} lists target qubit {t} twice"),
                ));
            }
            targets |= tbit;
            norm_sqr += c.norm_sqr();
        }
        if norm_sqr == 0.0 {
            return Err(ElabError::new(
                line,
                Severity::Validation,
                format!("grow column {q} has zero norm and cannot be normalized"),
            ));
        }
        let norm = norm_sqr.sqrt();
        for (t, c) in terms {
            block[((t - 1) as usize, (q - 1) as usize)] = c / norm;
        }
    }
    if seen != (1u64 << rank) - 1 {
        let missing = (1..=rank).find(|q| seen & (1u64 << (q - 1)) == 0).unwrap_or(0);
        return Err(ElabError::new(
            line,
            Severity::Structural,
            format!("grow is missing a column for source qubit {missing}"),
        ));
    }
    Ok(block)
}

/// Builds the chain and initial state, or reports the first failure.
pub fn elaborate(spec: &ExperimentSpec, tolerance: f64, max_rank: u32) -> Result<Elaborated, ElabError> {
    check_rank_cap(spec.rank, max_rank, spec.rank_line)?;
    let rank = Rank::new(spec.rank).map_err(|e| {
        ElabError::new(spec.rank_line, Severity::Resource, e.to_string())
    })?;
    let initial =
        Labstate::general_state_tol(spec.state.iter().copied(), rank, spec.time, tolerance)
            .map_err(|e| {
                let severity = match e {
                    LabstateError::NotNormalized { .. } => Severity::Validation,
                    _ => Severity::Structural,
                };
                ElabError::new(spec.state_line, severity, e.to_string())
            })?;

    let mut chain = StageChain::new();
    let mut stage_lines = Vec::with_capacity(spec.stages.len());
    let mut built: Vec<SemiUnitary> = Vec::with_capacity(spec.stages.len());
    let mut current_rank = spec.rank;
    let mut current_time = spec.time;

    for stage_spec in &spec.stages {
        let line = stage_spec.line;
        let (stage, is_reverse) = match &stage_spec.kind {
            StageKind::Bs { i, j, theta, phi } => {
                check_qubit(*i, current_rank, line)?;
                check_qubit(*j, current_rank, line)?;
                if i == j {
                    return Err(ElabError::new(
                        line,
                        Severity::Structural,
                        format!("bs needs two distinct qubits, got {i} twice"),
                    ));
                }
                let block = bs_block(current_rank, *i, *j, *theta, *phi);
                let stage = SemiUnitary::extend_one_signal(
                    &block,
                    &[0, 1],
                    current_time,
                    current_time + 1,
                    BUILTIN_TOL,
                )
                .map_err(|e| evolution_error(line, e))?;
                (stage, false)
            }
            StageKind::Phase { i, phi } => {
                check_qubit(*i, current_rank, line)?;
                let mut block = CMat::identity(current_rank as usize);
                block[((i - 1) as usize, (i - 1) as usize)] = Complex64::from_polar(1.0, *phi);
                let stage = SemiUnitary::extend_one_signal(
                    &block,
                    &all_classes(current_rank),
                    current_time,
                    current_time + 1,
                    BUILTIN_TOL,
                )
                .map_err(|e| evolution_error(line, e))?;
                (stage, false)
            }
            StageKind::Swap { i, j } => {
                check_qubit(*i, current_rank, line)?;
                check_qubit(*j, current_rank, line)?;
                if i == j {
                    return Err(ElabError::new(
                        line,
                        Severity::Structural,
                        format!("swap needs two distinct qubits, got {i} twice"),
                    ));
                }
                let mut block = CMat::identity(current_rank as usize);
                let (a, b) = ((i - 1) as usize, (j - 1) as usize);
                block[(a, a)] = Complex64::new(0.0, 0.0);
                block[(b, b)] = Complex64::new(0.0, 0.0);
                block[(a, b)] = Complex64::new(1.0, 0.0);
                block[(b, a)] = Complex64::new(1.0, 0.0);
                let stage = SemiUnitary::extend_one_signal(
                    &block,
                    &all_classes(current_rank),
                    current_time,
                    current_time + 1,
                    BUILTIN_TOL,
                )
                .map_err(|e| evolution_error(line, e))?;
                (stage, false)
            }
            StageKind::Grow { new_rank, columns } => {
                if *new_rank < current_rank {
                    return Err(ElabError::new(
                        line,
                        Severity::Structural,
                        format!("grow cannot shrink the register from {current_rank} to {new_rank}"),
                    ));
                }
                check_rank_cap(*new_rank, max_rank, line)?;
                let block = grow_block(current_rank, *new_rank, columns, line)?;
                let stage = SemiUnitary::extend_one_signal(
                    &block,
                    &[0, 1],
                    current_time,
                    current_time + 1,
                    BUILTIN_TOL,
                )
                .map_err(|e| evolution_error(line, e))?;
                (stage, false)
            }
            StageKind::Matrix { target_dim, source_dim, rows } => {
                if !source_dim.is_power_of_two() || !target_dim.is_power_of_two() {
                    return Err(ElabError::new(
                        line,
                        Severity::Structural,
                        format!("matrix dimensions {target_dim}x{source_dim} must be powers of two"),
                    ));
                }
                let source_rank_val = source_dim.trailing_zeros();
                let target_rank_val = target_dim.trailing_zeros();
                if source_rank_val != current_rank {
                    return Err(ElabError::new(
                        line,
                        Severity::Structural,
                        format!(
                            "matrix source dimension {source_dim} does not match the register dimension {}",
                            1u64 << current_rank
                        ),
                    ));
                }
                if target_rank_val < source_rank_val {
                    return Err(ElabError::new(
                        line,
                        Severity::Structural,
                        format!(
                            "matrix shrinks the register from rank {source_rank_val} to {target_rank_val}; only a reverse stage may"
                        ),
                    ));
                }
                check_rank_cap(target_rank_val, max_rank, line)?;
                let source_rank = Rank::new(source_rank_val)
                    .map_err(|e| ElabError::new(line, Severity::Resource, e.to_string()))?;
                let target_rank = Rank::new(target_rank_val)
                    .map_err(|e| ElabError::new(line, Severity::Resource, e.to_string()))?;
                let matrix = CMat::from_rows(rows).ok_or_else(|| {
                    ElabError::new(line, Severity::Structural, "matrix body is ragged".to_string())
                })?;
                let stage = SemiUnitary::new(
                    matrix,
                    source_rank,
                    target_rank,
                    current_time,
                    current_time + 1,
                    tolerance,
                )
                .map_err(|e| evolution_error(line, e))?;
                (stage, false)
            }
            StageKind::Reverse { stage } => {
                if *stage > built.len() {
                    return Err(ElabError::new(
                        line,
                        Severity::Structural,
                        format!("reverse refers to stage {stage}, but only {} are defined so far", built.len()),
                    ));
                }
                let stage = built[*stage - 1].reverse_stage().retimed(current_time);
                (stage, true)
            }
        };
        current_rank = stage.target_rank().get();
        current_time = stage.target_time();
        built.push(stage.clone());
        let pushed = if is_reverse { chain.push_reverse(stage) } else { chain.push(stage) };
        pushed.map_err(|e| chain_error(line, e))?;
        stage_lines.push(line);
    }

    Ok(Elaborated { chain, initial, stage_lines })
}

/// Rejects any stage whose matrix is not in Schrodinger block form.
pub fn enforce_schrodinger(elab: &Elaborated) -> Result<(), ElabError> {
    for (link, &line) in elab.chain.links().iter().zip(&elab.stage_lines) {
        if !link.stage.is_schrodinger() {
            let report = link.stage.report();
            return Err(ElabError::new(
                line,
                Severity::Validation,
                format!(
                    "stage is not in Schrodinger form: void image deviation {:.3e}, signal leak {:.3e}",
                    report.void_image_deviation, report.signal_leak_to_void
                ),
            ));
        }
    }
    Ok(())
}

/// Per-stage figures for `check` mode, parallel to the chain links.
pub struct StageDiagnostic {
    pub number: usize,
    pub line: usize,
    pub kind_name: &'static str,
    pub report: ValidationReport,
    pub reverse: bool,
    pub source_rank: u32,
    pub target_rank: u32,
}

pub fn diagnostics(spec: &ExperimentSpec, elab: &Elaborated) -> Vec<StageDiagnostic> {
    elab.chain
        .links()
        .iter()
        .zip(&elab.stage_lines)
        .enumerate()
        .map(|(idx, (link, &line))| {
            let kind_name = match spec.stages[idx].kind {
                StageKind::Matrix { .. } => "matrix",
                StageKind::Bs { .. } => "bs",
                StageKind::Phase { .. } => "phase",
                StageKind::Grow { .. } => "grow",
                StageKind::Swap { .. } => "swap",
                StageKind::Reverse { .. } => "reverse",
            };
            StageDiagnostic {
                number: idx + 1,
                line,
                kind_name,
                report: link.stage.report().clone(),
                reverse: link.flagged_reverse,
                source_rank: link.stage.source_rank().get(),
                target_rank: link.stage.target_rank().get(),
            }
        })
        .collect()
}
