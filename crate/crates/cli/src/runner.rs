//! Experiment execution and the process exit contract.
//!
//! Exit codes: 0 success, 1 validation failure (normalization,
//! semi-unitarity, Schrodinger form, domain admission, conservation),
//! 2 parse or structural error, 3 resource limit (rank cap, stage size,
//! path budget). Diagnostics go to the error stream as `file:line:
//! message`; results go to the output stream.

use crate::dsl;
use crate::elaborate::{
    diagnostics, elaborate, enforce_schrodinger, severity_of_chain, severity_of_evolution,
    ElabError, Elaborated,
};
use crate::report::{
    final_rows, occupation_string, render_records, render_table, sample_outcomes, FinalRow,
    RunReport,
};
use heisenet::{BasisIndex, Labstate, LabstateError, Rank, PRUNE_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Records,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub use_paths: bool,
    pub tolerance: f64,
    pub format: Format,
    /// `(count, seed)` to append sampled outcome tallies.
    pub sample: Option<(u64, u64)>,
    pub max_rank: u32,
    pub path_budget: u64,
}

impl RunConfig {
    pub fn check(tolerance: f64, max_rank: u32) -> RunConfig {
        RunConfig {
            mode: Mode::Check,
            use_paths: false,
            tolerance,
            format: Format::Table,
            sample: None,
            max_rank,
            path_budget: heisenet::DEFAULT_PATH_BUDGET,
        }
    }
}

/// What the process should print and how it should exit.
pub struct Outcome {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

fn ok(stdout: String) -> Outcome {
    Outcome { exit_code: 0, stdout, stderr: String::new() }
}

fn fail(exit_code: i32, stderr: String) -> Outcome {
    Outcome { exit_code, stdout: String::new(), stderr }
}

/// Parses, elaborates, validates, and (in run mode) evolves and renders.
pub fn execute(text: &str, file: &str, config: &RunConfig) -> Outcome {
    let spec = match dsl::parse(text) {
        Ok(spec) => spec,
        Err(e) => {
            return fail(2, format!("{file}:{}:{}: {}\n", e.line, e.column, e.kind));
        }
    };

    let stage_fail = |e: ElabError| fail(e.severity.exit_code(), format!("{file}:{}: {}\n", e.line, e.message));

    let elab = match elaborate(&spec, config.tolerance, config.max_rank) {
        Ok(elab) => elab,
        Err(e) => return stage_fail(e),
    };
    if let Err(e) = enforce_schrodinger(&elab) {
        return stage_fail(e);
    }

    // Apply link by link so a failure names its source line.
    let mut state = elab.initial.clone();
    for (link, &line) in elab.chain.links().iter().zip(&elab.stage_lines) {
        state = match link.stage.apply(&state) {
            Ok(next) => next,
            Err(e) => {
                return fail(
                    severity_of_evolution(&e).exit_code(),
                    format!("{file}:{line}: {e}\n"),
                );
            }
        };
    }

    let conservation = (state.norm_sqr() - 1.0).abs();
    if conservation > config.tolerance {
        return fail(
            1,
            format!(
                "{file}: conservation deviation {conservation:.3e} exceeds tolerance {:.3e}\n",
                config.tolerance
            ),
        );
    }

    match config.mode {
        Mode::Check => ok(check_summary(&spec, &elab, conservation)),
        Mode::Run => run_output(&spec, &elab, state, file, config),
    }
}

fn check_summary(spec: &dsl::ExperimentSpec, elab: &Elaborated, conservation: f64) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "experiment {}", spec.name);
    let _ = writeln!(out, "rank {} time {}", spec.rank, spec.time);
    let initial_dev = (elab.initial.norm_sqr() - 1.0).abs();
    let _ = writeln!(out, "initial norm deviation {:.3e}", initial_dev);
    for diag in diagnostics(spec, elab) {
        let _ = write!(
            out,
            "stage {} (line {}) {}: rank {} -> {}, semiunitarity {:.3e}, schrodinger {}",
            diag.number,
            diag.line,
            diag.kind_name,
            diag.source_rank,
            diag.target_rank,
            diag.report.max_semiunitarity_deviation,
            if diag.report.is_schrodinger { "yes" } else { "no" },
        );
        if diag.reverse {
            let _ = write!(out, ", reverse");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "conservation deviation {:.3e}", conservation);
    out.push_str("check passed\n");
    out
}

fn run_output(
    spec: &dsl::ExperimentSpec,
    elab: &Elaborated,
    state: Labstate,
    file: &str,
    config: &RunConfig,
) -> Outcome {
    let rows = if config.use_paths {
        match path_rows(elab, &state, config.path_budget) {
            Ok(rows) => rows,
            Err(e) => {
                return fail(severity_of_chain(&e).exit_code(), format!("{file}: {e}\n"));
            }
        }
    } else {
        final_rows(&state)
    };
    let total_probability: f64 = rows.iter().map(|r| r.probability).sum();

    let samples = match config.sample {
        None => None,
        Some((count, seed)) => {
            // Rebuild at the session tolerance so the Born table is
            // available even when a stage carried a tighter one.
            let entries = state.entries().map(|(i, a)| (i.value(), a));
            let resampled = Labstate::general_state_tol(
                entries,
                state.rank(),
                state.time(),
                config.tolerance,
            );
            let table = resampled.and_then(|s| s.outcome_table());
            match table {
                Ok(table) => Some((seed, count, sample_outcomes(&table, count, seed))),
                Err(LabstateError::NotNormalized { norm_sqr, .. }) => {
                    return fail(
                        1,
                        format!(
                            "{file}: cannot sample an unnormalized readout (norm^2 = {norm_sqr:.17e})\n"
                        ),
                    );
                }
                Err(e) => return fail(2, format!("{file}: {e}\n")),
            }
        }
    };

    let report = RunReport {
        name: &spec.name,
        final_time: state.time(),
        final_rank: state.rank().get(),
        labels: &spec.labels,
        rows,
        total_probability,
        samples,
    };
    match config.format {
        Format::Table => ok(render_table(&report)),
        Format::Records => ok(render_records(&report)),
    }
}

/// Recomputes every final amplitude by explicit path summation. The
/// evolved state fixes which rank and time to report; amplitudes below
/// the pruning threshold drop, mirroring the iterated evaluator.
fn path_rows(
    elab: &Elaborated,
    state: &Labstate,
    budget: u64,
) -> Result<Vec<FinalRow>, heisenet::ChainError> {
    let rank: Rank = state.rank();
    let mut rows = Vec::new();
    for value in 0..rank.dimension() {
        let j = BasisIndex::new(value, rank).expect("value below dimension");
        let amplitude = elab.chain.amplitude_by_paths(j, &elab.initial, budget)?;
        if amplitude.norm_sqr() > PRUNE_THRESHOLD * PRUNE_THRESHOLD {
            rows.push(FinalRow {
                index: value,
                occupation: occupation_string(value, rank.get()),
                signals: heisenet::SignalSet::from_mask(value),
                amplitude,
                probability: amplitude.norm_sqr(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MZ: &str = "\
experiment mz
rank 2
label 2 dark
state 1 1
stage bs 1 2 0.7853981633974483 0
stage bs 1 2 0.7853981633974483 0
";

    fn run_config() -> RunConfig {
        RunConfig {
            mode: Mode::Run,
            use_paths: false,
            tolerance: 1e-10,
            format: Format::Table,
            sample: None,
            max_rank: 20,
            path_budget: heisenet::DEFAULT_PATH_BUDGET,
        }
    }

    #[test]
    fn run_prints_the_cross_port_row() {
        let out = execute(MZ, "mz.exp", &run_config());
        assert_eq!(out.exit_code, 0, "{}", out.stderr);
        assert!(out.stdout.contains("2 01 {2=dark} 0.00000000000e0 1.00000000000e0 1.00000000000e0"));
        assert!(out.stdout.contains("total 1.00000000000e0"));
    }

    #[test]
    fn paths_and_iterated_agree_to_the_byte() {
        let mut config = run_config();
        let iterated = execute(MZ, "mz.exp", &config);
        config.use_paths = true;
        let paths = execute(MZ, "mz.exp", &config);
        assert_eq!(iterated.exit_code, 0);
        assert_eq!(paths.exit_code, 0);
        assert_eq!(iterated.stdout, paths.stdout);
    }

    #[test]
    fn check_mode_summarizes_stages() {
        let out = execute(MZ, "mz.exp", &RunConfig::check(1e-10, 20));
        assert_eq!(out.exit_code, 0, "{}", out.stderr);
        assert!(out.stdout.contains("stage 1 (line 5) bs"));
        assert!(out.stdout.contains("schrodinger yes"));
        assert!(out.stdout.ends_with("check passed\n"));
    }

    #[test]
    fn exit_codes_follow_the_contract() {
        let cases: &[(&str, i32)] = &[
            ("experiment x\nrank 1\nstate 1 0.5\n", 1),
            ("experiment x\nrank 1\nstate 1 1\nstage matrix 2 2\n1 1\n0 0\n", 1),
            ("experiment x\nrank 1\nstate 1 1\nstage matrix 2 2\n0 1\n1 0\n", 1),
            ("experiment x\nrank 2\nstate 3 1\nstage bs 1 2 0.5 0\n", 1),
            ("experiment x\nbad delete\n", 2),
            ("experiment x\nrank 2\n", 2),
            ("experiment x\nrank 25\nstate 1 1\n", 3),
        ];
        for (text, code) in cases {
            let out = execute(text, "t.exp", &run_config());
            assert_eq!(out.exit_code, *code, "{text} -> {}", out.stderr);
            assert!(out.stderr.starts_with("t.exp:"), "{}", out.stderr);
        }
    }

    #[test]
    fn sampling_appends_reproducible_tallies() {
        let mut config = run_config();
        config.sample = Some((1000, 7));
        let a = execute(MZ, "mz.exp", &config);
        let b = execute(MZ, "mz.exp", &config);
        assert_eq!(a.exit_code, 0);
        assert_eq!(a.stdout, b.stdout);
        assert!(a.stdout.contains("samples count=1000 seed=7"));
        assert!(a.stdout.contains("sample {2=dark} 1000"));
    }
}
