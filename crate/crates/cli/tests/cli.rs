//! End-to-end tests of the `heisenet` binary: frozen outputs for the
//! shipped examples, the exit-code contract over the broken-file corpus,
//! and parser robustness.

use heisenet_cli::dsl;
use std::process::{Command, Output};

fn example(name: &str) -> String {
    format!("{}/examples/{}.exp", env!("CARGO_MANIFEST_DIR"), name)
}

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{}.exp", env!("CARGO_MANIFEST_DIR"), name)
}

fn heisenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heisenet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = heisenet(args);
    assert!(
        out.status.success(),
        "heisenet {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("output is UTF-8")
}

#[test]
fn mach_zehnder_readout_is_frozen() {
    let expected = "\
experiment mach_zehnder
final time 2 rank 2
index occupation signals amplitude_re amplitude_im probability
2 01 {2=dark} 0.00000000000e0 1.00000000000e0 1.00000000000e0
total 1.00000000000e0
";
    assert_eq!(stdout_of(&["run", &example("mach_zehnder")]), expected);
}

#[test]
fn rank_growing_readout_is_frozen() {
    let expected = "\
experiment rank_growing
final time 1 rank 2
index occupation signals amplitude_re amplitude_im probability
1 10 {1} 7.07106781187e-1 0.00000000000e0 5.00000000000e-1
2 01 {2} 7.07106781187e-1 0.00000000000e0 5.00000000000e-1
total 1.00000000000e0
";
    assert_eq!(stdout_of(&["run", &example("rank_growing")]), expected);
}

#[test]
fn time_reversal_readout_is_frozen() {
    let expected = "\
experiment time_reversal
final time 2 rank 1
index occupation signals amplitude_re amplitude_im probability
1 1 {1} 1.00000000000e0 0.00000000000e0 1.00000000000e0
total 1.00000000000e0
";
    assert_eq!(stdout_of(&["run", &example("time_reversal")]), expected);
}

#[test]
fn epr_pair_readout_is_frozen() {
    let expected = "\
experiment epr_pair
final time 1 rank 4
index occupation signals amplitude_re amplitude_im probability
6 0110 {2,3=alice} 7.07106781187e-1 0.00000000000e0 5.00000000000e-1
9 1001 {1,4=bob} 0.00000000000e0 7.07106781187e-1 5.00000000000e-1
total 1.00000000000e0
";
    assert_eq!(stdout_of(&["run", &example("epr_pair")]), expected);
}

#[test]
fn epr_pair_records_are_frozen() {
    let expected = "\
{\"experiment\":\"epr_pair\",\"final_time\":1,\"final_rank\":4}
{\"index\":6,\"occupation\":\"0110\",\"signals\":[2,3],\"labels\":{\"3\":\"alice\"},\"amplitude_re\":7.07106781187e-1,\"amplitude_im\":0.00000000000e0,\"probability\":5.00000000000e-1}
{\"index\":9,\"occupation\":\"1001\",\"signals\":[1,4],\"labels\":{\"4\":\"bob\"},\"amplitude_re\":0.00000000000e0,\"amplitude_im\":7.07106781187e-1,\"probability\":5.00000000000e-1}
{\"total_probability\":1.00000000000e0}
";
    assert_eq!(
        stdout_of(&["run", &example("epr_pair"), "--format", "records"]),
        expected
    );
}

#[test]
fn check_summary_is_frozen() {
    let expected = "\
experiment time_reversal
rank 1 time 0
initial norm deviation 0.000e0
stage 1 (line 6) grow: rank 1 -> 2, semiunitarity 2.220e-16, schrodinger yes
stage 2 (line 7) reverse: rank 2 -> 1, semiunitarity 2.220e-16, schrodinger yes, reverse
conservation deviation 4.441e-16
check passed
";
    assert_eq!(stdout_of(&["check", &example("time_reversal")]), expected);
}

#[test]
fn every_example_passes_check() {
    for name in ["mach_zehnder", "rank_growing", "time_reversal", "epr_pair"] {
        let out = heisenet(&["check", &example(name)]);
        assert!(out.status.success(), "{name}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.ends_with("check passed\n"), "{name}: {text}");
        assert!(!text.contains("schrodinger no"), "{name}: {text}");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    for name in ["mach_zehnder", "rank_growing", "time_reversal", "epr_pair"] {
        let path = example(name);
        let first = stdout_of(&["run", &path]);
        let second = stdout_of(&["run", &path]);
        assert_eq!(first, second, "{name}");
        let records = stdout_of(&["run", &path, "--format", "records"]);
        assert_eq!(records, stdout_of(&["run", &path, "--format", "records"]), "{name}");
    }
}

#[test]
fn path_evaluator_matches_iterated_output_exactly() {
    for name in ["mach_zehnder", "rank_growing", "time_reversal", "epr_pair"] {
        let path = example(name);
        assert_eq!(
            stdout_of(&["run", &path]),
            stdout_of(&["run", &path, "--paths"]),
            "{name}"
        );
    }
}

#[test]
fn sampling_is_seeded_and_frozen() {
    let expected_tail = "\
samples count=100000 seed=1
sample {1} 50007
sample {2} 49993
";
    let out = stdout_of(&[
        "run",
        &example("rank_growing"),
        "--sample",
        "100000",
        "--seed",
        "1",
    ]);
    assert!(out.ends_with(expected_tail), "{out}");
    let again = stdout_of(&[
        "run",
        &example("rank_growing"),
        "--sample",
        "100000",
        "--seed",
        "1",
    ]);
    assert_eq!(out, again);
}

#[test]
fn broken_files_exit_with_contracted_codes() {
    let corpus: &[(&str, i32)] = &[
        ("bad_directive", 2),
        ("missing_state", 2),
        ("arity", 2),
        ("bad_complex", 2),
        ("duplicate_header", 2),
        ("non_isometric", 1),
        ("not_schrodinger", 1),
        ("unnormalized_state", 1),
        ("collision", 1),
        ("rank_cap", 3),
    ];
    for (name, code) in corpus {
        let path = fixture(name);
        for mode in ["run", "check"] {
            let out = heisenet(&[mode, &path]);
            assert_eq!(out.status.code(), Some(*code), "{mode} {name}");
            let stderr = String::from_utf8(out.stderr).unwrap();
            assert!(
                stderr.starts_with(&format!("{path}:")),
                "{mode} {name}: {stderr}"
            );
            assert!(out.stdout.is_empty(), "{mode} {name} printed a readout");
        }
    }
}

#[test]
fn parse_errors_carry_line_and_column() {
    let out = heisenet(&["run", &fixture("bad_complex")]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains(":4:9: malformed complex literal"),
        "{stderr}"
    );
}

#[test]
fn over_budget_only_fails_under_paths() {
    let path = fixture("over_budget");
    assert!(heisenet(&["run", &path]).status.success());
    let out = heisenet(&["run", &path, "--paths"]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("16777216"), "{stderr}");
    let raised = heisenet(&["run", &path, "--paths", "--path-budget", "20000000"]);
    assert!(raised.status.success(), "{}", String::from_utf8_lossy(&raised.stderr));
}

#[test]
fn rank_cap_is_adjustable() {
    let path = fixture("rank_cap");
    let out = heisenet(&["run", &path, "--max-rank", "26"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn loose_tolerance_admits_a_slightly_off_state() {
    let dir = std::env::temp_dir().join("heisenet_tol_test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("near.exp");
    std::fs::write(&path, "experiment near\nrank 1\nstate 1 0.999999\n").unwrap();
    let strict = heisenet(&["run", path.to_str().unwrap()]);
    assert_eq!(strict.status.code(), Some(1));
    let loose = heisenet(&["run", path.to_str().unwrap(), "--tol", "1e-4"]);
    assert!(loose.status.success(), "{}", String::from_utf8_lossy(&loose.stderr));
}

#[test]
fn missing_file_is_a_parse_level_failure() {
    let out = heisenet(&["run", "/nonexistent/experiment.exp"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn examples_round_trip_through_the_serializer() {
    for name in ["mach_zehnder", "rank_growing", "time_reversal", "epr_pair"] {
        let text = std::fs::read_to_string(example(name)).unwrap();
        let spec = dsl::parse(&text).unwrap();
        let round = dsl::parse(&dsl::serialize(&spec)).unwrap();
        assert_eq!(spec, round, "{name}");
    }
}

mod fuzz {
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        // The parser must reject or accept arbitrary bytes, never panic.
        #[test]
        fn parser_never_panics(text in ".{0,400}") {
            let _ = heisenet_cli::dsl::parse(&text);
        }

        // Keyword-rich soup hits the directive handlers much more often
        // than fully random text does.
        #[test]
        fn parser_never_panics_on_directive_soup(
            words in proptest::collection::vec(
                prop_oneof![
                    Just("experiment".to_string()),
                    Just("rank".to_string()),
                    Just("state".to_string()),
                    Just("stage".to_string()),
                    Just("matrix".to_string()),
                    Just("bs".to_string()),
                    Just("grow".to_string()),
                    Just("reverse".to_string()),
                    Just("1:".to_string()),
                    Just("\n".to_string()),
                    Just("#".to_string()),
                    "[0-9.,e-]{1,8}",
                ],
                0..40,
            )
        ) {
            let _ = heisenet_cli::dsl::parse(&words.join(" "));
        }

        // Whatever parses must survive a serialize/parse round trip.
        #[test]
        fn accepted_soup_round_trips(
            words in proptest::collection::vec(
                prop_oneof![
                    Just("experiment e".to_string()),
                    Just("rank 2".to_string()),
                    Just("time -1".to_string()),
                    Just("label 1 x y".to_string()),
                    Just("state 1 1".to_string()),
                    Just("state 1 0.6 2 0,0.8".to_string()),
                    Just("stage bs 1 2 0.5 -0.25".to_string()),
                    Just("stage phase 2 3.5".to_string()),
                    Just("stage swap 1 2".to_string()),
                    Just("stage grow 3 1: 1 0.6 2 0.8 2: 3 1".to_string()),
                    Just("stage reverse 1".to_string()),
                ],
                1..12,
            )
        ) {
            let text = words.join("\n");
            if let Ok(spec) = heisenet_cli::dsl::parse(&text) {
                let round = heisenet_cli::dsl::parse(&heisenet_cli::dsl::serialize(&spec))
                    .expect("serialized specs reparse");
                prop_assert_eq!(spec, round);
            }
        }
    }
}
