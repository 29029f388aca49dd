//! Output rendering and outcome sampling.
//!
//! Both formats print every number through [`fmt_sig`], which fixes 12
//! significant digits and canonicalizes negative zero, so a run's bytes
//! are identical across repeats and across evaluators that agree to
//! twelve digits.

use heisenet::{Complex64, Labstate, Lcg64, OutcomeTable, SignalSet};
use std::collections::BTreeMap;
use std::fmt::Write;

/// 12 significant digits in scientific form, `-0` collapsed to `0`.
pub fn fmt_sig(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{:.11e}", x)
}

/// One printed line of the final readout.
pub struct FinalRow {
    pub index: u64,
    pub occupation: String,
    pub signals: SignalSet,
    pub amplitude: Complex64,
    pub probability: f64,
}

/// Everything the renderers need about a finished run.
pub struct RunReport<'a> {
    pub name: &'a str,
    pub final_time: i64,
    pub final_rank: u32,
    pub labels: &'a BTreeMap<u32, String>,
    pub rows: Vec<FinalRow>,
    pub total_probability: f64,
    /// `(seed, draw count, per-outcome tallies)` when sampling was asked for.
    pub samples: Option<(u64, u64, Vec<(SignalSet, u64)>)>,
}

/// Occupation string `e1 e2 ... e_rank`, qubit 1 first.
pub fn occupation_string(index: u64, rank: u32) -> String {
    (0..rank).map(|j| if index >> j & 1 == 1 { '1' } else { '0' }).collect()
}

/// Rows of the final state in ascending index order.
pub fn final_rows(state: &Labstate) -> Vec<FinalRow> {
    let rank = state.rank().get();
    state
        .entries()
        .map(|(index, amplitude)| FinalRow {
            index: index.value(),
            occupation: occupation_string(index.value(), rank),
            signals: heisenet::signal_set_of(index),
            amplitude,
            probability: amplitude.norm_sqr(),
        })
        .collect()
}

/// `{1=name,3}` with labels spliced in where a fired qubit has one.
fn signals_with_labels(signals: SignalSet, labels: &BTreeMap<u32, String>) -> String {
    let mut out = String::from("{");
    let mut first = true;
    for q in signals.qubits() {
        if !first {
            out.push(',');
        }
        first = false;
        match labels.get(&q) {
            Some(name) => {
                let _ = write!(out, "{}={}", q, name);
            }
            None => {
                let _ = write!(out, "{}", q);
            }
        }
    }
    out.push('}');
    out
}

pub fn render_table(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "experiment {}", report.name);
    let _ = writeln!(out, "final time {} rank {}", report.final_time, report.final_rank);
    let _ = writeln!(out, "index occupation signals amplitude_re amplitude_im probability");
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            row.index,
            row.occupation,
            signals_with_labels(row.signals, report.labels),
            fmt_sig(row.amplitude.re),
            fmt_sig(row.amplitude.im),
            fmt_sig(row.probability),
        );
    }
    let _ = writeln!(out, "total {}", fmt_sig(report.total_probability));
    if let Some((seed, count, tallies)) = &report.samples {
        let _ = writeln!(out, "samples count={} seed={}", count, seed);
        for (signals, n) in tallies {
            let _ = writeln!(out, "sample {} {}", signals_with_labels(*signals, report.labels), n);
        }
    }
    out
}

/// One JSON object per line: a head record, one record per outcome, a
/// total record, and sample records when sampling ran.
pub fn render_records(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{{\"experiment\":{},\"final_time\":{},\"final_rank\":{}}}",
        serde_json::to_string(report.name).expect("strings always serialize"),
        report.final_time,
        report.final_rank
    );
    for row in &report.rows {
        let signals: Vec<u32> = row.signals.qubits().collect();
        let _ = write!(
            out,
            "{{\"index\":{},\"occupation\":\"{}\",\"signals\":{}",
            row.index,
            row.occupation,
            serde_json::to_string(&signals).expect("integer arrays always serialize"),
        );
        let labeled: BTreeMap<String, &String> = row
            .signals
            .qubits()
            .filter_map(|q| report.labels.get(&q).map(|name| (q.to_string(), name)))
            .collect();
        if !labeled.is_empty() {
            let _ = write!(
                out,
                ",\"labels\":{}",
                serde_json::to_string(&labeled).expect("string maps always serialize")
            );
        }
        let _ = writeln!(
            out,
            ",\"amplitude_re\":{},\"amplitude_im\":{},\"probability\":{}}}",
            fmt_sig(row.amplitude.re),
            fmt_sig(row.amplitude.im),
            fmt_sig(row.probability),
        );
    }
    let _ = writeln!(out, "{{\"total_probability\":{}}}", fmt_sig(report.total_probability));
    if let Some((seed, count, tallies)) = &report.samples {
        let _ = writeln!(out, "{{\"samples\":{},\"seed\":{}}}", count, seed);
        for (signals, n) in tallies {
            let qs: Vec<u32> = signals.qubits().collect();
            let _ = writeln!(
                out,
                "{{\"sample\":{},\"count\":{}}}",
                serde_json::to_string(&qs).expect("integer arrays always serialize"),
                n
            );
        }
    }
    out
}

/// Draws `count` outcomes from a Born table with the library generator
/// and tallies them per signal set, ascending by basis index.
pub fn sample_outcomes(table: &OutcomeTable, count: u64, seed: u64) -> Vec<(SignalSet, u64)> {
    let mut rng = Lcg64::new(seed);
    let rows = table.rows();
    let total = table.total();
    let mut tallies: Vec<u64> = vec![0; rows.len()];
    for _ in 0..count {
        let x = rng.next_f64() * total;
        let mut acc = 0.0;
        let mut picked = rows.len().saturating_sub(1);
        for (i, row) in rows.iter().enumerate() {
            acc += row.probability;
            if x < acc {
                picked = i;
                break;
            }
        }
        if !rows.is_empty() {
            tallies[picked] += 1;
        }
    }
    rows.iter().zip(tallies).map(|(row, n)| (row.signals, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use heisenet::{Labstate, Rank};

    #[test]
    fn fmt_sig_pins_twelve_digits() {
        assert_eq!(fmt_sig(1.0), "1.00000000000e0");
        assert_eq!(fmt_sig(1.0000000000000002), "1.00000000000e0");
        assert_eq!(fmt_sig(0.5000000000000001), "5.00000000000e-1");
        assert_eq!(fmt_sig(-0.0), "0.00000000000e0");
        assert_eq!(fmt_sig(0.7071067811865476), "7.07106781187e-1");
        assert_eq!(fmt_sig(-1.5e-13), "-1.50000000000e-13");
    }

    #[test]
    fn occupation_reads_qubit_one_first() {
        assert_eq!(occupation_string(5, 3), "101");
        assert_eq!(occupation_string(2, 2), "01");
        assert_eq!(occupation_string(0, 4), "0000");
    }

    #[test]
    fn labels_splice_into_signal_sets() {
        let mut labels = BTreeMap::new();
        labels.insert(1, "bright".to_string());
        assert_eq!(
            signals_with_labels(SignalSet::from_mask(0b101), &labels),
            "{1=bright,3}"
        );
        assert_eq!(signals_with_labels(SignalSet::from_mask(0), &labels), "{}");
    }

    #[test]
    fn sampling_is_reproducible_and_roughly_born() {
        let rank = Rank::new(2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let state = Labstate::general_state(
            [(1u64, Complex64::new(h, 0.0)), (2u64, Complex64::new(0.0, h))],
            rank,
            0,
        )
        .unwrap();
        let table = state.outcome_table().unwrap();
        let a = sample_outcomes(&table, 100_000, 42);
        let b = sample_outcomes(&table, 100_000, 42);
        assert_eq!(a, b);
        let total: u64 = a.iter().map(|(_, n)| n).sum();
        assert_eq!(total, 100_000);
        for (_, n) in &a {
            let freq = *n as f64 / 100_000.0;
            assert!((freq - 0.5).abs() < 0.01, "freq {freq}");
        }
        let c = sample_outcomes(&table, 100_000, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn records_lines_are_valid_json() {
        let mut labels = BTreeMap::new();
        labels.insert(2, "dark".to_string());
        let report = RunReport {
            name: "demo \"quoted\"",
            final_time: 2,
            final_rank: 2,
            labels: &labels,
            rows: vec![FinalRow {
                index: 2,
                occupation: "01".to_string(),
                signals: SignalSet::from_mask(0b10),
                amplitude: Complex64::new(0.0, 1.0),
                probability: 1.0,
            }],
            total_probability: 1.0,
            samples: Some((7, 3, vec![(SignalSet::from_mask(0b10), 3)])),
        };
        let text = render_records(&report);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).expect(line);
            assert!(v.is_object());
        }
        assert!(text.contains("\"labels\":{\"2\":\"dark\"}"));
        assert!(text.contains("\"amplitude_im\":1.00000000000e0"));
    }

    #[test]
    fn table_lists_rows_between_header_and_total() {
        let labels = BTreeMap::new();
        let report = RunReport {
            name: "demo",
            final_time: 1,
            final_rank: 1,
            labels: &labels,
            rows: vec![FinalRow {
                index: 1,
                occupation: "1".to_string(),
                signals: SignalSet::from_mask(1),
                amplitude: Complex64::new(1.0, 0.0),
                probability: 1.0,
            }],
            total_probability: 1.0,
            samples: None,
        };
        let text = render_table(&report);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "experiment demo");
        assert_eq!(lines[1], "final time 1 rank 1");
        assert_eq!(lines[3], "1 1 {1} 1.00000000000e0 0.00000000000e0 1.00000000000e0");
        assert_eq!(lines[4], "total 1.00000000000e0");
    }
}
