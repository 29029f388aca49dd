//! Line-oriented experiment file format.
//!
//! A file opens with `experiment NAME` and then gives one directive per
//! line: `rank`, `time`, `label`, `state`, or `stage`. A `#` starts a
//! comment that runs to the end of the line; blank lines are skipped.
//! Complex literals are `RE` or `RE,IM` with no spaces around the comma.
//!
//! [`parse`] rejects structurally inconsistent files (unknown directives,
//! arity mistakes, duplicate headers, state indices outside the register)
//! with 1-based line and column positions. Numeric validation such as
//! normalization or semi-unitarity is left to elaboration.

use heisenet::Complex64;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Parse failure at a specific spot in the file.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    /// 1-based line number.
    pub line: usize,
    /// 1-based byte offset of the offending token within its line.
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("expected `experiment NAME` as the first directive")]
    MissingHeader,
    #[error("duplicate `experiment` header")]
    DuplicateHeader,
    #[error("unknown directive `{0}`")]
    UnknownDirective(String),
    #[error("unknown stage kind `{0}`")]
    UnknownStageKind(String),
    #[error("`{directive}` expects {expected}")]
    Arity {
        directive: &'static str,
        expected: &'static str,
    },
    #[error("malformed integer `{0}`")]
    BadInt(String),
    #[error("malformed number `{0}`")]
    BadFloat(String),
    #[error("malformed complex literal `{0}`")]
    BadComplex(String),
    #[error("duplicate `rank` directive")]
    DuplicateRank,
    #[error("duplicate `time` directive")]
    DuplicateTime,
    #[error("duplicate `state` directive")]
    DuplicateState,
    #[error("duplicate label for qubit {0}")]
    DuplicateLabel(u32),
    #[error("label text is empty")]
    EmptyLabel,
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("qubit index must be at least 1")]
    ZeroQubit,
    #[error("matrix row has {got} entries, expected {expected}")]
    RowWidth { expected: u64, got: usize },
    #[error("matrix body ends after {got} of {expected} rows")]
    MissingRows { expected: u64, got: usize },
    #[error("state index {index} is outside a rank-{rank} register")]
    IndexOutOfRange { index: u64, rank: u32 },
    #[error("grow column list must start with `QUBIT:`")]
    BadColumnGroup,
    #[error("missing `rank` directive")]
    MissingRank,
    #[error("missing `state` directive")]
    MissingState,
}

/// One stage directive, tagged with the line it came from.
///
/// Equality ignores the line so that a parse/serialize round trip
/// compares equal even though serialization renumbers lines.
#[derive(Debug, Clone)]
pub struct StageSpec {
    pub line: usize,
    pub kind: StageKind,
}

impl PartialEq for StageSpec {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageKind {
    /// Explicit matrix, `target_dim` rows of `source_dim` complex entries.
    Matrix {
        target_dim: u64,
        source_dim: u64,
        rows: Vec<Vec<Complex64>>,
    },
    /// Beamsplitter between qubits `i` and `j` (1-based), angles in radians.
    Bs { i: u32, j: u32, theta: f64, phi: f64 },
    /// Phase `e^{i phi}` on qubit `i`.
    Phase { i: u32, phi: f64 },
    /// Rank growth; `columns[k] = (source_qubit, [(target_qubit, coeff)])`.
    Grow {
        new_rank: u32,
        columns: Vec<(u32, Vec<(u32, Complex64)>)>,
    },
    /// Exchange of qubits `i` and `j`.
    Swap { i: u32, j: u32 },
    /// Conjugate transpose of the 1-based `stage`th earlier stage.
    Reverse { stage: usize },
}

/// Parsed experiment file before elaboration into matrices.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub rank: u32,
    pub time: i64,
    pub labels: BTreeMap<u32, String>,
    /// `(index, amplitude)` pairs in file order; duplicates accumulate later.
    pub state: Vec<(u64, Complex64)>,
    pub stages: Vec<StageSpec>,
    /// Line carrying the `rank` directive, for diagnostics.
    pub rank_line: usize,
    /// Line carrying the `state` directive, for diagnostics.
    pub state_line: usize,
}

impl PartialEq for ExperimentSpec {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.rank == other.rank
            && self.time == other.time
            && self.labels == other.labels
            && self.state == other.state
            && self.stages == other.stages
    }
}

/// Comment-stripped tokens of one line with 1-based start columns.
fn tokenize(line: &str) -> Vec<(&str, usize)> {
    let end = line.find('#').unwrap_or(line.len());
    let body = &line[..end];
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in body.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push((&body[s..i], s + 1));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push((&body[s..], s + 1));
    }
    tokens
}

fn err(line: usize, column: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, column, kind }
}

fn parse_u32(tok: &str, line: usize, col: usize) -> Result<u32, ParseError> {
    tok.parse()
        .map_err(|_| err(line, col, ParseErrorKind::BadInt(tok.into())))
}

fn parse_u64(tok: &str, line: usize, col: usize) -> Result<u64, ParseError> {
    tok.parse()
        .map_err(|_| err(line, col, ParseErrorKind::BadInt(tok.into())))
}

fn parse_i64(tok: &str, line: usize, col: usize) -> Result<i64, ParseError> {
    tok.parse()
        .map_err(|_| err(line, col, ParseErrorKind::BadInt(tok.into())))
}

fn parse_f64(tok: &str, line: usize, col: usize) -> Result<f64, ParseError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| err(line, col, ParseErrorKind::BadFloat(tok.into())))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(err(line, col, ParseErrorKind::BadFloat(tok.into())))
    }
}

fn parse_complex(tok: &str, line: usize, col: usize) -> Result<Complex64, ParseError> {
    let bad = || err(line, col, ParseErrorKind::BadComplex(tok.into()));
    let mut parts = tok.split(',');
    let re = parts.next().ok_or_else(bad)?;
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = match parts.next() {
        None => 0.0,
        Some(im) => {
            if parts.next().is_some() {
                return Err(bad());
            }
            im.parse().map_err(|_| bad())?
        }
    };
    if re.is_finite() && im.is_finite() {
        Ok(Complex64::new(re, im))
    } else {
        Err(bad())
    }
}

/// Parse an experiment file. Never panics, whatever the input bytes.
pub fn parse(text: &str) -> Result<ExperimentSpec, ParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut name: Option<String> = None;
    let mut rank: Option<(u32, usize)> = None;
    let mut time: Option<i64> = None;
    let mut labels: BTreeMap<u32, String> = BTreeMap::new();
    let mut state: Option<(Vec<(u64, Complex64)>, usize)> = None;
    let mut stages: Vec<StageSpec> = Vec::new();

    let mut n = 0;
    while n < lines.len() {
        let lno = n + 1;
        let raw = lines[n];
        n += 1;
        let tokens = tokenize(raw);
        let Some(&(word, wcol)) = tokens.first() else {
            continue;
        };
        if name.is_none() && word != "experiment" {
            return Err(err(lno, wcol, ParseErrorKind::MissingHeader));
        }
        match word {
            "experiment" => {
                if name.is_some() {
                    return Err(err(lno, wcol, ParseErrorKind::DuplicateHeader));
                }
                if tokens.len() != 2 {
                    return Err(err(
                        lno,
                        wcol,
                        ParseErrorKind::Arity {
                            directive: "experiment",
                            expected: "one name",
                        },
                    ));
                }
                name = Some(tokens[1].0.to_string());
            }
            "rank" => {
                if rank.is_some() {
                    return Err(err(lno, wcol, ParseErrorKind::DuplicateRank));
                }
                if tokens.len() != 2 {
                    return Err(err(
                        lno,
                        wcol,
                        ParseErrorKind::Arity {
                            directive: "rank",
                            expected: "one integer",
                        },
                    ));
                }
                let r = parse_u32(tokens[1].0, lno, tokens[1].1)?;
                if r == 0 {
                    return Err(err(lno, tokens[1].1, ParseErrorKind::ZeroRank));
                }
                rank = Some((r, lno));
            }
            "time" => {
                if time.is_some() {
                    return Err(err(lno, wcol, ParseErrorKind::DuplicateTime));
                }
                if tokens.len() != 2 {
                    return Err(err(
                        lno,
                        wcol,
                        ParseErrorKind::Arity {
                            directive: "time",
                            expected: "one integer",
                        },
                    ));
                }
                time = Some(parse_i64(tokens[1].0, lno, tokens[1].1)?);
            }
            "label" => {
                if tokens.len() < 3 {
                    return Err(err(
                        lno,
                        wcol,
                        ParseErrorKind::Arity {
                            directive: "label",
                            expected: "a qubit index and a name",
                        },
                    ));
                }
                let q = parse_u32(tokens[1].0, lno, tokens[1].1)?;
                if q == 0 {
                    return Err(err(lno, tokens[1].1, ParseErrorKind::ZeroQubit));
                }
                // The label text is everything after the index token.
                let body_end = raw.find('#').unwrap_or(raw.len());
                let text_start = tokens[1].1 - 1 + tokens[1].0.len();
                let text = raw[text_start..body_end].trim();
                if text.is_empty() {
                    return Err(err(lno, tokens[1].1, ParseErrorKind::EmptyLabel));
                }
                if labels.insert(q, text.to_string()).is_some() {
                    return Err(err(lno, tokens[1].1, ParseErrorKind::DuplicateLabel(q)));
                }
            }
            "state" => {
                if state.is_some() {
                    return Err(err(lno, wcol, ParseErrorKind::DuplicateState));
                }
                let rest = &tokens[1..];
                if rest.is_empty() || rest.len() % 2 != 0 {
                    return Err(err(
                        lno,
                        wcol,
                        ParseErrorKind::Arity {
                            directive: "state",
                            expected: "one or more index/amplitude pairs",
                        },
                    ));
                }
                let mut entries = Vec::with_capacity(rest.len() / 2);
                for pair in rest.chunks(2) {
                    let idx = parse_u64(pair[0].0, lno, pair[0].1)?;
                    let amp = parse_complex(pair[1].0, lno, pair[1].1)?;
                    entries.push((idx, amp));
                }
                state = Some((entries, lno));
            }
            "stage" => {
                if tokens.len() < 2 {
                    return Err(err(
                        lno,
                        wcol,
                        ParseErrorKind::Arity {
                            directive: "stage",
                            expected: "a stage kind",
                        },
                    ));
                }
                let kind = parse_stage(&tokens, lno, &lines, &mut n)?;
                stages.push(StageSpec { line: lno, kind });
            }
            other => {
                return Err(err(lno, wcol, ParseErrorKind::UnknownDirective(other.into())));
            }
        }
    }

    let eof = lines.len() + 1;
    let Some(name) = name else {
        return Err(err(1, 1, ParseErrorKind::MissingHeader));
    };
    let Some((rank, rank_line)) = rank else {
        return Err(err(eof, 1, ParseErrorKind::MissingRank));
    };
    let Some((state, state_line)) = state else {
        return Err(err(eof, 1, ParseErrorKind::MissingState));
    };
    // Index bounds are a structural property of the file once the rank is
    // known. Ranks past 63 would overflow the shift; elaboration rejects
    // them before the state is ever used.
    if rank < 64 {
        let dim = 1u64 << rank;
        for &(idx, _) in &state {
            if idx >= dim {
                return Err(err(
                    state_line,
                    1,
                    ParseErrorKind::IndexOutOfRange { index: idx, rank },
                ));
            }
        }
    }

    Ok(ExperimentSpec {
        name,
        rank,
        time: time.unwrap_or(0),
        labels,
        state,
        stages,
        rank_line,
        state_line,
    })
}

fn parse_stage(
    tokens: &[(&str, usize)],
    lno: usize,
    lines: &[&str],
    n: &mut usize,
) -> Result<StageKind, ParseError> {
    let (kind, kcol) = tokens[1];
    let args = &tokens[2..];
    let arity = |expected: &'static str, directive: &'static str| {
        err(lno, kcol, ParseErrorKind::Arity { directive, expected })
    };
    match kind {
        "matrix" => {
            if args.len() != 2 {
                return Err(arity("target and source dimensions", "stage matrix"));
            }
            let target_dim = parse_u64(args[0].0, lno, args[0].1)?;
            let source_dim = parse_u64(args[1].0, lno, args[1].1)?;
            if target_dim == 0 || source_dim == 0 {
                return Err(err(lno, args[0].1, ParseErrorKind::BadInt("0".into())));
            }
            let mut rows = Vec::with_capacity(target_dim.min(4096) as usize);
            while (rows.len() as u64) < target_dim {
                let Some(row_raw) = lines.get(*n) else {
                    return Err(err(
                        lines.len() + 1,
                        1,
                        ParseErrorKind::MissingRows {
                            expected: target_dim,
                            got: rows.len(),
                        },
                    ));
                };
                let row_lno = *n + 1;
                *n += 1;
                let row_tokens = tokenize(row_raw);
                if row_tokens.is_empty() {
                    continue;
                }
                if row_tokens.len() as u64 != source_dim {
                    return Err(err(
                        row_lno,
                        row_tokens[0].1,
                        ParseErrorKind::RowWidth {
                            expected: source_dim,
                            got: row_tokens.len(),
                        },
                    ));
                }
                let mut row = Vec::with_capacity(row_tokens.len());
                for &(tok, col) in &row_tokens {
                    row.push(parse_complex(tok, row_lno, col)?);
                }
                rows.push(row);
            }
            Ok(StageKind::Matrix {
                target_dim,
                source_dim,
                rows,
            })
        }
        "bs" => {
            if args.len() != 4 {
                return Err(arity("two qubit indices and two angles", "stage bs"));
            }
            let i = parse_u32(args[0].0, lno, args[0].1)?;
            let j = parse_u32(args[1].0, lno, args[1].1)?;
            if i == 0 || j == 0 {
                return Err(err(lno, args[0].1, ParseErrorKind::ZeroQubit));
            }
            let theta = parse_f64(args[2].0, lno, args[2].1)?;
            let phi = parse_f64(args[3].0, lno, args[3].1)?;
            Ok(StageKind::Bs { i, j, theta, phi })
        }
        "phase" => {
            if args.len() != 2 {
                return Err(arity("a qubit index and an angle", "stage phase"));
            }
            let i = parse_u32(args[0].0, lno, args[0].1)?;
            if i == 0 {
                return Err(err(lno, args[0].1, ParseErrorKind::ZeroQubit));
            }
            let phi = parse_f64(args[1].0, lno, args[1].1)?;
            Ok(StageKind::Phase { i, phi })
        }
        "swap" => {
            if args.len() != 2 {
                return Err(arity("two qubit indices", "stage swap"));
            }
            let i = parse_u32(args[0].0, lno, args[0].1)?;
            let j = parse_u32(args[1].0, lno, args[1].1)?;
            if i == 0 || j == 0 {
                return Err(err(lno, args[0].1, ParseErrorKind::ZeroQubit));
            }
            Ok(StageKind::Swap { i, j })
        }
        "reverse" => {
            if args.len() != 1 {
                return Err(arity("one stage number", "stage reverse"));
            }
            let stage = parse_u64(args[0].0, lno, args[0].1)? as usize;
            if stage == 0 {
                return Err(err(lno, args[0].1, ParseErrorKind::BadInt("0".into())));
            }
            Ok(StageKind::Reverse { stage })
        }
        "grow" => {
            if args.is_empty() {
                return Err(arity("a new rank and a column map", "stage grow"));
            }
            let new_rank = parse_u32(args[0].0, lno, args[0].1)?;
            if new_rank == 0 {
                return Err(err(lno, args[0].1, ParseErrorKind::ZeroRank));
            }
            let mut columns: Vec<(u32, Vec<(u32, Complex64)>)> = Vec::new();
            let mut rest = &args[1..];
            while !rest.is_empty() {
                let (head, hcol) = rest[0];
                let Some(qtok) = head.strip_suffix(':') else {
                    return Err(err(lno, hcol, ParseErrorKind::BadColumnGroup));
                };
                let q = parse_u32(qtok, lno, hcol)?;
                if q == 0 {
                    return Err(err(lno, hcol, ParseErrorKind::ZeroQubit));
                }
                rest = &rest[1..];
                let mut terms = Vec::new();
                while !rest.is_empty() && !rest[0].0.ends_with(':') {
                    if rest.len() < 2 {
                        return Err(err(
                            lno,
                            rest[0].1,
                            ParseErrorKind::Arity {
                                directive: "stage grow",
                                expected: "target/coefficient pairs",
                            },
                        ));
                    }
                    let t = parse_u32(rest[0].0, lno, rest[0].1)?;
                    if t == 0 {
                        return Err(err(lno, rest[0].1, ParseErrorKind::ZeroQubit));
                    }
                    let c = parse_complex(rest[1].0, lno, rest[1].1)?;
                    terms.push((t, c));
                    rest = &rest[2..];
                }
                if terms.is_empty() {
                    return Err(err(lno, hcol, ParseErrorKind::BadColumnGroup));
                }
                columns.push((q, terms));
            }
            if columns.is_empty() {
                return Err(arity("a new rank and a column map", "stage grow"));
            }
            Ok(StageKind::Grow { new_rank, columns })
        }
        other => Err(err(lno, kcol, ParseErrorKind::UnknownStageKind(other.into()))),
    }
}

/// Shortest-round-trip complex literal, always in `RE,IM` form.
fn write_complex(out: &mut String, c: Complex64) {
    use fmt::Write;
    let _ = write!(out, "{},{}", c.re, c.im);
}

/// Render a spec back to file text. `parse(serialize(s)) == s` for every
/// spec that `parse` can produce; floats use shortest round-trip form.
pub fn serialize(spec: &ExperimentSpec) -> String {
    use fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "experiment {}", spec.name);
    let _ = writeln!(out, "rank {}", spec.rank);
    let _ = writeln!(out, "time {}", spec.time);
    for (q, text) in &spec.labels {
        let _ = writeln!(out, "label {} {}", q, text);
    }
    out.push_str("state");
    for &(idx, amp) in &spec.state {
        let _ = write!(out, " {} ", idx);
        write_complex(&mut out, amp);
    }
    out.push('\n');
    for stage in &spec.stages {
        match &stage.kind {
            StageKind::Matrix {
                target_dim,
                source_dim,
                rows,
            } => {
                let _ = writeln!(out, "stage matrix {} {}", target_dim, source_dim);
                for row in rows {
                    let mut first = true;
                    for &c in row {
                        if !first {
                            out.push(' ');
                        }
                        first = false;
                        write_complex(&mut out, c);
                    }
                    out.push('\n');
                }
            }
            StageKind::Bs { i, j, theta, phi } => {
                let _ = writeln!(out, "stage bs {} {} {} {}", i, j, theta, phi);
            }
            StageKind::Phase { i, phi } => {
                let _ = writeln!(out, "stage phase {} {}", i, phi);
            }
            StageKind::Swap { i, j } => {
                let _ = writeln!(out, "stage swap {} {}", i, j);
            }
            StageKind::Reverse { stage } => {
                let _ = writeln!(out, "stage reverse {}", stage);
            }
            StageKind::Grow { new_rank, columns } => {
                let _ = write!(out, "stage grow {}", new_rank);
                for (q, terms) in columns {
                    let _ = write!(out, " {}:", q);
                    for &(t, c) in terms {
                        let _ = write!(out, " {} ", t);
                        write_complex(&mut out, c);
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}
