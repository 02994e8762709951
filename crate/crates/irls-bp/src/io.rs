//! Text formats: problem files, trace CSV, experiment tables and
//! iterate files.
//!
//! Problem file (`IRLS-PROBLEM v1`):
//!
//! ```text
//! IRLS-PROBLEM v1
//! N m s
//! y:
//! <m reals>
//! A:
//! <m lines of N reals>
//! xstar:            (optional)
//! <N reals>
//! ```
//!
//! Reals are written in the shortest decimal form that parses back to the
//! same bits, so a write/read cycle is exact.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use irls_bp_core::irls::StepPath;
use irls_bp_core::{DenseMatrix, IterationRecord, Problem};
use thiserror::Error;

use crate::experiments::{DimDepRow, TrialResult};

pub const PROBLEM_MAGIC: &str = "IRLS-PROBLEM v1";
pub const TRACE_HEADER: [&str; 12] = [
    "k",
    "eps",
    "J",
    "gap",
    "l1_err",
    "mu",
    "mu_l1",
    "zeta",
    "support_ok",
    "path",
    "cg_iters",
    "feas_residual",
];

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] irls_bp_core::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn parse_err(msg: impl Into<String>) -> FormatError {
    FormatError::Parse(msg.into())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Shortest round-trip decimal; `inf`, `-inf` for infinities.
pub fn fmt_real(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

fn write_reals(out: &mut String, values: &[f64]) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        out.push_str(&fmt_real(*v));
    }
    out.push('\n');
}

pub fn serialize_problem(p: &Problem) -> String {
    let (m, n) = (p.m(), p.n());
    let mut out = String::with_capacity(24 * (m + 1) * (n + 1));
    let _ = writeln!(out, "{PROBLEM_MAGIC}");
    let _ = writeln!(out, "{n} {m} {}", p.s);
    out.push_str("y:\n");
    write_reals(&mut out, &p.y);
    out.push_str("A:\n");
    for i in 0..m {
        write_reals(&mut out, p.a.row(i));
    }
    if let Some(xs) = &p.x_star {
        out.push_str("xstar:\n");
        write_reals(&mut out, xs);
    }
    out
}

pub fn parse_problem(text: &str) -> Result<Problem> {
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(PROBLEM_MAGIC) {
        return Err(parse_err(format!("first line must be '{PROBLEM_MAGIC}'")));
    }
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| parse_err("missing 'N m s' line"))?
        .split_whitespace()
        .collect();
    let [n, m, s] = header[..] else {
        return Err(parse_err("header must hold exactly 'N m s'"));
    };
    let int = |t: &str| t.parse::<usize>().map_err(|_| parse_err(format!("bad integer '{t}'")));
    let (n, m, s) = (int(n)?, int(m)?, int(s)?);

    let mut tokens = lines.flat_map(str::split_whitespace).peekable();
    let mut section = |label: &str, count: usize| -> Result<Vec<f64>> {
        match tokens.next() {
            Some(t) if t == label => {}
            Some(t) => return Err(parse_err(format!("expected '{label}', found '{t}'"))),
            None => return Err(parse_err(format!("missing '{label}' section"))),
        }
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let t = tokens
                .next()
                .ok_or_else(|| parse_err(format!("'{label}' section ends after {} values", values.len())))?;
            let v: f64 = t
                .parse()
                .map_err(|_| parse_err(format!("bad real '{t}' in '{label}'")))?;
            values.push(v);
        }
        Ok(values)
    };
    let y = section("y:", m)?;
    let entries = section("A:", m * n)?;
    let x_star = match section("xstar:", n) {
        Ok(v) => Some(v),
        Err(FormatError::Parse(msg)) if msg == "missing 'xstar:' section" => None,
        Err(e) => return Err(e),
    };
    if let Some(t) = tokens.next() {
        return Err(parse_err(format!("unexpected trailing token '{t}'")));
    }
    let a = DenseMatrix::new(m, n, entries)?;
    Ok(Problem::new(a, y, s, x_star)?)
}

pub fn write_problem(path: &Path, p: &Problem) -> Result<()> {
    fs::write(path, serialize_problem(p)).map_err(io_err(path))
}

pub fn read_problem(path: &Path) -> Result<Problem> {
    parse_problem(&fs::read_to_string(path).map_err(io_err(path))?)
}

fn path_name(p: StepPath) -> &'static str {
    match p {
        StepPath::Direct => "direct",
        StepPath::Woodbury => "woodbury",
    }
}

fn trace_fields(r: &IterationRecord) -> [String; 12] {
    [
        r.k.to_string(),
        fmt_real(r.eps),
        fmt_opt(r.j),
        fmt_opt(r.gap),
        fmt_opt(r.l1_err),
        fmt_opt(r.mu),
        fmt_opt(r.mu_l1),
        fmt_opt(r.zeta),
        r.support_ok.map(|b| b.to_string()).unwrap_or_default(),
        path_name(r.path).to_string(),
        r.cg_iters.to_string(),
        fmt_opt(r.feas_residual),
    ]
}

pub fn write_trace<W: Write>(out: W, trace: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        w.write_record(trace_fields(r))?;
    }
    w.flush().map_err(|e| FormatError::Csv(e.into()))?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &[IterationRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_trace(std::io::BufWriter::new(file), trace)
}

fn parse_opt(field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| parse_err(format!("bad real '{field}'")))
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<IterationRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(parse_err("trace header does not match"));
    }
    let mut trace: Vec<IterationRecord> = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let f = |i: usize| row.get(i).unwrap_or("");
        let k: usize = f(0).parse().map_err(|_| parse_err(format!("bad k '{}'", f(0))))?;
        if trace.last().is_some_and(|prev| prev.k >= k) {
            return Err(parse_err("k must be strictly increasing"));
        }
        let support_ok = match f(8) {
            "" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => return Err(parse_err(format!("bad boolean '{other}'"))),
        };
        let path = match f(9) {
            "direct" => StepPath::Direct,
            "woodbury" => StepPath::Woodbury,
            other => return Err(parse_err(format!("bad path '{other}'"))),
        };
        trace.push(IterationRecord {
            k,
            eps: parse_opt(f(1))?.ok_or_else(|| parse_err("eps is required"))?,
            j: parse_opt(f(2))?,
            gap: parse_opt(f(3))?,
            l1_err: parse_opt(f(4))?,
            mu: parse_opt(f(5))?,
            mu_l1: parse_opt(f(6))?,
            zeta: parse_opt(f(7))?,
            support_ok,
            path,
            cg_iters: f(10)
                .parse()
                .map_err(|_| parse_err(format!("bad cg_iters '{}'", f(10))))?,
            feas_residual: parse_opt(f(11))?,
        });
    }
    Ok(trace)
}

pub fn read_trace_file(path: &Path) -> Result<Vec<IterationRecord>> {
    read_trace(fs::File::open(path).map_err(io_err(path))?)
}

/// One line of space-separated reals per iterate.
pub fn write_vectors(path: &Path, vectors: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    for v in vectors {
        write_reals(&mut out, v);
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_vectors(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.parse().map_err(|_| parse_err(format!("bad real '{t}'"))))
                .collect()
        })
        .collect()
}

/// Per-iteration rows of all trials: `trial,N,m,s`, the trace columns,
/// then `success` and `error`. A trial whose solve failed contributes one
/// row with empty trace columns.
pub fn write_rates_table<W: Write>(out: W, results: &[TrialResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["trial", "N", "m", "s"];
    header.extend(TRACE_HEADER);
    header.extend(["success", "error"]);
    w.write_record(&header)?;
    for r in results {
        let prefix = [r.trial.to_string(), r.n.to_string(), r.m.to_string(), r.s.to_string()];
        let suffix = [r.success.to_string(), r.error.clone().unwrap_or_default()];
        if r.trace.is_empty() {
            let blank = vec![String::new(); TRACE_HEADER.len()];
            w.write_record(prefix.iter().chain(&blank).chain(&suffix))?;
        }
        for rec in &r.trace {
            w.write_record(prefix.iter().chain(&trace_fields(rec)).chain(&suffix))?;
        }
    }
    w.flush().map_err(|e| FormatError::Csv(e.into()))?;
    Ok(())
}

pub fn write_dimdep_table<W: Write>(out: W, rows: &[DimDepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "m", "trials", "valid", "mean_mu1", "inv_one_minus_mu1"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.m.to_string(),
            r.trials.to_string(),
            r.valid.to_string(),
            fmt_real(r.mean_mu1),
            fmt_real(r.inv_one_minus_mu1),
        ])?;
    }
    w.flush().map_err(|e| FormatError::Csv(e.into()))?;
    Ok(())
}
