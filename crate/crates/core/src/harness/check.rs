//! Acceptance criteria over summarized cells.
//!
//! One check per line: `<id>: <term> <op> <term> [| <term> <op> <term> ...]`
//! where a term is `method@oracle/k`, a number, or either plus or minus a
//! number, `op` is one of `>=`, `>`, `<=`, `<`, and `|` joins alternatives.
//! Lines sharing an id form one criterion that passes when all of them do.

use std::fmt::Write as _;
use std::path::Path;

use super::summary::{lookup, SummaryRow};
use crate::error::{Error, Result};

/// Slack for comparing accuracies that live on a 1/n grid.
const EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CellRef {
    pub method: String,
    pub oracle: String,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub cell: Option<CellRef>,
    pub offset: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Ge,
    Gt,
    Le,
    Lt,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub lhs: Term,
    pub op: Op,
    pub rhs: Term,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub id: String,
    pub text: String,
    /// Passes when any alternative holds.
    pub any_of: Vec<Comparison>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub id: String,
    pub passed: bool,
    pub lines: Vec<String>,
}

fn parse_term(s: &str) -> std::result::Result<Term, String> {
    let s = s.trim();
    let split = s
        .char_indices()
        .skip(1)
        .find(|&(i, c)| (c == '+' || c == '-') && s[..i].ends_with(' '))
        .map(|(i, _)| i);
    let (head, offset) = match split {
        Some(i) => {
            let v: f64 = s[i..].replace(' ', "").parse().map_err(|_| format!("bad offset in `{s}`"))?;
            (s[..i].trim(), v)
        }
        None => (s, 0.0),
    };
    if let Ok(v) = head.parse::<f64>() {
        return Ok(Term {
            cell: None,
            offset: v + offset,
        });
    }
    let (method, rest) = head.split_once('@').ok_or_else(|| format!("expected method@oracle/k, got `{head}`"))?;
    let (oracle, k) = rest.rsplit_once('/').ok_or_else(|| format!("expected method@oracle/k, got `{head}`"))?;
    let k = k.trim().parse().map_err(|_| format!("bad budget in `{head}`"))?;
    Ok(Term {
        cell: Some(CellRef {
            method: method.trim().into(),
            oracle: oracle.trim().into(),
            k,
        }),
        offset,
    })
}

fn parse_comparison(s: &str) -> std::result::Result<Comparison, String> {
    for (tok, op) in [(">=", Op::Ge), ("<=", Op::Le), (">", Op::Gt), ("<", Op::Lt)] {
        if let Some((l, r)) = s.split_once(tok) {
            return Ok(Comparison {
                lhs: parse_term(l)?,
                op,
                rhs: parse_term(r)?,
            });
        }
    }
    Err(format!("no comparison operator in `{}`", s.trim()))
}

pub fn parse_criteria(text: &str, path: &Path) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (id, body) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(path, n + 1, "expected `<id>: <comparison>`"))?;
        let any_of = body
            .split('|')
            .map(parse_comparison)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|m| Error::parse(path, n + 1, m))?;
        out.push(Check {
            id: id.trim().into(),
            text: body.trim().into(),
            any_of,
        });
    }
    Ok(out)
}

pub fn load_criteria(path: &Path) -> Result<Vec<Check>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_criteria(&text, path)
}

fn value(rows: &[SummaryRow], t: &Term, missing: &mut Vec<String>) -> Option<f64> {
    match &t.cell {
        None => Some(t.offset),
        Some(c) => match lookup(rows, &c.method, &c.oracle, c.k) {
            Some(r) => Some(r.median_acc + t.offset),
            None => {
                missing.push(format!("{}@{}/{}", c.method, c.oracle, c.k));
                None
            }
        },
    }
}

fn holds(op: Op, l: f64, r: f64) -> bool {
    match op {
        Op::Ge => l >= r - EPS,
        Op::Gt => l > r + EPS,
        Op::Le => l <= r + EPS,
        Op::Lt => l < r - EPS,
    }
}

/// Evaluate checks grouped by id, in first-appearance order.
pub fn check_acceptance(rows: &[SummaryRow], checks: &[Check]) -> Vec<Verdict> {
    let mut verdicts: Vec<Verdict> = Vec::new();
    for check in checks {
        let mut missing = Vec::new();
        let mut shown = Vec::new();
        let mut ok = false;
        for c in &check.any_of {
            let (l, r) = (value(rows, &c.lhs, &mut missing), value(rows, &c.rhs, &mut missing));
            if let (Some(l), Some(r)) = (l, r) {
                ok |= holds(c.op, l, r);
                shown.push(format!("{l:.4} vs {r:.4}"));
            }
        }
        let line = if missing.is_empty() {
            format!("{} [{}]", check.text, shown.join("; "))
        } else {
            ok = false;
            format!("{} [coverage: missing {}]", check.text, missing.join(", "))
        };
        let line = format!("{} {line}", if ok { "ok" } else { "violated" });
        match verdicts.iter_mut().find(|v| v.id == check.id) {
            Some(v) => {
                v.passed &= ok;
                v.lines.push(line);
            }
            None => verdicts.push(Verdict {
                id: check.id.clone(),
                passed: ok,
                lines: vec![line],
            }),
        }
    }
    verdicts
}

pub fn render_verdicts(verdicts: &[Verdict]) -> String {
    let mut s = String::new();
    for v in verdicts {
        let _ = writeln!(s, "{} criterion {}", if v.passed { "PASS" } else { "FAIL" }, v.id);
        for line in &v.lines {
            let _ = writeln!(s, "    {line}");
        }
    }
    s
}
