//! Plain-text sparse dump of a block SDP, for cross-checking with external solvers.
//!
//! ```text
//! # comments start with '#'
//! blocks <count> <dim_1> ... <dim_count>
//! names <name_1> ... <name_count>        (optional)
//! rhs <r_1> ... <r_m>
//! <i> <block> <row> <col> <re> <im>      one line per nonzero, row <= col
//! ```
//!
//! Index `i = 0` is the objective and `i >= 1` is constraint `i - 1`;
//! blocks, rows and columns are 0-based. Each line stands for the entry and
//! its conjugate mirror.

use std::fmt::Write as _;

use num_complex::Complex;

use super::problem::{BlockSdpProblem, Constraint, HermEntry, SdpError};
use crate::num::Real;

pub fn write_dump<T: Real>(problem: &BlockSdpProblem<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# block SDP: minimize sum_b tr(C_b X_b) s.t. sum_b tr(A_ib X_b) = r_i, X_b >= 0");
    let dims: Vec<String> = problem.block_dims.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "blocks {} {}", problem.block_dims.len(), dims.join(" "));
    if problem.block_names.iter().all(|n| !n.is_empty() && !n.contains(char::is_whitespace)) {
        let _ = writeln!(out, "names {}", problem.block_names.join(" "));
    }
    let rhs: Vec<String> = problem.constraints.iter().map(|c| format!("{:e}", c.rhs.to_f64_lossy())).collect();
    let _ = writeln!(out, "rhs {}", rhs.join(" "));
    let mut line = |i: usize, e: &HermEntry<T>| {
        let _ = writeln!(
            out,
            "{} {} {} {} {:e} {:e}",
            i,
            e.block,
            e.row,
            e.col,
            e.value.re.to_f64_lossy(),
            e.value.im.to_f64_lossy()
        );
    };
    for e in &problem.objective {
        line(0, e);
    }
    for (i, c) in problem.constraints.iter().enumerate() {
        for e in &c.terms {
            line(i + 1, e);
        }
    }
    out
}

pub fn parse_dump<T: Real>(text: &str) -> Result<BlockSdpProblem<T>, SdpError> {
    let err = |line: usize, msg: &str| SdpError::Parse { line, msg: msg.to_string() };
    let mut dims: Option<Vec<usize>> = None;
    let mut names: Option<Vec<String>> = None;
    let mut rhs: Option<Vec<T>> = None;
    let mut objective = Vec::new();
    let mut terms: Vec<Vec<HermEntry<T>>> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let head = toks.next().unwrap_or_default();
        match head {
            "blocks" => {
                let vals: Vec<usize> = toks
                    .map(|t| t.parse().map_err(|_| err(ln, "bad block dimension")))
                    .collect::<Result<_, _>>()?;
                let (&count, rest) = vals.split_first().ok_or_else(|| err(ln, "missing block count"))?;
                if rest.len() != count {
                    return Err(err(ln, "block count does not match dimensions"));
                }
                dims = Some(rest.to_vec());
            }
            "names" => names = Some(toks.map(str::to_string).collect()),
            "rhs" => {
                let vals: Vec<T> = toks
                    .map(|t| t.parse::<f64>().map(T::lit).map_err(|_| err(ln, "bad rhs value")))
                    .collect::<Result<_, _>>()?;
                terms = vec![Vec::new(); vals.len()];
                rhs = Some(vals);
            }
            _ => {
                let fields: Vec<&str> = std::iter::once(head).chain(toks).collect();
                if fields.len() != 6 {
                    return Err(err(ln, "expected `i block row col re im`"));
                }
                let idx = |k: usize| fields[k].parse::<usize>().map_err(|_| err(ln, "bad index"));
                let val = |k: usize| fields[k].parse::<f64>().map(T::lit).map_err(|_| err(ln, "bad value"));
                let e = HermEntry::new(idx(1)?, idx(2)?, idx(3)?, Complex::new(val(4)?, val(5)?));
                match idx(0)? {
                    0 => objective.push(e),
                    i => terms
                        .get_mut(i - 1)
                        .ok_or_else(|| err(ln, "constraint index beyond rhs list"))?
                        .push(e),
                }
            }
        }
    }
    let dims = dims.ok_or_else(|| err(0, "missing `blocks` line"))?;
    let rhs = rhs.ok_or_else(|| err(0, "missing `rhs` line"))?;
    let block_names = match names {
        Some(n) if n.len() == dims.len() => n,
        Some(_) => return Err(err(0, "names count does not match blocks")),
        None => (0..dims.len()).map(|b| format!("b{b}")).collect(),
    };
    let problem = BlockSdpProblem {
        block_dims: dims,
        block_names,
        objective,
        constraints: terms.into_iter().zip(rhs).map(|(terms, rhs)| Constraint { terms, rhs }).collect(),
    };
    problem.validate()?;
    Ok(problem)
}
