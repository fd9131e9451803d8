//! CPLEX-LP text export and a parser for the subset the writer emits.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{Constraint, Problem, Sense, VarId, VarKind, Variable};

#[derive(Debug, Error, PartialEq)]
pub enum LpParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `{0}` section")]
    MissingSection(&'static str),
}

fn term(out: &mut String, coef: f64, name: &str) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {}", -coef, name);
    } else {
        let _ = write!(out, " + {} {}", coef, name);
    }
}

pub fn write_lp(p: &Problem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem: {}", p.name);
    out.push_str("Minimize\n obj:");
    if p.objective.is_empty() {
        out.push_str(" 0");
    }
    for (v, c) in &p.objective {
        term(&mut out, *c, &p.variables[v.0].name);
    }
    out.push_str("\nSubject To\n");
    for c in &p.constraints {
        let _ = write!(out, " {}:", c.name);
        for (v, a) in &c.terms {
            term(&mut out, *a, &p.variables[v.0].name);
        }
        let _ = writeln!(out, " {} {}", c.sense, c.rhs);
    }
    out.push_str("Bounds\n");
    for v in &p.variables {
        if v.lower == v.upper {
            let _ = writeln!(out, " {} = {}", v.name, v.lower);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", bound(v.lower), v.name, bound(v.upper));
        }
    }
    for (section, kind) in [("Generals", VarKind::Integer), ("Binaries", VarKind::Binary)] {
        let names: Vec<&str> = p.variables.iter().filter(|v| v.kind == kind).map(|v| v.name.as_str()).collect();
        if !names.is_empty() {
            let _ = writeln!(out, "{section}");
            for chunk in names.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
    }
    out.push_str("End\n");
    out
}

fn bound(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn parse_num(tok: &str) -> Option<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

fn parse_sense(tok: &str) -> Option<Sense> {
    match tok {
        "<=" | "<" | "=<" => Some(Sense::Le),
        ">=" | ">" | "=>" => Some(Sense::Ge),
        "=" => Some(Sense::Eq),
        _ => None,
    }
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Objective,
    Rows,
    Bounds,
    Generals,
    Binaries,
    End,
}

struct Builder {
    names: Vec<String>,
    index: HashMap<String, usize>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
    kind: Vec<VarKind>,
}

impl Builder {
    fn id(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.lower.push(None);
        self.upper.push(None);
        self.kind.push(VarKind::Continuous);
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }
}

type Row = (usize, String, Vec<(String, f64)>, Option<(Sense, f64)>);

/// Split a row body into linear terms and an optional `sense rhs` tail.
fn parse_row(line: usize, toks: &[&str]) -> Result<(Vec<(String, f64)>, Option<(Sense, f64)>), LpParseError> {
    let err = |msg: String| LpParseError::Syntax { line, msg };
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    let mut i = 0;
    while i < toks.len() {
        let t = toks[i];
        if let Some(s) = parse_sense(t) {
            let rhs = toks.get(i + 1).and_then(|r| parse_num(r)).ok_or_else(|| err("missing right-hand side".into()))?;
            if i + 2 != toks.len() {
                return Err(err(format!("unexpected token after right-hand side: `{}`", toks[i + 2])));
            }
            return Ok((terms, Some((s, rhs))));
        }
        match t {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Some(x) = parse_num(t) {
                    coef = Some(x);
                } else {
                    terms.push((t.to_string(), sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                }
            }
        }
        i += 1;
    }
    if coef.is_some_and(|c| c != 0.0) {
        return Err(err("constant terms are not supported".into()));
    }
    Ok((terms, None))
}

pub fn parse_lp(text: &str) -> Result<Problem, LpParseError> {
    let mut name = String::new();
    let mut section = Section::None;
    let mut b = Builder {
        names: Vec::new(),
        index: HashMap::new(),
        lower: Vec::new(),
        upper: Vec::new(),
        kind: Vec::new(),
    };
    let mut objective: Vec<(String, f64)> = Vec::new();
    let mut rows: Vec<Row> = Vec::new();
    let mut bound_order: Vec<String> = Vec::new();
    let mut seen_objective = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix('\\') {
            if let Some(n) = rest.trim().strip_prefix("Problem:") {
                name = n.trim().to_string();
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let lower = trimmed.to_ascii_lowercase();
        let next = match lower.as_str() {
            "minimize" | "minimise" | "min" => Some(Section::Objective),
            "subject to" | "such that" | "st" | "s.t." => Some(Section::Rows),
            "bounds" => Some(Section::Bounds),
            "generals" | "general" | "integers" => Some(Section::Generals),
            "binaries" | "binary" => Some(Section::Binaries),
            "end" => Some(Section::End),
            _ => None,
        };
        if let Some(s) = next {
            section = s;
            seen_objective |= s == Section::Objective;
            continue;
        }
        let err = |msg: String| LpParseError::Syntax { line, msg };
        match section {
            Section::None | Section::End => return Err(err(format!("text outside any section: `{trimmed}`"))),
            Section::Objective | Section::Rows => {
                let (label, body) = match trimmed.split_once(':') {
                    Some((l, r)) => (Some(l.trim().to_string()), r),
                    None => (None, trimmed),
                };
                let toks: Vec<&str> = body.split_whitespace().collect();
                let (terms, tail) = parse_row(line, &toks)?;
                if section == Section::Objective {
                    if tail.is_some() {
                        return Err(err("objective cannot carry a sense".into()));
                    }
                    objective.extend(terms.into_iter().filter(|(n, _)| n != "0"));
                } else {
                    match (label, rows.last_mut()) {
                        (None, Some(last)) if last.3.is_none() => {
                            last.2.extend(terms);
                            last.3 = tail;
                        }
                        (Some(l), _) => rows.push((line, l, terms, tail)),
                        (None, _) => rows.push((line, format!("R{}", rows.len() + 1), terms, tail)),
                    }
                }
            }
            Section::Bounds => {
                let toks: Vec<&str> = trimmed.split_whitespace().collect();
                match toks.as_slice() {
                    [lo, s1, v, s2, hi] if parse_sense(s1) == Some(Sense::Le) && parse_sense(s2) == Some(Sense::Le) => {
                        let i = b.id(v);
                        b.lower[i] = Some(parse_num(lo).ok_or_else(|| err(format!("bad bound `{lo}`")))?);
                        b.upper[i] = Some(parse_num(hi).ok_or_else(|| err(format!("bad bound `{hi}`")))?);
                        bound_order.push(v.to_string());
                    }
                    [x, s, v] if parse_num(x).is_some() => {
                        let i = b.id(v);
                        let x = parse_num(x).expect("checked");
                        match parse_sense(s) {
                            Some(Sense::Eq) => {
                                b.lower[i] = Some(x);
                                b.upper[i] = Some(x);
                            }
                            Some(Sense::Le) => b.lower[i] = Some(x),
                            Some(Sense::Ge) => b.upper[i] = Some(x),
                            None => return Err(err(format!("bad bound operator `{s}`"))),
                        }
                        bound_order.push(v.to_string());
                    }
                    [v, s, x] => {
                        let i = b.id(v);
                        let x = parse_num(x).ok_or_else(|| err(format!("bad bound `{x}`")))?;
                        match parse_sense(s) {
                            Some(Sense::Eq) => {
                                b.lower[i] = Some(x);
                                b.upper[i] = Some(x);
                            }
                            Some(Sense::Le) => b.upper[i] = Some(x),
                            Some(Sense::Ge) => b.lower[i] = Some(x),
                            None => return Err(err(format!("bad bound operator `{s}`"))),
                        }
                        bound_order.push(v.to_string());
                    }
                    [v, free] if free.eq_ignore_ascii_case("free") => {
                        let i = b.id(v);
                        b.lower[i] = Some(f64::NEG_INFINITY);
                        b.upper[i] = Some(f64::INFINITY);
                        bound_order.push(v.to_string());
                    }
                    _ => return Err(err(format!("unrecognized bound `{trimmed}`"))),
                }
            }
            Section::Generals | Section::Binaries => {
                for v in trimmed.split_whitespace() {
                    let i = b.id(v);
                    b.kind[i] = if section == Section::Generals { VarKind::Integer } else { VarKind::Binary };
                }
            }
        }
    }
    if !seen_objective {
        return Err(LpParseError::MissingSection("Minimize"));
    }
    for (_, _, terms, tail) in &rows {
        if tail.is_none() {
            return Err(LpParseError::Syntax {
                line: rows.last().map(|r| r.0).unwrap_or(0),
                msg: "row without a sense".into(),
            });
        }
        for (n, _) in terms {
            b.id(n);
        }
    }
    for (n, _) in &objective {
        b.id(n);
    }

    // declaration order: bounds section first, then remaining names as first seen
    let mut order: Vec<usize> = Vec::new();
    let mut placed = vec![false; b.names.len()];
    for n in bound_order.iter().map(|n| b.index[n]).chain(0..b.names.len()) {
        if !placed[n] {
            placed[n] = true;
            order.push(n);
        }
    }
    let mut new_id = vec![0; b.names.len()];
    for (k, &i) in order.iter().enumerate() {
        new_id[i] = k;
    }
    let variables = order
        .iter()
        .map(|&i| {
            let kind = b.kind[i];
            let (dl, du) = if kind == VarKind::Binary { (0.0, 1.0) } else { (0.0, f64::INFINITY) };
            Variable {
                name: b.names[i].clone(),
                kind,
                lower: b.lower[i].unwrap_or(dl),
                upper: b.upper[i].unwrap_or(du),
            }
        })
        .collect();
    let map = |terms: &[(String, f64)]| -> Vec<(VarId, f64)> {
        terms.iter().map(|(n, c)| (VarId(new_id[b.index[n]]), *c)).collect()
    };
    Ok(Problem {
        name,
        variables,
        objective: map(&objective),
        constraints: rows
            .iter()
            .map(|(_, label, terms, tail)| {
                let (sense, rhs) = tail.expect("checked above");
                Constraint {
                    name: label.clone(),
                    terms: map(terms),
                    sense,
                    rhs,
                }
            })
            .collect(),
    })
}
