//! Bilevel problem definitions and the line-oriented problem file format.
//!
//! ```text
//! # comments run to end of line
//! name example
//! dims <d> <p> <k>
//! A                      # k lines of d numbers follow
//! B                      # k lines of p numbers follow
//! Bx <i>                 # optional, k lines of p numbers: B(x) = B + sum_i x_i Bx_i
//! b <k numbers>
//! c <p numbers>
//! theta linear <d numbers> | <p numbers>
//! theta expr <expression>
//! density expr <expression>      # optional; absent means the neutral belief
//! reference <number>             # optional; expected optimal leader value
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::lp::dot;
use crate::reaction::LinearLowerLevel;

/// Leader objective `theta(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `<d1, x> + <d2, y>`.
    Linear { d1: Vec<f64>, d2: Vec<f64> },
    Expr(Expression),
}

impl Objective {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            Objective::Linear { d1, d2 } => Ok(dot(d1, x) + dot(d2, y)),
            Objective::Expr(e) => e.eval(x, y),
        }
    }

    fn check(&self, d: usize, p: usize) -> Result<()> {
        match self {
            Objective::Linear { d1, d2 } => {
                if d1.len() != d || d2.len() != p {
                    return Err(Error::DimensionMismatch(format!(
                        "linear theta has {} | {} coefficients, expected {d} | {p}",
                        d1.len(),
                        d2.len()
                    )));
                }
                Ok(())
            }
            Objective::Expr(e) => e.check_vars(d, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilevelProblem {
    pub name: String,
    pub lower: LinearLowerLevel,
    pub theta: Objective,
    /// Density of a conditional belief declared in the problem file.
    pub density: Option<Expression>,
    /// Known optimal leader value, when the file declares one.
    pub reference: Option<f64>,
}

impl BilevelProblem {
    /// Validates dimensions, variable references and boundedness.
    pub fn new(name: impl Into<String>, lower: LinearLowerLevel, theta: Objective) -> Result<Self> {
        let problem = Self {
            name: name.into(),
            lower,
            theta,
            density: None,
            reference: None,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_density(mut self, density: Expression) -> Result<Self> {
        density.check_vars(self.leader_dim(), self.follower_dim())?;
        self.density = Some(density);
        Ok(self)
    }

    pub fn leader_dim(&self) -> usize {
        self.lower.leader_dim()
    }

    pub fn follower_dim(&self) -> usize {
        self.lower.follower_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.theta.check(self.leader_dim(), self.follower_dim())?;
        if let Some(d) = &self.density {
            d.check_vars(self.leader_dim(), self.follower_dim())?;
        }
        self.lower.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        parse_problem(&text)
    }

    /// Renders the problem in the file format; [`parse_problem`] reads it
    /// back bit-exactly.
    pub fn to_text(&self) -> String {
        let l = &self.lower;
        let mut s = String::new();
        let row = |s: &mut String, r: &[f64]| {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&cells.join(" "));
        };
        let _ = writeln!(s, "name {}", self.name);
        let _ = writeln!(s, "dims {} {} {}", l.leader_dim(), l.follower_dim(), l.rows());
        s.push_str("A\n");
        for r in &l.a {
            row(&mut s, r);
            s.push('\n');
        }
        s.push_str("B\n");
        for r in &l.b {
            row(&mut s, r);
            s.push('\n');
        }
        for blk in &l.parametric {
            let _ = writeln!(s, "Bx {}", blk.var + 1);
            for r in &blk.matrix {
                row(&mut s, r);
                s.push('\n');
            }
        }
        s.push_str("b ");
        row(&mut s, &l.rhs);
        s.push_str("\nc ");
        row(&mut s, &l.cost);
        s.push('\n');
        match &self.theta {
            Objective::Linear { d1, d2 } => {
                s.push_str("theta linear ");
                row(&mut s, d1);
                s.push_str(" | ");
                row(&mut s, d2);
                s.push('\n');
            }
            Objective::Expr(e) => {
                let _ = writeln!(s, "theta expr {e}");
            }
        }
        if let Some(d) = &self.density {
            let _ = writeln!(s, "density expr {d}");
        }
        if let Some(r) = self.reference {
            let _ = writeln!(s, "reference {r:?}");
        }
        s
    }
}

struct Line<'a> {
    number: usize,
    /// Content with comments stripped.
    text: &'a str,
}

impl Line<'_> {
    fn words(&self) -> impl Iterator<Item = (usize, &str)> + '_ {
        let base = self.text.as_ptr() as usize;
        self.text
            .split_whitespace()
            .map(move |w| (w.as_ptr() as usize - base + 1, w))
    }

    /// Byte offset of the remainder after the first `skip` words, as
    /// (column, text).
    fn rest_after(&self, skip: usize) -> (usize, &str) {
        let mut words = self.words();
        let mut end = 0;
        for _ in 0..skip {
            if let Some((col, w)) = words.next() {
                end = col - 1 + w.len();
            }
        }
        let rest = &self.text[end..];
        let trimmed = rest.trim_start();
        (end + (rest.len() - trimmed.len()) + 1, trimmed.trim_end())
    }
}

fn parse_number(line: &Line, col: usize, word: &str) -> Result<f64> {
    match word.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::syntax(line.number, col, format!("expected a number, found `{word}`"))),
    }
}

fn parse_numbers<'a>(line: &Line, words: impl Iterator<Item = (usize, &'a str)>) -> Result<Vec<f64>> {
    words.map(|(c, w)| parse_number(line, c, w)).collect()
}

fn parse_count(line: &Line, col: usize, word: &str) -> Result<usize> {
    word.parse::<usize>()
        .map_err(|_| Error::syntax(line.number, col, format!("expected a count, found `{word}`")))
}

fn expect_len(what: &str, v: &[f64], want: usize, line: usize) -> Result<()> {
    if v.len() != want {
        return Err(Error::DimensionMismatch(format!(
            "line {line}: {what} has {} entries, expected {want}",
            v.len()
        )));
    }
    Ok(())
}

/// Parses the problem file format and validates the result.
pub fn parse_problem(text: &str) -> Result<BilevelProblem> {
    let lines: Vec<Line> = text
        .lines()
        .enumerate()
        .map(|(i, raw)| Line {
            number: i + 1,
            text: raw.split('#').next().unwrap_or(""),
        })
        .filter(|l| !l.text.trim().is_empty())
        .collect();

    let mut name: Option<String> = None;
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut a: Option<Vec<Vec<f64>>> = None;
    let mut b: Option<Vec<Vec<f64>>> = None;
    let mut param: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
    let mut rhs: Option<Vec<f64>> = None;
    let mut cost: Option<Vec<f64>> = None;
    let mut theta: Option<Objective> = None;
    let mut density: Option<Expression> = None;
    let mut reference: Option<f64> = None;
    let last_line = text.lines().count().max(1);

    let mut idx = 0;
    while idx < lines.len() {
        let line = &lines[idx];
        idx += 1;
        let mut words = line.words();
        let Some((kcol, key)) = words.next() else { continue };
        let need_dims = |dims: Option<(usize, usize, usize)>| {
            dims.ok_or_else(|| Error::syntax(line.number, kcol, format!("`{key}` before `dims`")))
        };
        match key {
            "name" => {
                let (_, rest) = line.rest_after(1);
                if rest.is_empty() {
                    return Err(Error::syntax(line.number, kcol, "missing problem name"));
                }
                name = Some(rest.to_string());
            }
            "dims" => {
                let parts: Vec<(usize, &str)> = words.collect();
                if parts.len() != 3 {
                    return Err(Error::syntax(line.number, kcol, "dims needs <d> <p> <k>"));
                }
                let d = parse_count(line, parts[0].0, parts[0].1)?;
                let p = parse_count(line, parts[1].0, parts[1].1)?;
                let k = parse_count(line, parts[2].0, parts[2].1)?;
                if d == 0 || p == 0 || k == 0 {
                    return Err(Error::DimensionMismatch("dims must be positive".into()));
                }
                dims = Some((d, p, k));
            }
            "A" | "B" | "Bx" => {
                let (d, p, k) = need_dims(dims)?;
                let width = if key == "A" { d } else { p };
                let var = if key == "Bx" {
                    let (c, w) = words
                        .next()
                        .ok_or_else(|| Error::syntax(line.number, kcol, "Bx needs a leader index"))?;
                    let i = parse_count(line, c, w)?;
                    if i == 0 || i > d {
                        return Err(Error::DimensionMismatch(format!(
                            "line {}: Bx index {i} outside 1..={d}",
                            line.number
                        )));
                    }
                    Some(i - 1)
                } else {
                    None
                };
                let mut m = Vec::with_capacity(k);
                for r in 0..k {
                    let Some(row_line) = lines.get(idx) else {
                        return Err(Error::DimensionMismatch(format!(
                            "{key} has {r} rows, expected {k}"
                        )));
                    };
                    idx += 1;
                    let row = parse_numbers(row_line, row_line.words())?;
                    expect_len(&format!("{key} row {}", r + 1), &row, width, row_line.number)?;
                    m.push(row);
                }
                match (key, var) {
                    ("A", _) => a = Some(m),
                    ("B", _) => b = Some(m),
                    (_, Some(v)) => param.push((v, m)),
                    _ => unreachable!(),
                }
            }
            "b" | "c" => {
                let (_, p, k) = need_dims(dims)?;
                let v = parse_numbers(line, words)?;
                if key == "b" {
                    expect_len("b", &v, k, line.number)?;
                    rhs = Some(v);
                } else {
                    expect_len("c", &v, p, line.number)?;
                    cost = Some(v);
                }
            }
            "theta" | "density" => {
                let (d, p, _) = need_dims(dims)?;
                let (fcol, form) = words
                    .next()
                    .ok_or_else(|| Error::syntax(line.number, kcol, format!("{key} needs a form")))?;
                match (key, form) {
                    ("theta", "linear") => {
                        let (_, rest) = line.rest_after(2);
                        let (lhs, rhs_part) = rest.split_once('|').ok_or_else(|| {
                            Error::syntax(line.number, fcol, "linear theta needs `<d1> | <d2>`")
                        })?;
                        let parse = |s: &str| -> Result<Vec<f64>> {
                            s.split_whitespace()
                                .map(|w| parse_number(line, fcol, w))
                                .collect()
                        };
                        let d1 = parse(lhs)?;
                        let d2 = parse(rhs_part)?;
                        expect_len("theta d1", &d1, d, line.number)?;
                        expect_len("theta d2", &d2, p, line.number)?;
                        theta = Some(Objective::Linear { d1, d2 });
                    }
                    (_, "expr") => {
                        let (col, rest) = line.rest_after(2);
                        let e = Expression::parse_at(rest, line.number, col)?;
                        e.check_vars(d, p)?;
                        if key == "theta" {
                            theta = Some(Objective::Expr(e));
                        } else {
                            density = Some(e);
                        }
                    }
                    _ => {
                        return Err(Error::syntax(
                            line.number,
                            fcol,
                            format!("unknown {key} form `{form}`"),
                        ))
                    }
                }
            }
            "reference" => {
                let (c, w) = words
                    .next()
                    .ok_or_else(|| Error::syntax(line.number, kcol, "reference needs a value"))?;
                reference = Some(parse_number(line, c, w)?);
            }
            other => {
                return Err(Error::syntax(line.number, kcol, format!("unknown keyword `{other}`")))
            }
        }
        if let Some((c, w)) = line.words().nth(match key {
            "dims" => 4,
            "reference" => 2,
            "Bx" => 2,
            "A" | "B" => 1,
            _ => usize::MAX,
        }) {
            return Err(Error::syntax(line.number, c, format!("unexpected `{w}`")));
        }
    }

    let missing = |what: &str| Error::syntax(last_line, 1, format!("missing `{what}`"));
    let name = name.ok_or_else(|| missing("name"))?;
    let a = a.ok_or_else(|| missing("A"))?;
    let b = b.ok_or_else(|| missing("B"))?;
    let rhs = rhs.ok_or_else(|| missing("b"))?;
    let cost = cost.ok_or_else(|| missing("c"))?;
    let theta = theta.ok_or_else(|| missing("theta"))?;
    let mut lower = LinearLowerLevel::new(a, b, rhs, cost)?;
    for (v, m) in param {
        lower = lower.with_parametric(v, m)?;
    }
    let mut problem = BilevelProblem::new(name, lower, theta)?;
    if let Some(dens) = density {
        problem = problem.with_density(dens)?;
    }
    problem.reference = reference;
    Ok(problem)
}
