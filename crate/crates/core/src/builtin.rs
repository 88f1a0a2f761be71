//! Built-in problem instances.

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::problem::{BilevelProblem, Objective};
use crate::reaction::LinearLowerLevel;

pub const BUILTIN_NAMES: [&str; 3] = ["example22", "triangle_to_segment", "singleton_1d"];

pub fn builtin(name: &str) -> Result<BilevelProblem> {
    match name {
        "example22" => example22(),
        "triangle_to_segment" => triangle_to_segment(),
        "singleton_1d" => singleton_1d(),
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

/// Two-dimensional leader and follower with `c = 0`, so `S(x) = K(x)`.
/// The domain is the diamond `|x1| + |x2| <= 1` and `S(x1, x2) = S(|x1|, |x2|)`.
/// Leader objective `y1 - 7 y2`.
pub fn example22() -> Result<BilevelProblem> {
    let a = [
        [-1.0, -1.0],
        [-1.0, 1.0],
        [-2.0, 0.0],
        [-1.0, 0.0],
        [0.0, -1.0],
        [0.0, 0.0],
        [0.0, 0.0],
        [0.0, 1.0],
        [1.0, 0.0],
        [2.0, 0.0],
        [1.0, -1.0],
        [1.0, 1.0],
    ];
    let b = [
        [0.0, 0.0],
        [0.0, 0.0],
        [1.0, 1.0],
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, -1.0],
        [0.0, 1.0],
        [-1.0, 0.0],
        [1.0, 0.0],
        [1.0, 1.0],
        [0.0, 0.0],
        [0.0, 0.0],
    ];
    let rhs = vec![1.0, 1.0, 3.0, 2.0, 0.0, 0.0, 1.0, 0.0, 2.0, 3.0, 1.0, 1.0];
    let lower = LinearLowerLevel::new(
        a.iter().map(|r| r.to_vec()).collect(),
        b.iter().map(|r| r.to_vec()).collect(),
        rhs,
        vec![0.0, 0.0],
    )?;
    BilevelProblem::new(
        "example22",
        lower,
        Objective::Linear {
            d1: vec![0.0, 0.0],
            d2: vec![1.0, -7.0],
        },
    )
}

/// `S(x) = {y in [0,1]^2 : y1 <= x y2}` for `x in [0, 1]`: a triangle for
/// `x > 0` that collapses to the segment `{0} x [0, 1]` at `x = 0`. The
/// bilinear row is carried by a parametric block. Leader objective `y1 + y2`.
pub fn triangle_to_segment() -> Result<BilevelProblem> {
    let zeros = |k: usize| vec![vec![0.0, 0.0]; k];
    let a = vec![
        vec![0.0],
        vec![0.0],
        vec![0.0],
        vec![0.0],
        vec![0.0],
        vec![-1.0],
        vec![1.0],
    ];
    let b = vec![
        vec![1.0, 0.0],
        vec![-1.0, 0.0],
        vec![1.0, 0.0],
        vec![0.0, -1.0],
        vec![0.0, 1.0],
        vec![0.0, 0.0],
        vec![0.0, 0.0],
    ];
    let mut bx = zeros(7);
    bx[0] = vec![0.0, -1.0];
    let lower = LinearLowerLevel::new(a, b, vec![0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0], vec![0.0, 0.0])?
        .with_parametric(0, bx)?;
    BilevelProblem::new(
        "triangle_to_segment",
        lower,
        Objective::Linear {
            d1: vec![0.0],
            d2: vec![1.0, 1.0],
        },
    )
}

/// `min y` over `y in [x, 1]`, `x in [0, 1]`, so `S(x) = {x}`; leader
/// objective `(x1 - 0.3)^2 + y1`. Along `S` this is `(x - 0.3)^2 + x`,
/// increasing on the domain, so the minimum is 0.09 at `x = 0`.
pub fn singleton_1d() -> Result<BilevelProblem> {
    let lower = LinearLowerLevel::new(
        vec![vec![1.0], vec![0.0], vec![-1.0], vec![1.0]],
        vec![vec![-1.0], vec![1.0], vec![0.0], vec![0.0]],
        vec![0.0, 1.0, 0.0, 1.0],
        vec![1.0],
    )?;
    BilevelProblem::new(
        "singleton_1d",
        lower,
        Objective::Expr(Expression::parse("(x1 - 0.3)^2 + y1")?),
    )
}
