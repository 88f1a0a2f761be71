//! The follower's parametric LP `min <c,y> s.t. By <= b - Ax` and its
//! argmin map.
//!
//! Rows of `B` may depend affinely on `x` (`B(x) = B0 + sum_i x_i B_i`).
//! Every operation instantiates `B` at a fixed `x`, so the parametric
//! class only changes how the joint region is validated.

use crate::error::{Error, Result};
use crate::lp::{dot, inf_norm, is_feasible, solve_lp, support_value, HPolytope, LpResult, EPS_OPT};
use crate::polytope::{build_face_with_tol, FaceDescription, EPS_TIGHT};

const DUAL_TOL: f64 = 1e-9;

/// `B_i` term of a parametric follower matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricBlock {
    /// Zero-based leader coordinate multiplying the block.
    pub var: usize,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearLowerLevel {
    /// `A`, k x d.
    pub a: Vec<Vec<f64>>,
    /// `B` (or `B0` for parametric problems), k x p.
    pub b: Vec<Vec<f64>>,
    /// Right-hand side, length k.
    pub rhs: Vec<f64>,
    /// Follower cost, length p.
    pub cost: Vec<f64>,
    pub parametric: Vec<ParametricBlock>,
}

fn check_matrix(name: &str, m: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    if m.len() != rows {
        return Err(Error::DimensionMismatch(format!(
            "{name} has {} rows, expected {rows}",
            m.len()
        )));
    }
    for (i, r) in m.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::DimensionMismatch(format!(
                "{name} row {} has {} entries, expected {cols}",
                i + 1,
                r.len()
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!("{name} has non-finite entries")));
        }
    }
    Ok(())
}

impl LinearLowerLevel {
    /// Checks dimensions and finiteness. Boundedness is checked separately by
    /// [`LinearLowerLevel::validate`].
    pub fn new(
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        rhs: Vec<f64>,
        cost: Vec<f64>,
    ) -> Result<Self> {
        let k = rhs.len();
        if k == 0 {
            return Err(Error::DimensionMismatch("lower level needs at least one row".into()));
        }
        let d = a.first().map_or(0, Vec::len);
        let p = cost.len();
        if d == 0 || p == 0 {
            return Err(Error::DimensionMismatch("d and p must be positive".into()));
        }
        check_matrix("A", &a, k, d)?;
        check_matrix("B", &b, k, p)?;
        if rhs.iter().chain(&cost).any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite b or c".into()));
        }
        Ok(Self {
            a,
            b,
            rhs,
            cost,
            parametric: Vec::new(),
        })
    }

    pub fn with_parametric(mut self, var: usize, matrix: Vec<Vec<f64>>) -> Result<Self> {
        if var >= self.leader_dim() {
            return Err(Error::DimensionMismatch(format!(
                "parametric block for x{} but d = {}",
                var + 1,
                self.leader_dim()
            )));
        }
        check_matrix("Bx", &matrix, self.rows(), self.follower_dim())?;
        self.parametric.push(ParametricBlock { var, matrix });
        Ok(self)
    }

    pub fn leader_dim(&self) -> usize {
        self.a[0].len()
    }

    pub fn follower_dim(&self) -> usize {
        self.cost.len()
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_parametric(&self) -> bool {
        !self.parametric.is_empty()
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.leader_dim() {
            return Err(Error::DimensionMismatch(format!(
                "x has length {}, expected {}",
                x.len(),
                self.leader_dim()
            )));
        }
        Ok(())
    }

    fn row_is_parametric(&self, i: usize) -> bool {
        self.parametric
            .iter()
            .any(|blk| blk.matrix[i].iter().any(|v| *v != 0.0))
    }

    /// `{(x, y) : Ax + By <= b}` over the rows whose follower coefficients
    /// do not depend on `x`. For non-parametric problems this is exactly the
    /// joint region; otherwise it is a polyhedral outer relaxation.
    pub fn joint_polytope(&self) -> Result<HPolytope> {
        let mut rows = Vec::new();
        let mut h = Vec::new();
        for i in 0..self.rows() {
            if self.row_is_parametric(i) {
                continue;
            }
            let mut r = self.a[i].clone();
            r.extend_from_slice(&self.b[i]);
            rows.push(r);
            h.push(self.rhs[i]);
        }
        if rows.is_empty() {
            return Err(Error::UnboundedFeasibleRegion);
        }
        HPolytope::new(rows, h)
    }

    /// Confirms the joint region is nonempty and bounded with `2(d+p)`
    /// support values.
    pub fn validate(&self) -> Result<()> {
        let joint = self.joint_polytope()?;
        if !is_feasible(&joint)? {
            return Err(Error::EmptyJointPolytope);
        }
        let n = joint.ncols();
        for j in 0..n {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[j] = sign;
                if support_value(&e, &joint)?.is_none() {
                    return Err(Error::UnboundedFeasibleRegion);
                }
            }
        }
        Ok(())
    }

    /// `B(x)` row `i`.
    fn follower_row(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut row = self.b[i].clone();
        for blk in &self.parametric {
            for (r, v) in row.iter_mut().zip(&blk.matrix[i]) {
                *r += x[blk.var] * v;
            }
        }
        row
    }
}

/// `K(x) = {y : B(x) y <= b - Ax}`; may be empty.
pub fn feasible_set(lower: &LinearLowerLevel, x: &[f64]) -> Result<HPolytope> {
    lower.check_x(x)?;
    let rows: Vec<Vec<f64>> = (0..lower.rows()).map(|i| lower.follower_row(i, x)).collect();
    let h: Vec<f64> = (0..lower.rows())
        .map(|i| lower.rhs[i] - dot(&lower.a[i], x))
        .collect();
    HPolytope::new(rows, h)
}

/// Optimal value of the follower's LP at `x`.
pub fn lower_value(lower: &LinearLowerLevel, x: &[f64]) -> Result<f64> {
    let k = feasible_set(lower, x)?;
    match solve_lp(&lower.cost, &k)? {
        LpResult::Optimal { value, .. } => Ok(value),
        LpResult::Infeasible => Err(Error::EmptyFeasibleSet),
        LpResult::Unbounded { .. } => Err(Error::UnboundedPolytope),
    }
}

/// Slack added to the optimal value when cutting out `S(x)`, in units of
/// the cost row scaled to unit infinity-norm.
pub fn face_slack(scaled_value: f64) -> f64 {
    EPS_OPT.max(1e-9 * (1.0 + scaled_value.abs()))
}

/// Rows of `k` with a positive multiplier in an optimal solution of the
/// dual of `min <cost, y>` over `k`. By complementary slackness the optimal
/// face is exactly the set of points of `k` where all of them are tight.
fn dual_support(k: &HPolytope, cost: &[f64]) -> Result<Option<Vec<usize>>> {
    let active: Vec<usize> = (0..k.nrows()).filter(|&i| inf_norm(k.row(i)) > 0.0).collect();
    let m = active.len();
    let mut rows = Vec::with_capacity(m + 2 * cost.len());
    let mut h = Vec::with_capacity(m + 2 * cost.len());
    for i in 0..m {
        let mut r = vec![0.0; m];
        r[i] = -1.0;
        rows.push(r);
        h.push(0.0);
    }
    for (j, &cj) in cost.iter().enumerate() {
        let col: Vec<f64> = active
            .iter()
            .map(|&i| k.row(i)[j] / inf_norm(k.row(i)))
            .collect();
        rows.push(col.iter().map(|v| -v).collect());
        h.push(cj);
        rows.push(col);
        h.push(-cj);
    }
    let objective: Vec<f64> = active.iter().map(|&i| k.rhs()[i] / inf_norm(k.row(i))).collect();
    match solve_lp(&objective, &HPolytope::new(rows, h)?)? {
        LpResult::Optimal { point, .. } => Ok(Some(
            active
                .iter()
                .zip(&point)
                .filter(|(_, &l)| l > DUAL_TOL)
                .map(|(&i, _)| i)
                .collect(),
        )),
        _ => Ok(None),
    }
}

/// The (epsilon-)argmin face `{y in K(x) : <c,y> <= min + epsilon}`.
///
/// The exact face (`epsilon = 0`) is `K(x)` with the rows carrying positive
/// dual multipliers turned into equalities. For `epsilon > 0` the cost row,
/// scaled to unit infinity-norm, is appended as a cut at
/// `min + epsilon + slack` and `epsilon` is measured in scaled units.
pub fn argmin_face(lower: &LinearLowerLevel, x: &[f64], epsilon: f64) -> Result<FaceDescription> {
    if !(epsilon >= 0.0) {
        return Err(Error::ConfigInvalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let k = feasible_set(lower, x)?;
    if !is_feasible(&k)? {
        return Err(Error::EmptyFeasibleSet);
    }
    let scale = inf_norm(&lower.cost);
    if scale == 0.0 {
        return build_face_with_tol(&k, EPS_TIGHT).map_err(empty_as_infeasible);
    }
    let cost: Vec<f64> = lower.cost.iter().map(|v| v / scale).collect();
    let (value, vertex) = match solve_lp(&cost, &k)? {
        LpResult::Optimal { value, point } => (value, point),
        LpResult::Infeasible => return Err(Error::EmptyFeasibleSet),
        LpResult::Unbounded { .. } => return Err(Error::UnboundedPolytope),
    };
    let support = if epsilon == 0.0 { dual_support(&k, &cost)? } else { None };
    let mut built = match support {
        Some(tight) => {
            let mut face = k.clone();
            for i in tight {
                let reversed: Vec<f64> = k.row(i).iter().map(|v| -v).collect();
                face = face.with_row(&reversed, -k.rhs()[i])?;
            }
            build_face_with_tol(&face, EPS_TIGHT).map_err(empty_as_infeasible)?
        }
        None => {
            let slack = face_slack(value);
            let face = k.with_row(&cost, value + epsilon + slack)?;
            let tol = if epsilon == 0.0 { EPS_TIGHT + slack } else { EPS_TIGHT };
            build_face_with_tol(&face, tol).map_err(empty_as_infeasible)?
        }
    };
    if built.is_singleton() {
        // The optimal vertex satisfies the tight rows exactly; the chart
        // origin is only a numerical centre.
        built.chart.origin = vertex;
    }
    Ok(built)
}

fn empty_as_infeasible(e: Error) -> Error {
    match e {
        Error::EmptyPolytope => Error::EmptyFeasibleSet,
        other => other,
    }
}

/// Whether `K(x)` is nonempty, i.e. `x` is in the domain of the reaction map.
pub fn domain_contains(lower: &LinearLowerLevel, x: &[f64]) -> Result<bool> {
    is_feasible(&feasible_set(lower, x)?)
}

/// Axis-aligned bounding box of the projection of the joint region onto
/// leader space (of its polyhedral relaxation for parametric problems).
pub fn domain_box(lower: &LinearLowerLevel) -> Result<Vec<(f64, f64)>> {
    let joint = lower.joint_polytope()?;
    let n = joint.ncols();
    let mut out = Vec::with_capacity(lower.leader_dim());
    for j in 0..lower.leader_dim() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let hi = support_value(&e, &joint).map_err(|err| match err {
            Error::EmptyPolytope => Error::EmptyJointPolytope,
            other => other,
        })?;
        e[j] = -1.0;
        let lo = support_value(&e, &joint)?;
        match (lo, hi) {
            (Some(lo), Some(hi)) => out.push((-lo, hi)),
            _ => return Err(Error::UnboundedFeasibleRegion),
        }
    }
    Ok(out)
}
