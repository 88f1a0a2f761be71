//! Dense linear programming over H-polytopes.
//!
//! The engine is a tableau primal simplex on the slack form `Gz + s = h`,
//! `s >= 0`, with `z` free. Free variables are pivoted into the basis first
//! (they never leave it), a single artificial variable drives phase 1, and
//! Bland's rule takes over after `3m` consecutive degenerate pivots.
//! Returned optimal points are basic feasible solutions, i.e. vertices.

use crate::error::{Error, Result};

/// Feasibility tolerance on normalized rows.
pub const EPS_FEAS: f64 = 1e-8;
/// Optimality tolerance on objective values.
pub const EPS_OPT: f64 = 1e-7;
/// Entries below this magnitude are never used as pivots.
pub const PIVOT_TOL: f64 = 1e-10;

const REDUCED_COST_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;

/// The polytope `{z in R^n : Gz <= h}` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope {
    g: Vec<f64>,
    h: Vec<f64>,
    cols: usize,
}

impl HPolytope {
    pub fn new(rows: Vec<Vec<f64>>, h: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::DimensionMismatch("polytope needs at least one row".into()));
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(Error::DimensionMismatch("polytope needs at least one column".into()));
        }
        if rows.len() != h.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but right-hand side of length {}",
                rows.len(),
                h.len()
            )));
        }
        let mut g = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            g.extend_from_slice(row);
        }
        if g.iter().chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite polytope data".into()));
        }
        Ok(Self { g, h, cols })
    }

    /// The box `lo <= z <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch("box bounds differ in length".into()));
        }
        let n = lo.len();
        let mut rows = Vec::with_capacity(2 * n);
        let mut h = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut up = vec![0.0; n];
            up[i] = 1.0;
            rows.push(up);
            h.push(hi[i]);
            let mut down = vec![0.0; n];
            down[i] = -1.0;
            rows.push(down);
            h.push(-lo[i]);
        }
        Self::new(rows, h)
    }

    pub fn nrows(&self) -> usize {
        self.h.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.g[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.h
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.g.chunks_exact(self.cols).zip(self.h.iter().copied())
    }

    /// Returns a copy with one extra row appended.
    pub fn with_row(&self, row: &[f64], rhs: f64) -> Result<Self> {
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch("appended row has wrong length".into()));
        }
        let mut out = self.clone();
        out.g.extend_from_slice(row);
        out.h.push(rhs);
        Ok(out)
    }

    /// Largest violation `G_i z - h_i` over all rows (negative when strictly inside).
    pub fn max_residual(&self, z: &[f64]) -> f64 {
        self.rows()
            .map(|(row, h)| dot(row, z) - h)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest violation measured on rows scaled to unit infinity-norm. Zero
    /// rows contribute `-h_i`.
    pub fn max_scaled_residual(&self, z: &[f64]) -> f64 {
        self.rows()
            .map(|(row, h)| {
                let s = inf_norm(row);
                if s > 0.0 {
                    (dot(row, z) - h) / s
                } else {
                    -h
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        self.max_scaled_residual(z) <= tol
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Outcome of [`solve_lp`]. Unbounded results carry a recession direction
/// along which the objective decreases without bound.
#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal { point: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded { ray: Vec<f64> },
}

impl LpResult {
    pub fn status(&self) -> LpStatus {
        match self {
            LpResult::Optimal { .. } => LpStatus::Optimal,
            LpResult::Infeasible => LpStatus::Infeasible,
            LpResult::Unbounded { .. } => LpStatus::Unbounded,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            LpResult::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpResult::Optimal { point, .. } => Some(point),
            _ => None,
        }
    }
}

/// Minimizes `<objective, z>` over the polytope.
pub fn solve_lp(objective: &[f64], polytope: &HPolytope) -> Result<LpResult> {
    if objective.len() != polytope.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "objective has length {}, polytope has {} columns",
            objective.len(),
            polytope.ncols()
        )));
    }
    if objective.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite objective".into()));
    }
    Simplex::build(polytope)?.map_or(Ok(LpResult::Infeasible), |mut s| s.solve(objective))
}

pub fn is_feasible(polytope: &HPolytope) -> Result<bool> {
    let zero = vec![0.0; polytope.ncols()];
    Ok(solve_lp(&zero, polytope)?.status() == LpStatus::Optimal)
}

/// `max <direction, z>` over the polytope, `None` when unbounded above.
pub fn support_value(direction: &[f64], polytope: &HPolytope) -> Result<Option<f64>> {
    let neg: Vec<f64> = direction.iter().map(|v| -v).collect();
    match solve_lp(&neg, polytope)? {
        LpResult::Optimal { value, .. } => Ok(Some(-value)),
        LpResult::Infeasible => Err(Error::EmptyPolytope),
        LpResult::Unbounded { .. } => Ok(None),
    }
}

/// Center and radius of the largest Euclidean ball inside the polytope.
pub fn chebyshev_center(polytope: &HPolytope) -> Result<(Vec<f64>, f64)> {
    let n = polytope.ncols();
    let mut rows = Vec::with_capacity(polytope.nrows() + 1);
    let mut h = Vec::with_capacity(polytope.nrows() + 1);
    for (row, hi) in polytope.rows() {
        let mut r = row.to_vec();
        r.push(norm2(row));
        rows.push(r);
        h.push(hi);
    }
    let mut nonneg = vec![0.0; n + 1];
    nonneg[n] = -1.0;
    rows.push(nonneg);
    h.push(0.0);
    let lifted = HPolytope::new(rows, h)?;
    let mut objective = vec![0.0; n + 1];
    objective[n] = -1.0;
    match solve_lp(&objective, &lifted)? {
        LpResult::Optimal { mut point, .. } => {
            let radius = point.pop().unwrap_or(0.0).max(0.0);
            Ok((point, radius))
        }
        LpResult::Infeasible => Err(Error::EmptyPolytope),
        LpResult::Unbounded { .. } => Err(Error::UnboundedPolytope),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    /// Basic variable is a free `z` coordinate; excluded from ratio tests.
    Free,
    Constrained,
    /// Linearly dependent row found while removing the artificial.
    Dead,
}

struct Simplex {
    n: usize,
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    kind: Vec<RowKind>,
    /// Free columns with no pivot (rank deficiency); held at zero.
    dropped: Vec<usize>,
    art_allowed: bool,
}

enum Phase {
    Optimal,
    Unbounded(usize),
}

impl Simplex {
    /// Builds the tableau and removes the free variables from the nonbasic
    /// set. Returns `None` when a zero row already proves infeasibility.
    fn build(p: &HPolytope) -> Result<Option<Self>> {
        let n = p.ncols();
        let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
        for (row, h) in p.rows() {
            let s = inf_norm(row);
            if s == 0.0 {
                if h < -EPS_FEAS {
                    return Ok(None);
                }
                continue;
            }
            kept.push((row.iter().map(|v| v / s).collect(), h / s));
        }
        let m = kept.len();
        let cols = n + m + 1;
        let mut a = vec![0.0; m * cols];
        let mut rhs = vec![0.0; m];
        for (i, (row, h)) in kept.into_iter().enumerate() {
            a[i * cols..i * cols + n].copy_from_slice(&row);
            a[i * cols + n + i] = 1.0;
            rhs[i] = h;
        }
        let mut s = Simplex {
            n,
            rows: m,
            cols,
            a,
            rhs,
            basis: (0..m).map(|i| n + i).collect(),
            kind: vec![RowKind::Constrained; m],
            dropped: Vec::new(),
            art_allowed: false,
        };
        for j in 0..n {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                if s.kind[i] != RowKind::Constrained {
                    continue;
                }
                let v = s.at(i, j).abs();
                if v > PIVOT_TOL && best.is_none_or(|(_, b)| v > b) {
                    best = Some((i, v));
                }
            }
            match best {
                Some((r, _)) => {
                    s.pivot(r, j);
                    s.kind[r] = RowKind::Free;
                }
                None => s.dropped.push(j),
            }
        }
        Ok(Some(s))
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    fn art(&self) -> usize {
        self.cols - 1
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let cols = self.cols;
        let p = self.at(r, e);
        for j in 0..cols {
            self.a[r * cols + j] /= p;
        }
        self.rhs[r] /= p;
        self.a[r * cols + e] = 1.0;
        let (before, rest) = self.a.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        let prhs = self.rhs[r];
        let update = |i: usize, row: &mut [f64], rhs: &mut [f64]| {
            let f = row[e];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[e] = 0.0;
                rhs[i] -= f * prhs;
            }
        };
        for (i, row) in before.chunks_exact_mut(cols).enumerate() {
            update(i, row, &mut self.rhs);
        }
        for (k, row) in after.chunks_exact_mut(cols).enumerate() {
            update(r + 1 + k, row, &mut self.rhs);
        }
        self.basis[r] = e;
        for i in 0..self.rows {
            if self.kind[i] == RowKind::Constrained && self.rhs[i] < 0.0 && self.rhs[i] > -EPS_FEAS
            {
                self.rhs[i] = 0.0;
            }
        }
    }

    fn enterable(&self, j: usize) -> bool {
        if j < self.n {
            return false;
        }
        if j == self.art() {
            return self.art_allowed;
        }
        true
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.rows {
            if self.kind[i] == RowKind::Dead {
                continue;
            }
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, aij) in d.iter_mut().zip(&self.a[i * self.cols..(i + 1) * self.cols]) {
                    *dj -= cb * aij;
                }
            }
        }
        d
    }

    fn run(&mut self, cost: &[f64]) -> Result<Phase> {
        let mut in_basis = vec![false; self.cols];
        for &b in &self.basis {
            in_basis[b] = true;
        }
        let max_iter = 50 * (self.rows + self.n) + 1000;
        let bland_after = 3 * self.rows.max(1);
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let d = self.reduced_costs(cost);
            let bland = degenerate_run >= bland_after;
            let mut entering: Option<usize> = None;
            for j in 0..self.cols {
                if in_basis[j] || !self.enterable(j) || d[j] >= -REDUCED_COST_TOL {
                    continue;
                }
                if bland {
                    entering = Some(j);
                    break;
                }
                if entering.is_none_or(|e| d[j] < d[e]) {
                    entering = Some(j);
                }
            }
            let Some(e) = entering else {
                return Ok(Phase::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                if self.kind[i] != RowKind::Constrained {
                    continue;
                }
                let aie = self.at(i, e);
                if aie <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs[i].max(0.0) / aie;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        let better = if ratio < best - DEGENERATE_STEP {
                            true
                        } else if ratio <= best + DEGENERATE_STEP {
                            if bland {
                                self.basis[i] < self.basis[r]
                            } else {
                                aie > self.at(r, e)
                            }
                        } else {
                            false
                        };
                        if better {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                return Ok(Phase::Unbounded(e));
            };
            if ratio <= DEGENERATE_STEP {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            in_basis[self.basis[r]] = false;
            in_basis[e] = true;
            self.pivot(r, e);
        }
        Err(Error::NumericalFailure(format!(
            "simplex did not terminate within {max_iter} pivots"
        )))
    }

    /// Phase 1 with a single artificial variable. Returns false if infeasible.
    fn phase_one(&mut self) -> Result<bool> {
        let art = self.art();
        let worst = (0..self.rows)
            .filter(|&i| self.kind[i] == RowKind::Constrained)
            .min_by(|&a, &b| self.rhs[a].total_cmp(&self.rhs[b]));
        let Some(worst) = worst else {
            return Ok(true);
        };
        if self.rhs[worst] >= 0.0 {
            return Ok(true);
        }
        for i in 0..self.rows {
            let v = if self.kind[i] == RowKind::Constrained {
                -1.0
            } else {
                0.0
            };
            self.a[i * self.cols + art] = v;
        }
        self.art_allowed = true;
        self.pivot(worst, art);
        let mut cost = vec![0.0; self.cols];
        cost[art] = 1.0;
        match self.run(&cost)? {
            Phase::Optimal => {}
            Phase::Unbounded(_) => {
                return Err(Error::NumericalFailure("phase 1 reported unbounded".into()))
            }
        }
        let level = (0..self.rows)
            .find(|&i| self.basis[i] == art)
            .map_or(0.0, |i| self.rhs[i]);
        if level > EPS_FEAS {
            return Ok(false);
        }
        if let Some(r) = (0..self.rows).find(|&i| self.basis[i] == art) {
            let candidate = (self.n..art)
                .filter(|j| !self.basis.contains(j))
                .max_by(|&a, &b| self.at(r, a).abs().total_cmp(&self.at(r, b).abs()))
                .filter(|&j| self.at(r, j).abs() > PIVOT_TOL);
            match candidate {
                Some(j) => self.pivot(r, j),
                None => self.kind[r] = RowKind::Dead,
            }
            self.rhs[r] = self.rhs[r].max(0.0);
        }
        self.art_allowed = false;
        for i in 0..self.rows {
            self.a[i * self.cols + art] = 0.0;
        }
        Ok(true)
    }

    fn solve(&mut self, objective: &[f64]) -> Result<LpResult> {
        if !self.phase_one()? {
            return Ok(LpResult::Infeasible);
        }
        let mut cost = vec![0.0; self.cols];
        cost[..self.n].copy_from_slice(objective);
        let d = self.reduced_costs(&cost);
        // A dropped free column spans a line inside the polytope.
        if let Some(&j) = self.dropped.iter().find(|&&j| d[j].abs() > REDUCED_COST_TOL) {
            let sign = if d[j] > 0.0 { -1.0 } else { 1.0 };
            let mut ray = vec![0.0; self.n];
            ray[j] = sign;
            for i in 0..self.rows {
                if self.kind[i] == RowKind::Free && self.basis[i] < self.n {
                    ray[self.basis[i]] = -sign * self.at(i, j);
                }
            }
            return Ok(LpResult::Unbounded { ray });
        }
        match self.run(&cost)? {
            Phase::Optimal => {
                let point = self.point();
                let value = dot(objective, &point);
                Ok(LpResult::Optimal { point, value })
            }
            Phase::Unbounded(e) => {
                let mut ray = vec![0.0; self.n];
                for i in 0..self.rows {
                    if self.kind[i] == RowKind::Free && self.basis[i] < self.n {
                        ray[self.basis[i]] = -self.at(i, e);
                    }
                }
                Ok(LpResult::Unbounded { ray })
            }
        }
    }

    fn point(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.n];
        for i in 0..self.rows {
            if self.basis[i] < self.n {
                z[self.basis[i]] = self.rhs[i];
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> HPolytope {
        HPolytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    fn triangle() -> HPolytope {
        HPolytope::new(
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
            vec![0.0, 0.0, 1.0],
        )
        .unwrap()
    }

    fn segment() -> HPolytope {
        HPolytope::new(
            vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]],
            vec![0.0, 0.0, 1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn box_corner_is_optimal() {
        let r = solve_lp(&[-1.0, -1.0], &unit_square()).unwrap();
        match r {
            LpResult::Optimal { point, value } => {
                assert!((value + 2.0).abs() < 1e-12);
                assert!((point[0] - 1.0).abs() < 1e-12 && (point[1] - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let p = HPolytope::new(vec![vec![1.0], vec![-1.0]], vec![-1.0, 0.0]).unwrap();
        assert_eq!(solve_lp(&[3.0], &p).unwrap(), LpResult::Infeasible);
        assert!(!is_feasible(&p).unwrap());
        assert!(is_feasible(&unit_square()).unwrap());
    }

    #[test]
    fn zero_rows_are_checked_then_dropped() {
        let ok = HPolytope::new(vec![vec![0.0], vec![1.0], vec![-1.0]], vec![0.5, 1.0, 0.0]).unwrap();
        assert!(is_feasible(&ok).unwrap());
        let bad = HPolytope::new(vec![vec![0.0], vec![1.0], vec![-1.0]], vec![-0.5, 1.0, 0.0]).unwrap();
        assert!(!is_feasible(&bad).unwrap());
    }

    #[test]
    fn unbounded_with_ray() {
        let p = HPolytope::new(vec![vec![-1.0, 0.0], vec![0.0, -1.0]], vec![0.0, 0.0]).unwrap();
        match solve_lp(&[-1.0, 0.0], &p).unwrap() {
            LpResult::Unbounded { ray } => {
                assert!(ray[0] > 0.0);
                assert!(p.rows().all(|(row, _)| dot(row, &ray) <= 1e-12));
            }
            other => panic!("unexpected {other:?}"),
        }
        // A half-plane has no vertex; its free column is dropped.
        let half = HPolytope::new(vec![vec![1.0, 0.0]], vec![1.0]).unwrap();
        assert_eq!(solve_lp(&[0.0, 1.0], &half).unwrap().status(), LpStatus::Unbounded);
        assert_eq!(solve_lp(&[-1.0, 0.0], &half).unwrap().value(), Some(-1.0));
    }

    #[test]
    fn support_values() {
        assert_eq!(support_value(&[1.0, 0.0], &unit_square()).unwrap(), Some(1.0));
        let t = support_value(&[1.0, 1.0], &triangle()).unwrap().unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        let s = support_value(&[0.0, 1.0], &segment()).unwrap().unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        let empty = HPolytope::new(vec![vec![1.0], vec![-1.0]], vec![-1.0, 0.0]).unwrap();
        assert_eq!(support_value(&[1.0], &empty), Err(Error::EmptyPolytope));
    }

    #[test]
    fn chebyshev_centers() {
        let (c, r) = chebyshev_center(&unit_square()).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
        assert!((c[0] - 0.5).abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-12);
        // Inradius of the right isoceles triangle with unit legs: r = (2 - sqrt 2)/2.
        let (_, r) = chebyshev_center(&triangle()).unwrap();
        assert!((r - (2.0 - 2f64.sqrt()) / 2.0).abs() < 1e-12);
        let (c, r) = chebyshev_center(&segment()).unwrap();
        assert!(r.abs() < 1e-12);
        assert!(segment().contains(&c, EPS_FEAS));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            solve_lp(&[1.0], &unit_square()),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(HPolytope::new(vec![vec![1.0, 0.0], vec![1.0]], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // Many constraints through the origin.
        let mut rows = Vec::new();
        let mut h = Vec::new();
        for k in 0..12 {
            let t = k as f64 * 0.3;
            rows.push(vec![t.cos(), t.sin(), 0.5]);
            h.push(0.0);
        }
        rows.push(vec![0.0, 0.0, -1.0]);
        h.push(1.0);
        rows.push(vec![0.0, 0.0, 1.0]);
        h.push(0.0);
        let p = HPolytope::new(rows, h).unwrap();
        let r = solve_lp(&[0.0, 0.0, 1.0], &p).unwrap();
        assert_eq!(r.status(), LpStatus::Optimal);
        assert!(p.contains(r.point().unwrap(), EPS_FEAS));
    }
}
