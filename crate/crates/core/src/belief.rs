//! Beliefs over the reaction map and Monte-Carlo expectations under them.
//!
//! The neutral belief is the uniform law on `S(x)` in its own affine hull.
//! A conditional belief reweights that law by a density `rho(x, y)`; its
//! expectation is estimated by self-normalized importance sampling with the
//! uniform samples as proposal, so numerator and denominator share a batch.

use crate::devolve::fixed_seed_stream;
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::lp::dot;
use crate::polytope::{sample_with, FaceDescription};
use crate::problem::{BilevelProblem, Objective};
use crate::reaction::{argmin_face, domain_contains, feasible_set, lower_value, LinearLowerLevel};

#[derive(Debug, Clone, PartialEq)]
pub enum BeliefSpec {
    Neutral,
    /// Density in `x1..xd, y1..yp`, stored without positive constant
    /// factors (densities are only defined up to scale).
    Conditional(Expression),
}

impl BeliefSpec {
    pub fn conditional(density: Expression) -> Self {
        BeliefSpec::Conditional(density.without_constant_factor())
    }

    /// The belief declared by the problem file, neutral when none is given.
    pub fn for_problem(problem: &BilevelProblem) -> Self {
        problem
            .density
            .as_ref()
            .map_or(BeliefSpec::Neutral, |d| BeliefSpec::conditional(d.clone()))
    }

    fn weight(&self, x: &[f64], y: &[f64]) -> Result<Option<f64>> {
        match self {
            BeliefSpec::Neutral => Ok(None),
            BeliefSpec::Conditional(rho) => {
                let w = rho.eval(x, y)?;
                if w < 0.0 {
                    return Err(Error::ExpressionEval(format!("negative density {w} at y = {y:?}")));
                }
                Ok(Some(w))
            }
        }
    }
}

/// A Monte-Carlo expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    /// Box proposals accepted by rejection sampling.
    pub n_accepted: u64,
    pub n_proposals: u64,
    pub seed: u64,
    /// Affine dimension of the face that was sampled.
    pub face_dim: usize,
}

/// Running sums over one sample batch, accumulated in sample order.
struct Sums {
    n: u64,
    weight: f64,
    weight_sq: f64,
    /// Weighted sum of `y`.
    y: Vec<f64>,
    /// Weighted sum of theta.
    theta: f64,
    shift: Option<f64>,
    /// Shifted moments for the variance: sum w u, sum w^2 u, sum w^2 u^2.
    wu: f64,
    w2u: f64,
    w2u2: f64,
    /// Per-coordinate sums of `y` and `y^2` for centroid errors.
    y_sq: Vec<f64>,
}

impl Sums {
    fn new(p: usize) -> Self {
        Self {
            n: 0,
            weight: 0.0,
            weight_sq: 0.0,
            y: vec![0.0; p],
            theta: 0.0,
            shift: None,
            wu: 0.0,
            w2u: 0.0,
            w2u2: 0.0,
            y_sq: vec![0.0; p],
        }
    }

    fn add(&mut self, y: &[f64], theta: f64, weight: Option<f64>) {
        self.n += 1;
        let w = weight.unwrap_or(1.0);
        self.weight += w;
        self.weight_sq += w * w;
        match weight {
            None => {
                for (s, v) in self.y.iter_mut().zip(y) {
                    *s += v;
                }
                self.theta += theta;
            }
            Some(w) => {
                for (s, v) in self.y.iter_mut().zip(y) {
                    *s += w * v;
                }
                self.theta += w * theta;
            }
        }
        for (s, v) in self.y_sq.iter_mut().zip(y) {
            *s += v * v;
        }
        let k = *self.shift.get_or_insert(theta);
        let u = theta - k;
        self.wu += w * u;
        self.w2u += w * w * u;
        self.w2u2 += w * w * u * u;
    }

    fn centroid(&self) -> Vec<f64> {
        self.y.iter().map(|s| s / self.weight).collect()
    }

    fn stderr(&self, weighted: bool) -> f64 {
        let n = self.n as f64;
        if !weighted {
            if self.n < 2 {
                return 0.0;
            }
            let var = ((self.w2u2 - self.wu * self.wu / n) / (n - 1.0)).max(0.0);
            return (var / n).sqrt();
        }
        // Delta method for the ratio sum(w theta) / sum(w).
        let m = self.wu / self.weight;
        let s = (self.w2u2 - 2.0 * m * self.w2u + m * m * self.weight_sq).max(0.0);
        s.sqrt() / self.weight
    }
}

fn check_domain(lower: &LinearLowerLevel, x: &[f64]) -> Result<()> {
    if x.len() != lower.leader_dim() {
        return Err(Error::DimensionMismatch(format!(
            "x has length {}, expected {}",
            x.len(),
            lower.leader_dim()
        )));
    }
    if !domain_contains(lower, x)? {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    Ok(())
}

fn accumulate(
    face: &FaceDescription,
    x: &[f64],
    theta: Option<&Objective>,
    belief: &BeliefSpec,
    n: usize,
    seed: u64,
) -> Result<(Sums, crate::polytope::SampleStats)> {
    let mut sums = Sums::new(face.chart.ambient_dim());
    let mut failure: Option<Error> = None;
    let stats = sample_with(face, n, seed, |y| {
        if failure.is_some() {
            return;
        }
        let step = || -> Result<(f64, Option<f64>)> {
            let t = match theta {
                Some(th) => th.eval(x, y)?,
                None => 0.0,
            };
            Ok((t, belief.weight(x, y)?))
        };
        match step() {
            Ok((t, w)) => sums.add(y, t, w),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if !(sums.weight > 0.0) || !sums.weight.is_finite() {
        return Err(Error::ZeroDensityMass);
    }
    Ok((sums, stats))
}

/// Expected leader objective at `x` under the belief, from `n` uniform
/// samples of `S(x)`. Singleton faces are evaluated exactly.
pub fn expected_value(
    problem: &BilevelProblem,
    x: &[f64],
    belief: &BeliefSpec,
    n: usize,
    seed: u64,
) -> Result<MCEstimate> {
    check_domain(&problem.lower, x)?;
    let face = argmin_face(&problem.lower, x, 0.0)?;
    expected_value_on_face(problem, &face, x, belief, n, seed)
}

/// [`expected_value`] on a face computed by the caller.
pub fn expected_value_on_face(
    problem: &BilevelProblem,
    face: &FaceDescription,
    x: &[f64],
    belief: &BeliefSpec,
    n: usize,
    seed: u64,
) -> Result<MCEstimate> {
    if face.is_singleton() {
        let mean = problem.theta.eval(x, &face.chart.origin)?;
        return Ok(MCEstimate {
            mean,
            stderr: 0.0,
            n_samples: 1,
            n_accepted: 0,
            n_proposals: 0,
            seed,
            face_dim: 0,
        });
    }
    if n < 2 {
        return Err(Error::ConfigInvalid(format!("need at least 2 samples, got {n}")));
    }
    let (sums, stats) = accumulate(face, x, Some(&problem.theta), belief, n, seed)?;
    let weighted = matches!(belief, BeliefSpec::Conditional(_));
    let mean = match &problem.theta {
        Objective::Linear { d1, d2 } => dot(d1, x) + dot(d2, &sums.centroid()),
        Objective::Expr(_) => sums.theta / sums.weight,
    };
    Ok(MCEstimate {
        mean,
        stderr: sums.stderr(weighted),
        n_samples: sums.n,
        n_accepted: stats.accepted,
        n_proposals: stats.proposals,
        seed,
        face_dim: face.dim(),
    })
}

/// Sample centroid of `S(x)` with per-coordinate standard errors.
pub fn centroid_estimate(
    lower: &LinearLowerLevel,
    x: &[f64],
    n: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_domain(lower, x)?;
    let face = argmin_face(lower, x, 0.0)?;
    centroid_on_face(&face, x, n, seed)
}

fn centroid_on_face(face: &FaceDescription, x: &[f64], n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if face.is_singleton() {
        return Ok((face.chart.origin.clone(), vec![0.0; face.chart.ambient_dim()]));
    }
    if n < 2 {
        return Err(Error::ConfigInvalid(format!("need at least 2 samples, got {n}")));
    }
    let (sums, _) = accumulate(face, x, None, &BeliefSpec::Neutral, n, seed)?;
    let centroid = sums.centroid();
    let nf = sums.n as f64;
    let stderr = sums
        .y_sq
        .iter()
        .zip(&sums.y)
        .map(|(sq, s)| {
            let var = ((sq - s * s / nf) / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        })
        .collect();
    Ok((centroid, stderr))
}

/// Worst feasibility residual and optimality gap over a sample batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportReport {
    /// Largest `B y - (b - A x)` on rows scaled to unit infinity-norm, at least 0.
    pub max_constraint_violation: f64,
    /// Largest `<c, y> - min_y <c, y>`.
    pub max_optimality_gap: f64,
}

impl SupportReport {
    pub fn within(&self, violation_tol: f64, gap_tol: f64) -> bool {
        self.max_constraint_violation <= violation_tol && self.max_optimality_gap <= gap_tol
    }
}

pub fn support_check(problem: &BilevelProblem, x: &[f64], samples: &[Vec<f64>]) -> Result<SupportReport> {
    let k = feasible_set(&problem.lower, x)?;
    let value = lower_value(&problem.lower, x)?;
    let mut report = SupportReport {
        max_constraint_violation: 0.0,
        max_optimality_gap: f64::NEG_INFINITY,
    };
    for y in samples {
        report.max_constraint_violation = report.max_constraint_violation.max(k.max_scaled_residual(y));
        report.max_optimality_gap = report.max_optimality_gap.max(dot(&problem.lower.cost, y) - value);
    }
    if samples.is_empty() {
        report.max_optimality_gap = 0.0;
    }
    Ok(report)
}

/// One point along a continuity probe path.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbePoint {
    pub x: Vec<f64>,
    pub dim: usize,
    pub centroid: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Change of affine dimension between consecutive path points.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionChange {
    pub from_index: usize,
    pub from_dim: usize,
    pub to_index: usize,
    pub to_dim: usize,
    /// Centroid difference `to - from`.
    pub jump: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub points: Vec<ProbePoint>,
    pub dimension_changes: Vec<DimensionChange>,
    /// Consecutive same-dimension pairs whose centroids moved more than
    /// `lipschitz * |dx| + 6 * stderr`.
    pub violations: Vec<usize>,
}

impl ProbeReport {
    pub fn continuous(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Tracks centroid estimates along a path of leader decisions. Changes of
/// affine dimension are reported, not treated as failures; between points
/// of equal dimension the centroid must move by at most
/// `lipschitz * |dx| + 6 * (joint standard error)`.
pub fn continuity_probe(
    lower: &LinearLowerLevel,
    path: &[Vec<f64>],
    n: usize,
    seed: u64,
    lipschitz: f64,
) -> Result<ProbeReport> {
    let mut points = Vec::with_capacity(path.len());
    for (i, x) in path.iter().enumerate() {
        check_domain(lower, x)?;
        let face = argmin_face(lower, x, 0.0)?;
        let (centroid, stderr) = centroid_on_face(&face, x, n, fixed_seed_stream(seed, 0, i as u64))?;
        points.push(ProbePoint {
            x: x.clone(),
            dim: face.dim(),
            centroid,
            stderr,
        });
    }
    let mut dimension_changes = Vec::new();
    let mut violations = Vec::new();
    for (i, pair) in points.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let jump: Vec<f64> = b.centroid.iter().zip(&a.centroid).map(|(p, q)| p - q).collect();
        if a.dim != b.dim {
            dimension_changes.push(DimensionChange {
                from_index: i,
                from_dim: a.dim,
                to_index: i + 1,
                to_dim: b.dim,
                jump,
            });
            continue;
        }
        let dx = a.x.iter().zip(&b.x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        for (k, dj) in jump.iter().enumerate() {
            let se = (a.stderr[k].powi(2) + b.stderr[k].powi(2)).sqrt();
            if dj.abs() > lipschitz * dx + 6.0 * se {
                violations.push(i);
                break;
            }
        }
    }
    Ok(ProbeReport {
        points,
        dimension_changes,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::builtin;
    use crate::polytope::sample_uniform;
    use crate::reaction::face_slack;

    #[test]
    fn singleton_is_exact() {
        let p = builtin("singleton_1d").unwrap();
        let est = expected_value(&p, &[0.7], &BeliefSpec::Neutral, 1000, 1).unwrap();
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.n_samples, 1);
        let want = p.theta.eval(&[0.7], &[0.7]).unwrap();
        assert!((est.mean - want).abs() < 1e-9);
    }

    #[test]
    fn outside_domain() {
        let p = builtin("example22").unwrap();
        assert!(matches!(
            expected_value(&p, &[2.0, 2.0], &BeliefSpec::Neutral, 10, 1),
            Err(Error::OutsideDomain(_))
        ));
    }

    #[test]
    fn zero_density_mass() {
        let p = builtin("example22").unwrap();
        let b = BeliefSpec::conditional(Expression::parse("0*y1").unwrap());
        assert_eq!(expected_value(&p, &[0.0, 0.0], &b, 100, 1), Err(Error::ZeroDensityMass));
        let neg = BeliefSpec::conditional(Expression::parse("y1 - 5").unwrap());
        assert!(matches!(
            expected_value(&p, &[0.0, 0.0], &neg, 100, 1),
            Err(Error::ExpressionEval(_))
        ));
    }

    #[test]
    fn too_few_samples() {
        let p = builtin("example22").unwrap();
        assert!(matches!(
            expected_value(&p, &[0.0, 0.0], &BeliefSpec::Neutral, 1, 1),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn linear_objective_reduces_to_centroid() {
        let p = builtin("example22").unwrap();
        let x = [0.3, -0.2];
        let est = expected_value(&p, &x, &BeliefSpec::Neutral, 5000, 9).unwrap();
        let (c, _) = centroid_estimate(&p.lower, &x, 5000, 9).unwrap();
        assert_eq!(est.mean, c[0] - 7.0 * c[1]);
    }

    #[test]
    fn unit_density_matches_neutral() {
        let p = builtin("example22").unwrap();
        let one = BeliefSpec::conditional(Expression::parse("1").unwrap());
        let a = expected_value(&p, &[0.1, 0.1], &one, 2000, 3).unwrap();
        let b = expected_value(&p, &[0.1, 0.1], &BeliefSpec::Neutral, 2000, 3).unwrap();
        assert!((a.mean - b.mean).abs() <= 1e-12);
    }

    #[test]
    fn support_checks() {
        let p = builtin("example22").unwrap();
        let x = [0.2, 0.1];
        let face = argmin_face(&p.lower, &x, 0.0).unwrap();
        let batch = sample_uniform(&face, 500, 4).unwrap();
        let report = support_check(&p, &x, &batch.points).unwrap();
        assert!(report.within(2e-8, face_slack(0.0)));
        let bad = support_check(&p, &x, &[vec![5.0, 5.0]]).unwrap();
        assert!(bad.max_constraint_violation > 0.0);
    }

    #[test]
    fn relaxed_face_gap() {
        // min y2 over the unit square, leader x in [0, 1].
        let text = "name sq\ndims 1 2 6\nA\n0\n0\n0\n0\n1\n-1\nB\n1 0\n-1 0\n0 1\n0 -1\n0 0\n0 0\nb 1 0 1 0 1 0\nc 0 1\ntheta linear 0 | 0 1\n";
        let p = crate::problem::parse_problem(text).unwrap();
        let face = argmin_face(&p.lower, &[0.5], 0.5).unwrap();
        let batch = sample_uniform(&face, 2000, 2).unwrap();
        let report = support_check(&p, &[0.5], &batch.points).unwrap();
        assert!(report.max_optimality_gap <= 0.5 + face_slack(0.0));
        assert!(report.max_optimality_gap > 0.4);
    }

    #[test]
    fn probe_sees_dimension_drop() {
        let p = builtin("triangle_to_segment").unwrap();
        let path: Vec<Vec<f64>> = (0..=8).map(|i| vec![i as f64 / 8.0]).collect();
        let report = continuity_probe(&p.lower, &path, 20_000, 5, 1.0).unwrap();
        assert_eq!(report.dimension_changes.len(), 1);
        let change = &report.dimension_changes[0];
        assert_eq!((change.from_index, change.from_dim, change.to_dim), (0, 1, 2));
        assert!(report.continuous());
    }
}
