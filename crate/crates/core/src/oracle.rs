//! Exact geometry and quadrature on faces of dimension at most two.
//!
//! These routines never sample; they are the reference against which the
//! Monte-Carlo estimates are checked.

use crate::belief::BeliefSpec;
use crate::error::{Error, Result};
use crate::lp::{HPolytope, EPS_FEAS};
use crate::polytope::FaceDescription;
use crate::problem::BilevelProblem;

const DEDUPE_RADIUS: f64 = 1e-7;
const MIN_AREA: f64 = 1e-12;
const SEGMENT_TOL: f64 = 1e-9;
const REFINE_TOL: f64 = 1e-8;

/// A convex polygon in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonFace {
    /// Counterclockwise extreme points.
    pub vertices: Vec<[f64; 2]>,
    pub area: f64,
    pub centroid: [f64; 2],
}

fn shoelace(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Vertices of a bounded two-dimensional H-polytope by pairwise row
/// intersection, feasibility filtering, dedupe and angular sort.
pub fn enumerate_vertices_2d(embedded: &HPolytope) -> Result<PolygonFace> {
    if embedded.ncols() != 2 {
        return Err(Error::UnsupportedDimension(embedded.ncols()));
    }
    let rows: Vec<(&[f64], f64)> = embedded.rows().collect();
    let mut pts: Vec<[f64; 2]> = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a, ha) = rows[i];
            let (b, hb) = rows[j];
            let det = a[0] * b[1] - a[1] * b[0];
            let scale = crate::lp::norm2(a) * crate::lp::norm2(b);
            if det.abs() <= 1e-12 * scale {
                continue;
            }
            let p = [(ha * b[1] - hb * a[1]) / det, (a[0] * hb - b[0] * ha) / det];
            if !embedded.contains(&p, EPS_FEAS) {
                continue;
            }
            let dup = pts
                .iter()
                .any(|q| ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt() <= DEDUPE_RADIUS);
            if !dup {
                pts.push(p);
            }
        }
    }
    if pts.len() < 3 {
        return Err(Error::DegenerateFace(0.0));
    }
    let mid = [
        pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64,
        pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64,
    ];
    pts.sort_by(|p, q| {
        let ap = (p[1] - mid[1]).atan2(p[0] - mid[0]);
        let aq = (q[1] - mid[1]).atan2(q[0] - mid[0]);
        ap.total_cmp(&aq)
    });
    // Drop points lying on the segment between their neighbours.
    loop {
        let n = pts.len();
        if n < 3 {
            break;
        }
        let flat = (0..n).find(|&i| {
            let (prev, cur, next) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
            let len = ((next[0] - prev[0]).powi(2) + (next[1] - prev[1]).powi(2)).sqrt();
            cross(prev, cur, next).abs() <= 1e-12 * len.max(1.0)
        });
        match flat {
            Some(i) => {
                pts.remove(i);
            }
            None => break,
        }
    }
    if pts.len() < 3 {
        return Err(Error::DegenerateFace(0.0));
    }
    let area = shoelace(&pts);
    if area < MIN_AREA {
        return Err(Error::DegenerateFace(area));
    }
    let n = pts.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let w = a[0] * b[1] - b[0] * a[1];
        cx += (a[0] + b[0]) * w;
        cy += (a[1] + b[1]) * w;
    }
    Ok(PolygonFace {
        vertices: pts,
        area,
        centroid: [cx / (6.0 * area), cy / (6.0 * area)],
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n <= 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Symmetric 13-point degree-7 rule on a triangle: (barycentric point, weight),
/// weights summing to one.
const TRIANGLE_RULE: [([f64; 3], f64); 4] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], -0.149570044467682),
    ([0.479308067841920, 0.260345966079040, 0.260345966079040], 0.175615257433208),
    ([0.869739794195568, 0.065130102902216, 0.065130102902216], 0.053347235608838),
    ([0.048690315425316, 0.312865496004874, 0.638444188569810], 0.077113760890257),
];

fn triangle_points() -> Vec<([f64; 3], f64)> {
    let mut out = Vec::with_capacity(13);
    for (b, w) in TRIANGLE_RULE {
        let mut perms: Vec<[f64; 3]> = vec![
            [b[0], b[1], b[2]],
            [b[0], b[2], b[1]],
            [b[1], b[0], b[2]],
            [b[1], b[2], b[0]],
            [b[2], b[0], b[1]],
            [b[2], b[1], b[0]],
        ];
        perms.sort_by(|p, q| p.partial_cmp(q).unwrap_or(std::cmp::Ordering::Equal));
        perms.dedup();
        out.extend(perms.into_iter().map(|p| (p, w)));
    }
    out
}

/// Integral of a pair-valued integrand over a triangle with the degree-7 rule.
pub fn integrate_triangle<F>(t: [[f64; 2]; 3], f: &mut F) -> Result<[f64; 2]>
where
    F: FnMut([f64; 2]) -> Result<[f64; 2]>,
{
    let area = cross(t[0], t[1], t[2]).abs() / 2.0;
    let mut acc = [0.0; 2];
    for (b, w) in triangle_points() {
        let p = [
            b[0] * t[0][0] + b[1] * t[1][0] + b[2] * t[2][0],
            b[0] * t[0][1] + b[1] * t[1][1] + b[2] * t[2][1],
        ];
        let v = f(p)?;
        acc[0] += w * v[0];
        acc[1] += w * v[1];
    }
    Ok([acc[0] * area, acc[1] * area])
}

fn integrate_refined<F>(t: [[f64; 2]; 3], f: &mut F) -> Result<[f64; 2]>
where
    F: FnMut([f64; 2]) -> Result<[f64; 2]>,
{
    let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    let (m01, m12, m20) = (mid(t[0], t[1]), mid(t[1], t[2]), mid(t[2], t[0]));
    let mut acc = [0.0; 2];
    for sub in [
        [t[0], m01, m20],
        [m01, t[1], m12],
        [m20, m12, t[2]],
        [m01, m12, m20],
    ] {
        let v = integrate_triangle(sub, f)?;
        acc[0] += v[0];
        acc[1] += v[1];
    }
    Ok(acc)
}

/// Integral over a convex polygon, fan-triangulated from its centroid.
pub fn integrate_polygon<F>(poly: &PolygonFace, f: &mut F) -> Result<[f64; 2]>
where
    F: FnMut([f64; 2]) -> Result<[f64; 2]>,
{
    let n = poly.vertices.len();
    let tris: Vec<[[f64; 2]; 3]> = (0..n)
        .map(|i| [poly.centroid, poly.vertices[i], poly.vertices[(i + 1) % n]])
        .collect();
    let mut coarse = [0.0; 2];
    let mut fine = [0.0; 2];
    for t in &tris {
        let c = integrate_triangle(*t, f)?;
        let r = integrate_refined(*t, f)?;
        for k in 0..2 {
            coarse[k] += c[k];
            fine[k] += r[k];
        }
    }
    let disagree = (0..2).any(|k| (coarse[k] - fine[k]).abs() > REFINE_TOL);
    Ok(if disagree { fine } else { coarse })
}

fn gauss_on<F>(nodes: &[(f64, f64)], a: f64, b: f64, f: &mut F) -> Result<[f64; 2]>
where
    F: FnMut(f64) -> Result<[f64; 2]>,
{
    let (c, h) = ((a + b) / 2.0, (b - a) / 2.0);
    let mut acc = [0.0; 2];
    for &(x, w) in nodes {
        let v = f(c + h * x)?;
        acc[0] += w * v[0];
        acc[1] += w * v[1];
    }
    Ok([acc[0] * h, acc[1] * h])
}

/// Adaptive Gauss-Legendre quadrature of a pair-valued integrand on `[a, b]`
/// to absolute tolerance `tol`.
pub fn integrate_segment<F>(a: f64, b: f64, tol: f64, f: &mut F) -> Result<[f64; 2]>
where
    F: FnMut(f64) -> Result<[f64; 2]>,
{
    let nodes = gauss_legendre(10);
    fn recurse<F>(
        nodes: &[(f64, f64)],
        a: f64,
        b: f64,
        whole: [f64; 2],
        tol: f64,
        depth: usize,
        f: &mut F,
    ) -> Result<[f64; 2]>
    where
        F: FnMut(f64) -> Result<[f64; 2]>,
    {
        let m = (a + b) / 2.0;
        let left = gauss_on(nodes, a, m, f)?;
        let right = gauss_on(nodes, m, b, f)?;
        let split = [left[0] + right[0], left[1] + right[1]];
        let err = (0..2).map(|k| (split[k] - whole[k]).abs()).fold(0.0, f64::max);
        if err <= tol || depth >= 40 {
            return Ok(split);
        }
        let l = recurse(nodes, a, m, left, tol / 2.0, depth + 1, f)?;
        let r = recurse(nodes, m, b, right, tol / 2.0, depth + 1, f)?;
        Ok([l[0] + r[0], l[1] + r[1]])
    }
    let whole = gauss_on(&nodes, a, b, f)?;
    recurse(&nodes, a, b, whole, tol, 0, f)
}

/// Exact centroid of a face of dimension at most two, in ambient coordinates.
pub fn exact_centroid(face: &FaceDescription) -> Result<Vec<f64>> {
    match face.dim() {
        0 => Ok(face.chart.origin.clone()),
        1 => {
            let (lo, hi) = face.bounds[0];
            Ok(face.chart.unembed(&[(lo + hi) / 2.0]))
        }
        2 => {
            let poly = polygon_of(face)?;
            Ok(face.chart.unembed(&poly.centroid))
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// The polygon of a two-dimensional face, in chart coordinates.
pub fn polygon_of(face: &FaceDescription) -> Result<PolygonFace> {
    match (face.dim(), face.embedded.as_ref()) {
        (2, Some(p)) => enumerate_vertices_2d(p),
        (d, _) => Err(Error::UnsupportedDimension(d)),
    }
}

/// Expected leader objective over a face by quadrature. Conditional beliefs
/// integrate `rho * theta` and `rho` with the same rule.
pub fn exact_expectation(
    face: &FaceDescription,
    problem: &BilevelProblem,
    x: &[f64],
    belief: &BeliefSpec,
) -> Result<f64> {
    let integrand = |y: &[f64]| -> Result<[f64; 2]> {
        let theta = problem.theta.eval(x, y)?;
        match belief {
            BeliefSpec::Neutral => Ok([theta, 1.0]),
            BeliefSpec::Conditional(rho) => {
                let w = rho.eval(x, y)?;
                if w < 0.0 {
                    return Err(Error::ExpressionEval(format!("negative density {w}")));
                }
                Ok([w * theta, w])
            }
        }
    };
    let totals = match face.dim() {
        0 => return problem.theta.eval(x, &face.chart.origin),
        1 => {
            let (lo, hi) = face.bounds[0];
            let mut y = vec![0.0; face.chart.ambient_dim()];
            integrate_segment(lo, hi, SEGMENT_TOL, &mut |t| {
                face.chart.unembed_into(&[t], &mut y);
                integrand(&y)
            })?
        }
        2 => {
            let poly = polygon_of(face)?;
            let mut y = vec![0.0; face.chart.ambient_dim()];
            integrate_polygon(&poly, &mut |w| {
                face.chart.unembed_into(&w, &mut y);
                integrand(&y)
            })?
        }
        d => return Err(Error::UnsupportedDimension(d)),
    };
    if !(totals[1] > 0.0) {
        return Err(Error::ZeroDensityMass);
    }
    Ok(totals[0] / totals[1])
}

/// Closed-form neutral value of the `example22` builtin on the simplex
/// `co{(0,0),(1,0),(0,1)}`, extended to the diamond by `x -> |x|`.
pub fn explicit_phi_n_example22(x: &[f64]) -> Result<f64> {
    if x.len() != 2 {
        return Err(Error::DimensionMismatch(format!("x has length {}, expected 2", x.len())));
    }
    let (x1, x2) = (x[0].abs(), x[1].abs());
    if x1 + x2 > 1.0 + 1e-12 {
        return Err(Error::OutsideSimplex(x.to_vec()));
    }
    let num = -30.0 + 9.0 * x1 + 18.0 * x1 * x1 - 3.0 * x1.powi(3) + 21.0 * x2 - 3.0 * x2 * x2;
    let den = 12.0 - 6.0 * x1 - 6.0 * x2 - 3.0 * x1 * x1;
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::builtin;
    use crate::polytope::build_face;
    use crate::reaction::argmin_face;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn square_and_triangle() {
        let sq = enumerate_vertices_2d(&HPolytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(sq.vertices.len(), 4);
        assert!((sq.area - 1.0).abs() < 1e-12);
        assert!((sq.centroid[0] - 0.5).abs() < 1e-12 && (sq.centroid[1] - 0.5).abs() < 1e-12);
        let tri = HPolytope::new(
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0], vec![2.0, 2.0]],
            vec![0.0, 0.0, 1.0, 2.0],
        )
        .unwrap();
        let t = enumerate_vertices_2d(&tri).unwrap();
        assert_eq!(t.vertices.len(), 3);
        assert!((t.area - 0.5).abs() < 1e-12);
        assert!((t.centroid[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((shoelace(&t.vertices) - t.area).abs() < 1e-10);
    }

    #[test]
    fn thin_polygon_is_degenerate() {
        let p = HPolytope::from_box(&[0.0, 0.0], &[1.0, 1e-13]).unwrap();
        assert!(matches!(enumerate_vertices_2d(&p), Err(Error::DegenerateFace(_))));
    }

    #[test]
    fn example22_pentagon() {
        let p = builtin("example22").unwrap();
        let face = argmin_face(&p.lower, &[0.5, 0.25], 0.0).unwrap();
        assert_eq!(face.dim(), 2);
        let poly = polygon_of(&face).unwrap();
        let mut got: Vec<Vec<f64>> = poly.vertices.iter().map(|w| face.chart.unembed(w)).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = vec![
            vec![0.25, 0.0],
            vec![1.5, 0.0],
            vec![1.5, 0.5],
            vec![1.0, 1.0],
            vec![0.25, 1.0],
        ];
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got.len(), 5);
        for (g, w) in got.iter().zip(&want) {
            assert!((g[0] - w[0]).abs() < 1e-7 && (g[1] - w[1]).abs() < 1e-7, "{g:?} vs {w:?}");
        }
    }

    #[test]
    fn triangle_rule_is_degree_seven() {
        let reference = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for a in 0..=7u32 {
            for b in 0..=(7 - a) {
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                let got = integrate_triangle(reference, &mut |p| {
                    Ok([p[0].powi(a as i32) * p[1].powi(b as i32), 0.0])
                })
                .unwrap()[0];
                assert!(((got - exact) / exact).abs() <= 1e-12, "x^{a} y^{b}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn gauss_legendre_is_exact_for_low_degree() {
        let nodes = gauss_legendre(10);
        assert!((nodes.iter().map(|(_, w)| w).sum::<f64>() - 2.0).abs() < 1e-14);
        for deg in 0..20 {
            let got: f64 = nodes.iter().map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((got - exact).abs() < 1e-13, "degree {deg}");
        }
        let r = integrate_segment(0.0, std::f64::consts::PI, 1e-12, &mut |t| Ok([t.sin(), 1.0])).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-11);
    }

    #[test]
    fn exact_values_on_example22() {
        let p = builtin("example22").unwrap();
        let e = |x: [f64; 2]| {
            let face = argmin_face(&p.lower, &x, 0.0).unwrap();
            exact_expectation(&face, &p, &x, &BeliefSpec::Neutral).unwrap()
        };
        assert!((e([0.0, 0.0]) + 2.5).abs() < 1e-12);
        assert!((e([1.0, 0.0]) + 2.0).abs() < 1e-9);
        assert!((e([0.391, 0.0]) + 2.6001).abs() < 1e-3);
        assert!((e([0.391, 0.0]) - explicit_phi_n_example22(&[0.391, 0.0]).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn linear_objective_on_square() {
        let text = "name sq\ndims 1 2 6\nA\n0\n0\n0\n0\n1\n-1\nB\n1 0\n-1 0\n0 1\n0 -1\n0 0\n0 0\nb 1 0 1 0 1 0\nc 0 0\ntheta linear 2 | 3 -5\n";
        let p = crate::problem::parse_problem(text).unwrap();
        let face = argmin_face(&p.lower, &[0.25], 0.0).unwrap();
        let v = exact_expectation(&face, &p, &[0.25], &BeliefSpec::Neutral).unwrap();
        assert!((v - (0.5 + 1.5 - 2.5)).abs() < 1e-12);
    }

    #[test]
    fn segment_and_point_faces() {
        let p = builtin("triangle_to_segment").unwrap();
        let face = argmin_face(&p.lower, &[0.0], 0.0).unwrap();
        assert_eq!(face.dim(), 1);
        // theta = y1 + y2 with centroid (0, 1/2).
        let v = exact_expectation(&face, &p, &[0.0], &BeliefSpec::Neutral).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
        let c = exact_centroid(&face).unwrap();
        assert!(c[0].abs() < 1e-8 && (c[1] - 0.5).abs() < 1e-9);

        let s = builtin("singleton_1d").unwrap();
        let face = argmin_face(&s.lower, &[0.6], 0.0).unwrap();
        let v = exact_expectation(&face, &s, &[0.6], &BeliefSpec::Neutral).unwrap();
        assert!((v - (0.09 + 0.6)).abs() < 1e-9);
    }

    #[test]
    fn conditional_quadrature() {
        // Density y2 on the unit square: E[y2] = (1/3)/(1/2) = 2/3.
        let text = "name sq\ndims 1 2 6\nA\n0\n0\n0\n0\n1\n-1\nB\n1 0\n-1 0\n0 1\n0 -1\n0 0\n0 0\nb 1 0 1 0 1 0\nc 0 0\ntheta linear 0 | 0 1\n";
        let p = crate::problem::parse_problem(text).unwrap();
        let face = build_face(&crate::reaction::feasible_set(&p.lower, &[0.0]).unwrap()).unwrap();
        let rho = BeliefSpec::conditional(crate::expr::Expression::parse("y2").unwrap());
        let v = exact_expectation(&face, &p, &[0.0], &rho).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
        let zero = BeliefSpec::conditional(crate::expr::Expression::parse("0*y1").unwrap());
        assert_eq!(exact_expectation(&face, &p, &[0.0], &zero), Err(Error::ZeroDensityMass));
    }

    #[test]
    fn explicit_formula_values() {
        assert!((explicit_phi_n_example22(&[0.0, 0.0]).unwrap() + 2.5).abs() < 1e-15);
        assert!((explicit_phi_n_example22(&[1.0, 0.0]).unwrap() + 2.0).abs() < 1e-15);
        assert!((explicit_phi_n_example22(&[0.0, 1.0]).unwrap() + 2.0).abs() < 1e-15);
        assert!((explicit_phi_n_example22(&[-0.391, 0.0]).unwrap() + 2.6001).abs() < 5e-4);
        assert!(matches!(
            explicit_phi_n_example22(&[0.8, 0.8]),
            Err(Error::OutsideSimplex(_))
        ));
    }
}
