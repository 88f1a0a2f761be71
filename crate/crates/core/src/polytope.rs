//! Faces of H-polytopes: implicit equalities, affine charts and uniform
//! sampling in chart coordinates.
//!
//! Sampling uses [`rand_chacha::ChaCha8Rng`] seeded through
//! `SeedableRng::seed_from_u64`, so a given seed yields the same stream on
//! every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lp::{chebyshev_center, dot, inf_norm, norm2, solve_lp, support_value, HPolytope, LpResult};

/// Tolerance for declaring a row tight on the whole polytope.
pub const EPS_TIGHT: f64 = 1e-7;

const GRAM_SCHMIDT_DROP: f64 = 1e-9;
const EMBED_ROW_DROP: f64 = 1e-12;

/// The random generator used for every sampling routine.
pub type SampleRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Origin plus orthonormal basis of an affine subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineChart {
    pub origin: Vec<f64>,
    /// Basis columns, each of ambient length.
    pub basis: Vec<Vec<f64>>,
}

impl AffineChart {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.origin.len()
    }

    pub fn embed(&self, z: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = z.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        self.basis.iter().map(|u| dot(u, &diff)).collect()
    }

    pub fn unembed(&self, w: &[f64]) -> Vec<f64> {
        let mut z = self.origin.clone();
        self.unembed_into(w, &mut z);
        z
    }

    pub fn unembed_into(&self, w: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.origin);
        for (u, &wj) in self.basis.iter().zip(w) {
            for (o, ui) in out.iter_mut().zip(u) {
                *o += wj * ui;
            }
        }
    }
}

/// A polytope described in its own affine hull.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceDescription {
    pub ambient: HPolytope,
    pub equalities: Vec<usize>,
    pub chart: AffineChart,
    /// The face in chart coordinates; `None` for a single point.
    pub embedded: Option<HPolytope>,
    pub bounds: Vec<(f64, f64)>,
}

impl FaceDescription {
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn is_singleton(&self) -> bool {
        self.dim() == 0
    }

    pub fn box_volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }
}

/// Rows that are tight on the whole polytope: `min G_i z >= h_i - tol`,
/// measured on rows scaled to unit infinity-norm.
pub fn implicit_equalities(polytope: &HPolytope, tol: f64) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, (row, h)) in polytope.rows().enumerate() {
        let s = inf_norm(row);
        if s == 0.0 {
            continue;
        }
        match solve_lp(row, polytope)? {
            LpResult::Optimal { value, .. } => {
                if (value - h) / s >= -tol {
                    out.push(i);
                }
            }
            LpResult::Infeasible => return Err(Error::EmptyPolytope),
            LpResult::Unbounded { .. } => {}
        }
    }
    Ok(out)
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    // Two passes of modified Gram-Schmidt.
    for _ in 0..2 {
        for q in against {
            let p = dot(v, q);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= p * qi;
            }
        }
    }
}

/// Orthonormal basis of the null space of the given rows, chosen greedily
/// from the coordinate axes so axis-aligned faces get axis-aligned charts.
fn null_space_basis(normals: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for v in normals {
        let norm = norm2(v);
        if norm == 0.0 {
            continue;
        }
        let mut r: Vec<f64> = v.iter().map(|x| x / norm).collect();
        orthogonalize(&mut r, &q);
        let rn = norm2(&r);
        if rn >= GRAM_SCHMIDT_DROP {
            r.iter_mut().for_each(|x| *x /= rn);
            q.push(r);
        }
    }
    let k = n.saturating_sub(q.len());
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(Vec<f64>, f64)> = None;
        for axis in 0..n {
            let mut e = vec![0.0; n];
            e[axis] = 1.0;
            orthogonalize(&mut e, &q);
            orthogonalize(&mut e, &basis);
            let en = norm2(&e);
            if best.as_ref().is_none_or(|(_, b)| en > *b + 1e-12) {
                best = Some((e, en));
            }
        }
        let Some((mut e, en)) = best else { break };
        if en < GRAM_SCHMIDT_DROP {
            break;
        }
        e.iter_mut().for_each(|x| *x /= en);
        basis.push(e);
    }
    basis
}

/// Rows of the polytope restricted to the affine subspace through `origin`
/// spanned by `basis`, skipping `skip` and rows that vanish on the subspace.
fn restrict(
    polytope: &HPolytope,
    origin: &[f64],
    basis: &[Vec<f64>],
    skip: &[usize],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (i, (row, h)) in polytope.rows().enumerate() {
        if skip.contains(&i) {
            continue;
        }
        let projected: Vec<f64> = basis.iter().map(|u| dot(row, u)).collect();
        let scale = inf_norm(row);
        if inf_norm(&projected) <= EMBED_ROW_DROP * scale.max(1.0) {
            continue;
        }
        rows.push(projected);
        rhs.push(h - dot(row, origin));
    }
    (rows, rhs)
}

/// Affine chart of the face cut out by the given implicit equalities.
pub fn affine_chart(polytope: &HPolytope, equalities: &[usize]) -> Result<AffineChart> {
    let n = polytope.ncols();
    let normals: Vec<Vec<f64>> = equalities.iter().map(|&i| polytope.row(i).to_vec()).collect();
    let basis = null_space_basis(&normals, n);
    let (start, _) = chebyshev_center(polytope)?;
    if basis.is_empty() {
        return Ok(AffineChart { origin: start, basis });
    }
    let (rows, rhs) = restrict(polytope, &start, &basis, equalities);
    if rows.is_empty() {
        return Err(Error::UnboundedPolytope);
    }
    let restricted = HPolytope::new(rows, rhs)?;
    let (center, _) = chebyshev_center(&restricted)?;
    let chart = AffineChart { origin: start, basis };
    let origin = chart.unembed(&center);
    Ok(AffineChart { origin, basis: chart.basis })
}

pub fn affine_dimension(polytope: &HPolytope) -> Result<usize> {
    let eq = implicit_equalities(polytope, EPS_TIGHT)?;
    let normals: Vec<Vec<f64>> = eq.iter().map(|&i| polytope.row(i).to_vec()).collect();
    Ok(null_space_basis(&normals, polytope.ncols()).len())
}

pub fn build_face(polytope: &HPolytope) -> Result<FaceDescription> {
    build_face_with_tol(polytope, EPS_TIGHT)
}

/// [`build_face`] with an explicit implicit-equality tolerance.
pub fn build_face_with_tol(polytope: &HPolytope, tol: f64) -> Result<FaceDescription> {
    let equalities = implicit_equalities(polytope, tol)?;
    let chart = affine_chart(polytope, &equalities)?;
    if chart.dim() == 0 {
        return Ok(FaceDescription {
            ambient: polytope.clone(),
            equalities,
            chart,
            embedded: None,
            bounds: Vec::new(),
        });
    }
    let (rows, rhs) = restrict(polytope, &chart.origin, &chart.basis, &equalities);
    if rows.is_empty() {
        return Err(Error::UnboundedPolytope);
    }
    let embedded = HPolytope::new(rows, rhs)?;
    let k = chart.dim();
    let mut bounds = Vec::with_capacity(k);
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        let hi = support_value(&e, &embedded)?.ok_or(Error::UnboundedPolytope)?;
        e[j] = -1.0;
        let lo = -support_value(&e, &embedded)?.ok_or(Error::UnboundedPolytope)?;
        bounds.push((lo, hi));
    }
    Ok(FaceDescription {
        ambient: polytope.clone(),
        equalities,
        chart,
        embedded: Some(embedded),
        bounds,
    })
}

/// Bookkeeping for one sampling run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SampleStats {
    pub proposals: u64,
    pub accepted: u64,
    /// Points produced by the hit-and-run fallback.
    pub hit_and_run: u64,
}

impl SampleStats {
    /// Fraction of box proposals accepted; 1 for single-point faces.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub points: Vec<Vec<f64>>,
    pub stats: SampleStats,
}

pub fn sample_uniform(face: &FaceDescription, count: usize, seed: u64) -> Result<SampleBatch> {
    let mut points = Vec::with_capacity(count);
    let stats = sample_with(face, count, seed, |y| points.push(y.to_vec()))?;
    Ok(SampleBatch { points, stats })
}

fn inside(p: &HPolytope, w: &[f64]) -> bool {
    p.rows().all(|(row, h)| dot(row, w) <= h)
}

/// Streams `count` uniform points of the face (ambient coordinates) into
/// `visit`. Rejection sampling in the chart box with a budget of
/// `100 * count` proposals; the remainder comes from hit-and-run started at
/// the chart origin.
pub fn sample_with<F: FnMut(&[f64])>(
    face: &FaceDescription,
    count: usize,
    seed: u64,
    mut visit: F,
) -> Result<SampleStats> {
    let mut stats = SampleStats::default();
    let Some(embedded) = face.embedded.as_ref() else {
        for _ in 0..count {
            visit(&face.chart.origin);
        }
        stats.accepted = count as u64;
        return Ok(stats);
    };
    let mut rng = rng_from_seed(seed);
    let k = face.dim();
    let mut w = vec![0.0; k];
    let mut y = vec![0.0; face.chart.ambient_dim()];
    let budget = 100 * count as u64;
    while (stats.accepted as usize) < count && stats.proposals < budget {
        for (wj, &(lo, hi)) in w.iter_mut().zip(&face.bounds) {
            *wj = lo + (hi - lo) * rng.random::<f64>();
        }
        stats.proposals += 1;
        if inside(embedded, &w) {
            stats.accepted += 1;
            face.chart.unembed_into(&w, &mut y);
            visit(&y);
        }
    }
    let remaining = count - stats.accepted as usize;
    if remaining > 0 {
        hit_and_run(embedded, k, remaining, &mut rng, |w| {
            face.chart.unembed_into(w, &mut y);
            visit(&y);
        })?;
        stats.hit_and_run = remaining as u64;
    }
    Ok(stats)
}

fn hit_and_run<F: FnMut(&[f64])>(
    p: &HPolytope,
    k: usize,
    count: usize,
    rng: &mut SampleRng,
    mut visit: F,
) -> Result<()> {
    let mut w = vec![0.0; k];
    if p.max_residual(&w) >= 0.0 {
        let (c, r) = chebyshev_center(p)?;
        if r <= 0.0 {
            return Err(Error::RejectionBudgetExhausted(
                "embedded face has empty interior".into(),
            ));
        }
        w = c;
    }
    let burn_in = 100 * k;
    let thin = 2 * k;
    let mut d = vec![0.0; k];
    let mut step = |w: &mut Vec<f64>, rng: &mut SampleRng| {
        loop {
            for di in d.iter_mut() {
                *di = rng.sample(StandardNormal);
            }
            let n = norm2(&d);
            if n > 0.0 {
                d.iter_mut().for_each(|x| *x /= n);
                break;
            }
        }
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (row, h) in p.rows() {
            let a = dot(row, &d);
            let slack = (h - dot(row, w)).max(0.0);
            if a > 0.0 {
                hi = hi.min(slack / a);
            } else if a < 0.0 {
                lo = lo.max(slack / a);
            }
        }
        if lo.is_finite() && hi.is_finite() && hi > lo {
            let t = lo + (hi - lo) * rng.random::<f64>();
            for (wi, di) in w.iter_mut().zip(&d) {
                *wi += t * di;
            }
        }
    };
    for _ in 0..burn_in {
        step(&mut w, rng);
    }
    for _ in 0..count {
        for _ in 0..thin {
            step(&mut w, rng);
        }
        visit(&w);
    }
    Ok(())
}
