//! Anisotropic distance `delta(x) = inf { phi*(x - c) : c in K }`, the nearest
//! projection `xi`, the Cahn-Hoffman field `nu = (x - xi) / delta`, reach along
//! normal rays, and finite-difference curvature spectra.
//!
//! `K` is either a convex body or the closure of its complement. For smooth
//! bodies `c + s W^psi` the projection solves the normal system
//! `x - c = s grad psi(eta) + sigma delta grad phi(eta)` (`sigma = +1` outside,
//! `-1` inside) for the unit normal `eta` and `delta` with a bordered Newton
//! iteration; no dual norm evaluations are needed. Polytopes are handled face
//! by face.

use serde::{Serialize, Serializer};

use crate::body::{ConvexBody, Polytope, SmoothView};
use crate::error::{GeomError, Result};
use crate::linalg::{self, Vector, MAX_SYSTEM};
use crate::norm::NormSpec;
use crate::sphere::{quasi_uniform_directions, SphereMesh};

/// Relative residual at which the normal-system Newton iteration stops.
pub const NEWTON_TOL: f64 = 1e-13;
pub const NEWTON_MAX_ITERATIONS: usize = 100;
/// Relative objective gap below which two complement feet count as tied.
pub const AMBIGUITY_GAP: f64 = 1e-7;
/// Foot separation (relative to the diameter) beyond which tied feet are distinct.
pub const AMBIGUITY_SEPARATION: f64 = 1e-3;
/// Finite-difference step relative to the distance.
pub const FD_RELATIVE_STEP: f64 = 1e-4;
/// Threshold on the eigen-residual of the finite-difference Jacobian.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-4;
/// Threshold on the step-halving discrepancy of the curvature estimate.
pub const RICHARDSON_TOL: f64 = 1e-4;
/// `1 - r chi` at or below this marks an infinite curvature.
pub const INFINITE_CURVATURE_TOL: f64 = 1e-6;
/// Relative tolerance of the reach predicate `|delta(a + s u) - s| <= tol s`.
pub const REACH_PREDICATE_TOL: f64 = 1e-7;
/// Sentinel written in place of an infinite curvature in reports.
pub const INFINITE_CURVATURE_SENTINEL: f64 = 1e300;

const SCAN_RESOLUTION_2D: usize = 256;
const SCAN_RESOLUTION_3D: usize = 12;
const SCAN_REFINEMENTS: usize = 6;

/// The set a projection is taken onto.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a, const D: usize> {
    /// The convex body itself; queries lie outside it.
    Convex(&'a ConvexBody<D>),
    /// The closure of the complement; queries lie inside the body.
    Complement(&'a ConvexBody<D>),
}

impl<'a, const D: usize> Target<'a, D> {
    pub fn body(&self) -> &'a ConvexBody<D> {
        match self {
            Self::Convex(b) | Self::Complement(b) => b,
        }
    }

    pub fn is_complement(&self) -> bool {
        matches!(self, Self::Complement(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Multiplicity {
    Unique,
    Ambiguous,
}

/// Polytope face carrying the foot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Facet(usize),
    Edge(usize),
    Vertex(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult<const D: usize> {
    pub distance: f64,
    pub foot: Vector<D>,
    /// `(x - foot) / distance`, a point of the Wulff shape.
    pub cahn_hoffman: Vector<D>,
    /// Gradient of the distance function, `grad phi*(x - foot)`.
    pub gradient: Vector<D>,
    /// Euclidean unit normal of `K` at the foot, pointing towards `x`.
    pub normal: Vector<D>,
    pub multiplicity: Multiplicity,
    pub face: Option<Face>,
}

/// A principal curvature that may be infinite on lower-dimensional strata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curvature {
    Finite(f64),
    Infinite,
}

impl Curvature {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(*v),
            Self::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinite)
    }

    /// Finite value, or [`INFINITE_CURVATURE_SENTINEL`].
    pub fn reported(&self) -> f64 {
        self.value().unwrap_or(INFINITE_CURVATURE_SENTINEL)
    }
}

impl Serialize for Curvature {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.reported())
    }
}

/// Sorted anisotropic curvatures at a point.
///
/// `radius` is the distance `r` of the evaluation point for the
/// finite-difference route and `None` for closed-form boundary evaluation, in
/// which case `chi` is empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureSpectrum {
    pub chi: Vec<f64>,
    pub kappa: Vec<Curvature>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub radius: Option<f64>,
    pub eigen_residual: f64,
    pub richardson_defect: f64,
    pub richardson_ok: bool,
}

impl CurvatureSpectrum {
    /// Finite curvature values; `None` if any entry is infinite.
    pub fn finite_kappa(&self) -> Option<Vec<f64>> {
        self.kappa.iter().map(|k| k.value()).collect()
    }
}

/// Sorts eigenpairs by value, breaking ties by the sign-normalized vector.
pub(crate) fn sort_eigenpairs(pairs: &mut [(f64, Vec<f64>)]) {
    for (_, v) in pairs.iter_mut() {
        if let Some(first) = v.iter().find(|c| c.abs() > 1e-12) {
            if *first < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
        }
    }
    pairs.sort_by(|(a, u), (b, v)| {
        a.total_cmp(b).then_with(|| {
            u.iter()
                .zip(v)
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
}

// ---------------------------------------------------------------------------
// Smooth bodies

/// Solves `s grad psi(p) + sigma delta grad phi(p) = y`, `|p| = 1`, by damped
/// Newton on `(p, delta)` with the bordering row `p . dp = 0`.
fn solve_normal_system<const D: usize>(
    view: &SmoothView<'_, D>,
    spec: &NormSpec<D>,
    y: &Vector<D>,
    sigma: f64,
    mut p: Vector<D>,
    mut delta: f64,
) -> Result<(Vector<D>, f64)> {
    let s = view.scale;
    let reference = y.norm() + s + delta.abs();
    let residual = |p: &Vector<D>, delta: f64| -> Result<(f64, Vector<D>)> {
        let f = view.gauge.norm_jet(p)?.gradient * s + spec.norm_jet(p)?.gradient * (sigma * delta) - y;
        Ok((f.norm(), f))
    };
    let (mut norm_f, _) = residual(&p, delta)?;
    for _ in 0..NEWTON_MAX_ITERATIONS {
        if norm_f <= NEWTON_TOL * reference {
            return Ok((p, delta));
        }
        let jpsi = view.gauge.norm_jet(&p)?;
        let jphi = spec.norm_jet(&p)?;
        let f = jpsi.gradient * s + jphi.gradient * (sigma * delta) - y;
        let block = jpsi.hessian * s + jphi.hessian * (sigma * delta);
        let mut a = [[0.0; MAX_SYSTEM]; MAX_SYSTEM];
        let mut b = [0.0; MAX_SYSTEM];
        for i in 0..D {
            for j in 0..D {
                a[i][j] = block[(i, j)];
            }
            a[i][D] = sigma * jphi.gradient[i];
            a[D][i] = p[i];
            b[i] = -f[i];
        }
        let Some(step) = linalg::solve_dense(&mut a, &mut b, D + 1) else {
            break;
        };
        let dp = Vector::<D>::from_fn(|i, _| step[i]);
        let dd = step[D];
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let trial_p = p + dp * t;
            let trial_d = delta + dd * t;
            if trial_p.norm() > 1e-12 && trial_d > -reference {
                let trial_p = trial_p.normalize();
                let (trial_norm, _) = residual(&trial_p, trial_d)?;
                if trial_norm < norm_f {
                    p = trial_p;
                    delta = trial_d;
                    norm_f = trial_norm;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm_f <= 1e3 * NEWTON_TOL * reference {
        Ok((p, delta))
    } else {
        Err(GeomError::NoConvergence {
            what: "normal system",
            iterations: NEWTON_MAX_ITERATIONS,
            residual: norm_f / reference,
        })
    }
}

fn smooth_result<const D: usize>(
    view: &SmoothView<'_, D>,
    spec: &NormSpec<D>,
    x: &Vector<D>,
    eta: Vector<D>,
    delta: f64,
    sigma: f64,
    multiplicity: Multiplicity,
) -> Result<ProjectionResult<D>> {
    let foot = view.point(&eta)?;
    let jet = spec.norm_jet(&eta)?;
    let _ = x;
    Ok(ProjectionResult {
        distance: delta,
        foot,
        cahn_hoffman: jet.gradient * sigma,
        gradient: eta * (sigma / jet.value),
        normal: eta * sigma,
        multiplicity,
        face: None,
    })
}

/// `(eta . y - s psi(eta)) / phi(eta)`: the signed distance from `y` to the
/// supporting half-space of `s W^psi` with normal `eta`.
fn support_gap<const D: usize>(view: &SmoothView<'_, D>, spec: &NormSpec<D>, y: &Vector<D>, eta: &Vector<D>) -> Result<f64> {
    Ok((eta.dot(y) - view.scale * view.gauge.value(eta)?) / spec.value(eta)?)
}

fn project_smooth_convex<const D: usize>(
    view: &SmoothView<'_, D>,
    spec: &NormSpec<D>,
    x: &Vector<D>,
    hint: Option<(Vector<D>, f64)>,
) -> Result<ProjectionResult<D>> {
    let y = x - view.center;
    let floor = 1e-6 * (view.scale + y.norm());
    let start = match hint {
        Some(h) => h,
        None => {
            let p0 = y.normalize();
            (p0, support_gap(view, spec, &y, &p0)?.max(floor))
        }
    };
    let positive = |r: Result<(Vector<D>, f64)>| match r {
        Ok((p, d)) if d > 0.0 => Ok((p, d)),
        Ok((_, d)) => Err(GeomError::NoConvergence {
            what: "normal system",
            iterations: NEWTON_MAX_ITERATIONS,
            residual: d,
        }),
        Err(e) => Err(e),
    };
    let solved = positive(solve_normal_system(view, spec, &y, 1.0, start.0, start.1))
        .or_else(|_| {
            // Normal of the gauge level set through y: exact near the boundary.
            let p0 = view.gauge.dual_jet(&y)?.gradient.normalize();
            positive(solve_normal_system(view, spec, &y, 1.0, p0, support_gap(view, spec, &y, &p0)?.max(floor)))
        })
        .or_else(|_| {
        // The distance is the largest support gap; start from the best direction.
        let count = if D == 2 { 360 } else { 2000 };
        let mut best = (start.0, f64::NEG_INFINITY);
        for eta in quasi_uniform_directions::<D>(count) {
            let g = support_gap(view, spec, &y, &eta)?;
            if g > best.1 {
                best = (eta, g);
            }
        }
        positive(solve_normal_system(view, spec, &y, 1.0, best.0, best.1.max(floor)))
    })?;
    smooth_result(view, spec, x, solved.0, solved.1, 1.0, Multiplicity::Unique)
}

fn project_smooth_complement<const D: usize>(
    body: &ConvexBody<D>,
    view: &SmoothView<'_, D>,
    spec: &NormSpec<D>,
    x: &Vector<D>,
    hint: Option<(Vector<D>, f64)>,
) -> Result<ProjectionResult<D>> {
    let y = x - view.center;
    if let Some((p, d)) = hint {
        if let Ok((eta, delta)) = solve_normal_system(view, spec, &y, -1.0, p, d) {
            if delta > 0.0 {
                return smooth_result(view, spec, x, eta, delta, -1.0, Multiplicity::Unique);
            }
        }
    }
    // Coarse scan of f(eta) = (s psi(eta) - eta . y) / phi(eta) over a sphere
    // mesh; the distance is min f. Refine the best local minima by Newton.
    let mesh = SphereMesh::<D>::new(if D == 2 { SCAN_RESOLUTION_2D } else { SCAN_RESOLUTION_3D });
    let values = mesh
        .vertices
        .iter()
        .map(|eta| support_gap(view, spec, &y, eta).map(|g| -g))
        .collect::<Result<Vec<f64>>>()?;
    let adjacency = mesh.adjacency();
    let mut minima: Vec<usize> = (0..values.len())
        .filter(|&i| adjacency[i].iter().all(|&j| values[i] <= values[j]))
        .collect();
    minima.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut solutions: Vec<(Vector<D>, f64)> = Vec::new();
    let mut last_error = None;
    for &i in minima.iter().take(SCAN_REFINEMENTS) {
        match solve_normal_system(view, spec, &y, -1.0, mesh.vertices[i], values[i].max(1e-12)) {
            Ok((eta, delta)) if delta > 0.0 => {
                if !solutions.iter().any(|(e, _)| (e - eta).norm() < 1e-7) {
                    solutions.push((eta, delta));
                }
            }
            Ok(_) => {}
            Err(e) => last_error = Some(e),
        }
    }
    if solutions.is_empty() {
        return Err(last_error.unwrap_or(GeomError::NoConvergence {
            what: "complement projection",
            iterations: NEWTON_MAX_ITERATIONS,
            residual: f64::NAN,
        }));
    }
    solutions.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (eta, delta) = solutions[0];
    let foot = view.point(&eta)?;
    let diam = body.diameter();
    let mut multiplicity = Multiplicity::Unique;
    for (other, d) in &solutions[1..] {
        if (d - delta) / delta <= AMBIGUITY_GAP
            && (view.point(other)? - foot).norm() > AMBIGUITY_SEPARATION * diam
        {
            multiplicity = Multiplicity::Ambiguous;
        }
    }
    smooth_result(view, spec, x, eta, delta, -1.0, multiplicity)
}

// ---------------------------------------------------------------------------
// Polytopes

fn minimize_on_edge<const D: usize>(
    spec: &NormSpec<D>,
    x: &Vector<D>,
    v0: &Vector<D>,
    v1: &Vector<D>,
) -> Result<(f64, f64)> {
    let e = v1 - v0;
    let slope = |t: f64| -> Result<f64> { Ok(-e.dot(&spec.dual_jet(&(x - v0 - e * t))?.gradient)) };
    let value = |t: f64| spec.dual_value(&(x - v0 - e * t));
    let (d0, d1) = (slope(0.0)?, slope(1.0)?);
    if d0 >= 0.0 {
        return Ok((0.0, value(0.0)?));
    }
    if d1 <= 0.0 {
        return Ok((1.0, value(1.0)?));
    }
    // The slope is nondecreasing: safeguarded Newton on the bracket.
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut t = 0.5;
    for _ in 0..80 {
        let jet = spec.dual_jet(&(x - v0 - e * t))?;
        let g = -e.dot(&jet.gradient);
        if g.abs() <= 1e-14 * e.norm() {
            break;
        }
        if g > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let curvature = e.dot(&(jet.hessian * e));
        let newton = t - g / curvature;
        t = if curvature > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 {
            break;
        }
    }
    Ok((t, value(t)?))
}

fn project_polytope_convex<const D: usize>(
    poly: &Polytope<D>,
    spec: &NormSpec<D>,
    x: &Vector<D>,
) -> Result<ProjectionResult<D>> {
    // A facet foot satisfying the optimality conditions is the global optimum.
    for (i, f) in poly.facets().iter().enumerate() {
        let t = f.normal.dot(x) - f.offset;
        if t <= 0.0 {
            continue;
        }
        let jet = spec.norm_jet(&f.normal)?;
        let delta = t / jet.value;
        let foot = x - jet.gradient * delta;
        if poly.contains_approx(&foot) {
            return Ok(ProjectionResult {
                distance: delta,
                foot,
                cahn_hoffman: jet.gradient,
                gradient: f.normal / jet.value,
                normal: f.normal,
                multiplicity: Multiplicity::Unique,
                face: Some(Face::Facet(i)),
            });
        }
    }
    // Otherwise the foot lies on a lower-dimensional face.
    let mut best: Option<(f64, Vector<D>, Face)> = None;
    if D == 2 {
        for (k, v) in poly.vertices().iter().enumerate() {
            let d = spec.dual_value(&(x - v))?;
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, *v, Face::Vertex(k)));
            }
        }
    } else {
        for (k, (ends, _)) in poly.edges().iter().enumerate() {
            let (v0, v1) = (poly.vertices()[ends[0]], poly.vertices()[ends[1]]);
            let (t, d) = minimize_on_edge(spec, x, &v0, &v1)?;
            let (foot, face) = if t <= 0.0 {
                (v0, Face::Vertex(ends[0]))
            } else if t >= 1.0 {
                (v1, Face::Vertex(ends[1]))
            } else {
                (v0 + (v1 - v0) * t, Face::Edge(k))
            };
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, foot, face));
            }
        }
    }
    let (delta, foot, face) = best.expect("polytope has faces");
    let jet = spec.dual_jet(&(x - foot))?;
    Ok(ProjectionResult {
        distance: delta,
        foot,
        cahn_hoffman: (x - foot) / delta,
        gradient: jet.gradient,
        normal: jet.gradient.normalize(),
        multiplicity: Multiplicity::Unique,
        face: Some(face),
    })
}

fn project_polytope_complement<const D: usize>(
    poly: &Polytope<D>,
    spec: &NormSpec<D>,
    x: &Vector<D>,
    diam: f64,
) -> Result<ProjectionResult<D>> {
    let mut candidates = Vec::with_capacity(poly.facets().len());
    for (i, f) in poly.facets().iter().enumerate() {
        let jet = spec.norm_jet(&f.normal)?;
        let d = (f.offset - f.normal.dot(x)) / jet.value;
        candidates.push((d, i, jet));
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (delta, i, jet) = candidates[0];
    let foot = x + jet.gradient * delta;
    let mut multiplicity = Multiplicity::Unique;
    for (d, _, other) in &candidates[1..] {
        if (d - delta) / delta <= AMBIGUITY_GAP
            && ((x + other.gradient * *d) - foot).norm() > AMBIGUITY_SEPARATION * diam
        {
            multiplicity = Multiplicity::Ambiguous;
        }
    }
    let n = poly.facets()[i].normal;
    Ok(ProjectionResult {
        distance: delta,
        foot,
        cahn_hoffman: -jet.gradient,
        gradient: -n / jet.value,
        normal: -n,
        multiplicity,
        face: Some(Face::Facet(i)),
    })
}

// ---------------------------------------------------------------------------
// Public operations

fn project_impl<const D: usize>(
    target: Target<'_, D>,
    spec: &NormSpec<D>,
    x: &Vector<D>,
    hint: Option<&ProjectionResult<D>>,
) -> Result<ProjectionResult<D>> {
    let body = target.body();
    match target {
        Target::Convex(_) => {
            if body.contains(x) {
                return Err(GeomError::InsideBody);
            }
            match body {
                ConvexBody::HPolytope(p) => project_polytope_convex(p, spec, x),
                _ => {
                    let view = body.smooth_view().unwrap();
                    project_smooth_convex(&view, spec, x, hint.map(|h| (h.normal, h.distance)))
                }
            }
        }
        Target::Complement(_) => {
            let inside = match body {
                ConvexBody::HPolytope(p) => p
                    .rows()
                    .iter()
                    .zip(p.offsets())
                    .all(|(r, c)| r.dot(x) < *c),
                _ => body.smooth_view().unwrap().gauge_value(x)? < 1.0,
            };
            if !inside {
                return Err(GeomError::InvalidArgument(
                    "complement projection needs a point in the interior of the body".into(),
                ));
            }
            match body {
                ConvexBody::HPolytope(p) => project_polytope_complement(p, spec, x, body.diameter()),
                _ => {
                    let view = body.smooth_view().unwrap();
                    project_smooth_complement(body, &view, spec, x, hint.map(|h| (-h.normal, h.distance)))
                }
            }
        }
    }
}

/// Distance, foot, Cahn-Hoffman vector and multiplicity at `x`.
pub fn distance_project<const D: usize>(
    target: Target<'_, D>,
    spec: &NormSpec<D>,
    x: &Vector<D>,
) -> Result<ProjectionResult<D>> {
    project_impl(target, spec, x, None)
}

/// Projection continued from a nearby solution; on the complement this follows
/// the local branch of the foot rather than searching globally.
pub fn distance_project_near<const D: usize>(
    target: Target<'_, D>,
    spec: &NormSpec<D>,
    x: &Vector<D>,
    near: &ProjectionResult<D>,
) -> Result<ProjectionResult<D>> {
    project_impl(target, spec, x, Some(near))
}

/// Distance from `g` to the cone generated by `generators`, by exhausting the
/// supports of at most `D` generators (the nonnegative least-squares optimum
/// always has such a support).
pub fn cone_distance<const D: usize>(g: &Vector<D>, generators: &[Vector<D>]) -> f64 {
    let mut best = g.norm();
    let k = generators.len();
    for mask in 1u32..(1 << k.min(16)) {
        let support: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        if support.len() > D {
            continue;
        }
        let m = support.len();
        let gram = nalgebra::DMatrix::from_fn(m, m, |i, j| generators[support[i]].dot(&generators[support[j]]));
        let rhs = nalgebra::DVector::from_fn(m, |i, _| generators[support[i]].dot(g));
        let Some(lambda) = gram.lu().solve(&rhs) else { continue };
        if lambda.iter().any(|l| *l < 0.0 || !l.is_finite()) {
            continue;
        }
        let fit: Vector<D> = support
            .iter()
            .zip(lambda.iter())
            .map(|(&i, l)| generators[i] * *l)
            .sum();
        best = best.min((g - fit).norm());
    }
    best
}

/// Distance from `grad phi*(x - xi)` to the normal cone of the body at `xi`.
pub fn optimality_residual<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    x: &Vector<D>,
    xi: &Vector<D>,
) -> Result<f64> {
    let generators: Vec<Vector<D>> = match body {
        ConvexBody::HPolytope(p) => {
            let tol = 1e-8 * p.offsets().iter().fold(1.0f64, |m, b| m.max(b.abs()));
            if !p.rows().iter().zip(p.offsets()).all(|(r, c)| r.dot(xi) <= c + tol) {
                return Err(GeomError::InvalidArgument("foot is outside the polytope".into()));
            }
            let active: Vec<Vector<D>> = p
                .rows()
                .iter()
                .zip(p.offsets())
                .filter(|(r, c)| (r.dot(xi) - *c).abs() <= tol)
                .map(|(r, _)| *r)
                .collect();
            if active.is_empty() {
                return Err(GeomError::InvalidArgument("foot is not on the boundary".into()));
            }
            active
        }
        _ => {
            let view = body.smooth_view().unwrap();
            let level = view.gauge_value(xi)?;
            if (level - 1.0).abs() > 1e-8 {
                return Err(GeomError::InvalidArgument(format!(
                    "foot is not on the boundary (gauge value {level})"
                )));
            }
            vec![view.normal_at(xi)?]
        }
    };
    let d = x - xi;
    if d.norm() == 0.0 {
        return Ok(0.0);
    }
    let g = spec.dual_jet(&d)?.gradient;
    Ok(cone_distance(&g, &generators))
}

/// `sup { s : delta(a + s u) = s }` for the complement of `body`, by bisection
/// on `(0, diam]`.
pub fn reach_estimate<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    a: &Vector<D>,
    u: &Vector<D>,
) -> Result<f64> {
    let unit = spec.dual_value(u)?;
    if (unit - 1.0).abs() > 1e-6 {
        return Err(GeomError::NotNormalDirection {
            defect: (unit - 1.0).abs(),
        });
    }
    let target = Target::Complement(body);
    let diam = body.diameter();
    let defect = |s: f64| -> f64 {
        match distance_project(target, spec, &(a + u * s)) {
            Ok(p) => (p.distance - s).abs() / s,
            Err(_) => f64::INFINITY,
        }
    };
    let eps = 1e-4 * diam;
    let d0 = defect(eps);
    if d0 > REACH_PREDICATE_TOL {
        return Err(GeomError::NotNormalDirection { defect: d0 });
    }
    let (mut lo, mut hi) = (eps, diam);
    if defect(hi) <= REACH_PREDICATE_TOL {
        return Ok(hi);
    }
    while hi - lo > 1e-7 * lo {
        let mid = 0.5 * (lo + hi);
        if defect(mid) <= REACH_PREDICATE_TOL {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn fd_jacobian<const D: usize>(
    target: Target<'_, D>,
    spec: &NormSpec<D>,
    x: &Vector<D>,
    base: &ProjectionResult<D>,
    h: f64,
) -> Result<linalg::Matrix<D>> {
    let mut jac = linalg::Matrix::<D>::zeros();
    for j in 0..D {
        let e = linalg::axis::<D>(j) * h;
        let plus = distance_project_near(target, spec, &(x + e), base)?;
        let minus = distance_project_near(target, spec, &(x - e), base)?;
        jac.set_column(j, &((plus.cahn_hoffman - minus.cahn_hoffman) / (2.0 * h)));
    }
    Ok(jac)
}

fn tangent_eigen<const D: usize>(
    jac: &linalg::Matrix<D>,
    basis: &[Vector<D>],
) -> Result<Vec<(f64, Vector<D>)>> {
    let restricted = linalg::restrict(jac, basis);
    let (values, vectors) = linalg::real_eigen_small(&restricted)?;
    Ok(values
        .into_iter()
        .zip(vectors)
        .map(|(l, v)| (l, basis.iter().zip(&v).map(|(b, c)| b * *c).sum::<Vector<D>>()))
        .collect())
}

/// Eigenvalues of the derivative of the Cahn-Hoffman field on the tangent
/// space of the distance level set through `x`.
///
/// The Jacobian is a central difference with step `h = 1e-4 r`, extrapolated
/// against step `h/2`; the discrepancy between the two steps is reported as
/// `richardson_defect` (scaled by `r`).
pub fn chi_spectrum<const D: usize>(
    target: Target<'_, D>,
    spec: &NormSpec<D>,
    x: &Vector<D>,
) -> Result<CurvatureSpectrum> {
    let base = distance_project(target, spec, x)?;
    chi_from_base(target, spec, x, &base)
}

fn chi_from_base<const D: usize>(
    target: Target<'_, D>,
    spec: &NormSpec<D>,
    x: &Vector<D>,
    base: &ProjectionResult<D>,
) -> Result<CurvatureSpectrum> {
    if base.multiplicity == Multiplicity::Ambiguous {
        return Err(GeomError::AmbiguousProjection);
    }
    let r = base.distance;
    let h = FD_RELATIVE_STEP * r;
    let coarse = fd_jacobian(target, spec, x, base, h)?;
    let fine = fd_jacobian(target, spec, x, base, 0.5 * h)?;
    let jac = (fine * 4.0 - coarse) / 3.0;
    let basis = linalg::tangent_basis(&base.gradient);
    let pairs = tangent_eigen(&jac, &basis)?;
    let coarse_values: Vec<f64> = tangent_eigen(&coarse, &basis)?.iter().map(|p| p.0).collect();
    let fine_values: Vec<f64> = tangent_eigen(&fine, &basis)?.iter().map(|p| p.0).collect();
    let richardson_defect = coarse_values
        .iter()
        .zip(&fine_values)
        .map(|(a, b)| (a - b).abs() * r)
        .fold(0.0, f64::max);
    let eigen_residual = pairs
        .iter()
        .map(|(l, w)| (jac * w - w * *l).norm() * r)
        .fold(0.0, f64::max);
    if !(eigen_residual <= EIGEN_RESIDUAL_TOL) {
        return Err(GeomError::IllConditioned {
            residual: eigen_residual,
        });
    }
    let mut sorted: Vec<(f64, Vec<f64>)> = pairs
        .into_iter()
        .map(|(l, w)| (l, w.iter().copied().collect()))
        .collect();
    sort_eigenpairs(&mut sorted);
    let chi: Vec<f64> = sorted.iter().map(|p| p.0).collect();
    let kappa = chi
        .iter()
        .map(|&c| {
            if 1.0 - r * c <= INFINITE_CURVATURE_TOL {
                Curvature::Infinite
            } else {
                Curvature::Finite(c / (1.0 - r * c))
            }
        })
        .collect();
    Ok(CurvatureSpectrum {
        chi,
        kappa,
        eigenvectors: sorted.into_iter().map(|p| p.1).collect(),
        radius: Some(r),
        eigen_residual,
        richardson_defect,
        richardson_ok: richardson_defect <= RICHARDSON_TOL,
    })
}

/// Anisotropic principal curvatures of `K` at the bundle point `(a, u)`,
/// evaluated through the level set at distance `r`.
pub fn kappa_spectrum<const D: usize>(
    target: Target<'_, D>,
    spec: &NormSpec<D>,
    a: &Vector<D>,
    u: &Vector<D>,
    r: f64,
) -> Result<CurvatureSpectrum> {
    if !(r > 0.0) {
        return Err(GeomError::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let x = a + u * r;
    let base = distance_project(target, spec, &x)?;
    let scale = target.body().diameter().max(1.0);
    let defect = (base.foot - a).norm() / scale;
    if defect > 1e-6 || (base.distance - r).abs() > 1e-6 * scale {
        return Err(GeomError::NotNormalDirection { defect });
    }
    chi_from_base(target, spec, &x, &base)
}

/// Largest observed ratio `|xi(x) - xi(y)| / |x - y|` over pairs of points.
pub fn sampled_lipschitz<const D: usize>(
    target: Target<'_, D>,
    spec: &NormSpec<D>,
    points: &[Vector<D>],
) -> Result<f64> {
    let feet = points
        .iter()
        .map(|x| distance_project(target, spec, x).map(|p| p.foot))
        .collect::<Result<Vec<_>>>()?;
    let mut lip: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = (points[i] - points[j]).norm();
            if d > 0.0 {
                lip = lip.max((feet[i] - feet[j]).norm() / d);
            }
        }
    }
    Ok(lip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2, Vector3};

    fn diag2(a: f64, b: f64) -> NormSpec<2> {
        NormSpec::ellipsoidal(Matrix2::new(a, 0.0, 0.0, b)).unwrap()
    }

    #[test]
    fn ball_radial_projection() {
        let ball = ConvexBody::<3>::unit_ball();
        let p = distance_project(Target::Convex(&ball), &NormSpec::euclidean(), &Vector3::new(0.0, 0.0, 2.0)).unwrap();
        assert!((p.distance - 1.0).abs() < 1e-12);
        assert!((p.foot - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        assert!((p.cahn_hoffman - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        assert_eq!(
            distance_project(Target::Convex(&ball), &NormSpec::euclidean(), &Vector3::zeros()).unwrap_err(),
            GeomError::InsideBody
        );
    }

    #[test]
    fn halfspace_like_polytope_grid_oracle() {
        let spec = diag2(4.0, 1.0);
        let body = ConvexBody::cuboid(Vector2::new(-5.0, -5.0), Vector2::new(5.0, 0.0)).unwrap();
        let x = Vector2::new(0.0, 1.0);
        let p = distance_project(Target::Convex(&body), &spec, &x).unwrap();
        // Oracle: scan the top segment for the smallest dual distance.
        let oracle = (0..=20000)
            .map(|k| -5.0 + 10.0 * k as f64 / 20000.0)
            .map(|c| spec.dual_value(&(x - Vector2::new(c, 0.0))).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((p.distance - oracle).abs() < 1e-9);
        assert!((p.distance - 1.0).abs() < 1e-12);
        assert!(p.foot.norm() < 1e-12);
    }

    #[test]
    fn wulff_body_gauge_radial() {
        let spec = NormSpec::<2>::perturbed_quartic(0.2).unwrap();
        let a = Vector2::new(0.4, -0.1);
        let s = 1.3;
        let body = ConvexBody::wulff(a, s, spec.clone()).unwrap();
        for k in 0..24 {
            let t = k as f64 * 0.27;
            let dir = Vector2::new(t.cos(), t.sin());
            let x = a + dir * (2.1 / spec.dual_value(&dir).unwrap());
            let p = distance_project(Target::Convex(&body), &spec, &x).unwrap();
            let level = spec.dual_value(&(x - a)).unwrap();
            assert!((p.distance - (level - s)).abs() < 1e-10);
            assert!((p.foot - (a + (x - a) * (s / level))).norm() < 1e-10);
            assert!((spec.dual_value(&p.cahn_hoffman).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn residuals() {
        let ball = ConvexBody::<3>::unit_ball();
        let e = NormSpec::euclidean();
        let x = Vector3::new(0.0, 0.0, 2.0);
        assert!(optimality_residual(&ball, &e, &x, &Vector3::new(0.0, 0.0, 1.0)).unwrap() <= 1e-10);
        assert!(optimality_residual(&ball, &e, &x, &Vector3::new(1.0, 0.0, 0.0)).unwrap() > 0.1);
        let square = ConvexBody::cuboid(Vector2::zeros(), Vector2::new(1.0, 1.0)).unwrap();
        let spec = diag2(4.0, 1.0);
        let x = Vector2::new(1.5, 1.8);
        let p = distance_project(Target::Convex(&square), &spec, &x).unwrap();
        assert_eq!(p.foot, Vector2::new(1.0, 1.0));
        assert!(matches!(p.face, Some(Face::Vertex(_))));
        assert!(optimality_residual(&square, &spec, &x, &p.foot).unwrap() <= 1e-8);
    }

    #[test]
    fn cone_membership_oracle() {
        let gens = [Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)];
        assert!(cone_distance(&Vector2::new(0.3, 0.7), &gens) < 1e-15);
        assert!((cone_distance(&Vector2::new(-1.0, 2.0), &gens) - 1.0).abs() < 1e-15);
        assert!((cone_distance(&Vector2::new(-1.0, -1.0), &gens) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reach_examples() {
        let e2 = NormSpec::<2>::euclidean();
        let ball = ConvexBody::<2>::unit_ball();
        let r = reach_estimate(&ball, &e2, &Vector2::new(1.0, 0.0), &Vector2::new(-1.0, 0.0)).unwrap();
        assert!((r - 1.0).abs() < 1e-5);
        let bx = ConvexBody::cuboid(Vector2::zeros(), Vector2::new(2.0, 1.0)).unwrap();
        let r = reach_estimate(&bx, &e2, &Vector2::new(1.0, 0.0), &Vector2::new(0.0, 1.0)).unwrap();
        assert!((r - 0.5).abs() < 1e-5);
        let spec = diag2(4.0, 1.0);
        let w = ConvexBody::wulff(Vector2::zeros(), 0.8, spec.clone()).unwrap();
        let eta = Vector2::new(0.6, 0.8);
        let a = w.support_point(&eta).unwrap();
        let u = -spec.norm_jet(&eta).unwrap().gradient;
        let r = reach_estimate(&w, &spec, &a, &u).unwrap();
        assert!((r - 0.8).abs() < 1e-5 * 0.8);
        assert!(matches!(
            reach_estimate(&ball, &e2, &Vector2::new(1.0, 0.0), &Vector2::new(0.0, 1.0)),
            Err(GeomError::NotNormalDirection { .. })
        ));
    }

    #[test]
    fn chi_examples() {
        let e3 = NormSpec::<3>::euclidean();
        let ball = ConvexBody::<3>::unit_ball();
        let r = 0.5;
        let x = Vector3::new(1.0, 2.0, 2.0) / 3.0 * (1.0 + r);
        let spec = chi_spectrum(Target::Convex(&ball), &e3, &x).unwrap();
        for c in &spec.chi {
            assert!((c - 1.0 / (1.0 + r)).abs() < 1e-5);
        }
        let square = ConvexBody::cuboid(Vector2::zeros(), Vector2::new(1.0, 1.0)).unwrap();
        let flat = chi_spectrum(Target::Convex(&square), &NormSpec::euclidean(), &Vector2::new(0.5, 1.3)).unwrap();
        assert!(flat.chi[0].abs() < 1e-8);
        let corner = kappa_spectrum(
            Target::Convex(&square),
            &NormSpec::euclidean(),
            &Vector2::new(1.0, 1.0),
            &(Vector2::new(1.0, 1.0) / 2f64.sqrt()),
            0.3,
        )
        .unwrap();
        assert!(corner.kappa[0].is_infinite());
    }

    #[test]
    fn complement_center_of_ball_is_ambiguous() {
        let ball = ConvexBody::<2>::unit_ball();
        let p = distance_project(Target::Complement(&ball), &NormSpec::euclidean(), &Vector2::zeros()).unwrap();
        assert_eq!(p.multiplicity, Multiplicity::Ambiguous);
        assert!((p.distance - 1.0).abs() < 1e-12);
        let q = distance_project(Target::Complement(&ball), &NormSpec::euclidean(), &Vector2::new(0.3, 0.0)).unwrap();
        assert_eq!(q.multiplicity, Multiplicity::Unique);
        assert!((q.foot - Vector2::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn eigen_sorting_breaks_ties_lexicographically() {
        let mut pairs = vec![(1.0, vec![0.0, 1.0]), (1.0, vec![-1.0, 0.0]), (0.5, vec![0.0, 1.0])];
        sort_eigenpairs(&mut pairs);
        assert_eq!(pairs[0].0, 0.5);
        assert_eq!(pairs[1].1, vec![0.0, 1.0]);
        assert_eq!(pairs[2].1, vec![1.0, 0.0]);
    }
}
