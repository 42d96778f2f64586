//! Convex bodies: H-polytopes, ellipsoids and translated/scaled Wulff bodies.
//!
//! Ellipsoids and Wulff bodies share one description as `c + s W^psi` for a
//! gauge norm `psi` (for the ellipsoid `{(x-c)^T M (x-c) <= 1}` the gauge is the
//! ellipsoidal norm with matrix `M^{-1}` and `s = 1`). Everything smooth in this
//! crate works through that [`SmoothView`].

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::linalg::{self, unit_ball_volume, Matrix, Vector};
use crate::mesh::SurfaceMesh;
use crate::norm::{matrix_from_rows, NormSpec, NormSpecJson};
use crate::sphere::SphereMesh;
use crate::wulff::{self, check_resolution, check_unit};

/// Relative tolerance used for vertex enumeration and active-set detection.
pub const POLYTOPE_TOL: f64 = 1e-9;
/// Resolution of the quadrature that supplies the volume of perturbed Wulff shapes.
pub const VOLUME_RESOLUTION_2D: usize = 1 << 15;
pub const VOLUME_RESOLUTION_3D: usize = 160;

/// One facet of a polytope: unit outer normal, offset `normal . x = offset`,
/// and its vertices (cyclically ordered in 3D).
#[derive(Debug, Clone)]
pub struct Facet<const D: usize> {
    pub row: usize,
    pub normal: Vector<D>,
    pub offset: f64,
    pub vertices: Vec<usize>,
}

/// Bounded H-polytope `{x : A x <= b}` with cached vertex/facet structure.
#[derive(Debug, Clone)]
pub struct Polytope<const D: usize> {
    rows: Vec<Vector<D>>,
    b: Vec<f64>,
    vertices: Vec<Vector<D>>,
    facets: Vec<Facet<D>>,
    /// Facet indices incident to each vertex.
    vertex_facets: Vec<Vec<usize>>,
    /// Edges (3D only): vertex pair and the two incident facets.
    edges: Vec<([usize; 2], [usize; 2])>,
    interior: Vector<D>,
    scale: f64,
}

#[derive(Debug, Clone)]
pub struct Ellipsoid<const D: usize> {
    pub center: Vector<D>,
    pub m: Matrix<D>,
    gauge: NormSpec<D>,
}

#[derive(Debug, Clone)]
pub struct WulffBody<const D: usize> {
    pub center: Vector<D>,
    pub scale: f64,
    pub norm: NormSpec<D>,
}

#[derive(Debug, Clone)]
pub enum ConvexBody<const D: usize> {
    HPolytope(Polytope<D>),
    Ellipsoid(Ellipsoid<D>),
    WulffBody(WulffBody<D>),
}

/// A smooth body written as `center + scale * W^gauge`.
#[derive(Debug, Clone, Copy)]
pub struct SmoothView<'a, const D: usize> {
    pub center: Vector<D>,
    pub scale: f64,
    pub gauge: &'a NormSpec<D>,
}

impl<const D: usize> SmoothView<'_, D> {
    /// Boundary point with outer unit normal `eta`.
    pub fn point(&self, eta: &Vector<D>) -> Result<Vector<D>> {
        Ok(self.center + self.gauge.norm_jet(eta)?.gradient * self.scale)
    }

    /// `psi*(x - center) / scale`; equals 1 on the boundary.
    pub fn gauge_value(&self, x: &Vector<D>) -> Result<f64> {
        let y = x - self.center;
        if y.norm() == 0.0 {
            return Ok(0.0);
        }
        Ok(self.gauge.dual_value(&y)? / self.scale)
    }

    /// Outer unit normal at a boundary point.
    pub fn normal_at(&self, x: &Vector<D>) -> Result<Vector<D>> {
        Ok(self.gauge.dual_jet(&(x - self.center))?.gradient.normalize())
    }
}

fn cross3<const D: usize>(u: &Vector<D>, v: &Vector<D>) -> Vector<D> {
    Vector::<D>::from_fn(|i, _| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        u[j] * v[k] - u[k] * v[j]
    })
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    rec(0, m, k, &mut cur, &mut out);
    out
}

/// Affine dimension of a point set, by Gram-Schmidt on differences.
fn affine_dimension<const D: usize>(points: &[Vector<D>], tol: f64) -> usize {
    if points.is_empty() {
        return 0;
    }
    let mut basis: Vec<Vector<D>> = Vec::new();
    for p in &points[1..] {
        let mut v = p - points[0];
        for b in &basis {
            v -= b * b.dot(&v);
        }
        if v.norm() > tol {
            basis.push(v.normalize());
        }
    }
    basis.len()
}

impl<const D: usize> Polytope<D> {
    pub fn new(a: Vec<Vector<D>>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a.len() < D + 1 {
            return Err(GeomError::InvalidBody(format!(
                "polytope needs matching A and b with at least {} rows",
                D + 1
            )));
        }
        if a.iter().any(|r| r.norm() == 0.0 || !r.iter().all(|c| c.is_finite()))
            || b.iter().any(|c| !c.is_finite())
        {
            return Err(GeomError::InvalidBody("rows of A must be finite and nonzero".into()));
        }
        // Work with normalized rows.
        let norms: Vec<f64> = a.iter().map(|r| r.norm()).collect();
        let rows: Vec<Vector<D>> = a.iter().zip(&norms).map(|(r, n)| r / *n).collect();
        let b: Vec<f64> = b.iter().zip(&norms).map(|(c, n)| c / n).collect();
        let m = rows.len();
        let scale = b.iter().fold(1.0f64, |s, c| s.max(c.abs()));

        // Rank and recession cone: a bounded polytope has rank-D rows and no
        // nonzero direction y with A y <= 0. Extreme rays of that cone are
        // cut out by D-1 rows, so it suffices to test those candidates.
        let mat = nalgebra::DMatrix::from_fn(m, D, |i, j| rows[i][j]);
        if mat.rank(1e-10) < D {
            return Err(GeomError::Unbounded);
        }
        let candidates: Vec<Vector<D>> = match D {
            2 => rows
                .iter()
                .map(|r| Vector::<D>::from_fn(|i, _| if i == 0 { -r[1] } else { r[0] }))
                .collect(),
            _ => combinations(m, 2)
                .iter()
                .map(|p| cross3(&rows[p[0]], &rows[p[1]]))
                .filter(|y| y.norm() > 1e-12)
                .collect(),
        };
        for y in candidates {
            for s in [1.0, -1.0] {
                let y = y.normalize() * s;
                if rows.iter().all(|r| r.dot(&y) <= 1e-12) {
                    return Err(GeomError::Unbounded);
                }
            }
        }

        // Vertex enumeration over D-subsets of rows.
        let tol = POLYTOPE_TOL * scale;
        let mut vertices: Vec<Vector<D>> = Vec::new();
        for subset in combinations(m, D) {
            let mat = Matrix::<D>::from_fn(|i, j| rows[subset[i]][j]);
            let rhs = Vector::<D>::from_fn(|i, _| b[subset[i]]);
            let Some(x) = linalg::solve(&mat, &rhs) else { continue };
            if rows.iter().zip(&b).all(|(r, c)| r.dot(&x) <= c + tol)
                && !vertices.iter().any(|v| (v - x).norm() <= 10.0 * tol)
            {
                vertices.push(x);
            }
        }
        if affine_dimension(&vertices, tol) < D {
            return Err(GeomError::InvalidBody("polytope has empty interior".into()));
        }
        let interior = vertices.iter().sum::<Vector<D>>() / vertices.len() as f64;
        let min_slack = rows
            .iter()
            .zip(&b)
            .map(|(r, c)| c - r.dot(&interior))
            .fold(f64::INFINITY, f64::min);
        if min_slack <= tol {
            return Err(GeomError::InvalidBody("polytope has empty interior".into()));
        }

        // Facets: rows whose active vertex set spans a hyperplane; duplicates dropped.
        let mut facets: Vec<Facet<D>> = Vec::new();
        for (i, (r, c)) in rows.iter().zip(&b).enumerate() {
            let active: Vec<usize> = (0..vertices.len())
                .filter(|&k| (r.dot(&vertices[k]) - c).abs() <= 10.0 * tol)
                .collect();
            let pts: Vec<Vector<D>> = active.iter().map(|&k| vertices[k]).collect();
            if affine_dimension(&pts, tol) < D - 1 {
                continue;
            }
            if facets.iter().any(|f| (f.normal - r).norm() <= 1e-12 && (f.offset - c).abs() <= tol) {
                continue;
            }
            let mut ordered = active;
            if D == 3 {
                let centroid = pts.iter().sum::<Vector<D>>() / pts.len() as f64;
                let basis = linalg::tangent_basis(r);
                let angle = |k: usize| {
                    let d = vertices[k] - centroid;
                    d.dot(&basis[1]).atan2(d.dot(&basis[0]))
                };
                ordered.sort_by(|&p, &q| angle(p).total_cmp(&angle(q)));
                // Counter-clockwise about the outer normal.
                if cross3(&basis[0], &basis[1]).dot(r) < 0.0 {
                    ordered.reverse();
                }
            } else {
                let t = Vector::<D>::from_fn(|k, _| if k == 0 { -r[1] } else { r[0] });
                ordered.sort_by(|&p, &q| t.dot(&vertices[p]).total_cmp(&t.dot(&vertices[q])));
            }
            facets.push(Facet {
                row: i,
                normal: *r,
                offset: *c,
                vertices: ordered,
            });
        }
        let mut vertex_facets = vec![Vec::new(); vertices.len()];
        for (fi, f) in facets.iter().enumerate() {
            for &v in &f.vertices {
                vertex_facets[v].push(fi);
            }
        }
        let mut edges = Vec::new();
        if D == 3 {
            for (f1, f2) in combinations(facets.len(), 2).iter().map(|p| (p[0], p[1])) {
                let shared: Vec<usize> = facets[f1]
                    .vertices
                    .iter()
                    .copied()
                    .filter(|v| facets[f2].vertices.contains(v))
                    .collect();
                if shared.len() == 2 {
                    edges.push(([shared[0], shared[1]], [f1, f2]));
                }
            }
        }
        Ok(Self {
            rows,
            b,
            vertices,
            facets,
            vertex_facets,
            edges,
            interior,
            scale,
        })
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn cuboid(lo: Vector<D>, hi: Vector<D>) -> Result<Self> {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..D {
            a.push(linalg::axis::<D>(i));
            b.push(hi[i]);
            a.push(-linalg::axis::<D>(i));
            b.push(-lo[i]);
        }
        Self::new(a, b)
    }

    pub fn rows(&self) -> &[Vector<D>] {
        &self.rows
    }
    pub fn offsets(&self) -> &[f64] {
        &self.b
    }
    pub fn vertices(&self) -> &[Vector<D>] {
        &self.vertices
    }
    pub fn facets(&self) -> &[Facet<D>] {
        &self.facets
    }
    pub fn vertex_facets(&self) -> &[Vec<usize>] {
        &self.vertex_facets
    }
    pub fn edges(&self) -> &[([usize; 2], [usize; 2])] {
        &self.edges
    }
    pub fn interior_point(&self) -> Vector<D> {
        self.interior
    }
    /// Absolute tolerance matching the polytope's size.
    pub fn tolerance(&self) -> f64 {
        POLYTOPE_TOL * self.scale
    }

    pub fn contains(&self, x: &Vector<D>) -> bool {
        self.rows.iter().zip(&self.b).all(|(r, c)| r.dot(x) <= *c)
    }

    /// Whether `x` satisfies every constraint up to the polytope tolerance.
    pub fn contains_approx(&self, x: &Vector<D>) -> bool {
        let tol = 10.0 * self.tolerance();
        self.rows.iter().zip(&self.b).all(|(r, c)| r.dot(x) <= c + tol)
    }

    /// `(D-1)`-measure of a facet.
    pub fn facet_area(&self, facet: usize) -> f64 {
        let f = &self.facets[facet];
        let v = |k: usize| self.vertices[f.vertices[k]];
        if D == 2 {
            return (v(1) - v(0)).norm();
        }
        let mut area = 0.0;
        for k in 1..f.vertices.len() - 1 {
            area += 0.5 * cross3(&(v(k) - v(0)), &(v(k + 1) - v(0))).norm();
        }
        area
    }

    pub fn volume(&self) -> f64 {
        (0..self.facets.len())
            .map(|i| {
                let f = &self.facets[i];
                self.facet_area(i) * (f.offset - f.normal.dot(&self.interior)) / D as f64
            })
            .sum()
    }

    fn support_point(&self, eta: &Vector<D>) -> Vector<D> {
        *self
            .vertices
            .iter()
            .max_by(|p, q| p.dot(eta).total_cmp(&q.dot(eta)))
            .expect("polytope has vertices")
    }

    /// Per-facet triangulation; elements carry their facet index as tag.
    fn boundary_mesh(&self, resolution: usize) -> SurfaceMesh<D> {
        let mut vertices = Vec::new();
        let mut normals = Vec::new();
        let mut elements: Vec<[usize; D]> = Vec::new();
        let mut tags = Vec::new();
        for (fi, f) in self.facets.iter().enumerate() {
            if D == 2 {
                let (p, q) = (self.vertices[f.vertices[0]], self.vertices[f.vertices[1]]);
                let base = vertices.len();
                for k in 0..=resolution {
                    vertices.push(p + (q - p) * (k as f64 / resolution as f64));
                    normals.push(f.normal);
                }
                for k in 0..resolution {
                    elements.push(std::array::from_fn(|i| base + k + i));
                    tags.push(fi);
                }
            } else {
                let freq = (resolution / 8).max(1);
                let p0 = self.vertices[f.vertices[0]];
                for k in 1..f.vertices.len() - 1 {
                    let (p1, p2) = (self.vertices[f.vertices[k]], self.vertices[f.vertices[k + 1]]);
                    let base = vertices.len();
                    let mut id = vec![vec![0usize; freq + 1]; freq + 1];
                    for i in 0..=freq {
                        for j in 0..=(freq - i) {
                            let (s, t) = (i as f64 / freq as f64, j as f64 / freq as f64);
                            id[i][j] = vertices.len();
                            vertices.push(p0 + (p1 - p0) * s + (p2 - p0) * t);
                            normals.push(f.normal);
                        }
                    }
                    let _ = base;
                    for i in 0..freq {
                        for j in 0..(freq - i) {
                            let t1 = [id[i][j], id[i + 1][j], id[i][j + 1]];
                            elements.push(std::array::from_fn(|q| t1[q]));
                            tags.push(fi);
                            if i + j + 1 < freq {
                                let t2 = [id[i + 1][j], id[i + 1][j + 1], id[i][j + 1]];
                                elements.push(std::array::from_fn(|q| t2[q]));
                                tags.push(fi);
                            }
                        }
                    }
                }
            }
        }
        SurfaceMesh::new(vertices, normals, elements, Some(tags))
    }
}

impl<const D: usize> Ellipsoid<D> {
    /// `{x : (x - c)^T M (x - c) <= 1}` for symmetric positive-definite `M`.
    pub fn new(center: Vector<D>, m: Matrix<D>) -> Result<Self> {
        let m_inv = linalg::inverse(&m)
            .ok_or_else(|| GeomError::InvalidBody("ellipsoid matrix is singular".into()))?;
        let gauge = NormSpec::ellipsoidal((m_inv + m_inv.transpose()) * 0.5)
            .map_err(|e| GeomError::InvalidBody(format!("ellipsoid matrix: {e}")))?;
        Ok(Self { center, m, gauge })
    }

    /// Axis-aligned ellipsoid with the given semi-axes.
    pub fn with_semi_axes(center: Vector<D>, semi_axes: Vector<D>) -> Result<Self> {
        Self::new(center, Matrix::<D>::from_diagonal(&semi_axes.map(|a| 1.0 / (a * a))))
    }
}

impl<const D: usize> WulffBody<D> {
    pub fn new(center: Vector<D>, scale: f64, norm: NormSpec<D>) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(GeomError::InvalidBody(format!("Wulff scale must be positive, got {scale}")));
        }
        Ok(Self { center, scale, norm })
    }
}

impl<const D: usize> ConvexBody<D> {
    pub fn polytope(a: Vec<Vector<D>>, b: Vec<f64>) -> Result<Self> {
        Ok(Self::HPolytope(Polytope::new(a, b)?))
    }

    pub fn cuboid(lo: Vector<D>, hi: Vector<D>) -> Result<Self> {
        Ok(Self::HPolytope(Polytope::cuboid(lo, hi)?))
    }

    pub fn ellipsoid(center: Vector<D>, m: Matrix<D>) -> Result<Self> {
        Ok(Self::Ellipsoid(Ellipsoid::new(center, m)?))
    }

    pub fn ellipsoid_axes(center: Vector<D>, semi_axes: Vector<D>) -> Result<Self> {
        Ok(Self::Ellipsoid(Ellipsoid::with_semi_axes(center, semi_axes)?))
    }

    pub fn unit_ball() -> Self {
        Self::ellipsoid(Vector::<D>::zeros(), Matrix::<D>::identity()).expect("unit ball")
    }

    pub fn wulff(center: Vector<D>, scale: f64, norm: NormSpec<D>) -> Result<Self> {
        Ok(Self::WulffBody(WulffBody::new(center, scale, norm)?))
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::HPolytope(_) => "hpolytope",
            Self::Ellipsoid(_) => "ellipsoid",
            Self::WulffBody(_) => "wulff",
        }
    }

    pub fn label(&self) -> String {
        let fmt = |v: &Vector<D>| {
            v.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(",")
        };
        match self {
            Self::HPolytope(p) => format!("hpolytope({} facets)", p.facets.len()),
            Self::Ellipsoid(e) => {
                let axes = linalg::symmetric_eigenvalues(&e.m)
                    .iter()
                    .rev()
                    .map(|l| format!("{}", 1.0 / l.sqrt()))
                    .collect::<Vec<_>>()
                    .join(",");
                format!("ellipsoid(axes {axes}; center {})", fmt(&e.center))
            }
            Self::WulffBody(w) => format!("wulff(s {}; center {})", w.scale, fmt(&w.center)),
        }
    }

    pub fn smooth_view(&self) -> Option<SmoothView<'_, D>> {
        match self {
            Self::HPolytope(_) => None,
            Self::Ellipsoid(e) => Some(SmoothView {
                center: e.center,
                scale: 1.0,
                gauge: &e.gauge,
            }),
            Self::WulffBody(w) => Some(SmoothView {
                center: w.center,
                scale: w.scale,
                gauge: &w.norm,
            }),
        }
    }

    pub fn smooth(&self) -> Result<SmoothView<'_, D>> {
        self.smooth_view().ok_or(GeomError::NotSmoothVariant)
    }

    pub fn as_polytope(&self) -> Option<&Polytope<D>> {
        match self {
            Self::HPolytope(p) => Some(p),
            _ => None,
        }
    }

    /// Membership with the exact defining inequality.
    pub fn contains(&self, x: &Vector<D>) -> bool {
        match self {
            Self::HPolytope(p) => p.contains(x),
            Self::Ellipsoid(e) => {
                let y = x - e.center;
                y.dot(&(e.m * y)) <= 1.0
            }
            Self::WulffBody(w) => {
                let y = x - w.center;
                y.norm() == 0.0 || w.norm.dual_value(&y).map(|v| v <= w.scale).unwrap_or(false)
            }
        }
    }

    /// A maximizer of `x . eta` over the body.
    pub fn support_point(&self, eta: &Vector<D>) -> Result<Vector<D>> {
        check_unit(eta)?;
        match self {
            Self::HPolytope(p) => Ok(p.support_point(eta)),
            _ => self.smooth_view().unwrap().point(eta),
        }
    }

    /// Support function `max x . eta`.
    pub fn support_value(&self, eta: &Vector<D>) -> Result<f64> {
        Ok(self.support_point(eta)?.dot(eta))
    }

    /// Tight axis-aligned bounding box.
    pub fn bounding_box(&self) -> Result<(Vector<D>, Vector<D>)> {
        let mut lo = Vector::<D>::zeros();
        let mut hi = Vector::<D>::zeros();
        for i in 0..D {
            let e = linalg::axis::<D>(i);
            hi[i] = self.support_point(&e)?[i];
            lo[i] = self.support_point(&(-e))?[i];
        }
        Ok((lo, hi))
    }

    /// Diagonal of the bounding box, an upper bound on the diameter.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box().expect("bounded body");
        (hi - lo).norm()
    }

    /// A point well inside the body.
    pub fn interior_point(&self) -> Vector<D> {
        match self {
            Self::HPolytope(p) => p.interior,
            Self::Ellipsoid(e) => e.center,
            Self::WulffBody(w) => w.center,
        }
    }

    /// Boundary mesh with exterior unit normals. `resolution` follows the
    /// sphere-mesh convention for smooth bodies and is the number of segments
    /// per edge (2D) or eight times the per-triangle frequency (3D) for polytopes.
    pub fn boundary_mesh(&self, resolution: usize) -> Result<SurfaceMesh<D>> {
        check_resolution(resolution)?;
        match self {
            Self::HPolytope(p) => Ok(p.boundary_mesh(resolution)),
            _ => {
                let v = self.smooth_view().unwrap();
                wulff::gauge_mesh(v.gauge, &v.center, v.scale, resolution)
            }
        }
    }

    /// Lebesgue volume: exact for polytopes, ellipsoids and the closed-form
    /// Wulff families; high-resolution quadrature for perturbed Wulff bodies.
    pub fn reference_volume(&self) -> Result<f64> {
        match self {
            Self::HPolytope(p) => Ok(p.volume()),
            Self::Ellipsoid(e) => Ok(unit_ball_volume(D) / linalg::determinant(&e.m).sqrt()),
            Self::WulffBody(w) => {
                let res = if D == 2 { VOLUME_RESOLUTION_2D } else { VOLUME_RESOLUTION_3D };
                Ok(w.scale.powi(D as i32) * wulff::wulff_volume(&w.norm, res)?)
            }
        }
    }

    pub fn to_json(&self) -> BodyJson {
        let vec = |v: &Vector<D>| v.iter().copied().collect::<Vec<f64>>();
        let mat = |m: &Matrix<D>| (0..D).map(|i| (0..D).map(|j| m[(i, j)]).collect()).collect();
        let mut json = BodyJson {
            variant: BodyVariant::Hpolytope,
            name: None,
            a: None,
            b: None,
            center: None,
            m: None,
            scale: None,
            norm: None,
        };
        match self {
            Self::HPolytope(p) => {
                json.a = Some(p.rows.iter().map(vec).collect());
                json.b = Some(p.b.clone());
            }
            Self::Ellipsoid(e) => {
                json.variant = BodyVariant::Ellipsoid;
                json.center = Some(vec(&e.center));
                json.m = Some(mat(&e.m));
            }
            Self::WulffBody(w) => {
                json.variant = BodyVariant::Wulff;
                json.center = Some(vec(&w.center));
                json.scale = Some(w.scale);
                json.norm = Some(w.norm.to_json());
            }
        }
        json
    }

    /// Builds a body from JSON. A Wulff body without its own `"norm"` uses
    /// `default_norm` (the run's norm).
    pub fn from_json(json: &BodyJson, default_norm: Option<&NormSpec<D>>) -> Result<Self> {
        let vec = |v: &Option<Vec<f64>>, what: &str| -> Result<Vector<D>> {
            let v = v
                .as_ref()
                .ok_or_else(|| GeomError::InvalidBody(format!("missing \"{what}\"")))?;
            if v.len() != D {
                return Err(GeomError::InvalidBody(format!(
                    "\"{what}\" has length {}, expected {D}",
                    v.len()
                )));
            }
            Ok(Vector::<D>::from_fn(|i, _| v[i]))
        };
        match json.variant {
            BodyVariant::Hpolytope => {
                let rows = json
                    .a
                    .as_ref()
                    .ok_or_else(|| GeomError::InvalidBody("missing \"A\"".into()))?;
                let a = rows
                    .iter()
                    .map(|r| {
                        if r.len() != D {
                            Err(GeomError::InvalidBody(format!("row of A has length {}, expected {D}", r.len())))
                        } else {
                            Ok(Vector::<D>::from_fn(|i, _| r[i]))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let b = json
                    .b
                    .clone()
                    .ok_or_else(|| GeomError::InvalidBody("missing \"b\"".into()))?;
                Self::polytope(a, b)
            }
            BodyVariant::Ellipsoid => {
                let center = match &json.center {
                    None => Vector::<D>::zeros(),
                    some => vec(some, "center")?,
                };
                let m = json
                    .m
                    .as_ref()
                    .ok_or_else(|| GeomError::InvalidBody("missing \"M\"".into()))?;
                let m = matrix_from_rows::<D>(m).map_err(|e| GeomError::InvalidBody(e.to_string()))?;
                Self::ellipsoid(center, m)
            }
            BodyVariant::Wulff => {
                let center = match &json.center {
                    None => Vector::<D>::zeros(),
                    some => vec(some, "center")?,
                };
                let scale = json.scale.unwrap_or(1.0);
                let norm = match (&json.norm, default_norm) {
                    (Some(n), _) => NormSpec::from_json(n)?,
                    (None, Some(n)) => n.clone(),
                    (None, None) => {
                        return Err(GeomError::InvalidBody("Wulff body needs a norm".into()))
                    }
                };
                Self::wulff(center, scale, norm)
            }
        }
    }

    /// Outer unit normal at a boundary point of a smooth body.
    pub fn smooth_normal(&self, x: &Vector<D>) -> Result<Vector<D>> {
        self.smooth()?.normal_at(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyVariant {
    Hpolytope,
    Ellipsoid,
    Wulff,
}

/// JSON form of a body: `{"variant", "name"?, "A", "b", "center", "M", "scale", "norm"?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyJson {
    pub variant: BodyVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormSpecJson>,
}

impl BodyJson {
    pub fn dimension_hint(&self) -> Option<usize> {
        self.center
            .as_ref()
            .map(|c| c.len())
            .or_else(|| self.a.as_ref().and_then(|a| a.first().map(|r| r.len())))
            .or_else(|| self.m.as_ref().map(|m| m.len()))
            .or_else(|| self.norm.as_ref().and_then(|n| n.dimension_hint()))
    }
}

/// Sphere mesh helper re-exported for callers building custom quadratures.
pub fn unit_sphere_mesh<const D: usize>(resolution: usize) -> SphereMesh<D> {
    SphereMesh::new(resolution)
}
