//! Anisotropic curvatures of smooth boundaries and curvature measures
//! `C_m(K, B) = 1/(n-m+1) * int_B phi(eta) e_{n-m}(kappa) dH^n`.
//!
//! Mean curvatures use the unnormalized elementary symmetric polynomials.

use serde::Serialize;

use crate::body::{ConvexBody, SmoothView};
use crate::error::{GeomError, Result};
use crate::linalg::{self, Vector};
use crate::mesh::SurfaceMesh;
use crate::norm::NormSpec;
use crate::projection::{sort_eigenpairs, Curvature, CurvatureSpectrum};
use crate::region::Region;

/// Subintervals of the Simpson rule in the polygon vertex sectors.
pub const SECTOR_INTERVALS: usize = 4096;
/// Accepted `|psi*(x - c)/s - 1|` for boundary points.
pub const ON_BOUNDARY_TOL: f64 = 1e-8;

/// Elementary symmetric polynomial `e_j`; `e_0 = 1`, `e_j = 0` for `j > len`.
pub fn elem_sym(kappa: &[f64], j: usize) -> f64 {
    let mut e = vec![0.0; j + 1];
    e[0] = 1.0;
    for &k in kappa {
        for i in (1..=j).rev() {
            e[i] += k * e[i - 1];
        }
    }
    e[j]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    SteinerMc,
    SectorExact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub order: usize,
    pub region: Region,
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
}

/// Curvatures at the boundary point with outer normal `eta`: eigenvalues of
/// `D^2 phi(eta)` composed with the inverse of `s D^2 psi(eta)` on `eta^perp`
/// (the Euclidean Weingarten map of `c + s W^psi` is `(s D^2 psi(eta))^{-1}`).
pub fn curvatures_at_normal<const D: usize>(
    view: &SmoothView<'_, D>,
    spec: &NormSpec<D>,
    eta: &Vector<D>,
) -> Result<CurvatureSpectrum> {
    let basis = linalg::tangent_basis(eta);
    let h_phi = linalg::restrict(&spec.norm_jet(eta)?.hessian, &basis);
    let h_psi = linalg::restrict(&view.gauge.norm_jet(eta)?.hessian, &basis) * view.scale;
    let inv = h_psi
        .try_inverse()
        .ok_or(GeomError::IllConditioned { residual: f64::INFINITY })?;
    let op = h_phi * inv;
    let (values, vectors) = linalg::real_eigen_small(&op)?;
    let mut pairs: Vec<(f64, Vec<f64>)> = values
        .into_iter()
        .zip(vectors)
        .map(|(l, v)| {
            let w: Vector<D> = basis.iter().zip(&v).map(|(b, c)| b * *c).sum();
            (l, w.iter().copied().collect())
        })
        .collect();
    sort_eigenpairs(&mut pairs);
    Ok(CurvatureSpectrum {
        chi: Vec::new(),
        kappa: pairs.iter().map(|p| Curvature::Finite(p.0)).collect(),
        eigenvectors: pairs.into_iter().map(|p| p.1).collect(),
        radius: None,
        eigen_residual: 0.0,
        richardson_defect: 0.0,
        richardson_ok: true,
    })
}

/// Anisotropic shape operator of a smooth body at a boundary point `x`.
pub fn shape_operator_smooth<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    x: &Vector<D>,
) -> Result<CurvatureSpectrum> {
    let view = body.smooth()?;
    let level = view.gauge_value(x)?;
    if (level - 1.0).abs() > ON_BOUNDARY_TOL {
        return Err(GeomError::InvalidArgument(format!(
            "point is not on the boundary (gauge value {level})"
        )));
    }
    curvatures_at_normal(&view, spec, &view.normal_at(x)?)
}

/// Boundary mesh of a smooth body with the curvature data at every vertex.
#[derive(Debug, Clone)]
pub struct BoundaryField<const D: usize> {
    pub mesh: SurfaceMesh<D>,
    pub kappa: Vec<Vec<f64>>,
    /// `phi(eta)` per vertex.
    pub phi: Vec<f64>,
    pub resolution: usize,
}

impl<const D: usize> BoundaryField<D> {
    pub fn new(body: &ConvexBody<D>, spec: &NormSpec<D>, resolution: usize) -> Result<Self> {
        let view = body.smooth()?;
        let mesh = body.boundary_mesh(resolution)?;
        let mut kappa = Vec::with_capacity(mesh.vertices.len());
        let mut phi = Vec::with_capacity(mesh.vertices.len());
        for eta in &mesh.normals {
            let spectrum = curvatures_at_normal(&view, spec, eta)?;
            kappa.push(spectrum.kappa.iter().map(|k| k.reported()).collect());
            phi.push(spec.value(eta)?);
        }
        Ok(Self {
            mesh,
            kappa,
            phi,
            resolution,
        })
    }

    pub fn weights(&self, region: &Region) -> Vec<f64> {
        self.mesh
            .vertex_weights_where(|k| region.contains_element(&self.mesh, k))
    }

    pub fn integrate(&self, region: &Region, f: impl Fn(usize) -> f64) -> f64 {
        self.weights(region).iter().enumerate().map(|(i, w)| w * f(i)).sum()
    }

    /// `C_m(body, region)` by quadrature.
    pub fn measure(&self, m: usize, region: &Region) -> f64 {
        let n = D - 1;
        self.integrate(region, |i| self.phi[i] * elem_sym(&self.kappa[i], n - m)) / (n - m + 1) as f64
    }

    /// Enclosed volume by the divergence theorem.
    pub fn volume(&self) -> f64 {
        self.integrate(&Region::Whole, |i| self.mesh.vertices[i].dot(&self.mesh.normals[i])) / D as f64
    }
}

/// Resolution of the refinement partner used for error estimates.
pub fn refined(resolution: usize) -> usize {
    2 * resolution
}

/// `C_n(body) = int phi(eta) dH^n`: exact per facet for polytopes, mesh
/// quadrature for smooth bodies.
pub fn anisotropic_perimeter<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    resolution: usize,
) -> Result<f64> {
    anisotropic_perimeter_region(body, spec, &Region::Whole, resolution)
}

pub fn anisotropic_perimeter_region<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    region: &Region,
    resolution: usize,
) -> Result<f64> {
    region.validate::<D>()?;
    match body {
        ConvexBody::HPolytope(p) => {
            if matches!(region, Region::Whole) {
                return p
                    .facets()
                    .iter()
                    .enumerate()
                    .map(|(i, f)| Ok(p.facet_area(i) * spec.value(&f.normal)?))
                    .sum();
            }
            let mesh = body.boundary_mesh(resolution)?;
            let w = mesh.vertex_weights_where(|k| region.contains_element(&mesh, k));
            w.iter()
                .zip(&mesh.normals)
                .map(|(w, n)| Ok(w * spec.value(n)?))
                .sum()
        }
        _ => {
            let mesh = body.boundary_mesh(resolution)?;
            let w = mesh.vertex_weights_where(|k| region.contains_element(&mesh, k));
            w.iter()
                .zip(&mesh.normals)
                .map(|(w, n)| Ok(w * spec.value(n)?))
                .sum()
        }
    }
}

/// `C_m(body, region)` by boundary quadrature at `resolution`, with the
/// difference to the refined mesh as error estimate.
pub fn curvature_measure_direct<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    m: usize,
    region: &Region,
    resolution: usize,
) -> Result<MeasureEstimate> {
    let coarse = BoundaryField::new(body, spec, resolution)?;
    let fine = BoundaryField::new(body, spec, refined(resolution))?;
    measure_from_fields(&coarse, &fine, m, region)
}

/// Measure estimate from a field pair (`fine` supplies only the error).
pub fn measure_from_fields<const D: usize>(
    coarse: &BoundaryField<D>,
    fine: &BoundaryField<D>,
    m: usize,
    region: &Region,
) -> Result<MeasureEstimate> {
    if m > D - 1 {
        return Err(GeomError::InvalidArgument(format!("order {m} exceeds n = {}", D - 1)));
    }
    region.validate::<D>()?;
    let value = coarse.measure(m, region);
    Ok(MeasureEstimate {
        order: m,
        region: region.clone(),
        value,
        stderr: (value - fine.measure(m, region)).abs(),
        method: Method::Direct,
    })
}

/// Exact per-face curvature measures of a polygon.
///
/// An edge contributes `length * phi(normal)` to `C_1`. A vertex contributes
/// to `C_0` the area of the part of `{phi* <= 1}` whose normals lie in the
/// vertex normal cone, i.e. the sector between `grad phi(n_a)` and
/// `grad phi(n_b)`, computed as `1/2 int phi*(w(theta))^{-2} dtheta` by
/// Simpson's rule. `Region::Whole` sums all faces.
pub fn polygon_sector_exact<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    face: &Region,
) -> Result<Vec<MeasureEstimate>> {
    let poly = match body {
        ConvexBody::HPolytope(p) if D == 2 => p,
        _ => return Err(GeomError::NotPolygon),
    };
    let estimates = |c0: (f64, f64), c1: f64| {
        vec![
            MeasureEstimate {
                order: 0,
                region: face.clone(),
                value: c0.0,
                stderr: c0.1,
                method: Method::SectorExact,
            },
            MeasureEstimate {
                order: 1,
                region: face.clone(),
                value: c1,
                stderr: 0.0,
                method: Method::SectorExact,
            },
        ]
    };
    match face {
        Region::Facet { index } => {
            let f = poly
                .facets()
                .get(*index)
                .ok_or_else(|| GeomError::InvalidArgument(format!("no facet {index}")))?;
            Ok(estimates((0.0, 0.0), poly.facet_area(*index) * spec.value(&f.normal)?))
        }
        Region::Vertex { index } => {
            let incident = poly
                .vertex_facets()
                .get(*index)
                .ok_or_else(|| GeomError::InvalidArgument(format!("no vertex {index}")))?;
            if incident.len() != 2 {
                return Err(GeomError::InvalidBody(format!(
                    "vertex {index} has {} incident edges",
                    incident.len()
                )));
            }
            let na = poly.facets()[incident[0]].normal;
            let nb = poly.facets()[incident[1]].normal;
            Ok(estimates(vertex_sector(spec, &na, &nb)?, 0.0))
        }
        Region::Whole => {
            let mut c0 = (0.0, 0.0);
            for v in 0..poly.vertices().len() {
                let e = polygon_sector_exact(body, spec, &Region::Vertex { index: v })?;
                c0.0 += e[0].value;
                c0.1 += e[0].stderr;
            }
            let c1 = anisotropic_perimeter(body, spec, 8)?;
            Ok(estimates(c0, c1))
        }
        _ => Err(GeomError::InvalidArgument(
            "polygon sectors take a facet, vertex or whole-boundary selector".into(),
        )),
    }
}

fn vertex_sector<const D: usize>(spec: &NormSpec<D>, na: &Vector<D>, nb: &Vector<D>) -> Result<(f64, f64)> {
    let mut wa = spec.norm_jet(na)?.gradient;
    let mut wb = spec.norm_jet(nb)?.gradient;
    if wa[0] * wb[1] - wa[1] * wb[0] < 0.0 {
        std::mem::swap(&mut wa, &mut wb);
    }
    let start = wa[1].atan2(wa[0]);
    let sweep = (wa[0] * wb[1] - wa[1] * wb[0]).atan2(wa.dot(&wb));
    let integrand = |t: f64| -> Result<f64> {
        let w = Vector::<D>::from_fn(|i, _| if i == 0 { t.cos() } else { t.sin() });
        Ok(0.5 / spec.dual_value(&w)?.powi(2))
    };
    let simpson = |n: usize| -> Result<f64> {
        let h = sweep / n as f64;
        let mut s = integrand(start)? + integrand(start + sweep)?;
        for k in 1..n {
            s += integrand(start + h * k as f64)? * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        Ok(s * h / 3.0)
    };
    let coarse = simpson(SECTOR_INTERVALS)?;
    let fine = simpson(2 * SECTOR_INTERVALS)?;
    Ok((fine, (fine - coarse).abs()))
}

/// `(1 + s^{-2})^{-n/2}`: the Jacobian of the projection from the normal
/// bundle of `s W` to its boundary, whose bundle tangents are `(tau, tau/s)`.
pub fn wulff_frame_jacobian(scale: f64, n: usize) -> f64 {
    (1.0 + scale.powi(-2)).powf(-(n as f64) / 2.0)
}

/// Compares `J * area(bundle mesh)` with `area(boundary mesh)` for a Wulff
/// body, the bundle mesh being the boundary mesh lifted to `(a, (a - c)/s)`.
pub fn wulff_bundle_area_check<const D: usize>(body: &ConvexBody<D>, resolution: usize) -> Result<(f64, f64)> {
    let ConvexBody::WulffBody(w) = body else {
        return Err(GeomError::InvalidArgument("bundle check needs a Wulff body".into()));
    };
    let mesh = body.boundary_mesh(resolution)?;
    let lift = |i: usize| -> nalgebra::DVector<f64> {
        let a = mesh.vertices[i];
        let u = (a - w.center) / w.scale;
        nalgebra::DVector::from_iterator(2 * D, a.iter().chain(u.iter()).copied())
    };
    let mut bundle = 0.0;
    for e in &mesh.elements {
        let p0 = lift(e[0]);
        let edges: Vec<nalgebra::DVector<f64>> = e[1..].iter().map(|&i| lift(i) - &p0).collect();
        let gram = nalgebra::DMatrix::from_fn(D - 1, D - 1, |i, j| edges[i].dot(&edges[j]));
        let factorial = (1..D).product::<usize>() as f64;
        bundle += gram.determinant().max(0.0).sqrt() / factorial;
    }
    Ok((bundle * wulff_frame_jacobian(w.scale, D - 1), mesh.total_area()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2, Vector3};
    use std::f64::consts::PI;

    fn diag2(a: f64, b: f64) -> NormSpec<2> {
        NormSpec::ellipsoidal(Matrix2::new(a, 0.0, 0.0, b)).unwrap()
    }

    fn brute_elem_sym(k: &[f64], j: usize) -> f64 {
        (0u32..(1 << k.len()))
            .filter(|m| m.count_ones() as usize == j)
            .map(|m| (0..k.len()).filter(|i| m & (1 << i) != 0).map(|i| k[i]).product::<f64>())
            .sum()
    }

    #[test]
    fn elementary_symmetric_examples() {
        assert_eq!(elem_sym(&[1.0, 1.0], 2), 1.0);
        assert_eq!(elem_sym(&[2.0, 3.0, 4.0], 2), 26.0);
        assert_eq!(elem_sym(&[2.0, 3.0, 4.0], 2), brute_elem_sym(&[2.0, 3.0, 4.0], 2));
        assert_eq!(elem_sym(&[5.0, -1.0], 0), 1.0);
    }

    #[test]
    fn shape_operator_examples() {
        let ball = ConvexBody::<3>::unit_ball();
        let x = Vector3::new(0.0, 0.6, 0.8);
        let k = shape_operator_smooth(&ball, &NormSpec::euclidean(), &x).unwrap();
        for v in k.finite_kappa().unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let ellipse = ConvexBody::ellipsoid_axes(Vector2::zeros(), Vector2::new(2.0, 1.0)).unwrap();
        let k = shape_operator_smooth(&ellipse, &NormSpec::euclidean(), &Vector2::new(2.0, 0.0)).unwrap();
        assert!((k.kappa[0].reported() - 2.0).abs() < 1e-12);
        let spec = NormSpec::<2>::perturbed_quartic(0.15).unwrap();
        let w = ConvexBody::wulff(Vector2::new(1.0, 2.0), 1.7, spec.clone()).unwrap();
        let x = w.support_point(&Vector2::new(0.6, -0.8)).unwrap();
        let k = shape_operator_smooth(&w, &spec, &x).unwrap();
        assert!((k.kappa[0].reported() - 1.0 / 1.7).abs() < 1e-10);
        assert_eq!(
            shape_operator_smooth(&ConvexBody::cuboid(Vector2::zeros(), Vector2::new(1.0, 1.0)).unwrap(), &spec, &x)
                .unwrap_err(),
            GeomError::NotSmoothVariant
        );
    }

    #[test]
    fn perimeter_examples() {
        let ball = ConvexBody::<3>::unit_ball();
        let p = anisotropic_perimeter(&ball, &NormSpec::euclidean(), 64).unwrap();
        assert!((p - 4.0 * PI).abs() / (4.0 * PI) < 5e-3);
        let square = ConvexBody::cuboid(Vector2::zeros(), Vector2::new(1.0, 1.0)).unwrap();
        assert!((anisotropic_perimeter(&square, &diag2(4.0, 1.0), 8).unwrap() - 6.0).abs() < 1e-14);
        let spec = diag2(4.0, 1.0);
        let w = ConvexBody::wulff(Vector2::zeros(), 1.5, spec.clone()).unwrap();
        let expected = 2.0 * 1.5 * 2.0 * PI;
        assert!((anisotropic_perimeter(&w, &spec, 2048).unwrap() - expected).abs() / expected < 1e-5);
    }

    #[test]
    fn direct_measures_of_the_ball() {
        let ball = ConvexBody::<3>::unit_ball();
        let e = NormSpec::euclidean();
        let expected = [4.0 * PI / 3.0, 4.0 * PI, 4.0 * PI];
        for (m, want) in expected.iter().enumerate() {
            let est = curvature_measure_direct(&ball, &e, m, &Region::Whole, 24).unwrap();
            assert!((est.value - want).abs() / want < 5e-3, "m={m}: {}", est.value);
        }
        let top = curvature_measure_direct(&ball, &e, 2, &Region::Whole, 24).unwrap();
        let per = anisotropic_perimeter(&ball, &e, 24).unwrap();
        assert!((top.value - per).abs() < 1e-8);
    }

    #[test]
    fn sector_oracles() {
        let square = ConvexBody::cuboid(Vector2::zeros(), Vector2::new(1.0, 1.0)).unwrap();
        let e = NormSpec::euclidean();
        let total: f64 = (0..4)
            .map(|v| polygon_sector_exact(&square, &e, &Region::Vertex { index: v }).unwrap()[0].value)
            .sum();
        assert!((total - PI).abs() < 1e-12);
        for f in 0..4 {
            let est = polygon_sector_exact(&square, &e, &Region::Facet { index: f }).unwrap();
            assert!((est[1].value - 1.0).abs() < 1e-14);
        }
        let spec = diag2(4.0, 1.0);
        let whole = polygon_sector_exact(&square, &spec, &Region::Whole).unwrap();
        assert!((whole[1].value - 6.0).abs() < 1e-14);
        // The four vertex sectors tile the whole Wulff shape of area 2 pi.
        assert!((whole[0].value - 2.0 * PI).abs() < 1e-9);
        assert_eq!(
            polygon_sector_exact(&ConvexBody::<2>::unit_ball(), &e, &Region::Whole).unwrap_err(),
            GeomError::NotPolygon
        );
    }

    #[test]
    fn bundle_jacobian_debug_check() {
        let spec = NormSpec::<3>::perturbed_quartic(0.1).unwrap();
        let body = ConvexBody::wulff(Vector3::new(0.1, 0.2, 0.3), 0.7, spec).unwrap();
        let (lifted, area) = wulff_bundle_area_check(&body, 8).unwrap();
        assert!((lifted - area).abs() / area < 1e-12);
    }
}
