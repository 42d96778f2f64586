//! The Wulff shape `W = {phi* = 1}` through its Gauss-map parametrization
//! `eta -> grad phi(eta)`.

use crate::error::{GeomError, Result};
use crate::linalg::{unit_ball_volume, Vector};
use crate::mesh::SurfaceMesh;
use crate::norm::NormSpec;
use crate::sphere::SphereMesh;

/// Accepted deviation of `|eta|` from 1 for unit-vector inputs.
pub const UNIT_TOL: f64 = 1e-8;
/// Accepted `|phi*(u) - 1|` for points claimed to lie on the Wulff shape.
pub const ON_WULFF_TOL: f64 = 1e-6;
pub const MIN_RESOLUTION: usize = 8;

/// Mesh resolution used when no explicit one is configured.
pub const fn default_resolution<const D: usize>() -> usize {
    if D == 2 {
        2048
    } else {
        48
    }
}

pub(crate) fn check_unit<const D: usize>(eta: &Vector<D>) -> Result<()> {
    let n = eta.norm();
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(GeomError::InvalidArgument(format!(
            "expected a unit vector, got norm {n}"
        )));
    }
    Ok(())
}

pub(crate) fn check_resolution(resolution: usize) -> Result<()> {
    if resolution < MIN_RESOLUTION {
        return Err(GeomError::InvalidArgument(format!(
            "mesh resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    Ok(())
}

/// The point `grad phi(eta)` of the Wulff shape with outer normal `eta`.
pub fn wulff_point<const D: usize>(spec: &NormSpec<D>, eta: &Vector<D>) -> Result<Vector<D>> {
    check_unit(eta)?;
    Ok(spec.norm_jet(eta)?.gradient)
}

/// Outer unit normal of the Wulff shape at `u`.
pub fn wulff_normal<const D: usize>(spec: &NormSpec<D>, u: &Vector<D>) -> Result<Vector<D>> {
    let jet = spec.dual_jet(u)?;
    if (jet.value - 1.0).abs() > ON_WULFF_TOL {
        return Err(GeomError::NotOnWulff {
            dual_value: jet.value,
        });
    }
    Ok(jet.gradient.normalize())
}

/// Wulff shape mesh: the sphere mesh pushed forward through `grad phi`.
#[derive(Debug, Clone)]
pub struct WulffMesh<const D: usize> {
    pub mesh: SurfaceMesh<D>,
    pub resolution: usize,
}

impl<const D: usize> WulffMesh<D> {
    pub fn total_weight(&self) -> f64 {
        self.mesh.total_area()
    }
}

/// Boundary mesh of `center + scale * W^gauge`, normals from the sphere mesh.
pub(crate) fn gauge_mesh<const D: usize>(
    gauge: &NormSpec<D>,
    center: &Vector<D>,
    scale: f64,
    resolution: usize,
) -> Result<SurfaceMesh<D>> {
    let sphere = SphereMesh::<D>::new(resolution);
    let vertices = sphere
        .vertices
        .iter()
        .map(|eta| Ok(center + gauge.norm_jet(eta)?.gradient * scale))
        .collect::<Result<Vec<_>>>()?;
    Ok(SurfaceMesh::new(vertices, sphere.vertices, sphere.elements, None))
}

pub fn wulff_mesh<const D: usize>(spec: &NormSpec<D>, resolution: usize) -> Result<WulffMesh<D>> {
    check_resolution(resolution)?;
    Ok(WulffMesh {
        mesh: gauge_mesh(spec, &Vector::<D>::zeros(), 1.0, resolution)?,
        resolution,
    })
}

/// `(1/D) * sum w_i (x_i . eta_i)`, the divergence-theorem volume of a mesh.
pub(crate) fn mesh_volume<const D: usize>(mesh: &SurfaceMesh<D>) -> f64 {
    mesh.integrate(|i| mesh.vertices[i].dot(&mesh.normals[i])) / D as f64
}

/// Volume of `{phi* <= 1}`: closed form for the Euclidean and ellipsoidal
/// families, boundary quadrature otherwise.
pub fn wulff_volume<const D: usize>(spec: &NormSpec<D>, resolution: usize) -> Result<f64> {
    check_resolution(resolution)?;
    if spec.is_euclidean() {
        return Ok(unit_ball_volume(D));
    }
    if let Some(a) = spec.ellipsoidal_matrix() {
        return Ok(unit_ball_volume(D) * crate::linalg::determinant(a).sqrt());
    }
    Ok(mesh_volume(&wulff_mesh(spec, resolution)?.mesh))
}

/// Volume of `{phi* <= 1}` by quadrature on the mesh, for every family.
pub fn wulff_volume_quadrature<const D: usize>(spec: &NormSpec<D>, resolution: usize) -> Result<f64> {
    Ok(mesh_volume(&wulff_mesh(spec, resolution)?.mesh))
}
