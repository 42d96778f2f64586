//! Boundary meshes with per-vertex normals and flat-element quadrature weights.

use std::io::Write;

use crate::linalg::Vector;

/// A closed boundary mesh: vertices lie on the surface, `normals` are the
/// exterior unit normals at the vertices, and elements carry their flat
/// (chord/triangle) measure. `tags` records the source facet for polytope
/// meshes.
#[derive(Debug, Clone)]
pub struct SurfaceMesh<const D: usize> {
    pub vertices: Vec<Vector<D>>,
    pub normals: Vec<Vector<D>>,
    pub elements: Vec<[usize; D]>,
    pub element_areas: Vec<f64>,
    pub tags: Option<Vec<usize>>,
}

/// `(D-1)`-measure of the simplex spanned by `D` points.
pub fn simplex_area<const D: usize>(points: &[Vector<D>; D]) -> f64 {
    match D {
        2 => (points[1] - points[0]).norm(),
        3 => {
            let u = points[1] - points[0];
            let v = points[2] - points[0];
            let cross = [
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            ];
            0.5 * (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt()
        }
        _ => unreachable!("meshes exist only for D = 2 or 3"),
    }
}

impl<const D: usize> SurfaceMesh<D> {
    pub fn new(
        vertices: Vec<Vector<D>>,
        normals: Vec<Vector<D>>,
        elements: Vec<[usize; D]>,
        tags: Option<Vec<usize>>,
    ) -> Self {
        let element_areas = elements
            .iter()
            .map(|e| simplex_area(&e.map(|i| vertices[i])))
            .collect();
        Self {
            vertices,
            normals,
            elements,
            element_areas,
            tags,
        }
    }

    pub fn total_area(&self) -> f64 {
        self.element_areas.iter().sum()
    }

    pub fn centroid(&self, element: usize) -> Vector<D> {
        let e = &self.elements[element];
        e.iter().map(|&i| self.vertices[i]).sum::<Vector<D>>() / D as f64
    }

    /// Lumped vertex weights: each element gives `area / D` to each of its vertices.
    pub fn vertex_weights(&self) -> Vec<f64> {
        self.vertex_weights_where(|_| true)
    }

    /// Vertex weights from the elements accepted by `keep` only.
    pub fn vertex_weights_where(&self, keep: impl Fn(usize) -> bool) -> Vec<f64> {
        let mut w = vec![0.0; self.vertices.len()];
        for (k, e) in self.elements.iter().enumerate() {
            if keep(k) {
                let share = self.element_areas[k] / D as f64;
                for &i in e {
                    w[i] += share;
                }
            }
        }
        w
    }

    /// Sum of `f(vertex)` against lumped weights, i.e. the element-wise
    /// trapezoid rule.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.vertex_weights()
            .iter()
            .enumerate()
            .map(|(i, w)| w * f(i))
            .sum()
    }

    /// Writes `x.., n.., weight` rows for plotting.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        let axes = ["x", "y", "z"];
        let mut header: Vec<String> = axes[..D].iter().map(|a| a.to_string()).collect();
        header.extend(axes[..D].iter().map(|a| format!("n{a}")));
        header.push("weight".into());
        writeln!(out, "{}", header.join(","))?;
        for ((v, n), w) in self
            .vertices
            .iter()
            .zip(&self.normals)
            .zip(self.vertex_weights())
        {
            let row: Vec<String> = v
                .iter()
                .chain(n.iter())
                .chain(std::iter::once(&w))
                .map(|c| format!("{c:.9e}"))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}
