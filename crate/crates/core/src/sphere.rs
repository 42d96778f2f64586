//! Direction sets and triangulations of the unit sphere `S^{D-1}`.
//!
//! The circle is sampled on a uniform angular grid; the 2-sphere is meshed by
//! subdividing each icosahedron face into `f^2` triangles (frequency `f`) and
//! projecting the grid onto the sphere.

use std::collections::HashMap;

use crate::linalg::Vector;

/// Triangulated unit sphere: unit vertices and elements of `D` vertex indices
/// (segments on the circle, triangles on the 2-sphere), outward oriented.
#[derive(Debug, Clone)]
pub struct SphereMesh<const D: usize> {
    pub vertices: Vec<Vector<D>>,
    pub elements: Vec<[usize; D]>,
}

impl<const D: usize> SphereMesh<D> {
    /// `resolution` is the number of circle points for `D = 2` and the
    /// icosahedral subdivision frequency for `D = 3`.
    pub fn new(resolution: usize) -> Self {
        match D {
            2 => circle_mesh(resolution.max(3)),
            3 => icosphere(resolution.max(1)),
            _ => panic!("sphere meshes exist only for D = 2 or 3"),
        }
    }

    /// Neighbour lists induced by the elements.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for e in &self.elements {
            for i in 0..D {
                for j in 0..D {
                    if i != j && !adj[e[i]].contains(&e[j]) {
                        adj[e[i]].push(e[j]);
                    }
                }
            }
        }
        adj
    }
}

fn circle_mesh<const D: usize>(count: usize) -> SphereMesh<D> {
    let vertices = (0..count)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / count as f64;
            Vector::<D>::from_fn(|i, _| if i == 0 { t.cos() } else { t.sin() })
        })
        .collect();
    let elements = (0..count)
        .map(|k| std::array::from_fn(|i| (k + i) % count))
        .collect();
    SphereMesh { vertices, elements }
}

fn icosahedron() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let v = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, f)
}

fn icosphere<const D: usize>(frequency: usize) -> SphereMesh<D> {
    let (base_v, base_f) = icosahedron();
    let mut vertices: Vec<Vector<D>> = Vec::new();
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut elements: Vec<[usize; D]> = Vec::new();
    let f = frequency;
    let mut vertex_id = |p: [f64; 3], vertices: &mut Vec<Vector<D>>| -> usize {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let q = [p[0] / n, p[1] / n, p[2] / n];
        let key = q.map(|c| (c * 1e9).round() as i64);
        *index.entry(key).or_insert_with(|| {
            vertices.push(Vector::<D>::from_fn(|i, _| q[i]));
            vertices.len() - 1
        })
    };
    for face in &base_f {
        let [a, b, c] = face.map(|i| base_v[i]);
        let mut grid = vec![vec![0usize; f + 1]; f + 1];
        for i in 0..=f {
            for j in 0..=(f - i) {
                let (s, t) = (i as f64 / f as f64, j as f64 / f as f64);
                let p = std::array::from_fn(|k| a[k] + (b[k] - a[k]) * s + (c[k] - a[k]) * t);
                grid[i][j] = vertex_id(p, &mut vertices);
            }
        }
        for i in 0..f {
            for j in 0..(f - i) {
                elements.push(std::array::from_fn(|k| [grid[i][j], grid[i + 1][j], grid[i][j + 1]][k]));
                if i + j + 1 < f {
                    elements.push(std::array::from_fn(|k| {
                        [grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]][k]
                    }));
                }
            }
        }
    }
    // Orient every triangle outward.
    for e in &mut elements {
        let (p0, p1, p2) = (vertices[e[0]], vertices[e[1]], vertices[e[2]]);
        let u = p1 - p0;
        let v = p2 - p0;
        let cross = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let c = (p0 + p1 + p2) / 3.0;
        if cross[0] * c[0] + cross[1] * c[1] + cross[2] * c[2] < 0.0 {
            e.swap(1, 2);
        }
    }
    SphereMesh { vertices, elements }
}

/// Deterministic quasi-uniform unit directions: an angular grid on the circle,
/// a Fibonacci lattice on the 2-sphere.
pub fn quasi_uniform_directions<const D: usize>(count: usize) -> Vec<Vector<D>> {
    match D {
        2 => (0..count)
            .map(|k| {
                let t = std::f64::consts::TAU * (k as f64 + 0.5) / count as f64;
                Vector::<D>::from_fn(|i, _| if i == 0 { t.cos() } else { t.sin() })
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    let p = [rho * t.cos(), rho * t.sin(), z];
                    Vector::<D>::from_fn(|i, _| p[i])
                })
                .collect()
        }
        _ => panic!("direction sets exist only for D = 2 or 3"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for f in [1usize, 2, 5, 8] {
            let m = SphereMesh::<3>::new(f);
            assert_eq!(m.elements.len(), 20 * f * f);
            assert_eq!(m.vertices.len(), 10 * f * f + 2);
            for v in &m.vertices {
                assert!((v.norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn circle_closes() {
        let m = SphereMesh::<2>::new(16);
        assert_eq!(m.vertices.len(), 16);
        assert_eq!(m.elements.last().unwrap(), &[15, 0]);
        let adj = m.adjacency();
        assert_eq!(adj[0].len(), 2);
    }

    #[test]
    fn directions_are_unit() {
        for v in quasi_uniform_directions::<3>(500) {
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
        for v in quasi_uniform_directions::<2>(50) {
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
    }
}
