//! Boundary regions used to localize curvature measures.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::linalg::Vector;
use crate::mesh::SurfaceMesh;
use crate::projection::Face;

/// Half-space `{x : x . direction >= offset}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cap {
    pub direction: Vec<f64>,
    pub offset: f64,
}

impl Cap {
    /// `{x : (x - center) . direction >= c}`.
    pub fn about(center: &[f64], direction: &[f64], c: f64) -> Self {
        let shift: f64 = center.iter().zip(direction).map(|(a, b)| a * b).sum();
        Self {
            direction: direction.to_vec(),
            offset: shift + c,
        }
    }

    fn contains<const D: usize>(&self, x: &Vector<D>) -> bool {
        self.direction.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() >= self.offset
    }
}

/// A Borel selector on the boundary, evaluated at projection feet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    Whole,
    Empty,
    /// Intersection of caps.
    Caps { caps: Vec<Cap> },
    /// Relative interior of a polytope facet (an edge in 2D).
    Facet { index: usize },
    /// A single polytope vertex.
    Vertex { index: usize },
}

impl Region {
    pub fn cap(direction: &[f64], offset: f64) -> Self {
        Self::Caps {
            caps: vec![Cap {
                direction: direction.to_vec(),
                offset,
            }],
        }
    }

    pub fn validate<const D: usize>(&self) -> Result<()> {
        if let Self::Caps { caps } = self {
            if caps.iter().any(|c| c.direction.len() != D) {
                return Err(GeomError::InvalidArgument(format!(
                    "cap direction must have {D} components"
                )));
            }
        }
        Ok(())
    }

    /// Whether a foot (with its polytope face, if any) lies in the region.
    pub fn contains_foot<const D: usize>(&self, foot: &Vector<D>, face: Option<Face>) -> bool {
        match self {
            Self::Whole => true,
            Self::Empty => false,
            Self::Caps { caps } => caps.iter().all(|c| c.contains(foot)),
            Self::Facet { index } => face == Some(Face::Facet(*index)),
            Self::Vertex { index } => face == Some(Face::Vertex(*index)),
        }
    }

    /// Element indicator for mesh quadrature (element centroid for caps,
    /// facet tag for polytope facets).
    pub fn contains_element<const D: usize>(&self, mesh: &SurfaceMesh<D>, element: usize) -> bool {
        match self {
            Self::Whole => true,
            Self::Empty | Self::Vertex { .. } => false,
            Self::Caps { caps } => {
                let c = mesh.centroid(element);
                caps.iter().all(|cap| cap.contains(&c))
            }
            Self::Facet { index } => mesh.tags.as_ref().is_some_and(|t| t[element] == *index),
        }
    }

    /// Short label for tables.
    pub fn label(&self) -> String {
        match self {
            Self::Whole => "whole".into(),
            Self::Empty => "empty".into(),
            Self::Caps { caps } => caps
                .iter()
                .map(|c| {
                    let d: Vec<String> = c.direction.iter().map(|v| format!("{v}")).collect();
                    format!("cap[{};{}]", d.join(" "), c.offset)
                })
                .collect::<Vec<_>>()
                .join("&"),
            Self::Facet { index } => format!("facet{index}"),
            Self::Vertex { index } => format!("vertex{index}"),
        }
    }

    /// The four quadrants around `center` in the first two coordinates.
    pub fn quadrants(center: &[f64]) -> Vec<Region> {
        let d = center.len();
        let axis = |i: usize, s: f64| {
            let mut v = vec![0.0; d];
            v[i] = s;
            v
        };
        let mut out = Vec::new();
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                out.push(Region::Caps {
                    caps: vec![
                        Cap::about(center, &axis(0, sx), 0.0),
                        Cap::about(center, &axis(1, sy), 0.0),
                    ],
                });
            }
        }
        out
    }

    /// Caps `{(x - center) . (+-e_i) >= fraction * half_width_i}`, two per axis.
    pub fn axis_caps(center: &[f64], half_widths: &[f64], fraction: f64) -> Vec<Region> {
        let d = center.len();
        let mut out = Vec::new();
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; d];
                e[i] = s;
                out.push(Region::Caps {
                    caps: vec![Cap::about(center, &e, fraction * half_widths[i])],
                });
            }
        }
        out
    }
}
