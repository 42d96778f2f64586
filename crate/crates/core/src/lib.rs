//! Anisotropic convex geometry: smooth norms and their Wulff shapes,
//! anisotropic distance and projection, curvature spectra, curvature measures
//! and numerical checks of the integral identities they satisfy.

pub mod error;
pub mod linalg;
pub mod mesh;
pub mod norm;
pub mod sphere;
pub mod wulff;
pub mod body;
pub mod projection;
pub mod region;
pub mod montecarlo;
pub mod measures;
pub mod identities;
pub mod cli;

pub use error::{GeomError, Result};
pub use norm::{NormJet, NormSpec, ProfileTerm};
