//! Smooth uniformly convex norms, their duals, and derivative jets.
//!
//! A [`NormSpec`] is one of three families:
//!
//! * `Euclidean`: `phi(u) = |u|`.
//! * `Ellipsoidal(A)`: `phi(u) = sqrt(u^T A u)` for symmetric positive-definite `A`,
//!   with dual `phi*(x) = sqrt(x^T A^{-1} x)`.
//! * `Perturbed(eps, profile)`: `phi(u) = |u| (1 + eps h(u / |u|))` where `h` is an
//!   even polynomial profile. Its dual has no closed form and is solved by a
//!   Lagrange-Newton iteration on the constraint manifold `{phi = 1}`.
//!
//! Uniform convexity is checked empirically at construction: the sampled
//! ellipticity constant must reach [`MIN_ELLIPTICITY`].

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::linalg::{self, Matrix, Vector, MAX_SYSTEM};
use crate::sphere;

/// Vectors shorter than this are rejected by every jet evaluation.
pub const ZERO_VECTOR_TOL: f64 = 1e-14;
/// Relative KKT residual `|x - mu grad phi(v)| / |x|` accepted by the dual solver.
pub const DUAL_KKT_TOL: f64 = 1e-10;
pub const DUAL_MAX_ITERATIONS: usize = 60;
/// Smallest sampled ellipticity constant accepted when building a norm.
pub const MIN_ELLIPTICITY: f64 = 1e-3;
/// Direction samples used by the construction-time ellipticity check.
pub const ELLIPTICITY_SAMPLES: usize = 2000;

/// Value, gradient and Hessian of a 1-homogeneous function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormJet<const D: usize> {
    pub value: f64,
    pub gradient: Vector<D>,
    pub hessian: Matrix<D>,
}

/// One monomial `coef * prod w_i^{powers_i}` of a perturbation profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileTerm<const D: usize> {
    pub coef: f64,
    pub powers: [u32; D],
}

impl<const D: usize> ProfileTerm<D> {
    fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind<const D: usize> {
    Euclidean,
    Ellipsoidal { a: Matrix<D>, a_inv: Matrix<D> },
    Perturbed { epsilon: f64, profile: Vec<ProfileTerm<D>> },
}

/// A uniformly convex C^2 norm on `R^D`, `D` in {2, 3}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NormSpecJson", into = "NormSpecJson")]
pub struct NormSpec<const D: usize> {
    kind: Kind<D>,
}

fn check_dimension<const D: usize>() -> Result<()> {
    if D == 2 || D == 3 {
        Ok(())
    } else {
        Err(GeomError::InvalidArgument(format!(
            "dimension must be 2 or 3, got {D}"
        )))
    }
}

fn checked_norm<const D: usize>(u: &Vector<D>) -> Result<f64> {
    let r = u.norm();
    if !(r > ZERO_VECTOR_TOL) || !r.is_finite() {
        return Err(GeomError::ZeroVector { norm: r });
    }
    Ok(r)
}

fn euclidean_jet<const D: usize>(u: &Vector<D>, r: f64) -> NormJet<D> {
    let g = u / r;
    NormJet {
        value: r,
        gradient: g,
        hessian: (Matrix::<D>::identity() - g * g.transpose()) / r,
    }
}

fn quadratic_jet<const D: usize>(a: &Matrix<D>, u: &Vector<D>) -> NormJet<D> {
    let au = a * u;
    let value = u.dot(&au).sqrt();
    let g = au / value;
    NormJet {
        value,
        gradient: g,
        hessian: (a - g * g.transpose()) / value,
    }
}

#[inline]
fn ipow(x: f64, e: i64) -> f64 {
    if e < 0 {
        0.0
    } else {
        x.powi(e as i32)
    }
}

/// Value, gradient and Hessian of `prod u_i^{p_i}`.
fn monomial_jet<const D: usize>(powers: &[u32; D], u: &Vector<D>) -> (f64, Vector<D>, Matrix<D>) {
    let p: [i64; D] = std::array::from_fn(|i| powers[i] as i64);
    let product_except = |skip: &[usize], lower: &[(usize, i64)]| -> f64 {
        let mut acc = 1.0;
        for k in 0..D {
            if skip.contains(&k) {
                continue;
            }
            let drop = lower.iter().find(|(idx, _)| *idx == k).map_or(0, |(_, d)| *d);
            acc *= ipow(u[k], p[k] - drop);
        }
        acc
    };
    let value = product_except(&[], &[]);
    let mut grad = Vector::<D>::zeros();
    let mut hess = Matrix::<D>::zeros();
    for i in 0..D {
        if p[i] == 0 {
            continue;
        }
        grad[i] = p[i] as f64 * product_except(&[], &[(i, 1)]);
        for j in 0..D {
            if p[j] == 0 {
                continue;
            }
            hess[(i, j)] = if i == j {
                (p[i] * (p[i] - 1)) as f64 * product_except(&[], &[(i, 2)])
            } else {
                (p[i] * p[j]) as f64 * product_except(&[], &[(i, 1), (j, 1)])
            };
        }
    }
    (value, grad, hess)
}

impl<const D: usize> NormSpec<D> {
    pub fn euclidean() -> Self {
        check_dimension::<D>().expect("NormSpec dimension");
        Self { kind: Kind::Euclidean }
    }

    /// `phi(u) = sqrt(u^T A u)`; rejects non-symmetric or non-positive-definite `A`.
    pub fn ellipsoidal(a: Matrix<D>) -> Result<Self> {
        check_dimension::<D>()?;
        let scale = a.abs().max();
        if !scale.is_finite() || (a - a.transpose()).abs().max() > 1e-12 * scale.max(1.0) {
            return Err(GeomError::InvalidNorm("matrix A must be symmetric".into()));
        }
        let a = (a + a.transpose()) * 0.5;
        let min_eig = linalg::symmetric_eigenvalues(&a)[0];
        if !(min_eig > 0.0) {
            return Err(GeomError::InvalidNorm(format!(
                "matrix A must be positive definite (smallest eigenvalue {min_eig})"
            )));
        }
        let a_inv = linalg::inverse(&a)
            .ok_or_else(|| GeomError::InvalidNorm("matrix A is singular".into()))?;
        let a_inv = (a_inv + a_inv.transpose()) * 0.5;
        Ok(Self {
            kind: Kind::Ellipsoidal { a, a_inv },
        })
    }

    /// `phi(u) = |u| (1 + epsilon h(u/|u|))` with `h` the sum of the profile terms.
    ///
    /// Every term must have even total degree so that `phi` stays symmetric.
    pub fn perturbed(epsilon: f64, profile: Vec<ProfileTerm<D>>) -> Result<Self> {
        check_dimension::<D>()?;
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(GeomError::InvalidNorm(format!(
                "epsilon must be finite and non-negative, got {epsilon}"
            )));
        }
        for term in &profile {
            if term.degree() % 2 != 0 {
                return Err(GeomError::InvalidNorm(format!(
                    "profile term {:?} has odd degree; the norm would not be symmetric",
                    term.powers
                )));
            }
            if !term.coef.is_finite() {
                return Err(GeomError::InvalidNorm("profile coefficient is not finite".into()));
            }
        }
        let spec = Self {
            kind: Kind::Perturbed { epsilon, profile },
        };
        // phi must stay positive and uniformly convex on the sphere.
        let gamma = spec.ellipticity_estimate(ELLIPTICITY_SAMPLES)?;
        let min_value = sphere::quasi_uniform_directions::<D>(ELLIPTICITY_SAMPLES)
            .iter()
            .map(|u| spec.value(u))
            .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))?;
        if !(gamma >= MIN_ELLIPTICITY) || !(min_value > 0.0) {
            return Err(GeomError::InvalidNorm(format!(
                "perturbation too strong: sampled ellipticity {gamma:.3e} (need >= {MIN_ELLIPTICITY:e})"
            )));
        }
        Ok(spec)
    }

    /// The default smooth perturbation `h(w) = sum_i w_i^4`.
    pub fn quartic_profile() -> Vec<ProfileTerm<D>> {
        (0..D)
            .map(|i| {
                let mut powers = [0u32; D];
                powers[i] = 4;
                ProfileTerm { coef: 1.0, powers }
            })
            .collect()
    }

    pub fn perturbed_quartic(epsilon: f64) -> Result<Self> {
        Self::perturbed(epsilon, Self::quartic_profile())
    }

    pub fn variant_name(&self) -> &'static str {
        match self.kind {
            Kind::Euclidean => "euclidean",
            Kind::Ellipsoidal { .. } => "ellipsoidal",
            Kind::Perturbed { .. } => "perturbed",
        }
    }

    /// The matrix `A` of an ellipsoidal norm.
    pub fn ellipsoidal_matrix(&self) -> Option<&Matrix<D>> {
        match &self.kind {
            Kind::Ellipsoidal { a, .. } => Some(a),
            _ => None,
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, Kind::Euclidean)
            || matches!(&self.kind, Kind::Perturbed { epsilon, profile } if *epsilon == 0.0 || profile.is_empty())
    }

    /// Short human-readable label used in reports.
    pub fn label(&self) -> String {
        match &self.kind {
            Kind::Euclidean => "euclidean".to_string(),
            Kind::Ellipsoidal { a, .. } => {
                let diag: Vec<String> = (0..D).map(|i| format!("{}", a[(i, i)])).collect();
                let off_diagonal = (0..D).any(|i| (0..D).any(|j| i != j && a[(i, j)] != 0.0));
                if off_diagonal {
                    "ellipsoidal(full)".to_string()
                } else {
                    format!("ellipsoidal(diag {})", diag.join(","))
                }
            }
            Kind::Perturbed { epsilon, .. } => format!("perturbed(eps {epsilon})"),
        }
    }

    /// `phi(u)`, without derivatives.
    pub fn value(&self, u: &Vector<D>) -> Result<f64> {
        let r = checked_norm(u)?;
        Ok(match &self.kind {
            Kind::Euclidean => r,
            Kind::Ellipsoidal { a, .. } => u.dot(&(a * u)).sqrt(),
            Kind::Perturbed { epsilon, profile } => {
                let w = u / r;
                let h: f64 = profile
                    .iter()
                    .map(|t| t.coef * monomial_jet(&t.powers, &w).0)
                    .sum();
                r * (1.0 + epsilon * h)
            }
        })
    }

    /// `phi(u)`, `grad phi(u)` and the Hessian of `phi` at `u != 0`.
    pub fn norm_jet(&self, u: &Vector<D>) -> Result<NormJet<D>> {
        let r = checked_norm(u)?;
        Ok(match &self.kind {
            Kind::Euclidean => euclidean_jet(u, r),
            Kind::Ellipsoidal { a, .. } => quadratic_jet(a, u),
            Kind::Perturbed { epsilon, profile } => {
                let mut jet = euclidean_jet(u, r);
                let id = Matrix::<D>::identity();
                let uu = u * u.transpose();
                for term in profile {
                    let q = 1.0 - term.degree() as f64;
                    let (m, gm, hm) = monomial_jet(&term.powers, u);
                    let rq = r.powf(q);
                    let grad_rq = u * (q * r.powf(q - 2.0));
                    let hess_rq = id * (q * r.powf(q - 2.0)) + uu * (q * (q - 2.0) * r.powf(q - 4.0));
                    let c = epsilon * term.coef;
                    jet.value += c * m * rq;
                    jet.gradient += (gm * rq + grad_rq * m) * c;
                    jet.hessian += (hm * rq
                        + gm * grad_rq.transpose()
                        + grad_rq * gm.transpose()
                        + hess_rq * m)
                        * c;
                }
                jet.hessian = (jet.hessian + jet.hessian.transpose()) * 0.5;
                jet
            }
        })
    }

    /// Jet of the dual norm `phi*(x) = sup { v . x : phi(v) = 1 }`.
    ///
    /// The gradient is the maximizing `v`. For the perturbed family the maximizer
    /// is found by Newton iteration on `x = mu grad phi(v)`, `phi(v) = 1`, started
    /// from `x / phi(x)`.
    pub fn dual_jet(&self, x: &Vector<D>) -> Result<NormJet<D>> {
        let r = checked_norm(x)?;
        match &self.kind {
            Kind::Euclidean => Ok(euclidean_jet(x, r)),
            Kind::Ellipsoidal { a_inv, .. } => Ok(quadratic_jet(a_inv, x)),
            Kind::Perturbed { .. } => {
                let v = self.dual_maximizer(x, r)?;
                let value = v.dot(x);
                // Differentiating grad phi(grad phi*(x)) = x / phi*(x) gives
                // (H + a a^T) S = (I - x v^T / phi*) / phi* with a = grad phi(v).
                let jet = self.norm_jet(&v)?;
                let a = x / value;
                let lhs = jet.hessian + a * a.transpose();
                let rhs = (Matrix::<D>::identity() - x * v.transpose() / value) / value;
                let inv = linalg::inverse(&lhs).ok_or(GeomError::IllConditioned { residual: f64::INFINITY })?;
                let s = inv * rhs;
                Ok(NormJet {
                    value,
                    gradient: v,
                    hessian: (s + s.transpose()) * 0.5,
                })
            }
        }
    }

    /// `phi*(x)` only.
    pub fn dual_value(&self, x: &Vector<D>) -> Result<f64> {
        let r = checked_norm(x)?;
        match &self.kind {
            Kind::Euclidean => Ok(r),
            Kind::Ellipsoidal { a_inv, .. } => Ok(x.dot(&(a_inv * x)).sqrt()),
            Kind::Perturbed { .. } => Ok(self.dual_maximizer(x, r)?.dot(x)),
        }
    }

    fn dual_maximizer(&self, x: &Vector<D>, r: f64) -> Result<Vector<D>> {
        let mut v = x / r;
        v /= self.value(&v)?;
        let mut best = f64::INFINITY;
        for _ in 0..DUAL_MAX_ITERATIONS {
            let jet = self.norm_jet(&v)?;
            let mu = v.dot(x);
            let f1 = jet.gradient * mu - x;
            let residual = f1.norm() / r;
            if residual <= 1e-15 || (residual >= best && best <= DUAL_KKT_TOL) {
                return Ok(v);
            }
            best = best.min(residual);
            // Lagrange-Newton step on (v, mu); the constraint row keeps phi(v) = 1
            // to first order and the retraction below restores it exactly.
            let n = D + 1;
            let mut a = [[0.0; MAX_SYSTEM]; MAX_SYSTEM];
            let mut b = [0.0; MAX_SYSTEM];
            for i in 0..D {
                for j in 0..D {
                    a[i][j] = mu * jet.hessian[(i, j)];
                }
                a[i][D] = jet.gradient[i];
                a[D][i] = jet.gradient[i];
                b[i] = -f1[i];
            }
            b[D] = -(jet.value - 1.0);
            let step = linalg::solve_dense(&mut a, &mut b, n).ok_or(GeomError::NoConvergence {
                what: "dual norm",
                iterations: 0,
                residual,
            })?;
            let dv = Vector::<D>::from_fn(|i, _| step[i]);
            // Backtrack until the KKT residual decreases.
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-6 {
                let mut trial = v + dv * t;
                trial /= self.value(&trial)?;
                let tj = self.norm_jet(&trial)?;
                let tres = (tj.gradient * trial.dot(x) - x).norm() / r;
                if tres < residual || residual <= DUAL_KKT_TOL {
                    v = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let jet = self.norm_jet(&v)?;
        let residual = (jet.gradient * v.dot(x) - x).norm() / r;
        if residual <= DUAL_KKT_TOL {
            Ok(v)
        } else {
            Err(GeomError::NoConvergence {
                what: "dual norm",
                iterations: DUAL_MAX_ITERATIONS,
                residual,
            })
        }
    }

    /// Minimum of `v^T D^2 phi(u) v` over sampled unit `u` and unit `v` orthogonal to `u`.
    ///
    /// The inner minimum over `v` is exact (smallest eigenvalue of the Hessian on
    /// the tangent plane); the outer one runs over a quasi-uniform direction set,
    /// so the result is an upper bound on the true ellipticity constant.
    pub fn ellipticity_estimate(&self, sample_count: usize) -> Result<f64> {
        if sample_count < 100 {
            return Err(GeomError::InvalidArgument(format!(
                "ellipticity_estimate needs at least 100 samples, got {sample_count}"
            )));
        }
        let mut gamma = f64::INFINITY;
        for u in sphere::quasi_uniform_directions::<D>(sample_count) {
            let jet = self.norm_jet(&u)?;
            let basis = linalg::tangent_basis(&u);
            let restricted = linalg::restrict(&jet.hessian, &basis);
            let min_eig = restricted
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            gamma = gamma.min(min_eig);
        }
        Ok(gamma)
    }

    /// Consistency of the analytic jets over quasi-uniform directions at
    /// radius `radius`: central differences, the duality relations
    /// `phi*(grad phi(u)) = 1`, `grad phi*(grad phi(u)) = u / phi(u)` and the
    /// Euler identities `grad phi(u) . u = phi(u)`, `D^2 phi(u) u = 0`.
    pub fn calculus_check(&self, sample_count: usize, radius: f64) -> Result<CalculusReport> {
        let mut report = CalculusReport::default();
        for dir in sphere::quasi_uniform_directions::<D>(sample_count.max(1)) {
            let u = dir * radius;
            let jet = self.norm_jet(&u)?;
            let h = 1e-5 * radius;
            let mut grad_fd = Vector::<D>::zeros();
            let mut hess_fd = Matrix::<D>::zeros();
            let hh = 1e-4 * radius;
            for i in 0..D {
                let e = linalg::axis::<D>(i);
                grad_fd[i] = (self.value(&(u + e * h))? - self.value(&(u - e * h))?) / (2.0 * h);
                let column = (self.norm_jet(&(u + e * hh))?.gradient - self.norm_jet(&(u - e * hh))?.gradient)
                    / (2.0 * hh);
                hess_fd.set_column(i, &column);
            }
            report.gradient_error = report
                .gradient_error
                .max((jet.gradient - grad_fd).norm() / jet.gradient.norm());
            report.hessian_error = report
                .hessian_error
                .max((jet.hessian - hess_fd).norm() / jet.hessian.norm().max(f64::MIN_POSITIVE));
            let dual = self.dual_jet(&jet.gradient)?;
            report.involution_error = report
                .involution_error
                .max((dual.value - 1.0).abs())
                .max((dual.gradient - u / jet.value).norm() / (u / jet.value).norm());
            report.euler_error = report
                .euler_error
                .max((jet.gradient.dot(&u) - jet.value).abs() / jet.value)
                .max((jet.hessian * u).norm() / (jet.hessian.norm() * radius).max(f64::MIN_POSITIVE));
            report.samples += 1;
        }
        Ok(report)
    }

    pub fn to_json(&self) -> NormSpecJson {
        let dimension = Some(D);
        match &self.kind {
            Kind::Euclidean => NormSpecJson {
                variant: NormVariant::Euclidean,
                dimension,
                a: None,
                epsilon: None,
                profile: None,
            },
            Kind::Ellipsoidal { a, .. } => NormSpecJson {
                variant: NormVariant::Ellipsoidal,
                dimension,
                a: Some((0..D).map(|i| (0..D).map(|j| a[(i, j)]).collect()).collect()),
                epsilon: None,
                profile: None,
            },
            Kind::Perturbed { epsilon, profile } => NormSpecJson {
                variant: NormVariant::Perturbed,
                dimension,
                a: None,
                epsilon: Some(*epsilon),
                profile: Some(
                    profile
                        .iter()
                        .map(|t| ProfileTermJson {
                            coef: t.coef,
                            powers: t.powers.to_vec(),
                        })
                        .collect(),
                ),
            },
        }
    }

    pub fn from_json(json: &NormSpecJson) -> Result<Self> {
        check_dimension::<D>()?;
        if let Some(d) = json.dimension_hint() {
            if d != D {
                return Err(GeomError::InvalidNorm(format!(
                    "norm has dimension {d}, expected {D}"
                )));
            }
        }
        match json.variant {
            NormVariant::Euclidean => Ok(Self::euclidean()),
            NormVariant::Ellipsoidal => {
                let rows = json
                    .a
                    .as_ref()
                    .ok_or_else(|| GeomError::InvalidNorm("ellipsoidal norm needs \"A\"".into()))?;
                Self::ellipsoidal(matrix_from_rows(rows)?)
            }
            NormVariant::Perturbed => {
                let epsilon = json
                    .epsilon
                    .ok_or_else(|| GeomError::InvalidNorm("perturbed norm needs \"epsilon\"".into()))?;
                let profile = match &json.profile {
                    None => Self::quartic_profile(),
                    Some(terms) => terms
                        .iter()
                        .map(|t| {
                            if t.powers.len() != D {
                                return Err(GeomError::InvalidNorm(format!(
                                    "profile term has {} powers, expected {D}",
                                    t.powers.len()
                                )));
                            }
                            Ok(ProfileTerm {
                                coef: t.coef,
                                powers: std::array::from_fn(|i| t.powers[i]),
                            })
                        })
                        .collect::<Result<Vec<_>>>()?,
                };
                Self::perturbed(epsilon, profile)
            }
        }
    }
}

pub(crate) fn matrix_from_rows<const D: usize>(rows: &[Vec<f64>]) -> Result<Matrix<D>> {
    if rows.len() != D || rows.iter().any(|r| r.len() != D) {
        return Err(GeomError::InvalidArgument(format!("expected a {D}x{D} matrix")));
    }
    Ok(Matrix::<D>::from_fn(|i, j| rows[i][j]))
}

/// Largest relative errors found by [`NormSpec::calculus_check`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CalculusReport {
    pub samples: usize,
    pub gradient_error: f64,
    pub hessian_error: f64,
    pub involution_error: f64,
    pub euler_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormVariant {
    Euclidean,
    Ellipsoidal,
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileTermJson {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// JSON form of a norm: `{"variant": ..., "dimension": ..., "A": ..., "epsilon": ..., "profile": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpecJson {
    pub variant: NormVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<ProfileTermJson>>,
}

impl NormSpecJson {
    /// Dimension stated or implied by the JSON, if any.
    pub fn dimension_hint(&self) -> Option<usize> {
        self.dimension
            .or_else(|| self.a.as_ref().map(|a| a.len()))
            .or_else(|| {
                self.profile
                    .as_ref()
                    .and_then(|p| p.first().map(|t| t.powers.len()))
            })
    }
}

impl<const D: usize> TryFrom<NormSpecJson> for NormSpec<D> {
    type Error = GeomError;

    fn try_from(json: NormSpecJson) -> Result<Self> {
        Self::from_json(&json)
    }
}

impl<const D: usize> From<NormSpec<D>> for NormSpecJson {
    fn from(spec: NormSpec<D>) -> Self {
        spec.to_json()
    }
}
