//! Numerical checks of the integral identities and inequalities satisfied by
//! anisotropic curvature measures, and the Wulff-shape detector.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::body::ConvexBody;
use crate::error::{GeomError, Result};
use crate::linalg::{binomial, Vector};
use crate::measures::{elem_sym, refined, BoundaryField};
use crate::montecarlo::{body_length_scale, steiner_fit_family, McOptions, DEFAULT_FIT_RESIDUAL, DEFAULT_RHO_GRID};
use crate::norm::NormSpec;
use crate::projection::{kappa_spectrum, Target};
use crate::region::Region;

/// Relative floor on the error of quadrature comparisons, so that two
/// spectrally accurate quantities are not judged on rounding noise alone.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-9;
/// Tolerance of the complement pairing check.
pub const COMPLEMENT_TOLERANCE: f64 = 1e-2;
/// Inner radius of the complement check, relative to the body's length scale.
pub const COMPLEMENT_RADIUS: f64 = 0.02;
/// Cap offset of the default detector partition, relative to the half-width.
pub const DEFAULT_CAP_FRACTION: f64 = 0.5;
pub const DEFAULT_TOL_RATIO: f64 = 0.25;
pub const DEFAULT_TOL_FIT: f64 = 1e-2;
/// Boundary-mesh resolution of the gauge fit.
pub const FIT_RESOLUTION_2D: usize = 256;
pub const FIT_RESOLUTION_3D: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Equality,
    Violated,
    /// The check's precondition failed; see the report notes.
    Skipped,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Holds => "holds",
            Self::Equality => "equality",
            Self::Violated => "violated",
            Self::Skipped => "skipped",
        }
    }

    /// Equality within `3 err`, otherwise strict inequality `rhs > lhs` or a violation.
    pub fn for_inequality(slack: f64, error: f64) -> Self {
        if slack.abs() <= 3.0 * error {
            Self::Equality
        } else if slack > 0.0 {
            Self::Holds
        } else {
            Self::Violated
        }
    }

    /// Identity check: equality within `3 err`, else violated.
    pub fn for_identity(defect: f64, error: f64) -> Self {
        if defect.abs() <= 3.0 * error {
            Self::Equality
        } else {
            Self::Violated
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Parameters {
    pub body: String,
    pub norm: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    pub resolutions: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Parameters {
    fn new<const D: usize>(body: &ConvexBody<D>, spec: &NormSpec<D>) -> Self {
        Self {
            body: body.label(),
            norm: spec.label(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub identity: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    pub combined_error: f64,
    pub verdict: Verdict,
    pub parameters: Parameters,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl IdentityReport {
    /// `|lhs - rhs| / max(|lhs|, |rhs|)`.
    pub fn relative_defect(&self) -> f64 {
        let scale = self.lhs.abs().max(self.rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            self.slack.abs() / scale
        }
    }
}

fn error_floor(values: &[f64]) -> f64 {
    RELATIVE_ERROR_FLOOR * values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn check_order<const D: usize>(r: usize) -> Result<()> {
    if r == 0 || r > D - 1 {
        return Err(GeomError::InvalidArgument(format!("r must lie in 1..={}, got {r}", D - 1)));
    }
    Ok(())
}

/// Minkowski formula `(n - r + 1) int phi(eta) e_{r-1} = r int (x . eta) e_r`
/// over the boundary, both sides by quadrature at `resolution` with the
/// refinement difference as error.
pub fn minkowski_check<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    r: usize,
    resolution: usize,
) -> Result<IdentityReport> {
    check_order::<D>(r)?;
    body.smooth()?;
    let n = D - 1;
    let sides = |f: &BoundaryField<D>| {
        let lhs = (n - r + 1) as f64
            * f.integrate(&Region::Whole, |i| f.phi[i] * elem_sym(&f.kappa[i], r - 1));
        let rhs = r as f64
            * f.integrate(&Region::Whole, |i| {
                f.mesh.vertices[i].dot(&f.mesh.normals[i]) * elem_sym(&f.kappa[i], r)
            });
        (lhs, rhs)
    };
    let (lhs, rhs) = sides(&BoundaryField::new(body, spec, resolution)?);
    let (lhs_f, rhs_f) = sides(&BoundaryField::new(body, spec, refined(resolution))?);
    let error = (lhs - lhs_f).abs() + (rhs - rhs_f).abs() + error_floor(&[lhs, rhs]);
    let mut parameters = Parameters::new(body, spec);
    parameters.r = Some(r);
    parameters.resolutions = vec![resolution, refined(resolution)];
    Ok(IdentityReport {
        identity: format!("minkowski_r{r}"),
        lhs,
        rhs,
        slack: rhs - lhs,
        combined_error: error,
        verdict: Verdict::for_identity(rhs - lhs, error),
        parameters,
        notes: Vec::new(),
    })
}

/// Region-wise density ratios `C_{n-r}(B) / C_n(B)` with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSpread {
    pub ratios: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `(max - min) / mean`.
    pub deviation: f64,
    pub deviation_stderr: f64,
}

impl RatioSpread {
    fn new(pairs: &[(f64, f64, f64, f64)]) -> Self {
        let ratios: Vec<f64> = pairs.iter().map(|p| p.0 / p.2).collect();
        let stderr: Vec<f64> = pairs
            .iter()
            .zip(&ratios)
            .map(|(p, q)| q.abs() * ((p.1 / p.0).powi(2) + (p.3 / p.2).powi(2)).sqrt())
            .collect();
        let (imin, imax) = (0..ratios.len()).fold((0, 0), |(lo, hi), i| {
            (
                if ratios[i] < ratios[lo] { i } else { lo },
                if ratios[i] > ratios[hi] { i } else { hi },
            )
        });
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let deviation = (ratios[imax] - ratios[imin]) / mean.abs();
        let deviation_stderr = if imin == imax {
            0.0
        } else {
            (stderr[imax].powi(2) + stderr[imin].powi(2)).sqrt() / mean.abs()
        };
        Self {
            ratios,
            stderr,
            deviation,
            deviation_stderr,
        }
    }
}

/// Options of the Monte-Carlo route shared by the ratio-based checks.
#[derive(Debug, Clone, Serialize)]
pub struct SamplingOptions {
    pub mc: McOptions,
    /// Radii relative to the body's length scale.
    pub rho_grid: Vec<f64>,
}

impl SamplingOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            mc: McOptions::new(samples, seed),
            rho_grid: DEFAULT_RHO_GRID.to_vec(),
        }
    }
}

/// Default partition: the `2d` caps `{(x - c) . (+-e_i) >= f w_i}` around the
/// bounding-box center `c` with half-widths `w`.
pub fn default_partition<const D: usize>(body: &ConvexBody<D>, fraction: f64) -> Result<Vec<Region>> {
    let (lo, hi) = body.bounding_box()?;
    let center: Vec<f64> = ((lo + hi) * 0.5).iter().copied().collect();
    let half: Vec<f64> = ((hi - lo) * 0.5).iter().copied().collect();
    Ok(Region::axis_caps(&center, &half, fraction))
}

fn ratio_spread_direct<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    r: usize,
    regions: &[Region],
    resolution: usize,
) -> Result<RatioSpread> {
    let n = D - 1;
    let coarse = BoundaryField::new(body, spec, resolution)?;
    let fine = BoundaryField::new(body, spec, refined(resolution))?;
    let pairs: Vec<(f64, f64, f64, f64)> = regions
        .iter()
        .map(|b| {
            let (a, af) = (coarse.measure(n - r, b), fine.measure(n - r, b));
            let (p, pf) = (coarse.measure(n, b), fine.measure(n, b));
            let floor = |v: f64| RELATIVE_ERROR_FLOOR * v.abs();
            (a, (a - af).abs() + floor(a), p, (p - pf).abs() + floor(p))
        })
        .collect();
    Ok(RatioSpread::new(&pairs))
}

fn ratio_spread_mc<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    r: usize,
    regions: &[Region],
    sampling: &SamplingOptions,
) -> Result<RatioSpread> {
    let n = D - 1;
    let scale = body_length_scale(body)?;
    let grid: Vec<f64> = sampling.rho_grid.iter().map(|g| g * scale).collect();
    let fits = steiner_fit_family(body, spec, regions, &grid, &sampling.mc, DEFAULT_FIT_RESIDUAL)?;
    let pairs: Vec<(f64, f64, f64, f64)> = fits
        .iter()
        .map(|f| (f.coefficients[n - r], f.stderr[n - r], f.coefficients[n], f.stderr[n]))
        .collect();
    Ok(RatioSpread::new(&pairs))
}

/// Bound `(r + 1) lambda >= binom(n, r) (C_n / ((n + 1) V))^r` with
/// `lambda = C_{n-r} / C_n`, which holds with equality when the density ratio
/// of `C_{n-r}` to `C_n` is constant. The constancy is tested first on the
/// axis-cap partition (direct quadrature for smooth bodies, Steiner fits over
/// the facets and the whole boundary for polytopes); if it fails, the bound
/// verdict is skipped.
pub fn lambda_bound_check<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    r: usize,
    resolution: usize,
    sampling: &SamplingOptions,
) -> Result<IdentityReport> {
    check_order::<D>(r)?;
    let n = D - 1;
    let mut parameters = Parameters::new(body, spec);
    parameters.r = Some(r);
    let volume = body.reference_volume()?;
    let (spread, whole) = match body {
        ConvexBody::HPolytope(p) => {
            let mut regions: Vec<Region> = (0..p.facets().len()).map(|index| Region::Facet { index }).collect();
            regions.push(Region::Whole);
            parameters.seed = Some(sampling.mc.seed);
            let spread = ratio_spread_mc(body, spec, r, &regions, sampling)?;
            let k = regions.len() - 1;
            let whole = (spread.ratios[k], spread.stderr[k]);
            (spread, whole)
        }
        _ => {
            parameters.resolutions = vec![resolution, refined(resolution)];
            let regions = default_partition(body, DEFAULT_CAP_FRACTION)?;
            let spread = ratio_spread_direct(body, spec, r, &regions, resolution)?;
            let w = ratio_spread_direct(body, spec, r, &[Region::Whole], resolution)?;
            (spread, (w.ratios[0], w.stderr[0]))
        }
    };
    let perimeter = match body {
        ConvexBody::HPolytope(_) => crate::measures::anisotropic_perimeter(body, spec, 8)?,
        _ => BoundaryField::new(body, spec, resolution)?.measure(n, &Region::Whole),
    };
    let lhs = (r + 1) as f64 * whole.0;
    let rhs = binomial(n, r) * (perimeter / ((n + 1) as f64 * volume)).powi(r as i32);
    let error = (r + 1) as f64 * whole.1 + error_floor(&[lhs, rhs]);
    let mut notes = vec![format!(
        "density ratio spread {:.3e} (stderr {:.3e})",
        spread.deviation, spread.deviation_stderr
    )];
    let constant = spread.deviation <= 3.0 * spread.deviation_stderr.max(RELATIVE_ERROR_FLOOR);
    let verdict = if constant {
        Verdict::for_inequality(lhs - rhs, error)
    } else {
        notes.push("density ratio is not constant; bound not assessed".into());
        Verdict::Skipped
    };
    Ok(IdentityReport {
        identity: format!("lambda_bound_r{r}"),
        lhs,
        rhs,
        slack: rhs - lhs,
        combined_error: error,
        verdict,
        parameters,
        notes,
    })
}

fn random_directions<const D: usize>(count: usize, seed: u64) -> Vec<Vector<D>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = Vector::<D>::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let norm = v.norm();
        if norm > 1e-3 {
            out.push(v / norm);
        }
    }
    out
}

/// Curvatures of the complement at `(a, grad phi(-eta))` equal the negated,
/// reversed curvatures of the body at `(a, grad phi(eta))`. Curvatures of the
/// body come from the closed-form shape operator, those of the complement
/// from the projection route at a small inner radius.
pub fn complement_curvature_check<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    sample_count: usize,
    seed: u64,
) -> Result<IdentityReport> {
    let view = body.smooth()?;
    let r = COMPLEMENT_RADIUS * body_length_scale(body)?;
    let mut worst = 0.0f64;
    let mut worst_richardson = 0.0f64;
    for eta in random_directions::<D>(sample_count, seed) {
        let a = view.point(&eta)?;
        let outer = crate::measures::curvatures_at_normal(&view, spec, &eta)?;
        let outer: Vec<f64> = outer.kappa.iter().map(|k| k.reported()).collect();
        let u = spec.norm_jet(&(-eta))?.gradient;
        let inner = kappa_spectrum(Target::Complement(body), spec, &a, &u, r)?;
        worst_richardson = worst_richardson.max(inner.richardson_defect);
        let inner = inner.finite_kappa().ok_or(GeomError::IllConditioned { residual: f64::INFINITY })?;
        let scale = outer.iter().fold(0.0f64, |m, k| m.max(k.abs()));
        for i in 0..outer.len() {
            let defect = (inner[i] + outer[outer.len() - 1 - i]).abs() / scale;
            worst = worst.max(defect);
        }
    }
    let mut parameters = Parameters::new(body, spec);
    parameters.seed = Some(seed);
    Ok(IdentityReport {
        identity: "complement_curvature".into(),
        lhs: worst,
        rhs: COMPLEMENT_TOLERANCE,
        slack: COMPLEMENT_TOLERANCE - worst,
        combined_error: worst_richardson,
        verdict: if worst <= COMPLEMENT_TOLERANCE {
            Verdict::Holds
        } else {
            Verdict::Violated
        },
        parameters,
        notes: vec![format!("{sample_count} boundary points, inner radius {r:.6e}")],
    })
}

/// Heintze-Karcher inequality `(n + 1) V <= n int phi(eta) / e_1(kappa)`.
pub fn heintze_karcher_check<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    resolution: usize,
) -> Result<IdentityReport> {
    body.smooth()?;
    let n = D - 1;
    let rhs_of = |f: &BoundaryField<D>| -> Result<f64> {
        let mut min_h = f64::INFINITY;
        for k in &f.kappa {
            min_h = min_h.min(elem_sym(k, 1));
        }
        if !(min_h > 0.0) {
            return Err(GeomError::NonMeanConvex { value: min_h });
        }
        Ok(n as f64 * f.integrate(&Region::Whole, |i| f.phi[i] / elem_sym(&f.kappa[i], 1)))
    };
    let rhs = rhs_of(&BoundaryField::new(body, spec, resolution)?)?;
    let rhs_f = rhs_of(&BoundaryField::new(body, spec, refined(resolution))?)?;
    let lhs = (n + 1) as f64 * body.reference_volume()?;
    let error = (rhs - rhs_f).abs() + error_floor(&[lhs, rhs]);
    let mut parameters = Parameters::new(body, spec);
    parameters.resolutions = vec![resolution, refined(resolution)];
    Ok(IdentityReport {
        identity: "heintze_karcher".into(),
        lhs,
        rhs,
        slack: rhs - lhs,
        combined_error: error,
        verdict: Verdict::for_inequality(rhs - lhs, error),
        parameters,
        notes: Vec::new(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectorOptions {
    pub r: usize,
    pub tol_ratio: f64,
    pub tol_fit: f64,
    pub cap_fraction: f64,
    pub sampling: SamplingOptions,
    /// Quadrature resolution of the Heintze-Karcher step (smooth bodies).
    pub resolution: usize,
    pub fit_resolution: usize,
}

impl DetectorOptions {
    pub fn new<const D: usize>(samples: usize, seed: u64) -> Self {
        Self {
            r: 1,
            tol_ratio: DEFAULT_TOL_RATIO,
            tol_fit: DEFAULT_TOL_FIT,
            cap_fraction: DEFAULT_CAP_FRACTION,
            sampling: SamplingOptions::new(samples, seed),
            resolution: if D == 2 { 512 } else { 24 },
            fit_resolution: if D == 2 { FIT_RESOLUTION_2D } else { FIT_RESOLUTION_3D },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WulffVerdict {
    pub is_wulff: bool,
    pub ratio_deviation: f64,
    pub ratio_stderr: f64,
    pub region_ratios: Vec<f64>,
    pub hk_slack: Option<f64>,
    pub hk_error: Option<f64>,
    pub fitted_center: Vec<f64>,
    pub fitted_scale: f64,
    /// Max gauge deviation over the boundary nodes divided by the scale.
    pub fit_residual: f64,
}

/// Center and scale of the best-fitting `a + s W` to the boundary nodes.
///
/// The center minimizes `max_j |phi*(x_j - a) - median|` by a coordinate
/// pattern search started at the node centroid; the scale is the median.
pub fn fit_gauge<const D: usize>(spec: &NormSpec<D>, points: &[Vector<D>]) -> Result<(Vector<D>, f64, f64)> {
    let evaluate = |a: &Vector<D>| -> Result<(f64, f64)> {
        let mut values = points
            .iter()
            .map(|x| spec.dual_value(&(x - a)))
            .collect::<Result<Vec<f64>>>()?;
        values.sort_by(f64::total_cmp);
        let median = values[values.len() / 2];
        let spread = values.iter().fold(0.0f64, |m, v| m.max((v - median).abs()));
        Ok((spread, median))
    };
    let mut center = points.iter().sum::<Vector<D>>() / points.len() as f64;
    let (lo, hi) = points.iter().fold(
        (Vector::<D>::repeat(f64::INFINITY), Vector::<D>::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    );
    let diam = (hi - lo).norm();
    let mut step = 0.1 * diam;
    let (mut best, _) = evaluate(&center)?;
    while step > 1e-9 * diam {
        let mut improved = false;
        for i in 0..D {
            for sign in [1.0, -1.0] {
                let mut trial = center;
                trial[i] += sign * step;
                let (value, _) = evaluate(&trial)?;
                if value < best {
                    best = value;
                    center = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let (spread, scale) = evaluate(&center)?;
    Ok((center, scale, spread / scale))
}

/// Decides whether the body is a translated, scaled Wulff shape of `spec`:
/// the density ratio `C_{n-r} / C_n` must be constant over the partition
/// (Monte-Carlo Steiner fits) and the boundary must fit a gauge sphere.
pub fn wulff_detector<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    partition: Option<&[Region]>,
    options: &DetectorOptions,
) -> Result<WulffVerdict> {
    check_order::<D>(options.r)?;
    let default;
    let regions = match partition {
        Some(p) => p,
        None => {
            default = default_partition(body, options.cap_fraction)?;
            &default
        }
    };
    let spread = ratio_spread_mc(body, spec, options.r, regions, &options.sampling)?;
    let allowed = options.tol_ratio / 3.0;
    if !(spread.deviation_stderr <= allowed) {
        return Err(GeomError::InsufficientSamples {
            error: spread.deviation_stderr,
            allowed,
        });
    }
    let (hk_slack, hk_error) = match body.smooth_view() {
        Some(_) => {
            let hk = heintze_karcher_check(body, spec, options.resolution)?;
            (Some(hk.slack), Some(hk.combined_error))
        }
        None => (None, None),
    };
    let mesh = body.boundary_mesh(options.fit_resolution)?;
    let (center, scale, fit_residual) = fit_gauge(spec, &mesh.vertices)?;
    Ok(WulffVerdict {
        is_wulff: spread.deviation <= options.tol_ratio && fit_residual <= options.tol_fit,
        ratio_deviation: spread.deviation,
        ratio_stderr: spread.deviation_stderr,
        region_ratios: spread.ratios,
        hk_slack,
        hk_error,
        fitted_center: center.iter().copied().collect(),
        fitted_scale: scale,
        fit_residual,
    })
}
