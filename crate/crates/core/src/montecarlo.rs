//! Monte-Carlo tube volumes and weighted Steiner-polynomial fits.
//!
//! Samples are drawn in fixed-size chunks; chunk `k` uses a ChaCha8 stream
//! seeded by the master seed with stream id `k`. Chunk results are integer
//! counts, so totals are identical for any worker count or scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::body::ConvexBody;
use crate::error::{GeomError, Result};
use crate::linalg::{self, Vector};
use crate::norm::NormSpec;
use crate::projection::{distance_project, Target};
use crate::region::Region;

pub const DEFAULT_CHUNK_SIZE: usize = 1 << 14;
/// Relative fit residual above which a Steiner fit is marked failed.
pub const DEFAULT_FIT_RESIDUAL: f64 = 0.05;
/// Largest accepted condition number of the column-scaled normal matrix.
pub const MAX_DESIGN_CONDITION: f64 = 1e12;
/// Default radii, multiplied by the body's inradius-like scale.
pub const DEFAULT_RHO_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.4];

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for sub-stream `index` of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(master ^ mix(index.wrapping_add(1)))
}

#[derive(Debug, Clone, Serialize)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    #[serde(skip)]
    pub workers: Option<usize>,
    pub chunk_size: usize,
}

impl McOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            workers: None,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }

    pub fn with_workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }
}

/// Runs `f` on a pool with the requested number of workers.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| GeomError::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Sampling box of the tube `{delta <= rho}`: the body's bounding box pushed
/// out by `rho phi(+-e_i)`, the support function of `rho W`.
pub fn tube_box<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    rho: f64,
) -> Result<(Vector<D>, Vector<D>)> {
    let (mut lo, mut hi) = body.bounding_box()?;
    for i in 0..D {
        let e = linalg::axis::<D>(i);
        hi[i] += rho * spec.value(&e)?;
        lo[i] -= rho * spec.value(&(-e))?;
    }
    Ok((lo, hi))
}

/// Cheap lower bound on the distance from `x` to the body: the support gap
/// `(eta . x - h(eta)) / phi(eta)` for the radial direction (smooth bodies) or
/// the largest facet gap (polytopes).
fn distance_lower_bound<const D: usize>(body: &ConvexBody<D>, spec: &NormSpec<D>, x: &Vector<D>) -> Result<f64> {
    match body {
        ConvexBody::HPolytope(p) => p
            .facets()
            .iter()
            .map(|f| Ok((f.normal.dot(x) - f.offset) / spec.value(&f.normal)?))
            .try_fold(f64::NEG_INFINITY, |acc, g: Result<f64>| Ok(acc.max(g?))),
        _ => {
            let view = body.smooth_view().expect("smooth body");
            let y = x - view.center;
            let r = y.norm();
            if r == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let eta = y / r;
            Ok((r - view.scale * view.gauge.value(&eta)?) / spec.value(&eta)?)
        }
    }
}

/// Hit counts of one tube radius for several regions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeCounts {
    pub rho: f64,
    pub samples: usize,
    pub box_volume: f64,
    pub hits: Vec<u64>,
}

impl TubeCounts {
    /// Volume estimate and binomial standard error for region `k`.
    pub fn estimate(&self, k: usize) -> (f64, f64) {
        let n = self.samples as f64;
        let p = self.hits[k] as f64 / n;
        (self.box_volume * p, self.box_volume * (p * (1.0 - p) / n).sqrt())
    }
}

/// Counts samples with `0 < delta(x) <= rho` and foot in each region.
pub fn tube_counts<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    rho: f64,
    regions: &[Region],
    options: &McOptions,
) -> Result<TubeCounts> {
    if !(rho > 0.0) {
        return Err(GeomError::InvalidArgument(format!("tube radius must be positive, got {rho}")));
    }
    for r in regions {
        r.validate::<D>()?;
    }
    let chunk = options.chunk_size.max(1);
    let (lo, hi) = tube_box(body, spec, rho)?;
    let width = hi - lo;
    let box_volume = width.iter().product::<f64>();
    let chunks = options.samples.div_ceil(chunk);
    let run_chunk = |c: usize| -> Result<Vec<u64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(c as u64);
        let count = chunk.min(options.samples - c * chunk);
        let mut hits = vec![0u64; regions.len()];
        for _ in 0..count {
            let x = lo + Vector::<D>::from_fn(|i, _| rng.random::<f64>() * width[i]);
            if distance_lower_bound(body, spec, &x)? > rho || body.contains(&x) {
                continue;
            }
            let p = distance_project(Target::Convex(body), spec, &x)?;
            if p.distance <= rho {
                for (h, r) in hits.iter_mut().zip(regions) {
                    if r.contains_foot(&p.foot, p.face) {
                        *h += 1;
                    }
                }
            }
        }
        Ok(hits)
    };
    let per_chunk: Vec<Result<Vec<u64>>> =
        with_workers(options.workers, || (0..chunks).into_par_iter().map(run_chunk).collect())?;
    let mut hits = vec![0u64; regions.len()];
    for r in per_chunk {
        for (h, c) in hits.iter_mut().zip(r?) {
            *h += c;
        }
    }
    Ok(TubeCounts {
        rho,
        samples: options.samples,
        box_volume,
        hits,
    })
}

/// Volume of `{x : 0 < delta(x) <= rho, foot in region}` with its standard error.
pub fn tube_volume_mc<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    rho: f64,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let counts = tube_counts(body, spec, rho, std::slice::from_ref(region), &McOptions::new(samples, seed))?;
    Ok(counts.estimate(0))
}

/// Weighted least-squares Steiner polynomial `sum_m c_m rho^{D-m}` for one region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteinerFit {
    pub region: Region,
    /// `c_0, ..., c_n`, the coefficients of `rho^{n+1}, ..., rho`.
    pub coefficients: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Largest relative deviation between measured and fitted volumes.
    pub residual: f64,
    pub failed: bool,
    pub rho_grid: Vec<f64>,
    pub volumes: Vec<f64>,
    pub volume_stderr: Vec<f64>,
    pub samples_per_rho: usize,
    pub seed: u64,
}

fn fit_polynomial<const D: usize>(
    rho: &[f64],
    volumes: &[f64],
    se: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let k = rho.len();
    let columns = D;
    let design = nalgebra::DMatrix::from_fn(k, columns, |i, m| rho[i].powi((D - m) as i32));
    let col_scale: Vec<f64> = (0..columns)
        .map(|m| design.column(m).norm())
        .collect();
    if col_scale.iter().any(|c| !(*c > 0.0)) {
        return Err(GeomError::SingularDesign);
    }
    let z = nalgebra::DMatrix::from_fn(k, columns, |i, m| design[(i, m)] / col_scale[m]);
    let w: Vec<f64> = se.iter().map(|s| 1.0 / (s * s)).collect();
    let normal = nalgebra::DMatrix::from_fn(columns, columns, |a, b| {
        (0..k).map(|i| w[i] * z[(i, a)] * z[(i, b)]).sum::<f64>()
    });
    let rhs = nalgebra::DVector::from_fn(columns, |a, _| (0..k).map(|i| w[i] * z[(i, a)] * volumes[i]).sum::<f64>());
    // Condition of the normal matrix after equilibrating its diagonal.
    let d: Vec<f64> = (0..columns).map(|a| normal[(a, a)].sqrt()).collect();
    let equilibrated = nalgebra::DMatrix::from_fn(columns, columns, |a, b| normal[(a, b)] / (d[a] * d[b]));
    let eig = equilibrated.symmetric_eigen().eigenvalues;
    let (min, max) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(min > 0.0) || max / min > MAX_DESIGN_CONDITION {
        return Err(GeomError::SingularDesign);
    }
    let inv = normal.try_inverse().ok_or(GeomError::SingularDesign)?;
    let coef_z = &inv * rhs;
    let coefficients: Vec<f64> = (0..columns).map(|m| coef_z[m] / col_scale[m]).collect();
    let stderr: Vec<f64> = (0..columns)
        .map(|m| inv[(m, m)].max(0.0).sqrt() / col_scale[m])
        .collect();
    let residual = (0..k)
        .map(|i| {
            let fit: f64 = (0..columns).map(|m| coefficients[m] * design[(i, m)]).sum();
            let diff = (volumes[i] - fit).abs();
            if volumes[i].abs() > 0.0 {
                diff / volumes[i].abs()
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    Ok((coefficients, stderr, residual))
}

/// Steiner fits for several regions sharing the same samples. The radius with
/// grid index `k` is sampled with seed `derive_seed(options.seed, k)`.
pub fn steiner_fit_family<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    regions: &[Region],
    rho_grid: &[f64],
    options: &McOptions,
    residual_threshold: f64,
) -> Result<Vec<SteinerFit>> {
    let mut distinct: Vec<f64> = rho_grid.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < D || distinct.iter().any(|r| !(*r > 0.0)) {
        return Err(GeomError::SingularDesign);
    }
    let counts = rho_grid
        .iter()
        .enumerate()
        .map(|(k, &rho)| {
            let opts = McOptions {
                seed: derive_seed(options.seed, k as u64),
                ..options.clone()
            };
            tube_counts(body, spec, rho, regions, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut fits = Vec::with_capacity(regions.len());
    for (j, region) in regions.iter().enumerate() {
        let mut volumes = Vec::new();
        let mut se = Vec::new();
        for c in &counts {
            let (v, s) = c.estimate(j);
            volumes.push(v);
            // A zero count carries the resolution of a single hit.
            se.push(s.max(c.box_volume / c.samples as f64));
        }
        let (coefficients, stderr, residual) = fit_polynomial::<D>(rho_grid, &volumes, &se)?;
        fits.push(SteinerFit {
            region: region.clone(),
            coefficients,
            stderr,
            residual,
            failed: residual > residual_threshold,
            rho_grid: rho_grid.to_vec(),
            volumes,
            volume_stderr: se,
            samples_per_rho: options.samples,
            seed: options.seed,
        });
    }
    Ok(fits)
}

pub fn steiner_fit<const D: usize>(
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    region: &Region,
    rho_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<SteinerFit> {
    let fits = steiner_fit_family(
        body,
        spec,
        std::slice::from_ref(region),
        rho_grid,
        &McOptions::new(samples, seed),
        DEFAULT_FIT_RESIDUAL,
    )?;
    Ok(fits.into_iter().next().unwrap())
}

/// Length scale for default radii: the radius of the ball of equal volume.
pub fn body_length_scale<const D: usize>(body: &ConvexBody<D>) -> Result<f64> {
    Ok((body.reference_volume()? / linalg::unit_ball_volume(D)).powf(1.0 / D as f64))
}
