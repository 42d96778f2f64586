//! Run configuration, task orchestration and report files.
//!
//! A run reads a [`RunConfig`], validates every task, executes the tasks in
//! order and writes `<task>-<index>.json`, `<task>-<index>.csv` and
//! `summary.csv` into the output directory. CSV columns are
//! `task, body, norm, key, value, stderr, verdict`; numbers carry nine
//! significant digits. JSON numbers use the shortest representation that
//! parses back to the same double.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::body::{BodyJson, ConvexBody};
use crate::error::GeomError;
use crate::identities::{
    complement_curvature_check, heintze_karcher_check, lambda_bound_check, minkowski_check, wulff_detector,
    DetectorOptions, IdentityReport, Parameters, SamplingOptions, Verdict, WulffVerdict, DEFAULT_TOL_FIT,
    DEFAULT_TOL_RATIO,
};
use crate::measures::{
    anisotropic_perimeter, polygon_sector_exact, MeasureEstimate, Method,
};
use crate::montecarlo::{
    body_length_scale, steiner_fit_family, with_workers, McOptions, SteinerFit, DEFAULT_FIT_RESIDUAL,
    DEFAULT_RHO_GRID,
};
use crate::norm::{CalculusReport, NormSpec, NormSpecJson, MIN_ELLIPTICITY};
use crate::region::Region;
use crate::wulff::{default_resolution, wulff_mesh, wulff_volume, MIN_RESOLUTION};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "WULFFKIT_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "wulffkit-out";
pub const DEFAULT_SEED: u64 = 0;
/// Samples per radius of Steiner fits.
pub const DEFAULT_SAMPLES: usize = 1_000_000;
/// Samples per radius of the detector.
pub const DEFAULT_DETECTOR_SAMPLES_2D: usize = 1_000_000;
pub const DEFAULT_DETECTOR_SAMPLES_3D: usize = 8_000_000;
/// Direction samples of the norm check.
pub const DEFAULT_NORM_SAMPLES: usize = 2000;
/// Boundary points of the complement curvature check.
pub const DEFAULT_COMPLEMENT_POINTS: usize = 20;
/// Acceptance thresholds of the norm calculus check.
pub const GRADIENT_TOL: f64 = 1e-6;
pub const HESSIAN_TOL: f64 = 1e-4;
pub const INVOLUTION_TOL: f64 = 1e-8;
pub const EULER_TOL: f64 = 1e-9;

pub const fn default_direct_resolution<const D: usize>() -> usize {
    if D == 2 {
        1024
    } else {
        32
    }
}

#[derive(Debug, Clone, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("conflicting values for {key}: flag {flag}, config {config}")]
    Conflict { key: String, flag: String, config: String },
    #[error("task {index} ({task}) failed: {source}")]
    Task {
        task: String,
        index: usize,
        #[source]
        source: GeomError,
    },
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Conflict { .. } => 2,
            Self::Task { .. } | Self::Io { .. } => 1,
        }
    }
}

/// Defaults shared by all tasks; every field can be overridden per task.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Absolute tube radii; by default `{0.05, 0.1, 0.2, 0.4}` times the
    /// radius of the ball with the body's volume.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_fit: Option<f64>,
}

impl Defaults {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// Named boundary partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Partition {
    Whole,
    /// Four quadrant caps around the bounding-box center (first two axes).
    Quadrants,
    /// `2d` axis caps at half the half-width.
    AxisCaps,
    /// Facets and, in 2D, vertices of a polytope.
    Faces,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionSpec {
    Named(Partition),
    List(Vec<Region>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Direct quadrature for smooth bodies, exact sectors for polygon faces,
    /// Steiner fits otherwise.
    Auto,
    Direct,
    SteinerMc,
    SectorExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityKind {
    Minkowski,
    LambdaBound,
    ComplementCurvature,
    HeintzeKarcher,
}

const ALL_IDENTITIES: [IdentityKind; 4] = [
    IdentityKind::Minkowski,
    IdentityKind::LambdaBound,
    IdentityKind::ComplementCurvature,
    IdentityKind::HeintzeKarcher,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    NormCheck {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
    },
    WulffInfo {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
    },
    TubeFit {
        /// Indices into `bodies`; all bodies when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bodies: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        regions: Option<RegionSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho_grid: Option<Vec<f64>>,
    },
    Measures {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bodies: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        regions: Option<RegionSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        method: Option<MethodChoice>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho_grid: Option<Vec<f64>>,
    },
    Identities {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bodies: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        checks: Option<Vec<IdentityKind>>,
        /// Orders of the Minkowski and lambda checks; `1..=n` when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<usize>,
    },
    DetectWulff {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bodies: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        partition: Option<RegionSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol_ratio: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol_fit: Option<f64>,
    },
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::NormCheck { .. } => "norm-check",
            Self::WulffInfo { .. } => "wulff-info",
            Self::TubeFit { .. } => "tube-fit",
            Self::Measures { .. } => "measures",
            Self::Identities { .. } => "identities",
            Self::DetectWulff { .. } => "detect-wulff",
        }
    }

    fn body_selection(&self) -> Option<&Vec<usize>> {
        match self {
            Self::TubeFit { bodies, .. }
            | Self::Measures { bodies, .. }
            | Self::Identities { bodies, .. }
            | Self::DetectWulff { bodies, .. } => bodies.as_ref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    pub norm: NormSpecJson,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bodies: Vec<BodyJson>,
    pub tasks: Vec<TaskSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Worker threads of the Monte-Carlo routines; outputs do not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Defaults::is_empty")]
    pub defaults: Defaults,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Dimension stated or implied by the norm and bodies; they must agree.
    pub fn resolve_dimension(&self) -> Result<usize, CliError> {
        let mut hints: Vec<(String, usize)> = Vec::new();
        if let Some(d) = self.dimension {
            hints.push(("dimension".into(), d));
        }
        if let Some(d) = self.norm.dimension_hint() {
            hints.push(("norm".into(), d));
        }
        for (i, b) in self.bodies.iter().enumerate() {
            if let Some(d) = b.dimension_hint() {
                hints.push((format!("bodies[{i}]"), d));
            }
        }
        let Some((_, d)) = hints.first().cloned() else {
            return Err(CliError::Config("cannot infer the dimension; set \"dimension\"".into()));
        };
        if let Some((what, other)) = hints.iter().find(|(_, o)| *o != d) {
            return Err(CliError::Config(format!("{what} has dimension {other}, expected {d}")));
        }
        if d != 2 && d != 3 {
            return Err(CliError::Config(format!("dimension must be 2 or 3, got {d}")));
        }
        Ok(d)
    }
}

/// Command-line overrides; each must agree with the config when both are set.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

fn merge<T: PartialEq + std::fmt::Debug + Clone>(key: &str, flag: &Option<T>, config: &mut Option<T>) -> Result<(), CliError> {
    match (flag, config.as_ref()) {
        (Some(f), Some(c)) if f != c => Err(CliError::Conflict {
            key: key.into(),
            flag: format!("{f:?}"),
            config: format!("{c:?}"),
        }),
        (Some(f), None) => {
            *config = Some(f.clone());
            Ok(())
        }
        _ => Ok(()),
    }
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) -> Result<(), CliError> {
        merge("seed", &self.seed, &mut config.seed)?;
        merge("output_dir", &self.output_dir, &mut config.output_dir)?;
        merge("workers", &self.workers, &mut config.workers)?;
        Ok(())
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub task: String,
    pub body: String,
    pub norm: String,
    pub key: String,
    pub value: f64,
    pub stderr: f64,
    pub verdict: String,
}

/// Result of one task: its JSON record, CSV rows and whether anything failed.
#[derive(Debug, Clone)]
pub struct TaskOutput {
    pub name: String,
    pub json: serde_json::Value,
    pub rows: Vec<Row>,
    pub failed: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub outputs: Vec<TaskOutput>,
    pub errors: Vec<CliError>,
}

impl RunSummary {
    /// 0 iff no task failed or reported a violation.
    pub fn exit_code(&self) -> i32 {
        if self.errors.is_empty() && self.outputs.iter().all(|o| !o.failed) {
            0
        } else {
            1
        }
    }
}

/// Formats a number with nine significant digits.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else {
        format!("{v}")
    }
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<(), CliError> {
    let io = |e: &dyn std::fmt::Display| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(&e))?;
    w.write_record(["task", "body", "norm", "key", "value", "stderr", "verdict"])
        .map_err(|e| io(&e))?;
    for r in rows {
        w.write_record([
            r.task.as_str(),
            r.body.as_str(),
            r.norm.as_str(),
            r.key.as_str(),
            &format_number(r.value),
            &format_number(r.stderr),
            r.verdict.as_str(),
        ])
        .map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Output directory: config (after overrides), then the environment, then the default.
pub fn output_dir(config: &RunConfig) -> PathBuf {
    config
        .output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// Validates and executes a configuration, writing all report files.
///
/// Configuration problems are returned as `Err` before anything runs; task
/// failures are collected in the summary.
pub fn run_config(config: &RunConfig) -> Result<RunSummary, CliError> {
    match config.resolve_dimension()? {
        2 => run_dim::<2>(config),
        _ => run_dim::<3>(config),
    }
}

struct Context<const D: usize> {
    spec: NormSpec<D>,
    norm_label: String,
    bodies: Vec<(String, ConvexBody<D>)>,
    seed: u64,
    defaults: Defaults,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn run_dim<const D: usize>(config: &RunConfig) -> Result<RunSummary, CliError> {
    let spec = NormSpec::<D>::from_json(&config.norm).map_err(|e| config_err(format!("norm: {e}")))?;
    let bodies = config
        .bodies
        .iter()
        .enumerate()
        .map(|(i, json)| {
            let body = ConvexBody::<D>::from_json(json, Some(&spec)).map_err(|e| config_err(format!("bodies[{i}]: {e}")))?;
            let label = json.name.clone().unwrap_or_else(|| body.label());
            Ok((label, body))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let ctx = Context {
        norm_label: spec.label(),
        spec,
        bodies,
        seed: config.seed.unwrap_or(DEFAULT_SEED),
        defaults: config.defaults.clone(),
    };
    for (index, task) in config.tasks.iter().enumerate() {
        validate_task(&ctx, task).map_err(|e| config_err(format!("task {index} ({}): {e}", task.name())))?;
    }
    let dir = output_dir(config);
    fs::create_dir_all(&dir).map_err(|e| CliError::Io {
        path: dir.clone(),
        message: e.to_string(),
    })?;
    let mut outputs = Vec::new();
    let mut errors = Vec::new();
    let mut summary_rows = Vec::new();
    for (index, task) in config.tasks.iter().enumerate() {
        let result = with_workers(config.workers, || execute_task(&ctx, task, index))
            .and_then(|r| r)
            .map_err(|source| CliError::Task {
                task: task.name().into(),
                index,
                source,
            });
        match result {
            Ok(out) => {
                let stem = format!("{}-{index}", out.name);
                write_json(&dir.join(format!("{stem}.json")), &out.json)?;
                write_csv(&dir.join(format!("{stem}.csv")), &out.rows)?;
                summary_rows.extend(out.rows.iter().cloned());
                outputs.push(out);
            }
            Err(e) => {
                summary_rows.push(Row {
                    task: task.name().into(),
                    body: String::new(),
                    norm: ctx.norm_label.clone(),
                    key: "error".into(),
                    value: f64::NAN,
                    stderr: f64::NAN,
                    verdict: "failed".into(),
                });
                errors.push(e);
            }
        }
    }
    write_csv(&dir.join("summary.csv"), &summary_rows)?;
    Ok(RunSummary {
        output_dir: dir,
        outputs,
        errors,
    })
}

fn check(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn validate_grid<const D: usize>(grid: &Option<Vec<f64>>) -> Result<(), String> {
    if let Some(g) = grid {
        let mut distinct = g.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        check(
            distinct.len() >= D && g.iter().all(|r| r.is_finite() && *r > 0.0),
            || format!("rho_grid needs at least {D} distinct positive radii"),
        )?;
    }
    Ok(())
}

fn validate_regions<const D: usize>(ctx: &Context<D>, spec: &Option<RegionSpec>, bodies: &[usize]) -> Result<(), String> {
    match spec {
        Some(RegionSpec::List(list)) => {
            for r in list {
                r.validate::<D>().map_err(|e| e.to_string())?;
            }
            check(!list.is_empty(), || "empty region list".into())
        }
        Some(RegionSpec::Named(Partition::Faces)) => check(
            bodies.iter().all(|&b| ctx.bodies[b].1.as_polytope().is_some()),
            || "the faces partition needs polytope bodies".into(),
        ),
        _ => Ok(()),
    }
}

fn selected<const D: usize>(ctx: &Context<D>, task: &TaskSpec) -> Vec<usize> {
    task.body_selection()
        .cloned()
        .unwrap_or_else(|| (0..ctx.bodies.len()).collect())
}

fn validate_task<const D: usize>(ctx: &Context<D>, task: &TaskSpec) -> Result<(), String> {
    let n = D - 1;
    let bodies = selected(ctx, task);
    for &b in &bodies {
        check(b < ctx.bodies.len(), || format!("body index {b} out of range"))?;
    }
    let positive = |v: Option<usize>, what: &str| check(v.is_none_or(|v| v > 0), || format!("{what} must be positive"));
    let resolution = |v: Option<usize>| {
        check(v.is_none_or(|v| v >= MIN_RESOLUTION), || format!("resolution must be at least {MIN_RESOLUTION}"))
    };
    positive(ctx.defaults.samples, "samples")?;
    resolution(ctx.defaults.resolution)?;
    validate_grid::<D>(&ctx.defaults.rho_grid)?;
    match task {
        TaskSpec::NormCheck { samples } => check(samples.is_none_or(|s| s >= 100), || "norm-check needs at least 100 samples".into()),
        TaskSpec::WulffInfo { resolution: r } => resolution(*r),
        TaskSpec::TubeFit {
            regions, samples, rho_grid, ..
        } => {
            check(!bodies.is_empty(), || "no bodies selected".into())?;
            positive(*samples, "samples")?;
            validate_grid::<D>(rho_grid)?;
            validate_regions(ctx, regions, &bodies)
        }
        TaskSpec::Measures {
            regions,
            method,
            resolution: r,
            samples,
            rho_grid,
            ..
        } => {
            check(!bodies.is_empty(), || "no bodies selected".into())?;
            resolution(*r)?;
            positive(*samples, "samples")?;
            validate_grid::<D>(rho_grid)?;
            validate_regions(ctx, regions, &bodies)?;
            match method {
                Some(MethodChoice::Direct) => check(
                    bodies.iter().all(|&b| ctx.bodies[b].1.smooth_view().is_some()),
                    || "direct quadrature needs smooth bodies".into(),
                ),
                Some(MethodChoice::SectorExact) => check(
                    D == 2 && bodies.iter().all(|&b| ctx.bodies[b].1.as_polytope().is_some()),
                    || "exact sectors need polygons".into(),
                ),
                _ => Ok(()),
            }
        }
        TaskSpec::Identities {
            r, resolution: res, samples, points, ..
        } => {
            check(!bodies.is_empty(), || "no bodies selected".into())?;
            if let Some(r) = r {
                check(r.iter().all(|&r| (1..=n).contains(&r)), || format!("r must lie in 1..={n}"))?;
            }
            resolution(*res)?;
            positive(*samples, "samples")?;
            positive(*points, "points")
        }
        TaskSpec::DetectWulff {
            r,
            partition,
            samples,
            tol_ratio,
            tol_fit,
            ..
        } => {
            check(!bodies.is_empty(), || "no bodies selected".into())?;
            check(r.is_none_or(|r| (1..=n).contains(&r)), || format!("r must lie in 1..={n}"))?;
            positive(*samples, "samples")?;
            check(
                tol_ratio.is_none_or(|t| t > 0.0) && tol_fit.is_none_or(|t| t > 0.0),
                || "tolerances must be positive".into(),
            )?;
            validate_regions(ctx, partition, &bodies)
        }
    }
}

fn regions_for<const D: usize>(body: &ConvexBody<D>, spec: &Option<RegionSpec>) -> Result<Vec<Region>, GeomError> {
    match spec {
        None | Some(RegionSpec::Named(Partition::Whole)) => Ok(vec![Region::Whole]),
        Some(RegionSpec::List(list)) => Ok(list.clone()),
        Some(RegionSpec::Named(Partition::Quadrants)) => {
            let (lo, hi) = body.bounding_box()?;
            let c: Vec<f64> = ((lo + hi) * 0.5).iter().copied().collect();
            Ok(Region::quadrants(&c))
        }
        Some(RegionSpec::Named(Partition::AxisCaps)) => {
            crate::identities::default_partition(body, crate::identities::DEFAULT_CAP_FRACTION)
        }
        Some(RegionSpec::Named(Partition::Faces)) => {
            let p = body.as_polytope().ok_or(GeomError::NotPolygon)?;
            let mut out: Vec<Region> = (0..p.facets().len()).map(|index| Region::Facet { index }).collect();
            if D == 2 {
                out.extend((0..p.vertices().len()).map(|index| Region::Vertex { index }));
            }
            Ok(out)
        }
    }
}

fn rho_grid_for<const D: usize>(body: &ConvexBody<D>, grid: &Option<Vec<f64>>) -> Result<Vec<f64>, GeomError> {
    match grid {
        Some(g) => Ok(g.clone()),
        None => {
            let scale = body_length_scale(body)?;
            Ok(DEFAULT_RHO_GRID.iter().map(|g| g * scale).collect())
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable report")
}

impl<const D: usize> Context<D> {
    fn row(&self, task: &str, body: &str, key: String, value: f64, stderr: f64, verdict: &str) -> Row {
        Row {
            task: task.into(),
            body: body.into(),
            norm: self.norm_label.clone(),
            key,
            value,
            stderr,
            verdict: verdict.into(),
        }
    }

    fn samples(&self, task: Option<usize>) -> usize {
        task.or(self.defaults.samples).unwrap_or(DEFAULT_SAMPLES)
    }

    fn resolution(&self, task: Option<usize>) -> usize {
        task.or(self.defaults.resolution).unwrap_or(default_direct_resolution::<D>())
    }

    fn grid(&self, task: &Option<Vec<f64>>) -> Option<Vec<f64>> {
        task.clone().or_else(|| self.defaults.rho_grid.clone())
    }

    fn fit_residual(&self) -> f64 {
        self.defaults.fit_residual.unwrap_or(DEFAULT_FIT_RESIDUAL)
    }
}

#[derive(Serialize)]
struct BodyRecord<T: Serialize> {
    body: String,
    results: T,
}

fn execute_task<const D: usize>(ctx: &Context<D>, task: &TaskSpec, index: usize) -> Result<TaskOutput, GeomError> {
    let name = task.name();
    let mut rows = Vec::new();
    let mut failed = false;
    let json = match task {
        TaskSpec::NormCheck { samples } => {
            let samples = samples.unwrap_or(DEFAULT_NORM_SAMPLES);
            let ellipticity = ctx.spec.ellipticity_estimate(samples)?;
            let calculus: CalculusReport = ctx.spec.calculus_check(samples.min(500), 1.0)?;
            let pass = |ok: bool| if ok { "pass" } else { "fail" };
            let checks = [
                ("ellipticity", ellipticity, ellipticity >= MIN_ELLIPTICITY),
                ("gradient_error", calculus.gradient_error, calculus.gradient_error <= GRADIENT_TOL),
                ("hessian_error", calculus.hessian_error, calculus.hessian_error <= HESSIAN_TOL),
                ("involution_error", calculus.involution_error, calculus.involution_error <= INVOLUTION_TOL),
                ("euler_error", calculus.euler_error, calculus.euler_error <= EULER_TOL),
            ];
            for (key, value, ok) in checks {
                failed |= !ok;
                rows.push(ctx.row(name, "", key.into(), value, 0.0, pass(ok)));
            }
            serde_json::json!({
                "norm": ctx.spec.to_json(),
                "ellipticity": ellipticity,
                "calculus": calculus,
            })
        }
        TaskSpec::WulffInfo { resolution } => {
            let res = resolution.unwrap_or(default_resolution::<D>());
            let volume = wulff_volume(&ctx.spec, res)?;
            let area = wulff_mesh(&ctx.spec, res)?.total_weight();
            let unit = ConvexBody::wulff(crate::linalg::Vector::<D>::zeros(), 1.0, ctx.spec.clone())?;
            let perimeter = anisotropic_perimeter(&unit, &ctx.spec, res)?;
            rows.push(ctx.row(name, "W", "volume".into(), volume, 0.0, ""));
            rows.push(ctx.row(name, "W", "area".into(), area, 0.0, ""));
            rows.push(ctx.row(name, "W", "anisotropic_perimeter".into(), perimeter, 0.0, ""));
            serde_json::json!({
                "norm": ctx.spec.to_json(),
                "resolution": res,
                "volume": volume,
                "area": area,
                "anisotropic_perimeter": perimeter,
            })
        }
        TaskSpec::TubeFit {
            regions,
            samples,
            rho_grid,
            ..
        } => {
            let mut records = Vec::new();
            for b in selected(ctx, task) {
                let (label, body) = &ctx.bodies[b];
                let regions = regions_for(body, regions)?;
                let grid = rho_grid_for(body, &ctx.grid(rho_grid))?;
                let options = McOptions::new(ctx.samples(*samples), crate::montecarlo::derive_seed(ctx.seed, index as u64));
                let fits = steiner_fit_family(body, &ctx.spec, &regions, &grid, &options, ctx.fit_residual())?;
                for fit in &fits {
                    failed |= fit.failed;
                    let verdict = if fit.failed { "failed" } else { "pass" };
                    for (m, (c, s)) in fit.coefficients.iter().zip(&fit.stderr).enumerate() {
                        rows.push(ctx.row(name, label, format!("c{m}@{}", fit.region.label()), *c, *s, verdict));
                    }
                }
                records.push(BodyRecord::<Vec<SteinerFit>> {
                    body: label.clone(),
                    results: fits,
                });
            }
            to_value(&records)
        }
        TaskSpec::Measures {
            regions,
            method,
            resolution,
            samples,
            rho_grid,
            ..
        } => {
            let mut records = Vec::new();
            for b in selected(ctx, task) {
                let (label, body) = &ctx.bodies[b];
                let regions = regions_for(body, regions)?;
                let choice = method.unwrap_or(MethodChoice::Auto);
                let faces_only = regions
                    .iter()
                    .all(|r| matches!(r, Region::Whole | Region::Facet { .. } | Region::Vertex { .. }));
                let route = match choice {
                    MethodChoice::Auto if body.smooth_view().is_some() => Method::Direct,
                    MethodChoice::Auto if D == 2 && faces_only => Method::SectorExact,
                    MethodChoice::Auto | MethodChoice::SteinerMc => Method::SteinerMc,
                    MethodChoice::Direct => Method::Direct,
                    MethodChoice::SectorExact => Method::SectorExact,
                };
                let mut estimates: Vec<MeasureEstimate> = Vec::new();
                match route {
                    Method::Direct => {
                        let res = ctx.resolution(*resolution);
                        let coarse = crate::measures::BoundaryField::new(body, &ctx.spec, res)?;
                        let fine = crate::measures::BoundaryField::new(body, &ctx.spec, crate::measures::refined(res))?;
                        for region in &regions {
                            for m in 0..D {
                                estimates.push(crate::measures::measure_from_fields(&coarse, &fine, m, region)?);
                            }
                        }
                    }
                    Method::SectorExact => {
                        for region in &regions {
                            estimates.extend(polygon_sector_exact(body, &ctx.spec, region)?);
                        }
                    }
                    Method::SteinerMc => {
                        let grid = rho_grid_for(body, &ctx.grid(rho_grid))?;
                        let options =
                            McOptions::new(ctx.samples(*samples), crate::montecarlo::derive_seed(ctx.seed, index as u64));
                        let fits = steiner_fit_family(body, &ctx.spec, &regions, &grid, &options, ctx.fit_residual())?;
                        for fit in fits {
                            failed |= fit.failed;
                            for m in 0..D {
                                estimates.push(MeasureEstimate {
                                    order: m,
                                    region: fit.region.clone(),
                                    value: fit.coefficients[m],
                                    stderr: fit.stderr[m],
                                    method: Method::SteinerMc,
                                });
                            }
                        }
                    }
                }
                for e in &estimates {
                    let method = to_value(&e.method);
                    rows.push(ctx.row(
                        name,
                        label,
                        format!("C{}@{}", e.order, e.region.label()),
                        e.value,
                        e.stderr,
                        method.as_str().unwrap_or(""),
                    ));
                }
                records.push(BodyRecord {
                    body: label.clone(),
                    results: estimates,
                });
            }
            to_value(&records)
        }
        TaskSpec::Identities {
            checks,
            r,
            resolution,
            samples,
            points,
            ..
        } => {
            let orders: Vec<usize> = r.clone().unwrap_or_else(|| (1..D).collect());
            let checks = checks.clone().unwrap_or_else(|| ALL_IDENTITIES.to_vec());
            let mut records = Vec::new();
            for b in selected(ctx, task) {
                let (label, body) = &ctx.bodies[b];
                let res = ctx.resolution(*resolution);
                let seed = crate::montecarlo::derive_seed(ctx.seed, index as u64);
                let sampling = SamplingOptions {
                    mc: McOptions::new(ctx.samples(*samples), seed),
                    rho_grid: DEFAULT_RHO_GRID.to_vec(),
                };
                let mut reports: Vec<IdentityReport> = Vec::new();
                for kind in &checks {
                    let mut run = |identity: String, f: &dyn Fn() -> crate::error::Result<IdentityReport>| -> crate::error::Result<()> {
                        match f() {
                            Ok(rep) => reports.push(rep),
                            Err(GeomError::NotSmoothVariant) => reports.push(skipped(body, &ctx.spec, identity, "needs a smooth body")),
                            Err(e) => return Err(e),
                        }
                        Ok(())
                    };
                    match kind {
                        IdentityKind::Minkowski => {
                            for &r in &orders {
                                run(format!("minkowski_r{r}"), &|| minkowski_check(body, &ctx.spec, r, res))?;
                            }
                        }
                        IdentityKind::LambdaBound => {
                            for &r in &orders {
                                run(format!("lambda_bound_r{r}"), &|| lambda_bound_check(body, &ctx.spec, r, res, &sampling))?;
                            }
                        }
                        IdentityKind::ComplementCurvature => run("complement_curvature".into(), &|| {
                            complement_curvature_check(body, &ctx.spec, points.unwrap_or(DEFAULT_COMPLEMENT_POINTS), seed)
                        })?,
                        IdentityKind::HeintzeKarcher => {
                            run("heintze_karcher".into(), &|| heintze_karcher_check(body, &ctx.spec, res))?
                        }
                    }
                }
                for rep in &reports {
                    failed |= rep.verdict == Verdict::Violated;
                    rows.push(ctx.row(name, label, rep.identity.clone(), rep.slack, rep.combined_error, rep.verdict.as_str()));
                }
                records.push(BodyRecord {
                    body: label.clone(),
                    results: reports,
                });
            }
            to_value(&records)
        }
        TaskSpec::DetectWulff {
            r,
            partition,
            samples,
            tol_ratio,
            tol_fit,
            ..
        } => {
            let mut records = Vec::new();
            for b in selected(ctx, task) {
                let (label, body) = &ctx.bodies[b];
                let default_samples = if D == 2 { DEFAULT_DETECTOR_SAMPLES_2D } else { DEFAULT_DETECTOR_SAMPLES_3D };
                let seed = crate::montecarlo::derive_seed(ctx.seed, index as u64);
                let mut options = DetectorOptions::new::<D>(samples.or(ctx.defaults.samples).unwrap_or(default_samples), seed);
                options.r = r.unwrap_or(1);
                options.tol_ratio = tol_ratio.or(ctx.defaults.tol_ratio).unwrap_or(DEFAULT_TOL_RATIO);
                options.tol_fit = tol_fit.or(ctx.defaults.tol_fit).unwrap_or(DEFAULT_TOL_FIT);
                let regions = match partition {
                    None => None,
                    some => Some(regions_for(body, some)?),
                };
                let verdict: WulffVerdict = wulff_detector(body, &ctx.spec, regions.as_deref(), &options)?;
                let class = if verdict.is_wulff { "wulff" } else { "not_wulff" };
                rows.push(ctx.row(name, label, "is_wulff".into(), f64::from(u8::from(verdict.is_wulff)), 0.0, class));
                rows.push(ctx.row(name, label, "ratio_deviation".into(), verdict.ratio_deviation, verdict.ratio_stderr, class));
                rows.push(ctx.row(name, label, "fit_residual".into(), verdict.fit_residual, 0.0, class));
                rows.push(ctx.row(name, label, "fitted_scale".into(), verdict.fitted_scale, 0.0, class));
                for (i, c) in verdict.fitted_center.iter().enumerate() {
                    rows.push(ctx.row(name, label, format!("fitted_center_{i}"), *c, 0.0, class));
                }
                if let (Some(s), Some(e)) = (verdict.hk_slack, verdict.hk_error) {
                    rows.push(ctx.row(name, label, "hk_slack".into(), s, e, class));
                }
                records.push(BodyRecord {
                    body: label.clone(),
                    results: verdict,
                });
            }
            to_value(&records)
        }
    };
    Ok(TaskOutput {
        name: name.into(),
        json,
        rows,
        failed,
    })
}

fn skipped<const D: usize>(body: &ConvexBody<D>, spec: &NormSpec<D>, identity: String, why: &str) -> IdentityReport {
    IdentityReport {
        identity,
        lhs: f64::NAN,
        rhs: f64::NAN,
        slack: f64::NAN,
        combined_error: f64::NAN,
        verdict: Verdict::Skipped,
        parameters: Parameters {
            body: body.label(),
            norm: spec.label(),
            ..Parameters::default()
        },
        notes: vec![why.into()],
    }
}

/// Reads inline JSON or, with a leading `@`, the named file.
pub fn read_json_arg<T: serde::de::DeserializeOwned>(arg: &str) -> Result<T, CliError> {
    let text = match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::Config(format!("{path}: {e}")))?,
        None => arg.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
}
