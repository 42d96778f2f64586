//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{SVector, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use common::*;
use wulffkit::body::ConvexBody;
use wulffkit::identities::{
    complement_curvature_check, heintze_karcher_check, minkowski_check, DetectorOptions, Verdict,
    wulff_detector,
};
use wulffkit::measures::{curvature_measure_direct, curvatures_at_normal};
use wulffkit::montecarlo::{body_length_scale, steiner_fit_family, McOptions, DEFAULT_FIT_RESIDUAL};
use wulffkit::projection::{kappa_spectrum, Target};
use wulffkit::region::Region;
use wulffkit::NormSpec;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

// Pinned tolerances.
const STEINER_SIGMAS: f64 = 3.0;
const STEINER_BUDGET_SECS: f64 = 60.0;
const STEINER_SAMPLES: usize = 1_000_000;
const ABSOLUTE_RHO_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.4];
const ROUTE_SIGMAS: f64 = 3.0;
const UMBILIC_CLOSED_TOL: f64 = 1e-4;
const UMBILIC_FD_TOL: f64 = 1e-3;
const RADIUS_INDEPENDENCE_TOL: f64 = 1e-3;
const RADIUS_POINTS: usize = 50;
const WULFF_CLOSED_FORM_TOL: f64 = 1e-3;
const COMPLEMENT_POINTS: usize = 20;
const DETECTOR_FIT_TOL: f64 = 1e-2;
const DETECTOR_BUDGET_SECS: f64 = 120.0;
const GRADIENT_TOL: f64 = 1e-6;
const HESSIAN_TOL: f64 = 1e-4;
const INVOLUTION_TOL: f64 = 1e-8;
const EULER_TOL: f64 = 1e-9;

fn resolution<const D: usize>() -> usize {
    if D == 2 {
        1024
    } else {
        32
    }
}

fn random_unit<const D: usize>(rng: &mut ChaCha8Rng) -> SVector<f64, D> {
    loop {
        let v = SVector::<f64, D>::from_fn(|_, _| StandardNormal.sample(rng));
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
}

fn criterion_1() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut check = |label: &str, fit: &wulffkit::montecarlo::SteinerFit, exact: &[f64], secs: f64| {
        let ok_coef = fit
            .coefficients
            .iter()
            .zip(&fit.stderr)
            .zip(exact)
            .all(|((c, s), e)| (c - e).abs() <= STEINER_SIGMAS * s);
        let ok = ok_coef && secs <= STEINER_BUDGET_SECS;
        pass &= ok;
        let z: Vec<String> = fit
            .coefficients
            .iter()
            .zip(&fit.stderr)
            .zip(exact)
            .map(|((c, s), e)| format!("{:+.2}", (c - e) / s))
            .collect();
        lines.push(format!("{label} z=[{}] {secs:.1}s", z.join(",")));
    };
    let opts = McOptions::new(STEINER_SAMPLES, 101).with_workers(Some(1));

    let t = Instant::now();
    let ball = ConvexBody::<3>::unit_ball();
    let fit = steiner_fit_family(&ball, &NormSpec::euclidean(), &[Region::Whole], &ABSOLUTE_RHO_GRID, &opts, DEFAULT_FIT_RESIDUAL)?;
    check("ball3", &fit[0], &[4.0 * PI / 3.0, 4.0 * PI, 4.0 * PI], t.elapsed().as_secs_f64());

    let t = Instant::now();
    let square = ConvexBody::cuboid(Vector2::new(-0.5, -0.5), Vector2::new(0.5, 0.5))?;
    let fit = steiner_fit_family(&square, &NormSpec::euclidean(), &[Region::Whole], &ABSOLUTE_RHO_GRID, &opts, DEFAULT_FIT_RESIDUAL)?;
    check("square", &fit[0], &[PI, 4.0], t.elapsed().as_secs_f64());

    let t = Instant::now();
    let norm = norms2()[1].1.clone();
    let wulff = ConvexBody::wulff(Vector2::zeros(), 1.0, norm.clone())?;
    let fit = steiner_fit_family(&wulff, &norm, &[Region::Whole], &ABSOLUTE_RHO_GRID, &opts, DEFAULT_FIT_RESIDUAL)?;
    check("wulff[diag(4,1)]", &fit[0], &[2.0 * PI, 4.0 * PI], t.elapsed().as_secs_f64());
    Ok((pass, lines.join("; ")))
}

fn route_pair<const D: usize>(
    label: &str,
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    seed: u64,
    worst: &mut f64,
) -> Result<bool, Box<dyn std::error::Error>> {
    let scale = body_length_scale(body)?;
    let grid: Vec<f64> = ABSOLUTE_RHO_GRID.iter().map(|r| r * scale).collect();
    let opts = McOptions::new(STEINER_SAMPLES, seed);
    let fit = steiner_fit_family(body, spec, &[Region::Whole], &grid, &opts, DEFAULT_FIT_RESIDUAL)?;
    let mut ok = !fit[0].failed;
    for m in 0..D {
        let direct = curvature_measure_direct(body, spec, m, &Region::Whole, resolution::<D>())?;
        let sigma = (direct.stderr.powi(2) + fit[0].stderr[m].powi(2)).sqrt();
        let z = (direct.value - fit[0].coefficients[m]).abs() / sigma;
        *worst = worst.max(z);
        if z > ROUTE_SIGMAS {
            eprintln!("  route {label} m={m}: direct {} mc {} z {z:.2}", direct.value, fit[0].coefficients[m]);
            ok = false;
        }
    }
    Ok(ok)
}

fn criterion_2() -> Outcome {
    let n2 = norms2();
    let n3 = norms3();
    let b2 = smooth_bodies2();
    let b3 = smooth_bodies3();
    let mut worst = 0.0;
    let mut pass = true;
    let mut pairs = 0;
    let plan2 = [(1, 0), (1, 2), (3, 1), (0, 2)];
    for (k, (b, n)) in plan2.iter().enumerate() {
        let label = format!("{} x {}", b2[*b].0, n2[*n].0);
        pass &= route_pair(&label, &b2[*b].1, &n2[*n].1, 200 + k as u64, &mut worst)?;
        pairs += 1;
    }
    let plan3 = [(0, 1), (1, 0), (2, 2)];
    for (k, (b, n)) in plan3.iter().enumerate() {
        let label = format!("{} x {}", b3[*b].0, n3[*n].0);
        pass &= route_pair(&label, &b3[*b].1, &n3[*n].1, 300 + k as u64, &mut worst)?;
        pairs += 1;
    }
    Ok((pass, format!("{pairs} body/norm pairs, max |z| = {worst:.2}")))
}

fn umbilic<const D: usize>(norms: &[(&str, NormSpec<D>)], worst: &mut (f64, f64)) -> Result<bool, Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ok = true;
    for (_, spec) in norms {
        for s in [0.5, 1.0, 1.7] {
            let center = SVector::<f64, D>::from_fn(|i, _| 0.2 - 0.1 * i as f64);
            let body = ConvexBody::wulff(center, s, spec.clone())?;
            let view = body.smooth()?;
            for k in 0..40 {
                let eta = random_unit::<D>(&mut rng);
                let closed = curvatures_at_normal(&view, spec, &eta)?;
                for c in &closed.kappa {
                    let e = (c.reported() * s - 1.0).abs();
                    worst.0 = f64::max(worst.0, e);
                    ok &= e <= UMBILIC_CLOSED_TOL;
                }
                if k % 4 == 0 {
                    let a = view.point(&eta)?;
                    let u = spec.norm_jet(&eta)?.gradient;
                    let fd = kappa_spectrum(Target::Convex(&body), spec, &a, &u, 0.05 * s)?;
                    for c in &fd.kappa {
                        let e = (c.reported() * s - 1.0).abs();
                        worst.1 = f64::max(worst.1, e);
                        ok &= e <= UMBILIC_FD_TOL;
                    }
                }
            }
        }
    }
    Ok(ok)
}

fn criterion_3() -> Outcome {
    let mut worst = (0.0, 0.0);
    let pass = umbilic(&norms2(), &mut worst)? & umbilic(&norms3(), &mut worst)?;
    Ok((pass, format!("max |s kappa - 1|: closed form {:.1e}, projection route {:.1e}", worst.0, worst.1)))
}

fn radius_independence<const D: usize>(
    bodies: &[(&str, ConvexBody<D>)],
    norms: &[(&str, NormSpec<D>)],
    worst: &mut f64,
) -> Result<bool, Box<dyn std::error::Error>> {
    let mut ok = true;
    for (bi, (label, body)) in bodies.iter().enumerate() {
        let spec = &norms[bi % norms.len()].1;
        let view = body.smooth()?;
        let scale = body_length_scale(body)?;
        let mut rng = ChaCha8Rng::seed_from_u64(40 + bi as u64);
        for k in 0..RADIUS_POINTS {
            let eta = random_unit::<D>(&mut rng);
            let a = view.point(&eta)?;
            let (target, u, r) = if k % 2 == 0 {
                (Target::Convex(body), spec.norm_jet(&eta)?.gradient, 0.05 * scale)
            } else {
                (Target::Complement(body), spec.norm_jet(&(-eta))?.gradient, 0.01 * scale)
            };
            let k1 = kappa_spectrum(target, spec, &a, &u, r)?;
            let k2 = kappa_spectrum(target, spec, &a, &u, 2.0 * r)?;
            let v1: Vec<f64> = k1.kappa.iter().map(|c| c.reported()).collect();
            let v2: Vec<f64> = k2.kappa.iter().map(|c| c.reported()).collect();
            let size = v1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let d = v1.iter().zip(&v2).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / size;
            *worst = worst.max(d);
            if d > RADIUS_INDEPENDENCE_TOL {
                eprintln!("  radius {label}: {v1:?} vs {v2:?}");
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0;
    let pass = radius_independence(&smooth_bodies2(), &norms2(), &mut worst)?
        & radius_independence(&smooth_bodies3(), &norms3(), &mut worst)?;
    Ok((pass, format!("{RADIUS_POINTS} bundle points per body, max relative discrepancy {worst:.1e}")))
}

/// Volume of `{phi* <= 1}` in 3D by product quadrature of `1/3 phi*(w)^{-3}`.
fn wulff_volume_polar3(spec: &NormSpec<3>) -> f64 {
    let (nz, nt) = (300, 600);
    let hz = 2.0 / nz as f64;
    let ht = 2.0 * PI / nt as f64;
    let mut total = 0.0;
    for i in 0..nz {
        // Gauss-Legendre with two nodes on each z-cell.
        let mid = -1.0 + (i as f64 + 0.5) * hz;
        for z in [mid - hz / (2.0 * 3f64.sqrt()), mid + hz / (2.0 * 3f64.sqrt())] {
            let rho = (1.0 - z * z).sqrt();
            for j in 0..nt {
                let t = j as f64 * ht;
                let w = Vector3::new(rho * t.cos(), rho * t.sin(), z);
                total += 0.5 * hz * ht / (3.0 * spec.dual_value(&w).unwrap().powi(3));
            }
        }
    }
    total
}

fn minkowski_all<const D: usize>(
    bodies: &[(&str, ConvexBody<D>)],
    norms: &[(&str, NormSpec<D>)],
    count: &mut usize,
    worst: &mut f64,
) -> Result<bool, Box<dyn std::error::Error>> {
    let mut ok = true;
    for (bl, body) in bodies {
        for (nl, spec) in norms {
            for r in 1..D {
                let rep = minkowski_check(body, spec, r, resolution::<D>())?;
                *count += 1;
                *worst = worst.max(rep.slack.abs() / rep.combined_error);
                if rep.verdict != Verdict::Equality {
                    eprintln!("  minkowski {bl} x {nl} r={r}: {rep:?}");
                    ok = false;
                }
            }
        }
    }
    Ok(ok)
}

fn wulff_closed_form<const D: usize>(
    body: &ConvexBody<D>,
    volume: f64,
    worst: &mut f64,
) -> Result<bool, Box<dyn std::error::Error>> {
    let ConvexBody::WulffBody(w) = body else { unreachable!() };
    let n = D - 1;
    let mut ok = true;
    for r in 1..D {
        let rep = minkowski_check(body, &w.norm, r, resolution::<D>())?;
        let s = w.scale;
        let exact = (n - r + 1) as f64 * binomial(n, r - 1) * s.powi(1 - r as i32) * (n + 1) as f64 * s.powi(n as i32) * volume;
        for side in [rep.lhs, rep.rhs] {
            let e = (side - exact).abs() / exact;
            *worst = worst.max(e);
            ok &= e <= WULFF_CLOSED_FORM_TOL;
        }
    }
    Ok(ok)
}

fn criterion_5() -> Outcome {
    let mut count = 0;
    let mut worst_z = 0.0;
    let mut pass = minkowski_all(&smooth_bodies2(), &norms2(), &mut count, &mut worst_z)?;
    pass &= minkowski_all(&smooth_bodies3(), &norms3(), &mut count, &mut worst_z)?;
    let mut worst_closed = 0.0;
    let b2 = smooth_bodies2();
    let b3 = smooth_bodies3();
    for body in [&b2[2].1, &b2[3].1] {
        let v = wulff_area_polar(&own_norm(body).unwrap());
        pass &= wulff_closed_form(body, v, &mut worst_closed)?;
    }
    pass &= wulff_closed_form(&b3[2].1, ellipsoidal_wulff_volume3([1.0, 2.0, 3.0]), &mut worst_closed)?;
    let v = wulff_volume_polar3(&own_norm(&b3[3].1).unwrap());
    pass &= wulff_closed_form(&b3[3].1, v, &mut worst_closed)?;
    Ok((
        pass,
        format!("{count} checks, max |defect|/error {worst_z:.2}; Wulff closed forms max rel {worst_closed:.1e}"),
    ))
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    let b2 = smooth_bodies2();
    let b3 = smooth_bodies3();
    for body in [&b2[2].1, &b2[3].1] {
        let rep = heintze_karcher_check(body, &own_norm(body).unwrap(), resolution::<2>())?;
        pass &= rep.verdict == Verdict::Equality;
        notes.push(format!("{} {:.1e}", rep.verdict.as_str(), rep.slack));
    }
    for body in [&b3[2].1, &b3[3].1] {
        let rep = heintze_karcher_check(body, &own_norm(body).unwrap(), resolution::<3>())?;
        pass &= rep.verdict == Verdict::Equality;
        notes.push(format!("{} {:.1e}", rep.verdict.as_str(), rep.slack));
    }
    let rep = heintze_karcher_check(&b2[1].1, &NormSpec::euclidean(), resolution::<2>())?;
    pass &= rep.verdict == Verdict::Holds && rep.slack > 3.0 * rep.combined_error;
    notes.push(format!("ellipse {} {:.4}", rep.verdict.as_str(), rep.slack));
    let rep = heintze_karcher_check(&b3[1].1, &NormSpec::euclidean(), resolution::<3>())?;
    pass &= rep.verdict == Verdict::Holds && rep.slack > 3.0 * rep.combined_error;
    notes.push(format!("ellipsoid {} {:.4}", rep.verdict.as_str(), rep.slack));
    Ok((pass, notes.join(", ")))
}

fn complement_all<const D: usize>(
    bodies: &[(&str, ConvexBody<D>)],
    norms: &[(&str, NormSpec<D>)],
    worst: &mut f64,
) -> Result<bool, Box<dyn std::error::Error>> {
    let mut ok = true;
    for (bi, (bl, body)) in bodies.iter().enumerate() {
        for (nl, spec) in norms {
            let rep = complement_curvature_check(body, spec, COMPLEMENT_POINTS, 70 + bi as u64)?;
            *worst = worst.max(rep.lhs);
            if rep.verdict != Verdict::Holds {
                eprintln!("  complement {bl} x {nl}: {}", rep.lhs);
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0;
    let pass = complement_all(&smooth_bodies2(), &norms2(), &mut worst)?
        & complement_all(&smooth_bodies3(), &norms3(), &mut worst)?;
    // Ball oracle: the complement has curvatures -1.
    let ball = ConvexBody::<3>::unit_ball();
    let k = kappa_spectrum(
        Target::Complement(&ball),
        &NormSpec::euclidean(),
        &Vector3::new(0.0, 0.0, 1.0),
        &Vector3::new(0.0, 0.0, -1.0),
        0.02,
    )?;
    let ball_err = k.kappa.iter().map(|c| (c.reported() + 1.0).abs()).fold(0.0, f64::max);
    Ok((
        pass && ball_err <= UMBILIC_FD_TOL,
        format!("{COMPLEMENT_POINTS} points per body/norm pair, max defect {worst:.1e}; ball {ball_err:.1e}"),
    ))
}

fn detect<const D: usize>(
    label: &str,
    body: &ConvexBody<D>,
    spec: &NormSpec<D>,
    samples: usize,
    expect: Option<(SVector<f64, D>, f64)>,
) -> Result<(bool, String), Box<dyn std::error::Error>> {
    let t = Instant::now();
    let v = wulff_detector(body, spec, None, &DetectorOptions::new::<D>(samples, 11))?;
    let secs = t.elapsed().as_secs_f64();
    let mut ok = secs <= DETECTOR_BUDGET_SECS && v.is_wulff == expect.is_some();
    if let Some((c, s)) = expect {
        let dc = (0..D).map(|i| (v.fitted_center[i] - c[i]).abs()).fold(0.0, f64::max);
        ok &= dc <= DETECTOR_FIT_TOL && (v.fitted_scale - s).abs() <= DETECTOR_FIT_TOL;
    }
    Ok((ok, format!("{label}={} ({secs:.0}s)", v.is_wulff)))
}

fn criterion_8() -> Outcome {
    let n2 = norms2();
    let n3 = norms3();
    let mut pass = true;
    let mut notes = Vec::new();
    let mut push = |r: (bool, String)| {
        pass &= r.0;
        notes.push(r.1);
    };
    let c2 = Vector2::new(0.3, -0.2);
    push(detect("wulff2", &ConvexBody::wulff(c2, 1.7, n2[2].1.clone())?, &n2[2].1, 1_000_000, Some((c2, 1.7)))?);
    push(detect("disk", &ConvexBody::unit_ball(), &n2[0].1, 1_000_000, Some((Vector2::zeros(), 1.0)))?);
    let c3 = Vector3::new(0.3, -0.2, 0.1);
    push(detect("wulff3", &ConvexBody::wulff(c3, 1.2, n3[1].1.clone())?, &n3[1].1, 8_000_000, Some((c3, 1.2)))?);
    let ellipse = ConvexBody::ellipsoid_axes(Vector2::zeros(), Vector2::new(1.0, 2.0))?;
    push(detect("ellipse", &ellipse, &n2[0].1, 1_000_000, None)?);
    let square = ConvexBody::cuboid(Vector2::new(-1.0, -1.0), Vector2::new(1.0, 1.0))?;
    push(detect("square", &square, &n2[2].1, 1_000_000, None)?);
    let ellipsoid = ConvexBody::ellipsoid_axes(Vector3::zeros(), Vector3::new(1.0, 2.0, 2.0))?;
    push(detect("ellipsoid", &ellipsoid, &n3[0].1, 8_000_000, None)?);
    Ok((pass, notes.join(", ")))
}

#[derive(Default)]
struct CalculusWorst {
    gradient: f64,
    hessian: f64,
    involution: f64,
    euler: f64,
}

fn calculus<const D: usize>(norms: &[(&str, NormSpec<D>)], w: &mut CalculusWorst) -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (_, spec) in norms {
        for k in 0..200 {
            let radius = 0.3 + 3.0 * (k as f64 / 200.0);
            let u = random_unit::<D>(&mut rng) * radius;
            for dual in [false, true] {
                let jet = |x: &SVector<f64, D>| if dual { spec.dual_jet(x) } else { spec.norm_jet(x) };
                let j = jet(&u)?;
                let h = 1e-5 * radius;
                let hh = 1e-4 * radius;
                let mut fd_grad = SVector::<f64, D>::zeros();
                let mut fd_hess = nalgebra::SMatrix::<f64, D, D>::zeros();
                for i in 0..D {
                    let mut e = SVector::<f64, D>::zeros();
                    e[i] = 1.0;
                    fd_grad[i] = (jet(&(u + e * h))?.value - jet(&(u - e * h))?.value) / (2.0 * h);
                    let col = (jet(&(u + e * hh))?.gradient - jet(&(u - e * hh))?.gradient) / (2.0 * hh);
                    fd_hess.set_column(i, &col);
                }
                w.gradient = w.gradient.max((fd_grad - j.gradient).norm() / j.gradient.norm());
                w.hessian = w.hessian.max((fd_hess - j.hessian).norm() / j.hessian.norm().max(1.0 / radius));
                w.euler = w.euler.max((j.gradient.dot(&u) - j.value).abs() / j.value);
                w.euler = w.euler.max((j.hessian * u).norm() * radius / j.value.max(1e-300) / j.hessian.norm().max(1.0));
                // The gradient lies on the unit sphere of the other norm and maps back to u / |u|.
                let other = |x: &SVector<f64, D>| if dual { spec.norm_jet(x) } else { spec.dual_jet(x) };
                let back = other(&j.gradient)?;
                w.involution = w.involution.max((back.value - 1.0).abs());
                w.involution = w.involution.max((back.gradient - u / j.value).norm() / (u / j.value).norm());
            }
        }
    }
    Ok(())
}

fn criterion_9() -> Outcome {
    let mut w = CalculusWorst::default();
    calculus(&norms2(), &mut w)?;
    calculus(&norms3(), &mut w)?;
    let pass = w.gradient <= GRADIENT_TOL && w.hessian <= HESSIAN_TOL && w.involution <= INVOLUTION_TOL && w.euler <= EULER_TOL;
    Ok((
        pass,
        format!(
            "gradient {:.1e}, hessian {:.1e}, involution {:.1e}, euler {:.1e}",
            w.gradient, w.hessian, w.involution, w.euler
        ),
    ))
}

const DETERMINISM_CONFIG: &str = r#"{
  "norm": {"variant": "perturbed", "dimension": 2, "epsilon": 0.15},
  "bodies": [
    {"variant": "ellipsoid", "name": "ellipse", "center": [0.1, 0.0], "M": [[1.0, 0.0], [0.0, 0.25]]},
    {"variant": "hpolytope", "name": "square", "A": [[1,0],[-1,0],[0,1],[0,-1]], "b": [1,1,1,1]}
  ],
  "seed": 5,
  "tasks": [
    {"task": "tube-fit", "samples": 200000, "regions": "quadrants"},
    {"task": "measures", "method": "steiner_mc", "samples": 200000},
    {"task": "detect-wulff", "bodies": [0], "samples": 400000}
  ]
}"#;

fn dir_contents(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, Box<dyn std::error::Error>> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)?
        .map(|e| {
            let p = e?.path();
            Ok((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p)?))
        })
        .collect::<Result<_, std::io::Error>>()?;
    files.sort();
    Ok(files)
}

fn criterion_10() -> Outcome {
    // Library level: identical bits across worker counts.
    let body = ConvexBody::ellipsoid_axes(Vector2::new(0.1, 0.0), Vector2::new(1.0, 2.0))?;
    let spec = norms2()[2].1.clone();
    let regions = Region::quadrants(&[0.1, 0.0]);
    let fits: Vec<Vec<u64>> = [1, 2, 3]
        .iter()
        .map(|&w| {
            let opts = McOptions::new(300_000, 17).with_workers(Some(w));
            let f = steiner_fit_family(&body, &spec, &regions, &ABSOLUTE_RHO_GRID, &opts, DEFAULT_FIT_RESIDUAL).unwrap();
            f.iter().flat_map(|x| x.coefficients.iter().chain(&x.stderr).map(|v| v.to_bits())).collect()
        })
        .collect();
    let lib_ok = fits.windows(2).all(|w| w[0] == w[1]);

    // Binary level: byte-identical outputs across --workers.
    let tmp = tempfile::tempdir()?;
    let cfg = tmp.path().join("config.json");
    std::fs::write(&cfg, DETERMINISM_CONFIG)?;
    let mut outputs = Vec::new();
    for w in ["1", "2"] {
        let out = tmp.path().join(format!("out{w}"));
        let status = Command::new(env!("CARGO_BIN_EXE_wulffkit"))
            .arg("run")
            .arg(&cfg)
            .arg("--workers")
            .arg(w)
            .arg("--output-dir")
            .arg(&out)
            .output()?;
        if !status.status.success() {
            return Ok((false, format!("run exited with {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr))));
        }
        outputs.push(dir_contents(&out)?);
    }
    let bin_ok = outputs[0] == outputs[1] && !outputs[0].is_empty();
    Ok((
        lib_ok && bin_ok,
        format!("library fits equal: {lib_ok}; {} output files equal: {bin_ok}", outputs[0].len()),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Steiner coefficient recovery", criterion_1),
        ("direct and Monte-Carlo routes agree", criterion_2),
        ("Wulff shapes are umbilic", criterion_3),
        ("curvatures independent of the radius", criterion_4),
        ("Minkowski formulas", criterion_5),
        ("Heintze-Karcher inequality", criterion_6),
        ("complement curvature antisymmetry", criterion_7),
        ("Wulff detector", criterion_8),
        ("norm calculus", criterion_9),
        ("determinism across worker counts", criterion_10),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let t = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "criterion {:>2} {name}: {} ({detail}; {:.1}s)",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
