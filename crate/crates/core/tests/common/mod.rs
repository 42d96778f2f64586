#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use wulffkit::body::ConvexBody;
use wulffkit::NormSpec;

pub fn norms2() -> Vec<(&'static str, NormSpec<2>)> {
    vec![
        ("euclidean", NormSpec::euclidean()),
        ("diag(4,1)", NormSpec::ellipsoidal(Matrix2::new(4.0, 0.0, 0.0, 1.0)).unwrap()),
        ("quartic(0.15)", NormSpec::perturbed_quartic(0.15).unwrap()),
    ]
}

pub fn norms3() -> Vec<(&'static str, NormSpec<3>)> {
    vec![
        ("euclidean", NormSpec::euclidean()),
        (
            "diag(1,2,3)",
            NormSpec::ellipsoidal(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0))).unwrap(),
        ),
        ("quartic(0.1)", NormSpec::perturbed_quartic(0.1).unwrap()),
    ]
}

pub fn smooth_bodies2() -> Vec<(&'static str, ConvexBody<2>)> {
    let n = norms2();
    vec![
        ("disk", ConvexBody::unit_ball()),
        ("ellipse(1,2)", ConvexBody::ellipsoid_axes(Vector2::zeros(), Vector2::new(1.0, 2.0)).unwrap()),
        (
            "wulff[diag(4,1)](0,1)",
            ConvexBody::wulff(Vector2::zeros(), 1.0, n[1].1.clone()).unwrap(),
        ),
        (
            "wulff[quartic](0.3,-0.2;1.3)",
            ConvexBody::wulff(Vector2::new(0.3, -0.2), 1.3, n[2].1.clone()).unwrap(),
        ),
    ]
}

pub fn smooth_bodies3() -> Vec<(&'static str, ConvexBody<3>)> {
    let n = norms3();
    vec![
        ("ball", ConvexBody::unit_ball()),
        (
            "ellipsoid(1,2,2)",
            ConvexBody::ellipsoid_axes(Vector3::zeros(), Vector3::new(1.0, 2.0, 2.0)).unwrap(),
        ),
        (
            "wulff[diag(1,2,3)](0.1,0,0;1.2)",
            ConvexBody::wulff(Vector3::new(0.1, 0.0, 0.0), 1.2, n[1].1.clone()).unwrap(),
        ),
        (
            "wulff[quartic](0;0.8)",
            ConvexBody::wulff(Vector3::zeros(), 0.8, n[2].1.clone()).unwrap(),
        ),
    ]
}

/// Norm attached to a Wulff body, if any.
pub fn own_norm<const D: usize>(body: &ConvexBody<D>) -> Option<NormSpec<D>> {
    match body {
        ConvexBody::WulffBody(w) => Some(w.norm.clone()),
        _ => None,
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Volume of `{phi* <= 1}` in 2D by polar Simpson quadrature of `1/2 phi*(w)^{-2}`.
pub fn wulff_area_polar(spec: &NormSpec<2>) -> f64 {
    let n = 20000;
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let f = |t: f64| 0.5 / spec.dual_value(&Vector2::new(t.cos(), t.sin())).unwrap().powi(2);
    (0..n)
        .map(|k| {
            let t = k as f64 * h;
            (f(t) + 4.0 * f(t + 0.5 * h) + f(t + h)) * h / 6.0
        })
        .sum()
}

/// `omega_D sqrt(det A)` for the ellipsoidal norm; the Euclidean ball volume
/// for `A = I`.
pub fn ellipsoidal_wulff_volume3(diag: [f64; 3]) -> f64 {
    4.0 / 3.0 * std::f64::consts::PI * (diag[0] * diag[1] * diag[2]).sqrt()
}
