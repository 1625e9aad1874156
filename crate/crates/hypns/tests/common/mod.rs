//! Shared manufactured fields and independent derivative oracles.
#![allow(dead_code)]

use hypns::grid::{Grid, ScalarField, VectorField};
use std::sync::Arc;

/// Smooth fields given by Cartesian-like components (P, Q) in the chart
/// x = r cos θ, y = r sin θ; converted to the orthonormal polar frame.
pub type Cart = fn(f64, f64) -> (f64, f64);

pub fn frame_of(f: Cart, r: f64, th: f64) -> (f64, f64) {
    let (x, y) = (r * th.cos(), r * th.sin());
    let (p, q) = f(x, y);
    (p * th.cos() + q * th.sin(), -p * th.sin() + q * th.cos())
}

pub fn manufactured() -> Vec<(&'static str, Cart)> {
    vec![
        ("gauss_shift", |x, y| {
            let e = (-(x * x + y * y)).exp();
            (e * (1.0 + x), e * y * y)
        }),
        ("swirl", |x, y| {
            let e = (-(x * x + y * y) / 2.0).exp();
            (-y * e, x * e)
        }),
        ("saddle", |x, y| {
            let e = (-(x * x + y * y)).exp();
            ((x * x - y * y) * e, x * y * e)
        }),
        ("offcenter", |x, y| {
            let e = (-((x - 0.8).powi(2) + (y + 0.3).powi(2)) * 1.5).exp();
            (e, 0.5 * e * x)
        }),
        ("mode3", |x, y| {
            let e = (-(x * x + y * y) * 0.7).exp();
            ((x * x * x - 3.0 * x * y * y) * e, (3.0 * x * x * y - y * y * y) * e * 0.5 + e)
        }),
    ]
}

pub fn sample(g: &Arc<Grid>, f: Cart) -> VectorField {
    VectorField::sample_frame(g, |r, th| frame_of(f, r, th))
}

/// 4th-order central difference of a closure.
pub fn d1(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let d = 1e-3;
    (-f(x + 2.0 * d) + 8.0 * f(x + d) - 8.0 * f(x - d) + f(x - 2.0 * d)) / (12.0 * d)
}

pub fn d2(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let d = 1e-3;
    (-f(x + 2.0 * d) + 16.0 * f(x + d) - 30.0 * f(x) + 16.0 * f(x - d) - f(x - 2.0 * d)) / (12.0 * d * d)
}

/// Weighted L² norm of node values on r ≤ r_cut.
pub fn l2(g: &Arc<Grid>, v: &[f64], r_cut: f64) -> f64 {
    let f = ScalarField::new(g.clone(), v.to_vec());
    hypns::grid::lp_norm_within(&f, 2.0, r_cut).unwrap()
}

pub fn order(e1: f64, e2: f64) -> f64 {
    (e1 / e2).log2()
}
