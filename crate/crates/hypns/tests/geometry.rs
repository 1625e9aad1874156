use hypns::geometry::*;
use hypns::Error;
use std::f64::consts::PI;

fn h2() -> ManifoldModel {
    ManifoldModel::hyperbolic(2).unwrap()
}

#[test]
fn metric_at_r1() {
    let m = metric_at(&h2(), &ChartPoint::new(1.0, 0.3)).unwrap();
    assert!((m.g[1][1] - 1.381098).abs() < 1e-6);
    assert!((m.g_inv[1][1] - 0.724062).abs() < 1e-6);
    assert_eq!(m.g[0][0], 1.0);
    assert_eq!(m.g[0][1], 0.0);
}

#[test]
fn christoffel_at_r1() {
    let g = christoffel_at(&h2(), &ChartPoint::new(1.0, 2.0)).unwrap();
    assert!((g[0][1][1] + 1.813430).abs() < 1e-6);
    assert!((g[1][0][1] - 1.313035).abs() < 1e-6);
    assert!((g[1][1][0] - 1.313035).abs() < 1e-6);
    assert_eq!(g[0][0][0], 0.0);
    assert_eq!(g[1][1][1], 0.0);
}

#[test]
fn christoffel_matches_metric_derivative() {
    // Γ^r_θθ = -½ ∂_r g_θθ, Γ^θ_rθ = ½ g^θθ ∂_r g_θθ
    let m = h2();
    for r in [0.3, 1.0, 2.5, 5.0] {
        let d = 1e-5;
        let gtt = |r: f64| metric_at(&m, &ChartPoint::new(r, 0.0)).unwrap().g[1][1];
        let dg = (gtt(r + d) - gtt(r - d)) / (2.0 * d);
        let c = christoffel_at(&m, &ChartPoint::new(r, 0.0)).unwrap();
        assert!((c[0][1][1] + 0.5 * dg).abs() < 1e-6 * dg.abs().max(1.0));
        assert!((c[1][0][1] - 0.5 * dg / gtt(r)).abs() < 1e-6 * c[1][0][1].abs());
    }
}

#[test]
fn curvature_is_minus_one() {
    let m = h2();
    for r in [0.2, 1.0, 3.0] {
        let c = curvature_at(&m, &ChartPoint::new(r, 1.0)).unwrap();
        assert!((c.sectional + 1.0).abs() < 1e-12);
        let g = metric_at(&m, &ChartPoint::new(r, 1.0)).unwrap().g;
        for i in 0..2 {
            for j in 0..2 {
                assert!((c.ricci[i][j] + g[i][j]).abs() < 1e-12 * g[i][j].abs().max(1.0));
            }
        }
        assert!((c.riemann[0][1][1][0] - r.sinh().powi(2)).abs() < 1e-12 * r.sinh().powi(2));
    }
}

#[test]
fn pole_is_degenerate() {
    let m = h2();
    assert!(matches!(metric_at(&m, &ChartPoint::new(0.0, 0.0)), Err(Error::DegenerateChart(_))));
    assert!(matches!(christoffel_at(&m, &ChartPoint::new(-1.0, 0.0)), Err(Error::DegenerateChart(_))));
    assert!(matches!(sharp([1.0, 1.0], &ChartPoint::new(0.0, 1.0)), Err(Error::DegenerateChart(_))));
    assert!(matches!(metric_at(&m, &ChartPoint::new(f64::NAN, 0.0)), Err(Error::Domain(_))));
}

#[test]
fn sharp_flat_roundtrip() {
    let pt = ChartPoint::new(1.7, 4.0);
    let v = [0.3, -1.2];
    let w = flat(v, &pt).unwrap();
    let back = sharp(w, &pt).unwrap();
    assert!((back[0] - v[0]).abs() < 1e-14 && (back[1] - v[1]).abs() < 1e-14);
    assert!((w[1] - v[1] * 1.7f64.sinh().powi(2)).abs() < 1e-12);
}

#[test]
fn angle_wraps() {
    let p = ChartPoint::new(1.0, -0.5);
    assert!((p.theta - (2.0 * PI - 0.5)).abs() < 1e-14);
}

#[test]
fn model_constants() {
    let m = h2();
    assert_eq!(m.dimension, 2);
    assert_eq!(m.curvature, -1.0);
    assert_eq!(m.c0, 1.0);
    assert_eq!(m.ricci_constant, -1.0);
    assert_eq!(m.delta_n, 0.25);
    assert_eq!(m.delta_sharp(), 0.25);
    assert_eq!(m.k_bound, 2.0);
    let m3 = ManifoldModel::hyperbolic(3).unwrap();
    assert_eq!(m3.c0, 2.0);
    assert_eq!(m3.delta_n, 1.0);
    assert_eq!(m3.delta_sharp(), 1.0);
    assert!((m3.k_bound - 12f64.sqrt()).abs() < 1e-14);
    assert!(matches!(ManifoldModel::hyperbolic(4), Err(Error::Domain(_))));
    assert!(matches!(metric_at(&m3, &ChartPoint::new(1.0, 0.0)), Err(Error::Domain(_))));
}

#[test]
fn volumes() {
    assert!((ball_volume_h2(1.0) - 3.412276).abs() < 1e-6);
    assert!((volume_weight(&h2(), 1.0) - 1.175201).abs() < 1e-6);
    let m3 = ManifoldModel::hyperbolic(3).unwrap();
    assert!((volume_weight(&m3, 1.0) - 1.381098).abs() < 1e-6);
    // small balls are Euclidean
    let r = 1e-3;
    assert!((ball_volume_h2(r) / (PI * r * r) - 1.0).abs() < 1e-6);
}
