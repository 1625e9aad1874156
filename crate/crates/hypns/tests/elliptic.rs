mod common;

use common::{d1, d2, order};
use hypns::elliptic::{self, leray_project_faces, operator_b_faces, solve_poisson};
use hypns::grid::{lp_norm, lp_norm_within, Grid, VectorField};
use hypns::mac::{FaceField, MacOps};
use hypns::ManifoldModel;

#[test]
fn poisson_second_order() {
    let p = |r: f64, th: f64| (-(r * r)).exp() * (1.0 + r * th.cos());
    let neg_lap = |r: f64, th: f64| {
        -(d2(|x| p(x, th), r) + d1(|x| p(x, th), r) / r.tanh() + d2(|y| p(r, y), th) / r.sinh().powi(2))
    };
    let err = |n_r: usize, n_t: usize| {
        let g = Grid::new(8.0, n_r, n_t).unwrap();
        let (x, rep) = solve_poisson(&g.sample(neg_lap), 1e-12).unwrap();
        assert!(rep.residual_norm <= 1e-12);
        let ex = g.sample(p);
        lp_norm(&x.axpy(-1.0, &ex), 2.0).unwrap() / lp_norm(&ex, 2.0).unwrap()
    };
    let (a, b) = (err(64, 32), err(128, 64));
    assert!(b < 5e-3, "error {b:.3e}");
    assert!(order(a, b) > 1.8, "order {}", order(a, b));
}

#[test]
fn leray_is_a_projection() {
    let g = Grid::new(8.0, 64, 32).unwrap();
    let mac = MacOps::get(&g);
    let f = FaceField::sample_frame(&g, |r, th| {
        let e = (-(r - 1.0).powi(2)).exp();
        (e * (2.0 * th).cos(), e * (1.0 + th.sin()))
    });
    let (pf, rep) = leray_project_faces(&f, 1e-12).unwrap();
    assert!(rep.residual_norm <= 1e-12);
    let div = lp_norm(&mac.divergence(&pf), 2.0).unwrap();
    assert!(div < 1e-9 * pf.norm2(), "div {div:.3e}");
    let (ppf, _) = leray_project_faces(&pf, 1e-12).unwrap();
    assert!(ppf.axpy(-1.0, &pf).norm2() < 1e-9 * pf.norm2());
    // orthogonality: <f - Pf, Pf> = 0
    let q = f.axpy(-1.0, &pf);
    assert!(q.inner(&pf).abs() < 1e-9 * f.norm2().powi(2));
}

#[test]
fn gradients_project_to_zero() {
    let g = Grid::new(8.0, 64, 32).unwrap();
    let mac = MacOps::get(&g);
    let phi = g.sample(|r, th| (-(r * r)).exp() * (1.0 + r * (2.0 * th).sin()));
    let gp = mac.gradient(&phi);
    let (pg, _) = leray_project_faces(&gp, 1e-12).unwrap();
    assert!(pg.norm2() < 1e-9 * gp.norm2());
}

#[test]
fn operator_b_vanishes_on_divergence_free_fields() {
    let g = Grid::new(8.0, 64, 32).unwrap();
    let m = ManifoldModel::hyperbolic(2).unwrap();
    let f = FaceField::sample_frame(&g, |r, th| {
        let e = (-(r - 1.0).powi(2)).exp();
        (e * th.cos(), e * (1.0 - th.sin()))
    });
    let (pf, _) = leray_project_faces(&f, 1e-12).unwrap();
    let b = operator_b_faces(&pf, &m, 1e-12).unwrap();
    assert!(b.norm2() < 1e-9 * pf.norm2());
    let bf = operator_b_faces(&f, &m, 1e-12).unwrap();
    assert!(bf.norm2() > 1e-3 * f.norm2());
}

#[test]
fn swirl_pressure_balances_centripetal_term() {
    // steady swirl b(r) e_θ: ∂_r p = b² coth r, p(R) = 0
    let bf = |r: f64| r * (-r * r).exp();
    let r_max = 8.0;
    let g = Grid::new(r_max, 256, 16).unwrap();
    let m = ManifoldModel::hyperbolic(2).unwrap();
    let u = VectorField::sample_frame(&g, |r, _| (0.0, bf(r)));
    let p = elliptic::pressure_from_velocity(&u, &m, 1e-12).unwrap();
    let exact = |r: f64| {
        let n = 4000;
        let h = (r_max - r) / n as f64;
        let f = |s: f64| bf(s).powi(2) / s.tanh();
        -(0..n).map(|k| f(r + (k as f64 + 0.5) * h)).sum::<f64>() * h
    };
    let ex = g.sample(|r, _| exact(r));
    let e = lp_norm_within(&p.axpy(-1.0, &ex), 2.0, 4.0).unwrap() / lp_norm_within(&ex, 2.0, 4.0).unwrap();
    assert!(e < 1e-2, "pressure error {e:.3e}");
}

#[test]
fn axisymmetric_fast_path_agrees() {
    let g = Grid::new(8.0, 64, 32).unwrap();
    let rhs = g.sample(|r, _| (-(r * r)).exp());
    let (a, _) = solve_poisson(&rhs, 1e-12).unwrap();
    let mut bumped = rhs.clone();
    bumped.values[0] *= 1.0 + 1e-12;
    assert!(!bumped.is_axisymmetric());
    let (b, _) = solve_poisson(&bumped, 1e-12).unwrap();
    assert!(lp_norm(&a.axpy(-1.0, &b), 2.0).unwrap() < 1e-9 * lp_norm(&a, 2.0).unwrap());
}
