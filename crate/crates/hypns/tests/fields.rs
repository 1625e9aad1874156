mod common;

use common::{d1, d2, frame_of, manufactured, order, sample};
use hypns::estimates::{identity_residuals, kato_study, manufactured_fields, observed_orders};
use hypns::geometry::ball_volume_h2;
use hypns::grid::{lp_norm, lp_norm_within, Grid, ScalarField, VectorField};
use hypns::{ops, Error, ManifoldModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

#[test]
fn grid_validation() {
    assert!(matches!(Grid::new(0.0, 16, 16), Err(Error::Domain(_))));
    assert!(matches!(Grid::new(8.0, 2, 16), Err(Error::Domain(_))));
    assert!(matches!(Grid::new(8.0, 16, 15), Err(Error::Domain(_))));
    let g = Grid::new(8.0, 16, 16).unwrap();
    assert_eq!(g.len(), 256);
    assert!((g.r[0] - 0.25).abs() < 1e-15);
    assert_eq!(g.opposite(3), 11);
    assert_eq!(g.mp(15), 0);
    assert_eq!(g.mm(0), 15);
}

#[test]
fn quadrature_weight_is_ball_volume() {
    let e = |n: usize| {
        let g = Grid::new(3.0, n, 64).unwrap();
        (g.total_weight() - ball_volume_h2(3.0)).abs()
    };
    let (a, b) = (e(64), e(128));
    assert!(b / ball_volume_h2(3.0) < 1e-3);
    assert!(order(a, b) > 1.9);
}

#[test]
fn lp_norms_of_constant() {
    let g = Grid::new(2.0, 64, 32).unwrap();
    let one = g.sample(|_, _| 1.0);
    let vol = g.total_weight();
    assert!((lp_norm(&one, 1.0).unwrap() - vol).abs() < 1e-12 * vol);
    assert!((lp_norm(&one, 2.0).unwrap() - vol.sqrt()).abs() < 1e-12);
    assert!((lp_norm(&one, 4.0).unwrap() - vol.powf(0.25)).abs() < 1e-12);
    assert_eq!(lp_norm(&one, f64::INFINITY).unwrap(), 1.0);
    assert!(matches!(lp_norm(&one, 0.5), Err(Error::Domain(_))));
    let inner = lp_norm_within(&one, 1.0, 1.0).unwrap();
    assert!((inner - ball_volume_h2(1.0)).abs() < 1e-3);
}

fn lap_exact(f: impl Fn(f64, f64) -> f64 + Copy, r: f64, th: f64) -> f64 {
    let frr = d2(|x| f(x, th), r);
    let fr = d1(|x| f(x, th), r);
    let ftt = d2(|y| f(r, y), th);
    frr + fr / r.tanh() + ftt / r.sinh().powi(2)
}

#[test]
fn laplace_beltrami_second_order() {
    let f = |r: f64, th: f64| {
        let (x, y) = (r * th.cos(), r * th.sin());
        (-(x * x + y * y)).exp() * (1.0 + x + 0.5 * x * y)
    };
    let err = |n_r: usize, n_t: usize| {
        let g = Grid::new(8.0, n_r, n_t).unwrap();
        let lap = ops::laplace_beltrami(&g.sample(f));
        let ex = g.sample(|r, th| lap_exact(f, r, th));
        lp_norm_within(&lap.axpy(-1.0, &ex), 2.0, 4.0).unwrap()
    };
    let (a, b) = (err(128, 64), err(256, 128));
    assert!(b < 1e-2, "error {b}");
    assert!(order(a, b) > 1.9, "order {}", order(a, b));
}

/// Δ⃗w = w_rr + coth w_r + (w_θθ + 2i cosh w_θ - cosh² w)/sinh² for w = a + ib.
fn boch_exact(f: common::Cart, r: f64, th: f64) -> (f64, f64) {
    let a = |r: f64, th: f64| frame_of(f, r, th).0;
    let b = |r: f64, th: f64| frame_of(f, r, th).1;
    let (s, c) = (r.sinh(), r.cosh());
    let part = |u: &dyn Fn(f64, f64) -> f64| (d2(|x| u(x, th), r), d1(|x| u(x, th), r), d2(|y| u(r, y), th), d1(|y| u(r, y), th));
    let (arr, ar, att, at) = part(&a);
    let (brr, br, btt, bt) = part(&b);
    let (a0, b0) = (a(r, th), b(r, th));
    (
        arr + ar * c / s + (att - 2.0 * c * bt - c * c * a0) / (s * s),
        brr + br * c / s + (btt + 2.0 * c * at - c * c * b0) / (s * s),
    )
}

#[test]
fn bochner_laplacian_second_order() {
    for (name, f) in manufactured() {
        let err = |n_r: usize, n_t: usize| {
            let g = Grid::new(12.0, n_r, n_t).unwrap();
            let lap = ops::bochner_laplacian(&sample(&g, f));
            let ex = VectorField::sample_frame(&g, |r, th| boch_exact(f, r, th));
            lp_norm_within(&lap.axpy(-1.0, &ex), 2.0, 6.0).unwrap()
        };
        let (a, b) = (err(192, 128), err(384, 256));
        assert!(order(a, b) > 1.8, "{name}: order {} ({a:.3e} -> {b:.3e})", order(a, b));
    }
}

#[test]
fn bochner_laplacian_resolves_slow_decay() {
    // dΦ for Φ = tanh(r/2) cos θ is harmonic: Δ⃗u = Ric(u) = -u
    let g = Grid::new(12.0, 384, 256).unwrap();
    let m = ManifoldModel::hyperbolic(2).unwrap();
    let u = VectorField::sample_frame(&g, |r, th| {
        let d = 0.5 / (r / 2.0).cosh().powi(2);
        (d * th.cos(), -d * th.sin())
    });
    let res = ops::bochner_laplacian(&u).axpy(-1.0, &ops::ricci_operator(&u, &m));
    let rel = lp_norm_within(&res, 2.0, 11.0).unwrap() / lp_norm(&u, 2.0).unwrap();
    assert!(rel < 2e-4, "relative residual {rel:.3e}");
}

#[test]
fn bochner_laplacian_is_dissipative() {
    let g = Grid::new(8.0, 48, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let a: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = VectorField::from_frame(&g, a, b);
        let q = ops::bochner_laplacian(&u).inner(&u);
        assert!(q <= 1e-10 * u.inner(&u), "<Δu, u> = {q}");
    }
}

#[test]
fn swirl_divergence_and_vorticity() {
    let g = Grid::new(8.0, 256, 16).unwrap();
    let bf = |r: f64| r * (-r * r).exp();
    let u = VectorField::sample_frame(&g, |r, _| (0.0, bf(r)));
    let div = ops::divergence_vec(&u);
    assert!(div.values.iter().all(|x| x.abs() < 1e-12));
    let w = ops::vorticity_2d(&u);
    // ω = (1/sinh r) ∂_r(sinh r · b)
    let ex = g.sample(|r, _| d1(|x| x.sinh() * bf(x), r) / r.sinh());
    let e = lp_norm_within(&w.axpy(-1.0, &ex), 2.0, 4.0).unwrap() / lp_norm_within(&ex, 2.0, 4.0).unwrap();
    assert!(e < 5e-3, "vorticity error {e:.3e}");
}

#[test]
fn frame_and_index_roundtrips() {
    let g = Grid::new(6.0, 32, 16).unwrap();
    let u = VectorField::sample_frame(&g, |r, th| (r.cos() * th.sin(), 0.3 + r * th.cos()));
    let (a, b) = u.frame();
    let back = VectorField::from_frame(&g, a.clone(), b.clone());
    for i in 0..g.len() {
        assert!((back.ur[i] - u.ur[i]).abs() < 1e-14);
        assert!((back.uth[i] - u.uth[i]).abs() < 1e-12 * u.uth[i].abs().max(1.0));
    }
    let w = u.flat().sharp();
    for i in 0..g.len() {
        assert!((w.uth[i] - u.uth[i]).abs() < 1e-12 * u.uth[i].abs().max(1.0));
    }
    let d = u.dot(&u);
    for i in 0..g.len() {
        assert!((d.values[i] - (a[i] * a[i] + b[i] * b[i])).abs() < 1e-12 * d.values[i].max(1.0));
    }
}

#[test]
fn scalar_gradient_matches_oracle() {
    let f = |r: f64, th: f64| (-(r * r)).exp() * (1.0 + r * th.cos());
    let g = Grid::new(6.0, 256, 128).unwrap();
    let grad = ops::scalar_gradient(&g.sample(f));
    let ex = VectorField::sample_frame(&g, |r, th| (d1(|x| f(x, th), r), d1(|y| f(r, y), th) / r.sinh()));
    let e = lp_norm(&grad.axpy(-1.0, &ex), 2.0).unwrap() / lp_norm(&ex, 2.0).unwrap();
    assert!(e < 1e-3, "gradient error {e:.3e}");
}

#[test]
fn identity_orders_on_coarse_levels() {
    let m = ManifoldModel::hyperbolic(2).unwrap();
    let fields = manufactured_fields();
    let levels: Vec<_> = [(192, 128), (384, 256)].iter().map(|&(a, b)| identity_residuals(&Grid::new(12.0, a, b).unwrap(), &m, &fields)).collect();
    for k in 0..fields.len() {
        let picks: [fn(&hypns::estimates::IdentityRow) -> f64; 3] = [|r| r.bochner, |r| r.weitzenbock, |r| r.metric];
        for pick in picks {
            let o = observed_orders(&[pick(&levels[0][k]), pick(&levels[1][k])])[0];
            assert!(o > 1.9, "{}: order {o}", fields[k].name);
        }
    }
}

#[test]
fn kato_defect_is_small_and_seeded() {
    let g: Arc<Grid> = Grid::new(12.0, 192, 128).unwrap();
    let a = kato_study(&g, 4, 11);
    let b = kato_study(&g, 4, 11);
    assert_eq!(a, b);
    assert_eq!(a.min_defect.len(), 4);
    assert!(a.constant() < 1.0, "C = {}", a.constant());
    let c = kato_study(&g, 4, 12);
    assert_ne!(a.min_defect, c.min_defect);
}

#[test]
fn axisymmetry_flag() {
    let g = Grid::new(4.0, 8, 8).unwrap();
    assert!(g.sample(|r, _| r).is_axisymmetric());
    assert!(!g.sample(|r, th| r * th.cos() + 0.1).is_axisymmetric());
    let z = ScalarField::zeros(&g);
    assert_eq!(z.max(), 0.0);
    assert!((2.0 * PI - g.h_theta * g.n_theta as f64).abs() < 1e-14);
}
