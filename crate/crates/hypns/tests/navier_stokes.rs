use hypns::cli::vorticity_monotone;
use hypns::grid::Grid;
use hypns::mac::FaceField;
use hypns::navier_stokes::*;
use hypns::semigroup::EvolutionConfig;
use hypns::{Error, ManifoldModel};

fn h2() -> ManifoldModel {
    ManifoldModel::hyperbolic(2).unwrap()
}

fn swirl(g: &std::sync::Arc<Grid>) -> FaceField {
    FaceField::sample_frame(g, |r, _| (0.0, r * (-r * r).exp()))
}

#[test]
fn axisymmetric_swirl_follows_the_linear_flow() {
    let g = Grid::new(8.0, 64, 16).unwrap();
    let u0 = swirl(&g);
    let n = nonlinear_faces(&u0, 1e-12).unwrap();
    assert!(n.norm2() < 1e-8 * u0.norm2(), "{:.3e}", n.norm2());
    let cfg = EvolutionConfig::new(1e-2, 0.3);
    let nl = imex_solve(&u0, &h2(), &cfg).unwrap();
    let lin = linear_reference(&u0, &h2(), &cfg).unwrap();
    assert!(relative_l2(&nl.last, &lin) < 1e-8);
}

#[test]
fn imex_diagnostics_on_ring_data() {
    let g = Grid::new(8.0, 48, 32).unwrap();
    let u0 = ring_data(&g, 1.0, 1e-12).unwrap();
    let cfg = EvolutionConfig::new(5e-3, 0.5).every(0.05);
    let run = imex_solve(&u0, &h2(), &cfg).unwrap();
    assert_eq!(run.energy.rows.len(), 11);
    assert_eq!(run.vorticity.len(), 11);
    assert!(run.energy.max_relative_residual() < 0.02, "{:.3e}", run.energy.max_relative_residual());
    assert!(run.max_divergence < 1e-8);
    assert!(vorticity_monotone(&run.vorticity, 0.01).0);
    for w in run.energy.rows.windows(2) {
        assert!(w[1].kinetic < w[0].kinetic);
    }
    assert!(run.max_cfl > 0.0 && run.max_cfl.is_finite());
}

#[test]
fn single_step_matches_solver() {
    let g = Grid::new(8.0, 32, 16).unwrap();
    let u0 = ring_data(&g, 1.0, 1e-12).unwrap();
    let a = imex_step_ns(&u0, 1e-2, &h2(), 1e-12).unwrap();
    let b = imex_solve(&u0, &h2(), &EvolutionConfig::new(1e-2, 1e-2)).unwrap().last;
    assert!(relative_l2(&a, &b) < 1e-12);
}

#[test]
fn picard_contracts_and_matches_imex() {
    let g = Grid::new(8.0, 32, 16).unwrap();
    let m = h2();
    let u0 = ring_data(&g, 1.0, 1e-12).unwrap();
    let pc = PicardConfig { solver_tol: 1e-12, ..PicardConfig::new(1e-2, 0.2, &m) };
    let (traj, st) = picard_solve(&u0, &m, &pc).unwrap();
    assert!(st.converged);
    assert!(st.ratios.len() >= 5);
    assert!(st.max_ratio() < 0.9, "{:?}", st.ratios);
    assert_eq!(traj.len(), 21);
    let imex = imex_solve(&u0, &m, &EvolutionConfig::new(1e-2, 0.2)).unwrap().last;
    assert!(relative_l2(traj.last().unwrap(), &imex) < 0.01);
    let gamma = st.gamma_est.unwrap();
    assert!(gamma > 0.0);
    let a = small_data_scale(gamma, st.norms[0], 0.5);
    assert!((4.0 * gamma * a * st.norms[0] - 0.5).abs() < 1e-12);
}

#[test]
fn picard_on_zero_data() {
    let g = Grid::new(8.0, 16, 8).unwrap();
    let (traj, st) = picard_solve(&FaceField::zeros(&g), &h2(), &PicardConfig::new(0.1, 0.5, &h2())).unwrap();
    assert!(st.converged);
    assert_eq!(traj.len(), 6);
    let bad = PicardConfig { q: 2.0, ..PicardConfig::new(0.1, 0.5, &h2()) };
    assert!(matches!(picard_solve(&FaceField::zeros(&g), &h2(), &bad), Err(Error::Domain(_))));
}

#[test]
fn gronwall_constant_is_finite() {
    let g = Grid::new(8.0, 32, 16).unwrap();
    let u0 = ring_data(&g, 1.0, 1e-12).unwrap();
    let d = ring_data(&g, 1e-3, 1e-12).unwrap();
    let rep = gronwall_fit(&u0, &d, &h2(), &EvolutionConfig::new(1e-2, 0.2).every(0.05)).unwrap();
    assert!(rep.c_fit.is_finite());
    assert!(rep.rows.iter().all(|r| r.1 <= rep.delta_norm * 1.0001));
}

#[test]
fn weight_and_exponents() {
    let w = XtWeight { n: 2, q: 4.0, beta: 0.0 };
    assert_eq!(w.at(0.0), 0.0);
    assert!((w.at(0.0625) - 0.5).abs() < 1e-12);
    assert_eq!(w.at(2.0), 1.0);
    let wb = XtWeight { beta: 1.0, ..w };
    assert!((wb.at(2.0) - 2f64.exp()).abs() < 1e-12);
    assert_eq!(xt_feasible_point(2), None);
    if let Some((q, s, r)) = xt_feasible_point(3) {
        assert!(xt_exponents_feasible(3, q, s, r));
    }
    assert!(!xt_exponents_feasible(3, 2.0, 3.0, 2.5));
}

#[test]
fn cfl_and_dimension_checks() {
    let g = Grid::new(8.0, 32, 16).unwrap();
    let u = FaceField::sample_frame(&g, |_, _| (0.0, 2.0));
    assert!((cfl_number(&u, 0.1) - 0.2 / g.min_spacing()).abs() < 1e-12);
    let m3 = ManifoldModel::hyperbolic(3).unwrap();
    assert!(matches!(imex_solve(&u, &m3, &EvolutionConfig::new(0.1, 0.1)), Err(Error::Domain(_))));
    let mut nan = u.clone();
    nan.u[0] = f64::NAN;
    assert!(matches!(nonlinear_faces(&nan, 1e-10), Err(Error::Domain(_))));
}
