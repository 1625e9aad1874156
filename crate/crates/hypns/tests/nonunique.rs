use hypns::cli::track_selected;
use hypns::grid::Grid;
use hypns::nonunique::*;
use hypns::{Error, ManifoldModel};
use std::f64::consts::PI;

fn h2() -> ManifoldModel {
    ManifoldModel::hyperbolic(2).unwrap()
}

fn potential(n_r: usize, n_t: usize) -> HarmonicPotential {
    build_harmonic_potential(PotentialKind::FirstMode, &h2(), &Grid::new(12.0, n_r, n_t).unwrap()).unwrap()
}

#[test]
fn potential_matches_closed_form() {
    // Φ = tanh(r/2) cos θ, |dΦ|² = ¼ sech⁴(r/2), ‖dΦ‖₂² = π
    let pot = potential(384, 256);
    assert!((pot.dphi_l2 - PI.sqrt()).abs() < 1e-3, "{}", pot.dphi_l2);
    assert!(pot.harmonic_residual < 1e-3);
    let g = &pot.grid;
    let worst = (0..g.n_r).map(|j| (pot.radial[j] - (g.r[j] / 2.0).tanh()).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-4, "profile error {worst:.3e}");
    assert_eq!(pot.wall, 6f64.tanh());
    assert!(matches!(
        build_harmonic_potential(PotentialKind::Constant, &h2(), g),
        Err(Error::Domain(_))
    ));
}

#[test]
fn profiles() {
    let e = TimeProfile::named("exp2").unwrap();
    assert_eq!(e.value(0.5), 1f64.exp());
    assert_eq!(e.derivative(0.0), 2.0);
    let q = TimeProfile::named("quad").unwrap();
    assert_eq!(q.value(2.0), 5.0);
    assert_eq!(q.derivative(2.0), 4.0);
    assert_eq!(TimeProfile::named("zero").unwrap().value(3.0), 0.0);
    assert_eq!(TimeProfile::named("exp:-1.5").unwrap().derivative(0.0), -1.5);
    assert!(TimeProfile::named("exp:nan").is_err());
    assert!(TimeProfile::named("cosh").is_err());
    let t = TimeProfile::table(vec![0.0, 1.0, 2.0], vec![1.0, 3.0, 2.0]).unwrap();
    assert_eq!(t.value(0.5), 2.0);
    assert_eq!(t.derivative(1.5), -1.0);
    assert_eq!(t.value(3.0), 1.0);
    assert!(TimeProfile::table(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    assert!(TimeProfile::table(vec![0.0], vec![1.0]).is_err());
}

#[test]
fn consistent_pressure_solves_the_equations() {
    let pot = potential(384, 256);
    for name in ["exp2", "const1", "expm2", "quad"] {
        let p = TimeProfile::named(name).unwrap();
        for t in [0.0, 0.5] {
            let r = member_residual(&pot, &p, t, &h2(), khesin_pressure).unwrap();
            assert!(r <= 1e-3, "{name} t = {t}: {r:.3e}");
        }
    }
    let quoted = member_residual(&pot, &TimeProfile::named("exp2").unwrap(), 0.5, &h2(), stated_pressure).unwrap();
    assert!(quoted > 0.1);
}

#[test]
fn residual_converges_with_refinement() {
    let p = TimeProfile::named("const1").unwrap();
    let a = member_residual(&potential(96, 64), &p, 0.0, &h2(), khesin_pressure).unwrap();
    let b = member_residual(&potential(192, 128), &p, 0.0, &h2(), khesin_pressure).unwrap();
    assert!((a / b).log2() > 0.8, "{a:.3e} -> {b:.3e}");
}

#[test]
fn pressure_growth_selects_expm2() {
    let pot = potential(192, 128);
    let ladder = [4.0, 6.0, 8.0, 10.0, 11.0];
    let grow = |n: &str| growth_ratio(&pressure_selection_scan(&pot, &TimeProfile::named(n).unwrap(), &ladder).unwrap());
    assert!(grow("const1") >= GROWTH_THRESHOLD);
    assert!(grow("exp2") >= GROWTH_THRESHOLD);
    assert!(grow("expm2") <= SATURATION_THRESHOLD, "{}", grow("expm2"));
    assert_eq!(growth_ratio(&[]), 1.0);
    let p = TimeProfile::named("const1").unwrap();
    assert!(pressure_selection_scan(&pot, &p, &[4.0, 3.0]).is_err());
    assert!(pressure_selection_scan(&pot, &p, &[4.0, 12.0]).is_err());
    let rows = pressure_selection_scan(&pot, &p, &ladder).unwrap();
    assert!(rows.windows(2).all(|w| w[1].phi_l2 > w[0].phi_l2 && w[1].dphi_l2 >= w[0].dphi_l2));
}

#[test]
fn energy_admissibility() {
    let pot = potential(192, 128);
    let chk = |n: &str| energy_check(&pot, &TimeProfile::named(n).unwrap(), 1.0, 1e-3, 0.02);
    assert!(chk("expm2").admissible);
    assert!(!chk("exp2").admissible);
    assert!(!chk("const1").admissible);
    assert!(chk("zero").admissible);
}

#[test]
fn member_distance_oracle() {
    let a = TimeProfile::named("exp2").unwrap();
    let b = TimeProfile::named("const1").unwrap();
    let d = member_distance(&a, &b, 0.5).unwrap();
    assert!((d - (1f64.exp() - 1.0)).abs() < 1e-12);
    assert!(member_distance(&a, &TimeProfile::named("zero").unwrap(), 0.5).is_err());
}

#[test]
fn imex_tracks_the_selected_member() {
    let pot = potential(96, 64);
    let rows = track_selected(&pot, &h2(), &TimeProfile::named("expm2").unwrap(), 5e-3, 0.3, 1e-11).unwrap();
    assert_eq!(rows.len(), 11);
    let worst = rows.iter().map(|r| r[1]).fold(0.0, f64::max);
    assert!(worst <= 0.02, "{worst:.3e}");
}

#[test]
fn energy_admits_several_profiles_pressure_selects_one() {
    let pot = potential(192, 128);
    let slow = TimeProfile::named("exp:-1").unwrap();
    let fast = TimeProfile::named("expm2").unwrap();
    assert!(energy_check(&pot, &slow, 1.0, 1e-3, 0.02).admissible);
    assert!(energy_check(&pot, &fast, 1.0, 1e-3, 0.02).admissible);
    assert!(member_distance(&slow, &fast, 0.5).unwrap() > 0.1);
    let ladder = [4.0, 6.0, 8.0, 10.0, 11.0];
    assert!(growth_ratio(&pressure_selection_scan(&pot, &slow, &ladder).unwrap()) >= GROWTH_THRESHOLD);
    assert!(growth_ratio(&pressure_selection_scan(&pot, &fast, &ladder).unwrap()) <= SATURATION_THRESHOLD);
}
