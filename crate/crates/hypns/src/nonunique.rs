//! The harmonic-gradient family u = f(t)(dΦ)^♯ on H^2 and the pressure
//! criterion that selects one time profile.
//!
//! Φ is the first angular mode a(r) cos θ. In the disk model Φ = Re z with
//! |z| = tanh(r/2), so a(r) = tanh(r/2); the grid version solves the
//! discrete radial equation with that wall value, which makes Φ harmonic
//! for the compact Laplacian to round-off and u = GΦ exactly divergence free.
//!
//! For harmonic Φ on H^2, Δ⃗ dΦ = r(dΦ) = -dΦ and ∇_{dΦ} dΦ = ½ d|dΦ|², so
//! f(t)dΦ solves the momentum equation with
//!
//!   p = -(f' + 2f) Φ - ½ f² |dΦ|².
//!
//! Φ is bounded but not in L², so p ∈ L² forces f' = -2f. The form
//! (2f - f')Φ - ½f²|dΦ|² is kept as [`stated_pressure`] for comparison.

use crate::geometry::ManifoldModel;
use crate::grid::{lp_norm_within, CovectorField, Grid, ScalarField, VectorField};
use crate::mac::{FaceField, MacOps};
use crate::ops;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Constant,
    FirstMode,
}

#[derive(Debug, Clone)]
pub struct HarmonicPotential {
    pub grid: Arc<Grid>,
    /// Radial profile a_j at the nodes.
    pub radial: Vec<f64>,
    /// Φ(R_max, θ) = wall · cos θ.
    pub wall: f64,
    pub phi: ScalarField,
    /// (dΦ)^♯ on faces.
    pub faces: FaceField,
    pub dphi: CovectorField,
    pub dphi_l2: f64,
    /// ‖|dΦ|²‖₂
    pub dphi_sq_l2: f64,
    /// ‖Δ_g Φ‖₂ / ‖dΦ‖₂ over r ≤ R_max - 1.
    pub harmonic_residual: f64,
}

impl HarmonicPotential {
    pub fn phi_l2_within(&self, r: f64) -> f64 {
        lp_norm_within(&self.phi, 2.0, r).expect("p = 2")
    }

    pub fn dphi_l2_within(&self, r: f64) -> f64 {
        lp_norm_within(&self.dphi, 2.0, r).expect("p = 2")
    }

    pub fn dphi_sq(&self) -> ScalarField {
        self.dphi.dot(&self.dphi)
    }
}

/// Discrete first-mode radial profile: compact 5-point Laplacian, regular at
/// the pole, wall ghost a_n = 2A - a_{n-1}.
fn first_mode_profile(g: &Grid, wall: f64) -> Vec<f64> {
    let n = g.n_r;
    let h = g.h_r;
    let lam = 2.0 * (1.0 - g.h_theta.cos()) / (g.h_theta * g.h_theta);
    let mut lo = vec![0.0; n];
    let mut di = vec![0.0; n];
    let mut up = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for j in 0..n {
        let s = g.sinh[j];
        let so = g.sinh_face[j];
        let si = g.sinh_inner[j];
        // (so (a_{j+1} - a_j) - si (a_j - a_{j-1})) / (s h²) - lam a_j / s² = 0, scaled by s h²
        di[j] = -(so + si) - lam * h * h / s;
        if j > 0 {
            lo[j] = si;
        }
        if j + 1 < n {
            up[j] = so;
        } else {
            di[j] -= so;
            rhs[j] = -2.0 * so * wall;
        }
    }
    // Thomas
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = up[0] / di[0];
    d[0] = rhs[0] / di[0];
    for j in 1..n {
        let m = di[j] - lo[j] * c[j - 1];
        c[j] = up[j] / m;
        d[j] = (rhs[j] - lo[j] * d[j - 1]) / m;
    }
    let mut a = vec![0.0; n];
    a[n - 1] = d[n - 1];
    for j in (0..n - 1).rev() {
        a[j] = d[j] - c[j] * a[j + 1];
    }
    a
}

pub fn build_harmonic_potential(kind: PotentialKind, model: &ManifoldModel, grid: &Arc<Grid>) -> Result<HarmonicPotential> {
    if model.dimension != 2 {
        return Err(Error::Domain("the harmonic family is built on H^2".into()));
    }
    if kind == PotentialKind::Constant {
        return Err(Error::Domain("constant potential has dΦ = 0: trivial family".into()));
    }
    let g = grid;
    let wall = (0.5 * g.r_max).tanh();
    let radial = first_mode_profile(g, wall);
    let mut vals = vec![0.0; g.len()];
    for j in 0..g.n_r {
        for m in 0..g.n_theta {
            vals[g.idx(j, m)] = radial[j] * g.theta(m).cos();
        }
    }
    let phi = ScalarField::new(g.clone(), vals);
    let mac = MacOps::get(g);
    let mut faces = mac.gradient(&phi);
    // wall faces: the Dirichlet gradient assumed Φ = 0 on the wall
    for m in 0..g.n_theta {
        let i = g.idx(g.n_r - 1, m);
        faces.u[i] += 2.0 * wall * g.theta(m).cos() / g.h_r;
    }
    // node gradient with the wall ghost 2A - a instead of the Dirichlet -a
    let (mut gr, gth) = ops::scalar_gradient(&phi).frame();
    for m in 0..g.n_theta {
        gr[g.idx(g.n_r - 1, m)] += wall * g.theta(m).cos() / g.h_r;
    }
    let dphi = VectorField::from_frame(g, gr, gth).flat();
    let dphi_l2 = lp_norm_within(&dphi, 2.0, f64::INFINITY)?;
    let sq = dphi.dot(&dphi);
    let dphi_sq_l2 = lp_norm_within(&sq, 2.0, f64::INFINITY)?;
    let lap = ops::laplace_beltrami(&phi);
    let harmonic_residual = lp_norm_within(&lap, 2.0, g.r_max - 1.0)? / dphi_l2;
    let pot = HarmonicPotential { grid: g.clone(), radial, wall, phi, faces, dphi, dphi_l2, dphi_sq_l2, harmonic_residual };
    // dΦ ∈ L²: the norm must already be settled well inside the domain
    let inner = pot.dphi_l2_within(g.r_max - 2.0);
    if !(dphi_l2 > 0.0) || (dphi_l2 - inner) / dphi_l2 > 0.01 {
        return Err(Error::Domain(format!("‖dΦ‖₂ is not R-stable ({inner:.6e} vs {dphi_l2:.6e})")));
    }
    Ok(pot)
}

/// Closed-form time profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeProfile {
    /// c e^{a t}
    Exp { c: f64, a: f64 },
    /// Σ c_k t^k
    Poly { coeffs: Vec<f64> },
    /// Piecewise linear through (t, f) samples.
    Table { t: Vec<f64>, f: Vec<f64> },
}

impl TimeProfile {
    /// Registry: exp2 = e^{2t}, expm2 = e^{-2t}, const1 = 1, zero = 0,
    /// quad = 1 + t², and exp:<a> = e^{a t}.
    pub fn named(name: &str) -> Result<Self> {
        Ok(match name {
            "exp2" => TimeProfile::Exp { c: 1.0, a: 2.0 },
            "expm2" => TimeProfile::Exp { c: 1.0, a: -2.0 },
            "const1" => TimeProfile::Poly { coeffs: vec![1.0] },
            "zero" => TimeProfile::Poly { coeffs: vec![] },
            "quad" => TimeProfile::Poly { coeffs: vec![1.0, 0.0, 1.0] },
            other => match other.strip_prefix("exp:").map(str::parse::<f64>) {
                Some(Ok(a)) if a.is_finite() => TimeProfile::Exp { c: 1.0, a },
                _ => return Err(Error::Domain(format!("unknown time profile '{name}'"))),
            },
        })
    }

    pub fn table(t: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if t.len() < 2 || t.len() != f.len() || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("table profile needs >= 2 increasing times".into()));
        }
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("table profile has non-finite values".into()));
        }
        Ok(TimeProfile::Table { t, f })
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Exp { c, a } => c * (a * t).exp(),
            TimeProfile::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            TimeProfile::Table { t: ts, f } => {
                let k = segment(ts, t);
                let s = (t - ts[k]) / (ts[k + 1] - ts[k]);
                f[k] + s * (f[k + 1] - f[k])
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Exp { c, a } => c * a * (a * t).exp(),
            TimeProfile::Poly { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c),
            TimeProfile::Table { t: ts, f } => {
                let k = segment(ts, t);
                (f[k + 1] - f[k]) / (ts[k + 1] - ts[k])
            }
        }
    }
}

fn segment(ts: &[f64], t: f64) -> usize {
    let k = ts.partition_point(|&x| x <= t);
    k.saturating_sub(1).min(ts.len() - 2)
}

/// f(t)(dΦ)^♯ on nodes.
pub fn khesin_velocity(pot: &HarmonicPotential, profile: &TimeProfile, t: f64) -> VectorField {
    pot.dphi.sharp().scale(profile.value(t))
}

pub fn khesin_faces(pot: &HarmonicPotential, profile: &TimeProfile, t: f64) -> FaceField {
    pot.faces.scale(profile.value(t))
}

/// -(f' + 2f)Φ - ½f²|dΦ|²: the pressure that makes f(dΦ)^♯ a solution.
pub fn khesin_pressure(pot: &HarmonicPotential, profile: &TimeProfile, t: f64) -> ScalarField {
    let (f, fp) = (profile.value(t), profile.derivative(t));
    pot.phi.scale(-(fp + 2.0 * f)).axpy(-0.5 * f * f, &pot.dphi_sq())
}

/// (2f - f')Φ - ½f²|dΦ|², the coefficient form as usually quoted.
pub fn stated_pressure(pot: &HarmonicPotential, profile: &TimeProfile, t: f64) -> ScalarField {
    let (f, fp) = (profile.value(t), profile.derivative(t));
    pot.phi.scale(2.0 * f - fp).axpy(-0.5 * f * f, &pot.dphi_sq())
}

/// ‖∂_t u + ∇_u u + grad p - Δ⃗u - r(u)‖₂ over r ≤ R_max - 1, divided by the
/// sum of the term norms (0 when every term vanishes).
pub fn ns_residual(u: &VectorField, p: &ScalarField, u_dot: &VectorField, model: &ManifoldModel) -> Result<f64> {
    let g = &u.grid;
    if !(g.same_as(&p.grid) && g.same_as(&u_dot.grid)) {
        return Err(Error::GridMismatch("residual inputs live on different grids".into()));
    }
    let adv = ops::directional_derivative(u, u);
    let gp = ops::scalar_gradient(p);
    let lap = ops::bochner_laplacian(u);
    let ric = ops::ricci_operator(u, model);
    let res = u_dot.axpy(1.0, &adv).axpy(1.0, &gp).axpy(-1.0, &lap).axpy(-1.0, &ric);
    let cut = g.r_max - 1.0;
    let n = |f: &VectorField| lp_norm_within(f, 2.0, cut).expect("p = 2");
    let scale = n(u_dot) + n(&adv) + n(&gp) + n(&lap) + n(&ric);
    Ok(if scale == 0.0 { 0.0 } else { n(&res) / scale })
}

/// Residual of one family member at time t with the given pressure.
pub fn member_residual(
    pot: &HarmonicPotential,
    profile: &TimeProfile,
    t: f64,
    model: &ManifoldModel,
    pressure: fn(&HarmonicPotential, &TimeProfile, f64) -> ScalarField,
) -> Result<f64> {
    let u = khesin_velocity(pot, profile, t);
    let ud = pot.dphi.sharp().scale(profile.derivative(t));
    ns_residual(&u, &pressure(pot, profile, t), &ud, model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRow {
    pub radius: f64,
    pub pressure_l2: f64,
    pub phi_l2: f64,
    pub dphi_l2: f64,
}

/// ‖p(0)‖_{L²(r≤R)} along an increasing R ladder.
pub fn pressure_selection_scan(pot: &HarmonicPotential, profile: &TimeProfile, ladder: &[f64]) -> Result<Vec<GrowthRow>> {
    if ladder.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("R ladder must increase".into()));
    }
    if ladder.last().is_some_and(|&r| r >= pot.grid.r_max) {
        return Err(Error::Domain("R ladder must stay below R_max".into()));
    }
    let p = khesin_pressure(pot, profile, 0.0);
    ladder
        .iter()
        .map(|&r| {
            Ok(GrowthRow {
                radius: r,
                pressure_l2: lp_norm_within(&p, 2.0, r)?,
                phi_l2: pot.phi_l2_within(r),
                dphi_l2: pot.dphi_l2_within(r),
            })
        })
        .collect()
}

/// Last-over-first ratio of a growth table (1 for an all-zero table).
pub fn growth_ratio(rows: &[GrowthRow]) -> f64 {
    match (rows.first(), rows.last()) {
        (Some(a), Some(b)) if a.pressure_l2 > 0.0 => b.pressure_l2 / a.pressure_l2,
        _ => 1.0,
    }
}

pub const GROWTH_THRESHOLD: f64 = 1.5;
pub const SATURATION_THRESHOLD: f64 = 1.05;

/// ‖u(t)‖² + ∫_0^t ‖∇u‖² ≤ (1 + slack)‖u0‖² along the member, with ‖∇u‖²
/// = f² ‖∇dΦ‖² computed once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyCheck {
    pub worst_ratio: f64,
    pub admissible: bool,
}

pub fn energy_check(pot: &HarmonicPotential, profile: &TimeProfile, t_final: f64, dt: f64, slack: f64) -> EnergyCheck {
    let u1 = pot.dphi.sharp();
    let e1 = pot.dphi_l2.powi(2);
    let g1: f64 = {
        let gs = ops::gradient_norm_sq(&u1);
        let g = &pot.grid;
        let rings = g.rings_within(g.r_max - 1.0);
        (0..rings * g.n_theta).map(|i| g.weight(i / g.n_theta) * gs.values[i]).sum()
    };
    let f0 = profile.value(0.0);
    let e0 = f0 * f0 * e1;
    if e0 == 0.0 {
        return EnergyCheck { worst_ratio: 0.0, admissible: true };
    }
    let steps = (t_final / dt).round() as usize;
    let mut integral = 0.0;
    let mut worst = 1.0f64;
    let mut prev = f0 * f0;
    for k in 1..=steps {
        let t = k as f64 * dt;
        let f2 = profile.value(t).powi(2);
        integral += 0.5 * dt * (f2 + prev) * g1;
        prev = f2;
        worst = worst.max((f2 * e1 + integral) / e0);
    }
    EnergyCheck { worst_ratio: worst, admissible: worst <= 1.0 + slack }
}

/// ‖u_a(t) - u_b(t)‖₂ / ‖u0‖₂ for two members with the same f(0).
pub fn member_distance(a: &TimeProfile, b: &TimeProfile, t: f64) -> Result<f64> {
    let (fa0, fb0) = (a.value(0.0), b.value(0.0));
    if (fa0 - fb0).abs() > 1e-12 * fa0.abs().max(1.0) {
        return Err(Error::Domain(format!("profiles start from different f(0): {fa0} vs {fb0}")));
    }
    if fa0 == 0.0 {
        return Ok(0.0);
    }
    Ok((a.value(t) - b.value(t)).abs() / fa0.abs())
}
