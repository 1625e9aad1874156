//! Nonlinear solvers on H^2: ∂_t u = (Δ⃗ + r)u - ℙ div(u⊗u).
//!
//! On div-free data B vanishes (r(u) = -u is div free), so the Stokes part
//! reduces to the vector heat operator. Two integrators share the same
//! linear solve: an IMEX stepper and a Picard iteration on the stepped
//! Duhamel formula with left-endpoint quadrature. Velocities live on faces.

use crate::elliptic::{self, leray_project_faces};
use crate::geometry::ManifoldModel;
use crate::grid::{lp_norm, Grid, TensorField20, VectorField};
use crate::mac::{weighted_dot, FaceField, MacOps};
use crate::ops;
use crate::semigroup::{self, EvolutionConfig, LinearStepper, Scheme, State, Trajectory};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::cell::RefCell;
use std::sync::Arc;

/// ℙ div(u⊗u) on nodes.
pub fn nonlinear_term(u: &VectorField, tol: f64) -> Result<VectorField> {
    Ok(nonlinear_faces(&FaceField::from_nodes(u), tol)?.to_nodes())
}

/// ℙ div(u⊗u) for staggered velocities: the tensor divergence is formed on
/// nodes and projected on faces.
pub fn nonlinear_faces(u: &FaceField, tol: f64) -> Result<FaceField> {
    let n = u.to_nodes();
    if n.ur.iter().chain(&n.uth).any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite velocity".into()));
    }
    let d = ops::divergence_tensor(&TensorField20::outer(&n, &n));
    Ok(leray_project_faces(&FaceField::from_nodes(&d), tol)?.0)
}

/// Kinetic energy, dissipation and damping along a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRow {
    pub time: f64,
    pub kinetic: f64,
    /// ∫_0^t ‖∇u‖² ds
    pub dissipation: f64,
    /// c0 ∫_0^t ‖u‖² ds
    pub damping: f64,
    /// ‖u(t)‖² + 2 dissipation + 2 damping - ‖u0‖²
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub initial_energy: f64,
    pub rows: Vec<EnergyRow>,
}

impl EnergyLedger {
    /// max_t |residual| / ‖u0‖².
    pub fn max_relative_residual(&self) -> f64 {
        if self.initial_energy == 0.0 {
            return 0.0;
        }
        self.rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max) / self.initial_energy
    }

    /// Largest relative excess of ‖u(t)‖² + 2D + 2c0∫‖u‖² over ‖u0‖² (the
    /// inequality side), 0 when the inequality holds everywhere.
    pub fn max_excess(&self) -> f64 {
        if self.initial_energy == 0.0 {
            return 0.0;
        }
        self.rows.iter().map(|r| r.residual).fold(0.0, f64::max) / self.initial_energy
    }
}

/// ‖u‖² and the discrete ‖∇u‖² = ‖du‖² + ‖δu‖² + (n-1)‖u‖² on faces.
pub fn face_energies(mac: &MacOps, u: &FaceField, model: &ManifoldModel) -> (f64, f64) {
    let g = &mac.grid;
    let x = u.lattice();
    let xr: Vec<&Vec<f64>> = x.iter().collect();
    let e = weighted_dot(&mac.w_face, g, &xr, &xr);
    let c = mac.curl.apply(&x);
    let cr: Vec<&Vec<f64>> = c.iter().collect();
    let d = mac.div.apply(&x);
    let dr: Vec<&Vec<f64>> = d.iter().collect();
    let grad = weighted_dot(&mac.w_corner, g, &cr, &cr) + weighted_dot(&mac.w_cell, g, &dr, &dr) + model.c0 * e;
    (e, grad)
}

/// ‖ω‖₂ from the corner circulation (pole corner included).
pub fn vorticity_l2(mac: &MacOps, u: &FaceField) -> f64 {
    let c = mac.curl.apply(&u.lattice());
    let cr: Vec<&Vec<f64>> = c.iter().collect();
    weighted_dot(&mac.w_corner, &mac.grid, &cr, &cr).max(0.0).sqrt()
}

#[derive(Debug, Clone)]
pub struct NsRun {
    pub trajectory: Trajectory<VectorField>,
    pub last: FaceField,
    pub energy: EnergyLedger,
    /// (t, ‖ω(t)‖₂) at the ledger times.
    pub vorticity: Vec<(f64, f64)>,
    /// max_t ‖div u‖₂ / ‖u‖₂.
    pub max_divergence: f64,
    pub max_cfl: f64,
}

fn check_model(model: &ManifoldModel, cfg: &EvolutionConfig) -> Result<()> {
    if model.dimension != 2 {
        return Err(Error::Domain("the nonlinear solvers run on H^2".into()));
    }
    if cfg.scheme != Scheme::ImplicitEuler {
        log::warn!("nonlinear solvers use implicit Euler for the linear part; scheme setting ignored");
    }
    Ok(())
}

/// ‖u‖_∞ dt / min spacing.
pub fn cfl_number(u: &FaceField, dt: f64) -> f64 {
    let vmax = u.u.iter().chain(&u.v).fold(0.0f64, |m, x| m.max(x.abs()));
    vmax * dt / u.grid.min_spacing()
}

fn cfl_warn(c: f64, dt: f64) {
    if c > 0.5 {
        log::warn!("CFL number {c:.2} exceeds 0.5 (dt = {dt:.1e})");
    }
}

struct Linear<'a> {
    mac: Arc<MacOps>,
    stepper: LinearStepper<'a>,
}

/// One IMEX step: u* = (I - dt(Δ⃗+r))^{-1}(u - dt ℙdiv(u⊗u)), then ℙ.
pub fn imex_step_ns(u: &FaceField, dt: f64, model: &ManifoldModel, tol: f64) -> Result<FaceField> {
    if model.dimension != 2 {
        return Err(Error::Domain("the nonlinear solvers run on H^2".into()));
    }
    let mac = MacOps::get(&u.grid);
    let stepper = LinearStepper::new(&mac.evo, &mac.w_face, |a, b| mac.shifted_solver(a, b, false), 0.0, dt, Scheme::ImplicitEuler, tol);
    cfl_warn(cfl_number(u, dt), dt);
    step_with(&mac, &stepper, u, dt, tol)
}

fn step_with(mac: &MacOps, stepper: &LinearStepper<'_>, u: &FaceField, dt: f64, tol: f64) -> Result<FaceField> {
    let n = nonlinear_faces(u, tol)?.scale(-1.0);
    let next = stepper.step(&State::Full(u.lattice()), Some((&State::Full(n.lattice()), dt)))?;
    let star = FaceField::from_lattice(&mac.grid, next.lattice(mac.grid.n_theta));
    Ok(leray_project_faces(&star, tol)?.0)
}

/// IMEX trajectory with energy ledger and vorticity diagnostics.
pub fn imex_solve(u0: &FaceField, model: &ManifoldModel, cfg: &EvolutionConfig) -> Result<NsRun> {
    check_model(model, cfg)?;
    let g = u0.grid.clone();
    let mac = MacOps::get(&g);
    let lin = Linear {
        stepper: LinearStepper::new(&mac.evo, &mac.w_face, |a, b| mac.shifted_solver(a, b, false), 0.0, cfg.dt, Scheme::ImplicitEuler, cfg.tol),
        mac: mac.clone(),
    };
    let (e0, d0) = face_energies(&mac, u0, model);
    // running integrals, updated every step
    let acc = RefCell::new((0.0f64, 0.0f64, e0, d0));
    let ledger = RefCell::new(EnergyLedger { initial_energy: e0, rows: Vec::new() });
    let vort = RefCell::new(Vec::new());
    let max_div = RefCell::new(0.0f64);
    let max_cfl = RefCell::new(0.0f64);
    let mut final_state = None;
    let traj = semigroup::drive(
        cfg,
        State::Full(u0.lattice()),
        |s| {
            let u = FaceField::from_lattice(&g, s.lattice(g.n_theta));
            {
                let mut c = max_cfl.borrow_mut();
                *c = c.max(cfl_number(&u, cfg.dt));
            }
            let next = step_with(&lin.mac, &lin.stepper, &u, cfg.dt, cfg.tol)?;
            let (e, d) = face_energies(&lin.mac, &next, model);
            let mut a = acc.borrow_mut();
            let (dis, dam, e_prev, d_prev) = *a;
            *a = (
                dis + 0.5 * cfg.dt * (d + d_prev),
                dam + 0.5 * cfg.dt * model.c0 * (e + e_prev),
                e,
                d,
            );
            Ok(State::Full(next.lattice()))
        },
        |t, s| {
            final_state = Some(s.clone());
            let f = FaceField::from_lattice(&g, s.lattice(g.n_theta));
            let a = acc.borrow();
            ledger.borrow_mut().rows.push(EnergyRow {
                time: t,
                kinetic: a.2,
                dissipation: a.0,
                damping: a.1,
                residual: a.2 + 2.0 * a.0 + 2.0 * a.1 - e0,
            });
            vort.borrow_mut().push((t, vorticity_l2(&mac, &f)));
            let n = f.norm2();
            if n > 0.0 {
                let dv = lp_norm(&mac.divergence(&f), 2.0).expect("p = 2");
                let mut m = max_div.borrow_mut();
                *m = m.max(dv / n);
            }
            semigroup::observe_vector(&g, model.c0, t, s)
        },
    )?;
    let last = FaceField::from_lattice(&g, final_state.expect("recorded").lattice(g.n_theta));
    let max_cfl = max_cfl.into_inner();
    cfl_warn(max_cfl, cfg.dt);
    Ok(NsRun {
        trajectory: traj,
        last,
        energy: ledger.into_inner(),
        vorticity: vort.into_inner(),
        max_divergence: max_div.into_inner(),
        max_cfl,
    })
}

/// Weighted norm sup_t c_n(t)^{-(1/n - 1/q)} e^{βt} ‖u(t)‖_q with
/// c_n(t) = max(t^{-n/2}, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XtWeight {
    pub n: usize,
    pub q: f64,
    pub beta: f64,
}

impl XtWeight {
    pub fn at(&self, t: f64) -> f64 {
        let n = self.n as f64;
        let c = if t <= 0.0 { f64::INFINITY } else { t.powf(-n / 2.0).max(1.0) };
        let w = c.powf(-(1.0 / n - 1.0 / self.q));
        let w = if w.is_finite() { w } else { 0.0 };
        w * (self.beta * t).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardState {
    pub iterate_index: usize,
    /// ‖u_{k+1} - u_k‖_X for k = 1, 2, ...
    pub differences: Vec<f64>,
    pub ratios: Vec<f64>,
    /// ‖u_k‖_X
    pub norms: Vec<f64>,
    pub weight: XtWeight,
    /// ‖u_2 - u_1‖_X / ‖u_1‖_X², a measured bilinear constant.
    pub gamma_est: Option<f64>,
    pub converged: bool,
}

impl PicardState {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardConfig {
    pub dt: f64,
    pub t_final: f64,
    pub q: f64,
    pub beta: f64,
    pub max_iter: usize,
    /// Stop when ‖u_{k+1} - u_k‖_X ≤ tol·‖u_{k+1}‖_X.
    pub tol: f64,
    pub solver_tol: f64,
}

impl PicardConfig {
    pub fn new(dt: f64, t_final: f64, model: &ManifoldModel) -> Self {
        Self { dt, t_final, q: 4.0, beta: model.c0, max_iter: 40, tol: 1e-8, solver_tol: elliptic::DEFAULT_TOL }
    }
}

fn xt_norm(weight: &XtWeight, dt: f64, traj: &[FaceField]) -> f64 {
    traj.par_iter()
        .enumerate()
        .map(|(k, u)| weight.at(k as f64 * dt) * lp_norm(&u.to_nodes(), weight.q).expect("q >= 1"))
        .reduce(|| 0.0, f64::max)
}

fn xt_diff(weight: &XtWeight, dt: f64, a: &[FaceField], b: &[FaceField]) -> f64 {
    a.par_iter()
        .zip(b)
        .enumerate()
        .map(|(k, (x, y))| weight.at(k as f64 * dt) * lp_norm(&x.axpy(-1.0, y).to_nodes(), weight.q).expect("q >= 1"))
        .reduce(|| 0.0, f64::max)
}

/// u_{k+1}(t) = S(t)u0 - ∫ S(t-s) ℙdiv(u_k⊗u_k) ds, stepped with the linear
/// solver and left-endpoint forcing. Returns the limit trajectory at every
/// step together with the iteration diagnostics.
pub fn picard_solve(u0: &FaceField, model: &ManifoldModel, cfg: &PicardConfig) -> Result<(Vec<FaceField>, PicardState)> {
    if model.dimension != 2 {
        return Err(Error::Domain("the nonlinear solvers run on H^2".into()));
    }
    if !(cfg.q > model.dimension as f64) {
        return Err(Error::Domain(format!("X_T needs q > n, got q = {}", cfg.q)));
    }
    if !(cfg.dt > 0.0 && cfg.t_final > 0.0) {
        return Err(Error::Domain("Picard needs dt > 0 and T > 0".into()));
    }
    let g = u0.grid.clone();
    let mac = MacOps::get(&g);
    let d0 = lp_norm(&mac.divergence(u0), 2.0)?;
    if d0 > 1e-8 * u0.norm2().max(f64::MIN_POSITIVE) {
        log::warn!("Picard initial data is not divergence free (‖div u0‖ = {d0:.3e})");
    }
    let steps = (cfg.t_final / cfg.dt).round() as usize;
    let stepper = LinearStepper::new(&mac.evo, &mac.w_face, |a, b| mac.shifted_solver(a, b, false), 0.0, cfg.dt, Scheme::ImplicitEuler, cfg.solver_tol);
    let weight = XtWeight { n: model.dimension, q: cfg.q, beta: cfg.beta };
    let sweep = |forcing: Option<&[FaceField]>| -> Result<Vec<FaceField>> {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(u0.clone());
        let mut s = State::Full(u0.lattice());
        for k in 0..steps {
            s = match forcing {
                None => stepper.step(&s, None)?,
                Some(f) => stepper.step(&s, Some((&State::Full(f[k].lattice()), cfg.dt)))?,
            };
            out.push(FaceField::from_lattice(&g, s.lattice(g.n_theta)));
        }
        Ok(out)
    };
    let mut cur = sweep(None)?;
    let mut st = PicardState {
        iterate_index: 1,
        differences: Vec::new(),
        ratios: Vec::new(),
        norms: vec![xt_norm(&weight, cfg.dt, &cur)],
        weight,
        gamma_est: None,
        converged: false,
    };
    if st.norms[0] == 0.0 {
        st.converged = true;
        return Ok((cur, st));
    }
    let mut rising = 0;
    while st.iterate_index < cfg.max_iter {
        let forcing: Vec<FaceField> = cur[..steps]
            .par_iter()
            .map(|u| nonlinear_faces(u, cfg.solver_tol).map(|n| n.scale(-1.0)))
            .collect::<Result<_>>()?;
        let next = sweep(Some(&forcing))?;
        let diff = xt_diff(&weight, cfg.dt, &next, &cur);
        let norm = xt_norm(&weight, cfg.dt, &next);
        st.iterate_index += 1;
        if st.gamma_est.is_none() {
            st.gamma_est = Some(diff / st.norms[0].powi(2));
        }
        if let Some(&prev) = st.differences.last() {
            let ratio = if prev > 0.0 { diff / prev } else { 0.0 };
            st.ratios.push(ratio);
            rising = if ratio > 1.0 { rising + 1 } else { 0 };
        }
        st.differences.push(diff);
        st.norms.push(norm);
        cur = next;
        log::debug!("picard iterate {}: diff {diff:.3e}, norm {norm:.3e}", st.iterate_index);
        if rising >= 3 {
            return Err(Error::NonContraction(format!(
                "difference ratios {:?} exceeded 1 three times in a row",
                &st.ratios[st.ratios.len() - 3..]
            )));
        }
        if diff <= cfg.tol * norm {
            st.converged = true;
            break;
        }
    }
    if !st.converged {
        log::warn!("Picard stopped at max_iter = {} with difference {:.3e}", cfg.max_iter, st.differences.last().unwrap_or(&0.0));
    }
    Ok((cur, st))
}

/// Amplitude factor a such that 4 γ ‖a u_1‖_X = target (with ‖u_1‖_X and γ
/// measured for the unscaled data).
pub fn small_data_scale(gamma_est: f64, u1_norm: f64, target: f64) -> f64 {
    target / (4.0 * gamma_est * u1_norm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallReport {
    pub delta_norm: f64,
    /// (t, ‖u - v‖₂(t), ∫_0^t ‖∇v‖₂²)
    pub rows: Vec<(f64, f64, f64)>,
    /// max_t ln(‖u-v‖(t)/‖δ‖) / ∫_0^t ‖∇v‖²
    pub c_fit: f64,
}

/// Two IMEX runs from u0 and u0 + δ.
pub fn gronwall_fit(u0: &FaceField, delta: &FaceField, model: &ManifoldModel, cfg: &EvolutionConfig) -> Result<GronwallReport> {
    let mut c = cfg.clone();
    c.store_fields = true;
    let a = imex_solve(u0, model, &c)?;
    let b = imex_solve(&u0.axpy(1.0, delta), model, &c)?;
    let dn = delta.to_nodes();
    let dnorm = lp_norm(&dn, 2.0)?;
    let mut rows = Vec::new();
    let mut c_fit = f64::NEG_INFINITY;
    for (((t, ua), (_, ub)), row) in a.trajectory.snapshots.iter().zip(&b.trajectory.snapshots).zip(&b.trajectory.ledger) {
        let d = lp_norm(&ua.axpy(-1.0, ub), 2.0)?;
        let int = dissipation_at(&b, row.time);
        rows.push((*t, d, int));
        if int > 0.0 && dnorm > 0.0 {
            c_fit = c_fit.max((d / dnorm).ln() / int);
        }
    }
    Ok(GronwallReport { delta_norm: dnorm, rows, c_fit })
}

fn dissipation_at(run: &NsRun, t: f64) -> f64 {
    run.energy
        .rows
        .iter()
        .find(|r| (r.time - t).abs() < 1e-12)
        .map(|r| r.dissipation)
        .unwrap_or(0.0)
}

/// Exponent conditions for the general-manifold X_T space: Hölder pairing
/// 1/r = 1/q + 1/s, 1/2 = 1/q + 1/q̃, and the three families of bounds on
/// (q, r, s), (s, r) and (q̃, r).
pub fn xt_exponents_feasible(n: usize, q: f64, s: f64, r: f64) -> bool {
    let nf = n as f64;
    if !(q > 2.0) {
        return false;
    }
    let qt = 1.0 / (0.5 - 1.0 / q);
    let holder = ((1.0 / r) - (1.0 / q + 1.0 / s)).abs() < 1e-12;
    let r_band = (2.0..nf).contains(&r);
    let co2 = q >= nf && q >= r && r_band && s > nf / 2.0 && 1.0 / r <= 1.0 / s + 1.0 / nf + 1e-12;
    let co3 = s >= nf && s >= r && r_band && 1.0 / r <= 1.0 / s + 1.0 / nf + 1e-12;
    let co4 = qt >= nf && qt >= r && r_band && 1.0 / r <= 1.0 / qt + 1.0 / nf + 1e-12;
    holder && co2 && co3 && co4
}

/// Scan q on a grid (s fixed by r and q, r on a grid) and return one
/// feasible triple (q, s, r) if any.
pub fn xt_feasible_point(n: usize) -> Option<(f64, f64, f64)> {
    let nf = n as f64;
    for i in 1..400 {
        let q = nf + 0.05 * i as f64;
        for k in 0..200 {
            let r = 2.0 + (nf - 2.0) * k as f64 / 200.0;
            let inv_s = 1.0 / r - 1.0 / q;
            if inv_s <= 0.0 {
                continue;
            }
            let s = 1.0 / inv_s;
            if xt_exponents_feasible(n, q, s, r) {
                return Some((q, s, r));
            }
        }
    }
    None
}

/// The linearized run: the Bochner flow from the same data.
pub fn linear_reference(u0: &FaceField, model: &ManifoldModel, cfg: &EvolutionConfig) -> Result<FaceField> {
    Ok(semigroup::evolve_bochner_heat_faces(u0, model, cfg)?.1)
}

pub fn relative_l2(a: &FaceField, b: &FaceField) -> f64 {
    let nb = b.norm2();
    if nb == 0.0 {
        return a.norm2();
    }
    a.axpy(-1.0, b).norm2() / nb
}

/// Divergence-free test data: the Leray projection of a ring bump at r = 1
/// carrying modes 0, 1 and 2, scaled by `amplitude`.
pub fn ring_data(grid: &Arc<Grid>, amplitude: f64, tol: f64) -> Result<FaceField> {
    let f = FaceField::sample_frame(grid, |r, th| {
        let e = amplitude * (-(r - 1.0).powi(2)).exp();
        (e * (2.0 * th).cos(), e * (1.0 + th.sin()))
    });
    Ok(leray_project_faces(&f, tol)?.0)
}
