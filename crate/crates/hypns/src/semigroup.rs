//! Linear evolutions: the damped scalar heat flow, the vector heat flow for
//! Δ⃗ + r, the Stokes flow with the non-local term B, and a radial heat solver
//! on H^3 with its closed-form kernel.

use crate::elliptic::{self, broadcast, rings_of, ShiftedSystem};
use crate::geometry::ManifoldModel;
use crate::grid::{lp_norm, Grid, ScalarField, VectorField};
use crate::mac::{FaceField, MacOps};
use crate::ops;
use crate::spectral::{apply_rings, ModeSolver, StencilOp};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    Trapezoidal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    /// Ledger rows are recorded at these times (t = 0 is always added).
    pub snapshot_times: Vec<f64>,
    /// Keep the field at every snapshot, not only the last one.
    pub store_fields: bool,
    pub tol: f64,
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            scheme: Scheme::ImplicitEuler,
            snapshot_times: vec![t_final],
            store_fields: false,
            tol: elliptic::DEFAULT_TOL,
        }
    }

    /// Snapshots at every multiple of `every` up to t_final.
    pub fn every(mut self, every: f64) -> Self {
        let n = (self.t_final / every).round() as usize;
        self.snapshot_times = (1..=n).map(|k| k as f64 * every).collect();
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn storing(mut self) -> Self {
        self.store_fields = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::Domain(format!("T_final must be non-negative, got {}", self.t_final)));
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|&&t| !(t >= 0.0 && t <= self.t_final * (1.0 + 1e-12)))
        {
            return Err(Error::Domain(format!("snapshot time {t} outside [0, {}]", self.t_final)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain("solver tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Step indices at which ledger rows are recorded, ascending and unique.
    fn snapshot_steps(&self) -> Vec<usize> {
        let mut s: Vec<usize> = std::iter::once(0)
            .chain(self.snapshot_times.iter().map(|t| (t / self.dt).round() as usize))
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// One ledger row. Field names match the CSV header.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub time: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "L4")]
    pub l4: f64,
    #[serde(rename = "Linf")]
    pub linf: f64,
    #[serde(rename = "grad_L2")]
    pub grad_l2: f64,
    /// ∫_0^t (‖∇u‖² + c0 ‖u‖²) ds, trapezoidal over the snapshot times.
    pub energy_integral: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory<F> {
    pub snapshots: Vec<(f64, F)>,
    pub ledger: Vec<NormRow>,
    pub step_count: usize,
}

impl<F> Trajectory<F> {
    pub fn last(&self) -> &F {
        &self.snapshots.last().expect("trajectory has at least one snapshot").1
    }

    pub fn series(&self, pick: impl Fn(&NormRow) -> f64) -> Vec<(f64, f64)> {
        self.ledger.iter().map(|r| (r.time, pick(r))).collect()
    }
}

pub(crate) fn norm_row<F: crate::grid::PointwiseNorm>(t: f64, f: &F, grad_sq: &ScalarField) -> NormRow {
    let g = f.grid().clone();
    let gl2 = grad_sq.values.iter().enumerate().fold(0.0, |acc, (i, v)| acc + g.weight(i / g.n_theta) * v);
    NormRow {
        time: t,
        l1: lp_norm(f, 1.0).expect("valid p"),
        l2: lp_norm(f, 2.0).expect("valid p"),
        l4: lp_norm(f, 4.0).expect("valid p"),
        linf: lp_norm(f, f64::INFINITY).expect("valid p"),
        grad_l2: gl2.max(0.0).sqrt(),
        energy_integral: 0.0,
    }
}

/// Either the full lattice or, for θ-independent data, one value per ring.
#[derive(Debug, Clone)]
pub(crate) enum State {
    Full(Vec<Vec<f64>>),
    Rings(Vec<Vec<f64>>),
}

impl State {
    pub(crate) fn from_lattice(x: Vec<Vec<f64>>, nr: usize, nt: usize, axisym: bool) -> Self {
        if axisym {
            State::Rings(x.iter().map(|c| rings_of(c, nr, nt)).collect())
        } else {
            State::Full(x)
        }
    }

    pub(crate) fn lattice(&self, nt: usize) -> Vec<Vec<f64>> {
        match self {
            State::Full(x) => x.clone(),
            State::Rings(x) => x.iter().map(|c| broadcast(c, nt)).collect(),
        }
    }
}

/// (α_l I - β_l A) x_{n+1} = (α_r I + β_r A) x_n + dt·extra.
pub(crate) struct LinearStepper<'a> {
    pub op: &'a StencilOp,
    pub weights: &'a [Vec<f64>],
    pub solver: Arc<ModeSolver>,
    pub alpha_l: f64,
    pub beta_l: f64,
    pub alpha_r: f64,
    pub beta_r: f64,
    pub tol: f64,
}

impl<'a> LinearStepper<'a> {
    pub fn new(
        op: &'a StencilOp,
        weights: &'a [Vec<f64>],
        solver_for: impl Fn(f64, f64) -> Arc<ModeSolver>,
        damping: f64,
        dt: f64,
        scheme: Scheme,
        tol: f64,
    ) -> Self {
        // dX/dt = (A - damping) X
        let (al, bl, ar, br) = match scheme {
            Scheme::ImplicitEuler => (1.0 + damping * dt, dt, 1.0, 0.0),
            Scheme::Trapezoidal => (1.0 + 0.5 * damping * dt, 0.5 * dt, 1.0 - 0.5 * damping * dt, 0.5 * dt),
        };
        Self {
            op,
            weights,
            solver: solver_for(al, bl),
            alpha_l: al,
            beta_l: bl,
            alpha_r: ar,
            beta_r: br,
            tol,
        }
    }

    fn rhs(&self, x: &State) -> State {
        let comb = |x: &Vec<Vec<f64>>, ax: Option<Vec<Vec<f64>>>| -> Vec<Vec<f64>> {
            match ax {
                None => x.iter().map(|c| c.iter().map(|v| self.alpha_r * v).collect()).collect(),
                Some(ax) => x
                    .iter()
                    .zip(ax)
                    .map(|(c, a)| c.iter().zip(a).map(|(v, w)| self.alpha_r * v + self.beta_r * w).collect())
                    .collect(),
            }
        };
        let use_op = self.beta_r != 0.0;
        match x {
            State::Full(v) => State::Full(comb(v, use_op.then(|| self.op.apply(v)))),
            State::Rings(v) => State::Rings(comb(v, use_op.then(|| apply_rings(self.op, v)))),
        }
    }

    pub fn step(&self, x: &State, extra: Option<(&State, f64)>) -> Result<State> {
        let mut b = self.rhs(x);
        if let Some((e, dt)) = extra {
            let add = |bb: &mut Vec<Vec<f64>>, ee: &Vec<Vec<f64>>| {
                for (bc, ec) in bb.iter_mut().zip(ee) {
                    for (bv, ev) in bc.iter_mut().zip(ec) {
                        *bv += dt * ev;
                    }
                }
            };
            match (&mut b, e) {
                (State::Full(bb), State::Full(ee)) => add(bb, ee),
                (State::Rings(bb), State::Rings(ee)) => add(bb, ee),
                _ => return Err(Error::GridMismatch("mixed axisymmetric and full states".into())),
            }
        }
        let sys = ShiftedSystem {
            op: self.op,
            alpha: self.alpha_l,
            beta: self.beta_l,
            weights: self.weights,
            precond: &self.solver,
        };
        Ok(match b {
            State::Full(bb) => State::Full(sys.solve(&bb, self.tol)?.0),
            State::Rings(bb) => State::Rings(sys.solve_rings(&bb, self.tol)?.0),
        })
    }
}

/// Shared driver: steps, records ledger rows and integrates the energy.
pub(crate) fn drive<F: Clone>(
    cfg: &EvolutionConfig,
    mut state: State,
    mut step: impl FnMut(&State) -> Result<State>,
    mut observe: impl FnMut(f64, &State) -> (F, NormRow, f64),
) -> Result<Trajectory<F>> {
    cfg.validate()?;
    let snaps = cfg.snapshot_steps();
    let nsteps = cfg.steps();
    let mut traj = Trajectory { snapshots: Vec::new(), ledger: Vec::new(), step_count: 0 };
    let mut integral = 0.0;
    let mut last: Option<(f64, f64)> = None;
    let mut record = |k: usize, st: &State, traj: &mut Trajectory<F>| {
        let t = k as f64 * cfg.dt;
        let (field, mut row, rate) = observe(t, st);
        if let Some((t0, r0)) = last {
            integral += 0.5 * (t - t0) * (rate + r0);
        }
        last = Some((t, rate));
        row.energy_integral = integral;
        traj.ledger.push(row);
        if cfg.store_fields || k == nsteps || k == *snaps.last().unwrap_or(&0) {
            traj.snapshots.push((t, field));
        }
    };
    let mut next = 0;
    for k in 0..=nsteps {
        if k > 0 {
            state = step(&state)?;
            traj.step_count += 1;
        }
        if next < snaps.len() && snaps[next] == k {
            record(k, &state, &mut traj);
            next += 1;
        }
    }
    // keep only the final field unless asked otherwise
    if !cfg.store_fields && traj.snapshots.len() > 1 {
        let keep = traj.snapshots.pop().expect("non-empty");
        traj.snapshots = vec![keep];
    }
    Ok(traj)
}

/// ∂_t f = (Δ_g - c0) f with f = 0 at R_max.
pub fn evolve_scalar_heat(f0: &ScalarField, c0: f64, cfg: &EvolutionConfig) -> Result<Trajectory<ScalarField>> {
    if f0.values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite initial data".into()));
    }
    let g = f0.grid.clone();
    let mac = MacOps::get(&g);
    let axisym = f0.is_axisymmetric();
    let stepper = LinearStepper::new(
        &mac.lap,
        &mac.w_cell,
        |a, b| mac.scalar_shifted_solver(a, b, axisym),
        c0,
        cfg.dt,
        cfg.scheme,
        cfg.tol,
    );
    let state = State::from_lattice(vec![f0.values.clone()], g.n_r, g.n_theta, axisym);
    drive(
        cfg,
        state,
        |s| stepper.step(s, None),
        |t, s| {
            let f = ScalarField::new(g.clone(), s.lattice(g.n_theta).swap_remove(0));
            let gr = ops::scalar_gradient(&f);
            let gsq = gr.dot(&gr);
            let row = norm_row(t, &f, &gsq);
            let rate = row.grad_l2.powi(2) + c0 * row.l2.powi(2);
            (f, row, rate)
        },
    )
}

pub(crate) fn face_state(u: &FaceField) -> State {
    let g = &u.grid;
    State::from_lattice(u.lattice(), g.n_r, g.n_theta, u.is_axisymmetric())
}

pub(crate) fn observe_vector(g: &Arc<Grid>, c0: f64, t: f64, s: &State) -> (VectorField, NormRow, f64) {
    let f = FaceField::from_lattice(g, s.lattice(g.n_theta));
    let u = f.to_nodes();
    let gsq = ops::gradient_norm_sq(&u);
    let row = norm_row(t, &u, &gsq);
    let rate = row.grad_l2.powi(2) + c0 * row.l2.powi(2);
    (u, row, rate)
}

/// ∂_t u = Δ⃗u + r(u) on faces, starting from staggered data.
pub fn evolve_bochner_heat_faces(u0: &FaceField, model: &ManifoldModel, cfg: &EvolutionConfig) -> Result<(Trajectory<VectorField>, FaceField)> {
    check_plane(model)?;
    let g = u0.grid.clone();
    let mac = MacOps::get(&g);
    let state = face_state(u0);
    let axisym = matches!(state, State::Rings(_));
    let stepper = LinearStepper::new(
        &mac.evo,
        &mac.w_face,
        |a, b| mac.shifted_solver(a, b, axisym),
        0.0,
        cfg.dt,
        cfg.scheme,
        cfg.tol,
    );
    let mut final_state = None;
    let traj = drive(
        cfg,
        state,
        |s| stepper.step(s, None),
        |t, s| {
            final_state = Some(s.clone());
            observe_vector(&g, model.c0, t, s)
        },
    )?;
    let last = FaceField::from_lattice(&g, final_state.expect("recorded").lattice(g.n_theta));
    Ok((traj, last))
}

/// ∂_t u = Δ⃗u + r(u) for node data (interpolated to faces internally).
pub fn evolve_bochner_heat(u0: &VectorField, model: &ManifoldModel, cfg: &EvolutionConfig) -> Result<Trajectory<VectorField>> {
    Ok(evolve_bochner_heat_faces(&FaceField::from_nodes(u0), model, cfg)?.0)
}

/// ∂_t u = Δ⃗u + r(u) + Bu with B lagged and one fixed-point correction per step.
pub fn evolve_stokes_faces(u0: &FaceField, model: &ManifoldModel, cfg: &EvolutionConfig) -> Result<(Trajectory<VectorField>, FaceField)> {
    check_plane(model)?;
    let g = u0.grid.clone();
    let mac = MacOps::get(&g);
    let d0 = crate::grid::lp_norm(&mac.divergence(u0), 2.0)?;
    let n0 = u0.norm2();
    if d0 > 1e-8 * n0 {
        log::warn!("Stokes initial data is not divergence free: ‖div u0‖ = {d0:.3e}, ‖u0‖ = {n0:.3e}");
    }
    let state = face_state(u0);
    let axisym = matches!(state, State::Rings(_));
    let stepper = LinearStepper::new(
        &mac.evo,
        &mac.w_face,
        |a, b| mac.shifted_solver(a, b, axisym),
        0.0,
        cfg.dt,
        cfg.scheme,
        cfg.tol,
    );
    let b_of = |s: &State| -> Result<State> {
        let f = FaceField::from_lattice(&g, s.lattice(g.n_theta));
        let bu = elliptic::operator_b_faces(&f, model, cfg.tol)?;
        Ok(State::from_lattice(bu.lattice(), g.n_r, g.n_theta, axisym))
    };
    let mut final_state = None;
    let traj = drive(
        cfg,
        state,
        |s| {
            let lag = b_of(s)?;
            let pred = stepper.step(s, Some((&lag, cfg.dt)))?;
            let corr = b_of(&pred)?;
            stepper.step(s, Some((&corr, cfg.dt)))
        },
        |t, s| {
            final_state = Some(s.clone());
            observe_vector(&g, model.c0, t, s)
        },
    )?;
    let last = FaceField::from_lattice(&g, final_state.expect("recorded").lattice(g.n_theta));
    Ok((traj, last))
}

pub fn evolve_stokes(u0: &VectorField, model: &ManifoldModel, cfg: &EvolutionConfig) -> Result<Trajectory<VectorField>> {
    Ok(evolve_stokes_faces(&FaceField::from_nodes(u0), model, cfg)?.0)
}

fn check_plane(model: &ManifoldModel) -> Result<()> {
    if model.dimension != 2 {
        return Err(Error::Domain("vector flows are discretized on H^2 only".into()));
    }
    Ok(())
}

/// Heat kernel of Δ_g on H^3: (4πt)^{-3/2} (r / sinh r) e^{-t - r²/(4t)}.
pub fn h3_scalar_kernel(r: f64, t: f64) -> f64 {
    assert!(t > 0.0 && r >= 0.0, "kernel needs t > 0 and r >= 0");
    let ratio = if r < 1e-8 { 1.0 - r * r / 6.0 } else { r / r.sinh() };
    (4.0 * PI * t).powf(-1.5) * ratio * (-t - r * r / (4.0 * t)).exp()
}

/// Radial heat flow on H^3 for θ-independent data, weights 4π sinh² r.
#[derive(Debug, Clone)]
pub struct RadialH3 {
    pub r_max: f64,
    pub n: usize,
    pub h: f64,
    pub r: Vec<f64>,
}

impl RadialH3 {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > 0.0) || n < 4 {
            return Err(Error::Domain("radial H^3 grid needs R_max > 0 and n >= 4".into()));
        }
        let h = r_max / n as f64;
        Ok(Self { r_max, n, h, r: (0..n).map(|j| (j as f64 + 0.5) * h).collect() })
    }

    pub fn weight(&self, j: usize) -> f64 {
        4.0 * PI * self.r[j].sinh().powi(2) * self.h
    }

    fn face(&self, j: usize) -> f64 {
        // sinh² at r = j h
        (j as f64 * self.h).sinh().powi(2)
    }

    pub fn l2(&self, f: &[f64]) -> f64 {
        (0..self.n).map(|j| self.weight(j) * f[j] * f[j]).sum::<f64>().sqrt()
    }

    pub fn mass(&self, f: &[f64]) -> f64 {
        (0..self.n).map(|j| self.weight(j) * f[j]).sum()
    }

    /// Implicit Euler steps of ∂_t f = Δ_g f (Thomas algorithm).
    pub fn evolve(&self, f0: &[f64], t: f64, dt: f64) -> Vec<f64> {
        let n = self.n;
        let h2 = self.h * self.h;
        let mut lo = vec![0.0; n];
        let mut di = vec![0.0; n];
        let mut up = vec![0.0; n];
        for j in 0..n {
            let w = self.r[j].sinh().powi(2) * h2;
            let fp = self.face(j + 1) / w;
            let fm = self.face(j) / w;
            let ghost = if j + 1 == n { -1.0 } else { 0.0 };
            di[j] = 1.0 + dt * (fp + fm - ghost * fp);
            if j > 0 {
                lo[j] = -dt * fm;
            }
            if j + 1 < n {
                up[j] = -dt * fp;
            }
        }
        let steps = (t / dt).round() as usize;
        let mut f = f0.to_vec();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for _ in 0..steps {
            c[0] = up[0] / di[0];
            d[0] = f[0] / di[0];
            for j in 1..n {
                let m = di[j] - lo[j] * c[j - 1];
                c[j] = up[j] / m;
                d[j] = (f[j] - lo[j] * d[j - 1]) / m;
            }
            f[n - 1] = d[n - 1];
            for j in (0..n - 1).rev() {
                f[j] = d[j] - c[j] * f[j + 1];
            }
        }
        f
    }
}

/// Relative L² error of the radial H^3 solver against the kernel: start from
/// the kernel at t0 and compare with the kernel at t0 + t.
pub fn h3_oracle_error(r_max: f64, n: usize, t0: f64, t: f64, dt: f64) -> Result<f64> {
    let grid = RadialH3::new(r_max, n)?;
    let f0: Vec<f64> = grid.r.iter().map(|&r| h3_scalar_kernel(r, t0)).collect();
    let f = grid.evolve(&f0, t, dt);
    let exact: Vec<f64> = grid.r.iter().map(|&r| h3_scalar_kernel(r, t0 + t)).collect();
    let diff: Vec<f64> = f.iter().zip(&exact).map(|(a, b)| a - b).collect();
    Ok(grid.l2(&diff) / grid.l2(&exact))
}
