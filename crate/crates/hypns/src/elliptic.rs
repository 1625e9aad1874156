//! Poisson solves, the Leray projector, pressure recovery and the operator B.
//!
//! All systems are weighted-symmetric positive definite and solved by
//! preconditioned conjugate gradients in the quadrature inner product. The
//! preconditioner is the exact per-mode banded factorization from
//! [`crate::spectral`], so convergence normally takes one or two iterations;
//! the contract is only the residual check in real space.

use crate::geometry::ManifoldModel;
use crate::grid::{ScalarField, TensorField20, VectorField};
use crate::mac::{FaceField, MacOps};
use crate::ops;
use crate::spectral::{apply_rings, ModeSolver, StencilOp};
use crate::{Error, Result};
use serde::Serialize;

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticSolveReport {
    pub iterations: usize,
    /// Relative weighted residual ‖b - Mx‖ / ‖b‖.
    pub residual_norm: f64,
    pub tolerance: f64,
}

type Lattice = Vec<Vec<f64>>;

/// αI - βA with a weighted inner product and a mode preconditioner.
pub struct ShiftedSystem<'a> {
    pub op: &'a StencilOp,
    pub alpha: f64,
    pub beta: f64,
    pub weights: &'a [Vec<f64>],
    pub precond: &'a ModeSolver,
}

impl ShiftedSystem<'_> {
    fn apply(&self, x: &Lattice) -> Lattice {
        let ax = self.op.apply(x);
        x.iter()
            .zip(ax)
            .map(|(xc, ac)| xc.iter().zip(ac).map(|(xv, av)| self.alpha * xv - self.beta * av).collect())
            .collect()
    }

    fn dot(&self, x: &Lattice, y: &Lattice) -> f64 {
        let nt = self.op.nt;
        let mut acc = 0.0;
        for c in 0..x.len() {
            for (j, w) in self.weights[c].iter().enumerate() {
                let s: f64 = x[c][j * nt..(j + 1) * nt]
                    .iter()
                    .zip(&y[c][j * nt..(j + 1) * nt])
                    .map(|(a, b)| a * b)
                    .sum();
                acc += w * s;
            }
        }
        acc
    }

    /// Preconditioned CG on the full lattice.
    pub fn solve(&self, b: &Lattice, tol: f64) -> Result<(Lattice, EllipticSolveReport)> {
        if !(tol > 0.0) {
            return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
        }
        if b.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite right-hand side".into()));
        }
        let unknowns = b.len() * b[0].len();
        let cap = (20.0 * (unknowns as f64).sqrt()).ceil() as usize;
        let bnorm = self.dot(b, b).sqrt();
        if bnorm == 0.0 {
            let zero = b.iter().map(|c| vec![0.0; c.len()]).collect();
            return Ok((zero, EllipticSolveReport { iterations: 0, residual_norm: 0.0, tolerance: tol }));
        }
        let mut x = self.precond.solve(b);
        let mut r = sub(b, &self.apply(&x));
        let mut rel = self.dot(&r, &r).sqrt() / bnorm;
        let mut it = 1;
        if rel <= tol {
            return Ok((x, EllipticSolveReport { iterations: it, residual_norm: rel, tolerance: tol }));
        }
        let mut z = self.precond.solve(&r);
        let mut p = z.clone();
        let mut rz = self.dot(&r, &z);
        while it < cap {
            it += 1;
            let mp = self.apply(&p);
            let pmp = self.dot(&p, &mp);
            if !(pmp > 0.0) {
                break;
            }
            let a = rz / pmp;
            axpy_in(&mut x, a, &p);
            axpy_in(&mut r, -a, &mp);
            rel = self.dot(&r, &r).sqrt() / bnorm;
            if rel <= tol {
                return Ok((x, EllipticSolveReport { iterations: it, residual_norm: rel, tolerance: tol }));
            }
            z = self.precond.solve(&r);
            let rz_new = self.dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pc, zc) in p.iter_mut().zip(&z) {
                for (pv, zv) in pc.iter_mut().zip(zc) {
                    *pv = zv + beta * *pv;
                }
            }
        }
        Err(Error::SolverFailure { iterations: it, residual: rel, tolerance: tol })
    }

    /// Axisymmetric solve on ring values `b[c][j]`, with iterative refinement
    /// against the mode-0 action of the operator.
    pub fn solve_rings(&self, b: &Lattice, tol: f64) -> Result<(Lattice, EllipticSolveReport)> {
        let nt = self.op.nt as f64;
        let dot = |x: &Lattice, y: &Lattice| -> f64 {
            let mut acc = 0.0;
            for c in 0..x.len() {
                for j in 0..x[c].len() {
                    acc += self.weights[c][j] * nt * x[c][j] * y[c][j];
                }
            }
            acc
        };
        let apply = |x: &Lattice| -> Lattice {
            let ax = apply_rings(self.op, x);
            x.iter()
                .zip(ax)
                .map(|(xc, ac)| xc.iter().zip(ac).map(|(xv, av)| self.alpha * xv - self.beta * av).collect())
                .collect()
        };
        let bnorm = dot(b, b).sqrt();
        if bnorm == 0.0 {
            let zero = b.iter().map(|c| vec![0.0; c.len()]).collect();
            return Ok((zero, EllipticSolveReport { iterations: 0, residual_norm: 0.0, tolerance: tol }));
        }
        let mut x = self.precond.solve_rings(b);
        for it in 1..=8 {
            let r = sub(b, &apply(&x));
            let rel = dot(&r, &r).sqrt() / bnorm;
            if rel <= tol {
                return Ok((x, EllipticSolveReport { iterations: it, residual_norm: rel, tolerance: tol }));
            }
            let dx = self.precond.solve_rings(&r);
            axpy_in(&mut x, 1.0, &dx);
        }
        let r = sub(b, &apply(&x));
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            return Ok((x, EllipticSolveReport { iterations: 9, residual_norm: rel, tolerance: tol }));
        }
        Err(Error::SolverFailure { iterations: 9, residual: rel, tolerance: tol })
    }
}

fn sub(a: &Lattice, b: &Lattice) -> Lattice {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect()
}

fn axpy_in(x: &mut Lattice, a: f64, y: &Lattice) {
    for (xc, yc) in x.iter_mut().zip(y) {
        for (xv, yv) in xc.iter_mut().zip(yc) {
            *xv += a * yv;
        }
    }
}

pub(crate) fn rings_of(values: &[f64], nr: usize, nt: usize) -> Vec<f64> {
    (0..nr).map(|j| values[j * nt]).collect()
}

pub(crate) fn broadcast(rings: &[f64], nt: usize) -> Vec<f64> {
    rings.iter().flat_map(|&x| std::iter::repeat(x).take(nt)).collect()
}

/// Solve -Δ_g p = f with p = 0 at R_max.
pub fn solve_poisson(f: &ScalarField, tol: f64) -> Result<(ScalarField, EllipticSolveReport)> {
    let g = &f.grid;
    let mac = MacOps::get(g);
    let sys = ShiftedSystem {
        op: &mac.lap,
        alpha: 0.0,
        beta: 1.0,
        weights: &mac.w_cell,
        precond: mac.poisson_solver(),
    };
    if f.is_axisymmetric() {
        let b = vec![rings_of(&f.values, g.n_r, g.n_theta)];
        let (x, rep) = sys.solve_rings(&b, tol)?;
        return Ok((ScalarField::new(g.clone(), broadcast(&x[0], g.n_theta)), rep));
    }
    let (mut x, rep) = sys.solve(&vec![f.values.clone()], tol)?;
    Ok((ScalarField::new(g.clone(), x.swap_remove(0)), rep))
}

/// ℙf = f + G (-D G)^{-1} D f on faces.
pub fn leray_project_faces(f: &FaceField, tol: f64) -> Result<(FaceField, EllipticSolveReport)> {
    let mac = MacOps::get(&f.grid);
    let d = mac.divergence(f);
    let (phi, rep) = solve_poisson(&d, tol)?;
    let gphi = mac.gradient(&phi);
    Ok((f.axpy(1.0, &gphi), rep))
}

/// Node-level projector: faces are used internally, so the result is
/// divergence free in the staggered sense and O(h²) close to it on nodes.
pub fn leray_project(v: &VectorField, tol: f64) -> Result<VectorField> {
    let (p, _) = leray_project_faces(&FaceField::from_nodes(v), tol)?;
    Ok(p.to_nodes())
}

/// Solve Δ_g p = -div div(u⊗u) + 2 div(r(u)) with p = 0 at R_max.
pub fn pressure_from_velocity(u: &VectorField, model: &ManifoldModel, tol: f64) -> Result<ScalarField> {
    let ddiv = ops::divergence_vec(&ops::divergence_tensor(&TensorField20::outer(u, u)));
    let dr = ops::divergence_vec(&ops::ricci_operator(u, model));
    // -Δp = div div(u⊗u) - 2 div(r u)
    let rhs = ddiv.axpy(-2.0, &dr);
    Ok(solve_poisson(&rhs, tol)?.0)
}

/// Bu = -2 grad(-Δ_g)^{-1} div(r(u)) on faces.
pub fn operator_b_faces(u: &FaceField, model: &ManifoldModel, tol: f64) -> Result<FaceField> {
    let mac = MacOps::get(&u.grid);
    let d = mac.divergence(&u.scale(model.ricci_constant));
    let (phi, _) = solve_poisson(&d, tol)?;
    Ok(mac.gradient(&phi).scale(-2.0))
}

pub fn operator_b(u: &VectorField, model: &ManifoldModel, tol: f64) -> Result<VectorField> {
    Ok(operator_b_faces(&FaceField::from_nodes(u), model, tol)?.to_nodes())
}
