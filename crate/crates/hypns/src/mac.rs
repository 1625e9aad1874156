//! Staggered (face-centred) velocities and the discrete exterior calculus
//! operators built on them.
//!
//! Cells are the node cells [j h, (j+1) h] x [θ_{m-1/2}, θ_{m+1/2}].
//! `u` holds the radial orthonormal component on the outer radial face of
//! cell (j, m), so the last row sits on the wall r = R_max. `v` holds the
//! angular orthonormal component at (r_j, θ_{m+1/2}).
//!
//! D (divergence) maps faces to cells, G = -D* with respect to the quadrature
//! weights, and C maps faces to the circulation density at cell corners
//! (plus one pole corner). With these, D G is the compact Laplace-Beltrami
//! operator, D ℙ = 0 holds to solver tolerance, and
//!
//!   Δ_H = -G D + C* C,   Δ⃗ + r = -Δ_H - 2   (on H^2).
//!
//! The wall condition is no-slip for the tangential component; the normal
//! component on the wall is an unknown with half weight.

use crate::grid::{Grid, ScalarField, VectorField};
use crate::spectral::{ModeSolver, StencilOp};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub grid: Arc<Grid>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FaceField {
    pub fn new(grid: Arc<Grid>, u: Vec<f64>, v: Vec<f64>) -> Self {
        assert_eq!(u.len(), grid.len(), "face array does not match grid");
        assert_eq!(v.len(), grid.len(), "face array does not match grid");
        Self { grid, u, v }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::new(grid.clone(), vec![0.0; grid.len()], vec![0.0; grid.len()])
    }

    pub fn from_lattice(grid: &Arc<Grid>, mut x: Vec<Vec<f64>>) -> Self {
        let v = x.pop().expect("two components");
        let u = x.pop().expect("two components");
        Self::new(grid.clone(), u, v)
    }

    pub fn lattice(&self) -> Vec<Vec<f64>> {
        vec![self.u.clone(), self.v.clone()]
    }

    /// Sample orthonormal components (a, b) of a closure at face positions.
    pub fn sample_frame(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let g = grid;
        let mut u = vec![0.0; g.len()];
        let mut v = vec![0.0; g.len()];
        for j in 0..g.n_r {
            let rf = (j + 1) as f64 * g.h_r;
            for m in 0..g.n_theta {
                let th = g.theta(m);
                u[g.idx(j, m)] = f(rf, th).0;
                v[g.idx(j, m)] = f(g.r[j], th + 0.5 * g.h_theta).1;
            }
        }
        Self::new(g.clone(), u, v)
    }

    /// Node → face interpolation (linear; linear extrapolation onto the wall).
    pub fn from_nodes(x: &VectorField) -> Self {
        let g = &x.grid;
        let (a, b) = x.frame();
        let (nr, nt) = (g.n_r, g.n_theta);
        let mut u = vec![0.0; g.len()];
        let mut v = vec![0.0; g.len()];
        for j in 0..nr {
            for m in 0..nt {
                let i = g.idx(j, m);
                u[i] = if j + 1 < nr {
                    0.5 * (a[i] + a[i + nt])
                } else {
                    1.5 * a[i] - 0.5 * a[i - nt]
                };
                v[i] = 0.5 * (b[i] + b[g.idx(j, g.mp(m))]);
            }
        }
        Self::new(g.clone(), u, v)
    }

    /// Face → node interpolation. The innermost ring reads the radial face
    /// across the pole, where the radial frame component changes sign.
    pub fn to_nodes(&self) -> VectorField {
        let g = &self.grid;
        let nt = g.n_theta;
        let mut a = vec![0.0; g.len()];
        let mut b = vec![0.0; g.len()];
        for j in 0..g.n_r {
            for m in 0..nt {
                let i = g.idx(j, m);
                a[i] = if j == 0 {
                    0.75 * self.u[i] - 0.25 * self.u[g.idx(0, g.opposite(m))]
                } else {
                    0.5 * (self.u[i - nt] + self.u[i])
                };
                b[i] = 0.5 * (self.v[g.idx(j, g.mm(m))] + self.v[i]);
            }
        }
        VectorField::from_frame(g, a, b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(
            self.grid.clone(),
            self.u.iter().map(|x| c * x).collect(),
            self.v.iter().map(|x| c * x).collect(),
        )
    }

    pub fn axpy(&self, c: f64, o: &Self) -> Self {
        Self::new(
            self.grid.clone(),
            self.u.iter().zip(&o.u).map(|(a, b)| a + c * b).collect(),
            self.v.iter().zip(&o.v).map(|(a, b)| a + c * b).collect(),
        )
    }

    /// Weighted inner product with the face quadrature weights.
    pub fn inner(&self, o: &Self) -> f64 {
        let ops = MacOps::get(&self.grid);
        weighted_dot(&ops.w_face, &self.grid, &[&self.u, &self.v], &[&o.u, &o.v])
    }

    pub fn norm2(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn is_axisymmetric(&self) -> bool {
        let nt = self.grid.n_theta;
        [&self.u, &self.v].iter().all(|c| {
            c.chunks(nt).all(|row| row.iter().all(|&x| x == row[0]))
        })
    }
}

pub(crate) fn weighted_dot(w: &[Vec<f64>], g: &Grid, x: &[&Vec<f64>], y: &[&Vec<f64>]) -> f64 {
    let nt = g.n_theta;
    let mut acc = 0.0;
    for c in 0..x.len() {
        for j in 0..g.n_r {
            let s: f64 = x[c][j * nt..(j + 1) * nt]
                .iter()
                .zip(&y[c][j * nt..(j + 1) * nt])
                .map(|(a, b)| a * b)
                .sum();
            acc += w[c][j] * s;
        }
    }
    acc
}

/// Assembled staggered operators for one grid.
pub struct MacOps {
    pub grid: Arc<Grid>,
    /// faces → cells
    pub div: StencilOp,
    /// cells → faces, -div*
    pub grad: StencilOp,
    /// faces → corners (component 0: ring corners, component 1: pole)
    pub curl: StencilOp,
    /// corners → faces
    pub curl_adj: StencilOp,
    /// D G on cells (compact Dirichlet Laplace-Beltrami)
    pub lap: StencilOp,
    /// G D - C* C - 2 I on faces
    pub evo: StencilOp,
    pub w_cell: Vec<Vec<f64>>,
    pub w_face: Vec<Vec<f64>>,
    pub w_corner: Vec<Vec<f64>>,
    poisson: OnceLock<ModeSolver>,
    shifted: Mutex<HashMap<(u8, u64, u64, bool), Arc<ModeSolver>>>,
}

impl std::fmt::Debug for MacOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MacOps({} x {})", self.grid.n_r, self.grid.n_theta)
    }
}

type GridKey = (u64, usize, usize);

fn registry() -> &'static Mutex<HashMap<GridKey, Arc<MacOps>>> {
    static REG: OnceLock<Mutex<HashMap<GridKey, Arc<MacOps>>>> = OnceLock::new();
    REG.get_or_init(|| Mutex::new(HashMap::new()))
}

impl MacOps {
    /// Shared operators for `grid` (assembled on first use).
    pub fn get(grid: &Arc<Grid>) -> Arc<MacOps> {
        let key = (grid.r_max.to_bits(), grid.n_r, grid.n_theta);
        let mut reg = registry().lock().expect("operator registry poisoned");
        if let Some(ops) = reg.get(&key) {
            return ops.clone();
        }
        // keep only a handful of grids alive
        if reg.len() > 6 {
            reg.clear();
        }
        let ops = Arc::new(Self::assemble(grid));
        reg.insert(key, ops.clone());
        ops
    }

    fn assemble(g: &Arc<Grid>) -> Self {
        let (nr, nt) = (g.n_r, g.n_theta);
        let (h, ht) = (g.h_r, g.h_theta);
        let area: Vec<f64> = (0..nr).map(|j| g.sinh[j] * h * ht).collect();
        let w_cell = vec![area.clone()];
        let wu: Vec<f64> = (0..nr)
            .map(|j| {
                let full = g.sinh_face[j] * ht * h;
                if j + 1 == nr {
                    0.5 * full
                } else {
                    full
                }
            })
            .collect();
        let w_face = vec![wu, area.clone()];

        let mut div = StencilOp::zero(1, 2, nr, nt);
        for j in 0..nr {
            let gj = g.sinh[j];
            div.add(0, j, 0, j, 0, g.sinh_face[j] / (gj * h));
            if j > 0 {
                div.add(0, j, 0, j - 1, 0, -g.sinh_inner[j] / (gj * h));
            }
            div.add(0, j, 1, j, 0, 1.0 / (gj * ht));
            div.add(0, j, 1, j, -1, -1.0 / (gj * ht));
        }
        let div = div.compact();
        let grad = div.adjoint(&w_cell, &w_face).scaled(-1.0);

        // corners: ring j at ρ = (j+1) h, θ_{m+1/2}; the last ring lies on the wall
        let pole_area = 2.0 * std::f64::consts::PI * ((0.5 * h).cosh() - 1.0);
        let mut w_corner = vec![vec![0.0; nr], vec![1.0; nr]];
        let mut curl = StencilOp::zero(2, 2, nr, nt);
        for j in 0..nr {
            let rho = (j + 1) as f64 * h;
            if j + 1 < nr {
                let a = rho.sinh() * h * ht;
                w_corner[0][j] = a;
                curl.add(0, j, 0, j, 0, h / a);
                curl.add(0, j, 0, j, 1, -h / a);
                curl.add(0, j, 1, j + 1, 0, g.sinh[j + 1] * ht / a);
                curl.add(0, j, 1, j, 0, -g.sinh[j] * ht / a);
            } else {
                let a = rho.sinh() * 0.5 * h * ht;
                w_corner[0][j] = a;
                curl.add(0, j, 0, j, 0, 0.5 * h / a);
                curl.add(0, j, 0, j, 1, -0.5 * h / a);
                curl.add(0, j, 1, j, 0, -g.sinh[j] * ht / a);
            }
        }
        curl.add_sum(1, 0, 1, 0, g.sinh[0] * ht / pole_area);
        w_corner[1][0] = pole_area / nt as f64;
        let curl = curl.compact();
        let curl_adj = curl.adjoint(&w_corner, &w_face);

        let lap = div.compose(&grad);
        let gd = grad.compose(&div);
        let cc = curl_adj.compose(&curl);
        let evo = gd.combine(1.0, &cc, -1.0).combine(1.0, &StencilOp::identity(2, nr, nt), -2.0);

        Self {
            grid: g.clone(),
            div,
            grad,
            curl,
            curl_adj,
            lap,
            evo,
            w_cell,
            w_face,
            w_corner,
            poisson: OnceLock::new(),
            shifted: Mutex::new(HashMap::new()),
        }
    }

    pub fn divergence(&self, f: &FaceField) -> ScalarField {
        let mut out = self.div.apply(&[f.u.clone(), f.v.clone()]);
        ScalarField::new(self.grid.clone(), out.pop().expect("one component"))
    }

    pub fn gradient(&self, p: &ScalarField) -> FaceField {
        FaceField::from_lattice(&self.grid, self.grad.apply(&[p.values.clone()]))
    }

    /// Circulation density at ring corners (the pole corner is dropped).
    pub fn vorticity(&self, f: &FaceField) -> Vec<f64> {
        let mut out = self.curl.apply(&f.lattice());
        out.swap_remove(0)
    }

    pub fn hodge(&self, f: &FaceField) -> FaceField {
        let gd = self.grad.apply(&self.div.apply(&f.lattice()));
        let cc = self.curl_adj.apply(&self.curl.apply(&f.lattice()));
        let x: Vec<Vec<f64>> = (0..2)
            .map(|c| gd[c].iter().zip(&cc[c]).map(|(a, b)| -a + b).collect())
            .collect();
        FaceField::from_lattice(&self.grid, x)
    }

    /// (Δ⃗ + r) on faces.
    pub fn evolution(&self, f: &FaceField) -> FaceField {
        FaceField::from_lattice(&self.grid, self.evo.apply(&f.lattice()))
    }

    /// Exact mode solver for -D G.
    pub fn poisson_solver(&self) -> &ModeSolver {
        self.poisson.get_or_init(|| ModeSolver::new(&self.lap, 0.0, 1.0))
    }

    /// Cached solver for αI - β(Δ⃗ + r) on faces.
    pub fn shifted_solver(&self, alpha: f64, beta: f64, mode0_only: bool) -> Arc<ModeSolver> {
        self.cached(0, alpha, beta, mode0_only)
    }

    /// Cached solver for αI - βΔ_g on cells.
    pub fn scalar_shifted_solver(&self, alpha: f64, beta: f64, mode0_only: bool) -> Arc<ModeSolver> {
        self.cached(1, alpha, beta, mode0_only)
    }

    fn cached(&self, which: u8, alpha: f64, beta: f64, mode0_only: bool) -> Arc<ModeSolver> {
        let key = (which, alpha.to_bits(), beta.to_bits(), mode0_only);
        let mut cache = self.shifted.lock().expect("solver cache poisoned");
        if let Some(s) = cache.get(&key) {
            return s.clone();
        }
        if cache.len() > 6 {
            cache.clear();
        }
        let op = if which == 0 { &self.evo } else { &self.lap };
        let s = Arc::new(if mode0_only {
            ModeSolver::new_mode0(op, alpha, beta)
        } else {
            ModeSolver::new(op, alpha, beta)
        });
        cache.insert(key, s.clone());
        s
    }
}
