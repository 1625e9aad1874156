//! Truncated polar mesh on H^2 and the node-based field containers.
//!
//! Radial nodes sit at r_j = (j + 1/2) h_r, so no node touches the pole.
//! Angular nodes are θ_m = m h_θ. Storage is row-major with the radial index
//! outermost: `values[j * n_theta + m]`.

use crate::{Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub r_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub h_r: f64,
    pub h_theta: f64,
    /// Node radii.
    pub r: Vec<f64>,
    /// sinh and cosh at node radii.
    pub sinh: Vec<f64>,
    pub cosh: Vec<f64>,
    /// sinh at the radial faces r = (j + 1) h_r, j = 0..n_r-1; the last one is R_max.
    pub sinh_face: Vec<f64>,
    pub cosh_face: Vec<f64>,
    /// sinh at r = j h_r (inner face of cell j; zero at the pole).
    pub sinh_inner: Vec<f64>,
}

impl Grid {
    pub fn new(r_max: f64, n_r: usize, n_theta: usize) -> Result<Arc<Self>> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::Domain(format!("R_max must be positive, got {r_max}")));
        }
        if n_r < 4 {
            return Err(Error::Domain(format!("n_r must be at least 4, got {n_r}")));
        }
        if n_theta < 4 || n_theta % 2 != 0 {
            return Err(Error::Domain(format!(
                "n_theta must be even and at least 4 (pole pairing), got {n_theta}"
            )));
        }
        let h_r = r_max / n_r as f64;
        let h_theta = 2.0 * PI / n_theta as f64;
        let r: Vec<f64> = (0..n_r).map(|j| (j as f64 + 0.5) * h_r).collect();
        let sinh = r.iter().map(|x| x.sinh()).collect();
        let cosh = r.iter().map(|x| x.cosh()).collect();
        let sinh_face = (0..n_r).map(|j| ((j + 1) as f64 * h_r).sinh()).collect();
        let cosh_face = (0..n_r).map(|j| ((j + 1) as f64 * h_r).cosh()).collect();
        let sinh_inner = (0..n_r).map(|j| (j as f64 * h_r).sinh()).collect();
        Ok(Arc::new(Self {
            r_max,
            n_r,
            n_theta,
            h_r,
            h_theta,
            r,
            sinh,
            cosh,
            sinh_face,
            cosh_face,
            sinh_inner,
        }))
    }

    pub fn default_h2() -> Arc<Self> {
        Self::new(12.0, 384, 256).expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, j: usize, m: usize) -> usize {
        j * self.n_theta + m
    }

    pub fn theta(&self, m: usize) -> f64 {
        m as f64 * self.h_theta
    }

    /// Quadrature weight sinh(r_j) h_r h_θ.
    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        self.sinh[j] * self.h_r * self.h_theta
    }

    pub fn total_weight(&self) -> f64 {
        (0..self.n_r).map(|j| self.weight(j)).sum::<f64>() * self.n_theta as f64
    }

    /// Angular index diametrically opposite to `m`.
    #[inline]
    pub fn opposite(&self, m: usize) -> usize {
        (m + self.n_theta / 2) % self.n_theta
    }

    #[inline]
    pub fn mp(&self, m: usize) -> usize {
        if m + 1 == self.n_theta {
            0
        } else {
            m + 1
        }
    }

    #[inline]
    pub fn mm(&self, m: usize) -> usize {
        if m == 0 {
            self.n_theta - 1
        } else {
            m - 1
        }
    }

    /// Smallest physical node spacing (angular spacing on the innermost ring).
    pub fn min_spacing(&self) -> f64 {
        self.h_r.min(self.sinh[0] * self.h_theta)
    }

    /// Number of rings with r_j <= r_cut.
    pub fn rings_within(&self, r_cut: f64) -> usize {
        self.r.iter().take_while(|&&x| x <= r_cut).count()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.n_r == other.n_r && self.n_theta == other.n_theta && self.r_max == other.r_max
    }

    pub fn sample(self: &Arc<Self>, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let mut v = vec![0.0; self.len()];
        for j in 0..self.n_r {
            for m in 0..self.n_theta {
                v[self.idx(j, m)] = f(self.r[j], self.theta(m));
            }
        }
        ScalarField::new(self.clone(), v)
    }
}


/// Pointwise norms |T| = g(T, T)^{1/2} at every node.
pub trait PointwiseNorm {
    fn grid(&self) -> &Arc<Grid>;
    fn pointwise_norm(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "component array does not match grid");
        Self { grid, values }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::new(grid.clone(), vec![0.0; grid.len()])
    }

    pub fn at(&self, j: usize, m: usize) -> f64 {
        self.values[self.grid.idx(j, m)]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.grid.clone(), self.values.iter().map(|x| c * x).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.grid.clone(), self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        Self::new(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect(),
        )
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Weighted L^2 inner product.
    pub fn inner(&self, other: &Self) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for j in 0..g.n_r {
            let w = g.weight(j);
            let row = j * g.n_theta..(j + 1) * g.n_theta;
            let s: f64 = self.values[row.clone()]
                .iter()
                .zip(&other.values[row])
                .map(|(a, b)| a * b)
                .sum();
            acc += w * s;
        }
        acc
    }

    /// True when every ring is constant in θ (bitwise).
    pub fn is_axisymmetric(&self) -> bool {
        let g = &self.grid;
        (0..g.n_r).all(|j| {
            let row = &self.values[j * g.n_theta..(j + 1) * g.n_theta];
            row.iter().all(|&x| x == row[0])
        })
    }
}

impl PointwiseNorm for ScalarField {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    fn pointwise_norm(&self) -> Vec<f64> {
        self.values.iter().map(|x| x.abs()).collect()
    }
}

/// Vector field in the coordinate frame: u = u^r ∂r + u^θ ∂θ.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Arc<Grid>,
    pub ur: Vec<f64>,
    pub uth: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Arc<Grid>, ur: Vec<f64>, uth: Vec<f64>) -> Self {
        assert_eq!(ur.len(), grid.len(), "component array does not match grid");
        assert_eq!(uth.len(), grid.len(), "component array does not match grid");
        Self { grid, ur, uth }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::new(grid.clone(), vec![0.0; grid.len()], vec![0.0; grid.len()])
    }

    /// Build from orthonormal-frame components (a, b): u = a e_r + b e_θ, e_θ = ∂θ / sinh r.
    pub fn from_frame(grid: &Arc<Grid>, a: Vec<f64>, b: Vec<f64>) -> Self {
        let mut uth = b;
        for j in 0..grid.n_r {
            let s = grid.sinh[j];
            for m in 0..grid.n_theta {
                uth[grid.idx(j, m)] /= s;
            }
        }
        Self::new(grid.clone(), a, uth)
    }

    /// Orthonormal-frame components (a, b).
    pub fn frame(&self) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let mut b = self.uth.clone();
        for j in 0..g.n_r {
            let s = g.sinh[j];
            for m in 0..g.n_theta {
                b[g.idx(j, m)] *= s;
            }
        }
        (self.ur.clone(), b)
    }

    /// Sample from a closure returning orthonormal components at (r, θ).
    pub fn sample_frame(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut a = vec![0.0; grid.len()];
        let mut b = vec![0.0; grid.len()];
        for j in 0..grid.n_r {
            for m in 0..grid.n_theta {
                let (x, y) = f(grid.r[j], grid.theta(m));
                a[grid.idx(j, m)] = x;
                b[grid.idx(j, m)] = y;
            }
        }
        Self::from_frame(grid, a, b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(
            self.grid.clone(),
            self.ur.iter().map(|x| c * x).collect(),
            self.uth.iter().map(|x| c * x).collect(),
        )
    }

    pub fn axpy(&self, c: f64, o: &Self) -> Self {
        Self::new(
            self.grid.clone(),
            self.ur.iter().zip(&o.ur).map(|(a, b)| a + c * b).collect(),
            self.uth.iter().zip(&o.uth).map(|(a, b)| a + c * b).collect(),
        )
    }

    /// Weighted inner product Σ w g(u, v).
    pub fn inner(&self, o: &Self) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for j in 0..g.n_r {
            let s2 = g.sinh[j] * g.sinh[j];
            let mut row = 0.0;
            for m in 0..g.n_theta {
                let i = g.idx(j, m);
                row += self.ur[i] * o.ur[i] + s2 * self.uth[i] * o.uth[i];
            }
            acc += g.weight(j) * row;
        }
        acc
    }

    /// g(u, v) at every node.
    pub fn dot(&self, o: &Self) -> ScalarField {
        let g = &self.grid;
        let mut v = vec![0.0; g.len()];
        for j in 0..g.n_r {
            let s2 = g.sinh[j] * g.sinh[j];
            for m in 0..g.n_theta {
                let i = g.idx(j, m);
                v[i] = self.ur[i] * o.ur[i] + s2 * self.uth[i] * o.uth[i];
            }
        }
        ScalarField::new(g.clone(), v)
    }
}

impl PointwiseNorm for VectorField {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    fn pointwise_norm(&self) -> Vec<f64> {
        self.dot(self).values.iter().map(|x| x.sqrt()).collect()
    }
}

/// Covector field ω = ω_r dr + ω_θ dθ.
#[derive(Debug, Clone, PartialEq)]
pub struct CovectorField {
    pub grid: Arc<Grid>,
    pub wr: Vec<f64>,
    pub wth: Vec<f64>,
}

impl CovectorField {
    pub fn new(grid: Arc<Grid>, wr: Vec<f64>, wth: Vec<f64>) -> Self {
        assert_eq!(wr.len(), grid.len(), "component array does not match grid");
        assert_eq!(wth.len(), grid.len(), "component array does not match grid");
        Self { grid, wr, wth }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::new(grid.clone(), vec![0.0; grid.len()], vec![0.0; grid.len()])
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(
            self.grid.clone(),
            self.wr.iter().map(|x| c * x).collect(),
            self.wth.iter().map(|x| c * x).collect(),
        )
    }

    /// Index raising with g^{-1}.
    pub fn sharp(&self) -> VectorField {
        let g = &self.grid;
        let mut uth = self.wth.clone();
        for j in 0..g.n_r {
            let s2 = g.sinh[j] * g.sinh[j];
            for m in 0..g.n_theta {
                uth[g.idx(j, m)] /= s2;
            }
        }
        VectorField::new(g.clone(), self.wr.clone(), uth)
    }

    /// g^{-1}(ω, η) at every node.
    pub fn dot(&self, o: &Self) -> ScalarField {
        let g = &self.grid;
        let mut v = vec![0.0; g.len()];
        for j in 0..g.n_r {
            let s2 = g.sinh[j] * g.sinh[j];
            for m in 0..g.n_theta {
                let i = g.idx(j, m);
                v[i] = self.wr[i] * o.wr[i] + self.wth[i] * o.wth[i] / s2;
            }
        }
        ScalarField::new(g.clone(), v)
    }
}

impl VectorField {
    /// Index lowering with g.
    pub fn flat(&self) -> CovectorField {
        let g = &self.grid;
        let mut wth = self.uth.clone();
        for j in 0..g.n_r {
            let s2 = g.sinh[j] * g.sinh[j];
            for m in 0..g.n_theta {
                wth[g.idx(j, m)] *= s2;
            }
        }
        CovectorField::new(g.clone(), self.ur.clone(), wth)
    }
}

impl PointwiseNorm for CovectorField {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    fn pointwise_norm(&self) -> Vec<f64> {
        self.dot(self).values.iter().map(|x| x.sqrt()).collect()
    }
}

/// (1,1) tensor T^i_j ∂i ⊗ dx^j, stored as `c[i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField11 {
    pub grid: Arc<Grid>,
    pub c: [[Vec<f64>; 2]; 2],
}

impl TensorField11 {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        let z = || vec![0.0; grid.len()];
        Self {
            grid: grid.clone(),
            c: [[z(), z()], [z(), z()]],
        }
    }

    /// Orthonormal components T^â_b̂ at node index i and ring j.
    #[inline]
    pub fn frame_at(&self, j: usize, i: usize) -> [[f64; 2]; 2] {
        let s = self.grid.sinh[j];
        [
            [self.c[0][0][i], self.c[0][1][i] / s],
            [self.c[1][0][i] * s, self.c[1][1][i]],
        ]
    }
}

impl PointwiseNorm for TensorField11 {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    fn pointwise_norm(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.len()];
        for j in 0..g.n_r {
            for m in 0..g.n_theta {
                let i = g.idx(j, m);
                let t = self.frame_at(j, i);
                out[i] = (t[0][0].powi(2) + t[0][1].powi(2) + t[1][0].powi(2) + t[1][1].powi(2)).sqrt();
            }
        }
        out
    }
}

/// (2,0) tensor T^{ij} ∂i ⊗ ∂j, stored as `c[i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField20 {
    pub grid: Arc<Grid>,
    pub c: [[Vec<f64>; 2]; 2],
}

impl TensorField20 {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        let z = || vec![0.0; grid.len()];
        Self {
            grid: grid.clone(),
            c: [[z(), z()], [z(), z()]],
        }
    }

    /// u ⊗ v.
    pub fn outer(u: &VectorField, v: &VectorField) -> Self {
        let n = u.grid.len();
        let mut t = Self::zeros(&u.grid);
        let uc = [&u.ur, &u.uth];
        let vc = [&v.ur, &v.uth];
        for a in 0..2 {
            for b in 0..2 {
                for i in 0..n {
                    t.c[a][b][i] = uc[a][i] * vc[b][i];
                }
            }
        }
        t
    }

    #[inline]
    pub fn frame_at(&self, j: usize, i: usize) -> [[f64; 2]; 2] {
        let s = self.grid.sinh[j];
        [
            [self.c[0][0][i], self.c[0][1][i] * s],
            [self.c[1][0][i] * s, self.c[1][1][i] * s * s],
        ]
    }
}

impl PointwiseNorm for TensorField20 {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    fn pointwise_norm(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.len()];
        for j in 0..g.n_r {
            for m in 0..g.n_theta {
                let i = g.idx(j, m);
                let t = self.frame_at(j, i);
                out[i] = (t[0][0].powi(2) + t[0][1].powi(2) + t[1][0].powi(2) + t[1][1].powi(2)).sqrt();
            }
        }
        out
    }
}

/// Boundary treatment shared by every solve: homogeneous Dirichlet at R_max.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryCondition {
    #[default]
    HomogeneousDirichlet,
}

/// (Σ w |T|^p)^{1/p}, or the grid maximum for p = ∞.
pub fn lp_norm<F: PointwiseNorm>(field: &F, p: f64) -> Result<f64> {
    lp_norm_within(field, p, f64::INFINITY)
}

/// L^p norm restricted to nodes with r_j <= r_cut.
pub fn lp_norm_within<F: PointwiseNorm>(field: &F, p: f64, r_cut: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("L^p norm needs p >= 1, got {p}")));
    }
    let g = field.grid().clone();
    let vals = field.pointwise_norm();
    Ok(lp_of_values(&g, &vals, p, g.rings_within(r_cut)))
}

pub(crate) fn lp_of_values(g: &Grid, vals: &[f64], p: f64, rings: usize) -> f64 {
    let nt = g.n_theta;
    if p.is_infinite() {
        return vals[..rings * nt].iter().cloned().fold(0.0, f64::max);
    }
    let mut acc = 0.0;
    for j in 0..rings {
        let row = &vals[j * nt..(j + 1) * nt];
        let s: f64 = if p == 2.0 {
            row.iter().map(|x| x * x).sum()
        } else if p == 1.0 {
            row.iter().sum()
        } else {
            row.iter().map(|x| x.powf(p)).sum()
        };
        acc += g.weight(j) * s;
    }
    acc.powf(1.0 / p)
}
