//! Rotation-invariant stencil operators on the polar lattice.
//!
//! Every linear operator used by the solvers has coefficients that depend on
//! the radial index only, so it is diagonalized by a DFT in θ. An operator is
//! stored once as a stencil table; the same table drives the real-space
//! application (used for residuals) and the per-mode banded matrices (used as
//! an exact preconditioner).

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub cin: usize,
    pub jin: usize,
    /// Angular offset, normalized to 0..n_theta.
    pub dm: usize,
    pub coef: f64,
}

/// Operator from `nc_in` component lattices to `nc_out` component lattices,
/// each of size n_r x n_theta.
#[derive(Debug, Clone)]
pub struct StencilOp {
    pub nc_out: usize,
    pub nc_in: usize,
    pub nr: usize,
    pub nt: usize,
    /// Indexed by c_out * nr + j_out.
    pub rows: Vec<Vec<Entry>>,
    /// Ring-sum couplings: out(c, j, m) += coef * Σ_m' in(cin, jin, m').
    pub sums: Vec<Vec<(usize, usize, f64)>>,
}

impl StencilOp {
    pub fn zero(nc_out: usize, nc_in: usize, nr: usize, nt: usize) -> Self {
        Self {
            nc_out,
            nc_in,
            nr,
            nt,
            rows: vec![Vec::new(); nc_out * nr],
            sums: vec![Vec::new(); nc_out * nr],
        }
    }

    pub fn identity(nc: usize, nr: usize, nt: usize) -> Self {
        let mut op = Self::zero(nc, nc, nr, nt);
        for c in 0..nc {
            for j in 0..nr {
                op.add(c, j, c, j, 0, 1.0);
            }
        }
        op
    }

    pub fn add(&mut self, cout: usize, jout: usize, cin: usize, jin: usize, dm: isize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let dm = dm.rem_euclid(self.nt as isize) as usize;
        self.rows[cout * self.nr + jout].push(Entry { cin, jin, dm, coef });
    }

    pub fn add_sum(&mut self, cout: usize, jout: usize, cin: usize, jin: usize, coef: f64) {
        if coef != 0.0 {
            self.sums[cout * self.nr + jout].push((cin, jin, coef));
        }
    }

    /// Merge duplicate entries.
    pub fn compact(mut self) -> Self {
        for row in self.rows.iter_mut() {
            let mut map: HashMap<(usize, usize, usize), f64> = HashMap::new();
            for e in row.iter() {
                *map.entry((e.cin, e.jin, e.dm)).or_insert(0.0) += e.coef;
            }
            let mut merged: Vec<Entry> = map
                .into_iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|((cin, jin, dm), coef)| Entry { cin, jin, dm, coef })
                .collect();
            merged.sort_by_key(|e| (e.cin, e.jin, e.dm));
            *row = merged;
        }
        for row in self.sums.iter_mut() {
            let mut map: HashMap<(usize, usize), f64> = HashMap::new();
            for &(c, j, v) in row.iter() {
                *map.entry((c, j)).or_insert(0.0) += v;
            }
            let mut merged: Vec<_> = map.into_iter().filter(|(_, v)| *v != 0.0).map(|((c, j), v)| (c, j, v)).collect();
            merged.sort_by_key(|&(c, j, _)| (c, j));
            *row = merged;
        }
        self
    }

    /// self ∘ other.
    pub fn compose(&self, other: &StencilOp) -> StencilOp {
        assert_eq!(self.nc_in, other.nc_out);
        assert_eq!(self.nr, other.nr);
        let nt = self.nt;
        let mut out = StencilOp::zero(self.nc_out, other.nc_in, self.nr, nt);
        for (ri, row) in self.rows.iter().enumerate() {
            for a in row {
                let mid = a.cin * self.nr + a.jin;
                for b in &other.rows[mid] {
                    out.rows[ri].push(Entry {
                        cin: b.cin,
                        jin: b.jin,
                        dm: (a.dm + b.dm) % nt,
                        coef: a.coef * b.coef,
                    });
                }
                // a shifted sum is still a sum
                for &(c, j, v) in &other.sums[mid] {
                    out.sums[ri].push((c, j, a.coef * v));
                }
            }
            for &(cm, jm, v) in &self.sums[ri] {
                let mid = cm * self.nr + jm;
                // Σ_m (other x)(m) picks up every entry once with its full sum.
                for b in &other.rows[mid] {
                    out.sums[ri].push((b.cin, b.jin, v * b.coef));
                }
                for &(c, j, w) in &other.sums[mid] {
                    out.sums[ri].push((c, j, v * w * nt as f64));
                }
            }
        }
        out.compact()
    }

    pub fn scaled(&self, a: f64) -> StencilOp {
        let mut out = self.clone();
        for row in out.rows.iter_mut() {
            for e in row.iter_mut() {
                e.coef *= a;
            }
        }
        for row in out.sums.iter_mut() {
            for e in row.iter_mut() {
                e.2 *= a;
            }
        }
        out
    }

    /// a * self + b * other.
    pub fn combine(&self, a: f64, other: &StencilOp, b: f64) -> StencilOp {
        assert_eq!(self.nc_out, other.nc_out);
        assert_eq!(self.nc_in, other.nc_in);
        let mut out = StencilOp::zero(self.nc_out, self.nc_in, self.nr, self.nt);
        for ri in 0..self.rows.len() {
            for e in &self.rows[ri] {
                out.rows[ri].push(Entry { coef: a * e.coef, ..*e });
            }
            for e in &other.rows[ri] {
                out.rows[ri].push(Entry { coef: b * e.coef, ..*e });
            }
            for &(c, j, v) in &self.sums[ri] {
                out.sums[ri].push((c, j, a * v));
            }
            for &(c, j, v) in &other.sums[ri] {
                out.sums[ri].push((c, j, b * v));
            }
        }
        out.compact()
    }

    pub fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (nr, nt) = (self.nr, self.nt);
        assert_eq!(x.len(), self.nc_in);
        let mut y = vec![vec![0.0; nr * nt]; self.nc_out];
        let mut ring_sums: Option<Vec<f64>> = None;
        for c in 0..self.nc_out {
            for j in 0..nr {
                let ri = c * nr + j;
                let yrow = &mut y[c][j * nt..(j + 1) * nt];
                for e in &self.rows[ri] {
                    let xrow = &x[e.cin][e.jin * nt..(e.jin + 1) * nt];
                    let split = nt - e.dm;
                    // y[m] += coef * x[m + dm]
                    for (yv, xv) in yrow[..split].iter_mut().zip(&xrow[e.dm..]) {
                        *yv += e.coef * xv;
                    }
                    for (yv, xv) in yrow[split..].iter_mut().zip(&xrow[..e.dm]) {
                        *yv += e.coef * xv;
                    }
                }
                if !self.sums[ri].is_empty() {
                    let rs = ring_sums.get_or_insert_with(|| {
                        let mut s = vec![0.0; self.nc_in * nr];
                        for ci in 0..self.nc_in {
                            for ji in 0..nr {
                                s[ci * nr + ji] = x[ci][ji * nt..(ji + 1) * nt].iter().sum();
                            }
                        }
                        s
                    });
                    let add: f64 = self.sums[ri].iter().map(|&(ci, ji, v)| v * rs[ci * nr + ji]).sum();
                    for yv in yrow.iter_mut() {
                        *yv += add;
                    }
                }
            }
        }
        y
    }

    /// Adjoint with respect to ring weights: `w_out[c][j]` on the output
    /// lattice and `w_in[c][j]` on the input lattice.
    pub fn adjoint(&self, w_out: &[Vec<f64>], w_in: &[Vec<f64>]) -> StencilOp {
        let nt = self.nt as isize;
        let mut out = StencilOp::zero(self.nc_in, self.nc_out, self.nr, self.nt);
        for c in 0..self.nc_out {
            for j in 0..self.nr {
                let ri = c * self.nr + j;
                let wo = w_out[c][j];
                for e in &self.rows[ri] {
                    let coef = e.coef * wo / w_in[e.cin][e.jin];
                    out.add(e.cin, e.jin, c, j, -(e.dm as isize) % nt, coef);
                }
                for &(ci, ji, v) in &self.sums[ri] {
                    out.add_sum(ci, ji, c, j, v * wo / w_in[ci][ji]);
                }
            }
        }
        out.compact()
    }

    /// Radial half-bandwidth.
    pub fn radial_band(&self) -> usize {
        let mut b = 0;
        for (ri, row) in self.rows.iter().enumerate() {
            let j = ri % self.nr;
            for e in row {
                b = b.max(e.jin.abs_diff(j));
            }
            for &(_, ji, _) in &self.sums[ri] {
                b = b.max(ji.abs_diff(j));
            }
        }
        b
    }

    /// Mode-k symbol as a dense-in-band matrix acting on unknowns ordered j * nc + c.
    pub fn mode_band(&self, k: usize, alpha: f64, beta: f64) -> BandMatrix {
        assert_eq!(self.nc_in, self.nc_out);
        let nc = self.nc_in;
        let n = nc * self.nr;
        let w = (self.radial_band() + 1) * nc - 1;
        let mut m = BandMatrix::zeros(n, w, w);
        let two_pi = 2.0 * std::f64::consts::PI;
        let phase: Vec<Complex64> = (0..self.nt)
            .map(|dm| Complex64::from_polar(1.0, two_pi * ((k * dm) % self.nt) as f64 / self.nt as f64))
            .collect();
        for i in 0..n {
            m.add(i, i, Complex64::new(alpha, 0.0));
        }
        for c in 0..nc {
            for j in 0..self.nr {
                let ri = c * self.nr + j;
                let row = j * nc + c;
                for e in &self.rows[ri] {
                    m.add(row, e.jin * nc + e.cin, -beta * e.coef * phase[e.dm]);
                }
                if k == 0 {
                    for &(ci, ji, v) in &self.sums[ri] {
                        m.add(row, ji * nc + ci, Complex64::new(-beta * v * self.nt as f64, 0.0));
                    }
                }
            }
        }
        m
    }
}

/// Square band matrix, row-major band storage.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    pub a: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            a: vec![Complex64::new(0.0, 0.0); n * (kl + ku + 1)],
        }
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry outside band");
        let p = self.pos(i, j);
        self.a[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if j + self.kl < i || j > i + self.ku {
            return Complex64::new(0.0, 0.0);
        }
        self.a[self.pos(i, j)]
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in lo..=hi {
                acc += self.a[self.pos(i, j)] * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// In-place LU without pivoting. The shifted operators used here are
    /// similar to Hermitian positive definite matrices, where this is stable.
    pub fn factor(mut self) -> BandLu {
        let n = self.n;
        for k in 0..n {
            let piv = self.a[self.pos(k, k)];
            let imax = (k + self.kl).min(n - 1);
            let jmax = (k + self.ku).min(n - 1);
            for i in k + 1..=imax {
                let pik = self.pos(i, k);
                let l = self.a[pik] / piv;
                self.a[pik] = l;
                if l == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..=jmax {
                    let pkj = self.pos(k, j);
                    let pij = self.pos(i, j);
                    let t = self.a[pkj];
                    self.a[pij] -= l * t;
                }
            }
        }
        BandLu { m: self }
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let m = &self.m;
        let n = m.n;
        for i in 0..n {
            let lo = i.saturating_sub(m.kl);
            let mut acc = b[i];
            for k in lo..i {
                acc -= m.a[m.pos(i, k)] * b[k];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + m.ku).min(n - 1);
            let mut acc = b[i];
            for j in i + 1..=hi {
                acc -= m.a[m.pos(i, j)] * b[j];
            }
            b[i] = acc / m.a[m.pos(i, i)];
        }
    }
}

/// Batched θ-transforms for whole lattices.
pub struct RingFft {
    pub nt: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RingFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RingFft({})", self.nt)
    }
}

impl RingFft {
    pub fn new(nt: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nt,
            fwd: planner.plan_fft_forward(nt),
            inv: planner.plan_fft_inverse(nt),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    /// Inverse transform, returning the (real) lattice values.
    pub fn inverse(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut buf);
        let s = 1.0 / self.nt as f64;
        buf.iter().map(|c| c.re * s).collect()
    }
}

/// Exact solver for (αI - βA) with A rotation invariant, one banded LU per
/// angular mode k = 0..=n_theta/2 (the others follow by conjugation).
pub struct ModeSolver {
    pub nc: usize,
    pub nr: usize,
    pub nt: usize,
    lus: Vec<BandLu>,
    fft: RingFft,
}

impl std::fmt::Debug for ModeSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ModeSolver(nc={}, nr={}, nt={})", self.nc, self.nr, self.nt)
    }
}

impl ModeSolver {
    pub fn new(op: &StencilOp, alpha: f64, beta: f64) -> Self {
        let lus = (0..=op.nt / 2).map(|k| op.mode_band(k, alpha, beta).factor()).collect();
        Self {
            nc: op.nc_in,
            nr: op.nr,
            nt: op.nt,
            lus,
            fft: RingFft::new(op.nt),
        }
    }

    /// Only the k = 0 factorization, for axisymmetric problems.
    pub fn new_mode0(op: &StencilOp, alpha: f64, beta: f64) -> Self {
        Self {
            nc: op.nc_in,
            nr: op.nr,
            nt: op.nt,
            lus: vec![op.mode_band(0, alpha, beta).factor()],
            fft: RingFft::new(op.nt),
        }
    }

    pub fn has_all_modes(&self) -> bool {
        self.lus.len() == self.nt / 2 + 1
    }

    pub fn solve(&self, b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        assert!(self.has_all_modes(), "solver was built for mode 0 only");
        let (nc, nr, nt) = (self.nc, self.nr, self.nt);
        let hat: Vec<Vec<Complex64>> = b.iter().map(|x| self.fft.forward(x)).collect();
        let mut out_spec = vec![vec![Complex64::new(0.0, 0.0); nr * nt]; nc];
        let mut work = vec![Complex64::new(0.0, 0.0); nc * nr];
        for k in 0..=nt / 2 {
            for j in 0..nr {
                for c in 0..nc {
                    work[j * nc + c] = hat[c][j * nt + k];
                }
            }
            self.lus[k].solve_in_place(&mut work);
            for j in 0..nr {
                for c in 0..nc {
                    out_spec[c][j * nt + k] = work[j * nc + c];
                    if k != 0 && k != nt - k {
                        out_spec[c][j * nt + nt - k] = work[j * nc + c].conj();
                    }
                }
            }
        }
        out_spec.into_iter().map(|s| self.fft.inverse(s)).collect()
    }

    /// Solve for ring values of an axisymmetric right-hand side (`b[c][j]`).
    pub fn solve_rings(&self, b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (nc, nr) = (self.nc, self.nr);
        let mut work = vec![Complex64::new(0.0, 0.0); nc * nr];
        for j in 0..nr {
            for c in 0..nc {
                work[j * nc + c] = Complex64::new(b[c][j], 0.0);
            }
        }
        self.lus[0].solve_in_place(&mut work);
        (0..nc).map(|c| (0..nr).map(|j| work[j * nc + c].re).collect()).collect()
    }
}

/// Mode-0 action of an operator on axisymmetric ring data `x[c][j]`.
pub fn apply_rings(op: &StencilOp, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let nr = op.nr;
    let nt = op.nt as f64;
    let mut y = vec![vec![0.0; nr]; op.nc_out];
    for c in 0..op.nc_out {
        for j in 0..nr {
            let ri = c * nr + j;
            let mut acc = 0.0;
            for e in &op.rows[ri] {
                acc += e.coef * x[e.cin][e.jin];
            }
            for &(ci, ji, v) in &op.sums[ri] {
                acc += v * nt * x[ci][ji];
            }
            y[c][j] = acc;
        }
    }
    y
}
