//! Node-based covariant operators on the polar grid.
//!
//! Vectors are handled internally in the orthonormal frame (e_r, e_θ) with
//! e_θ = ∂θ / sinh r. In that frame
//!
//!   ∇_{e_r} w = ∂_r w,   ∇_{e_θ} w = (∂_θ w + i cosh r · w) / sinh r
//!
//! for the complex combination w = a + i b. First derivatives are centered.
//! Across the pole a ring-(-1) value at θ is read from ring 0 at θ + π, with
//! a sign flip for each frame index (the frame reverses there). Beyond R_max
//! the ghost is the negated last ring, so fields vanish at the wall.

use crate::geometry::ManifoldModel;
use crate::grid::{CovectorField, Grid, ScalarField, TensorField11, TensorField20, VectorField};
use crate::mac::FaceField;

/// Pole parity: +1 for scalars and two-index frame tensors, -1 for frame vectors.
#[derive(Clone, Copy)]
pub(crate) struct Parity(pub f64);
pub(crate) const EVEN: Parity = Parity(1.0);
pub(crate) const ODD: Parity = Parity(-1.0);

#[inline]
fn inner_ring(g: &Grid, v: &[f64], j: usize, m: usize, par: Parity) -> f64 {
    if j == 0 {
        par.0 * v[g.idx(0, g.opposite(m))]
    } else {
        v[g.idx(j - 1, m)]
    }
}

#[inline]
fn outer_ring(g: &Grid, v: &[f64], j: usize, m: usize) -> f64 {
    if j + 1 == g.n_r {
        -v[g.idx(j, m)]
    } else {
        v[g.idx(j + 1, m)]
    }
}

/// Centered ∂_r.
pub(crate) fn d_r(g: &Grid, v: &[f64], par: Parity) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    let s = 0.5 / g.h_r;
    for j in 0..g.n_r {
        for m in 0..g.n_theta {
            out[g.idx(j, m)] = s * (outer_ring(g, v, j, m) - inner_ring(g, v, j, m, par));
        }
    }
    out
}

/// Centered (1/sinh r) ∂_r(sinh r · v).
pub(crate) fn d_r_weighted(g: &Grid, v: &[f64], par: Parity) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    let h = g.h_r;
    for j in 0..g.n_r {
        let s_out = ((j + 1) as f64 * h + 0.5 * h).sinh();
        // sinh(r_{-1}) = -sinh(r_0)
        let s_in = if j == 0 { -g.sinh[0] } else { g.sinh[j - 1] };
        let c = 0.5 / (h * g.sinh[j]);
        for m in 0..g.n_theta {
            out[g.idx(j, m)] = c * (s_out * outer_ring(g, v, j, m) - s_in * inner_ring(g, v, j, m, par));
        }
    }
    out
}

/// Centered ∂_θ.
pub(crate) fn d_theta(g: &Grid, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    let s = 0.5 / g.h_theta;
    for j in 0..g.n_r {
        for m in 0..g.n_theta {
            out[g.idx(j, m)] = s * (v[g.idx(j, g.mp(m))] - v[g.idx(j, g.mm(m))]);
        }
    }
    out
}

/// grad f = ∂_r f ∂_r + (∂_θ f / sinh² r) ∂_θ.
pub fn scalar_gradient(f: &ScalarField) -> VectorField {
    let g = &f.grid;
    let fr = d_r(g, &f.values, EVEN);
    let mut fth = d_theta(g, &f.values);
    for j in 0..g.n_r {
        let s2 = g.sinh[j] * g.sinh[j];
        for m in 0..g.n_theta {
            fth[g.idx(j, m)] /= s2;
        }
    }
    VectorField::new(g.clone(), fr, fth)
}

/// Compact Laplace-Beltrami operator with homogeneous Dirichlet data at R_max.
pub fn laplace_beltrami(f: &ScalarField) -> ScalarField {
    let g = &f.grid;
    let v = &f.values;
    let (h, ht) = (g.h_r, g.h_theta);
    let mut out = vec![0.0; g.len()];
    for j in 0..g.n_r {
        let gp = g.sinh_face[j];
        let gm = g.sinh_inner[j];
        let gj = g.sinh[j];
        let cr = 1.0 / (gj * h * h);
        let ca = 1.0 / (ht * ht * gj * gj);
        for m in 0..g.n_theta {
            let i = g.idx(j, m);
            let fo = outer_ring(g, v, j, m);
            let fi = if j == 0 { 0.0 } else { v[g.idx(j - 1, m)] };
            let radial = cr * (gp * (fo - v[i]) - gm * (v[i] - fi));
            let ang = ca * (v[g.idx(j, g.mp(m))] - 2.0 * v[i] + v[g.idx(j, g.mm(m))]);
            out[i] = radial + ang;
        }
    }
    ScalarField::new(g.clone(), out)
}

/// (∇u)^i_j = (∇_{∂j} u)^i in the coordinate frame.
pub fn covariant_gradient(u: &VectorField) -> TensorField11 {
    let g = &u.grid;
    let (a, b) = u.frame();
    let ar = d_r(g, &a, ODD);
    let br = d_r(g, &b, ODD);
    let at = d_theta(g, &a);
    let bt = d_theta(g, &b);
    let mut t = TensorField11::zeros(g);
    for j in 0..g.n_r {
        let (s, c) = (g.sinh[j], g.cosh[j]);
        for m in 0..g.n_theta {
            let i = g.idx(j, m);
            t.c[0][0][i] = ar[i];
            t.c[1][0][i] = br[i] / s;
            t.c[0][1][i] = at[i] - c * b[i];
            t.c[1][1][i] = (bt[i] + c * a[i]) / s;
        }
    }
    t
}

/// |∇u|² at every node.
pub fn gradient_norm_sq(u: &VectorField) -> ScalarField {
    let t = covariant_gradient(u);
    let g = &u.grid;
    let mut out = vec![0.0; g.len()];
    for j in 0..g.n_r {
        for m in 0..g.n_theta {
            let i = g.idx(j, m);
            let f = t.frame_at(j, i);
            out[i] = f[0][0] * f[0][0] + f[0][1] * f[0][1] + f[1][0] * f[1][0] + f[1][1] * f[1][1];
        }
    }
    ScalarField::new(g.clone(), out)
}

/// div u = (1/sinh r) ∂_r(sinh r · a) + (1/sinh r) ∂_θ b, conservative centered form.
pub fn divergence_vec(u: &VectorField) -> ScalarField {
    let g = &u.grid;
    let (a, b) = u.frame();
    let mut d = d_r_weighted(g, &a, ODD);
    let bt = d_theta(g, &b);
    for j in 0..g.n_r {
        let s = g.sinh[j];
        for m in 0..g.n_theta {
            let i = g.idx(j, m);
            d[i] += bt[i] / s;
        }
    }
    ScalarField::new(g.clone(), d)
}

/// (div T)^j = ∇_i T^{ij}, contracting the derivative with the first slot.
pub fn divergence_tensor(t: &TensorField20) -> VectorField {
    let g = &t.grid;
    let n = g.len();
    // frame components, first index r̂ (x) and θ̂ (y)
    let mut xr = vec![0.0; n];
    let mut xt = vec![0.0; n];
    let mut yr = vec![0.0; n];
    let mut yt = vec![0.0; n];
    for j in 0..g.n_r {
        for m in 0..g.n_theta {
            let i = g.idx(j, m);
            let f = t.frame_at(j, i);
            xr[i] = f[0][0];
            xt[i] = f[0][1];
            yr[i] = f[1][0];
            yt[i] = f[1][1];
        }
    }
    let mut a = d_r_weighted(g, &xr, EVEN);
    let mut b = d_r_weighted(g, &xt, EVEN);
    let yrt = d_theta(g, &yr);
    let ytt = d_theta(g, &yt);
    for j in 0..g.n_r {
        let (s, c) = (g.sinh[j], g.cosh[j]);
        for m in 0..g.n_theta {
            let i = g.idx(j, m);
            a[i] += (yrt[i] - c * yt[i]) / s;
            b[i] += (ytt[i] + c * yr[i]) / s;
        }
    }
    VectorField::from_frame(g, a, b)
}

/// ∇_X Y for node fields.
pub fn directional_derivative(x: &VectorField, y: &VectorField) -> VectorField {
    let t = covariant_gradient(y);
    let g = &x.grid;
    let n = g.len();
    let mut ur = vec![0.0; n];
    let mut uth = vec![0.0; n];
    for i in 0..n {
        ur[i] = t.c[0][0][i] * x.ur[i] + t.c[0][1][i] * x.uth[i];
        uth[i] = t.c[1][0][i] * x.ur[i] + t.c[1][1][i] * x.uth[i];
    }
    VectorField::new(g.clone(), ur, uth)
}

/// Compact frame Bochner Laplacian Δ⃗ = Tr ∇², Dirichlet at R_max.
///
/// Radial part in flux form (no pole ghost is needed since sinh vanishes on
/// the innermost face). Angular part: ring neighbours are transported by
/// e^{±i h_θ}, which is exact for the frame rotation at the pole, and the
/// remainder c = cosh r - 1 enters in expanded form
/// (∂θ² w + 2i c ∂θ w - c² w) / sinh² r with centered ∂θ.
pub fn bochner_laplacian(u: &VectorField) -> VectorField {
    let g = &u.grid;
    let (a, b) = u.frame();
    let (h, ht) = (g.h_r, g.h_theta);
    let mut oa = vec![0.0; g.len()];
    let mut ob = vec![0.0; g.len()];
    for j in 0..g.n_r {
        let gp = g.sinh_face[j];
        let gm = g.sinh_inner[j];
        let gj = g.sinh[j];
        let cr = 1.0 / (gj * h * h);
        let ca = 1.0 / (ht * ht * gj * gj);
        let (sn, cs) = ht.sin_cos();
        let c = g.cosh[j] - 1.0;
        let c2 = c * c * ht * ht;
        for m in 0..g.n_theta {
            let i = g.idx(j, m);
            let ip = g.idx(j, g.mp(m));
            let im = g.idx(j, g.mm(m));
            let ao = outer_ring(g, &a, j, m);
            let bo = outer_ring(g, &b, j, m);
            let (ai, bi) = if j == 0 { (0.0, 0.0) } else { (a[i - g.n_theta], b[i - g.n_theta]) };
            let ra = cr * (gp * (ao - a[i]) - gm * (a[i] - ai));
            let rb = cr * (gp * (bo - b[i]) - gm * (b[i] - bi));
            // w_{m±1} transported by e^{±i h_θ}; the rest of cosh r is expanded
            let (ap, bp) = (cs * a[ip] - sn * b[ip], sn * a[ip] + cs * b[ip]);
            let (am, bm) = (cs * a[im] + sn * b[im], -sn * a[im] + cs * b[im]);
            let pa = ap + am - 2.0 * a[i] - c * ht * (bp - bm) - c2 * a[i];
            let pb = bp + bm - 2.0 * b[i] + c * ht * (ap - am) - c2 * b[i];
            oa[i] = ra + ca * pa;
            ob[i] = rb + ca * pb;
        }
    }
    VectorField::from_frame(g, oa, ob)
}

/// r(u) = (Ric(u, ·))^♯ = κ(n-1) u on a space form.
pub fn ricci_operator(u: &VectorField, model: &ManifoldModel) -> VectorField {
    u.scale(model.ricci_constant)
}

/// Hodge Laplacian dd* + d*d on node covectors.
///
/// The form is moved to the staggered layout, where d and its weighted adjoint
/// are exact discrete adjoints, and the result is interpolated back.
pub fn hodge_laplacian_1form(w: &CovectorField) -> CovectorField {
    let u = w.sharp();
    let f = FaceField::from_nodes(&u);
    let ops = crate::mac::MacOps::get(&u.grid);
    let lap = ops.hodge(&f);
    lap.to_nodes().flat()
}

/// Scalar vorticity ω = (∂_r(g_θθ u^θ) - ∂_θ u^r) / sinh r.
pub fn vorticity_2d(u: &VectorField) -> ScalarField {
    let g = &u.grid;
    let (a, b) = u.frame();
    let mut w = d_r_weighted(g, &b, ODD);
    let at = d_theta(g, &a);
    for j in 0..g.n_r {
        let s = g.sinh[j];
        for m in 0..g.n_theta {
            let i = g.idx(j, m);
            w[i] -= at[i] / s;
        }
    }
    ScalarField::new(g.clone(), w)
}

/// Covariant Hessian ∇²f with components H_ij (dr, dθ basis).
/// The mixed derivative uses the 4-point cross stencil.
pub fn hessian(f: &ScalarField) -> [[Vec<f64>; 2]; 2] {
    let g = &f.grid;
    let v = &f.values;
    let n = g.len();
    let (h, ht) = (g.h_r, g.h_theta);
    let fr = d_r(g, v, EVEN);
    let ft = d_theta(g, v);
    let mut hrr = vec![0.0; n];
    let mut hrt = vec![0.0; n];
    let mut htt = vec![0.0; n];
    for j in 0..g.n_r {
        let (s, c) = (g.sinh[j], g.cosh[j]);
        for m in 0..g.n_theta {
            let i = g.idx(j, m);
            let (mp, mm) = (g.mp(m), g.mm(m));
            let fo = outer_ring(g, v, j, m);
            let fi = inner_ring(g, v, j, m, EVEN);
            hrr[i] = (fo - 2.0 * v[i] + fi) / (h * h);
            let cross = outer_ring(g, v, j, mp) - outer_ring(g, v, j, mm) - inner_ring(g, v, j, mp, EVEN)
                + inner_ring(g, v, j, mm, EVEN);
            hrt[i] = cross / (4.0 * h * ht) - c / s * ft[i];
            htt[i] = (v[g.idx(j, mp)] - 2.0 * v[i] + v[g.idx(j, mm)]) / (ht * ht) + s * c * fr[i];
        }
    }
    [[hrr, hrt.clone()], [hrt, htt]]
}

/// |∇u|² - |∇|u||², skipping nodes where |u| < 1e-12 (reported as 0).
pub fn kato_defect(u: &VectorField) -> ScalarField {
    let g = &u.grid;
    let norm = ScalarField::new(g.clone(), u.dot(u).values.iter().map(|x| x.sqrt()).collect());
    let grad_norm = scalar_gradient(&norm);
    let gn2 = grad_norm.dot(&grad_norm);
    let gu2 = gradient_norm_sq(u);
    let vals = (0..g.len())
        .map(|i| if norm.values[i] < 1e-12 { 0.0 } else { gu2.values[i] - gn2.values[i] })
        .collect();
    ScalarField::new(g.clone(), vals)
}

/// ½Δ|u|² - g(Δ⃗u, u) - |∇u|² at every node.
pub fn bochner_identity_residual(u: &VectorField) -> ScalarField {
    let g = &u.grid;
    let half_sq = u.dot(u).scale(0.5);
    let lhs = laplace_beltrami(&half_sq);
    let lu = bochner_laplacian(u);
    let gl = lu.dot(u);
    let gu2 = gradient_norm_sq(u);
    let vals = (0..g.len()).map(|i| lhs.values[i] - gl.values[i] - gu2.values[i]).collect();
    ScalarField::new(g.clone(), vals)
}

/// Δ_H u^♭ - ∇*∇u^♭ - Ric(u, ·), returned with the index raised.
pub fn weitzenbock_residual(u: &VectorField, model: &ManifoldModel) -> VectorField {
    let hodge = hodge_laplacian_1form(&u.flat()).sharp();
    let boch = bochner_laplacian(u);
    let ric = ricci_operator(u, model);
    // ∇*∇ = -Δ⃗
    hodge.axpy(1.0, &boch).axpy(-1.0, &ric)
}

/// X(g(Y,Z)) - g(∇_X Y, Z) - g(Y, ∇_X Z).
pub fn metric_compatibility_residual(x: &VectorField, y: &VectorField, z: &VectorField) -> ScalarField {
    let g = &x.grid;
    let gyz = y.dot(z);
    let dg = scalar_gradient(&gyz).flat();
    let lhs: Vec<f64> = (0..g.len()).map(|i| dg.wr[i] * x.ur[i] + dg.wth[i] * x.uth[i]).collect();
    let a = directional_derivative(x, y).dot(z);
    let b = y.dot(&directional_derivative(x, z));
    let vals = (0..g.len()).map(|i| lhs[i] - a.values[i] - b.values[i]).collect();
    ScalarField::new(g.clone(), vals)
}

/// Weighted L² norm of a scalar restricted to r ≤ r_cut.
pub fn l2_within(f: &ScalarField, r_cut: f64) -> f64 {
    crate::grid::lp_norm_within(f, 2.0, r_cut).expect("p = 2 is valid")
}

