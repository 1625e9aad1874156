//! Closed-form chart data for the hyperbolic space H^n in geodesic polar
//! coordinates `g = dr^2 + sinh(r)^2 dω^2`.
//!
//! For n = 2 the chart is (r, θ). For n = 3 only the radial quantities are
//! used (scalar oracle), so the angular part is never materialized.

use crate::Error;
use std::f64::consts::PI;

/// Space-form model of curvature -1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldModel {
    pub dimension: usize,
    pub curvature: f64,
    /// Ric = ricci_constant * g.
    pub ricci_constant: f64,
    /// Minus the largest Ricci eigenvalue.
    pub c0: f64,
    /// Poincaré constant lower bound used in all rate predictions.
    pub delta_n: f64,
    /// Bound on |R| + |∇R| + |∇²R|.
    pub k_bound: f64,
}

impl ManifoldModel {
    pub fn hyperbolic(dimension: usize) -> Result<Self, Error> {
        if !(2..=3).contains(&dimension) {
            return Err(Error::Domain(format!(
                "only H^2 and H^3 are modelled, got n = {dimension}"
            )));
        }
        let n = dimension as f64;
        let kappa = -1.0;
        let c0 = n - 1.0;
        // kappa_star is the lower sectional curvature bound.
        let kappa_star = -1.0;
        let delta_n = (c0 - (n - 1.0) * (n - 2.0) * kappa_star) / 4.0;
        Ok(Self {
            dimension,
            curvature: kappa,
            ricci_constant: kappa * (n - 1.0),
            c0,
            delta_n,
            k_bound: riemann_norm(dimension, kappa),
        })
    }

    /// Bottom of the L^2 spectrum of -Δ_g, (n-1)^2/4.
    pub fn delta_sharp(&self) -> f64 {
        let n = self.dimension as f64;
        (n - 1.0) * (n - 1.0) / 4.0
    }
}

/// |R| for a space form: |R|^2 = 2 n (n-1) κ^2.
pub fn riemann_norm(n: usize, kappa: f64) -> f64 {
    let n = n as f64;
    (2.0 * n * (n - 1.0)).sqrt() * kappa.abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub r: f64,
    pub theta: f64,
}

impl ChartPoint {
    pub fn new(r: f64, theta: f64) -> Self {
        Self {
            r,
            theta: theta.rem_euclid(2.0 * PI),
        }
    }
}

fn check_chart(pt: &ChartPoint) -> Result<(), Error> {
    if !pt.r.is_finite() || !pt.theta.is_finite() {
        return Err(Error::Domain("non-finite chart point".into()));
    }
    if pt.r <= 0.0 {
        return Err(Error::DegenerateChart(pt.r));
    }
    Ok(())
}

/// Diagonal metric in the (∂r, ∂θ) frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric2 {
    pub g: [[f64; 2]; 2],
    pub g_inv: [[f64; 2]; 2],
}

pub fn metric_at(model: &ManifoldModel, pt: &ChartPoint) -> Result<Metric2, Error> {
    check_chart(pt)?;
    require_plane(model)?;
    let s2 = pt.r.sinh().powi(2);
    Ok(Metric2 {
        g: [[1.0, 0.0], [0.0, s2]],
        g_inv: [[1.0, 0.0], [0.0, 1.0 / s2]],
    })
}

fn require_plane(model: &ManifoldModel) -> Result<(), Error> {
    if model.dimension != 2 {
        return Err(Error::Domain(
            "tensor chart data is only provided on H^2".into(),
        ));
    }
    Ok(())
}

/// Γ^k_{ij}, indexed `gamma[k][i][j]` with 0 = r, 1 = θ.
pub fn christoffel_at(model: &ManifoldModel, pt: &ChartPoint) -> Result<[[[f64; 2]; 2]; 2], Error> {
    check_chart(pt)?;
    require_plane(model)?;
    let (s, c) = (pt.r.sinh(), pt.r.cosh());
    let mut gamma = [[[0.0; 2]; 2]; 2];
    gamma[0][1][1] = -s * c;
    gamma[1][0][1] = c / s;
    gamma[1][1][0] = c / s;
    Ok(gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curvature2 {
    /// Fully covariant R_{ijkl} = Riem(∂i, ∂j, ∂k, ∂l).
    pub riemann: [[[[f64; 2]; 2]; 2]; 2],
    pub ricci: [[f64; 2]; 2],
    pub sectional: f64,
}

/// Space-form curvature: Riem(X,Y,Z,T) = κ [g(X,Z) g(Y,T) - g(Y,Z) g(X,T)].
pub fn curvature_at(model: &ManifoldModel, pt: &ChartPoint) -> Result<Curvature2, Error> {
    let m = metric_at(model, pt)?;
    let kappa = model.curvature;
    let mut riemann = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    riemann[i][j][k][l] = kappa * (m.g[i][k] * m.g[j][l] - m.g[j][k] * m.g[i][l]);
                }
            }
        }
    }
    // Ric(X, Y) = Σ_i Riem(X, e_i, Y, e_i), i.e. Ric_{jk} = g^{il} R_{jikl}.
    let mut ricci = [[0.0; 2]; 2];
    for j in 0..2 {
        for k in 0..2 {
            let mut acc = 0.0;
            for i in 0..2 {
                for l in 0..2 {
                    acc += m.g_inv[i][l] * riemann[j][i][k][l];
                }
            }
            ricci[j][k] = acc;
        }
    }
    let sectional = riemann[0][1][0][1] / (m.g[0][0] * m.g[1][1] - m.g[0][1] * m.g[1][0]);
    Ok(Curvature2 {
        riemann,
        ricci,
        sectional,
    })
}

/// Raise an index: ω -> ω^♯.
pub fn sharp(covector: [f64; 2], pt: &ChartPoint) -> Result<[f64; 2], Error> {
    check_chart(pt)?;
    let s2 = pt.r.sinh().powi(2);
    Ok([covector[0], covector[1] / s2])
}

/// Lower an index: v -> v^♭.
pub fn flat(vector: [f64; 2], pt: &ChartPoint) -> Result<[f64; 2], Error> {
    check_chart(pt)?;
    let s2 = pt.r.sinh().powi(2);
    Ok([vector[0], vector[1] * s2])
}

/// √det g at radius r.
pub fn volume_weight(model: &ManifoldModel, r: f64) -> f64 {
    r.sinh().powi(model.dimension as i32 - 1)
}

/// Volume of the geodesic ball of radius `r` in H^2.
pub fn ball_volume_h2(r: f64) -> f64 {
    2.0 * PI * (r.cosh() - 1.0)
}
