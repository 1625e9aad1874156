//! Decay fits and the estimate campaigns: dispersive and smoothing rates,
//! the pointwise comparison with the damped scalar flow, the Bakry-type
//! gradient bound, and refinement studies for the discrete identities.

use crate::geometry::ManifoldModel;
use crate::grid::{lp_norm, Grid, PointwiseNorm, ScalarField, VectorField};
use crate::mac::FaceField;
use crate::ops;
use crate::semigroup::{self, EvolutionConfig, NormRow, Scheme};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use std::f64::consts::PI;
use std::sync::Arc;

/// Fit windows; the small-time one is fitted in log-log, the tail in log-lin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitWindows {
    pub small: (f64, f64),
    pub tail: (f64, f64),
}

impl FitWindows {
    pub fn default_for(dt: f64) -> Self {
        Self { small: (2.0 * dt, (20.0 * dt).max(0.02)), tail: (2.0, 6.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log units.
    pub rms_residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub small_time_power: f64,
    /// Positive for decay: value ~ e^{-rate t}.
    pub large_time_rate: f64,
    pub small_fit: LineFit,
    pub tail_fit: LineFit,
    pub windows: FitWindows,
    /// Both fits have rms residual below 0.05 in log units.
    pub quality_ok: bool,
}

pub const MIN_POINTS: usize = 8;

fn line_fit(pts: &[(f64, f64)]) -> Result<LineFit> {
    if pts.len() < MIN_POINTS {
        return Err(Error::Fit(format!("window holds {} points, need at least {MIN_POINTS}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("window has a single abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(LineFit { slope, intercept, rms_residual: (ss / n).sqrt(), points: pts.len() })
}

fn in_window(t: f64, w: (f64, f64)) -> bool {
    t >= w.0 * (1.0 - 1e-9) && t <= w.1 * (1.0 + 1e-9)
}

pub fn fit_decay(series: &[(f64, f64)], windows: &FitWindows) -> Result<DecayFit> {
    let (s, l) = (windows.small, windows.tail);
    if !(s.0 > 0.0 && s.0 < s.1 && l.0 < l.1) {
        return Err(Error::Fit(format!("malformed windows {windows:?}")));
    }
    if s.1 > l.0 && l.1 > s.0 {
        return Err(Error::Fit("fit windows overlap".into()));
    }
    let mut small = Vec::new();
    let mut tail = Vec::new();
    for &(t, v) in series {
        let hit_s = in_window(t, s);
        let hit_l = in_window(t, l);
        if (hit_s || hit_l) && !(v > 0.0 && v.is_finite()) {
            return Err(Error::Fit(format!("nonpositive value {v} at t = {t}")));
        }
        if hit_s {
            small.push((t.ln(), v.ln()));
        }
        if hit_l {
            tail.push((t, v.ln()));
        }
    }
    let sf = line_fit(&small)?;
    let tf = line_fit(&tail)?;
    Ok(DecayFit {
        small_time_power: sf.slope,
        large_time_rate: -tf.slope,
        small_fit: sf,
        tail_fit: tf,
        windows: *windows,
        quality_ok: sf.rms_residual < 0.05 && tf.rms_residual < 0.05,
    })
}

/// -(n/2)(1/p - 1/q).
pub fn predicted_power(n: usize, p: f64, q: f64) -> f64 {
    (n as f64 / 2.0) * (1.0 / q - 1.0 / p)
}

/// γ_{p,q} = (δ/2)[(1/p - 1/q) + (8/q)(1 - 1/p)].
pub fn gamma_pq(delta: f64, p: f64, q: f64) -> f64 {
    0.5 * delta * ((1.0 / p - 1.0 / q) + (8.0 / q) * (1.0 - 1.0 / p))
}

/// Decay exponent of the scalar flow on L^p: 4δ(p-1)/p² + c0.
pub fn lp_rate(delta: f64, c0: f64, p: f64) -> f64 {
    4.0 * delta * (p - 1.0) / (p * p) + c0
}

/// Tail exponent of ‖∇u(t)‖_p: c0 + (4δ/p)(1 - 1/p).
pub fn smoothing_rate(delta: f64, c0: f64, p: f64) -> f64 {
    c0 + 4.0 * delta / p * (1.0 - 1.0 / p)
}

fn ser_exponent<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flow {
    Scalar,
    Bochner,
    Stokes,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub flow: Flow,
    #[serde(serialize_with = "ser_exponent")]
    pub p: f64,
    #[serde(serialize_with = "ser_exponent")]
    pub q: f64,
    pub measured_power: f64,
    pub predicted_power: f64,
    pub measured_rate: f64,
    /// Lower bound built from the Poincaré constant δ_n of the model.
    pub predicted_rate: f64,
    /// Same bound with the sharp spectral value (n-1)²/4.
    pub predicted_rate_sharp: f64,
    pub power_ok: bool,
    pub rate_ok: bool,
    pub pass: bool,
    pub fit_quality_ok: bool,
    /// The observable is ‖∇u‖_q rather than ‖u‖_q.
    pub gradient: bool,
}

pub const POWER_TOL: f64 = 0.15;
pub const RATE_SLACK: f64 = 0.05;

impl RateReport {
    #[allow(clippy::too_many_arguments)]
    fn build(flow: Flow, p: f64, q: f64, fit: &DecayFit, power: f64, rate: f64, rate_sharp: f64) -> Self {
        let power_ok = (fit.small_time_power - power).abs() <= POWER_TOL;
        let rate_ok = fit.large_time_rate >= rate * (1.0 - RATE_SLACK);
        Self {
            flow,
            p,
            q,
            measured_power: fit.small_time_power,
            predicted_power: power,
            measured_rate: fit.large_time_rate,
            predicted_rate: rate,
            predicted_rate_sharp: rate_sharp,
            power_ok,
            rate_ok,
            pass: power_ok && rate_ok,
            fit_quality_ok: fit.quality_ok,
            gradient: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Gaussian,
    /// Lipschitz tent max(0, 1 - |r - r0|/w).
    Tent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VectorShape {
    /// Angular field: divergence free.
    Swirl,
    Radial,
    /// Equal radial and angular parts.
    Mixed,
}

/// A family of θ-independent bumps: radial profile around the ring r = r0
/// (the pole when r0 = 0), one member per width. Rate fits use the envelope
/// (pointwise maximum) of the normalized ratios over the family, which is
/// how a fixed-datum run sees the operator norm at all time scales.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct BumpSpec {
    pub profile: Profile,
    pub center_r: f64,
    pub widths: Vec<f64>,
    pub shape: VectorShape,
}

impl BumpSpec {
    /// Pole-centred ladder of widths w_k = factor_k · h_r.
    pub fn ladder(profile: Profile, grid: &Grid, factors: &[f64]) -> Self {
        Self { profile, center_r: 0.0, widths: factors.iter().map(|f| f * grid.h_r).collect(), shape: VectorShape::Mixed }
    }

    pub fn with_shape(mut self, shape: VectorShape) -> Self {
        self.shape = shape;
        self
    }

    fn support(&self) -> f64 {
        let w = self.widths.iter().cloned().fold(0.0, f64::max);
        match self.profile {
            Profile::Gaussian => self.center_r + 6.0 * w,
            Profile::Tent => self.center_r + w,
        }
    }

    pub fn validate_on(&self, grid: &Grid) -> Result<()> {
        if self.widths.is_empty() || self.widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Domain("bump family needs positive widths".into()));
        }
        if self.center_r < 0.0 || self.support() > grid.r_max / 2.0 {
            return Err(Error::Domain(format!(
                "bump reaches r = {:.3}, beyond R_max/2 = {:.3}",
                self.support(),
                grid.r_max / 2.0
            )));
        }
        Ok(())
    }

    /// Scalar profile value at radius r for width w.
    pub fn scalar(&self, w: f64, r: f64) -> f64 {
        let x = (r - self.center_r).abs() / w;
        match self.profile {
            Profile::Gaussian => (-0.5 * x * x).exp(),
            Profile::Tent => (1.0 - x).max(0.0),
        }
    }

    /// Vector amplitude: vanishes linearly at the pole so the field is
    /// continuous there.
    pub fn amplitude(&self, w: f64, r: f64) -> f64 {
        let base = self.scalar(w, r);
        if self.center_r == 0.0 {
            base * r / w
        } else {
            base
        }
    }

    pub fn frame(&self, w: f64, r: f64) -> (f64, f64) {
        let a = self.amplitude(w, r);
        match self.shape {
            VectorShape::Swirl => (0.0, a),
            VectorShape::Radial => (a, 0.0),
            VectorShape::Mixed => (a, a),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub grid: Arc<Grid>,
    pub dt: f64,
    pub t_final: f64,
    pub windows: FitWindows,
    pub scheme: Scheme,
    pub tol: f64,
    /// Ledger spacing after the small-time window.
    pub coarse_every: f64,
}

impl CampaignConfig {
    pub fn new(grid: Arc<Grid>, dt: f64, t_final: f64) -> Self {
        Self {
            grid,
            dt,
            t_final,
            windows: FitWindows::default_for(dt),
            scheme: Scheme::ImplicitEuler,
            tol: crate::elliptic::DEFAULT_TOL,
            coarse_every: 0.02,
        }
    }

    /// Every step through the small window, then every `coarse_every`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let fine_end = 1.5 * self.windows.small.1;
        let nf = (fine_end / self.dt).round() as usize;
        let mut t: Vec<f64> = (1..=nf).map(|k| k as f64 * self.dt).collect();
        let start = (fine_end / self.coarse_every).floor() as usize + 1;
        let nc = (self.t_final / self.coarse_every).round() as usize;
        t.extend((start..=nc).map(|k| k as f64 * self.coarse_every));
        t.retain(|&x| x <= self.t_final * (1.0 + 1e-12));
        t
    }

    pub fn evolution(&self) -> EvolutionConfig {
        let mut e = EvolutionConfig::new(self.dt, self.t_final).with_scheme(self.scheme);
        e.snapshot_times = self.snapshot_times();
        e.tol = self.tol;
        e
    }
}

fn norm_from_row(r: &NormRow, q: f64) -> Result<f64> {
    check_exponent(q)?;
    Ok(if q == 1.0 {
        r.l1
    } else if q == 2.0 {
        r.l2
    } else if q == 4.0 {
        r.l4
    } else {
        r.linf
    })
}

/// Ledger of one family member under the chosen flow.
pub fn run_member(flow: Flow, model: &ManifoldModel, data: &BumpSpec, w: f64, cfg: &CampaignConfig) -> Result<Vec<NormRow>> {
    let g = &cfg.grid;
    let ecfg = cfg.evolution();
    Ok(match flow {
        Flow::Scalar => {
            let f0 = g.sample(|r, _| data.scalar(w, r));
            semigroup::evolve_scalar_heat(&f0, model.c0, &ecfg)?.ledger
        }
        Flow::Bochner => {
            let u0 = FaceField::sample_frame(g, |r, _| data.frame(w, r));
            semigroup::evolve_bochner_heat_faces(&u0, model, &ecfg)?.0.ledger
        }
        Flow::Stokes => {
            let u0 = FaceField::sample_frame(g, |r, _| data.frame(w, r));
            semigroup::evolve_stokes_faces(&u0, model, &ecfg)?.0.ledger
        }
    })
}

fn initial_norm(flow: Flow, data: &BumpSpec, w: f64, g: &Arc<Grid>, p: f64) -> Result<f64> {
    match flow {
        Flow::Scalar => lp_norm(&g.sample(|r, _| data.scalar(w, r)), p),
        _ => lp_norm(&FaceField::sample_frame(g, |r, _| data.frame(w, r)).to_nodes(), p),
    }
}

/// Pointwise maximum over members of value_k(t)/norm_k.
fn envelope(members: &[(Vec<NormRow>, f64)], pick: impl Fn(&NormRow) -> Result<f64>) -> Result<Vec<(f64, f64)>> {
    let base = &members[0].0;
    let mut out = Vec::with_capacity(base.len());
    for (i, row) in base.iter().enumerate() {
        let mut best = 0.0f64;
        for (ledger, n0) in members {
            best = best.max(pick(&ledger[i])? / n0);
        }
        out.push((row.time, best));
    }
    Ok(out)
}

/// Ledgers of all family members, run concurrently.
pub fn run_family(flow: Flow, model: &ManifoldModel, data: &BumpSpec, cfg: &CampaignConfig) -> Result<Vec<Vec<NormRow>>> {
    data.validate_on(&cfg.grid)?;
    if flow == Flow::Stokes && data.shape != VectorShape::Swirl {
        log::warn!("Stokes campaign on data that is not divergence free");
    }
    data.widths.par_iter().map(|&w| run_member(flow, model, data, w, cfg)).collect()
}

/// Envelope series max_k ‖u_k(t)‖_q / ‖u_k(0)‖_p from precomputed family ledgers.
pub fn envelope_series(flow: Flow, p: f64, q: f64, data: &BumpSpec, cfg: &CampaignConfig, ledgers: &[Vec<NormRow>]) -> Result<Vec<(f64, f64)>> {
    if !(p >= 1.0 && q >= p) {
        return Err(Error::Domain(format!("need 1 <= p <= q, got p = {p}, q = {q}")));
    }
    let members = data
        .widths
        .iter()
        .zip(ledgers)
        .map(|(&w, l)| Ok((l.clone(), initial_norm(flow, data, w, &cfg.grid, p)?)))
        .collect::<Result<Vec<_>>>()?;
    envelope(&members, |r| norm_from_row(r, q))
}

/// Decay fit of the envelope series.
pub fn envelope_fit(flow: Flow, p: f64, q: f64, data: &BumpSpec, cfg: &CampaignConfig, ledgers: &[Vec<NormRow>]) -> Result<DecayFit> {
    fit_decay(&envelope_series(flow, p, q, data, cfg, ledgers)?, &cfg.windows)
}

pub fn dispersive_report(
    flow: Flow,
    p: f64,
    q: f64,
    model: &ManifoldModel,
    data: &BumpSpec,
    cfg: &CampaignConfig,
    ledgers: &[Vec<NormRow>],
) -> Result<RateReport> {
    let fit = envelope_fit(flow, p, q, data, cfg, ledgers)?;
    let rate = gamma_pq(model.delta_n, p, q) + model.c0;
    let sharp = gamma_pq(model.delta_sharp(), p, q) + model.c0;
    Ok(RateReport::build(flow, p, q, &fit, predicted_power(model.dimension, p, q), rate, sharp))
}

pub fn dispersive_campaign(
    flow: Flow,
    p: f64,
    q: f64,
    model: &ManifoldModel,
    data: &BumpSpec,
    cfg: &CampaignConfig,
) -> Result<RateReport> {
    check_exponent(q)?;
    let ledgers = run_family(flow, model, data, cfg)?;
    dispersive_report(flow, p, q, model, data, cfg, &ledgers)
}

fn check_exponent(q: f64) -> Result<()> {
    if [1.0, 2.0, 4.0, f64::INFINITY].contains(&q) {
        Ok(())
    } else {
        Err(Error::Domain(format!("ledger records q in {{1, 2, 4, inf}}, got {q}")))
    }
}

/// Scalar L^p → L^p decay: small-time power 0, tail rate 4δ(p-1)/p² + c0.
pub fn lp_decay_report(p: f64, model: &ManifoldModel, data: &BumpSpec, cfg: &CampaignConfig, ledgers: &[Vec<NormRow>]) -> Result<RateReport> {
    let fit = envelope_fit(Flow::Scalar, p, p, data, cfg, ledgers)?;
    let rate = lp_rate(model.delta_n, model.c0, p);
    let sharp = lp_rate(model.delta_sharp(), model.c0, p);
    Ok(RateReport::build(Flow::Scalar, p, p, &fit, 0.0, rate, sharp))
}

/// ‖∇u(t)‖_p / ‖u0‖_p; p = 2 reads the ledger, other p store sparse snapshots.
pub fn smoothing_campaign(flow: Flow, p: f64, model: &ManifoldModel, data: &BumpSpec, cfg: &CampaignConfig) -> Result<RateReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("smoothing needs 1 < p < inf, got {p}")));
    }
    data.validate_on(&cfg.grid)?;
    let g = &cfg.grid;
    let members: Vec<(Vec<NormRow>, f64)> = if p == 2.0 {
        let ledgers = run_family(flow, model, data, cfg)?;
        data.widths
            .iter()
            .zip(ledgers)
            .map(|(&w, l)| Ok((l, initial_norm(flow, data, w, g, p)?)))
            .collect::<Result<_>>()?
    } else {
        data.widths
            .iter()
            .map(|&w| {
                let mut e = cfg.evolution();
                e.store_fields = true;
                let rows = match flow {
                    Flow::Scalar => {
                        let f0 = g.sample(|r, _| data.scalar(w, r));
                        semigroup::evolve_scalar_heat(&f0, model.c0, &e)?
                            .snapshots
                            .iter()
                            .map(|(t, f)| grad_row(*t, &ops::scalar_gradient(f).dot(&ops::scalar_gradient(f)), p))
                            .collect()
                    }
                    _ => {
                        let u0 = FaceField::sample_frame(g, |r, _| data.frame(w, r));
                        let tr = if flow == Flow::Bochner {
                            semigroup::evolve_bochner_heat_faces(&u0, model, &e)?.0
                        } else {
                            semigroup::evolve_stokes_faces(&u0, model, &e)?.0
                        };
                        tr.snapshots.iter().map(|(t, u)| grad_row(*t, &ops::gradient_norm_sq(u), p)).collect()
                    }
                };
                Ok((rows, initial_norm(flow, data, w, g, p)?))
            })
            .collect::<Result<_>>()?
    };
    let series = envelope(&members, |r| Ok(r.grad_l2))?;
    let fit = fit_decay(&series, &cfg.windows)?;
    let rate = smoothing_rate(model.delta_n, model.c0, p);
    let sharp = smoothing_rate(model.delta_sharp(), model.c0, p);
    Ok(RateReport { gradient: true, ..RateReport::build(flow, p, p, &fit, -0.5, rate, sharp) })
}

/// Ledger row whose grad_l2 slot carries ‖∇u‖_p.
fn grad_row(t: f64, grad_sq: &ScalarField, p: f64) -> NormRow {
    let abs = ScalarField::new(grad_sq.grid.clone(), grad_sq.values.iter().map(|x| x.max(0.0).sqrt()).collect());
    let v = lp_norm(&abs, p).expect("p > 1");
    NormRow { time: t, l1: 0.0, l2: 0.0, l4: 0.0, linf: 0.0, grad_l2: v, energy_integral: 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseReport {
    /// max over nodes and snapshots of (lhs - rhs), clamped at 0.
    pub max_violation: f64,
    pub at_time: f64,
    pub at_radius: f64,
    /// Largest left-hand side seen, for scale.
    pub lhs_scale: f64,
}

/// |e^{t(Δ⃗+r)}u0| ≤ e^{-c0 t} e^{tΔ}|u0| at every node and snapshot.
pub fn comparison_check(u0: &FaceField, model: &ManifoldModel, cfg: &EvolutionConfig) -> Result<PointwiseReport> {
    let mut e = cfg.clone();
    e.store_fields = true;
    let (vec_tr, _) = semigroup::evolve_bochner_heat_faces(u0, model, &e)?;
    let g = u0.grid.clone();
    let abs0 = ScalarField::new(g.clone(), u0.to_nodes().pointwise_norm());
    let sc_tr = semigroup::evolve_scalar_heat(&abs0, model.c0, &e)?;
    let mut rep = PointwiseReport { max_violation: 0.0, at_time: 0.0, at_radius: 0.0, lhs_scale: 0.0 };
    for ((t, u), (_, s)) in vec_tr.snapshots.iter().zip(&sc_tr.snapshots) {
        let nu = u.pointwise_norm();
        for (i, (a, b)) in nu.iter().zip(&s.values).enumerate() {
            rep.lhs_scale = rep.lhs_scale.max(*a);
            if a - b > rep.max_violation {
                rep.max_violation = a - b;
                rep.at_time = *t;
                rep.at_radius = g.r[i / g.n_theta];
            }
        }
    }
    Ok(rep)
}

/// -(max(c0, 1/c0) + 2Kn + 2Kn^{3/2} + 2).
pub fn alpha_one(model: &ManifoldModel) -> f64 {
    let n = model.dimension as f64;
    let k = model.k_bound;
    -(model.c0.max(1.0 / model.c0) + 2.0 * k * n + 2.0 * k * n.powf(1.5) + 2.0)
}

/// 1/d(t) = α₁ / (e^{2α₁t} - 1).
pub fn inv_d(alpha1: f64, t: f64) -> f64 {
    alpha1 / (2.0 * alpha1 * t).exp_m1()
}

/// |∇Q_t u0|² ≤ (1/d(t))(P_t|u0|² - |Q_t u0|²) - |Q_t u0|², checked on
/// r ≤ R_max/2 at the given times.
pub fn bakry_check(u0: &FaceField, model: &ManifoldModel, dt: f64, times: &[f64]) -> Result<PointwiseReport> {
    if model.dimension != 2 {
        return Err(Error::Domain("the Bakry check is set up for n = 2".into()));
    }
    let t_final = times.iter().cloned().fold(0.0, f64::max);
    let mut e = EvolutionConfig::new(dt, t_final);
    e.snapshot_times = times.to_vec();
    e.store_fields = true;
    let (q_tr, _) = semigroup::evolve_bochner_heat_faces(u0, model, &e)?;
    let g = u0.grid.clone();
    let sq0 = u0.to_nodes().dot(&u0.to_nodes());
    let p_tr = semigroup::evolve_scalar_heat(&sq0, 0.0, &e)?;
    let a1 = alpha_one(model);
    let rings = g.rings_within(g.r_max / 2.0);
    let mut rep = PointwiseReport { max_violation: 0.0, at_time: 0.0, at_radius: 0.0, lhs_scale: 0.0 };
    for ((t, q), (_, p)) in q_tr.snapshots.iter().zip(&p_tr.snapshots) {
        if *t <= 0.0 {
            continue;
        }
        let c = inv_d(a1, *t);
        let gq = ops::gradient_norm_sq(q);
        let q2 = q.dot(q);
        for i in 0..rings * g.n_theta {
            let lhs = gq.values[i];
            let rhs = c * (p.values[i] - q2.values[i]) - q2.values[i];
            rep.lhs_scale = rep.lhs_scale.max(lhs);
            if lhs - rhs > rep.max_violation {
                rep.max_violation = lhs - rhs;
                rep.at_time = *t;
                rep.at_radius = g.r[i / g.n_theta];
            }
        }
    }
    Ok(rep)
}

/// Smooth test field given by chart components (P, Q) in x = r cos θ, y = r sin θ.
#[derive(Debug, Clone, Copy)]
pub struct Manufactured {
    pub name: &'static str,
    pub cart: fn(f64, f64) -> (f64, f64),
}

impl Manufactured {
    pub fn sample(&self, g: &Arc<Grid>) -> VectorField {
        VectorField::sample_frame(g, |r, th| {
            let (c, s) = (th.cos(), th.sin());
            let (p, q) = (self.cart)(r * c, r * s);
            (p * c + q * s, -p * s + q * c)
        })
    }
}

pub fn manufactured_fields() -> Vec<Manufactured> {
    vec![
        Manufactured {
            name: "gauss-shift",
            cart: |x, y| {
                let e = (-(x * x + y * y)).exp();
                (e * (1.0 + x), e * y * y)
            },
        },
        Manufactured {
            name: "swirl",
            cart: |x, y| {
                let e = (-(x * x + y * y) / 2.0).exp();
                (-y * e, x * e)
            },
        },
        Manufactured {
            name: "saddle",
            cart: |x, y| {
                let e = (-(x * x + y * y)).exp();
                ((x * x - y * y) * e, x * y * e)
            },
        },
        Manufactured {
            name: "off-center",
            cart: |x, y| {
                let e = (-((x - 0.8).powi(2) + (y + 0.3).powi(2)) * 1.5).exp();
                (e, 0.5 * e * x)
            },
        },
        Manufactured {
            name: "mode3",
            cart: |x, y| {
                let e = (-(x * x + y * y) * 0.7).exp();
                ((x * x * x - 3.0 * x * y * y) * e, (3.0 * x * x * y - y * y * y) * e * 0.5 + e)
            },
        },
    ]
}

/// L² norm over r_in ≤ r ≤ r_out.
pub fn l2_annulus<F: PointwiseNorm>(f: &F, r_in: f64, r_out: f64) -> f64 {
    let g = f.grid();
    let v = f.pointwise_norm();
    let nt = g.n_theta;
    let mut acc = 0.0;
    for j in 0..g.n_r {
        if g.r[j] < r_in || g.r[j] > r_out {
            continue;
        }
        acc += g.weight(j) * v[j * nt..(j + 1) * nt].iter().map(|x| x * x).sum::<f64>();
    }
    acc.sqrt()
}

/// Residuals of the three identities for one field on one grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRow {
    pub field: String,
    pub n_r: usize,
    pub n_theta: usize,
    pub h: f64,
    pub bochner: f64,
    pub weitzenbock: f64,
    pub metric: f64,
    /// Weitzenböck residual over the whole disk r ≤ r_out, pole included.
    pub weitzenbock_disk: f64,
}

/// Annulus used for the identity norms. The innermost ring sees a first
/// order flux error of the wedge cells, so the pole is excluded.
pub const IDENTITY_ANNULUS: (f64, f64) = (0.5, 6.0);

pub fn identity_residuals(grid: &Arc<Grid>, model: &ManifoldModel, fields: &[Manufactured]) -> Vec<IdentityRow> {
    let (a, b) = IDENTITY_ANNULUS;
    let samples: Vec<VectorField> = fields.iter().map(|f| f.sample(grid)).collect();
    (0..fields.len())
        .into_par_iter()
        .map(|i| {
            let u = &samples[i];
            let y = &samples[(i + 1) % samples.len()];
            let z = &samples[(i + 2) % samples.len()];
            let w = ops::weitzenbock_residual(u, model);
            IdentityRow {
                field: fields[i].name.to_string(),
                n_r: grid.n_r,
                n_theta: grid.n_theta,
                h: grid.h_r,
                bochner: l2_annulus(&ops::bochner_identity_residual(u), a, b),
                weitzenbock: l2_annulus(&w, a, b),
                metric: l2_annulus(&ops::metric_compatibility_residual(u, y, z), a, b),
                weitzenbock_disk: l2_annulus(&w, 0.0, b),
            }
        })
        .collect()
}

/// Observed order log2(e_coarse/e_fine) for successive halvings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KatoReport {
    pub h: f64,
    /// Per field: min over r ≤ R_max/2 of |∇u|² - |∇|u||².
    pub min_defect: Vec<f64>,
}

impl KatoReport {
    /// Smallest C with min_defect ≥ -C·h for every field.
    pub fn constant(&self) -> f64 {
        self.min_defect.iter().map(|d| (-d / self.h).max(0.0)).fold(0.0, f64::max)
    }
}

/// Random smooth field: three Gaussian blobs with random centres, widths and
/// constant chart directions.
pub fn random_smooth_field(rng: &mut impl Rng) -> impl Fn(f64, f64) -> (f64, f64) + Send + Sync {
    let blobs: Vec<[f64; 5]> = (0..3)
        .map(|_| {
            let rho = rng.gen_range(0.0..2.0);
            let phi = rng.gen_range(0.0..2.0 * PI);
            [
                rho * phi.cos(),
                rho * phi.sin(),
                rng.gen_range(0.5..1.2),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]
        })
        .collect();
    move |x, y| {
        blobs.iter().fold((0.0, 0.0), |(p, q), b| {
            let e = (-((x - b[0]).powi(2) + (y - b[1]).powi(2)) / (b[2] * b[2])).exp();
            (p + b[3] * e, q + b[4] * e)
        })
    }
}

pub fn kato_study(grid: &Arc<Grid>, count: usize, seed: u64) -> KatoReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<_> = (0..count).map(|_| random_smooth_field(&mut rng)).collect();
    let rings = grid.rings_within(grid.r_max / 2.0);
    let min_defect = fields
        .par_iter()
        .map(|f| {
            let u = VectorField::sample_frame(grid, |r, th| {
                let (c, s) = (th.cos(), th.sin());
                let (p, q) = f(r * c, r * s);
                (p * c + q * s, -p * s + q * c)
            });
            let d = ops::kato_defect(&u);
            d.values[..rings * grid.n_theta].iter().cloned().fold(f64::INFINITY, f64::min)
        })
        .collect();
    KatoReport { h: grid.h_r, min_defect }
}
