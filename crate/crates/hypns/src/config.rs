//! Experiment configuration: TOML with sections, unknown keys rejected.
//!
//! ```toml
//! campaign = "heat"          # optional; must match the subcommand if given
//! seed = 0
//! threads = 1
//!
//! [manifold]                 # defaults: n = 2, r_max = 12, n_r = 384, n_theta = 256
//! n = 2                      # (ns: r_max = 8, n_r = n_theta = 128)
//! r_max = 12.0
//! n_r = 384
//! n_theta = 256
//!
//! [evolution]
//! dt = 1e-3
//! t_final = 6.0              # heat/stokes 6, ns 1
//! scheme = "implicit-euler"  # or "trapezoidal"
//! tol = 1e-10
//! small_window = [0.002, 0.02]  # log-log fit of the small-time power
//! tail_window = [2.0, 6.0]      # log-lin fit of the tail rate
//!
//! [heat]
//! flow = "scalar"            # or "bochner"
//! pairs = ["1,inf", "2,2"]   # dispersive (p, q); q in {1, 2, 4, inf}
//! lp = [1, 2, 4]             # scalar L^p -> L^p tail rates
//! smoothing = []             # p values for ||grad u||_p; only p = 2 uses the ledger
//! profile = "gaussian"       # or "tent"
//! widths = [2, 3, 4.5]       # bump widths in units of h_r
//! shape = "mixed"            # swirl | radial | mixed
//! snapshot = false           # write the narrowest member's final field
//!
//! [stokes]
//! pairs = ["2,2"]
//! widths = [2, 3, 4.5]
//! profile = "gaussian"
//! compare = true             # Stokes vs Bochner flow on divergence-free data
//! compare_t_final = 1.0
//!
//! [ns]
//! amplitude = 2.0
//! picard = true
//! picard_t_final = 0.5
//! energy_slack = 0.02
//! vorticity_slack = 0.01
//!
//! [verify]
//! suite = "identities"       # identities | kato | pointwise | h3 | all
//! levels = [[384, 256], [768, 512], [1536, 1024]]
//! min_order = 1.9
//! kato_fields = 20
//!
//! [nonunique]
//! profiles = ["exp2", "const1"]
//! ladder = [4, 6, 8, 10, 11]
//! t_probe = 0.5
//! residual_tol = 1e-3
//! energy_slack = 0.02
//! track = true               # IMEX tracking of the selected member
//! track_t_final = 0.3
//!
//! [fit]
//! input = "trajectory.csv"
//! time_column = "time"
//! column = "L2"
//! small = [0.002, 0.02]
//! tail = [2.0, 6.0]
//!
//! [output]
//! dir = "out"
//! ```

use crate::estimates::{FitWindows, Flow, Profile, VectorShape};
use crate::semigroup::Scheme;
use crate::{Error, Result};
use serde::Deserialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Campaign {
    Heat,
    Stokes,
    Ns,
    Verify,
    Nonunique,
    Fit,
}

impl Campaign {
    pub fn name(self) -> &'static str {
        match self {
            Campaign::Heat => "heat",
            Campaign::Stokes => "stokes",
            Campaign::Ns => "ns",
            Campaign::Verify => "verify",
            Campaign::Nonunique => "nonunique",
            Campaign::Fit => "fit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub campaign: Option<Campaign>,
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
    #[serde(default)]
    pub manifold: ManifoldSection,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub heat: HeatSection,
    #[serde(default)]
    pub stokes: StokesSection,
    #[serde(default)]
    pub ns: NsSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub nonunique: NonuniqueSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSection {
    pub n: Option<usize>,
    pub r_max: Option<f64>,
    pub n_r: Option<usize>,
    pub n_theta: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub scheme: Option<Scheme>,
    pub tol: Option<f64>,
    /// Rate-fit windows for heat and stokes campaigns.
    pub small_window: Option<[f64; 2]>,
    pub tail_window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatSection {
    pub flow: Flow,
    pub pairs: Vec<String>,
    pub lp: Vec<f64>,
    pub smoothing: Vec<f64>,
    pub profile: Profile,
    pub widths: Option<Vec<f64>>,
    pub shape: Option<VectorShape>,
    pub snapshot: bool,
}

impl Default for HeatSection {
    fn default() -> Self {
        Self {
            flow: Flow::Scalar,
            pairs: vec!["1,inf".into(), "2,2".into(), "2,4".into(), "1,2".into()],
            lp: vec![1.0, 2.0, 4.0],
            smoothing: vec![],
            profile: Profile::Gaussian,
            widths: None,
            shape: None,
            snapshot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StokesSection {
    pub pairs: Vec<String>,
    pub profile: Profile,
    pub widths: Option<Vec<f64>>,
    pub compare: bool,
    pub compare_t_final: f64,
}

impl Default for StokesSection {
    fn default() -> Self {
        Self { pairs: vec!["2,2".into()], profile: Profile::Gaussian, widths: None, compare: true, compare_t_final: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NsSection {
    pub amplitude: f64,
    pub picard: bool,
    pub picard_t_final: f64,
    pub energy_slack: f64,
    pub vorticity_slack: f64,
}

impl Default for NsSection {
    fn default() -> Self {
        Self { amplitude: 2.0, picard: true, picard_t_final: 0.5, energy_slack: 0.02, vorticity_slack: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Identities,
    Kato,
    Pointwise,
    H3,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identities" => Suite::Identities,
            "kato" => Suite::Kato,
            "pointwise" => Suite::Pointwise,
            "h3" => Suite::H3,
            "all" => Suite::All,
            _ => return Err(Error::Format(format!("unknown suite {s:?} (identities|kato|pointwise|h3|all)"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub suite: Suite,
    pub levels: Vec<[usize; 2]>,
    pub min_order: f64,
    pub kato_fields: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { suite: Suite::Identities, levels: vec![[384, 256], [768, 512], [1536, 1024]], min_order: 1.9, kato_fields: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonuniqueSection {
    pub profiles: Vec<String>,
    pub ladder: Vec<f64>,
    pub t_probe: f64,
    pub residual_tol: f64,
    pub energy_slack: f64,
    pub track: bool,
    pub track_t_final: f64,
}

impl Default for NonuniqueSection {
    fn default() -> Self {
        Self {
            profiles: vec!["exp2".into(), "const1".into()],
            ladder: vec![4.0, 6.0, 8.0, 10.0, 11.0],
            t_probe: 0.5,
            residual_tol: 1e-3,
            energy_slack: 0.02,
            track: true,
            track_t_final: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub input: Option<PathBuf>,
    pub time_column: String,
    pub column: String,
    pub small: Option<[f64; 2]>,
    pub tail: Option<[f64; 2]>,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { input: None, time_column: "time".into(), column: "L2".into(), small: None, tail: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Grid and time stepping after campaign defaults are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub n: usize,
    pub r_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub tol: f64,
    pub windows: FitWindows,
}

impl ExperimentConfig {
    /// Parse and range-check. Empty or whitespace-only text is an error.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Format("empty config".into()));
        }
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        let m = &self.manifold;
        if let Some(n) = m.n {
            if !(2..=3).contains(&n) {
                return bad(format!("manifold.n must be 2 or 3, got {n}"));
            }
        }
        if let Some(r) = m.r_max {
            if !(r > 1.0 && r <= 40.0) {
                return bad(format!("manifold.r_max must lie in (1, 40], got {r}"));
            }
        }
        if let Some(n) = m.n_r {
            if !(8..=8192).contains(&n) {
                return bad(format!("manifold.n_r must lie in [8, 8192], got {n}"));
            }
        }
        if let Some(n) = m.n_theta {
            if !(8..=8192).contains(&n) || n % 2 != 0 {
                return bad(format!("manifold.n_theta must be even and in [8, 8192], got {n}"));
            }
        }
        let e = &self.evolution;
        if let Some(dt) = e.dt {
            if !(dt > 0.0 && dt <= 0.1) {
                return bad(format!("evolution.dt must lie in (0, 0.1], got {dt}"));
            }
        }
        if let Some(t) = e.t_final {
            if !(t > 0.0 && t <= 100.0) {
                return bad(format!("evolution.t_final must lie in (0, 100], got {t}"));
            }
        }
        if let Some(t) = e.tol {
            if !(t > 0.0 && t < 1e-2) {
                return bad(format!("evolution.tol must lie in (0, 1e-2), got {t}"));
            }
        }
        if let Some(t) = self.threads {
            if !(1..=1024).contains(&t) {
                return bad(format!("threads must lie in [1, 1024], got {t}"));
            }
        }
        for p in self.heat.pairs.iter().chain(&self.stokes.pairs) {
            parse_pair(p)?;
        }
        for &p in &self.heat.lp {
            if ![1.0, 2.0, 4.0].contains(&p) {
                return bad(format!("heat.lp entries must be 1, 2 or 4, got {p}"));
            }
        }
        for &p in &self.heat.smoothing {
            if !(p > 1.0 && p.is_finite()) {
                return bad(format!("heat.smoothing entries need 1 < p < inf, got {p}"));
            }
        }
        for w in [&self.heat.widths, &self.stokes.widths].into_iter().flatten() {
            if w.is_empty() || w.iter().any(|x| !(*x > 0.0)) {
                return bad("widths must be a nonempty list of positive factors".into());
            }
        }
        if self.heat.flow == Flow::Stokes {
            return bad("heat.flow is scalar or bochner; use the stokes campaign".into());
        }
        if !(self.stokes.compare_t_final > 0.0) {
            return bad("stokes.compare_t_final must be positive".into());
        }
        let ns = &self.ns;
        if !(ns.amplitude > 0.0 && ns.amplitude <= 100.0) {
            return bad(format!("ns.amplitude must lie in (0, 100], got {}", ns.amplitude));
        }
        if !(ns.picard_t_final > 0.0) || !(ns.energy_slack >= 0.0) || !(ns.vorticity_slack >= 0.0) {
            return bad("ns: picard_t_final must be positive and slacks nonnegative".into());
        }
        let v = &self.verify;
        if v.levels.len() < 2 || v.levels.iter().any(|[a, b]| *a < 8 || *b < 8 || b % 2 != 0) {
            return bad("verify.levels needs at least two [n_r, n_theta] pairs with n_r >= 8 and even n_theta >= 8".into());
        }
        if !(v.kato_fields >= 1) {
            return bad("verify.kato_fields must be at least 1".into());
        }
        let nu = &self.nonunique;
        if nu.profiles.is_empty() {
            return bad("nonunique.profiles must not be empty".into());
        }
        for p in &nu.profiles {
            crate::nonunique::TimeProfile::named(p)?;
        }
        if nu.ladder.len() < 2 || nu.ladder.windows(2).any(|w| !(w[1] > w[0])) || nu.ladder[0] <= 0.0 {
            return bad("nonunique.ladder must be increasing, positive, with at least two radii".into());
        }
        if !(nu.t_probe > 0.0 && nu.residual_tol > 0.0 && nu.energy_slack >= 0.0 && nu.track_t_final > 0.0) {
            return bad("nonunique: t_probe, residual_tol and track_t_final must be positive".into());
        }
        if let (Some(a), Some(b)) = (e.small_window, e.tail_window) {
            if a[1] > b[0] {
                return bad("evolution.small_window must end before tail_window starts".into());
            }
        }
        if e.small_window.is_some_and(|w| w[0] <= 0.0) {
            return bad("evolution.small_window must start after 0".into());
        }
        for w in [self.fit.small, self.fit.tail, e.small_window, e.tail_window].into_iter().flatten() {
            if !(w[0] >= 0.0 && w[1] > w[0]) {
                return bad(format!("fit windows need 0 <= a < b, got {w:?}"));
            }
        }
        Ok(())
    }

    /// Grid and stepping with per-campaign defaults.
    pub fn resolve(&self, campaign: Campaign) -> Result<Resolved> {
        let (r_max, n_r, n_theta, t_final) = match campaign {
            Campaign::Ns => (8.0, 128, 128, 1.0),
            _ => (12.0, 384, 256, 6.0),
        };
        let m = &self.manifold;
        let e = &self.evolution;
        let n = m.n.unwrap_or(2);
        let d = FitWindows::default_for(e.dt.unwrap_or(1e-3));
        if n == 3 && !(campaign == Campaign::Verify && self.verify.suite == Suite::H3) {
            return Err(Error::Domain("n = 3 is only supported by verify --suite h3".into()));
        }
        Ok(Resolved {
            n,
            r_max: m.r_max.unwrap_or(r_max),
            n_r: m.n_r.unwrap_or(n_r),
            n_theta: m.n_theta.unwrap_or(n_theta),
            dt: e.dt.unwrap_or(1e-3),
            t_final: e.t_final.unwrap_or(t_final),
            scheme: e.scheme.unwrap_or_default(),
            tol: e.tol.unwrap_or(crate::elliptic::DEFAULT_TOL),
            windows: FitWindows {
                small: e.small_window.map(|w| (w[0], w[1])).unwrap_or(d.small),
                tail: e.tail_window.map(|w| (w[0], w[1])).unwrap_or(d.tail),
            },
        })
    }
}

/// "p,q" with q possibly "inf".
pub fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let err = || Error::Format(format!("pair {s:?} is not of the form \"p,q\""));
    let (a, b) = s.split_once(',').ok_or_else(err)?;
    let p = parse_exponent(a.trim()).ok_or_else(err)?;
    let q = parse_exponent(b.trim()).ok_or_else(err)?;
    if !(p >= 1.0 && q >= p && p.is_finite()) {
        return Err(Error::Domain(format!("pair {s:?} needs 1 <= p <= q, p finite")));
    }
    if ![1.0, 2.0, 4.0, f64::INFINITY].contains(&q) {
        return Err(Error::Domain(format!("pair {s:?}: q must be 1, 2, 4 or inf")));
    }
    Ok((p, q))
}

fn parse_exponent(s: &str) -> Option<f64> {
    match s {
        "inf" | "Inf" | "infinity" => Some(f64::INFINITY),
        _ => s.parse::<f64>().ok().filter(|x| x.is_finite()),
    }
}
