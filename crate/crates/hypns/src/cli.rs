//! Batch entry point: parse a config, run one campaign, write artifacts.
//!
//! Exit codes: 0 all asserted invariants hold, 1 campaign failure, 2 config
//! or usage error, 3 solver failure.

use crate::config::{parse_pair, Campaign, ExperimentConfig, Resolved, Suite};
use crate::estimates::{self, BumpSpec, CampaignConfig, FitWindows, Flow, RateReport, VectorShape};
use crate::grid::Grid;
use crate::io::{self, Metadata, Snapshot};
use crate::mac::FaceField;
use crate::navier_stokes::{self as ns, PicardConfig};
use crate::nonunique::{self as nu, PotentialKind, TimeProfile};
use crate::semigroup::{self, EvolutionConfig, NormRow};
use crate::{Error, ManifoldModel, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hypns", version, about = "Heat flows, Stokes and Navier-Stokes on the hyperbolic plane")]
pub struct Cli {
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: output.dir from the config, else "out").
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for campaign-internal parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomized fields.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scalar or Bochner heat-flow decay campaign.
    Heat,
    /// Stokes decay campaign and Stokes/Bochner agreement on divergence-free data.
    Stokes,
    /// Navier-Stokes IMEX run, energy and vorticity ledgers, Picard iteration.
    Ns,
    /// Refinement studies and pointwise inequalities.
    Verify(VerifyArgs),
    /// Harmonic-potential solution families and pressure selection.
    Nonunique(NonuniqueArgs),
    /// Decay fit of a CSV time series.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// identities | kato | pointwise | h3 | all
    #[arg(long)]
    pub suite: Option<Suite>,
}

#[derive(Debug, Args)]
pub struct NonuniqueArgs {
    /// Comma-separated time profiles, e.g. exp2,const1.
    #[arg(long, value_delimiter = ',')]
    pub profiles: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV file with a time column.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long)]
    pub time_column: Option<String>,
}

impl Command {
    fn campaign(&self) -> Campaign {
        match self {
            Command::Heat => Campaign::Heat,
            Command::Stokes => Campaign::Stokes,
            Command::Ns => Campaign::Ns,
            Command::Verify(_) => Campaign::Verify,
            Command::Nonunique(_) => Campaign::Nonunique,
            Command::Fit(_) => Campaign::Fit,
        }
    }
}

/// Result of a campaign: pass flag and human-readable lines.
#[derive(Debug, Default)]
pub struct Outcome {
    pub pass: bool,
    pub lines: Vec<String>,
}

impl Outcome {
    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {line}", if ok { "PASS" } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.lines.push(format!("INFO {line}"));
    }
}

/// Artifact writer rooted at the output directory.
struct Out<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl Out<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, v: &T) -> Result<()> {
        let p = self.path(name);
        io::write_json(&p, v)
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let p = self.path(name);
        io::write_csv(&p, rows)
    }

    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let p = self.path(name);
        io::write_table(&p, header, rows)
    }

    fn snapshot(&mut self, stem: &str, s: &Snapshot) -> Result<()> {
        let b = self.path(&format!("{stem}.bin"));
        let c = self.path(&format!("{stem}.csv"));
        s.write(&b, Some(&c))
    }
}

const USAGE: &str = "usage: hypns <heat|stokes|ns|verify|nonunique|fit> [--config PATH] [--out DIR] [--threads N] [--seed U64]\n       hypns --help for details";

/// Parse arguments, run, and return the process exit code.
pub fn main_with(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    run(&cli)
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => ExperimentConfig::parse(&std::fs::read_to_string(p)?),
    }
}

pub fn run(cli: &Cli) -> i32 {
    let campaign = cli.command.campaign();
    let mut cfg = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}\n{USAGE}");
            return EXIT_USAGE;
        }
    };
    if let Some(c) = cfg.campaign {
        if c != campaign {
            eprintln!("config error: config is for campaign {:?}, subcommand is {:?}\n{USAGE}", c.name(), campaign.name());
            return EXIT_USAGE;
        }
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    match &cli.command {
        Command::Verify(a) => {
            if let Some(s) = a.suite {
                cfg.verify.suite = s;
            }
        }
        Command::Nonunique(a) => {
            if let Some(p) = &a.profiles {
                cfg.nonunique.profiles = p.clone();
            }
        }
        Command::Fit(a) => {
            if let Some(i) = &a.input {
                cfg.fit.input = Some(i.clone());
            }
            if let Some(c) = &a.column {
                cfg.fit.column = c.clone();
            }
            if let Some(c) = &a.time_column {
                cfg.fit.time_column = c.clone();
            }
        }
        _ => {}
    }
    let resolved = match cfg.validate().and_then(|_| cfg.resolve(campaign)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e}\n{USAGE}");
            return EXIT_USAGE;
        }
    };
    if let Err(e) = preflight(campaign, &cfg, &resolved) {
        eprintln!("config error: {e}\n{USAGE}");
        return EXIT_USAGE;
    }
    if campaign == Campaign::Fit && cfg.fit.input.is_none() {
        eprintln!("config error: fit needs an input CSV (--input or fit.input)\n{USAGE}");
        return EXIT_USAGE;
    }
    let threads = cfg.threads.unwrap_or(1);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        log::debug!("thread pool already initialized: {e}");
    }
    let dir = cli.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Out { dir: &dir, names: Vec::new() };
    let mut meta = Metadata::now(campaign.name(), cfg.seed, threads);
    let res = run_campaign(campaign, &cfg, &resolved, &mut out);
    let code = match res {
        Ok(o) => {
            for l in &o.lines {
                println!("{l}");
            }
            let summary = json!({ "campaign": campaign.name(), "pass": o.pass, "lines": o.lines });
            if let Err(e) = out.json("summary.json", &summary) {
                eprintln!("error: {e}");
                return EXIT_SOLVER;
            }
            println!("{} {}", if o.pass { "OK" } else { "FAILED" }, campaign.name());
            if o.pass {
                EXIT_OK
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Fit(_) => EXIT_FAIL,
                Error::Domain(_) | Error::Format(_) if campaign == Campaign::Fit => EXIT_USAGE,
                _ => EXIT_SOLVER,
            }
        }
    };
    meta.exit_code = code;
    meta.artifacts = out.names.clone();
    meta.artifacts.sort();
    meta.artifacts.dedup();
    if let Err(e) = io::write_json(&dir.join("metadata.json"), &meta) {
        eprintln!("error: {e}");
    }
    code
}

/// Data checks that need the grid but no solve.
fn preflight(c: Campaign, cfg: &ExperimentConfig, r: &Resolved) -> Result<()> {
    let (profile, widths) = match c {
        Campaign::Heat => (cfg.heat.profile, cfg.heat.widths.clone().unwrap_or_else(|| default_widths(cfg.heat.flow))),
        Campaign::Stokes => (cfg.stokes.profile, cfg.stokes.widths.clone().unwrap_or_else(|| default_widths(Flow::Stokes))),
        _ => return Ok(()),
    };
    let grid = campaign_config(r)?.grid;
    BumpSpec::ladder(profile, &grid, &widths).validate_on(&grid)
}

fn run_campaign(c: Campaign, cfg: &ExperimentConfig, r: &Resolved, out: &mut Out) -> Result<Outcome> {
    match c {
        Campaign::Heat => heat(cfg, r, out),
        Campaign::Stokes => stokes(cfg, r, out),
        Campaign::Ns => navier_stokes(cfg, r, out),
        Campaign::Verify => verify(cfg, r, out),
        Campaign::Nonunique => nonunique(cfg, r, out),
        Campaign::Fit => fit(cfg, r, out),
    }
}

fn grid_of(r: &Resolved) -> Result<Arc<Grid>> {
    Grid::new(r.r_max, r.n_r, r.n_theta)
}

fn campaign_config(r: &Resolved) -> Result<CampaignConfig> {
    let mut c = CampaignConfig::new(grid_of(r)?, r.dt, r.t_final);
    c.scheme = r.scheme;
    c.tol = r.tol;
    c.windows = r.windows;
    Ok(c)
}

/// Default width ladders (units of h_r) per flow.
pub fn default_widths(flow: Flow) -> Vec<f64> {
    match flow {
        Flow::Scalar => vec![1.4, 2.0, 3.0, 4.5, 7.0, 10.0, 15.0, 22.0, 30.0],
        _ => vec![2.0, 3.0, 4.5, 7.0, 10.0, 15.0, 22.0, 30.0],
    }
}

fn exponent_tag(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x}")
    }
}

fn report_line(r: &RateReport) -> String {
    format!(
        "{:?} {}(p,q)=({},{}) power {:.3} vs {:.3} rate {:.3} >= {:.3}",
        r.flow,
        if r.gradient { "grad " } else { "" },
        exponent_tag(r.p),
        exponent_tag(r.q),
        r.measured_power,
        r.predicted_power,
        r.measured_rate,
        r.predicted_rate * (1.0 - estimates::RATE_SLACK)
    )
}

fn write_family(out: &mut Out, tag: &str, ledgers: &[Vec<NormRow>]) -> Result<()> {
    for (k, l) in ledgers.iter().enumerate() {
        out.csv(&format!("trajectory_{tag}_w{k:02}.csv"), l)?;
    }
    Ok(())
}

fn rate_reports(
    flow: Flow,
    pairs: &[(f64, f64)],
    model: &ManifoldModel,
    data: &BumpSpec,
    cc: &CampaignConfig,
    ledgers: &[Vec<NormRow>],
    out: &mut Out,
) -> Result<Vec<RateReport>> {
    let mut reps = Vec::new();
    for &(p, q) in pairs {
        let series = estimates::envelope_series(flow, p, q, data, cc, ledgers)?;
        let rows: Vec<Vec<f64>> = series.iter().map(|&(t, v)| vec![t, v]).collect();
        out.table(&format!("envelope_{}_{}_{}.csv", flow_tag(flow), exponent_tag(p), exponent_tag(q)), &["time", "ratio"], &rows)?;
        reps.push(estimates::dispersive_report(flow, p, q, model, data, cc, ledgers)?);
    }
    Ok(reps)
}

fn flow_tag(f: Flow) -> &'static str {
    match f {
        Flow::Scalar => "scalar",
        Flow::Bochner => "bochner",
        Flow::Stokes => "stokes",
    }
}

fn finish_reports(o: &mut Outcome, out: &mut Out, reps: &[RateReport]) -> Result<()> {
    for r in reps {
        o.check(r.pass, report_line(r));
    }
    out.json("rate_reports.json", reps)?;
    out.csv("rate_summary.csv", reps)
}

fn heat(cfg: &ExperimentConfig, r: &Resolved, out: &mut Out) -> Result<Outcome> {
    let h = &cfg.heat;
    let model = ManifoldModel::hyperbolic(2)?;
    let cc = campaign_config(r)?;
    let widths = h.widths.clone().unwrap_or_else(|| default_widths(h.flow));
    let data = BumpSpec::ladder(h.profile, &cc.grid, &widths).with_shape(h.shape.unwrap_or(VectorShape::Mixed));
    let ledgers = estimates::run_family(h.flow, &model, &data, &cc)?;
    write_family(out, flow_tag(h.flow), &ledgers)?;
    let pairs = h.pairs.iter().map(|s| parse_pair(s)).collect::<Result<Vec<_>>>()?;
    let mut reps = rate_reports(h.flow, &pairs, &model, &data, &cc, &ledgers, out)?;
    if h.flow == Flow::Scalar {
        for &p in &h.lp {
            reps.push(estimates::lp_decay_report(p, &model, &data, &cc, &ledgers)?);
        }
    }
    for &p in &h.smoothing {
        reps.push(estimates::smoothing_campaign(h.flow, p, &model, &data, &cc)?);
    }
    let mut o = Outcome { pass: true, ..Default::default() };
    finish_reports(&mut o, out, &reps)?;
    if h.snapshot {
        let w = data.widths[0];
        let e = EvolutionConfig::new(r.dt, r.t_final).with_scheme(r.scheme);
        let snap = match h.flow {
            Flow::Scalar => {
                let f0 = cc.grid.sample(|rr, _| data.scalar(w, rr));
                Snapshot::from_scalar(semigroup::evolve_scalar_heat(&f0, model.c0, &e)?.last())
            }
            _ => {
                let u0 = FaceField::sample_frame(&cc.grid, |rr, _| data.frame(w, rr));
                Snapshot::from_vector(&semigroup::evolve_bochner_heat_faces(&u0, &model, &e)?.1.to_nodes())
            }
        };
        out.snapshot("field_final", &snap)?;
    }
    Ok(o)
}

fn stokes(cfg: &ExperimentConfig, r: &Resolved, out: &mut Out) -> Result<Outcome> {
    let s = &cfg.stokes;
    let model = ManifoldModel::hyperbolic(2)?;
    let cc = campaign_config(r)?;
    let widths = s.widths.clone().unwrap_or_else(|| default_widths(Flow::Stokes));
    let data = BumpSpec::ladder(s.profile, &cc.grid, &widths).with_shape(VectorShape::Swirl);
    let mut o = Outcome { pass: true, ..Default::default() };
    let pairs = s.pairs.iter().map(|p| parse_pair(p)).collect::<Result<Vec<_>>>()?;
    if !pairs.is_empty() {
        let ledgers = estimates::run_family(Flow::Stokes, &model, &data, &cc)?;
        write_family(out, "stokes", &ledgers)?;
        let reps = rate_reports(Flow::Stokes, &pairs, &model, &data, &cc, &ledgers, out)?;
        finish_reports(&mut o, out, &reps)?;
    }
    if s.compare {
        let rep = stokes_bochner_agreement(&cc.grid, &model, r.dt, s.compare_t_final, r.tol)?;
        out.table("stokes_vs_bochner.csv", &["time", "relative_difference"], &rep.rows)?;
        o.check(rep.max_relative <= 10.0 * r.tol, format!("Stokes = Bochner on divergence-free data: max rel diff {:.3e} <= {:.1e}", rep.max_relative, 10.0 * r.tol));
    }
    Ok(o)
}

pub struct Agreement {
    pub max_relative: f64,
    pub rows: Vec<Vec<f64>>,
}

/// Stokes and Bochner flows from the same projected ring data.
pub fn stokes_bochner_agreement(g: &Arc<Grid>, model: &ManifoldModel, dt: f64, t_final: f64, tol: f64) -> Result<Agreement> {
    let u0 = ns::ring_data(g, 1.0, tol)?;
    let mut e = EvolutionConfig::new(dt, t_final).every((t_final / 10.0).max(dt));
    e.store_fields = true;
    e.tol = tol;
    let (a, _) = semigroup::evolve_stokes_faces(&u0, model, &e)?;
    let (b, _) = semigroup::evolve_bochner_heat_faces(&u0, model, &e)?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for ((t, x), (_, y)) in a.snapshots.iter().zip(&b.snapshots) {
        let ny = crate::grid::lp_norm(y, 2.0)?;
        let d = crate::grid::lp_norm(&x.axpy(-1.0, y), 2.0)? / ny.max(f64::MIN_POSITIVE);
        worst = worst.max(d);
        rows.push(vec![*t, d]);
    }
    Ok(Agreement { max_relative: worst, rows })
}

fn navier_stokes(cfg: &ExperimentConfig, r: &Resolved, out: &mut Out) -> Result<Outcome> {
    let s = &cfg.ns;
    let model = ManifoldModel::hyperbolic(2)?;
    let g = grid_of(r)?;
    let u0 = ns::ring_data(&g, s.amplitude, r.tol)?;
    let mut e = EvolutionConfig::new(r.dt, r.t_final).every((r.t_final / 50.0).max(r.dt));
    e.tol = r.tol;
    let run = ns::imex_solve(&u0, &model, &e)?;
    out.csv("trajectory.csv", &run.trajectory.ledger)?;
    out.csv("energy_ledger.csv", &run.energy.rows)?;
    out.table("vorticity.csv", &["time", "vorticity_L2"], &run.vorticity.iter().map(|&(t, v)| vec![t, v]).collect::<Vec<_>>())?;
    out.snapshot("velocity_final", &Snapshot::from_vector(&run.last.to_nodes()))?;
    let mut o = Outcome { pass: true, ..Default::default() };
    let er = run.energy.max_relative_residual();
    o.check(er <= s.energy_slack, format!("energy equality: max relative residual {er:.3e} <= {:.2e}", s.energy_slack));
    let vmono = vorticity_monotone(&run.vorticity, s.vorticity_slack);
    o.check(vmono.0, format!("vorticity L2 nonincreasing within {:.0}%: worst step ratio {:.6}", 100.0 * s.vorticity_slack, vmono.1));
    o.check(run.max_divergence <= 1e-8, format!("discrete divergence {:.3e} <= 1e-8", run.max_divergence));
    o.note(format!("max CFL number {:.3}", run.max_cfl));
    if s.picard {
        let pc = PicardConfig { solver_tol: r.tol, ..PicardConfig::new(r.dt, s.picard_t_final, &model) };
        let (traj, st) = ns::picard_solve(&u0, &model, &pc)?;
        out.json("picard.json", &st)?;
        let contracting = st.ratios.iter().filter(|x| **x < 0.9).count();
        o.check(st.converged && contracting >= 5, format!("Picard: {} iterates, {} ratios < 0.9, max ratio {:.3}", st.differences.len(), contracting, st.max_ratio()));
        let mut e2 = EvolutionConfig::new(r.dt, s.picard_t_final);
        e2.tol = r.tol;
        let imex = ns::imex_solve(&u0, &model, &e2)?;
        let d = ns::relative_l2(traj.last().expect("picard trajectory"), &imex.last);
        o.check(d <= 0.01, format!("Picard vs IMEX at t = {}: relative L2 {d:.3e} <= 1e-2", s.picard_t_final));
    }
    Ok(o)
}

/// (ok, worst ratio v_{k+1}/v_k).
pub fn vorticity_monotone(v: &[(f64, f64)], slack: f64) -> (bool, f64) {
    let worst = v.windows(2).filter(|w| w[0].1 > 0.0).map(|w| w[1].1 / w[0].1).fold(0.0, f64::max);
    (worst <= 1.0 + slack, worst)
}

fn verify(cfg: &ExperimentConfig, r: &Resolved, out: &mut Out) -> Result<Outcome> {
    let v = &cfg.verify;
    let mut o = Outcome { pass: true, ..Default::default() };
    let all = v.suite == Suite::All;
    if all || v.suite == Suite::Identities {
        verify_identities(cfg, r, out, &mut o)?;
    }
    if all || v.suite == Suite::Kato {
        verify_kato(cfg, r, out, &mut o)?;
    }
    if all || v.suite == Suite::Pointwise {
        verify_pointwise(r, out, &mut o)?;
    }
    if all || v.suite == Suite::H3 {
        let err = semigroup::h3_oracle_error(r.r_max, 4 * r.n_r, 0.1, 0.4, r.dt)?;
        out.json("h3_oracle.json", &json!({ "r_max": r.r_max, "n": 4 * r.n_r, "t0": 0.1, "t": 0.5, "relative_l2": err }))?;
        o.check(err <= 0.02, format!("H^3 radial solver vs kernel at t = 0.5: relative L2 {err:.3e} <= 2e-2"));
    }
    Ok(o)
}

fn levels(cfg: &ExperimentConfig, r: &Resolved) -> Result<Vec<Arc<Grid>>> {
    cfg.verify.levels.iter().map(|&[a, b]| Grid::new(r.r_max, a, b)).collect()
}

fn verify_identities(cfg: &ExperimentConfig, r: &Resolved, out: &mut Out, o: &mut Outcome) -> Result<()> {
    let model = ManifoldModel::hyperbolic(2)?;
    let fields = estimates::manufactured_fields();
    let mut rows = Vec::new();
    for g in levels(cfg, r)? {
        rows.push(estimates::identity_residuals(&g, &model, &fields));
    }
    out.csv("identity_residuals.csv", &rows.concat())?;
    let mut order_rows = Vec::new();
    for (k, f) in fields.iter().enumerate() {
        let col = |pick: fn(&estimates::IdentityRow) -> f64| estimates::observed_orders(&rows.iter().map(|lv| pick(&lv[k])).collect::<Vec<_>>());
        let (b, w, m, wd) = (col(|x| x.bochner), col(|x| x.weitzenbock), col(|x| x.metric), col(|x| x.weitzenbock_disk));
        for i in 0..b.len() {
            order_rows.push(OrderRow { field: f.name.into(), level: i + 1, bochner: b[i], weitzenbock: w[i], metric: m[i], weitzenbock_disk: wd[i] });
        }
        let min = b.iter().chain(&w).chain(&m).cloned().fold(f64::INFINITY, f64::min);
        o.check(min >= cfg.verify.min_order, format!("identities {}: min observed order {min:.3} >= {}", f.name, cfg.verify.min_order));
    }
    out.csv("identity_orders.csv", &order_rows)
}

#[derive(Debug, Serialize)]
struct OrderRow {
    field: String,
    level: usize,
    bochner: f64,
    weitzenbock: f64,
    metric: f64,
    weitzenbock_disk: f64,
}

fn verify_kato(cfg: &ExperimentConfig, r: &Resolved, out: &mut Out, o: &mut Outcome) -> Result<()> {
    let grids = levels(cfg, r)?;
    let reps: Vec<_> = grids.iter().take(2).map(|g| estimates::kato_study(g, cfg.verify.kato_fields, cfg.seed)).collect();
    out.json("kato.json", &reps)?;
    let (c0, c1) = (reps[0].constant(), reps[1].constant());
    o.check(c1 <= c0.max(1e-12) * 1.1, format!("Kato defect >= -C h: C = {c0:.3e} at h = {:.4}, {c1:.3e} at h = {:.4}", reps[0].h, reps[1].h));
    Ok(())
}

/// Pointwise data: the narrowest Bochner-ladder member at 4 h.
pub fn pointwise_data(g: &Arc<Grid>) -> FaceField {
    let data = BumpSpec::ladder(estimates::Profile::Gaussian, g, &[4.0]);
    FaceField::sample_frame(g, |rr, _| data.frame(data.widths[0], rr))
}

fn verify_pointwise(r: &Resolved, out: &mut Out, o: &mut Outcome) -> Result<()> {
    let model = ManifoldModel::hyperbolic(2)?;
    let mut rows = Vec::new();
    for (n_r, n_t, dt) in [(r.n_r, r.n_theta, r.dt), (2 * r.n_r, 2 * r.n_theta, r.dt / 4.0)] {
        let g = Grid::new(r.r_max, n_r, n_t)?;
        let u0 = pointwise_data(&g);
        let e = EvolutionConfig::new(dt, 1.0).every(0.05);
        let cmp = estimates::comparison_check(&u0, &model, &e)?;
        let times: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();
        let bak = estimates::bakry_check(&u0, &model, dt, &times)?;
        let tol_disc = (g.h_r * g.h_r + dt) * cmp.lhs_scale;
        o.check(cmp.max_violation <= tol_disc, format!("comparison at n_r = {n_r}: violation {:.3e} <= (h^2+dt)|u| = {tol_disc:.3e}", cmp.max_violation));
        o.check(bak.max_violation <= 1e-2, format!("Bakry at n_r = {n_r}: violation {:.3e} <= 1e-2", bak.max_violation));
        rows.push(json!({ "n_r": n_r, "n_theta": n_t, "dt": dt, "comparison": cmp, "bakry": bak }));
    }
    out.json("pointwise.json", &rows)
}

#[derive(Debug, Serialize)]
struct ResidualRow {
    profile: String,
    time: f64,
    consistent: f64,
    stated: f64,
}

fn nonunique(cfg: &ExperimentConfig, r: &Resolved, out: &mut Out) -> Result<Outcome> {
    let s = &cfg.nonunique;
    let model = ManifoldModel::hyperbolic(2)?;
    let g = grid_of(r)?;
    let pot = nu::build_harmonic_potential(PotentialKind::FirstMode, &model, &g)?;
    let mut o = Outcome { pass: true, ..Default::default() };
    o.note(format!("harmonic potential: ||dPhi||_2 = {:.6}, harmonic residual {:.2e}", pot.dphi_l2, pot.harmonic_residual));
    let profiles = s.profiles.iter().map(|n| Ok((n.clone(), TimeProfile::named(n)?))).collect::<Result<Vec<_>>>()?;
    let mut res_rows = Vec::new();
    let mut summary = Vec::new();
    let ladder: Vec<f64> = s.ladder.iter().cloned().filter(|&x| x <= g.r_max - 1.0).collect();
    if ladder.len() < 2 {
        return Err(Error::Domain(format!("nonunique.ladder needs two radii <= R_max - 1 = {}", g.r_max - 1.0)));
    }
    for (name, p) in &profiles {
        let mut worst = 0.0f64;
        for t in [0.0, s.t_probe] {
            let c = nu::member_residual(&pot, p, t, &model, nu::khesin_pressure)?;
            let st = nu::member_residual(&pot, p, t, &model, nu::stated_pressure)?;
            worst = worst.max(c);
            res_rows.push(ResidualRow { profile: name.clone(), time: t, consistent: c, stated: st });
        }
        o.check(worst <= s.residual_tol, format!("{name}: member residual {worst:.3e} <= {:.1e}", s.residual_tol));
        let rows = nu::pressure_selection_scan(&pot, p, &ladder)?;
        out.csv(&format!("growth_{name}.csv"), &rows)?;
        let ratio = nu::growth_ratio(&rows);
        let energy = nu::energy_check(&pot, p, 1.0, r.dt, s.energy_slack);
        let class = if ratio >= nu::GROWTH_THRESHOLD {
            "grows"
        } else if ratio <= nu::SATURATION_THRESHOLD {
            "saturates"
        } else {
            "undecided"
        };
        o.note(format!("{name}: pressure ladder ratio {ratio:.3} ({class}), energy ratio {:.3} ({})", energy.worst_ratio, if energy.admissible { "admissible" } else { "not admissible" }));
        summary.push(json!({ "profile": name, "growth_ratio": ratio, "pressure": class, "energy": energy, "max_residual": worst }));
    }
    out.csv("residuals.csv", &res_rows)?;
    let mut witnesses = Vec::new();
    for i in 0..profiles.len() {
        for j in i + 1..profiles.len() {
            if let Ok(d) = nu::member_distance(&profiles[i].1, &profiles[j].1, s.t_probe) {
                witnesses.push(json!({ "a": profiles[i].0, "b": profiles[j].0, "distance": d, "diverge": d > 0.1 }));
                o.note(format!("{} vs {}: relative distance {d:.3} at t = {}", profiles[i].0, profiles[j].0, s.t_probe));
            }
        }
    }
    if profiles.len() >= 2 {
        let found = witnesses.iter().any(|w| w["diverge"] == json!(true));
        o.check(found, format!("non-uniqueness witness: two members from the same data diverge by > 10% at t = {}", s.t_probe));
    }
    if s.track {
        let sel = TimeProfile::named("expm2")?;
        let rows = track_selected(&pot, &model, &sel, r.dt, s.track_t_final, r.tol)?;
        let worst = rows.iter().map(|x| x[1]).fold(0.0, f64::max);
        out.table("tracking.csv", &["time", "relative_difference"], &rows)?;
        o.check(worst <= 0.02, format!("IMEX tracks the selected member e^(-2t) on [0, {}]: max rel diff {worst:.3e} <= 2e-2", s.track_t_final));
    }
    out.json("nonunique.json", &json!({ "profiles": summary, "witnesses": witnesses }))?;
    Ok(o)
}

/// IMEX from the potential's face field against f(t)·dΦ.
pub fn track_selected(pot: &nu::HarmonicPotential, model: &ManifoldModel, sel: &TimeProfile, dt: f64, t_final: f64, tol: f64) -> Result<Vec<Vec<f64>>> {
    let u0 = nu::khesin_faces(pot, sel, 0.0);
    let mut e = EvolutionConfig::new(dt, t_final).every((t_final / 10.0).max(dt));
    e.store_fields = true;
    e.tol = tol;
    let run = ns::imex_solve(&u0, model, &e)?;
    let mut rows = Vec::new();
    for (t, u) in &run.trajectory.snapshots {
        let exact = nu::khesin_faces(pot, sel, *t).to_nodes();
        let d = crate::grid::lp_norm(&u.axpy(-1.0, &exact), 2.0)? / crate::grid::lp_norm(&exact, 2.0)?.max(f64::MIN_POSITIVE);
        rows.push(vec![*t, d]);
    }
    Ok(rows)
}

fn fit(cfg: &ExperimentConfig, r: &Resolved, out: &mut Out) -> Result<Outcome> {
    let f = &cfg.fit;
    let input = f.input.as_ref().expect("checked by the caller");
    let series = io::read_series(input, &f.time_column, &f.column)?;
    let d = FitWindows::default_for(r.dt);
    let w = FitWindows { small: f.small.map(|x| (x[0], x[1])).unwrap_or(d.small), tail: f.tail.map(|x| (x[0], x[1])).unwrap_or(d.tail) };
    let fit = estimates::fit_decay(&series, &w)?;
    out.json("fit.json", &fit)?;
    let mut o = Outcome { pass: true, ..Default::default() };
    o.check(fit.quality_ok, format!("{}: small-time power {:.4}, tail rate {:.4}", f.column, fit.small_time_power, fit.large_time_rate));
    Ok(o)
}
