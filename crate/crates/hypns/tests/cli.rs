use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hypns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypns")).args(args).env("RUST_LOG", "error").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_HEAT: &str = r#"
[manifold]
r_max = 12.0
n_r = 96
n_theta = 16
[evolution]
dt = 0.01
t_final = 3.0
small_window = [0.02, 0.1]
tail_window = [1.5, 3.0]
[heat]
pairs = ["2,2"]
lp = [2]
widths = [2, 3]
snapshot = true
"#;

#[test]
fn usage_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let empty = config(d.path(), "empty.toml", "");
    let o = hypns(&["heat", "--config", &empty]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("usage: hypns"));
    let unknown = config(d.path(), "u.toml", "[heat]\nflavour = 1\n");
    assert_eq!(code(&hypns(&["heat", "--config", &unknown])), 2);
    let range = config(d.path(), "r.toml", "[evolution]\ndt = -1\n");
    assert_eq!(code(&hypns(&["heat", "--config", &range])), 2);
    let other = config(d.path(), "o.toml", "campaign = \"ns\"\n");
    assert_eq!(code(&hypns(&["heat", "--config", &other])), 2);
    assert_eq!(code(&hypns(&["heat", "--config", "/nonexistent/x.toml"])), 2);
    let wide = config(d.path(), "w.toml", "[manifold]\nn_r = 96\nn_theta = 16\n");
    let o = hypns(&["heat", "--config", &wide, "--out", d.path().join("w").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bump reaches"));
    assert_eq!(code(&hypns(&[])), 2);
    assert_eq!(code(&hypns(&["bake"])), 2);
    assert_eq!(code(&hypns(&["fit"])), 2);
    assert_eq!(code(&hypns(&["--help"])), 0);
    assert_eq!(code(&hypns(&["--version"])), 0);
}

#[test]
fn heat_campaign_artifacts_are_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "h.toml", SMALL_HEAT);
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    let oa = hypns(&["heat", "--config", &cfg, "--out", a.to_str().unwrap(), "--threads", "1"]);
    let ob = hypns(&["heat", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "5"]);
    assert!([0, 1].contains(&code(&oa)), "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(code(&oa), code(&ob));
    for f in ["trajectory_scalar_w00.csv", "envelope_scalar_2_2.csv", "rate_summary.csv", "rate_reports.json", "summary.json", "field_final.bin", "field_final.csv"] {
        let x = fs::read(a.join(f)).unwrap_or_else(|_| panic!("missing {f}"));
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let traj = fs::read_to_string(a.join("trajectory_scalar_w00.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "time,L1,L2,L4,Linf,grad_L2,energy_integral");
    let reps: serde_json::Value = serde_json::from_slice(&fs::read(a.join("rate_reports.json")).unwrap()).unwrap();
    let first = &reps.as_array().unwrap()[0];
    for k in ["p", "q", "measured_power", "predicted_power", "measured_rate", "predicted_rate", "pass"] {
        assert!(first.get(k).is_some(), "missing {k}");
    }
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(a.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["campaign"], "heat");
    assert_eq!(meta["exit_code"], code(&oa));
    let snap = hypns::io::Snapshot::read(&a.join("field_final.bin")).unwrap();
    assert_eq!((snap.n_r, snap.n_theta, snap.components.len()), (96, 16, 1));
}

#[test]
fn fit_subcommand() {
    let d = tempfile::tempdir().unwrap();
    let t = d.path().join("t.csv");
    let mut s = String::from("time,L2\n");
    for k in 1..=300 {
        let x = k as f64 * 0.02;
        let v = if x < 1.0 { x.powf(-0.5) } else { (-1.25 * (x - 1.0)).exp() };
        s.push_str(&format!("{x},{v}\n"));
    }
    fs::write(&t, s).unwrap();
    let good = config(d.path(), "f.toml", &format!("[fit]\ninput = {:?}\nsmall = [0.02, 0.3]\ntail = [3.0, 6.0]\n", t.to_str().unwrap()));
    let out = d.path().join("o");
    assert_eq!(code(&hypns(&["fit", "--config", &good, "--out", out.to_str().unwrap()])), 0);
    let fit: serde_json::Value = serde_json::from_slice(&fs::read(out.join("fit.json")).unwrap()).unwrap();
    assert!((fit["large_time_rate"].as_f64().unwrap() - 1.25).abs() < 1e-9);
    assert!((fit["small_time_power"].as_f64().unwrap() + 0.5).abs() < 1e-9);
    // default windows leave too few points near t = 0: campaign failure
    let o = hypns(&["fit", "--input", t.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let o = hypns(&["fit", "--input", t.to_str().unwrap(), "--column", "L9", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_h3_and_small_ns() {
    let d = tempfile::tempdir().unwrap();
    let h3 = config(d.path(), "h3.toml", "[manifold]\nn = 3\nn_r = 384\n[verify]\nsuite = \"h3\"\n");
    let out = d.path().join("h3");
    let o = hypns(&["verify", "--config", &h3, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(out.join("h3_oracle.json").exists());
    let ns = config(
        d.path(),
        "ns.toml",
        "[manifold]\nn_r = 32\nn_theta = 16\n[evolution]\ndt = 0.005\nt_final = 0.2\n[ns]\namplitude = 1.0\npicard_t_final = 0.1\n",
    );
    let out = d.path().join("ns");
    let o = hypns(&["ns", "--config", &ns, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    for f in ["trajectory.csv", "energy_ledger.csv", "vorticity.csv", "picard.json", "velocity_final.bin"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
}

#[test]
fn small_nonunique_campaign() {
    let d = tempfile::tempdir().unwrap();
    let c = config(
        d.path(),
        "nu.toml",
        "[manifold]\nn_r = 192\nn_theta = 128\n[evolution]\ndt = 0.005\n[nonunique]\nprofiles = [\"exp2\", \"const1\", \"expm2\"]\ntrack_t_final = 0.1\n",
    );
    let out = d.path().join("nu");
    let o = hypns(&["nonunique", "--config", &c, "--out", out.to_str().unwrap()]);
    assert!([0, 1].contains(&code(&o)), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["residuals.csv", "growth_exp2.csv", "growth_expm2.csv", "nonunique.json", "tracking.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let j: serde_json::Value = serde_json::from_slice(&fs::read(out.join("nonunique.json")).unwrap()).unwrap();
    assert!(j.is_object());
}
