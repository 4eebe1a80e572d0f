use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BASE: &str = r#"
seed = 4

[mesh]
L = 1.0
n_el = 4

[kernel]
modes = [[0.5, 1.0]]
n_nodes = 8

[law.damping]
kind = "affine"
m0 = 1.0
m1 = 0.5

[law.force]
kind = "hooke"
lambda = 1.0

[sim]
dt = 0.01
T = 4.0
"#;

struct Run {
    out: PathBuf,
    output: Output,
    _tmp: tempfile::TempDir,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().unwrap()
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&std::fs::read_to_string(self.out.join(name)).unwrap()).unwrap()
    }

    fn text(&self, name: &str) -> String {
        std::fs::read_to_string(self.out.join(name)).unwrap()
    }
}

fn viscobeam(cmd: &str, config: &str, extra: &str) -> Run {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, format!("{config}\n{extra}")).unwrap();
    let out = tmp.path().join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_viscobeam"))
        .args([cmd, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    Run { out, output, _tmp: tmp }
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn heavy_kernel_fails_validation_with_code_2() {
    let r = viscobeam("validate", &BASE.replace("[[0.5, 1.0]]", "[[2.0, 1.0]]"), "");
    assert_eq!(r.code(), 2);
    let d = r.json("diagnostic.json");
    assert_eq!(d["kind"], "assumption");
    assert_eq!(d["exit_code"], 2);
    assert!(d["message"].as_str().unwrap().contains("κ ≤ 0"));
    assert_eq!(r.json("validation.json")["passed"], false);
}

#[test]
fn validate_reports_constants() {
    let r = viscobeam("validate", BASE, "");
    assert_eq!(r.code(), 0);
    let v = r.json("validation.json");
    assert_eq!(v["kernel"]["kappa"], 0.5);
    assert!(v["constants"]["lambda1"].as_f64().unwrap() > 0.3);
    assert!(!r.out.join("diagnostic.json").exists());
}

#[test]
fn zero_data_gives_zero_energy() {
    let r = viscobeam("simulate", BASE, "[initial]\nkind = \"zero\"\n");
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.output.stderr));
    let csv = r.text("energy.csv");
    assert_eq!(csv.lines().next().unwrap(), "t,norm_H2,E,Etilde,Edelta,phi1,phi2,D_mem,D_bnd");
    let e = column(&csv, "E");
    assert_eq!(e.len(), 401);
    assert!(e.iter().all(|&x| x == 0.0));
    let s = r.json("summary.json");
    assert!(s["decay"].is_null());
    assert!(s["decay_note"].is_string());
}

#[test]
fn summary_carries_the_documented_fields() {
    let r = viscobeam("simulate", BASE, "[initial]\nkind = \"random\"\nnorm = 2.0\n");
    assert_eq!(r.code(), 0);
    let s = r.json("summary.json");
    for key in ["kappa", "rho", "C_f", "t_B", "delta", "decay", "bands", "absorbing"] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    assert!(s["decay"]["omega"].as_f64().unwrap() > 0.0);
    assert!(s["decay"]["r2"].as_f64().is_some());
    assert_eq!(s["delta"]["admissible"], true);
    assert_eq!(s["bands"]["coercivity_violations"], 0);
    let csv = r.text("energy.csv");
    let norm = column(&csv, "norm_H2");
    assert!((norm[0] - 4.0).abs() < 1e-12);
    assert!(r.out.join("energy.gp").exists());
    assert!(r.out.join("config.toml").exists());
}

#[test]
fn pair_on_hooke_passes() {
    let r = viscobeam("pair", BASE, "[initial]\nkind = \"random\"\nnorm = 1.0\n");
    assert_eq!(r.code(), 0);
    let p = r.json("pair.json");
    assert_eq!(p["pass"], true);
    assert!(p["lipschitz_c"].as_f64().is_some());
    assert!(r.text("pair.csv").starts_with("t,lhs,rhs,margin\n"));
}

#[test]
fn stationary_finds_the_origin() {
    let r = viscobeam("stationary", BASE, "[initial]\nkind = \"random\"\nnorm = 1.0\n");
    assert_eq!(r.code(), 0);
    let s = r.json("stationary.json");
    assert_eq!(s["set"]["consistent"], true);
    assert_eq!(s["set"]["solutions"].as_array().unwrap().len(), 1);
    assert!(s["terminal_distance"].as_f64().unwrap() < 0.1);
}

#[test]
fn probe_needs_the_hooke_law() {
    let power = BASE.replace("kind = \"hooke\"\nlambda = 1.0", "kind = \"power\"\nk = 1.0\np = 2.0\nc = 0.5");
    let r = viscobeam("probe", &power, "[initial]\nkind = \"random\"\nnorm = 1.0\n");
    assert_eq!(r.code(), 2);
    let r = viscobeam("probe", BASE, "[initial]\nkind = \"random\"\nnorm = 1.0\n");
    assert_eq!(r.code(), 0);
    assert!(r.json("probe.json")["gamma"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_writes_one_directory_per_run() {
    let r = viscobeam("sweep", BASE, "[initial]\nkind = \"random\"\nnorm = 1.0\n[sweep]\nnorms = [0.5, 2.0]\nm0 = [1.0, 2.0]\n");
    assert_eq!(r.code(), 0);
    let rows = r.json("sweep.json");
    assert_eq!(rows.as_array().unwrap().len(), 4);
    for i in 0..4 {
        assert!(r.out.join(format!("run_{i:03}/energy.csv")).exists());
    }
    assert_eq!(rows[1]["norm"], 2.0);
    assert_eq!(rows[2]["m0"], 2.0);
}

#[test]
fn sweeping_norms_needs_random_data() {
    let r = viscobeam("sweep", BASE, "[sweep]\nnorms = [1.0]\n");
    assert_eq!(r.code(), 1);
    assert_eq!(r.json("diagnostic.json")["kind"], "config");
}

#[test]
fn newton_breakdown_is_a_solver_failure() {
    let cfg = BASE.replace("T = 4.0", "T = 1.0\nnewton_tol = 1e-300\nnewton_max_iter = 1");
    let r = viscobeam("simulate", &cfg, "[initial]\nkind = \"random\"\nnorm = 50.0\n");
    assert_eq!(r.code(), 3);
    let d = r.json("diagnostic.json");
    assert_eq!(d["kind"], "step-failure");
    assert_eq!(d["step"], 1);
}

#[test]
fn configuration_errors_exit_with_1() {
    let r = viscobeam("simulate", &BASE.replace("n_el = 4", "n_el = 4\nwidth = 1"), "");
    assert_eq!(r.code(), 1);
    assert_eq!(r.json("diagnostic.json")["kind"], "parse");
    let r = viscobeam("simulate", &BASE.replace("dt = 0.01", "dt = -0.01"), "");
    assert_eq!(r.code(), 1);
    assert_eq!(r.json("diagnostic.json")["kind"], "config");
}

#[test]
fn missing_config_and_bad_arguments_exit_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_viscobeam"))
        .args(["simulate", "--config", "/nonexistent/run.toml", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(out.join("diagnostic.json").exists());
    let status = Command::new(env!("CARGO_BIN_EXE_viscobeam")).arg("simulate").output().unwrap();
    assert_eq!(status.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, BASE).unwrap();
    let blocker: &Path = &tmp.path().join("file");
    std::fs::write(blocker, "x").unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_viscobeam"))
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(blocker.join("sub"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn success_clears_a_stale_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    let out = tmp.path().join("out");
    let run = |text: &str| {
        std::fs::write(&cfg, text).unwrap();
        Command::new(env!("CARGO_BIN_EXE_viscobeam"))
            .args(["validate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(run(&BASE.replace("m0 = 1.0", "m0 = 0.0")), Some(2));
    assert!(out.join("diagnostic.json").exists());
    assert_eq!(run(BASE), Some(0));
    assert!(!out.join("diagnostic.json").exists());
}

#[test]
fn bad_worker_override_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, format!("{BASE}\n[initial]\nkind = \"random\"\nnorm = 1.0\n[sweep]\nseeds = [1, 2]\n")).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_viscobeam"))
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .env("VISCOBEAM_WORKERS", "zero")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
