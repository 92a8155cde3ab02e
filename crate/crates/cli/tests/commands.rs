use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heom_core::bath::{write_modes, BathModes, BathSpec, Mode, ModeTable};
use serde_json::Value;

const TIME_SERIES_HEADER: &str = "t,sigma_x_lab,sigma_y_lab,sigma_z_lab,sigma_x_rot,sigma_y_rot,sigma_z_rot";

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    /// A scratch directory holding a small two-mode table for the reference s = 1 reservoir.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let modes = BathModes::new(vec![
            Mode { d_re: 0.004, d_im: -0.002, omega: 0.0, gamma: 1.5 },
            Mode { d_re: 0.002, d_im: -0.003, omega: 0.0, gamma: 4.0 },
        ])
        .unwrap();
        let table = ModeTable { spec: BathSpec::reference(1.0), modes, residual: 0.0 };
        fs::write(dir.path().join("modes.txt"), write_modes(&table)).unwrap();
        Self { dir }
    }

    fn path(&self, p: &str) -> PathBuf {
        self.dir.path().join(p)
    }

    fn run(&self, args: &[&str]) -> Output {
        self.run_env(args, &[])
    }

    fn run_env(&self, args: &[&str], env: &[(&str, &str)]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_heom"));
        cmd.current_dir(self.dir.path()).args(args).args(["--modes", "modes.txt"]).env("RUST_LOG", "warn").env_remove("HEOM_THREADS");
        for (k, v) in env {
            cmd.env(k, v);
        }
        cmd.output().unwrap()
    }

    fn ok(&self, args: &[&str]) {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }

    fn header(&self, file: &str) -> String {
        fs::read_to_string(self.path(file)).unwrap().lines().next().unwrap().to_string()
    }

    fn json(&self, file: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path(file)).unwrap()).unwrap()
    }
}

fn manifests(dir: &Path) -> usize {
    fs::read_dir(dir).unwrap().filter(|e| e.as_ref().unwrap().file_name() == "manifest.json").count()
}

#[test]
fn sequence_without_a_mode_table_asks_for_fit_bath() {
    let ws = Workspace::new();
    let out = Command::new(env!("CARGO_BIN_EXE_heom")).current_dir(ws.dir.path()).args(["sequence", "-o", "seq"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let record: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap();
    assert_eq!(record["kind"], "missing-input");
    assert!(record["message"].as_str().unwrap().contains("fit-bath"));
    assert_eq!(ws.json("seq/error.json")["exit_code"], 3);
    assert_eq!(manifests(&ws.path("seq")), 0);
}

#[test]
fn sequence_tables_have_fixed_columns() {
    let ws = Workspace::new();
    ws.ok(&["sequence", "--gate", "rx-pi", "--amplitude", "1", "--delta-t", "1", "-o", "seq"]);
    assert_eq!(ws.header("seq/trace.csv"), TIME_SERIES_HEADER);
    assert_eq!(ws.header("seq/fidelity.csv"), "d,t,fidelity,sim_a0,sim_x,sim_y,sim_z,iso_a0,iso_x,iso_y,iso_z");
    assert_eq!(fs::read_to_string(ws.path("seq/fidelity.csv")).unwrap().lines().count(), 7);
    assert_eq!(manifests(&ws.path("seq")), 1);

    let m = ws.json("seq/manifest.json");
    assert_eq!(m["command"], "sequence");
    assert_eq!(m["resolved"]["n_max"], 3);
    assert_eq!(m["resolved"]["k"], 2);
    let digest = m["resolved"]["modes_sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert_eq!(m["outputs"], serde_json::json!(["trace.csv", "fidelity.csv", "report.json"]));
}

#[test]
fn identical_runs_write_identical_bytes() {
    let ws = Workspace::new();
    ws.ok(&["sequence", "--prep", "ground", "-o", "a"]);
    ws.ok(&["sequence", "--prep", "ground", "-o", "b"]);
    for f in ["trace.csv", "fidelity.csv", "report.json"] {
        assert_eq!(fs::read(ws.path(&format!("a/{f}"))).unwrap(), fs::read(ws.path(&format!("b/{f}"))).unwrap(), "{f}");
    }
}

#[test]
fn heatmap_values_do_not_depend_on_the_thread_count() {
    let ws = Workspace::new();
    let args = ["heatmap", "--gate", "rx-half-pi", "--prep", "excited"];
    for (dir, threads) in [("one", "1"), ("three", "3")] {
        let out = ws.run_env(&[&args[..], &["-o", dir]].concat(), &[("HEOM_THREADS", threads)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(ws.path("one/heatmap.json")).unwrap(), fs::read(ws.path("three/heatmap.json")).unwrap());
    assert_eq!(ws.json("three/manifest.json")["resolved"]["threads"], 3);

    let doc = ws.json("one/heatmap.json");
    let cell = &doc["rx-half-pi"]["1"];
    let mut values = 0;
    for d in 1..=5 {
        let m = cell[format!("d{d}")].as_array().unwrap();
        assert_eq!(m.len(), 4);
        values += m.iter().map(|r| r.as_array().unwrap().len()).sum::<usize>();
    }
    assert_eq!(values, 80);
    assert!(cell["amplitude_violations"]["d5"].is_boolean());
    assert!(cell["idle_violations"]["d4"].is_boolean());
    assert_eq!(ws.header("one/heatmap_cells.csv"), "gate,prep,amplitude,delta_t,d,fidelity");
    assert_eq!(fs::read_to_string(ws.path("one/heatmap_cells.csv")).unwrap().lines().count(), 81);
}

#[test]
fn equilibrium_snapshots_are_reused_and_checked() {
    let ws = Workspace::new();
    let out = ws.run(&["sequence", "--prep", "equilibrium", "--snapshot-dir", "snaps", "-o", "seq"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("equilibrate"));

    ws.ok(&["equilibrate", "--t-end", "20", "--snapshot-dir", "snaps", "-o", "eq"]);
    assert_eq!(ws.header("eq/relaxation.csv"), TIME_SERIES_HEADER);
    let id = ws.json("eq/manifest.json")["resolved"]["snapshot"]["id"].as_str().unwrap().to_string();
    assert!(ws.path(&format!("snaps/eq-{id}.snap")).exists());
    let eq = ws.json("eq/equilibrium.json");
    let z = eq["rdo"][3].as_f64().unwrap();

    ws.ok(&["sequence", "--prep", "equilibrium", "--snapshot-dir", "snaps", "-o", "seq"]);
    assert_eq!(ws.json("seq/manifest.json")["resolved"]["snapshot"]["id"], id.as_str());
    let first = fs::read_to_string(ws.path("seq/fidelity.csv")).unwrap();
    let row: Vec<f64> = first.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[1], 0.0);
    assert_eq!(row[6], z);

    let snap = format!("snaps/eq-{id}.snap");
    let out = ws.run(&["sequence", "--prep", "equilibrium", "--n-max", "2", "--snapshot", &snap, "-o", "seq2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("snapshot-mismatch"));
}

#[test]
fn remaining_commands_write_their_tables() {
    let ws = Workspace::new();
    ws.ok(&["equilibrate", "--t-end", "10", "--snapshot-dir", "snaps", "-o", "eq"]);
    ws.ok(&["project", "--snapshot-dir", "snaps", "--gate", "rx-pi", "--amplitude", "1", "--delta-t", "1", "-o", "proj"]);
    assert_eq!(ws.header("proj/projection.csv"), "t,sigma_z_exact,sigma_z_projected,deviation");
    assert_eq!(ws.json("proj/report.json")["phases"].as_array().unwrap().len(), 5);

    ws.ok(&["periodicity", "--snapshot-dir", "snaps", "-o", "per"]);
    assert_eq!(ws.header("per/post_pulse.csv"), "delta_t,tau,sigma_z");
    assert_eq!(ws.json("per/report.json")["pairs"].as_array().unwrap().len(), 1);

    ws.ok(&["ramsey", "--ramsey-t-end", "20", "-o", "ram"]);
    assert_eq!(ws.header("ram/signal.csv"), "t,sigma_x_lab");
    assert_eq!(ws.header("ram/spectrum.csv"), "omega,amplitude");

    ws.ok(&["decoherence", "-o", "dec"]);
    assert_eq!(ws.header("dec/decoherence.csv"), "t,sigma_z_heom,sigma_z_analytic");

    ws.ok(&["sequence", "--lindblad", "--format", "json", "-o", "lin"]);
    let trace = ws.json("lin/trace.json");
    let keys: Vec<&str> = trace[0].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys.len(), 7);
    assert_eq!(ws.json("lin/manifest.json")["resolved"]["model"], "lindblad");
    assert!(ws.json("lin/manifest.json")["resolved"]["modes_sha256"].is_null());
}

#[test]
fn fit_bath_writes_a_loadable_mode_table() {
    let ws = Workspace::new();
    let out = Command::new(env!("CARGO_BIN_EXE_heom"))
        .current_dir(ws.dir.path())
        .args(["fit-bath", "--kappa", "0.01", "--modes", "fitted.txt", "-o", "fit"])
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = heom_core::bath::load_modes(ws.path("fitted.txt")).unwrap();
    assert_eq!(table.spec.kappa, 0.01);
    let fit = ws.json("fit/fit.json");
    assert_eq!(fit["k"].as_u64().unwrap() as usize, table.modes.len());
    assert!(fit["residual"].as_f64().unwrap() <= 1e-3);
    assert_eq!(ws.header("fit/correlation.csv"), "t,c_re,c_im,c_fit_re,c_fit_im");

    // The run's physics must match the table's.
    let out = Command::new(env!("CARGO_BIN_EXE_heom"))
        .current_dir(ws.dir.path())
        .args(["decoherence", "--modes", "fitted.txt", "-o", "dec"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
