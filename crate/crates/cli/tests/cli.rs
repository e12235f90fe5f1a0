use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nlsurf::io::read_sigma_table_csv;

fn nlsurf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlsurf"))
        .args(args)
        .current_dir(dir)
        .env_remove("NONLOCAL_SURFACTANT_OUT")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const CELL: &str = r#"
[run]
seed = 5

[kernel]
family = "gaussian"
width = 1.0

[cell]
dim = 1
half_length = 9.0
resolution = 16.0
starts = 1
"#;

const LINE: &str = r#"
[grid]
dim = 1
extents = [2.0]
cells = [48]
boundary = ["clamped:-1,1"]
origin = [-1.0]

[kernel]
family = "gaussian"
width = 1.0

[energy]
epsilon = 0.25
mode = "extended"

[fields]
u = { source = "tanh" }
rho = { source = "random", low = 0.0, high = 1.0 }

[constraints]
mass = 0.5

[optimize]
max_iters = 300
"#;

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlsurf(&["selftest"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nlsurf(&["cell", "sigma", "--config", "nope.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(nlsurf(&["cell", "sigma"], dir.path()).status.code(), Some(2));
    assert_eq!(nlsurf(&["frobnicate"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("c.toml"), CELL).unwrap();
    assert_eq!(nlsurf(&["cell", "sigma", "--config", "c.toml", "--set", "novalue"], dir.path()).status.code(), Some(2));
}

#[test]
fn config_errors_exit_1_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), format!("{CELL}gama = 0.5\n")).unwrap();
    let o = nlsurf(&["cell", "sigma", "--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gama"), "{}", stderr(&o));

    fs::write(dir.path().join("d.toml"), CELL).unwrap();
    let o = nlsurf(&["cell", "sigma", "--config", "d.toml", "--set", "cell.half_length=2.0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cell"), "{}", stderr(&o));

    let o = nlsurf(&["energy", "--config", "d.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid"), "{}", stderr(&o));
}

#[test]
fn cell_table_has_one_row_per_direction_and_load() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), CELL).unwrap();
    let o = nlsurf(&["cell", "table", "--config", "c.toml", "--gammas", "0,0.5,1,2", "--out", "t"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("t/sigma_table.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "angle,gamma,sigma,valid,spread");
    assert_eq!(csv.lines().count() - 1, 4 * 2);
    let t = read_sigma_table_csv(&dir.path().join("t/sigma_table.csv"), 1).unwrap();
    assert_eq!(t.gammas, vec![0.0, 0.5, 1.0, 2.0]);
    assert!(t.entries.iter().flatten().all(|e| e.valid));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "cell table");
    assert!(manifest["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    assert_eq!(manifest["config"]["table"]["gammas"], serde_json::json!([0.0, 0.5, 1.0, 2.0]));
    assert_eq!(manifest["config"]["run"]["seed"], 5);

    // the stored config reproduces the table
    let o = nlsurf(&["cell", "table", "--config", "t/config.toml", "--out", "again"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(dir.path().join("again/sigma_table.csv")).unwrap(), csv.into_bytes());
}

#[test]
fn sharp_reads_a_stored_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        format!("{CELL}\n[[facet]]\nnormal = [1.0, 0.0]\narea = 1.0\ngamma = 0.25\n"),
    )
    .unwrap();
    let o = nlsurf(&["cell", "table", "--config", "c.toml", "--gammas", "0,0.5", "--out", "t"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = nlsurf(&["sharp", "--config", "c.toml", "--table", "t/sigma_table.csv", "--out", "s"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t = read_sigma_table_csv(&dir.path().join("t/sigma_table.csv"), 1).unwrap();
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s/sharp.json")).unwrap()).unwrap();
    let want = 0.5 * (t.entries[0][0].sigma + t.entries[0][1].sigma);
    assert!((s["energy"]["total"].as_f64().unwrap() - want).abs() < 1e-12);
}

#[test]
fn energy_minimize_and_gradcheck_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("l.toml"), LINE).unwrap();
    let o = nlsurf(&["energy", "--config", "l.toml", "--out", "e"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let e: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("e/energy.json")).unwrap()).unwrap();
    let parts = ["potential", "exchange", "surfactant"].map(|k| e["energy"][k].as_f64().unwrap());
    assert!((parts.iter().sum::<f64>() - e["energy"]["total"].as_f64().unwrap()).abs() < 1e-12);

    let o = nlsurf(&["minimize", "--config", "l.toml", "--out", "m"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = fs::read_to_string(dir.path().join("m/trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "iter,energy,grad_norm,step");
    let energies: Vec<f64> = trace.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(energies.windows(2).all(|w| w[1] <= w[0]));
    let u = nlsurf::io::read_field_binary(&dir.path().join("m/u.bin")).unwrap();
    assert!(u.values().iter().all(|v| (-1.0..=1.0).contains(v)));
    let rho = nlsurf::io::read_field_binary(&dir.path().join("m/rho.bin")).unwrap();
    assert!((rho.integral() - 0.5).abs() < 1e-10);

    let o = nlsurf(&["gradcheck", "--config", "l.toml", "--out", "g"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let g: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("g/gradcheck.json")).unwrap()).unwrap();
    assert!(g["max_relative_error"].as_f64().unwrap() < 1e-5);
}

#[test]
fn output_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("l.toml"), LINE).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nlsurf"))
        .args(["energy", "--config", "l.toml"])
        .current_dir(dir.path())
        .env("NONLOCAL_SURFACTANT_OUT", dir.path().join("from_env"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("from_env/manifest.json").is_file());
}

#[test]
fn scan_writes_the_report_columns() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.toml"),
        format!(
            "{CELL}\n[[facet]]\nnormal = [1.0, 0.0]\narea = 1.0\ngamma = 0.5\n\n[scan]\nepsilons = [0.2, 0.1]\nlongitudinal = [-3.0, 3.0]\n"
        ),
    )
    .unwrap();
    let o = nlsurf(&["scan-epsilon", "--config", "s.toml", "--out", "s"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("s/scan.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "epsilon,E_total,E_potential,E_exchange,E_surfactant,sharp_target,ratio,rho_mass,tv_u"
    );
    assert_eq!(csv.lines().count(), 3);

    let o = nlsurf(&["recovery", "--config", "s.toml", "--epsilon", "0.1", "--out", "r"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("r/u_eps0.csv").is_file());
    assert!(!dir.path().join("r/u_eps1.csv").exists());
}
