use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use esrom::config::ExperimentConfig;
use esrom::fom::{step_count, SnapshotSet};
use esrom::io::save_snapshots;
use esrom::Grid;
use esrom_cli::{cmd_fit, Options};
use nalgebra::DMatrix;

const TINY_BURGERS: &str = "
model.name = burgers
grid.n_cells = 32
time.dt = 0.002
time.t_end = 0.1
time.snapshot_stride = 5
ic.name = burgers_sine
fit.kinds = linear, quadratic, rational
fit.r = 4
fit.max_iters = 30
rom.runs = linear/generic, rational/generic, rational/entropy_stable/tse
";

fn esrom(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esrom"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.cfg");
    fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_pipeline(dir: &Path, text: &str) {
    let cfg = write_config(dir, text);
    for stage in ["fom", "fit", "rom", "report"] {
        let o = esrom(&[stage], &cfg, dir);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
}

#[test]
fn pipeline_writes_all_artifacts_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(a.path(), TINY_BURGERS);
    run_pipeline(b.path(), TINY_BURGERS);

    let report = fs::read_to_string(a.path().join("report.csv")).unwrap();
    let header = report.lines().next().unwrap();
    assert!(header.starts_with("t,eps_u_linear_generic,eps_u_rational_generic,"));
    assert!(header.contains(",eps_proj,eps_S_linear_generic,"));
    assert!(header.ends_with("eps_Pi_rational_entropy_stable_tse"));
    assert_eq!(report.lines().count(), 1 + 11);

    for file in [
        "snapshots.esrm",
        "fom_entropy.csv",
        "singular_values.csv",
        "basis_linear.esmf",
        "manifold_quadratic.esmf",
        "manifold_rational.esmf",
        "fit_report_rational.csv",
        "rom_rational_entropy_stable_tse_trace.csv",
        "rom_rational_entropy_stable_tse_coords.csv",
        "rom_linear_generic_status.json",
        "report.csv",
    ] {
        let x = fs::read(a.path().join(file)).unwrap_or_else(|_| panic!("missing {file}"));
        let y = fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs between identical runs");
    }
    let status = fs::read_to_string(a.path().join("rom_linear_generic_status.json")).unwrap();
    assert!(status.contains("\"status\": \"ok\""));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("report.json")).unwrap()).unwrap();
    assert!(json["eps_xt_max"]["linear"].as_f64().unwrap() > 0.0);
    assert!(json["wall_times"]["fit_rational"].as_f64().is_some());

    // rerunning the report alone reproduces it byte for byte
    let before = fs::read(a.path().join("report.json")).unwrap();
    let o = esrom(&["report"], &a.path().join("experiment.cfg"), a.path());
    assert!(o.status.success());
    assert_eq!(before, fs::read(a.path().join("report.json")).unwrap());
}

#[test]
fn invalid_model_name_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &TINY_BURGERS.replace("= burgers\n", "= plasma\n"));
    let o = esrom(&["fom"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("plasma"), "{}", stderr(&o));
}

#[test]
fn rank_above_snapshot_count_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &TINY_BURGERS.replace("fit.r = 4", "fit.r = 12"));
    assert!(esrom(&["fom"], &cfg, dir.path()).status.success());
    let o = esrom(&["fit"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn missing_inputs_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_BURGERS);
    assert_eq!(esrom(&["fit"], &cfg, dir.path()).status.code(), Some(3));
    assert!(esrom(&["fom"], &cfg, dir.path()).status.success());
    assert!(esrom(&["fit"], &cfg, dir.path()).status.success());
    // no ROM traces yet
    assert_eq!(esrom(&["report"], &cfg, dir.path()).status.code(), Some(3));
    let missing = esrom(&["fom"], &dir.path().join("nope.cfg"), dir.path());
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn failed_rom_exits_with_2_and_records_the_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = "
model.name = euler
grid.n_cells = 48
time.dt = 0.0002
time.t_end = 0.02
time.snapshot_stride = 10
ic.name = euler_sod_periodic
fom.dissipation = roe1
fit.kinds = linear
fit.r = 2
rom.runs = linear/entropy_stable
";
    let cfg = write_config(dir.path(), text);
    assert!(esrom(&["fom"], &cfg, dir.path()).status.success());
    assert!(esrom(&["fit"], &cfg, dir.path()).status.success());
    let o = esrom(&["rom"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let status: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("rom_linear_entropy_stable_status.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(status["status"], "failed");
    assert_eq!(status["fail_reason"], "inadmissible_projection");
    assert!(dir.path().join("rom_linear_entropy_stable_trace.csv").exists());
}

fn bundled(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn n_snapshots(c: &ExperimentConfig) -> usize {
    step_count(c.time.dt, c.time.t_end).unwrap() / c.time.snapshot_stride + 1
}

#[test]
fn bundled_configs_encode_the_experiments() {
    let b = bundled("burgers.cfg");
    assert_eq!((b.n_cells, n_snapshots(&b), b.fit.fit.r), (300, 201, 15));
    let d = bundled("sw_dambreak.cfg");
    assert_eq!((d.n_cells, n_snapshots(&d)), (300, 401));
    assert_eq!(d.model, esrom::Model::ShallowWater { g: 3.0 });
    let p = bundled("sw_perturbation.cfg");
    assert_eq!((p.n_cells, n_snapshots(&p), p.time.dt), (300, 201, 0.0005));
    let e = bundled("euler_sod.cfg");
    assert_eq!((e.n_cells, n_snapshots(&e), e.time.dt), (250, 1001, 0.0001));
    assert_eq!(e.model, esrom::Model::Euler { gamma: 1.4 });
    let bd = bundled("burgers_desk.cfg");
    assert_eq!((bd.n_cells, n_snapshots(&bd), bd.fit.fit.r), (128, 101, 8));
    for name in ["sw_dambreak_desk.cfg", "sw_perturbation_desk.cfg", "euler_sod_desk.cfg"] {
        assert_eq!(bundled(name).n_cells, 128);
    }
}

#[test]
fn rational_fit_of_rank_one_data_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let text = "
model.name = burgers
grid.n_cells = 16
time.dt = 0.1
time.t_end = 1
time.snapshot_stride = 1
ic.name = burgers_sine
fit.kinds = rational
fit.r = 1
";
    let cfg = ExperimentConfig::parse(text).unwrap();
    let grid = Grid::uniform(16, 1, 0.0, 1.0).unwrap();
    let profile: Vec<f64> = (0..16).map(|i| 1.0 + (i as f64 * 0.4).sin()).collect();
    let data = DMatrix::from_fn(16, 11, |i, j| profile[i] * (0.5 + 0.1 * j as f64));
    let times = (0..11).map(|j| j as f64 * 0.1).collect();
    let snaps = SnapshotSet::new(data, times, &grid).unwrap();
    save_snapshots(&dir.path().join("snapshots.esrm"), &snaps).unwrap();
    let opts = Options {
        out: dir.path().to_path_buf(),
        parallel_rows: 0,
    };
    let summary = cmd_fit(&cfg, &opts).unwrap();
    assert!(summary[0].eps_xt_max <= 1e-8, "{:?}", summary);
}
