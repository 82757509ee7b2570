//! Pipeline stages behind the `esrom` binary. Every stage reads and writes
//! plain files in the output directory, so stages can be rerun independently.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use esrom::config::{ExperimentConfig, ManifoldKind, RomRun};
use esrom::diagnostics::{eps_entropy, eps_entropy0, eps_proj, eps_u, eps_xt_max, ComparisonReport};
use esrom::fitting::{augment_snapshots, coordinates, fit_quadratic, fit_rational_quadratic, pod_basis};
use esrom::fom::{integrate_fom, sample_initial_condition, SemiDiscretization, SnapshotSet};
use esrom::io::{load_manifold, load_snapshots, save_manifold, save_snapshots};
use esrom::manifold::{AnyManifold, LinearManifold, Manifold, TseManifold};
use esrom::rom::{initial_coords, run_rom, RomConfig, RunStatus};
use esrom::Grid;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Failure classes with fixed process exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerics(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerics(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Numerics(m) => write!(f, "numerics: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<esrom::Error> for CliError {
    fn from(e: esrom::Error) -> Self {
        use esrom::Error as E;
        match e {
            E::Io(_) | E::Format(_) => CliError::Io(e.to_string()),
            E::InvalidArgument(_) | E::LengthMismatch { .. } | E::DissipationMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerics(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone)]
pub struct Options {
    pub out: PathBuf,
    /// Worker threads for row-parallel fitting; 0 fits rows sequentially.
    pub parallel_rows: usize,
}

impl Options {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

pub const SNAPSHOTS: &str = "snapshots.esrm";
pub const FOM_ENTROPY: &str = "fom_entropy.csv";

pub fn basis_file(kind: ManifoldKind) -> String {
    format!("basis_{kind}.esmf")
}

pub fn manifold_file(kind: ManifoldKind) -> String {
    format!("manifold_{kind}.esmf")
}

fn open_for_write(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: esrom::Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        esrom::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        esrom::Error::Format(m) => CliError::Io(format!("{}: {m}", path.display())),
        other => other.into(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = open_for_write(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_checked_snapshots(cfg: &ExperimentConfig, opts: &Options) -> Result<(SnapshotSet, Grid)> {
    let path = opts.path(SNAPSHOTS);
    let snaps = with_path(&path, load_snapshots(&path))?;
    let grid = cfg.grid()?;
    let (a, b) = snaps.domain;
    let same_domain = (a - cfg.domain.0).abs() <= 1e-12 && (b - cfg.domain.1).abs() <= 1e-12;
    if snaps.n_vars != grid.n_vars() || snaps.n_cells != grid.n_cells() || !same_domain {
        return Err(CliError::Config(format!(
            "{} was produced for a different grid or model",
            path.display()
        )));
    }
    Ok((snaps, grid))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FomSummary {
    pub n_snapshots: usize,
    pub n_dof: usize,
    pub final_entropy: f64,
}

/// Runs the full-order model; writes the snapshot file and entropy budget.
pub fn cmd_fom(cfg: &ExperimentConfig, opts: &Options) -> Result<FomSummary> {
    fs::create_dir_all(&opts.out)?;
    let grid = cfg.grid()?;
    let u0 = sample_initial_condition(&grid, |x| cfg.ic.eval(x, &cfg.model));
    let sd = SemiDiscretization::new(cfg.model, &grid, cfg.fom_dissipation)?
        .with_dissipation_scale(cfg.dissipation_scale)?;
    let (snaps, trace) = integrate_fom(&sd, &u0, cfg.time)?;
    let path = opts.path(SNAPSHOTS);
    with_path(&path, save_snapshots(&path, &snaps))?;
    let path = opts.path(FOM_ENTROPY);
    with_path(&path, trace.write_csv(open_for_write(&path)?))?;
    Ok(FomSummary {
        n_snapshots: snaps.n_snapshots(),
        n_dof: snaps.n_dof(),
        final_entropy: trace.samples.last().map_or(f64::NAN, |s| s.total),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub kind: String,
    pub r: usize,
    pub eps_xt_max: f64,
    pub fit_seconds: f64,
    pub fallback_rows: usize,
}

/// Builds every configured manifold from the stored snapshots.
pub fn cmd_fit(cfg: &ExperimentConfig, opts: &Options) -> Result<Vec<FitSummary>> {
    let (snaps, grid) = load_checked_snapshots(cfg, opts)?;
    let x = &snaps.data;
    let r = cfg.fit.fit.r;
    cfg.fit.fit.validate(x.nrows(), x.ncols())?;

    let (phi, sigma) = pod_basis(x, r)?;
    let mut w = open_for_write(&opts.path("singular_values.csv"))?;
    writeln!(w, "k,sigma")?;
    for (k, s) in sigma.iter().enumerate() {
        writeln!(w, "{k},{s:e}")?;
    }
    w.flush()?;

    let mut out = Vec::new();
    for &kind in &cfg.fit.kinds {
        let start = Instant::now();
        let mut fallback_rows = 0;
        let basis = if kind == ManifoldKind::Linear && cfg.fit.augment {
            pod_basis(&augment_snapshots(&snaps, &cfg.model)?, r)?.0
        } else {
            phi.clone()
        };
        let manifold: AnyManifold = match kind {
            ManifoldKind::Linear => LinearManifold::new(basis.clone()).into(),
            ManifoldKind::Quadratic => fit_quadratic(x, &basis, cfg.fit.fit.lambda)?.into(),
            ManifoldKind::Rational => {
                let mut fc = cfg.fit.fit;
                let (m, report) = if opts.parallel_rows > 0 {
                    fc.parallel_rows = true;
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(opts.parallel_rows)
                        .build()
                        .map_err(|e| CliError::Config(e.to_string()))?;
                    pool.install(|| fit_rational_quadratic(x, &basis, grid.n_cells(), &fc))?
                } else {
                    fit_rational_quadratic(x, &basis, grid.n_cells(), &fc)?
                };
                let path = opts.path(&format!("fit_report_{kind}.csv"));
                with_path(&path, report.write_csv(open_for_write(&path)?))?;
                fallback_rows = report.n_fallbacks();
                m.into()
            }
        };
        let fit_seconds = start.elapsed().as_secs_f64();
        let a = coordinates(&basis, x)?;
        let err = eps_xt_max(&manifold, x, &a)?;
        for (file, m) in [
            (basis_file(kind), &AnyManifold::from(LinearManifold::new(basis))),
            (manifold_file(kind), &manifold),
        ] {
            let path = opts.path(&file);
            with_path(&path, save_manifold(&path, m))?;
        }
        let summary = FitSummary {
            kind: kind.to_string(),
            r,
            eps_xt_max: err,
            fit_seconds,
            fallback_rows,
        };
        write_json(&opts.path(&format!("fit_summary_{kind}.json")), &summary)?;
        out.push(summary);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomSummary {
    pub name: String,
    pub manifold: String,
    pub variant: String,
    pub tse: bool,
    /// `ok` or the failure reason.
    pub status: String,
    pub online_seconds: f64,
}

fn rom_file(run: &str, suffix: &str) -> String {
    format!("rom_{run}_{suffix}")
}

/// Integrates every configured reduced model from the first snapshot.
/// Failed runs still write their traces; the caller decides the exit code.
pub fn cmd_rom(cfg: &ExperimentConfig, opts: &Options) -> Result<Vec<RomSummary>> {
    let (snaps, grid) = load_checked_snapshots(cfg, opts)?;
    let x0 = snaps.column(0);
    let mut out = Vec::new();
    for run in &cfg.rom.runs {
        let name = run.name();
        let basis = load_linear(&opts.path(&basis_file(run.manifold)))?;
        let path = opts.path(&manifold_file(run.manifold));
        let manifold = with_path(&path, load_manifold(&path))?;
        let config = RomConfig {
            variant: run.variant,
            tse: run.tse,
            time: cfg.rom_time(),
            spec: cfg.rom.dissipation,
            dissipation_scale: cfg.dissipation_scale,
        };
        let init = initial_coords(&x0, &basis, run.tse)?;
        let start = Instant::now();
        let trace = run_rom(&manifold, &cfg.model, &grid, &config, &init)?;
        let online_seconds = start.elapsed().as_secs_f64();

        let path = opts.path(&rom_file(&name, "trace.csv"));
        with_path(&path, trace.write_csv(open_for_write(&path)?))?;
        let path = opts.path(&rom_file(&name, "coords.csv"));
        with_path(&path, trace.write_coords_csv(open_for_write(&path)?, run.tse))?;
        let path = opts.path(&rom_file(&name, "status.json"));
        let mut w = open_for_write(&path)?;
        with_path(&path, trace.write_status_json(&mut w))?;
        writeln!(w)?;

        let summary = RomSummary {
            name: name.clone(),
            manifold: run.manifold.to_string(),
            variant: run.variant.to_string(),
            tse: run.tse,
            status: match &trace.status {
                RunStatus::Ok => "ok".into(),
                RunStatus::Failed { fail_reason, .. } => fail_reason.clone(),
            },
            online_seconds,
        };
        write_json(&opts.path(&rom_file(&name, "meta.json")), &summary)?;
        out.push(summary);
    }
    Ok(out)
}

fn load_linear(path: &Path) -> Result<DMatrix<f64>> {
    match with_path(path, load_manifold(path))? {
        AnyManifold::Linear(m) => Ok(m.basis().clone()),
        other => Err(CliError::Io(format!(
            "{}: expected a linear basis, found a {} manifold",
            path.display(),
            other.kind()
        ))),
    }
}

/// Rows of a numeric CSV with a header; empty cells become NaN.
fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Ok(f64::NAN)
                } else {
                    s.parse::<f64>()
                        .map_err(|e| CliError::Io(format!("{}: `{s}`: {e}", path.display())))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Series of one ROM run on the snapshot time grid.
struct RunSeries {
    eps_u: Vec<f64>,
    eps_s: Vec<f64>,
    eps_s0: Vec<f64>,
    eps_pi: Option<Vec<f64>>,
}

fn run_series(
    model: &esrom::Model,
    stride: usize,
    opts: &Options,
    name: &str,
    snaps: &SnapshotSet,
    grid: &Grid,
    s_fom: &[f64],
) -> Result<(RunSeries, RomSummary)> {
    let meta: RomSummary = read_json(&opts.path(&rom_file(name, "meta.json")))?;
    let run = RomRun {
        manifold: meta.manifold.parse()?,
        variant: meta.variant.parse()?,
        tse: meta.tse,
    };
    let trace = read_numeric_csv(&opts.path(&rom_file(name, "trace.csv")))?;
    let coords = read_numeric_csv(&opts.path(&rom_file(name, "coords.csv")))?;
    let path = opts.path(&manifold_file(run.manifold));
    let manifold = with_path(&path, load_manifold(&path))?;
    let lifted = if run.tse {
        Some(TseManifold::new(&manifold, *model, grid)?)
    } else {
        None
    };

    let n_t = snaps.times.len();
    let mut s = RunSeries {
        eps_u: vec![f64::NAN; n_t],
        eps_s: vec![f64::NAN; n_t],
        eps_s0: vec![f64::NAN; n_t],
        eps_pi: (run.variant == esrom::rom::RomVariant::EntropyStable).then(|| vec![f64::NAN; n_t]),
    };
    let s_r0 = trace.first().map_or(f64::NAN, |row| row[1]);
    for j in 0..n_t {
        if let Some(c) = coords.get(j) {
            if (c[0] - snaps.times[j]).abs() > 1e-9 * (1.0 + snaps.times[j].abs()) {
                return Err(CliError::Config(format!(
                    "ROM run `{name}` was stored on a different time grid"
                )));
            }
            let u_r = match &lifted {
                Some(m) => m.decode(&c[1..])?,
                None => manifold.decode(&c[1..])?,
            };
            s.eps_u[j] = eps_u(&snaps.column(j), &u_r, grid)?;
        }
        if let Some(row) = trace.get(j * stride) {
            s.eps_s[j] = eps_entropy(s_fom[j], row[1]);
            s.eps_s0[j] = eps_entropy0(s_r0, row[1]);
            if let Some(pi) = s.eps_pi.as_mut() {
                pi[j] = row[4];
            }
        }
    }
    Ok((s, meta))
}

/// Assembles `report.csv` and `report.json` from the stored snapshots, fit
/// summaries and ROM traces.
pub fn cmd_report(cfg: &ExperimentConfig, opts: &Options) -> Result<ComparisonReport> {
    let (snaps, grid) = load_checked_snapshots(cfg, opts)?;
    let sd = SemiDiscretization::new(cfg.model, &grid, cfg.fom_dissipation)?;
    let s_fom = (0..snaps.n_snapshots())
        .map(|j| sd.total_entropy(&snaps.column(j)))
        .collect::<esrom::Result<Vec<f64>>>()?;
    let mut report = ComparisonReport::new(snaps.times.clone());

    let mut runs = Vec::new();
    for name in &cfg.report_runs {
        runs.push((name.clone(), run_series(&cfg.model, cfg.time.snapshot_stride, opts, name, &snaps, &grid, &s_fom)?));
    }
    for (name, (s, _)) in &runs {
        report.add_series(format!("eps_u_{name}"), s.eps_u.clone())?;
    }
    let r_lin = cfg.report_proj_r.unwrap_or(cfg.fit.fit.r);
    let (phi, _) = pod_basis(&snaps.data, r_lin)?;
    let phi = LinearManifold::omega_orthonormal(&phi, &grid)?;
    let proj = (0..snaps.n_snapshots())
        .map(|j| eps_proj(&snaps.column(j), phi.basis(), &grid))
        .collect::<esrom::Result<Vec<f64>>>()?;
    report.add_series("eps_proj", proj)?;
    for (name, (s, _)) in &runs {
        report.add_series(format!("eps_S_{name}"), s.eps_s.clone())?;
    }
    for (name, (s, _)) in &runs {
        report.add_series(format!("eps_S0_{name}"), s.eps_s0.clone())?;
    }
    for (name, (s, _)) in &runs {
        if let Some(pi) = &s.eps_pi {
            report.add_series(format!("eps_Pi_{name}"), pi.clone())?;
        }
    }

    for (name, (_, meta)) in &runs {
        report.wall_times.insert(format!("online_{name}"), meta.online_seconds);
        let kind = &meta.manifold;
        if !report.eps_xt_max.contains_key(kind) {
            let fit: FitSummary = read_json(&opts.path(&format!("fit_summary_{kind}.json")))?;
            report.eps_xt_max.insert(kind.clone(), fit.eps_xt_max);
            report.wall_times.insert(format!("fit_{kind}"), fit.fit_seconds);
        }
    }

    let path = opts.path("report.csv");
    with_path(&path, report.write_csv(open_for_write(&path)?))?;
    let path = opts.path("report.json");
    let mut w = open_for_write(&path)?;
    with_path(&path, report.write_json(&mut w))?;
    writeln!(w)?;
    Ok(report)
}
