use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use esrom::config::ExperimentConfig;
use esrom_cli::{cmd_fit, cmd_fom, cmd_report, cmd_rom, CliError, Options};

#[derive(Parser)]
#[command(name = "esrom", version, about = "Entropy-stable reduced order models on nonlinear manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for all artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Fit manifold rows on this many threads (0 fits sequentially).
    #[arg(long, global = true, default_value_t = 0)]
    parallel_rows: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the full-order model and store snapshots.
    Fom,
    /// Build the configured manifolds from stored snapshots.
    Fit,
    /// Integrate the configured reduced models.
    Rom,
    /// Compare reduced models against the full-order snapshots.
    Report,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let cfg = ExperimentConfig::load(path).map_err(|e| match e {
        esrom::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => CliError::Config(format!("{}: {other}", path.display())),
    })?;
    let opts = Options {
        out: cli.out.clone(),
        parallel_rows: cli.parallel_rows,
    };
    match cli.command {
        Command::Fom => {
            let s = cmd_fom(&cfg, &opts)?;
            println!("n_s = {}, N_h = {}, final S_h = {:.12e}", s.n_snapshots, s.n_dof, s.final_entropy);
        }
        Command::Fit => {
            for s in cmd_fit(&cfg, &opts)? {
                println!(
                    "{:<10} eps_xt_max = {:.4e}  ({:.1} s, {} fallback rows)",
                    s.kind, s.eps_xt_max, s.fit_seconds, s.fallback_rows
                );
            }
        }
        Command::Rom => {
            let runs = cmd_rom(&cfg, &opts)?;
            for s in &runs {
                println!("{:<32} {}  ({:.1} s)", s.name, s.status, s.online_seconds);
            }
            if let Some(s) = runs.iter().find(|s| s.status != "ok") {
                return Err(CliError::Numerics(format!("ROM run {} failed: {}", s.name, s.status)));
            }
        }
        Command::Report => {
            let r = cmd_report(&cfg, &opts)?;
            for (name, values) in &r.series {
                let max = values.iter().filter(|v| !v.is_nan()).cloned().fold(f64::NAN, f64::max);
                println!("{name:<40} max = {max:.4e}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
