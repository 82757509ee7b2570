//! Reconstruction error of linear, quadratic and rational quadratic manifolds
//! on inviscid Burgers snapshot data.
//!
//! Usage: `cargo run --release --example burgers_reconstruction -- [n_cells] [r] [stride]`

use std::time::Instant;

use esrom::fitting::{coordinates, fit_quadratic, fit_rational_quadratic, pod_basis, reconstruction_error, FitConfig};
use esrom::fom::{run_fom, sample_initial_condition, TimeConfig};
use esrom::initial::InitialCondition;
use esrom::manifold::LinearManifold;
use esrom::{DissipationSpec, Grid, Model};

fn main() -> esrom::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n_cells = args.first().copied().unwrap_or(300);
    let r = args.get(1).copied().unwrap_or(15);
    let stride = args.get(2).copied().unwrap_or(5);
    let model = Model::Burgers;
    let grid = Grid::uniform(n_cells, 1, 0.0, 1.0)?;
    let u0 = sample_initial_condition(&grid, |x| InitialCondition::BurgersSine.eval(x, &model));
    let time = TimeConfig { dt: 0.001, t_end: 1.0, snapshot_stride: stride };
    let (snaps, _) = run_fom(&u0, &model, &grid, time, DissipationSpec::Llf)?;
    let x = &snaps.data;
    let (phi, _) = pod_basis(x, r)?;
    let a = coordinates(&phi, x)?;

    let (_, e_lin) = reconstruction_error(&LinearManifold::new(phi.clone()), x, &a)?;
    println!("linear    eps_xt_max = {e_lin:.4e}");
    let quad = fit_quadratic(x, &phi, 0.5)?;
    let (_, e_quad) = reconstruction_error(&quad, x, &a)?;
    println!("quadratic eps_xt_max = {e_quad:.4e}");

    let start = Instant::now();
    let (rat, report) = fit_rational_quadratic(x, &phi, n_cells, &FitConfig::new(r))?;
    let (eps, e_rat) = reconstruction_error(&rat, x, &a)?;
    if let Ok(path) = std::env::var("FIT_REPORT") {
        report.write_csv(std::fs::File::create(path)?)?;
        for i in 0..eps.nrows() {
            let m = eps.row(i).amax();
            if m > 0.5 * e_rat {
                println!("row {i}: max error {m:.3e}");
            }
        }
    }
    println!(
        "rational  eps_xt_max = {e_rat:.4e} ({:.1} s, {} fallback rows)",
        start.elapsed().as_secs_f64(),
        report.n_fallbacks()
    );
    Ok(())
}
