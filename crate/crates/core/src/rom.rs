//! Manifold Galerkin reduced order models: the generic ROM and the entropy
//! stable ROM evaluated at the entropy projected state, optionally on a
//! tangent space enriched manifold.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::fom::{dot, rk4_step_from, step_count, SemiDiscretization, TimeConfig};
use crate::grid::Grid;
use crate::manifold::{Manifold, TangentSolver, TseManifold};
use crate::physics::{CellVec, DissipationSpec, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RomVariant {
    /// All nonlinear terms evaluated at the decoded state.
    Generic,
    /// Terms evaluated at the entropy projected state.
    EntropyStable,
}

impl RomVariant {
    pub fn name(&self) -> &'static str {
        match self {
            RomVariant::Generic => "generic",
            RomVariant::EntropyStable => "entropy_stable",
        }
    }
}

impl fmt::Display for RomVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RomVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(RomVariant::Generic),
            "entropy_stable" => Ok(RomVariant::EntropyStable),
            other => Err(Error::InvalidArgument(format!("unknown ROM variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RomConfig {
    pub variant: RomVariant,
    pub tse: bool,
    /// Time step, horizon, and the stride at which coordinates are stored.
    pub time: TimeConfig,
    pub spec: DissipationSpec,
    /// Factor on the dissipation operator; see [`crate::fom::DEFAULT_DISSIPATION_SCALE`].
    pub dissipation_scale: f64,
}

/// Generalized coordinates, plus the enrichment coordinate when present.
#[derive(Debug, Clone, PartialEq)]
pub struct RomState {
    pub a: Vec<f64>,
    pub alpha: Option<f64>,
}

impl RomState {
    pub fn coords(&self) -> Vec<f64> {
        let mut c = self.a.clone();
        c.extend(self.alpha);
        c
    }

    pub fn from_coords(coords: &[f64], tse: bool) -> Self {
        if tse {
            let (a, alpha) = coords.split_at(coords.len() - 1);
            Self {
                a: a.to_vec(),
                alpha: Some(alpha[0]),
            }
        } else {
            Self {
                a: coords.to_vec(),
                alpha: None,
            }
        }
    }
}

/// `a₀ = Φᵀx₀`, with `α₀ = 0` when enriched.
pub fn initial_coords(x0: &[f64], basis: &DMatrix<f64>, tse: bool) -> Result<RomState> {
    check_len("initial snapshot", basis.nrows(), x0.len())?;
    let a = basis.tr_mul(&nalgebra::DVector::from_column_slice(x0));
    Ok(RomState {
        a: a.iter().copied().collect(),
        alpha: tse.then_some(0.0),
    })
}

/// Everything computed from one right-hand-side evaluation.
#[derive(Debug, Clone)]
pub struct RomEvaluation {
    pub da_dt: Vec<f64>,
    /// Reduced total entropy `S_h[φ(a)]`.
    pub entropy: f64,
    pub rate_cons: f64,
    pub rate_diss: f64,
    /// `‖u_r − ũ_r‖_Ω / ‖u_r‖_Ω` (entropy stable variant only).
    pub eps_pi: Option<f64>,
    pub u_r: Vec<f64>,
}

/// Reduced model bound to a manifold, model, grid and dissipation choice.
pub struct ReducedModel<'a, M: ?Sized> {
    manifold: &'a M,
    sd: SemiDiscretization<'a>,
    variant: RomVariant,
}

impl<'a, M: Manifold + ?Sized> ReducedModel<'a, M> {
    pub fn new(
        manifold: &'a M,
        model: &Model,
        grid: &'a Grid,
        spec: DissipationSpec,
        variant: RomVariant,
    ) -> Result<Self> {
        check_len("manifold output", grid.n_dof(), manifold.n_dof())?;
        Ok(Self {
            manifold,
            sd: SemiDiscretization::new(*model, grid, spec)?,
            variant,
        })
    }

    pub fn with_dissipation_scale(mut self, scale: f64) -> Result<Self> {
        self.sd = self.sd.with_dissipation_scale(scale)?;
        Ok(self)
    }

    pub fn semi_discretization(&self) -> &SemiDiscretization<'a> {
        &self.sd
    }

    /// `(ũ_r, η̃_r)` with `η̃_r = JJ†η(u_r)` and `ũ_r = u(η̃_r)`.
    pub fn entropy_project(&self, coords: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let u_r = self.manifold.decode(coords)?;
        let solver = TangentSolver::new(&self.manifold.jacobian(coords)?, self.sd.grid())?;
        let eta_r = self.sd.entropy_variables(&u_r)?;
        let eta_t = solver.project(&eta_r)?;
        let u_t = self.sd.scatter(&self.sd.states_from_entropy_variables(&eta_t)?);
        Ok((u_t, eta_t))
    }

    pub fn evaluate(&self, coords: &[f64]) -> Result<RomEvaluation> {
        check_len("coordinates", self.manifold.dim(), coords.len())?;
        let grid = self.sd.grid();
        let u_r = self.manifold.decode(coords)?;
        let states = self.sd.cell_states(&u_r)?;
        let entropy = self.sd.total_entropy_cells(&states)?;
        let eta_cells = self.sd.entropy_variables_cells(&states)?;
        let eta_r = self.sd.scatter(&eta_cells);
        let solver = TangentSolver::new(&self.manifold.jacobian(coords)?, grid)?;
        let eta_t = solver.project(&eta_r)?;
        let (terms, eps_pi) = match self.variant {
            RomVariant::Generic => (self.sd.interface_terms(&states, &eta_cells)?, None),
            RomVariant::EntropyStable => {
                let proj_states = self.sd.states_from_entropy_variables(&eta_t)?;
                let u_t = self.sd.scatter(&proj_states);
                let diff: Vec<f64> = u_r.iter().zip(&u_t).map(|(a, b)| a - b).collect();
                let norm = grid.norm(&u_r)?;
                let eps = if norm > 0.0 { grid.norm(&diff)? / norm } else { 0.0 };
                let eta_t_cells = cells(&eta_t, model_vars(&eta_cells), grid.n_cells());
                (self.sd.interface_terms(&proj_states, &eta_t_cells)?, Some(eps))
            }
        };
        let (rate_cons, rate_diss) = self.sd.rate_split(&eta_t, &terms);
        let da_dt = solver.pinv_plus_apply(&self.sd.flux_divergence(&terms))?;
        if da_dt.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reduced right-hand side"));
        }
        Ok(RomEvaluation {
            da_dt,
            entropy,
            rate_cons,
            rate_diss,
            eps_pi,
            u_r,
        })
    }

    pub fn rhs(&self, coords: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(coords)?.da_dt)
    }

    /// `dS_r/dt = η(u_r)ᵀ Ω_h J da/dt`, computed directly from the chain rule.
    pub fn entropy_rate_chain(&self, coords: &[f64]) -> Result<f64> {
        let eval = self.evaluate(coords)?;
        let jac = self.manifold.jacobian(coords)?;
        let eta = self.sd.entropy_variables(&eval.u_r)?;
        let du = &jac * nalgebra::DVector::from_column_slice(&eval.da_dt);
        let w = self.sd.grid().mass_weight(du.as_slice())?;
        Ok(dot(&eta, &w))
    }
}

fn model_vars(cells: &[CellVec]) -> usize {
    cells.first().map_or(0, |c| c.len())
}

/// Gathers a variable-major volume vector into per-cell vectors.
fn cells(v: &[f64], n_vars: usize, n: usize) -> Vec<CellVec> {
    (0..n)
        .map(|i| {
            let mut c = CellVec::zeros(n_vars);
            for k in 0..n_vars {
                c[k] = v[k * n + i];
            }
            c
        })
        .collect()
}

pub fn entropy_project<M: Manifold + ?Sized>(
    state: &RomState,
    manifold: &M,
    model: &Model,
    grid: &Grid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    ReducedModel::new(manifold, model, grid, DissipationSpec::None, RomVariant::EntropyStable)?
        .entropy_project(&state.coords())
}

pub fn rom_rhs_generic<M: Manifold + ?Sized>(
    state: &RomState,
    manifold: &M,
    model: &Model,
    grid: &Grid,
    spec: DissipationSpec,
) -> Result<Vec<f64>> {
    ReducedModel::new(manifold, model, grid, spec, RomVariant::Generic)?.rhs(&state.coords())
}

pub fn rom_rhs_entropy_stable<M: Manifold + ?Sized>(
    state: &RomState,
    manifold: &M,
    model: &Model,
    grid: &Grid,
    spec: DissipationSpec,
) -> Result<Vec<f64>> {
    ReducedModel::new(manifold, model, grid, spec, RomVariant::EntropyStable)?.rhs(&state.coords())
}

/// `(−η̃ᵀΔ_v f*, η̃ᵀΔ_v D Δ_i η)`, with the flux terms at `ũ_r` (entropy
/// stable) or `u_r` (generic); the two sum to `dS_r/dt`.
pub fn rom_entropy_rate_split<M: Manifold + ?Sized>(
    state: &RomState,
    manifold: &M,
    model: &Model,
    grid: &Grid,
    spec: DissipationSpec,
    variant: RomVariant,
) -> Result<(f64, f64)> {
    let e = ReducedModel::new(manifold, model, grid, spec, variant)?.evaluate(&state.coords())?;
    Ok((e.rate_cons, e.rate_diss))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RomStep {
    pub t: f64,
    pub entropy: f64,
    pub rate_cons: f64,
    pub rate_diss: f64,
    pub eps_pi: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed {
        fail_time: f64,
        fail_reason: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomTrace {
    pub steps: Vec<RomStep>,
    pub coord_times: Vec<f64>,
    /// Coordinates (including `α`) every stored step.
    pub coords: Vec<Vec<f64>>,
    pub status: RunStatus,
}

impl RomTrace {
    pub fn failed(&self) -> bool {
        matches!(self.status, RunStatus::Failed { .. })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,S_r,rate_cons,rate_diss,eps_Pi,alpha")?;
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        for s in &self.steps {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{},{}",
                s.t,
                s.entropy,
                s.rate_cons,
                s.rate_diss,
                opt(s.eps_pi),
                opt(s.alpha)
            )?;
        }
        Ok(())
    }

    pub fn write_coords_csv<W: Write>(&self, mut w: W, tse: bool) -> Result<()> {
        let dim = self.coords.first().map_or(0, |c| c.len());
        let mut header = vec!["t".to_string()];
        let n_a = if tse { dim.saturating_sub(1) } else { dim };
        header.extend((0..n_a).map(|k| format!("a{k}")));
        if tse {
            header.push("alpha".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for (t, c) in self.coord_times.iter().zip(&self.coords) {
            let mut line = vec![format!("{t:e}")];
            line.extend(c.iter().map(|v| format!("{v:e}")));
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn write_status_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.status).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Integrates a ROM with RK4 from `initial`. Numerical failures end the run
/// and are recorded in the trace status.
pub fn run_rom<M: Manifold>(
    manifold: &M,
    model: &Model,
    grid: &Grid,
    config: &RomConfig,
    initial: &RomState,
) -> Result<RomTrace> {
    if config.tse != initial.alpha.is_some() {
        return Err(Error::InvalidArgument(
            "initial state must carry alpha exactly when enrichment is on".into(),
        ));
    }
    check_len("initial coordinates", manifold.dim(), initial.a.len())?;
    if config.time.snapshot_stride == 0 {
        return Err(Error::InvalidArgument("coordinate stride must be at least 1".into()));
    }
    let steps = step_count(config.time.dt, config.time.t_end)?;
    if config.tse {
        let lifted = TseManifold::new(manifold, *model, grid)?;
        integrate(&lifted, model, grid, config, initial, steps)
    } else {
        integrate(manifold, model, grid, config, initial, steps)
    }
}

fn integrate<M: Manifold + ?Sized>(
    manifold: &M,
    model: &Model,
    grid: &Grid,
    config: &RomConfig,
    initial: &RomState,
    steps: usize,
) -> Result<RomTrace> {
    let rom = ReducedModel::new(manifold, model, grid, config.spec, config.variant)?
        .with_dissipation_scale(config.dissipation_scale)?;
    let mut trace = RomTrace {
        steps: Vec::with_capacity(steps + 1),
        coord_times: Vec::new(),
        coords: Vec::new(),
        status: RunStatus::Ok,
    };
    let mut coords = initial.coords();
    let dt = config.time.dt;
    for step in 0..=steps {
        let t = step as f64 * dt;
        let result = rom.evaluate(&coords).and_then(|eval| {
            trace.steps.push(RomStep {
                t,
                entropy: eval.entropy,
                rate_cons: eval.rate_cons,
                rate_diss: eval.rate_diss,
                eps_pi: eval.eps_pi,
                alpha: config.tse.then(|| coords[coords.len() - 1]),
            });
            if step % config.time.snapshot_stride == 0 {
                trace.coord_times.push(t);
                trace.coords.push(coords.clone());
            }
            if step < steps {
                rk4_step_from(&coords, &eval.da_dt, dt, |c| rom.rhs(c))
            } else {
                Ok(coords.clone())
            }
        });
        match result {
            Ok(next) => coords = next,
            Err(e) => {
                log::warn!("reduced model failed at t = {t}: {e}");
                trace.status = RunStatus::Failed {
                    fail_time: t,
                    fail_reason: e.reason().to_string(),
                    message: e.to_string(),
                };
                break;
            }
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::{augment_snapshots, coordinates, fit_quadratic, pod_basis};
    use crate::fom::{run_fom, sample_initial_condition, SemiDiscretization};
    use crate::initial::InitialCondition;
    use crate::manifold::{LinearManifold, QuadraticManifold};
    use crate::physics::CellState;
    use nalgebra::{DMatrix, DVector};
    use std::f64::consts::TAU;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
    }

    struct Case {
        model: Model,
        grid: Grid,
        spec: DissipationSpec,
        x: DMatrix<f64>,
        /// Snapshots followed by their entropy variables.
        xa: DMatrix<f64>,
    }

    fn case(model: Model, ic: impl Fn(f64) -> CellState, spec: DissipationSpec) -> Case {
        let grid = Grid::uniform(24, model.n_vars(), 0.0, 1.0).unwrap();
        let u0 = sample_initial_condition(&grid, ic);
        let time = TimeConfig { dt: 1e-3, t_end: 0.05, snapshot_stride: 5 };
        let (snaps, _) = run_fom(&u0, &model, &grid, time, spec).unwrap();
        let xa = augment_snapshots(&snaps, &model).unwrap();
        Case { model, grid, spec, x: snaps.data, xa }
    }

    fn cases() -> Vec<Case> {
        let sw = Model::shallow_water();
        vec![
            case(Model::Burgers, |x| InitialCondition::BurgersSine.eval(x, &Model::Burgers), DissipationSpec::Llf),
            case(sw, |x| InitialCondition::SwPerturbation.eval(x, &sw), DissipationSpec::Roe1),
            case(
                Model::euler(),
                |x| {
                    let rho = 1.0 + 0.3 * (TAU * x).sin();
                    let p = 1.0 + 0.2 * (TAU * x).cos();
                    CellState::from_slice(&[rho, 0.5 * rho, p / 0.4 + 0.125 * rho])
                },
                DissipationSpec::Tecno2Minmod,
            ),
        ]
    }

    #[test]
    fn identity_decoder_recovers_the_fom() {
        for c in cases() {
            let n = c.grid.n_dof();
            let m = LinearManifold::new(DMatrix::identity(n, n));
            let u = c.x.column(3).iter().copied().collect::<Vec<_>>();
            let fom = SemiDiscretization::new(c.model, &c.grid, c.spec).unwrap().rhs(&u).unwrap();
            for variant in [RomVariant::Generic, RomVariant::EntropyStable] {
                let rom = ReducedModel::new(&m, &c.model, &c.grid, c.spec, variant).unwrap();
                let got = rom.rhs(&u).unwrap();
                assert!(close(&got, &fom, 1e-9), "{} {variant}", c.model);
            }
        }
    }

    fn quadratic(c: &Case, r: usize) -> (QuadraticManifold, DMatrix<f64>) {
        let (basis, _) = pod_basis(&c.xa, r).unwrap();
        let q = fit_quadratic(&c.x, &basis, 1e-6).unwrap();
        let a = coordinates(&basis, &c.x).unwrap();
        (q, a)
    }

    fn check_entropy_stable<M: Manifold>(c: &Case, m: &M, coords: &[f64]) {
        let rom = ReducedModel::new(m, &c.model, &c.grid, c.spec, RomVariant::EntropyStable).unwrap();
        let e = rom.evaluate(coords).unwrap();
        assert!(e.rate_cons.abs() <= 1e-10 * (1.0 + e.rate_diss.abs()), "{}: {}", c.model, e.rate_cons);
        assert!(e.rate_diss <= 1e-14, "{}", c.model);
        let chain = rom.entropy_rate_chain(coords).unwrap();
        let total = e.rate_cons + e.rate_diss;
        assert!((chain - total).abs() <= 1e-8 * (1e-6 + total.abs()), "{chain} vs {total}");
        assert!(e.eps_pi.unwrap() >= 0.0);
    }

    #[test]
    fn entropy_stable_rates() {
        for c in cases() {
            let (basis, _) = pod_basis(&c.xa, 8).unwrap();
            let a = coordinates(&basis, &c.x).unwrap();
            let coords: Vec<f64> = a.row(5).iter().copied().collect();
            check_entropy_stable(&c, &LinearManifold::new(basis.clone()), &coords);
            let q = fit_quadratic(&c.x, &basis, 0.5).unwrap();
            check_entropy_stable(&c, &q, &coords);
        }
    }

    #[test]
    fn generic_split_matches_the_chain_rule() {
        for c in cases() {
            let (q, a) = quadratic(&c, 3);
            let coords: Vec<f64> = a.row(2).iter().copied().collect();
            let rom = ReducedModel::new(&q, &c.model, &c.grid, c.spec, RomVariant::Generic).unwrap();
            let e = rom.evaluate(&coords).unwrap();
            assert!(e.eps_pi.is_none());
            let chain = rom.entropy_rate_chain(&coords).unwrap();
            let total = e.rate_cons + e.rate_diss;
            assert!((chain - total).abs() <= 1e-8 * (1.0 + total.abs()), "{chain} vs {total}");
        }
    }

    #[test]
    fn tse_coordinates_start_at_zero_alpha() {
        let basis = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let s = initial_coords(&[2.0, 3.0, 4.0], &basis, true).unwrap();
        assert_eq!(s.a, vec![2.0, 3.0]);
        assert_eq!(s.alpha, Some(0.0));
        assert_eq!(RomState::from_coords(&s.coords(), true), s);
        assert!(initial_coords(&[1.0], &basis, false).is_err());
    }

    #[test]
    fn run_records_entropy_and_coordinates() {
        let c = &cases()[1];
        let (basis, _) = pod_basis(&c.x, 4).unwrap();
        let m = LinearManifold::new(basis.clone());
        let x0: Vec<f64> = c.x.column(0).iter().copied().collect();
        let cfg = RomConfig {
            variant: RomVariant::EntropyStable,
            tse: false,
            time: TimeConfig { dt: 1e-3, t_end: 0.01, snapshot_stride: 5 },
            spec: c.spec,
            dissipation_scale: 1.0,
        };
        let init = initial_coords(&x0, &basis, false).unwrap();
        let trace = run_rom(&m, &c.model, &c.grid, &cfg, &init).unwrap();
        assert!(!trace.failed(), "{:?}", trace.status);
        assert_eq!(trace.steps.len(), 11);
        assert_eq!(trace.coord_times, vec![0.0, 0.005, 0.01]);
        assert_eq!(trace.coords[0].len(), 4);
        let s0 = trace.steps[0].entropy;
        assert!(trace.steps.iter().all(|s| s.entropy <= s0 + 1e-9));
        let mut csv = Vec::new();
        trace.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,S_r,rate_cons,rate_diss,eps_Pi,alpha\n"));

        let bad = RomState { a: init.a.clone(), alpha: Some(0.0) };
        assert!(run_rom(&m, &c.model, &c.grid, &cfg, &bad).is_err());
    }

    #[test]
    fn burgers_enrichment_of_a_linear_space_is_singular() {
        // η(u) = u already lies in span(Φ).
        let c = &cases()[0];
        let (basis, _) = pod_basis(&c.x, 3).unwrap();
        let m = LinearManifold::new(basis.clone());
        let x0: Vec<f64> = c.x.column(0).iter().copied().collect();
        let cfg = RomConfig {
            variant: RomVariant::EntropyStable,
            tse: true,
            time: TimeConfig { dt: 1e-3, t_end: 0.002, snapshot_stride: 1 },
            spec: c.spec,
            dissipation_scale: 1.0,
        };
        let init = initial_coords(&x0, &basis, true).unwrap();
        let trace = run_rom(&m, &c.model, &c.grid, &cfg, &init).unwrap();
        match trace.status {
            RunStatus::Failed { fail_reason, .. } => assert_eq!(fail_reason, "singular_tangent_space"),
            RunStatus::Ok => panic!("expected a singular tangent space"),
        }
    }

    #[test]
    fn failures_are_recorded() {
        let grid = Grid::uniform(4, 2, 0.0, 1.0).unwrap();
        // Depth decays linearly in `a` and turns negative at a = 1.
        let basis = DMatrix::from_column_slice(8, 1, &[-1.0, -1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        let shift = DVector::from_column_slice(&[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let m = LinearManifold::with_shift(basis, shift).unwrap();
        let cfg = RomConfig {
            variant: RomVariant::Generic,
            tse: false,
            time: TimeConfig { dt: 0.1, t_end: 1.0, snapshot_stride: 1 },
            spec: DissipationSpec::Roe1,
            dissipation_scale: 1.0,
        };
        let trace = run_rom(&m, &Model::shallow_water(), &grid, &cfg, &RomState { a: vec![1.5], alpha: None })
            .unwrap();
        assert!(trace.failed());
        let mut js = Vec::new();
        trace.write_status_json(&mut js).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&js).unwrap();
        assert_eq!(v["status"], "failed");
        assert_eq!(v["fail_time"], 0.0);
    }
}
