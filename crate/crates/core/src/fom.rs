//! Entropy-stable finite-volume full order model.
//!
//! The semi-discretization is `Ω_h du/dt = −Δ_v f*_h(u) + Δ_v D_h(u) Δ_i η_h`,
//! with `f*_h` the interface vector of entropy conservative fluxes and
//! `D_h Δ_i η_h` the interface vector of dissipation terms.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::physics::{
    dissipation_apply, minmod, small_matvec, small_matvec_t, CellState, CellVec,
    DissipationSpec, Model,
};

/// Factor multiplying `D_{i+1/2}Δη` in the interface flux,
/// `f_{i+1/2} = f* − ½ D_{i+1/2} Δη_{i+1/2}` (the usual Lax–Friedrichs / Roe scaling).
pub const DEFAULT_DISSIPATION_SCALE: f64 = 0.5;

/// Interface-based vectors produced by one evaluation of the numerical fluxes.
#[derive(Debug, Clone)]
pub struct InterfaceTerms {
    /// `f*_h`, entropy conservative fluxes.
    pub ec_flux: Vec<f64>,
    /// `D_h Δ_i η_h`, dissipation terms (including the dissipation scale).
    pub dissipation: Vec<f64>,
}

/// Spatial operator bound to a model, grid and dissipation choice.
#[derive(Debug, Clone, Copy)]
pub struct SemiDiscretization<'a> {
    model: Model,
    grid: &'a Grid,
    spec: DissipationSpec,
    scale: f64,
}

impl<'a> SemiDiscretization<'a> {
    pub fn new(model: Model, grid: &'a Grid, spec: DissipationSpec) -> Result<Self> {
        model.validate()?;
        spec.validate_for(&model)?;
        if grid.n_vars() != model.n_vars() {
            return Err(Error::InvalidArgument(format!(
                "grid carries {} variables but {} needs {}",
                grid.n_vars(),
                model,
                model.n_vars()
            )));
        }
        Ok(Self {
            model,
            grid,
            spec,
            scale: DEFAULT_DISSIPATION_SCALE,
        })
    }

    /// Replaces the factor applied to the dissipation operator.
    pub fn with_dissipation_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dissipation scale must be non-negative, got {scale}"
            )));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn dissipation_scale(&self) -> f64 {
        self.scale
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn grid(&self) -> &'a Grid {
        self.grid
    }

    pub fn spec(&self) -> DissipationSpec {
        self.spec
    }

    /// Gathers the per-cell states of a variable-major vector, checking
    /// admissibility.
    pub fn cell_states(&self, u_h: &[f64]) -> Result<Vec<CellState>> {
        check_len("state vector", self.grid.n_dof(), u_h.len())?;
        let n = self.grid.n_cells();
        let nv = self.model.n_vars();
        (0..n)
            .map(|i| {
                let mut u = CellVec::zeros(nv);
                for k in 0..nv {
                    u[k] = u_h[k * n + i];
                }
                self.model.check(&u).map(|_| u).map_err(|e| e.at_cell(i))
            })
            .collect()
    }

    pub fn scatter(&self, cells: &[CellVec]) -> Vec<f64> {
        let n = cells.len();
        let nv = self.model.n_vars();
        let mut out = vec![0.0; n * nv];
        for (i, c) in cells.iter().enumerate() {
            for k in 0..nv {
                out[k * n + i] = c[k];
            }
        }
        out
    }

    pub fn entropy_variables_cells(&self, states: &[CellState]) -> Result<Vec<CellVec>> {
        states
            .iter()
            .enumerate()
            .map(|(i, u)| self.model.entropy_variables(u).map_err(|e| e.at_cell(i)))
            .collect()
    }

    /// Entropy variables `η_h(u_h)` as a volume vector.
    pub fn entropy_variables(&self, u_h: &[f64]) -> Result<Vec<f64>> {
        let states = self.cell_states(u_h)?;
        Ok(self.scatter(&self.entropy_variables_cells(&states)?))
    }

    /// Inverse entropy map applied cell-wise; errors carry the failing cell.
    pub fn states_from_entropy_variables(&self, eta_h: &[f64]) -> Result<Vec<CellState>> {
        check_len("entropy variable vector", self.grid.n_dof(), eta_h.len())?;
        let n = self.grid.n_cells();
        let nv = self.model.n_vars();
        (0..n)
            .map(|i| {
                let mut e = CellVec::zeros(nv);
                for k in 0..nv {
                    e[k] = eta_h[k * n + i];
                }
                self.model
                    .entropy_variables_inverse(&e)
                    .map_err(|err| err.at_cell(i))
            })
            .collect()
    }

    /// Total entropy `S_h = Σ_i Δx_i s(u_i)`.
    pub fn total_entropy(&self, u_h: &[f64]) -> Result<f64> {
        let states = self.cell_states(u_h)?;
        self.total_entropy_cells(&states)
    }

    pub fn total_entropy_cells(&self, states: &[CellState]) -> Result<f64> {
        states
            .iter()
            .zip(self.grid.widths())
            .map(|(u, w)| Ok(w * self.model.entropy(u)?))
            .sum()
    }

    /// Evaluates `f*_h` and `D_h Δ_i η_h` from cell states and the entropy
    /// variables to difference (normally `η(states)`, or projected entropy
    /// variables in the entropy-stable ROM).
    pub fn interface_terms(&self, states: &[CellState], etas: &[CellVec]) -> Result<InterfaceTerms> {
        let n = self.grid.n_cells();
        check_len("cell states", n, states.len())?;
        check_len("cell entropy variables", n, etas.len())?;
        let nv = self.model.n_vars();
        let mut ec_flux = vec![0.0; n * nv];
        let mut dissipation = vec![0.0; n * nv];
        for i in 0..n {
            let ip = (i + 1) % n;
            let (ul, ur) = (&states[i], &states[ip]);
            let f = self.model.ec_flux(ul, ur).map_err(|e| e.at_cell(i))?;
            let d = match self.spec {
                DissipationSpec::None => CellVec::zeros(nv),
                DissipationSpec::Llf | DissipationSpec::Roe1 => {
                    let jump = etas[ip].map2(&etas[i], |a, b| a - b);
                    dissipation_apply(ul, ur, &jump, self.spec, &self.model)
                        .map_err(|e| e.at_cell(i))?
                }
                DissipationSpec::Tecno2Minmod => self.reconstructed_dissipation(states, etas, i)?,
            };
            for k in 0..nv {
                ec_flux[k * n + i] = f[k];
                dissipation[k * n + i] = self.scale * d[k];
            }
        }
        Ok(InterfaceTerms {
            ec_flux,
            dissipation,
        })
    }

    /// `R̃|Λ|⟨⟨w⟩⟩` at interface `i + 1/2`, where `⟨⟨w⟩⟩` is the jump of the
    /// minmod-reconstructed scaled entropy variables `w = R̃ᵀη`.
    fn reconstructed_dissipation(
        &self,
        states: &[CellState],
        etas: &[CellVec],
        i: usize,
    ) -> Result<CellVec> {
        let n = states.len();
        let ip = (i + 1) % n;
        let avg = states[i].map2(&states[ip], |a, b| 0.5 * (a + b));
        let (r, lam) = self.model.scaled_eigensystem(&avg).map_err(|e| e.at_cell(i))?;
        let w = |k: usize| small_matvec_t(&r, &etas[k]);
        let (wm, w0, w1, w2) = (w((i + n - 1) % n), w(i), w(ip), w((i + 2) % n));
        let mut jump = CellVec::zeros(self.model.n_vars());
        for k in 0..jump.len() {
            let left = w0[k] + 0.5 * minmod(w1[k] - w0[k], w0[k] - wm[k]);
            let right = w1[k] - 0.5 * minmod(w2[k] - w1[k], w1[k] - w0[k]);
            jump[k] = lam[k].abs() * (right - left);
        }
        Ok(small_matvec(&r, &jump))
    }

    /// `−Δ_v f*_h + Δ_v D_h Δ_i η_h` (before the mass matrix solve).
    pub fn flux_divergence(&self, terms: &InterfaceTerms) -> Vec<f64> {
        let net: Vec<f64> = terms
            .dissipation
            .iter()
            .zip(&terms.ec_flux)
            .map(|(d, f)| d - f)
            .collect();
        let mut out = vec![0.0; net.len()];
        self.grid.delta_v_into(&net, &mut out);
        out
    }

    /// `du_h/dt`.
    pub fn rhs(&self, u_h: &[f64]) -> Result<Vec<f64>> {
        let states = self.cell_states(u_h)?;
        let etas = self.entropy_variables_cells(&states)?;
        let terms = self.interface_terms(&states, &etas)?;
        let mut out = self.flux_divergence(&terms);
        for (k, v) in out.iter_mut().enumerate() {
            *v /= self.grid.dof_width(k);
        }
        Ok(out)
    }

    /// `(−ηᵀΔ_v f*, ηᵀΔ_v D Δ_i η)` for the given entropy variables and terms.
    pub fn rate_split(&self, eta_h: &[f64], terms: &InterfaceTerms) -> (f64, f64) {
        let mut tmp = vec![0.0; eta_h.len()];
        self.grid.delta_v_into(&terms.ec_flux, &mut tmp);
        let cons = -dot(eta_h, &tmp);
        self.grid.delta_v_into(&terms.dissipation, &mut tmp);
        let diss = dot(eta_h, &tmp);
        (cons, diss)
    }

    pub fn entropy_rate_split(&self, u_h: &[f64]) -> Result<(f64, f64)> {
        let states = self.cell_states(u_h)?;
        let etas = self.entropy_variables_cells(&states)?;
        let terms = self.interface_terms(&states, &etas)?;
        Ok(self.rate_split(&self.scatter(&etas), &terms))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn fom_rhs(u_h: &[f64], model: &Model, grid: &Grid, spec: DissipationSpec) -> Result<Vec<f64>> {
    SemiDiscretization::new(*model, grid, spec)?.rhs(u_h)
}

pub fn fom_entropy_rate_split(
    u_h: &[f64],
    model: &Model,
    grid: &Grid,
    spec: DissipationSpec,
) -> Result<(f64, f64)> {
    SemiDiscretization::new(*model, grid, spec)?.entropy_rate_split(u_h)
}

/// One classical RK4 step of `dy/dt = rhs(y)`.
pub fn rk4_step<F>(y: &[f64], dt: f64, mut rhs: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let k1 = rhs(y)?;
    rk4_step_from(y, &k1, dt, rhs)
}

/// RK4 step with the first stage `k1 = rhs(y)` already evaluated.
pub fn rk4_step_from<F>(y: &[f64], k1: &[f64], dt: f64, mut rhs: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    check_len("first stage", y.len(), k1.len())?;
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };
    let k2 = rhs(&axpy(0.5 * dt, k1))?;
    let k3 = rhs(&axpy(0.5 * dt, &k2))?;
    let k4 = rhs(&axpy(dt, &k3))?;
    let out: Vec<f64> = (0..y.len())
        .map(|j| y[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rk4 update"));
    }
    Ok(out)
}

/// Number of RK4 steps covering `[0, t_end]` with step `dt`.
pub fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(Error::InvalidArgument("dt and t_end must be positive".into()));
    }
    let steps = (t_end / dt).round();
    if (steps * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "t_end = {t_end} is not a multiple of dt = {dt}"
        )));
    }
    Ok(steps as usize)
}

/// Time stepping controls shared by the FOM and ROM drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
}

/// Full-order state at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FomState {
    pub u_h: Vec<f64>,
    pub t: f64,
}

/// Snapshot matrix `X` (one column per stored time) with grid metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub data: DMatrix<f64>,
    pub times: Vec<f64>,
    pub n_vars: usize,
    pub n_cells: usize,
    pub domain: (f64, f64),
}

impl SnapshotSet {
    pub fn new(data: DMatrix<f64>, times: Vec<f64>, grid: &Grid) -> Result<Self> {
        let s = Self {
            data,
            times,
            n_vars: grid.n_vars(),
            n_cells: grid.n_cells(),
            domain: grid.domain(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_len("snapshot rows", self.n_vars * self.n_cells, self.data.nrows())?;
        check_len("snapshot times", self.data.ncols(), self.times.len())?;
        if self.times.len() < 2 {
            return Err(Error::InvalidArgument("need at least two snapshots".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("snapshot times must increase".into()));
        }
        Ok(())
    }

    pub fn n_snapshots(&self) -> usize {
        self.data.ncols()
    }

    pub fn n_dof(&self) -> usize {
        self.data.nrows()
    }

    /// Uniform grid matching the stored metadata.
    pub fn grid(&self) -> Result<Grid> {
        Grid::uniform(self.n_cells, self.n_vars, self.domain.0, self.domain.1)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).iter().copied().collect()
    }

    /// Index of the stored snapshot closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let mut best = 0;
        for (j, tj) in self.times.iter().enumerate() {
            if (tj - t).abs() < (self.times[best] - t).abs() {
                best = j;
            }
        }
        best
    }
}

/// Entropy budget at one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropySample {
    pub t: f64,
    pub total: f64,
    pub rate_cons: f64,
    pub rate_diss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntropyTrace {
    pub samples: Vec<EntropySample>,
}

impl EntropyTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,S_h,rate_cons,rate_diss")?;
        for s in &self.samples {
            writeln!(w, "{:e},{:e},{:e},{:e}", s.t, s.total, s.rate_cons, s.rate_diss)?;
        }
        Ok(())
    }
}

/// Samples a pointwise initial condition at cell centres.
pub fn sample_initial_condition<F>(grid: &Grid, ic: F) -> Vec<f64>
where
    F: Fn(f64) -> CellState,
{
    let n = grid.n_cells();
    let nv = grid.n_vars();
    let mut u = vec![0.0; n * nv];
    for (i, x) in grid.cell_centers().into_iter().enumerate() {
        let s = ic(x);
        for k in 0..nv {
            u[k * n + i] = s[k];
        }
    }
    u
}

/// Integrates the FOM with RK4, storing a snapshot every `snapshot_stride`
/// steps (including `t = 0`) and the entropy budget at every step.
pub fn run_fom(
    u0: &[f64],
    model: &Model,
    grid: &Grid,
    time: TimeConfig,
    spec: DissipationSpec,
) -> Result<(SnapshotSet, EntropyTrace)> {
    integrate_fom(&SemiDiscretization::new(*model, grid, spec)?, u0, time)
}

/// [`run_fom`] for a configured semi-discretization.
pub fn integrate_fom(
    sd: &SemiDiscretization,
    u0: &[f64],
    time: TimeConfig,
) -> Result<(SnapshotSet, EntropyTrace)> {
    let grid = sd.grid();
    check_len("initial condition", grid.n_dof(), u0.len())?;
    if time.snapshot_stride == 0 {
        return Err(Error::InvalidArgument("snapshot stride must be at least 1".into()));
    }
    let steps = step_count(time.dt, time.t_end)?;
    let n_s = steps / time.snapshot_stride + 1;
    let mut data = DMatrix::zeros(grid.n_dof(), n_s);
    let mut times = Vec::with_capacity(n_s);
    let mut trace = EntropyTrace::default();

    let mut u = u0.to_vec();
    for step in 0..=steps {
        let t = step as f64 * time.dt;
        let mut advance = || -> Result<Vec<f64>> {
            let states = sd.cell_states(&u)?;
            let etas = sd.entropy_variables_cells(&states)?;
            let terms = sd.interface_terms(&states, &etas)?;
            let (rate_cons, rate_diss) = sd.rate_split(&sd.scatter(&etas), &terms);
            trace.samples.push(EntropySample {
                t,
                total: sd.total_entropy_cells(&states)?,
                rate_cons,
                rate_diss,
            });
            if step % time.snapshot_stride == 0 {
                data.set_column(times.len(), &nalgebra::DVector::from_column_slice(&u));
                times.push(t);
            }
            if step == steps {
                return Ok(Vec::new());
            }
            let mut k1 = sd.flux_divergence(&terms);
            for (k, v) in k1.iter_mut().enumerate() {
                *v /= grid.dof_width(k);
            }
            rk4_step_from(&u, &k1, time.dt, |y| sd.rhs(y))
        };
        match advance() {
            Ok(next) => u = next,
            Err(e) => {
                log::error!("full order model failed at t = {t}: {e}");
                return Err(e);
            }
        }
    }
    Ok((SnapshotSet::new(data, times, grid)?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_state_has_zero_rhs() {
        let g = Grid::uniform(8, 2, 0.0, 1.0).unwrap();
        let mut u = vec![1.3; 8];
        u.extend(vec![0.4; 8]);
        for spec in [DissipationSpec::None, DissipationSpec::Roe1, DissipationSpec::Tecno2Minmod] {
            let r = fom_rhs(&u, &Model::shallow_water(), &g, spec).unwrap();
            assert!(r.iter().all(|v| v.abs() < 1e-13), "{spec}: {r:?}");
        }
    }

    #[test]
    fn burgers_three_cell_rhs() {
        let g = Grid::uniform(3, 1, 0.0, 3.0).unwrap();
        let r = fom_rhs(&[0.0, 1.0, 2.0], &Model::Burgers, &g, DissipationSpec::None).unwrap();
        let expect = [0.5, -1.0, 0.5];
        for (a, b) in r.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rhs_reports_inadmissible_cell() {
        let g = Grid::uniform(4, 2, 0.0, 1.0).unwrap();
        let u = [1.0, 1.0, -0.5, 1.0, 0.0, 0.0, 0.0, 0.0];
        match fom_rhs(&u, &Model::shallow_water(), &g, DissipationSpec::None) {
            Err(Error::Inadmissible { cell: Some(2), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rk4_examples() {
        let y = rk4_step(&[2.0, -1.0], 0.3, |y| Ok(vec![0.0; y.len()])).unwrap();
        assert_eq!(y, vec![2.0, -1.0]);
        let h: f64 = 0.1;
        let y1 = rk4_step(&[1.0], h, |y| Ok(vec![-y[0]])).unwrap()[0];
        let amp = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((y1 - amp).abs() < 1e-15);
        assert!((y1 - 0.9048375).abs() < 1e-7);
        assert!(rk4_step(&[1.0], 0.0, |y| Ok(y.to_vec())).is_err());
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut y = vec![1.0];
            for _ in 0..n {
                y = rk4_step(&y, dt, |y| Ok(vec![-y[0]])).unwrap();
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(10) / err(20);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn step_counts() {
        assert_eq!(step_count(0.001, 1.0).unwrap(), 1000);
        assert_eq!(step_count(0.0001, 0.5).unwrap(), 5000);
        assert!(step_count(0.3, 1.0).is_err());
    }

    #[test]
    fn snapshot_count_and_times() {
        let g = Grid::uniform(16, 1, 0.0, 1.0).unwrap();
        let u0 = sample_initial_condition(&g, |x| {
            CellState::from_slice(&[(2.0 * std::f64::consts::PI * x).sin() + 1.0])
        });
        let time = TimeConfig {
            dt: 0.01,
            t_end: 0.1,
            snapshot_stride: 5,
        };
        let (snaps, trace) = run_fom(&u0, &Model::Burgers, &g, time, DissipationSpec::Llf).unwrap();
        assert_eq!(snaps.n_snapshots(), 3);
        assert_eq!(trace.samples.len(), 11);
        assert!((snaps.times[2] - 0.1).abs() < 1e-15);
        assert_eq!(snaps.column(0), u0);
    }

    #[test]
    fn entropy_csv_header() {
        let trace = EntropyTrace {
            samples: vec![EntropySample {
                t: 0.0,
                total: 1.0,
                rate_cons: 0.0,
                rate_diss: -1.0,
            }],
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,S_h,rate_cons,rate_diss\n"));
    }
}
