//! Periodic 1-D finite-volume mesh and its difference and mass operators.
//!
//! Vectors of length `N_h = n_vars * n_cells` are stored variable-major: entry
//! `k * n_cells + i` holds variable `k` in cell `i`. Interface-based vectors use
//! the same layout, slot `i` holding interface `i + 1/2` (between cells `i` and
//! `i + 1`, wrapping at `N - 1/2`).

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_vars: usize,
    domain: (f64, f64),
    widths: Vec<f64>,
}

impl Grid {
    pub fn uniform(n_cells: usize, n_vars: usize, a: f64, b: f64) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::InvalidArgument("grid needs at least one cell".into()));
        }
        let dx = (b - a) / n_cells as f64;
        Self::from_widths(vec![dx; n_cells], n_vars, a)
    }

    pub fn from_widths(widths: Vec<f64>, n_vars: usize, a: f64) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one cell".into()));
        }
        if n_vars == 0 {
            return Err(Error::InvalidArgument("n_vars must be positive".into()));
        }
        if let Some(w) = widths.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "cell widths must be positive, got {w}"
            )));
        }
        if !a.is_finite() {
            return Err(Error::InvalidArgument("domain start must be finite".into()));
        }
        let b = a + widths.iter().sum::<f64>();
        Ok(Self {
            n_vars,
            domain: (a, b),
            widths,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.widths.len()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Total number of unknowns `N_h`.
    pub fn n_dof(&self) -> usize {
        self.n_vars * self.widths.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        let mut left = self.domain.0;
        self.widths
            .iter()
            .map(|w| {
                let c = left + 0.5 * w;
                left += w;
                c
            })
            .collect()
    }

    /// Cell width associated with a degree of freedom.
    #[inline]
    pub fn dof_width(&self, dof: usize) -> f64 {
        self.widths[dof % self.widths.len()]
    }

    /// `(I ⊗ Δ̄_v) y`: per variable block, `out_i = y_i - y_{i-1}` with periodic wrap.
    pub fn apply_delta_v(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("interface vector", self.n_dof(), y.len())?;
        let mut out = vec![0.0; y.len()];
        self.delta_v_into(y, &mut out);
        Ok(out)
    }

    /// `(I ⊗ Δ̄_i) y`: per variable block, `out_i = y_{i+1} - y_i` with periodic wrap.
    pub fn apply_delta_i(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("volume vector", self.n_dof(), y.len())?;
        let mut out = vec![0.0; y.len()];
        self.delta_i_into(y, &mut out);
        Ok(out)
    }

    pub fn mass_weight(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("volume vector", self.n_dof(), y.len())?;
        Ok(y.iter()
            .enumerate()
            .map(|(k, v)| v * self.dof_width(k))
            .collect())
    }

    pub fn mass_weight_inv(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("volume vector", self.n_dof(), y.len())?;
        Ok(y.iter()
            .enumerate()
            .map(|(k, v)| v / self.dof_width(k))
            .collect())
    }

    /// Ω_h-weighted inner product.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len("volume vector", self.n_dof(), x.len())?;
        check_len("volume vector", self.n_dof(), y.len())?;
        Ok(x.iter()
            .zip(y)
            .enumerate()
            .map(|(k, (a, b))| a * b * self.dof_width(k))
            .sum())
    }

    /// Ω_h-weighted norm.
    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        Ok(self.inner(x, x)?.sqrt())
    }

    pub(crate) fn delta_v_into(&self, y: &[f64], out: &mut [f64]) {
        let n = self.n_cells();
        for (yb, ob) in y.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            ob[0] = yb[0] - yb[n - 1];
            for i in 1..n {
                ob[i] = yb[i] - yb[i - 1];
            }
        }
    }

    pub(crate) fn delta_i_into(&self, y: &[f64], out: &mut [f64]) {
        let n = self.n_cells();
        for (yb, ob) in y.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            for i in 0..n - 1 {
                ob[i] = yb[i + 1] - yb[i];
            }
            ob[n - 1] = yb[0] - yb[n - 1];
        }
    }
}
