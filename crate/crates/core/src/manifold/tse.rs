use nalgebra::DMatrix;

use super::Manifold;
use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::physics::{CellVec, Model};

/// Tangent space enrichment of a base decoder:
/// `φ̂(a, α) = φ(a) + η(φ(a)) α`, with coordinates `[a, α]`.
#[derive(Debug, Clone)]
pub struct TseManifold<M> {
    base: M,
    model: Model,
    n_cells: usize,
}

impl<M: Manifold> TseManifold<M> {
    pub fn new(base: M, model: Model, grid: &Grid) -> Result<Self> {
        check_len("decoded state", grid.n_dof(), base.n_dof())?;
        if grid.n_vars() != model.n_vars() {
            return Err(Error::InvalidArgument(format!(
                "grid carries {} variables, {} needs {}",
                grid.n_vars(),
                model,
                model.n_vars()
            )));
        }
        Ok(Self {
            base,
            model,
            n_cells: grid.n_cells(),
        })
    }

    pub fn base(&self) -> &M {
        &self.base
    }

    fn cell(&self, u: &[f64], i: usize) -> CellVec {
        let mut c = CellVec::zeros(self.model.n_vars());
        for k in 0..c.len() {
            c[k] = u[k * self.n_cells + i];
        }
        c
    }

    /// `η(u)` of a decoded state, as a volume vector.
    fn entropy_variables(&self, u: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_cells;
        let mut eta = vec![0.0; u.len()];
        for i in 0..n {
            let e = self
                .model
                .entropy_variables(&self.cell(u, i))
                .map_err(|e| e.at_cell(i))?;
            for k in 0..e.len() {
                eta[k * n + i] = e[k];
            }
        }
        Ok(eta)
    }

    pub fn tse_decode(&self, a: &[f64], alpha: f64) -> Result<Vec<f64>> {
        let u = self.base.decode(a)?;
        if alpha == 0.0 {
            return Ok(u);
        }
        let eta = self.entropy_variables(&u)?;
        Ok(u.iter().zip(&eta).map(|(u, e)| u + alpha * e).collect())
    }

    /// `[(I + α ∂η/∂u) J, η(φ(a))]`.
    pub fn tse_jacobian(&self, a: &[f64], alpha: f64) -> Result<DMatrix<f64>> {
        let u = self.base.decode(a)?;
        let eta = self.entropy_variables(&u)?;
        let jac = self.base.jacobian(a)?;
        let r = jac.ncols();
        let n = self.n_cells;
        let nv = self.model.n_vars();
        let mut out = DMatrix::zeros(jac.nrows(), r + 1);
        out.columns_mut(0, r).copy_from(&jac);
        if alpha != 0.0 {
            for i in 0..n {
                let h = self
                    .model
                    .entropy_hessian_block(&self.cell(&u, i))
                    .map_err(|e| e.at_cell(i))?;
                for c in 0..r {
                    for k in 0..nv {
                        let hj: f64 = (0..nv).map(|m| h[k][m] * jac[(m * n + i, c)]).sum();
                        out[(k * n + i, c)] += alpha * hj;
                    }
                }
            }
        }
        for (dst, e) in out.column_mut(r).iter_mut().zip(&eta) {
            *dst = *e;
        }
        Ok(out)
    }

    fn split<'c>(&self, coords: &'c [f64]) -> Result<(&'c [f64], f64)> {
        check_len("enriched coordinates", self.base.dim() + 1, coords.len())?;
        let (a, alpha) = coords.split_at(self.base.dim());
        Ok((a, alpha[0]))
    }
}

impl<M: Manifold> Manifold for TseManifold<M> {
    fn dim(&self) -> usize {
        self.base.dim() + 1
    }

    fn n_dof(&self) -> usize {
        self.base.n_dof()
    }

    fn decode(&self, coords: &[f64]) -> Result<Vec<f64>> {
        let (a, alpha) = self.split(coords)?;
        self.tse_decode(a, alpha)
    }

    fn jacobian(&self, coords: &[f64]) -> Result<DMatrix<f64>> {
        let (a, alpha) = self.split(coords)?;
        self.tse_jacobian(a, alpha)
    }
}
