use nalgebra::{DMatrix, DVector};

use super::Manifold;
use crate::error::{check_len, Error, Result};
use crate::grid::Grid;

/// `φ(a) = shift + Φa`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearManifold {
    basis: DMatrix<f64>,
    shift: DVector<f64>,
}

impl LinearManifold {
    pub fn new(basis: DMatrix<f64>) -> Self {
        let shift = DVector::zeros(basis.nrows());
        Self { basis, shift }
    }

    pub fn with_shift(basis: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        check_len("shift", basis.nrows(), shift.len())?;
        Ok(Self { basis, shift })
    }

    /// `Φ` rescaled to be Ω_h-orthonormal (`ΦᵀΩ_hΦ = I`), via QR of `Ω_h^{1/2}Φ`.
    pub fn omega_orthonormal(basis: &DMatrix<f64>, grid: &Grid) -> Result<Self> {
        check_len("basis rows", grid.n_dof(), basis.nrows())?;
        if basis.ncols() == 0 {
            return Ok(Self::new(basis.clone()));
        }
        let mut w = basis.clone();
        for (i, mut row) in w.row_iter_mut().enumerate() {
            row *= grid.dof_width(i).sqrt();
        }
        let qr = w.qr();
        let r = qr.r();
        if r.diagonal().iter().any(|d| d.abs() < 1e-14) {
            return Err(Error::InvalidArgument("basis is rank deficient".into()));
        }
        let mut q = qr.q();
        // keep the column orientation of the input basis
        for (j, d) in r.diagonal().iter().enumerate() {
            if *d < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        for (i, mut row) in q.row_iter_mut().enumerate() {
            row /= grid.dof_width(i).sqrt();
        }
        Ok(Self::new(q))
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    /// Coordinates `Φᵀ(x − shift)`.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("state", self.basis.nrows(), x.len())?;
        let d = DVector::from_column_slice(x) - &self.shift;
        Ok(self.basis.tr_mul(&d).iter().copied().collect())
    }
}

impl Manifold for LinearManifold {
    fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn n_dof(&self) -> usize {
        self.basis.nrows()
    }

    fn decode(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_len("coordinates", self.dim(), a.len())?;
        let u = &self.basis * DVector::from_column_slice(a) + &self.shift;
        Ok(u.iter().copied().collect())
    }

    fn jacobian(&self, a: &[f64]) -> Result<DMatrix<f64>> {
        check_len("coordinates", self.dim(), a.len())?;
        Ok(self.basis.clone())
    }
}
