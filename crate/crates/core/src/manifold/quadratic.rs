use nalgebra::{DMatrix, DVector};

use super::Manifold;
use crate::error::{check_len, Result};

pub fn n_quadratic_features(r: usize) -> usize {
    r * (r + 1) / 2
}

/// Half-vectorized symmetric products `a_i a_j`, `i ≤ j`, row by row.
pub fn quadratic_features(a: &[f64]) -> Vec<f64> {
    let r = a.len();
    let mut k = Vec::with_capacity(n_quadratic_features(r));
    for i in 0..r {
        for j in i..r {
            k.push(a[i] * a[j]);
        }
    }
    k
}

/// `φ(a) = shift + Φa + W k(a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticManifold {
    basis: DMatrix<f64>,
    w: DMatrix<f64>,
    shift: DVector<f64>,
}

impl QuadraticManifold {
    pub fn new(basis: DMatrix<f64>, w: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        check_len("quadratic coefficient rows", basis.nrows(), w.nrows())?;
        check_len(
            "quadratic coefficient columns",
            n_quadratic_features(basis.ncols()),
            w.ncols(),
        )?;
        check_len("shift", basis.nrows(), shift.len())?;
        Ok(Self { basis, w, shift })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn quadratic_coefficients(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }
}

impl Manifold for QuadraticManifold {
    fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn n_dof(&self) -> usize {
        self.basis.nrows()
    }

    fn decode(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_len("coordinates", self.dim(), a.len())?;
        let k = DVector::from_vec(quadratic_features(a));
        let u = &self.basis * DVector::from_column_slice(a) + &self.w * k + &self.shift;
        Ok(u.iter().copied().collect())
    }

    fn jacobian(&self, a: &[f64]) -> Result<DMatrix<f64>> {
        let r = self.dim();
        check_len("coordinates", r, a.len())?;
        // ∂k/∂a: column l of feature (i, j) is δ_il a_j + δ_jl a_i
        let mut dk = DMatrix::zeros(n_quadratic_features(r), r);
        let mut f = 0;
        for i in 0..r {
            for j in i..r {
                dk[(f, i)] += a[j];
                dk[(f, j)] += a[i];
                f += 1;
            }
        }
        Ok(&self.basis + &self.w * dk)
    }
}
