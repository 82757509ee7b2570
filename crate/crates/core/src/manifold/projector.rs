use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;

/// Above this ratio of extreme `|R_ii|` the QR solve is replaced by an SVD.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Above this singular value ratio the tangent space is treated as singular.
pub const SINGULAR_LIMIT: f64 = 1e14;

#[derive(Debug, Clone)]
enum Factor {
    Qr { q: DMatrix<f64>, r: DMatrix<f64> },
    Svd { u: DMatrix<f64>, s: DVector<f64>, v_t: DMatrix<f64> },
}

/// Factorization of `Ω_h^{1/2} J` giving the weighted pseudo-inverses
/// `J† = (JᵀΩ_hJ)⁻¹JᵀΩ_h` and `J⁺ = J†Ω_h⁻¹`.
#[derive(Debug, Clone)]
pub struct TangentSolver {
    factor: Factor,
    sqrt_w: Vec<f64>,
    condition: f64,
}

impl TangentSolver {
    pub fn new(jac: &DMatrix<f64>, grid: &Grid) -> Result<Self> {
        check_len("jacobian rows", grid.n_dof(), jac.nrows())?;
        let r = jac.ncols();
        if r == 0 || r > jac.nrows() {
            return Err(Error::InvalidArgument(format!(
                "jacobian with {} columns and {} rows has no left inverse",
                r,
                jac.nrows()
            )));
        }
        if jac.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("jacobian"));
        }
        let sqrt_w: Vec<f64> = (0..jac.nrows()).map(|i| grid.dof_width(i).sqrt()).collect();
        let mut wj = jac.clone();
        for (mut row, w) in wj.row_iter_mut().zip(&sqrt_w) {
            row *= *w;
        }
        let qr = wj.clone().qr();
        let rmat = qr.r();
        let diag: Vec<f64> = rmat.diagonal().iter().map(|d| d.abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if condition <= CONDITION_LIMIT {
            return Ok(Self {
                factor: Factor::Qr { q: qr.q(), r: rmat },
                sqrt_w,
                condition,
            });
        }
        let svd = wj.svd(true, true);
        let s = svd.singular_values.clone();
        let smax = s.max();
        let smin = s.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition <= SINGULAR_LIMIT) {
            return Err(Error::SingularTangentSpace { condition });
        }
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(Error::NonFinite("jacobian svd")),
        };
        Ok(Self {
            factor: Factor::Svd { u, s, v_t },
            sqrt_w,
            condition,
        })
    }

    /// Condition estimate of `Ω_h^{1/2} J`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn dim(&self) -> usize {
        match &self.factor {
            Factor::Qr { r, .. } => r.ncols(),
            Factor::Svd { s, .. } => s.len(),
        }
    }

    /// Least-squares solve of `Ω_h^{1/2} J x = b`.
    fn solve_weighted(&self, b: DVector<f64>) -> Result<Vec<f64>> {
        let x = match &self.factor {
            Factor::Qr { q, r } => r
                .solve_upper_triangular(&q.tr_mul(&b))
                .ok_or(Error::SingularTangentSpace {
                    condition: self.condition,
                })?,
            Factor::Svd { u, s, v_t } => {
                let c = u.tr_mul(&b).component_div(s);
                v_t.tr_mul(&c)
            }
        };
        Ok(x.iter().copied().collect())
    }

    /// Orthonormal basis of the range of `Ω_h^{1/2} J`.
    fn range(&self) -> &DMatrix<f64> {
        match &self.factor {
            Factor::Qr { q, .. } => q,
            Factor::Svd { u, .. } => u,
        }
    }

    /// `J†y`.
    pub fn pinv_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("volume vector", self.sqrt_w.len(), y.len())?;
        let b = DVector::from_iterator(y.len(), y.iter().zip(&self.sqrt_w).map(|(y, w)| y * w));
        self.solve_weighted(b)
    }

    /// `J⁺y = (JᵀΩ_hJ)⁻¹Jᵀy`.
    pub fn pinv_plus_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("volume vector", self.sqrt_w.len(), y.len())?;
        let b = DVector::from_iterator(y.len(), y.iter().zip(&self.sqrt_w).map(|(y, w)| y / w));
        self.solve_weighted(b)
    }

    /// `JJ†y`, the Ω_h-orthogonal projection onto the range of `J`.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("volume vector", self.sqrt_w.len(), y.len())?;
        let b = DVector::from_iterator(y.len(), y.iter().zip(&self.sqrt_w).map(|(y, w)| y * w));
        let q = self.range();
        let p = q * q.tr_mul(&b);
        Ok(p.iter().zip(&self.sqrt_w).map(|(p, w)| p / w).collect())
    }
}

/// `J†y` for a one-off solve.
pub fn pinv_apply(jac: &DMatrix<f64>, grid: &Grid, y: &[f64]) -> Result<Vec<f64>> {
    TangentSolver::new(jac, grid)?.pinv_apply(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    proptest::proptest! {
        #[test]
        fn omega_orthogonal_projection(
            entries in proptest::collection::vec(-1.0f64..1.0, 24),
            widths in proptest::collection::vec(0.1f64..2.0, 4),
            x in proptest::collection::vec(-1.0f64..1.0, 8),
            y in proptest::collection::vec(-1.0f64..1.0, 8),
        ) {
            let grid = Grid::from_widths(widths, 2, 0.0).unwrap();
            let jac = DMatrix::from_row_slice(8, 3, &entries);
            let solver = match TangentSolver::new(&jac, &grid) {
                Ok(s) => s,
                Err(_) => return Ok(()),
            };
            let tol = 1e-10 * solver.condition().max(1.0);
            let (px, py) = (solver.project(&x).unwrap(), solver.project(&y).unwrap());
            let ppx = solver.project(&px).unwrap();
            proptest::prop_assert!(px.iter().zip(&ppx).all(|(a, b)| (a - b).abs() <= tol));
            let lhs = grid.inner(&px, &y).unwrap();
            let rhs = grid.inner(&x, &py).unwrap();
            proptest::prop_assert!((lhs - rhs).abs() <= tol);
        }
    }
}
