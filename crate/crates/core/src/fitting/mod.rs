//! Manifold construction from snapshot data: POD, entropy-variable snapshot
//! augmentation, quadratic ridge fits and rational quadratic row fits.

mod lm;
mod rational;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::fom::SnapshotSet;
use crate::manifold::{quadratic_features, Manifold, QuadraticManifold, n_quadratic_features};
use crate::physics::{CellVec, Model};

pub use lm::{levenberg_marquardt, LeastSquares, LmConfig, LmOutcome};
pub use rational::{fit_rational_quadratic, FitReport, RowFit};

/// Ridge coefficient of the quadratic fit used by the bundled experiments.
pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub r: usize,
    pub lambda: f64,
    pub lm: LmConfig,
    /// Fit rows on the rayon pool; disables warm starts.
    pub parallel_rows: bool,
    /// Start row `i` from the solution of row `i − 1` of the same variable.
    pub warm_start: bool,
    /// Also start from the least-squares numerator with a small denominator.
    pub multi_start: bool,
}

impl FitConfig {
    pub fn new(r: usize) -> Self {
        Self {
            r,
            lambda: DEFAULT_LAMBDA,
            lm: LmConfig::default(),
            parallel_rows: false,
            warm_start: true,
            multi_start: true,
        }
    }

    pub fn validate(&self, n_dof: usize, n_s: usize) -> Result<()> {
        if self.r == 0 || self.r > n_dof.min(n_s) {
            return Err(Error::InvalidArgument(format!(
                "reduced dimension r = {} must lie in [1, {}]",
                self.r,
                n_dof.min(n_s)
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidArgument("lambda must be non-negative".into()));
        }
        self.lm.validate()
    }
}

/// Leading `r` left singular vectors of `x` and all singular values.
///
/// Each basis vector is signed so that its largest-magnitude entry is positive.
pub fn pod_basis(x: &DMatrix<f64>, r: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let k = x.nrows().min(x.ncols());
    if r == 0 || r > k {
        return Err(Error::InvalidArgument(format!(
            "reduced dimension r = {r} must lie in [1, {k}]"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("snapshot matrix"));
    }
    let svd = x.clone().svd(true, false);
    let u = svd.u.ok_or(Error::NonFinite("snapshot svd"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut basis = DMatrix::zeros(x.nrows(), r);
    for (c, &src) in order.iter().take(r).enumerate() {
        let col = u.column(src);
        let pivot = col.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        basis.set_column(c, &(col * sign));
    }
    Ok((basis, sigma))
}

/// Generalized coordinates `A = (ΦᵀX)ᵀ`, one row per snapshot.
pub fn coordinates(basis: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_len("snapshot rows", basis.nrows(), x.nrows())?;
    Ok(x.tr_mul(basis))
}

/// `[X, η(X)]`: snapshots followed by their cell-wise entropy variables.
pub fn augment_snapshots(s: &SnapshotSet, model: &Model) -> Result<DMatrix<f64>> {
    s.validate()?;
    check_len("snapshot variables", model.n_vars(), s.n_vars)?;
    let n = s.n_cells;
    let n_s = s.n_snapshots();
    let mut out = DMatrix::zeros(s.n_dof(), 2 * n_s);
    out.columns_mut(0, n_s).copy_from(&s.data);
    for j in 0..n_s {
        for i in 0..n {
            let mut u = CellVec::zeros(s.n_vars);
            for k in 0..s.n_vars {
                u[k] = s.data[(k * n + i, j)];
            }
            let e = model.entropy_variables(&u).map_err(|e| e.at_cell(i))?;
            for k in 0..s.n_vars {
                out[(k * n + i, n_s + j)] = e[k];
            }
        }
    }
    Ok(out)
}

/// Quadratic features of every snapshot's coordinates, one column per snapshot.
fn feature_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    let r = a.ncols();
    let mut k = DMatrix::zeros(n_quadratic_features(r), a.nrows());
    for s in 0..a.nrows() {
        let row: Vec<f64> = a.row(s).iter().copied().collect();
        k.set_column(s, &DVector::from_vec(quadratic_features(&row)));
    }
    k
}

/// Quadratic manifold `Φa + W k(a)` with `W` the ridge solution of
/// `min ‖(X − ΦA ᵀ) − W K‖²_F + λ‖W‖²_F`.
pub fn fit_quadratic(x: &DMatrix<f64>, basis: &DMatrix<f64>, lambda: f64) -> Result<QuadraticManifold> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument("lambda must be non-negative".into()));
    }
    let a = coordinates(basis, x)?;
    let resid = x - basis * a.transpose();
    let k = feature_matrix(&a);
    let gram = &k * k.transpose() + DMatrix::identity(k.nrows(), k.nrows()) * lambda;
    let rhs = &k * resid.transpose();
    let wt = match (lambda > 0.0).then(|| gram.clone().cholesky()).flatten() {
        Some(ch) => ch.solve(&rhs),
        None => {
            let eps = 1e-12 * gram.amax().max(f64::MIN_POSITIVE);
            gram.pseudo_inverse(eps)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                * rhs
        }
    };
    QuadraticManifold::new(basis.clone(), wt.transpose(), DVector::zeros(x.nrows()))
}

/// `ε_xt = φ(A) − X` and its largest absolute entry.
pub fn reconstruction_error<M: Manifold + ?Sized>(
    m: &M,
    x: &DMatrix<f64>,
    a: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    check_len("coordinate rows", x.ncols(), a.nrows())?;
    check_len("coordinate columns", m.dim(), a.ncols())?;
    check_len("snapshot rows", m.n_dof(), x.nrows())?;
    let mut eps = DMatrix::zeros(x.nrows(), x.ncols());
    for j in 0..x.ncols() {
        let coords: Vec<f64> = a.row(j).iter().copied().collect();
        let u = m.decode(&coords)?;
        for i in 0..x.nrows() {
            eps[(i, j)] = u[i] - x[(i, j)];
        }
    }
    let max = eps.amax();
    Ok((eps, max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::LinearManifold;

    #[test]
    fn pod_rank_one() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let (phi, s) = pod_basis(&x, 1).unwrap();
        let rec = &phi * phi.transpose() * &x;
        assert!((rec - &x).amax() < 1e-12);
        assert!((phi.transpose() * &phi)[(0, 0)] - 1.0 < 1e-12);
        assert!(s[0] >= s[1] && s[1] >= 0.0);
        assert!(phi.iter().all(|v| *v > 0.0));
        assert!(pod_basis(&x, 3).is_err());
    }

    #[test]
    fn quadratic_ridge_limits() {
        let x = DMatrix::from_fn(6, 5, |i, j| ((i + 1) as f64 * 0.3 * (j as f64 + 0.5)).sin());
        let (phi, _) = pod_basis(&x, 2).unwrap();
        let a = coordinates(&phi, &x).unwrap();
        let huge = fit_quadratic(&x, &phi, 1e14).unwrap();
        assert!(huge.quadratic_coefficients().amax() < 1e-8);
        let lin = LinearManifold::new(phi.clone());
        let quad = fit_quadratic(&x, &phi, 0.0).unwrap();
        let e_lin = reconstruction_error(&lin, &x, &a).unwrap().0.norm();
        let e_quad = reconstruction_error(&quad, &x, &a).unwrap().0.norm();
        assert!(e_quad <= e_lin + 1e-12, "{e_quad} > {e_lin}");
    }

    #[test]
    fn identity_decoder_has_zero_error() {
        let x = DMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64);
        let id = LinearManifold::new(DMatrix::identity(4, 4));
        let (eps, max) = reconstruction_error(&id, &x, &x.transpose()).unwrap();
        assert_eq!(max, 0.0);
        assert_eq!(eps, DMatrix::zeros(4, 3));
    }

    #[test]
    fn augmentation_for_burgers_duplicates() {
        let g = crate::grid::Grid::uniform(3, 1, 0.0, 1.0).unwrap();
        let s = SnapshotSet::new(
            DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            vec![0.0, 1.0],
            &g,
        )
        .unwrap();
        let aug = augment_snapshots(&s, &Model::Burgers).unwrap();
        assert_eq!(aug.ncols(), 4);
        assert_eq!(aug.columns(2, 2), s.data.columns(0, 2));
    }
}
