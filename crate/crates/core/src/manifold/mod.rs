//! Decoders `φ: ℝʳ → ℝ^{N_h}` with Jacobians, tangent space enrichment and the
//! Ω_h-weighted pseudo-inverse of a Jacobian.

mod linear;
mod projector;
mod quadratic;
mod rational;
mod tse;

use nalgebra::DMatrix;

use crate::error::Result;

pub use linear::LinearManifold;
pub use projector::{pinv_apply, TangentSolver, CONDITION_LIMIT, SINGULAR_LIMIT};
pub use quadratic::{n_quadratic_features, quadratic_features, QuadraticManifold};
pub use rational::RationalQuadraticManifold;
pub use tse::TseManifold;

pub trait Manifold: Send + Sync {
    /// Number of generalized coordinates.
    fn dim(&self) -> usize;
    /// Length of decoded vectors.
    fn n_dof(&self) -> usize;
    fn decode(&self, a: &[f64]) -> Result<Vec<f64>>;
    /// `∂φ/∂a`, an `N_h × dim` matrix.
    fn jacobian(&self, a: &[f64]) -> Result<DMatrix<f64>>;
}

impl<M: Manifold + ?Sized> Manifold for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn n_dof(&self) -> usize {
        (**self).n_dof()
    }
    fn decode(&self, a: &[f64]) -> Result<Vec<f64>> {
        (**self).decode(a)
    }
    fn jacobian(&self, a: &[f64]) -> Result<DMatrix<f64>> {
        (**self).jacobian(a)
    }
}

impl<M: Manifold + ?Sized> Manifold for Box<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn n_dof(&self) -> usize {
        (**self).n_dof()
    }
    fn decode(&self, a: &[f64]) -> Result<Vec<f64>> {
        (**self).decode(a)
    }
    fn jacobian(&self, a: &[f64]) -> Result<DMatrix<f64>> {
        (**self).jacobian(a)
    }
}

/// Serializable decoder of any stored kind.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyManifold {
    Linear(LinearManifold),
    Quadratic(QuadraticManifold),
    Rational(RationalQuadraticManifold),
}

impl AnyManifold {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyManifold::Linear(_) => "linear",
            AnyManifold::Quadratic(_) => "quadratic",
            AnyManifold::Rational(_) => "rational",
        }
    }

    fn inner(&self) -> &dyn Manifold {
        match self {
            AnyManifold::Linear(m) => m,
            AnyManifold::Quadratic(m) => m,
            AnyManifold::Rational(m) => m,
        }
    }
}

impl Manifold for AnyManifold {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn n_dof(&self) -> usize {
        self.inner().n_dof()
    }
    fn decode(&self, a: &[f64]) -> Result<Vec<f64>> {
        self.inner().decode(a)
    }
    fn jacobian(&self, a: &[f64]) -> Result<DMatrix<f64>> {
        self.inner().jacobian(a)
    }
}

impl From<LinearManifold> for AnyManifold {
    fn from(m: LinearManifold) -> Self {
        AnyManifold::Linear(m)
    }
}

impl From<QuadraticManifold> for AnyManifold {
    fn from(m: QuadraticManifold) -> Self {
        AnyManifold::Quadratic(m)
    }
}

impl From<RationalQuadraticManifold> for AnyManifold {
    fn from(m: RationalQuadraticManifold) -> Self {
        AnyManifold::Rational(m)
    }
}

/// Central finite-difference Jacobian, used to check analytic Jacobians.
pub fn finite_difference_jacobian<M: Manifold + ?Sized>(
    m: &M,
    a: &[f64],
    step: f64,
) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(m.n_dof(), a.len());
    let mut x = a.to_vec();
    for j in 0..a.len() {
        x[j] = a[j] + step;
        let plus = m.decode(&x)?;
        x[j] = a[j] - step;
        let minus = m.decode(&x)?;
        x[j] = a[j];
        for i in 0..plus.len() {
            out[(i, j)] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    Ok(out)
}
