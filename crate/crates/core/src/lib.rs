//! Entropy-stable reduced order models of 1-D hyperbolic conservation laws on
//! linear, quadratic and rational quadratic manifolds.
//!
//! The pipeline is: [`fom`] (entropy-stable finite volumes, snapshots) →
//! [`fitting`] (POD, quadratic and rational quadratic decoders) → [`rom`]
//! (Galerkin ROMs with entropy projection and tangent space enrichment) →
//! [`diagnostics`].

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fitting;
pub mod grid;
pub mod initial;
pub mod io;
pub mod manifold;
pub mod fom;
pub mod physics;
pub mod rom;

pub use error::{Error, Result};
pub use grid::Grid;
pub use physics::{CellState, CellVec, DissipationSpec, Model};
