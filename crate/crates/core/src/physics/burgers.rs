use super::{CellState, CellVec};

pub(super) fn flux(u: &CellState) -> CellVec {
    CellVec::from_slice(&[0.5 * u[0] * u[0]])
}

pub(super) fn entropy(u: &CellState) -> f64 {
    0.5 * u[0] * u[0]
}

pub(super) fn entropy_variables(u: &CellState) -> CellVec {
    *u
}

pub(super) fn entropy_variables_inverse(eta: &CellVec) -> CellState {
    *eta
}

pub(super) fn ec_flux(u_l: &CellState, u_r: &CellState) -> CellVec {
    let (a, b) = (u_l[0], u_r[0]);
    CellVec::from_slice(&[(a * a + a * b + b * b) / 6.0])
}
