use super::{CellState, CellVec, SmallMat, MAX_VARS};

pub(super) fn flux(u: &CellState, g: f64) -> CellVec {
    let (h, m) = (u[0], u[1]);
    CellVec::from_slice(&[m, m * m / h + 0.5 * g * h * h])
}

pub(super) fn entropy(u: &CellState, g: f64) -> f64 {
    let (h, m) = (u[0], u[1]);
    0.5 * (m * m / h + g * h * h)
}

pub(super) fn entropy_variables(u: &CellState, g: f64) -> CellVec {
    let vel = u[1] / u[0];
    CellVec::from_slice(&[g * u[0] - 0.5 * vel * vel, vel])
}

pub(super) fn entropy_variables_inverse(eta: &CellVec, g: f64) -> Option<CellState> {
    let h = (2.0 * eta[0] + eta[1] * eta[1]) / (2.0 * g);
    (h > 0.0).then(|| CellVec::from_slice(&[h, h * eta[1]]))
}

pub(super) fn ec_flux(u_l: &CellState, u_r: &CellState, g: f64) -> CellVec {
    let h_bar = 0.5 * (u_l[0] + u_r[0]);
    let v_bar = 0.5 * (u_l[1] / u_l[0] + u_r[1] / u_r[0]);
    let h2_bar = 0.5 * (u_l[0] * u_l[0] + u_r[0] * u_r[0]);
    CellVec::from_slice(&[h_bar * v_bar, h_bar * v_bar * v_bar + 0.5 * g * h2_bar])
}

pub(super) fn entropy_hessian(u: &CellState, g: f64) -> SmallMat {
    let h = u[0];
    let v = u[1] / h;
    let mut m = [[0.0; MAX_VARS]; MAX_VARS];
    m[0][0] = g + v * v / h;
    m[0][1] = -v / h;
    m[1][0] = -v / h;
    m[1][1] = 1.0 / h;
    m
}

/// `R̃ = (2g)^{-1/2} [[1, 1], [v − c, v + c]]`, eigenvalues `v ∓ c`.
pub(super) fn scaled_eigensystem(u: &CellState, g: f64) -> (SmallMat, CellVec) {
    let h = u[0];
    let v = u[1] / h;
    let c = (g * h).sqrt();
    let s = 1.0 / (2.0 * g).sqrt();
    let mut r = [[0.0; MAX_VARS]; MAX_VARS];
    r[0][0] = s;
    r[0][1] = s;
    r[1][0] = s * (v - c);
    r[1][1] = s * (v + c);
    (r, CellVec::from_slice(&[v - c, v + c]))
}
