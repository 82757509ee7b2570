use super::{log_mean, CellState, CellVec, SmallMat, MAX_VARS};
use crate::error::Result;

pub(crate) fn pressure(u: &CellState, gamma: f64) -> f64 {
    (u[2] - 0.5 * u[1] * u[1] / u[0]) * (gamma - 1.0)
}

fn specific_entropy(u: &CellState, gamma: f64) -> f64 {
    (pressure(u, gamma) / u[0].powf(gamma)).ln()
}

pub(super) fn flux(u: &CellState, gamma: f64) -> CellVec {
    let (rho, m, e) = (u[0], u[1], u[2]);
    let p = pressure(u, gamma);
    let v = m / rho;
    CellVec::from_slice(&[m, m * v + p, (e + p) * v])
}

pub(super) fn entropy(u: &CellState, gamma: f64) -> f64 {
    -u[0] * specific_entropy(u, gamma) / (gamma - 1.0)
}

pub(super) fn entropy_variables(u: &CellState, gamma: f64) -> CellVec {
    let (rho, m) = (u[0], u[1]);
    let p = pressure(u, gamma);
    let sigma = specific_entropy(u, gamma);
    CellVec::from_slice(&[
        (gamma - sigma) / (gamma - 1.0) - m * m / (2.0 * rho * p),
        m / p,
        -rho / p,
    ])
}

/// With `β = −η₃ = ρ/p`: `v = η₂/β`, `σ = γ − (γ−1)(η₁ + η₂²/(2β))`,
/// `ρ = (β e^σ)^{1/(1−γ)}`, `p = ρ/β`.
pub(super) fn entropy_variables_inverse(eta: &CellVec, gamma: f64) -> Option<CellState> {
    let beta = -eta[2];
    if beta <= 0.0 {
        return None;
    }
    let v = eta[1] / beta;
    let sigma = gamma - (gamma - 1.0) * (eta[0] + 0.5 * eta[1] * eta[1] / beta);
    let rho = ((sigma + beta.ln()) / (1.0 - gamma)).exp();
    let p = rho / beta;
    if !(rho > 0.0 && p > 0.0 && rho.is_finite() && p.is_finite()) {
        return None;
    }
    Some(CellVec::from_slice(&[
        rho,
        rho * v,
        p / (gamma - 1.0) + 0.5 * rho * v * v,
    ]))
}

/// Ismail–Roe entropy conservative flux in the parameter vector
/// `z = sqrt(ρ/p) (1, v, p)`.
pub(super) fn ec_flux(u_l: &CellState, u_r: &CellState, gamma: f64) -> Result<CellVec> {
    let z = |u: &CellState| {
        let p = pressure(u, gamma);
        let s = (u[0] / p).sqrt();
        [s, s * u[1] / u[0], s * p]
    };
    let (zl, zr) = (z(u_l), z(u_r));
    let z1 = 0.5 * (zl[0] + zr[0]);
    let z2 = 0.5 * (zl[1] + zr[1]);
    let z3 = 0.5 * (zl[2] + zr[2]);
    let z1_ln = log_mean(zl[0], zr[0])?;
    let z3_ln = log_mean(zl[2], zr[2])?;
    let f1 = z2 * z3_ln;
    let f2 = z3 / z1 + z2 / z1 * f1;
    let f3 = 0.5 * z2 / z1 * ((gamma + 1.0) / (gamma - 1.0) * z3_ln / z1_ln + f2);
    Ok(CellVec::from_slice(&[f1, f2, f3]))
}

/// `∂u/∂η` for this entropy, the symmetric matrix
/// `[[ρ, m, E], [m, mv + p, v(E + p)], [E, v(E + p), ρH² − c²p/(γ−1)]]`.
fn entropy_jacobian_inverse(u: &CellState, gamma: f64) -> [[f64; 3]; 3] {
    let (rho, m, e) = (u[0], u[1], u[2]);
    let p = pressure(u, gamma);
    let v = m / rho;
    let h = (e + p) / rho;
    let c2 = gamma * p / rho;
    [
        [rho, m, e],
        [m, m * v + p, v * (e + p)],
        [e, v * (e + p), rho * h * h - c2 * p / (gamma - 1.0)],
    ]
}

pub(super) fn entropy_hessian(u: &CellState, gamma: f64) -> SmallMat {
    let a = entropy_jacobian_inverse(u, gamma);
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let mut inv = [[0.0; MAX_VARS]; MAX_VARS];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            // cofactor of a[j][i]
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            *x = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / det;
        }
    }
    inv
}

/// Eigenvectors `[[1,1,1],[v−c, v, v+c],[H−vc, v²/2, H+vc]]` scaled by
/// `sqrt(diag(ρ/(2γ), (γ−1)ρ/γ, ρ/(2γ)))` so that `R̃R̃ᵀ = ∂u/∂η`.
pub(super) fn scaled_eigensystem(u: &CellState, gamma: f64) -> (SmallMat, CellVec) {
    let rho = u[0];
    let p = pressure(u, gamma);
    let v = u[1] / rho;
    let c = (gamma * p / rho).sqrt();
    let h = (u[2] + p) / rho;
    let s_ac = (rho / (2.0 * gamma)).sqrt();
    let s_en = ((gamma - 1.0) * rho / gamma).sqrt();
    let r = [
        [s_ac, s_en, s_ac],
        [(v - c) * s_ac, v * s_en, (v + c) * s_ac],
        [(h - v * c) * s_ac, 0.5 * v * v * s_en, (h + v * c) * s_ac],
    ];
    (r, CellVec::from_slice(&[v - c, v, v + c]))
}
