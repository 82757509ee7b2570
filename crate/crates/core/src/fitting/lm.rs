//! Levenberg–Marquardt for small dense nonlinear least-squares problems.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub max_iters: usize,
    /// Stop when `‖Jᵀr‖_∞` falls below this.
    pub gradient_tol: f64,
    /// Stop when `‖δ‖ ≤ step_tol (‖x‖ + step_tol)`.
    pub step_tol: f64,
    /// Stop when an accepted step reduces the cost by less than this fraction.
    pub cost_tol: f64,
    pub initial_damping: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            gradient_tol: 1e-10,
            step_tol: 1e-12,
            cost_tol: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.max_iters > 0
            && self.gradient_tol > 0.0
            && self.step_tol > 0.0
            && self.cost_tol >= 0.0
            && self.initial_damping > 0.0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidArgument(
                "LM iteration limit, tolerances and damping must be positive".into(),
            ))
        }
    }
}

/// Residuals `r(x)` with Jacobian `∂r/∂x`.
pub trait LeastSquares {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    /// Fills `res` (and `jac` when given); returns false on non-finite output.
    fn eval(&self, x: &[f64], res: &mut [f64], jac: Option<&mut DMatrix<f64>>) -> bool;
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    /// `‖r(x)‖₂`.
    pub residual: f64,
    pub iters: usize,
    pub finite: bool,
}

const MAX_DAMPING: f64 = 1e16;

pub fn levenberg_marquardt<P: LeastSquares>(problem: &P, x0: &[f64], cfg: &LmConfig) -> LmOutcome {
    let n = problem.n_params();
    let m = problem.n_residuals();
    let mut x = x0.to_vec();
    let mut res = vec![0.0; m];
    let mut jac = DMatrix::zeros(m, n);
    if !problem.eval(&x, &mut res, Some(&mut jac)) {
        return LmOutcome {
            x,
            residual: f64::INFINITY,
            iters: 0,
            finite: false,
        };
    }
    let mut cost = sumsq(&res);
    let mut mu = cfg.initial_damping;
    let mut trial = vec![0.0; n];
    let mut trial_res = vec![0.0; m];
    let mut iters = 0;
    let mut fresh = true;
    let mut jtj = DMatrix::zeros(n, n);
    let mut grad = DVector::zeros(n);
    let mut scale = vec![0.0; n];

    while iters < cfg.max_iters {
        if fresh {
            jtj = jac.tr_mul(&jac);
            grad = jac.tr_mul(&DVector::from_column_slice(&res));
            if grad.amax() <= cfg.gradient_tol {
                break;
            }
            let dmax = jtj.diagonal().max().max(f64::MIN_POSITIVE);
            for (s, d) in scale.iter_mut().zip(jtj.diagonal().iter()) {
                *s = d.max(1e-12 * dmax);
            }
            fresh = false;
        }
        iters += 1;
        let mut a = jtj.clone();
        for j in 0..n {
            a[(j, j)] += mu * scale[j];
        }
        let step = match a.cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => {
                mu *= 10.0;
                if mu > MAX_DAMPING {
                    break;
                }
                continue;
            }
        };
        for j in 0..n {
            trial[j] = x[j] + step[j];
        }
        let ok = problem.eval(&trial, &mut trial_res, None);
        let trial_cost = if ok { sumsq(&trial_res) } else { f64::INFINITY };
        if trial_cost < cost {
            let reduction = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
            std::mem::swap(&mut x, &mut trial);
            cost = trial_cost;
            mu = (mu / 10.0).max(1e-15);
            let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if step.norm() <= cfg.step_tol * (xnorm + cfg.step_tol) || reduction < cfg.cost_tol {
                break;
            }
            problem.eval(&x, &mut res, Some(&mut jac));
            fresh = true;
        } else {
            mu *= 10.0;
            if mu > MAX_DAMPING {
                break;
            }
        }
    }
    problem.eval(&x, &mut res, None);
    LmOutcome {
        residual: sumsq(&res).sqrt(),
        x,
        iters,
        finite: true,
    }
}

fn sumsq(v: &[f64]) -> f64 {
    v.iter().map(|r| r * r).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rosenbrock as residuals `(1 − x, 10(y − x²))`.
    struct Rosenbrock;

    impl LeastSquares for Rosenbrock {
        fn n_params(&self) -> usize {
            2
        }
        fn n_residuals(&self) -> usize {
            2
        }
        fn eval(&self, x: &[f64], res: &mut [f64], jac: Option<&mut DMatrix<f64>>) -> bool {
            res[0] = 1.0 - x[0];
            res[1] = 10.0 * (x[1] - x[0] * x[0]);
            if let Some(j) = jac {
                j[(0, 0)] = -1.0;
                j[(0, 1)] = 0.0;
                j[(1, 0)] = -20.0 * x[0];
                j[(1, 1)] = 10.0;
            }
            true
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let out = levenberg_marquardt(&Rosenbrock, &[-1.2, 1.0], &LmConfig::default());
        assert!(out.finite);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8, "{:?}", out);
    }

    /// Exponential decay fit, checking monotone cost along the way.
    struct Decay {
        t: Vec<f64>,
        y: Vec<f64>,
    }

    impl LeastSquares for Decay {
        fn n_params(&self) -> usize {
            2
        }
        fn n_residuals(&self) -> usize {
            self.t.len()
        }
        fn eval(&self, x: &[f64], res: &mut [f64], jac: Option<&mut DMatrix<f64>>) -> bool {
            for (k, (&t, &y)) in self.t.iter().zip(&self.y).enumerate() {
                res[k] = x[0] * (-x[1] * t).exp() - y;
            }
            if let Some(j) = jac {
                for (k, &t) in self.t.iter().enumerate() {
                    j[(k, 0)] = (-x[1] * t).exp();
                    j[(k, 1)] = -x[0] * t * (-x[1] * t).exp();
                }
            }
            res.iter().all(|r| r.is_finite())
        }
    }

    #[test]
    fn fits_realizable_decay() {
        let t: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let y = t.iter().map(|t| 2.0 * (-1.5 * t).exp()).collect();
        let p = Decay { t, y };
        let out = levenberg_marquardt(&p, &[1.0, 1.0], &LmConfig::default());
        assert!(out.residual < 1e-10);
        assert!((out.x[1] - 1.5).abs() < 1e-9);
    }
}
