//! Named initial conditions of the bundled experiments.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::physics::{CellState, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCondition {
    /// `u = sin(2πx) + 1` on `[0, 1]`.
    BurgersSine,
    /// `h = 1.5` for `|x| < 0.2`, `h = 1` elsewhere, at rest.
    SwDambreak,
    /// `h = 1 + 0.1 exp(−100x²)`, at rest.
    SwPerturbation,
    /// Periodic Sod tube: `(ρ, p) = (1, 1)` on `(0.25, 0.75)`, `(0.125, 0.1)` elsewhere, at rest.
    EulerSodPeriodic,
}

impl InitialCondition {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BurgersSine => "burgers_sine",
            Self::SwDambreak => "sw_dambreak",
            Self::SwPerturbation => "sw_perturbation",
            Self::EulerSodPeriodic => "euler_sod_periodic",
        }
    }

    pub fn default_domain(&self) -> (f64, f64) {
        match self {
            Self::BurgersSine | Self::EulerSodPeriodic => (0.0, 1.0),
            Self::SwDambreak | Self::SwPerturbation => (-1.0, 1.0),
        }
    }

    pub fn check_model(&self, model: &Model) -> Result<()> {
        let ok = matches!(
            (self, model),
            (Self::BurgersSine, Model::Burgers)
                | (Self::SwDambreak | Self::SwPerturbation, Model::ShallowWater { .. })
                | (Self::EulerSodPeriodic, Model::Euler { .. })
        );
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "initial condition `{}` does not apply to {}",
                self.name(),
                model
            )))
        }
    }

    /// Conserved state at position `x`.
    pub fn eval(&self, x: f64, model: &Model) -> CellState {
        match (self, model) {
            (Self::BurgersSine, _) => {
                CellState::from_slice(&[(2.0 * std::f64::consts::PI * x).sin() + 1.0])
            }
            (Self::SwDambreak, _) => {
                CellState::from_slice(&[if x.abs() < 0.2 { 1.5 } else { 1.0 }, 0.0])
            }
            (Self::SwPerturbation, _) => {
                CellState::from_slice(&[1.0 + 0.1 * (-100.0 * x * x).exp(), 0.0])
            }
            (Self::EulerSodPeriodic, m) => {
                let gamma = match m {
                    Model::Euler { gamma } => *gamma,
                    _ => 1.4,
                };
                let inside = x > 0.25 && x < 0.75;
                let (rho, p) = if inside { (1.0, 1.0) } else { (0.125, 0.1) };
                CellState::from_slice(&[rho, 0.0, p / (gamma - 1.0)])
            }
        }
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitialCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "burgers_sine" => Ok(Self::BurgersSine),
            "sw_dambreak" => Ok(Self::SwDambreak),
            "sw_perturbation" => Ok(Self::SwPerturbation),
            "euler_sod_periodic" => Ok(Self::EulerSodPeriodic),
            other => Err(Error::InvalidArgument(format!(
                "unknown initial condition `{other}`"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        let b = InitialCondition::BurgersSine.eval(0.25, &Model::Burgers);
        assert!((b[0] - 2.0).abs() < 1e-15);
        let sw = Model::shallow_water();
        assert_eq!(InitialCondition::SwDambreak.eval(0.1, &sw).to_vec(), vec![1.5, 0.0]);
        assert_eq!(InitialCondition::SwDambreak.eval(-0.2, &sw).to_vec(), vec![1.0, 0.0]);
        let p = InitialCondition::SwPerturbation.eval(0.0, &sw);
        assert!((p[0] - 1.1).abs() < 1e-15);
        let e = InitialCondition::EulerSodPeriodic.eval(0.5, &Model::euler());
        assert!((e[2] - 2.5).abs() < 1e-15);
        let e = InitialCondition::EulerSodPeriodic.eval(0.9, &Model::euler());
        assert!((e[0] - 0.125).abs() < 1e-15 && (e[2] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn model_pairing() {
        assert!(InitialCondition::SwDambreak.check_model(&Model::Burgers).is_err());
        assert!(InitialCondition::EulerSodPeriodic.check_model(&Model::euler()).is_ok());
        assert!("sod".parse::<InitialCondition>().is_err());
    }
}
