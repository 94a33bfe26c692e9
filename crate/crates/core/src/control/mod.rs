//! Feedback laws on the sphere: the navigation-gradient law for caps and the piecewise law for star-shaped sets.

mod conic;
mod kappa;
mod star;

pub use conic::{ConicController, ConicParams};
pub use kappa::{suggest_kappa, KappaSuggestion};
pub use star::{StarController, StarParams};

use nalgebra::DVector;
use thiserror::Error;

use crate::constraints::{ConstraintArrangement, ConstraintError};
use crate::geometry::UnitPoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("state lies inside unsafe set {index} (depth {depth:e})")]
    InsideUnsafe { index: usize, depth: f64 },
    #[error("argument {0} outside the valid domain")]
    DomainError(f64),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("point is within the finite-difference step of the unsafe boundary")]
    TooCloseToBoundary,
    #[error("kernel of set {0} is antipodal to the target")]
    KernelAntipodalToTarget(usize),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

/// Control input and the set whose band is active, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub u: DVector<f64>,
    pub active: Option<usize>,
}

/// A static state-feedback law u(x) in ambient coordinates.
pub trait FeedbackLaw: Send + Sync {
    fn control(&self, x: &UnitPoint) -> Result<ControlOutput, ControlError>;
    fn arrangement(&self) -> &ConstraintArrangement;
    fn k1(&self) -> f64;
    fn name(&self) -> &'static str;
}

/// h(p) = (p³ − 3εp² + 3ε²p)/ε³ and h′(p) = 3(p − ε)²/ε³ on [0, ε].
pub fn smoothstep_h(p: f64, eps: f64) -> Result<(f64, f64), ControlError> {
    if !(eps > 0.0) {
        return Err(ControlError::DomainError(eps));
    }
    if !(0.0..=eps).contains(&p) {
        return Err(ControlError::DomainError(p));
    }
    let e3 = eps * eps * eps;
    let v = (p * p * p - 3.0 * eps * p * p + 3.0 * eps * eps * p) / e3;
    let dv = 3.0 * (p - eps) * (p - eps) / e3;
    Ok((v.clamp(0.0, 1.0), dv))
}

/// h″(p) = 6(p − ε)/ε³.
pub fn smoothstep_h2(p: f64, eps: f64) -> f64 {
    6.0 * (p - eps) / (eps * eps * eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_examples() {
        let eps = 0.02;
        let (v, d) = smoothstep_h(0.0, eps).unwrap();
        assert!(v == 0.0 && (d - 3.0 / eps).abs() < 1e-12);
        let (v, d) = smoothstep_h(eps, eps).unwrap();
        assert!((v - 1.0).abs() < 1e-15 && d == 0.0);
        assert_eq!(smoothstep_h2(eps, eps), 0.0);
        let (v, d) = smoothstep_h(eps / 2.0, eps).unwrap();
        assert!((v - 0.875).abs() < 1e-14);
        assert!((d - 3.0 / (4.0 * eps)).abs() < 1e-10);
        assert!(smoothstep_h(-1e-3, eps).is_err());
        assert!(smoothstep_h(eps * 1.01, eps).is_err());
    }

    #[test]
    fn smoothstep_is_increasing() {
        let eps = 0.1;
        let mut prev = -1.0;
        for k in 0..=1000 {
            let (v, d) = smoothstep_h(eps * k as f64 / 1000.0, eps).unwrap();
            assert!(v > prev || k == 0);
            assert!((0.0..=1.0).contains(&v) && d >= 0.0);
            prev = v;
        }
    }
}
