use std::sync::Arc;

use super::{ControlError, ControlOutput, FeedbackLaw};
use crate::constraints::{ConstraintArrangement, Proximity};
use crate::geometry::UnitPoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarParams {
    pub k1: f64,
    pub kappa: f64,
}

/// Pure attraction k1·x_d outside the bands; inside the band of U_i a blend of x_d and −g_i
/// weighted by d_s(x, U_i)/ε.
#[derive(Debug, Clone)]
pub struct StarController {
    arr: Arc<ConstraintArrangement>,
    params: StarParams,
}

impl StarController {
    pub fn new(arr: Arc<ConstraintArrangement>, params: StarParams) -> Result<Self, ControlError> {
        if !(params.k1 > 0.0) || !(params.kappa > 0.0) {
            return Err(ControlError::Configuration(format!(
                "gains must be positive (k1 = {}, kappa = {})",
                params.k1, params.kappa
            )));
        }
        for (i, g) in arr.kernels().iter().enumerate() {
            if g.dot(arr.target()) <= -1.0 + 1e-12 {
                return Err(ControlError::KernelAntipodalToTarget(i));
            }
        }
        Ok(StarController { arr, params })
    }

    pub fn params(&self) -> StarParams {
        self.params
    }
}

impl FeedbackLaw for StarController {
    fn control(&self, x: &UnitPoint) -> Result<ControlOutput, ControlError> {
        let xd = self.arr.target().coords();
        let k1 = self.params.k1;
        match self.arr.proximity(x)? {
            Proximity::Clear => Ok(ControlOutput {
                u: xd * k1,
                active: None,
            }),
            Proximity::Inside { index, depth } => Err(ControlError::InsideUnsafe { index, depth }),
            Proximity::Band { index, distance } => {
                let r = (distance / self.arr.epsilon()).clamp(0.0, 1.0);
                let g = self.arr.kernels()[index].coords();
                let u = xd * (k1 * r) - g * (k1 * (1.0 - r) / self.params.kappa);
                Ok(ControlOutput {
                    u,
                    active: Some(index),
                })
            }
        }
    }

    fn arrangement(&self) -> &ConstraintArrangement {
        &self.arr
    }

    fn k1(&self) -> f64 {
        self.params.k1
    }

    fn name(&self) -> &'static str {
        "star-piecewise"
    }
}
