use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::{integrate_with, SimConfig, SimError, Trajectory};
use crate::control::{ControlError, FeedbackLaw};
use crate::geometry::UnitPoint;

/// A(x) = [−qᵀ; ηI + [q]×] for x = (η, q) ∈ S³, so that ẋ = ½A(x)ω.
pub fn quaternion_matrix(x: &UnitPoint) -> Result<DMatrix<f64>, SimError> {
    if x.len() != 4 {
        return Err(SimError::DimensionMismatch {
            expected: 4,
            got: x.len(),
        });
    }
    let eta = x[0];
    let q = Vector3::new(x[1], x[2], x[3]);
    let lower = Matrix3::identity() * eta + q.cross_matrix();
    let mut a = DMatrix::zeros(4, 3);
    for c in 0..3 {
        a[(0, c)] = -q[c];
        for r in 0..3 {
            a[(r + 1, c)] = lower[(r, c)];
        }
    }
    Ok(a)
}

/// Body rate ω = 2A(x)ᵀu; ½A(x)ω recovers P(x)u.
pub fn quaternion_adapter(x: &UnitPoint, u: &DVector<f64>) -> Result<DVector<f64>, SimError> {
    Ok(quaternion_matrix(x)?.transpose() * u * 2.0)
}

/// Integrates ẋ = ½A(x)ω with ω from the adapter, logging ω in each record.
pub fn integrate_quaternion(x0: &UnitPoint, law: &dyn FeedbackLaw, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    let dim = law.arrangement().target().len();
    if dim != 4 || x0.len() != 4 {
        return Err(SimError::DimensionMismatch {
            expected: 4,
            got: if dim != 4 { dim } else { x0.len() },
        });
    }
    let rhs = |p: &UnitPoint| -> Result<(DVector<f64>, Option<DVector<f64>>), ControlError> {
        let u = law.control(p)?.u;
        let a = quaternion_matrix(p).expect("dimension checked above");
        let omega = a.transpose() * &u * 2.0;
        Ok((a * &omega * 0.5, Some(omega)))
    };
    integrate_with(x0, law, cfg, &rhs)
}
