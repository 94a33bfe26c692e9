use std::f64::consts::PI;

use nalgebra::DVector;

use super::ConstraintError;
use crate::geometry::{arc_angle, tangent_basis, SphereSampler, UnitPoint};

/// The spherical cap {x : x·g ≥ cos ξ}.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicCap {
    axis: UnitPoint,
    xi: f64,
    cos_xi: f64,
}

impl ConicCap {
    pub fn new(axis: UnitPoint, xi: f64) -> Result<Self, ConstraintError> {
        if !(0.0..PI).contains(&xi) {
            return Err(ConstraintError::InvalidCap(format!("half-angle {xi} outside [0, π)")));
        }
        Ok(ConicCap {
            axis,
            xi,
            cos_xi: xi.cos(),
        })
    }

    pub fn axis(&self) -> &UnitPoint {
        &self.axis
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Angle between x and the axis.
    pub fn theta(&self, x: &DVector<f64>) -> f64 {
        arc_angle(x.dot(&self.axis))
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.dot(&self.axis) >= self.cos_xi - 1e-12
    }

    pub fn contains_interior(&self, x: &DVector<f64>) -> bool {
        self.theta(x) < self.xi - 1e-12
    }

    /// Signed angular offset from the cap boundary (negative inside).
    pub fn angular_gap(&self, x: &DVector<f64>) -> f64 {
        self.theta(x) - self.xi
    }

    /// 0 inside the cap, 1 − cos(θ − ξ) outside.
    pub fn distance(&self, x: &DVector<f64>) -> f64 {
        let gap = self.angular_gap(x);
        if gap <= 0.0 {
            0.0
        } else {
            1.0 - gap.cos()
        }
    }

    /// Like `distance` but negative inside: minus the distance to the complement.
    pub fn signed_distance(&self, x: &DVector<f64>) -> f64 {
        let gap = self.angular_gap(x);
        let d = 1.0 - gap.cos();
        if gap < 0.0 {
            -d
        } else {
            d
        }
    }

    /// Point on the boundary in tangent direction `t` (unit, orthogonal to the axis).
    pub fn boundary_point(&self, t: &DVector<f64>) -> UnitPoint {
        let v = self.axis.coords() * self.cos_xi + t * self.xi.sin();
        crate::geometry::normalize(&v).expect("boundary point has unit norm")
    }

    /// Seeded uniform boundary samples.
    pub fn boundary_samples(&self, count: usize, seed: u64) -> Vec<UnitPoint> {
        let basis = tangent_basis(self.axis.coords());
        let mut s = SphereSampler::new(basis.len().max(2), seed);
        (0..count)
            .map(|_| {
                let mut t = DVector::zeros(self.axis.len());
                let mut nrm = 0.0;
                while nrm < 1e-8 {
                    t.fill(0.0);
                    for b in &basis {
                        t += b * s.gaussian();
                    }
                    nrm = t.norm();
                }
                self.boundary_point(&(t / nrm))
            })
            .collect()
    }
}
