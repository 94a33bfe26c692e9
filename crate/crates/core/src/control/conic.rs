use std::sync::Arc;

use nalgebra::DVector;

use super::{smoothstep_h, ControlError, ControlOutput, FeedbackLaw};
use crate::constraints::{ConstraintArrangement, ConstraintSet, Proximity};
use crate::geometry::{arc_angle, normalize, project, UnitPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConicParams {
    pub k1: f64,
}

/// u = −∇W with W = k1·d/(d + β), d = d_s(x, x_d) and β the smoothstep of the cap distance in the band.
#[derive(Debug, Clone)]
pub struct ConicController {
    arr: Arc<ConstraintArrangement>,
    params: ConicParams,
}

/// β and the ambient gradient of β at x.
struct Barrier {
    beta: f64,
    grad: Option<DVector<f64>>,
    active: Option<usize>,
}

impl ConicController {
    pub fn new(arr: Arc<ConstraintArrangement>, params: ConicParams) -> Result<Self, ControlError> {
        if !arr.all_caps() {
            return Err(ControlError::Configuration(
                "the navigation-gradient law only supports cap constraints".into(),
            ));
        }
        if !(params.k1 > 0.0) {
            return Err(ControlError::Configuration(format!("k1 = {} must be positive", params.k1)));
        }
        Ok(ConicController { arr, params })
    }

    pub fn params(&self) -> ConicParams {
        self.params
    }

    fn barrier(&self, x: &DVector<f64>) -> Result<Barrier, ControlError> {
        let eps = self.arr.epsilon();
        match self.arr.proximity(x)? {
            Proximity::Clear => Ok(Barrier {
                beta: 1.0,
                grad: None,
                active: None,
            }),
            Proximity::Inside { index, depth } => Err(ControlError::InsideUnsafe { index, depth }),
            Proximity::Band { index, distance } => {
                let ConstraintSet::Cap(cap) = &self.arr.sets()[index] else {
                    unreachable!("constructor rejects non-cap sets")
                };
                let (h, dh) = smoothstep_h(distance.min(eps), eps)?;
                let g = cap.axis().coords();
                let theta = arc_angle(x.dot(g));
                let gap = theta - cap.xi();
                // ∇ₓ[1 − cos(θ − ξ)] = −sin(θ − ξ)/sin θ · g
                let chain = if gap > 0.0 && theta.sin() > 0.0 {
                    gap.sin() / theta.sin()
                } else {
                    0.0
                };
                Ok(Barrier {
                    beta: h,
                    grad: Some(g * (-dh * chain)),
                    active: Some(index),
                })
            }
        }
    }

    /// W(x) ∈ [0, k1].
    pub fn navigation_value(&self, x: &DVector<f64>) -> Result<f64, ControlError> {
        let d = 1.0 - x.dot(self.arr.target());
        let b = self.barrier(x)?;
        let den = d + b.beta;
        assert!(den > 1e-12, "W denominator vanished: target must lie outside the unsafe set");
        Ok(self.params.k1 * d / den)
    }

    /// −∇W by central differences of W∘ψ in ambient coordinates, projected onto the tangent space.
    pub fn control_fd(&self, x: &UnitPoint, step: f64) -> Result<DVector<f64>, ControlError> {
        let (dmin, _) = self.arr.signed_distance(x)?;
        if dmin <= step {
            return Err(ControlError::TooCloseToBoundary);
        }
        let m = x.len();
        let mut grad = DVector::zeros(m);
        for j in 0..m {
            let mut yp = x.coords().clone();
            let mut ym = x.coords().clone();
            yp[j] += step;
            ym[j] -= step;
            let wp = self.navigation_value(&normalize(&yp).expect("perturbed point is nonzero"))?;
            let wm = self.navigation_value(&normalize(&ym).expect("perturbed point is nonzero"))?;
            grad[j] = (wp - wm) / (2.0 * step);
        }
        Ok(project(x, &(-grad)))
    }
}

impl FeedbackLaw for ConicController {
    fn control(&self, x: &UnitPoint) -> Result<ControlOutput, ControlError> {
        let xd = self.arr.target().coords();
        let d = 1.0 - x.dot(self.arr.target());
        let b = self.barrier(x)?;
        let den = d + b.beta;
        assert!(den > 1e-12, "W denominator vanished: target must lie outside the unsafe set");
        let k = self.params.k1 / (den * den);
        // ∇d = −x_d, so −∇W = k1/(d+β)² (β x_d + d ∇β)
        let mut u = xd * (k * b.beta);
        if let Some(gb) = b.grad {
            u += gb * (k * d);
        }
        Ok(ControlOutput { u, active: b.active })
    }

    fn arrangement(&self) -> &ConstraintArrangement {
        &self.arr
    }

    fn k1(&self) -> f64 {
        self.params.k1
    }

    fn name(&self) -> &'static str {
        "conic-gradient"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ConicCap;
    use crate::geometry::{slerp, SphereSampler};
    use std::f64::consts::PI;

    fn setup(eps: f64) -> ConicController {
        let mut sets: Vec<ConstraintSet> = Vec::new();
        for k in 1..3 {
            for s in [1.0, -1.0] {
                let mut v = DVector::zeros(3);
                v[k] = s;
                sets.push(ConicCap::new(normalize(&v).unwrap(), PI / 6.0).unwrap().into());
            }
        }
        let arr = ConstraintArrangement::new(sets, None, UnitPoint::basis(2, 0), eps).unwrap();
        ConicController::new(Arc::new(arr), ConicParams { k1: 1.0 }).unwrap()
    }

    #[test]
    fn value_examples() {
        let c = setup(0.02);
        let xd = UnitPoint::basis(2, 0);
        assert_eq!(c.navigation_value(&xd).unwrap(), 0.0);
        let b = ConicCap::new(UnitPoint::basis(2, 1), PI / 6.0)
            .unwrap()
            .boundary_point(&UnitPoint::basis(2, 0));
        assert!((c.navigation_value(&b).unwrap() - 1.0).abs() < 1e-12);
        // d_s(x, x_d) = 1 and outside every band
        let x = normalize(&DVector::from_column_slice(&[0.0, 0.5f64.sqrt(), 0.5f64.sqrt()])).unwrap();
        assert!((c.navigation_value(&x).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            c.navigation_value(&UnitPoint::basis(2, 1)),
            Err(ControlError::InsideUnsafe { index: 0, .. })
        ));
    }

    #[test]
    fn control_at_target_is_radial() {
        let c = setup(0.02);
        let xd = UnitPoint::basis(2, 0);
        let out = c.control(&xd).unwrap();
        assert!((out.u[0] - 1.0).abs() < 1e-15);
        assert!(project(&xd, &out.u).norm() < 1e-15);
        let fd = c.control_fd(&xd, 1e-6).unwrap();
        assert!(fd.norm() < 1e-6);
    }

    #[test]
    fn band_edge_is_continuous() {
        let eps = 0.02;
        let c = setup(eps);
        let g = UnitPoint::basis(2, 1);
        let xd = UnitPoint::basis(2, 0);
        let edge_angle = PI / 6.0 + (1.0 - eps).acos();
        let at = |a: f64| slerp(&g, &xd, a / (PI / 2.0)).unwrap();
        let inside = c.control(&at(edge_angle - 1e-9)).unwrap();
        let outside = c.control(&at(edge_angle + 1e-9)).unwrap();
        assert!(inside.active.is_some() && outside.active.is_none());
        assert!((inside.u - outside.u).norm() < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = setup(0.05);
        let mut s = SphereSampler::new(2, 8);
        let mut checked = 0;
        while checked < 300 {
            let x = s.next_point();
            let Ok((dmin, _)) = c.arrangement().signed_distance(&x) else { continue };
            if dmin < 1e-3 {
                continue;
            }
            let u = project(&x, &c.control(&x).unwrap().u);
            let fd = c.control_fd(&x, 1e-6).unwrap();
            let rel = (&u - &fd).norm() / u.norm().max(1e-12);
            assert!(rel < 1e-4, "rel {rel} at {x:?}");
            checked += 1;
        }
    }

    #[test]
    fn repulsive_just_outside_the_boundary() {
        let c = setup(0.05);
        let g = UnitPoint::basis(2, 1);
        let cap = ConicCap::new(g.clone(), PI / 6.0).unwrap();
        for b in cap.boundary_samples(50, 3) {
            // exactly on the boundary the distance gradient vanishes, so the exact gradient law is zero there
            let u0 = project(&b, &c.control(&b).unwrap().u);
            assert!(u0.norm() < 1e-9);
            let x = slerp(&g, &b, 1.0 + 1e-4).unwrap();
            let pu = project(&x, &c.control(&x).unwrap().u);
            let pg = project(&x, &(-g.coords()));
            assert!(pu.dot(&pg) > 0.0);
        }
    }

    #[test]
    fn rejects_star_sets() {
        use crate::constraints::{build_projected_star, EuclideanStarBody, Profile};
        let body = EuclideanStarBody::new(
            DVector::from_column_slice(&[0.0, 0.0, 1.0]),
            None,
            None,
            None,
            Profile::Ellipsoid {
                semi_axes: DVector::from_element(2, 0.2),
                center: DVector::zeros(2),
            },
        )
        .unwrap();
        let star = build_projected_star(body, 64).unwrap();
        let arr = ConstraintArrangement::new(vec![star.into()], None, UnitPoint::basis(2, 0), 0.01).unwrap();
        assert!(matches!(
            ConicController::new(Arc::new(arr), ConicParams { k1: 1.0 }),
            Err(ControlError::Configuration(_))
        ));
    }
}
