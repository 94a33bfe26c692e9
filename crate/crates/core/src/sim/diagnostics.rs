use nalgebra::{Complex, DMatrix, DVector};

use super::{SimError, Trajectory};
use crate::constraints::ConstraintArrangement;
use crate::control::FeedbackLaw;
use crate::geometry::{normalize, project, tangent_basis, UnitPoint};

const DEGENERATE: f64 = 1e-10;

/// Cosine of the angle between P(g)(x − g) and P(g)(x_d − g).
pub fn lyapunov_vi(x: &UnitPoint, g: &UnitPoint, xd: &UnitPoint) -> Result<f64, SimError> {
    let px = project(g, x);
    let pxd = project(g, xd);
    let (nx, nxd) = (px.norm(), pxd.norm());
    if nx < DEGENERATE || nxd < DEGENERATE {
        return Err(SimError::DegenerateProjection(nx.min(nxd)));
    }
    Ok((pxd.dot(&px) / (nx * nxd)).clamp(-1.0, 1.0))
}

/// w_i(x) = ‖P(g)x‖² P(g)x_d − (x_dᵀP(g)x) P(g)x.
pub fn w_i(x: &DVector<f64>, g: &DVector<f64>, xd: &DVector<f64>) -> DVector<f64> {
    let px = project(g, x);
    let pxd = project(g, xd);
    &pxd * px.norm_squared() - &px * xd.dot(&px)
}

/// d_s from x to the closed half great circle {g cos s + t sin s : s ∈ [0, π]}, with t a unit vector ⟂ g.
pub fn distance_to_half_circle(x: &DVector<f64>, g: &DVector<f64>, t: &DVector<f64>) -> f64 {
    let a = x.dot(g);
    let b = x.dot(t);
    if b >= 0.0 {
        1.0 - (a * a + b * b).sqrt()
    } else {
        1.0 - a.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VdotViolation {
    pub t: f64,
    pub index: usize,
    pub vdot: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VdotReport {
    /// Consecutive record pairs that were in scope.
    pub checked: usize,
    pub min_vdot: Option<f64>,
    pub violations: Vec<VdotViolation>,
}

/// Finite-difference V̇_i between consecutive records lying in F_i, away from ∂U_i, Z_i and V_i by `margin`.
pub fn check_vdot_positive(
    traj: &Trajectory,
    arr: &ConstraintArrangement,
    margin: f64,
    tol: f64,
) -> Result<VdotReport, SimError> {
    let xd = arr.target();
    let mut rep = VdotReport::default();
    for (i, g) in arr.kernels().iter().enumerate() {
        let dir = project(g, xd);
        if dir.norm() < DEGENERATE {
            continue;
        }
        let tv = dir.normalize();
        let tz = -&tv;
        let set = &arr.sets()[i];
        let in_scope = |r: &super::TrajectoryRecord| -> Result<Option<f64>, SimError> {
            if r.active_i.is_some_and(|j| j != i) {
                return Ok(None);
            }
            if distance_to_half_circle(&r.x, g, &tv) <= margin || distance_to_half_circle(&r.x, g, &tz) <= margin {
                return Ok(None);
            }
            if let Some(d) = set.signed_distance_within(&r.x, margin)? {
                if d.abs() <= margin || d < 0.0 {
                    return Ok(None);
                }
            }
            Ok(lyapunov_vi(&r.x, g, xd).ok())
        };
        let mut prev: Option<(f64, f64)> = None;
        for r in &traj.records {
            let cur = in_scope(r)?.map(|v| (r.t, v));
            if let (Some((t0, v0)), Some((t1, v1))) = (prev, cur) {
                let vdot = (v1 - v0) / (t1 - t0);
                rep.checked += 1;
                rep.min_vdot = Some(rep.min_vdot.map_or(vdot, |m: f64| m.min(vdot)));
                if vdot <= tol {
                    rep.violations.push(VdotViolation {
                        t: t1,
                        index: i,
                        vdot,
                        x: r.x.iter().copied().collect(),
                    });
                }
            }
            prev = cur;
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    /// Ambient (n+1)×(n+1) Jacobian of y ↦ P(y)u(y/‖y‖).
    pub ambient: DMatrix<f64>,
    pub ambient_eigenvalues: Vec<Complex<f64>>,
    /// The same map restricted to the tangent space at x.
    pub tangent_eigenvalues: Vec<Complex<f64>>,
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let fm = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let mut ev: Vec<Complex<f64>> = fm
        .eigenvalues::<faer::complex_native::c64>()
        .into_iter()
        .map(|z| Complex::new(z.re, z.im))
        .collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

/// Central-difference Jacobian of the ambient closed-loop field at x.
pub fn jacobian_fd(x: &UnitPoint, law: &dyn FeedbackLaw, step: f64) -> Result<JacobianReport, SimError> {
    let arr = law.arrangement();
    let eps = arr.epsilon();
    let mut gap = f64::INFINITY;
    for s in arr.sets() {
        if let Some(d) = s.signed_distance_within(x, eps + 4.0 * step)? {
            gap = gap.min(d.abs()).min((d - eps).abs());
        }
    }
    if gap < 2.0 * step {
        return Err(SimError::NonSmoothNeighborhood(gap));
    }
    let field = |y: &DVector<f64>| -> Result<DVector<f64>, SimError> {
        let p = normalize(y).map_err(|_| SimError::NonFiniteState(0.0))?;
        let u = law.control(&p)?.u;
        Ok(&u - y * y.dot(&u))
    };
    let m = x.len();
    let mut j = DMatrix::zeros(m, m);
    for c in 0..m {
        let mut yp = x.coords().clone();
        let mut ym = x.coords().clone();
        yp[c] += step;
        ym[c] -= step;
        let col = (field(&yp)? - field(&ym)?) / (2.0 * step);
        j.set_column(c, &col);
    }
    let basis = tangent_basis(x);
    let e = DMatrix::from_columns(&basis);
    let restricted = e.transpose() * &j * &e;
    Ok(JacobianReport {
        ambient_eigenvalues: sorted_eigenvalues(&j),
        tangent_eigenvalues: sorted_eigenvalues(&restricted),
        ambient: j,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{ConicCap, ConstraintSet};
    use crate::control::{ConicController, ConicParams, StarController, StarParams};
    use crate::geometry::{slerp, SphereSampler};
    use std::sync::Arc;

    fn arr(eps: f64) -> Arc<ConstraintArrangement> {
        let g = normalize(&DVector::from_column_slice(&[0.1, 1.0, 0.3, -0.2])).unwrap();
        let sets: Vec<ConstraintSet> = vec![ConicCap::new(g, 0.4).unwrap().into()];
        Arc::new(ConstraintArrangement::new(sets, None, UnitPoint::basis(3, 0), eps).unwrap())
    }

    #[test]
    fn lyapunov_examples() {
        let a = arr(0.02);
        let g = a.kernels()[0].clone();
        let xd = a.target().clone();
        for l in [0.2, 0.5, 0.9, 1.3] {
            let v = slerp(&g, &xd, l).unwrap();
            assert!((lyapunov_vi(&v, &g, &xd).unwrap() - 1.0).abs() < 1e-10);
            let z = slerp(&g, &xd.antipode(), l.min(0.95)).unwrap();
            assert!((lyapunov_vi(&z, &g, &xd).unwrap() + 1.0).abs() < 1e-10);
        }
        let pxd = project(&g, &xd).normalize();
        let mut s = SphereSampler::new(3, 5);
        let r = loop {
            let q = s.next_point();
            let t = project(&g, &q) - &pxd * pxd.dot(&q);
            if t.norm() > 0.1 {
                break t.normalize();
            }
        };
        let perp = normalize(&(g.coords() * 0.6 + r * 0.8)).unwrap();
        assert!(lyapunov_vi(&perp, &g, &xd).unwrap().abs() < 1e-12);
        assert!(matches!(
            lyapunov_vi(&g.antipode(), &g, &xd),
            Err(SimError::DegenerateProjection(_))
        ));
    }

    #[test]
    fn half_circle_distance() {
        let g = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
        let t = DVector::from_column_slice(&[0.0, 1.0, 0.0]);
        let on = DVector::from_column_slice(&[0.6, 0.8, 0.0]);
        assert!(distance_to_half_circle(&on, &g, &t).abs() < 1e-15);
        let behind = DVector::from_column_slice(&[0.0, -1.0, 0.0]);
        assert!((distance_to_half_circle(&behind, &g, &t) - 1.0).abs() < 1e-15);
        let pole = DVector::from_column_slice(&[0.0, 0.0, 1.0]);
        assert!((distance_to_half_circle(&pole, &g, &t) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn repulsive_direction_orthogonality() {
        let a = arr(0.02);
        let g = a.kernels()[0].coords().clone();
        let xd = a.target().coords().clone();
        let tv = project(&g, &xd).normalize();
        let mut s = SphereSampler::new(3, 11);
        let mut positive = 0;
        for _ in 0..2000 {
            let x = s.next_point();
            let w = w_i(&x, &g, &xd);
            assert!(w.dot(&project(&x, &g)).abs() < 1e-10);
            if distance_to_half_circle(&x, &g, &tv) > 1e-3 && distance_to_half_circle(&x, &g, &-&tv) > 1e-3 {
                assert!(w.dot(&project(&x, &xd)) > 0.0);
                positive += 1;
            }
        }
        assert!(positive > 1500);
    }

    #[test]
    fn spectra_at_the_equilibria() {
        let a = arr(0.02);
        let xd = a.target().clone();
        let outer = xd.coords() * xd.coords().transpose();
        let id = DMatrix::<f64>::identity(4, 4);
        for k1 in [0.5, 1.0, 2.0] {
            let conic = ConicController::new(a.clone(), ConicParams { k1 }).unwrap();
            let star = StarController::new(a.clone(), StarParams { k1, kappa: 1.0 }).unwrap();
            for law in [&conic as &dyn FeedbackLaw, &star] {
                let r = jacobian_fd(&xd, law, 1e-6).unwrap();
                assert!((&r.ambient + (&id + &outer) * k1).amax() < 1e-4);
                assert!(r.tangent_eigenvalues.iter().all(|e| (e.re + k1).abs() < 1e-4 && e.im.abs() < 1e-6));
            }
            let r = jacobian_fd(&xd.antipode(), &conic, 1e-6).unwrap();
            assert!((&r.ambient - (&id + &outer) * (k1 / 9.0)).amax() < 1e-4);
            let r = jacobian_fd(&xd.antipode(), &star, 1e-6).unwrap();
            assert!((&r.ambient - (&id + &outer) * k1).amax() < 1e-4);
        }
    }

    #[test]
    fn far_field_jacobian_matches_hand_derivative() {
        let a = arr(0.02);
        let star = StarController::new(a.clone(), StarParams { k1: 1.0, kappa: 1.0 }).unwrap();
        let xd = a.target().coords().clone();
        let mut s = SphereSampler::new(3, 2);
        let mut n = 0;
        while n < 50 {
            let x = s.next_point();
            if a.signed_distance(&x).unwrap().0 < 0.1 {
                continue;
            }
            // u ≡ k1 x_d, so J = −x uᵀ − (xᵀu) I
            let want = -(x.coords() * xd.transpose()) - DMatrix::identity(4, 4) * x.coords().dot(&xd);
            let r = jacobian_fd(&x, &star, 1e-6).unwrap();
            assert!((r.ambient - want).amax() < 1e-4);
            n += 1;
        }
    }

    #[test]
    fn band_edge_is_not_smooth() {
        let a = arr(0.02);
        let star = StarController::new(a.clone(), StarParams { k1: 1.0, kappa: 1.0 }).unwrap();
        let g = a.kernels()[0].clone();
        let xd = a.target().clone();
        let ang = 0.4 + (1.0f64 - 0.02).acos();
        let x = slerp(&g, &xd, ang / g.angle_to(&xd)).unwrap();
        assert!(matches!(jacobian_fd(&x, &star, 1e-6), Err(SimError::NonSmoothNeighborhood(_))));
    }
}
