//! Geometry of the unit n-sphere embedded in R^(n+1).
//!
//! Points are stored as dense vectors; every constructor enforces unit norm.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on |‖x‖ − 1| accepted at construction.
pub const UNIT_TOL: f64 = 1e-12;
/// Tolerance on base·vec for tangent vectors.
pub const TANGENT_TOL: f64 = 1e-10;
/// Below this norm a vector cannot be normalized.
pub const NEAR_ZERO: f64 = 1e-12;
/// Below this arc angle slerp falls back to normalized lerp.
pub const SLERP_SMALL_ANGLE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("vector norm {0:e} is too small to normalize")]
    NearZeroVector(f64),
    #[error("endpoints are antipodal (a·b = {0})")]
    AntipodalEndpoints(f64),
    #[error("vector norm {0} is not unit")]
    NotUnit(f64),
    #[error("sphere dimension {0} is below 2")]
    DimensionTooSmall(usize),
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A point on S^n, stored with n+1 coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitPoint(DVector<f64>);

impl UnitPoint {
    /// Accepts a vector that is already unit within `UNIT_TOL`, then renormalizes it exactly.
    pub fn new(v: DVector<f64>) -> Result<Self, GeometryError> {
        let nrm = v.norm();
        if (nrm - 1.0).abs() > UNIT_TOL * 1e3 || !nrm.is_finite() {
            return Err(GeometryError::NotUnit(nrm));
        }
        if v.len() < 3 {
            return Err(GeometryError::DimensionTooSmall(v.len().saturating_sub(1)));
        }
        Ok(UnitPoint(v / nrm))
    }

    pub fn from_slice(s: &[f64]) -> Result<Self, GeometryError> {
        Self::new(DVector::from_column_slice(s))
    }

    /// Standard basis vector e_k on S^n (k is zero-based).
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = DVector::zeros(n + 1);
        v[k] = 1.0;
        UnitPoint(v)
    }

    /// Sphere dimension n (the ambient dimension is n + 1).
    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn dot(&self, other: &UnitPoint) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn antipode(&self) -> UnitPoint {
        UnitPoint(-&self.0)
    }

    /// Arc angle to another point, in radians.
    /// Accurate for nearly equal and nearly antipodal points, unlike acos of the dot product.
    pub fn angle_to(&self, other: &UnitPoint) -> f64 {
        2.0 * (&self.0 - &other.0).norm().atan2((&self.0 + &other.0).norm())
    }
}

impl std::ops::Deref for UnitPoint {
    type Target = DVector<f64>;
    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for UnitPoint {
    type Error = GeometryError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        normalize(&DVector::from_vec(v))
    }
}

impl From<UnitPoint> for Vec<f64> {
    fn from(p: UnitPoint) -> Vec<f64> {
        p.0.iter().copied().collect()
    }
}

/// A vector in the tangent space at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: UnitPoint,
    vec: DVector<f64>,
}

impl TangentVector {
    pub fn base(&self) -> &UnitPoint {
        &self.base
    }

    pub fn vec(&self) -> &DVector<f64> {
        &self.vec
    }

    pub fn into_vec(self) -> DVector<f64> {
        self.vec
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }
}

/// The minimal great-circle arc between two non-antipodal points.
#[derive(Debug, Clone, PartialEq)]
pub struct GreatCircleArc {
    a: UnitPoint,
    b: UnitPoint,
    theta: f64,
}

impl GreatCircleArc {
    pub fn new(a: UnitPoint, b: UnitPoint) -> Result<Self, GeometryError> {
        check_dims(&a, &b)?;
        let c = a.dot(&b);
        if c <= -1.0 + 1e-12 {
            return Err(GeometryError::AntipodalEndpoints(c));
        }
        let theta = a.angle_to(&b);
        Ok(GreatCircleArc { a, b, theta })
    }

    pub fn a(&self) -> &UnitPoint {
        &self.a
    }

    pub fn b(&self) -> &UnitPoint {
        &self.b
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn at(&self, lambda: f64) -> UnitPoint {
        if lambda == 0.0 {
            return self.a.clone();
        }
        if lambda == 1.0 {
            return self.b.clone();
        }
        slerp_unchecked(&self.a, &self.b, self.theta, lambda)
    }
}

fn check_dims(a: &UnitPoint, b: &UnitPoint) -> Result<(), GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// arccos clamped to [-1, 1].
pub fn arc_angle(cos: f64) -> f64 {
    cos.clamp(-1.0, 1.0).acos()
}

/// (I − x xᵀ) a, attached at x.
pub fn project_to_tangent(x: &UnitPoint, a: &DVector<f64>) -> TangentVector {
    TangentVector {
        base: x.clone(),
        vec: project(x, a),
    }
}

/// Raw projector (I − x xᵀ) a without the tangent wrapper.
pub fn project(x: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
    a - x * x.dot(a)
}

/// 1 − x·y.
pub fn spherical_distance(x: &UnitPoint, y: &UnitPoint) -> f64 {
    (1.0 - x.dot(y)).clamp(0.0, 2.0)
}

/// Converts a spherical distance value into the equivalent arc angle.
pub fn distance_to_angle(d: f64) -> f64 {
    arc_angle(1.0 - d)
}

/// Converts an arc angle into a spherical distance value.
pub fn angle_to_distance(theta: f64) -> f64 {
    1.0 - theta.cos()
}

pub fn normalize(p: &DVector<f64>) -> Result<UnitPoint, GeometryError> {
    let nrm = p.norm();
    if !(nrm > NEAR_ZERO) {
        return Err(GeometryError::NearZeroVector(nrm));
    }
    if p.len() < 3 {
        return Err(GeometryError::DimensionTooSmall(p.len().saturating_sub(1)));
    }
    Ok(UnitPoint(p / nrm))
}

pub fn slerp(a: &UnitPoint, b: &UnitPoint, lambda: f64) -> Result<UnitPoint, GeometryError> {
    Ok(GreatCircleArc::new(a.clone(), b.clone())?.at(lambda))
}

fn slerp_unchecked(a: &UnitPoint, b: &UnitPoint, theta: f64, lambda: f64) -> UnitPoint {
    let v = if theta < SLERP_SMALL_ANGLE {
        a.coords() * (1.0 - lambda) + b.coords() * lambda
    } else {
        let s = theta.sin();
        a.coords() * (((1.0 - lambda) * theta).sin() / s) + b.coords() * ((lambda * theta).sin() / s)
    };
    let nrm = v.norm();
    UnitPoint(v / nrm)
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section minimization of a unimodal function on [lo, hi].
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    let m = 0.5 * (lo + hi);
    (m, f(m))
}

/// Minimum spherical distance from x to the arc, by grid search plus golden refinement.
pub fn distance_to_arc(x: &UnitPoint, arc: &GreatCircleArc, grid: usize) -> f64 {
    let grid = grid.max(2);
    let f = |l: f64| spherical_distance(x, &arc.at(l));
    let mut best = (0usize, f64::INFINITY);
    for k in 0..=grid {
        let v = f(k as f64 / grid as f64);
        if v < best.1 {
            best = (k, v);
        }
    }
    let h = 1.0 / grid as f64;
    let lo = ((best.0 as f64 - 1.0) * h).max(0.0);
    let hi = ((best.0 as f64 + 1.0) * h).min(1.0);
    let (_, refined) = golden_min(f, lo, hi, 1e-12);
    best.1.min(refined)
}

/// Deterministic uniform sampler on S^n.
#[derive(Debug, Clone)]
pub struct SphereSampler {
    n: usize,
    rng: ChaCha8Rng,
}

impl SphereSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        SphereSampler {
            n,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_point(&mut self) -> UnitPoint {
        loop {
            let v = DVector::from_fn(self.n + 1, |_, _| StandardNormal.sample(&mut self.rng));
            if let Ok(p) = normalize(&v) {
                return p;
            }
        }
    }

    /// A standard normal draw from the same stream, for auxiliary randomness.
    pub fn gaussian(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn uniform(&mut self) -> f64 {
        use rand::Rng;
        self.rng.gen::<f64>()
    }
}

/// One uniform point on S^n for the given seed.
pub fn sample_uniform(n: usize, seed: u64) -> Result<UnitPoint, GeometryError> {
    if n < 2 {
        return Err(GeometryError::DimensionTooSmall(n));
    }
    Ok(SphereSampler::new(n, seed).next_point())
}

/// Orthonormal basis of the tangent space at x, as n columns of length n + 1.
pub fn tangent_basis(x: &DVector<f64>) -> Vec<DVector<f64>> {
    let m = x.len();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(m - 1);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| x[i].abs().partial_cmp(&x[j].abs()).unwrap());
    for &k in &order {
        if out.len() == m - 1 {
            break;
        }
        let mut v = DVector::zeros(m);
        v[k] = 1.0;
        v -= x * x[k];
        for b in &out {
            let c = b.dot(&v);
            v -= b * c;
        }
        let nrm = v.norm();
        if nrm > 1e-8 {
            out.push(v / nrm);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn e(n: usize, k: usize) -> UnitPoint {
        UnitPoint::basis(n, k)
    }

    fn point(v: &[f64]) -> UnitPoint {
        normalize(&DVector::from_column_slice(v)).unwrap()
    }

    #[test]
    fn projection_examples() {
        let x = e(3, 0);
        assert_eq!(project_to_tangent(&x, &e(3, 0)).norm(), 0.0);
        assert_eq!(project_to_tangent(&x, &e(3, 1)).vec(), e(3, 1).coords());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = point(&[s, s, 0.0, 0.0]);
        let p = project_to_tangent(&x, e(3, 0).coords());
        let want = [0.5, -0.5, 0.0, 0.0];
        for k in 0..4 {
            assert!(close(p.vec()[k], want[k], 1e-15));
        }
    }

    #[test]
    fn distance_examples() {
        let x = e(2, 0);
        assert_eq!(spherical_distance(&x, &x), 0.0);
        assert_eq!(spherical_distance(&x, &x.antipode()), 2.0);
        assert_eq!(spherical_distance(&x, &e(2, 1)), 1.0);
    }

    #[test]
    fn slerp_examples() {
        let a = e(3, 0);
        let b = e(3, 1);
        assert_eq!(slerp(&a, &b, 0.0).unwrap(), a);
        assert_eq!(slerp(&a, &b, 1.0).unwrap(), b);
        let m = slerp(&a, &b, 0.5).unwrap();
        assert!(close(m[0], 0.5f64.sqrt(), 1e-15) && close(m[1], 0.5f64.sqrt(), 1e-15));
        let t = slerp(&a, &b, 1.0 / 3.0).unwrap();
        assert!(close(t[0], (std::f64::consts::PI / 3.0).sin(), 1e-15));
        assert!(close(t[1], (std::f64::consts::PI / 6.0).sin(), 1e-15));
        assert!(matches!(
            slerp(&a, &a.antipode(), 0.5),
            Err(GeometryError::AntipodalEndpoints(_))
        ));
    }

    #[test]
    fn slerp_small_angle_fallback() {
        let a = e(2, 0);
        let b = point(&[1.0, 1e-10, 0.0]);
        let m = slerp(&a, &b, 0.5).unwrap();
        assert!(close(m.norm(), 1.0, 1e-15));
        assert!(close(m[1], 0.5e-10, 1e-20));
    }

    #[test]
    fn arc_distance_examples() {
        let a = e(3, 0);
        let b = point(&[0.2, 1.0, 0.3, 0.0]);
        let arc = GreatCircleArc::new(a.clone(), b.clone()).unwrap();
        assert!(distance_to_arc(&arc.at(0.42), &arc, 100) < 1e-9);
        assert_eq!(distance_to_arc(&a, &arc, 100), 0.0);
        let arc = GreatCircleArc::new(e(3, 0), e(3, 1)).unwrap();
        assert!(close(distance_to_arc(&e(3, 2), &arc, 100), 1.0, 1e-15));
    }

    #[test]
    fn normalize_examples() {
        let p = normalize(&DVector::from_column_slice(&[3.0, 4.0, 0.0, 0.0])).unwrap();
        assert!(close(p[0], 0.6, 1e-15) && close(p[1], 0.8, 1e-15));
        let q = normalize(p.coords()).unwrap();
        assert_eq!(p, q);
        assert!(matches!(
            normalize(&DVector::zeros(4)),
            Err(GeometryError::NearZeroVector(_))
        ));
    }

    #[test]
    fn sampler_is_deterministic_and_uniform() {
        let a = sample_uniform(3, 17).unwrap();
        let b = sample_uniform(3, 17).unwrap();
        assert_eq!(a, b);
        assert!(close(a.norm(), 1.0, 1e-12));
        let mut s = SphereSampler::new(2, 5);
        let mut mean = [0.0; 3];
        let count = 10_000;
        for _ in 0..count {
            let p = s.next_point();
            for k in 0..3 {
                mean[k] += p[k] / count as f64;
            }
        }
        for m in mean {
            assert!(m.abs() < 0.05, "mean {m}");
        }
        assert!(matches!(sample_uniform(1, 0), Err(GeometryError::DimensionTooSmall(1))));
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let x = point(&[0.3, -0.2, 0.9, 0.1]);
        let b = tangent_basis(x.coords());
        assert_eq!(b.len(), 3);
        for i in 0..3 {
            assert!(b[i].dot(x.coords()).abs() < 1e-14);
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(close(b[i].dot(&b[j]), want, 1e-14));
            }
        }
    }

    fn arb_point(n: usize) -> impl Strategy<Value = UnitPoint> {
        proptest::collection::vec(-1.0f64..1.0, n + 1)
            .prop_filter_map("near zero", |v| normalize(&DVector::from_vec(v)).ok())
    }

    proptest! {
        #[test]
        fn projection_is_tangent(x in arb_point(3), a in proptest::collection::vec(-5.0f64..5.0, 4)) {
            let a = DVector::from_vec(a);
            prop_assert!(project_to_tangent(&x, &a).vec().dot(x.coords()).abs() < 1e-10);
            prop_assert!(project_to_tangent(&x, x.coords()).norm() < 1e-12);
        }

        #[test]
        fn slerp_path_length_matches_angle(a in arb_point(3), b in arb_point(3)) {
            prop_assume!(a.dot(&b) > -0.999);
            let arc = GreatCircleArc::new(a.clone(), b.clone()).unwrap();
            let steps = 2000;
            let mut len = 0.0;
            let mut prev = arc.at(0.0);
            for k in 1..=steps {
                let p = arc.at(k as f64 / steps as f64);
                len += prev.angle_to(&p);
                prev = p;
            }
            prop_assert!((len - arc.theta()).abs() < 1e-6);
        }

        #[test]
        fn slerp_has_no_tangential_acceleration(a in arb_point(4), b in arb_point(4), l in 0.05f64..0.95) {
            prop_assume!(a.dot(&b) > -0.99);
            let arc = GreatCircleArc::new(a, b).unwrap();
            let h = 1e-3;
            let p = arc.at(l);
            let acc = (arc.at(l + h).coords() - p.coords() * 2.0 + arc.at(l - h).coords()) / (h * h);
            let tang = project(p.coords(), &acc);
            prop_assert!(tang.norm() < 1e-5 * arc.theta().powi(2).max(1e-3));
        }

        #[test]
        fn arc_metric_triangle_inequality(x in arb_point(3), y in arb_point(3), z in arb_point(3)) {
            let dxy = distance_to_angle(spherical_distance(&x, &y));
            let dyz = distance_to_angle(spherical_distance(&y, &z));
            let dxz = distance_to_angle(spherical_distance(&x, &z));
            prop_assert!(dxz <= dxy + dyz + 1e-9);
        }
    }
}
