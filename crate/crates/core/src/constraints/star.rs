//! Star-shaped bodies in an affine hyperplane of R^(n+1) and their radial projections onto S^n.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ConstraintError;
use crate::geometry::{distance_to_arc, normalize, GreatCircleArc, UnitPoint};
use crate::numeric::{illinois, refine_max};

/// Tolerance on the profile value for boundary points to count as members.
const PROFILE_TOL: f64 = 1e-9;
/// Final compass step of the boundary refinement, in radians of parameter angle.
const REFINE_TOL: f64 = 1e-10;

/// Shape of the body in local hyperplane coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// Σ |p_k − c_k|^q ≤ level.
    PowerSum { exponent: f64, level: f64, center: DVector<f64> },
    /// Σ ((p_k − c_k)/a_k)² ≤ 1.
    Ellipsoid { semi_axes: DVector<f64>, center: DVector<f64> },
    /// Disc of radius `outer_radius` about the origin with a disc bitten out. Not star-shaped in general.
    Crescent { outer_radius: f64, bite_center: DVector<f64>, bite_radius: f64 },
    /// Planar radius about the kernel at uniformly spaced polar angles, interpolated linearly.
    RadialTable { radii: Vec<f64> },
}

impl Profile {
    fn local_dim_hint(&self) -> Option<usize> {
        match self {
            Profile::PowerSum { center, .. } | Profile::Ellipsoid { center, .. } => Some(center.len()),
            Profile::Crescent { bite_center, .. } => Some(bite_center.len()),
            Profile::RadialTable { .. } => Some(2),
        }
    }

    fn validate(&self) -> Result<(), ConstraintError> {
        let bad = |m: &str| Err(ConstraintError::InvalidProfile(m.to_string()));
        match self {
            Profile::PowerSum { exponent, level, .. } => {
                if !(*exponent > 0.0) || !(*level > 0.0) {
                    return bad("power-sum exponent and level must be positive");
                }
            }
            Profile::Ellipsoid { semi_axes, .. } => {
                if semi_axes.iter().any(|a| !(*a > 0.0)) {
                    return bad("ellipsoid semi-axes must be positive");
                }
            }
            Profile::Crescent {
                outer_radius,
                bite_radius,
                ..
            } => {
                if !(*outer_radius > 0.0) || !(*bite_radius > 0.0) {
                    return bad("crescent radii must be positive");
                }
            }
            Profile::RadialTable { radii } => {
                if radii.len() < 3 {
                    return bad("radial table needs at least 3 entries");
                }
                if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
                    return bad("radial table entries must be positive and finite");
                }
            }
        }
        Ok(())
    }

    /// Sublevel function: ≤ 0 inside the body.
    pub fn eval(&self, p: &DVector<f64>, kernel: &DVector<f64>) -> f64 {
        match self {
            Profile::PowerSum {
                exponent,
                level,
                center,
            } => p.iter().zip(center.iter()).map(|(a, c)| (a - c).abs().powf(*exponent)).sum::<f64>() - level,
            Profile::Ellipsoid { semi_axes, center } => {
                p.iter()
                    .zip(center.iter())
                    .zip(semi_axes.iter())
                    .map(|((a, c), s)| ((a - c) / s).powi(2))
                    .sum::<f64>()
                    - 1.0
            }
            Profile::Crescent {
                outer_radius,
                bite_center,
                bite_radius,
            } => {
                let outer = p.norm() - outer_radius;
                let bite = bite_radius - (p - bite_center).norm();
                outer.max(bite)
            }
            Profile::RadialTable { radii } => {
                let v = p - kernel;
                let r = v.norm();
                if r == 0.0 {
                    return -radii.iter().cloned().fold(f64::INFINITY, f64::min);
                }
                r - table_radius(radii, v[1].atan2(v[0]))
            }
        }
    }

    /// Upper bound on ‖p − kernel‖ over the body.
    fn bound_radius(&self, kernel: &DVector<f64>) -> f64 {
        match self {
            Profile::PowerSum {
                exponent,
                level,
                center,
            } => (center - kernel).norm() + (center.len() as f64).sqrt() * level.powf(1.0 / exponent),
            Profile::Ellipsoid { semi_axes, center } => (center - kernel).norm() + semi_axes.max(),
            Profile::Crescent { outer_radius, .. } => kernel.norm() + outer_radius,
            Profile::RadialTable { radii } => radii.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Closed-form boundary radius along unit direction `d` from the kernel, when available.
    fn closed_radius(&self, kernel: &DVector<f64>, d: &[f64]) -> Option<f64> {
        let centered = |c: &DVector<f64>| c.iter().zip(kernel.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < 1e-28;
        match self {
            Profile::PowerSum {
                exponent,
                level,
                center,
            } if centered(center) => {
                let s: f64 = d.iter().map(|a| a.abs().powf(*exponent)).sum();
                Some((level / s).powf(1.0 / exponent))
            }
            Profile::Ellipsoid { semi_axes, center } if centered(center) => {
                let s: f64 = d.iter().zip(semi_axes.iter()).map(|(a, s)| (a / s).powi(2)).sum();
                Some(1.0 / s.sqrt())
            }
            Profile::RadialTable { radii } => Some(table_radius(radii, d[1].atan2(d[0]))),
            _ => None,
        }
    }
}

fn table_radius(radii: &[f64], phi: f64) -> f64 {
    let n = radii.len();
    let u = phi.rem_euclid(2.0 * PI) / (2.0 * PI) * n as f64;
    let k = (u.floor() as usize) % n;
    let w = u - u.floor();
    radii[k] * (1.0 - w) + radii[(k + 1) % n] * w
}

/// A body in the hyperplane {y : ν·y = ν·anchor}, described in an orthonormal local frame at `anchor`.
#[derive(Debug, Clone)]
pub struct EuclideanStarBody {
    anchor: DVector<f64>,
    normal: DVector<f64>,
    basis: Vec<DVector<f64>>,
    kernel: DVector<f64>,
    profile: Profile,
    offset: f64,
}

impl EuclideanStarBody {
    /// `normal` defaults to the anchor direction, `basis` to Gram–Schmidt on the standard axes,
    /// `kernel` (ambient, on the hyperplane) to the anchor.
    pub fn new(
        anchor: DVector<f64>,
        normal: Option<DVector<f64>>,
        basis: Option<Vec<DVector<f64>>>,
        kernel: Option<DVector<f64>>,
        profile: Profile,
    ) -> Result<Self, ConstraintError> {
        let dim = anchor.len();
        let n = dim - 1;
        profile.validate()?;
        if let Some(m) = profile.local_dim_hint() {
            if m != n {
                return Err(ConstraintError::DimensionMismatch { expected: n, got: m });
            }
        }
        let normal = normal.unwrap_or_else(|| anchor.clone());
        if normal.len() != dim {
            return Err(ConstraintError::DimensionMismatch {
                expected: dim,
                got: normal.len(),
            });
        }
        let nn = normal.norm();
        if !(nn > 1e-12) {
            return Err(ConstraintError::InvalidProfile("hyperplane normal is zero".into()));
        }
        let normal = normal / nn;
        let basis = match basis {
            Some(b) => {
                if b.len() != n || b.iter().any(|v| v.len() != dim) {
                    return Err(ConstraintError::InvalidProfile(format!(
                        "local basis must have {n} vectors of length {dim}"
                    )));
                }
                for (i, v) in b.iter().enumerate() {
                    if (v.norm() - 1.0).abs() > 1e-9 || v.dot(&normal).abs() > 1e-9 {
                        return Err(ConstraintError::InvalidProfile(
                            "local basis must be orthonormal and orthogonal to the normal".into(),
                        ));
                    }
                    for w in &b[..i] {
                        if v.dot(w).abs() > 1e-9 {
                            return Err(ConstraintError::InvalidProfile("local basis is not orthonormal".into()));
                        }
                    }
                }
                b
            }
            None => plane_basis(&normal),
        };
        let kernel_local = match kernel {
            Some(k) => {
                if k.len() != dim {
                    return Err(ConstraintError::DimensionMismatch {
                        expected: dim,
                        got: k.len(),
                    });
                }
                let off = &k - &anchor;
                if off.dot(&normal).abs() > 1e-9 {
                    return Err(ConstraintError::KernelOffPlane(off.dot(&normal)));
                }
                DVector::from_iterator(n, basis.iter().map(|b| b.dot(&off)))
            }
            None => DVector::zeros(n),
        };
        let offset = normal.dot(&anchor);
        Ok(EuclideanStarBody {
            anchor,
            normal,
            basis,
            kernel: kernel_local,
            profile,
            offset,
        })
    }

    pub fn local_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn anchor(&self) -> &DVector<f64> {
        &self.anchor
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// Ambient point for local coordinates.
    pub fn to_ambient(&self, p: &DVector<f64>) -> DVector<f64> {
        let mut y = self.anchor.clone();
        for (b, c) in self.basis.iter().zip(p.iter()) {
            y += b * *c;
        }
        y
    }

    fn to_local(&self, y: &DVector<f64>) -> DVector<f64> {
        let off = y - &self.anchor;
        DVector::from_iterator(self.basis.len(), self.basis.iter().map(|b| b.dot(&off)))
    }

    pub fn kernel_ambient(&self) -> DVector<f64> {
        self.to_ambient(&self.kernel)
    }

    /// Boundary radius along a direction given as a slice.
    fn radius_of(&self, d: &[f64], single_crossing: bool) -> f64 {
        match self.profile.closed_radius(&self.kernel, d) {
            Some(r) => r,
            None => self.radius(&DVector::from_column_slice(d), single_crossing),
        }
    }

    /// Local coordinates where the ray {t x : t > 0} meets the hyperplane, if it does.
    fn ray_hit(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let nx = self.normal.dot(x);
        if nx == 0.0 {
            return None;
        }
        let t = self.offset / nx;
        if t <= 0.0 {
            return None;
        }
        Some(self.to_local(&(x * t)))
    }

    fn value(&self, p: &DVector<f64>) -> f64 {
        self.profile.eval(p, &self.kernel)
    }

    /// Boundary radius along local unit direction `d`, taking the outermost crossing.
    fn radius(&self, d: &DVector<f64>, single_crossing: bool) -> f64 {
        if let Some(r) = self.profile.closed_radius(&self.kernel, d.as_slice()) {
            return r;
        }
        let rmax = self.profile.bound_radius(&self.kernel) * 1.01 + 1e-9;
        let f = |t: f64| self.value(&(&self.kernel + d * t));
        let fk = f(0.0);
        let fr = f(rmax);
        if fr <= 0.0 {
            return rmax;
        }
        if single_crossing {
            return illinois(f, 0.0, rmax, fk, fr, 1e-15);
        }
        let steps = 512;
        let h = rmax / steps as f64;
        let mut hi = rmax;
        let mut fhi = fr;
        for j in (0..steps).rev() {
            let t = j as f64 * h;
            let ft = f(t);
            if ft <= 0.0 {
                return illinois(&f, t, hi, ft, fhi, 1e-15);
            }
            hi = t;
            fhi = ft;
        }
        0.0
    }
}

/// Orthonormal completion of `normal`, preferring standard axes least aligned with it.
fn plane_basis(normal: &DVector<f64>) -> Vec<DVector<f64>> {
    let dim = normal.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| normal[i].abs().partial_cmp(&normal[j].abs()).unwrap().then(i.cmp(&j)));
    let drop = order[dim - 1];
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(dim - 1);
    for k in (0..dim).filter(|&k| k != drop) {
        let mut v = DVector::zeros(dim);
        v[k] = 1.0;
        v -= normal * normal[k];
        for b in &out {
            let c = b.dot(&v);
            v -= b * c;
        }
        let nrm = v.norm();
        out.push(v / nrm);
    }
    out
}

/// Unit vector in R^m from m − 1 hyperspherical angles.
pub fn direction_from_angles(m: usize, angles: &[f64]) -> DVector<f64> {
    let mut d = DVector::zeros(m);
    direction_into(angles, d.as_mut_slice());
    d
}

fn direction_into(angles: &[f64], out: &mut [f64]) {
    let m = out.len();
    let mut s = 1.0;
    for i in 0..m - 1 {
        out[i] = s * angles[i].cos();
        s *= angles[i].sin();
    }
    out[m - 1] = s;
}

/// Largest local dimension handled on the stack by [`DotObjective`].
const STACK_DIM: usize = 8;

/// x·ψ(b(angles)) for a fixed query x, using ‖y‖² = ‖a‖² + 2Σcⱼ(a·bⱼ) + ‖c‖² for y = a + Σcⱼbⱼ.
struct DotObjective<'a> {
    shape: &'a ProjectedStarShape,
    x: &'a DVector<f64>,
    xa: f64,
    aa: f64,
    xb: [f64; STACK_DIM],
    ab: [f64; STACK_DIM],
}

impl<'a> DotObjective<'a> {
    fn new(shape: &'a ProjectedStarShape, x: &'a DVector<f64>) -> Self {
        let body = &shape.body;
        let mut xb = [0.0; STACK_DIM];
        let mut ab = [0.0; STACK_DIM];
        if body.local_dim() <= STACK_DIM {
            for (j, b) in body.basis.iter().enumerate() {
                xb[j] = x.dot(b);
                ab[j] = body.anchor.dot(b);
            }
        }
        DotObjective {
            shape,
            x,
            xa: x.dot(&body.anchor),
            aa: body.anchor.norm_squared(),
            xb,
            ab,
        }
    }

    fn eval(&self, angles: &[f64]) -> f64 {
        let body = &self.shape.body;
        let m = body.local_dim();
        if m > STACK_DIM {
            return self.shape.boundary_point(angles).coords().dot(self.x);
        }
        let mut d = [0.0; STACK_DIM];
        direction_into(angles, &mut d[..m]);
        let r = body.radius_of(&d[..m], self.shape.single_crossing);
        let mut num = self.xa;
        let mut den = self.aa;
        for j in 0..m {
            let c = body.kernel[j] + d[j] * r;
            num += c * self.xb[j];
            den += c * (2.0 * self.ab[j] + c);
        }
        num / den.sqrt()
    }
}

/// Hyperspherical angle grid with `res` steps around the last angle and `res/2` along polar ones.
pub(crate) fn angle_grid(m: usize, res: usize) -> (Vec<Vec<f64>>, f64) {
    let na = res.max(8).div_ceil(4) * 4;
    let np = na / 2;
    let step = 2.0 * PI / na as f64;
    let mut out = Vec::new();
    let mut cur = vec![0.0; m - 1];
    fn rec(level: usize, m: usize, na: usize, np: usize, at_pole: bool, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if level == m - 1 {
            out.push(cur.clone());
            return;
        }
        if at_pole {
            cur[level] = 0.0;
            rec(level + 1, m, na, np, true, cur, out);
            return;
        }
        if level == m - 2 {
            for k in 0..na {
                cur[level] = 2.0 * PI * k as f64 / na as f64;
                rec(level + 1, m, na, np, false, cur, out);
            }
        } else {
            for j in 0..=np {
                cur[level] = PI * j as f64 / np as f64;
                rec(level + 1, m, na, np, j == 0 || j == np, cur, out);
            }
        }
    }
    rec(0, m, na, np, false, &mut cur, &mut out);
    (out, step)
}

/// Build settings for a projected star shape.
#[derive(Debug, Clone)]
pub struct StarBuildOptions {
    pub resolution: usize,
    /// Reject bodies whose rays from the kernel leave and re-enter.
    pub verify_star: bool,
    pub self_test_seed: u64,
}

impl Default for StarBuildOptions {
    fn default() -> Self {
        StarBuildOptions {
            resolution: 64,
            verify_star: true,
            self_test_seed: 0x5eed,
        }
    }
}

/// Result of a boundary max-dot query.
#[derive(Debug, Clone)]
pub struct NearestBoundary {
    pub point: UnitPoint,
    pub dot: f64,
    /// Two separated local maxima agree within 1e-9.
    pub tie: bool,
}

/// Radial projection ψ(O) of a star body, with a dense boundary cache.
#[derive(Debug, Clone)]
pub struct ProjectedStarShape {
    body: EuclideanStarBody,
    angles: Vec<Vec<f64>>,
    points: Vec<f64>,
    dim: usize,
    grid_step: f64,
    kernel_on_sphere: UnitPoint,
    bound_angle: f64,
    single_crossing: bool,
}

pub fn build_projected_star(body: EuclideanStarBody, resolution: usize) -> Result<ProjectedStarShape, ConstraintError> {
    build_projected_star_with(
        body,
        &StarBuildOptions {
            resolution,
            ..Default::default()
        },
    )
}

pub fn build_projected_star_with(
    body: EuclideanStarBody,
    opts: &StarBuildOptions,
) -> Result<ProjectedStarShape, ConstraintError> {
    let m = body.local_dim();
    let dim = m + 1;
    // the hyperplane must avoid the origin, otherwise the projection collapses
    if body.offset.abs() <= 1e-6 {
        let origin_local = body.to_local(&DVector::zeros(dim));
        if body.value(&origin_local) <= PROFILE_TOL {
            return Err(ConstraintError::OriginInsideBody);
        }
        return Err(ConstraintError::PlaneThroughOrigin);
    }
    if body.value(&body.kernel) >= 0.0 {
        return Err(ConstraintError::KernelOutsideBody);
    }
    let (angles, grid_step) = angle_grid(m, opts.resolution);
    let mut points = Vec::with_capacity(angles.len() * dim);
    let mut local_pts = Vec::with_capacity(angles.len());
    for a in &angles {
        let d = direction_from_angles(m, a);
        let r = body.radius(&d, opts.verify_star);
        if opts.verify_star {
            check_ray(&body, &d, r)?;
        }
        let p = &body.kernel + &d * r;
        let y = body.to_ambient(&p);
        let u = normalize(&y).map_err(|_| ConstraintError::OriginInsideBody)?;
        points.extend(u.iter());
        local_pts.push(p);
    }
    let kernel_on_sphere = normalize(&body.kernel_ambient()).map_err(|_| ConstraintError::OriginInsideBody)?;
    let mut shape = ProjectedStarShape {
        body,
        angles,
        points,
        dim,
        grid_step,
        kernel_on_sphere,
        bound_angle: 0.0,
        single_crossing: opts.verify_star,
    };
    let g = shape.kernel_on_sphere.clone();
    let mut widest: f64 = 0.0;
    for k in 0..shape.angles.len() {
        widest = widest.max(crate::geometry::arc_angle(shape.cached(k).dot(&g)));
    }
    shape.bound_angle = (widest + 0.05 + grid_step).min(PI);
    projection_self_test(&shape, &local_pts, opts.self_test_seed)?;
    Ok(shape)
}

fn check_ray(body: &EuclideanStarBody, d: &DVector<f64>, r: f64) -> Result<(), ConstraintError> {
    let samples = 64;
    for j in 1..samples {
        let t = r * j as f64 / samples as f64;
        if body.value(&(&body.kernel + d * t)) > PROFILE_TOL {
            return Err(ConstraintError::NotStarShaped(format!("ray {:?} leaves the body at t = {t}", d.as_slice())));
        }
    }
    let rmax = body.profile.bound_radius(&body.kernel) * 1.01;
    for j in 1..=samples {
        let t = r + (rmax - r) * j as f64 / samples as f64;
        if t > r * (1.0 + 1e-9) + 1e-12 && body.value(&(&body.kernel + d * t)) < -PROFILE_TOL {
            return Err(ConstraintError::NotStarShaped(format!(
                "ray {:?} re-enters the body at t = {t}",
                d.as_slice()
            )));
        }
    }
    Ok(())
}

/// Checks that straight chords between boundary points project onto geodesic arcs, with monotone parameter.
fn projection_self_test(s: &ProjectedStarShape, local_pts: &[DVector<f64>], seed: u64) -> Result<(), ConstraintError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = local_pts.len();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        let ya = s.body.to_ambient(&local_pts[i]);
        let yb = s.body.to_ambient(&local_pts[j]);
        let (a, b) = (normalize(&ya).unwrap(), normalize(&yb).unwrap());
        let Ok(arc) = GreatCircleArc::new(a.clone(), b) else {
            continue;
        };
        let mut prev = -1.0;
        for k in 0..50 {
            let l = k as f64 / 49.0;
            let p = normalize(&(&ya * (1.0 - l) + &yb * l)).map_err(|_| ConstraintError::OriginInsideBody)?;
            worst = worst.max(distance_to_arc(&p, &arc, 64));
            let q = a.angle_to(&p);
            if arc.theta() > 1e-6 && q <= prev {
                return Err(ConstraintError::ProjectionSelfTest(format!("parameter map not monotone at λ = {l}")));
            }
            prev = q;
        }
    }
    if worst > 1e-9 {
        return Err(ConstraintError::ProjectionSelfTest(format!("chord deviates from arc by {worst:e}")));
    }
    Ok(())
}

impl ProjectedStarShape {
    pub fn body(&self) -> &EuclideanStarBody {
        &self.body
    }

    pub fn kernel_on_sphere(&self) -> &UnitPoint {
        &self.kernel_on_sphere
    }

    pub fn cache_len(&self) -> usize {
        self.angles.len()
    }

    /// Angular spacing of the cache parameter grid.
    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    /// Angle from the kernel that bounds the whole set, with slack.
    pub fn bound_angle(&self) -> f64 {
        self.bound_angle
    }

    fn cached(&self, k: usize) -> UnitPoint {
        let v = DVector::from_column_slice(&self.points[k * self.dim..(k + 1) * self.dim]);
        UnitPoint::new(v).expect("cached points are unit")
    }

    pub fn cache_points(&self) -> impl Iterator<Item = UnitPoint> + '_ {
        (0..self.angles.len()).map(|k| self.cached(k))
    }

    /// Boundary point at hyperspherical angles of the local frame.
    pub fn boundary_point(&self, angles: &[f64]) -> UnitPoint {
        let d = direction_from_angles(self.body.local_dim(), angles);
        let r = self.body.radius(&d, self.single_crossing);
        normalize(&self.body.to_ambient(&(&self.body.kernel + d * r))).expect("hyperplane avoids the origin")
    }

    /// Local-frame points on segments from the kernel to the boundary, for sampling checks.
    pub fn boundary_local(&self, angles: &[f64]) -> DVector<f64> {
        let d = direction_from_angles(self.body.local_dim(), angles);
        let r = self.body.radius(&d, self.single_crossing);
        &self.body.kernel + d * r
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        match self.body.ray_hit(x) {
            Some(p) => self.body.value(&p) <= PROFILE_TOL,
            None => false,
        }
    }

    pub fn contains_interior(&self, x: &DVector<f64>) -> bool {
        match self.body.ray_hit(x) {
            Some(p) => self.body.value(&p) < -PROFILE_TOL,
            None => false,
        }
    }

    /// Supremum of x·b over the boundary: cache scan, then local refinement of the best candidates.
    pub fn nearest_boundary(&self, x: &DVector<f64>) -> Result<NearestBoundary, ConstraintError> {
        let count = self.angles.len();
        if count == 0 {
            return Err(ConstraintError::EmptyCache);
        }
        const K: usize = 3;
        let mut top: Vec<(f64, usize)> = Vec::with_capacity(K + 1);
        for k in 0..count {
            let p = &self.points[k * self.dim..(k + 1) * self.dim];
            let dot: f64 = p.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            if top.len() == K && dot <= top[K - 1].0 {
                continue;
            }
            if let Some(pos) = top.iter().position(|&(_, j)| self.param_close(j, k)) {
                if dot > top[pos].0 {
                    top.remove(pos);
                } else {
                    continue;
                }
            }
            let at = top.partition_point(|&(v, _)| v >= dot);
            top.insert(at, (dot, k));
            top.truncate(K);
        }
        let obj = DotObjective::new(self, x);
        let f = |a: &[f64]| obj.eval(a);
        let mut refined: Vec<(f64, Vec<f64>)> = top
            .iter()
            .map(|&(_, k)| {
                let (a, v) = refine_max(f, &self.angles[k], self.grid_step, 1e-4, REFINE_TOL, 20_000);
                (v, a)
            })
            .collect();
        refined.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let tie = refined.len() > 1 && refined[0].0 - refined[1].0 < 1e-9 && {
            let p0 = self.boundary_point(&refined[0].1);
            let p1 = self.boundary_point(&refined[1].1);
            p0.angle_to(&p1) > self.grid_step
        };
        let (dot, a) = refined.swap_remove(0);
        Ok(NearestBoundary {
            point: self.boundary_point(&a),
            dot,
            tie,
        })
    }

    fn param_close(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.angles[i], &self.angles[j]);
        let last = a.len() - 1;
        a.iter().zip(b.iter()).enumerate().all(|(k, (u, v))| {
            let mut d = (u - v).abs();
            if k == last {
                d = d.min(2.0 * PI - d);
            }
            d <= 2.5 * self.grid_step
        })
    }

    /// d_s(x, U): 0 inside, 1 − sup over the boundary of x·b outside.
    pub fn distance(&self, x: &DVector<f64>) -> Result<f64, ConstraintError> {
        if self.contains(x) {
            return Ok(0.0);
        }
        Ok((1.0 - self.nearest_boundary(x)?.dot).max(0.0))
    }

    /// Distance outside, minus the distance to the boundary inside.
    pub fn signed_distance(&self, x: &DVector<f64>) -> Result<f64, ConstraintError> {
        let d = (1.0 - self.nearest_boundary(x)?.dot).max(0.0);
        Ok(if self.contains_interior(x) { -d } else { d })
    }

    /// Seeded boundary samples at random parameter angles.
    pub fn boundary_samples(&self, count: usize, seed: u64) -> Vec<UnitPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.body.local_dim();
        (0..count)
            .map(|_| {
                let mut v = DVector::zeros(m);
                while v.norm() < 1e-8 {
                    v = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
                }
                let d = v.normalize();
                let r = self.body.radius(&d, self.single_crossing);
                normalize(&self.body.to_ambient(&(&self.body.kernel + d * r))).unwrap()
            })
            .collect()
    }
}
