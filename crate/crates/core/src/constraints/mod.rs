//! Unsafe regions on the sphere: caps and projected star bodies, their distances, and arrangement checks.

mod cap;
mod regions;
mod star;
mod validate;

pub use cap::ConicCap;
pub use regions::{region_ri_membership, validate_region_disjointness, RegionReport};
pub use star::{
    build_projected_star, build_projected_star_with, direction_from_angles, EuclideanStarBody, NearestBoundary,
    ProjectedStarShape, Profile, StarBuildOptions,
};
pub use validate::{
    pairwise_separation, pairwise_separation_sets, phi, suggest_epsilon, validate_kernel, KernelError, KernelReport,
};

use nalgebra::DVector;
use thiserror::Error;

use crate::geometry::{angle_to_distance, arc_angle, distance_to_angle, tangent_basis, UnitPoint};

/// Signed distances above this (negative) value count as on the boundary rather than inside.
pub const INSIDE_TOL: f64 = 1e-9;

/// Boundary samples per set used when an arrangement measures its own separation.
pub const DEFAULT_SEPARATION_SAMPLES: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("invalid cap: {0}")]
    InvalidCap(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("the body contains the origin")]
    OriginInsideBody,
    #[error("the body's hyperplane passes through the origin")]
    PlaneThroughOrigin,
    #[error("body is not star-shaped about its kernel: {0}")]
    NotStarShaped(String),
    #[error("kernel point is not inside the body")]
    KernelOutsideBody,
    #[error("kernel point is off the body's hyperplane by {0}")]
    KernelOffPlane(f64),
    #[error("projection self-test failed: {0}")]
    ProjectionSelfTest(String),
    #[error("boundary cache is empty")]
    EmptyCache,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("value {0} outside the domain (0, 2]")]
    DomainError(f64),
    #[error("target lies inside unsafe set {0}")]
    TargetInsideUnsafe(usize),
    #[error("unsafe sets {0} and {1} overlap")]
    Overlapping(usize, usize),
    #[error("invalid arrangement: {0}")]
    InvalidArrangement(String),
}

/// One unsafe region.
#[derive(Debug, Clone)]
pub enum ConstraintSet {
    Cap(ConicCap),
    Star(Box<ProjectedStarShape>),
}

impl From<ConicCap> for ConstraintSet {
    fn from(c: ConicCap) -> Self {
        ConstraintSet::Cap(c)
    }
}

impl From<ProjectedStarShape> for ConstraintSet {
    fn from(s: ProjectedStarShape) -> Self {
        ConstraintSet::Star(Box::new(s))
    }
}

impl ConstraintSet {
    pub fn ambient_dim(&self) -> usize {
        self.default_kernel().len()
    }

    pub fn is_cap(&self) -> bool {
        matches!(self, ConstraintSet::Cap(_))
    }

    /// Closed membership (boundary counts as inside).
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        match self {
            ConstraintSet::Cap(c) => c.contains(x),
            ConstraintSet::Star(s) => s.contains(x),
        }
    }

    pub fn contains_interior(&self, x: &DVector<f64>) -> bool {
        match self {
            ConstraintSet::Cap(c) => c.contains_interior(x),
            ConstraintSet::Star(s) => s.contains_interior(x),
        }
    }

    pub fn distance(&self, x: &DVector<f64>) -> Result<f64, ConstraintError> {
        match self {
            ConstraintSet::Cap(c) => Ok(c.distance(x)),
            ConstraintSet::Star(s) => s.distance(x),
        }
    }

    pub fn signed_distance(&self, x: &DVector<f64>) -> Result<f64, ConstraintError> {
        match self {
            ConstraintSet::Cap(c) => Ok(c.signed_distance(x)),
            ConstraintSet::Star(s) => s.signed_distance(x),
        }
    }

    /// Center and angular radius of a cap that contains the set.
    pub fn bounding_cap(&self) -> (&UnitPoint, f64) {
        match self {
            ConstraintSet::Cap(c) => (c.axis(), c.xi()),
            ConstraintSet::Star(s) => (s.kernel_on_sphere(), s.bound_angle()),
        }
    }

    /// Signed distance when it can be at most `limit`; `None` when the bounding cap proves it larger.
    pub fn signed_distance_within(&self, x: &DVector<f64>, limit: f64) -> Result<Option<f64>, ConstraintError> {
        let (c, r) = self.bounding_cap();
        let ang = arc_angle(x.dot(c));
        if ang - r > distance_to_angle(limit.min(2.0)) + 1e-12 {
            return Ok(None);
        }
        let d = self.signed_distance(x)?;
        Ok(if d <= limit { Some(d) } else { None })
    }

    /// The natural kernel: the cap axis or the projected body kernel.
    pub fn default_kernel(&self) -> &UnitPoint {
        match self {
            ConstraintSet::Cap(c) => c.axis(),
            ConstraintSet::Star(s) => s.kernel_on_sphere(),
        }
    }

    /// Number of boundary parameters (sphere dimension minus one).
    fn boundary_params(&self) -> usize {
        self.ambient_dim() - 2
    }

    /// Boundary point at hyperspherical parameter angles.
    pub fn boundary_at(&self, angles: &[f64]) -> UnitPoint {
        match self {
            ConstraintSet::Cap(c) => {
                let basis = tangent_basis(c.axis().coords());
                let d = direction_from_angles(basis.len(), angles);
                let mut t = DVector::zeros(c.axis().len());
                for (b, w) in basis.iter().zip(d.iter()) {
                    t += b * *w;
                }
                c.boundary_point(&t)
            }
            ConstraintSet::Star(s) => s.boundary_point(angles),
        }
    }

    /// Parameter grid over the boundary with roughly `samples` points, and its angular step.
    pub fn boundary_grid(&self, samples: usize) -> (Vec<(Vec<f64>, UnitPoint)>, f64) {
        let m = self.boundary_params() + 1;
        let res = if m == 2 {
            samples
        } else {
            ((2 * samples) as f64).powf(1.0 / (m - 1) as f64).ceil() as usize
        };
        let (grid, step) = star::angle_grid(m, res);
        let pts = grid
            .into_iter()
            .map(|a| {
                let p = self.boundary_at(&a);
                (a, p)
            })
            .collect();
        (pts, step)
    }

    pub fn boundary_samples(&self, count: usize, seed: u64) -> Vec<UnitPoint> {
        match self {
            ConstraintSet::Cap(c) => c.boundary_samples(count, seed),
            ConstraintSet::Star(s) => s.boundary_samples(count, seed),
        }
    }
}

/// Where a point sits relative to the arrangement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Proximity {
    /// Outside every ε-band.
    Clear,
    /// Inside the ε-band of set `index` (distance in [0, ε]).
    Band { index: usize, distance: f64 },
    /// Strictly inside set `index`, deeper than the boundary tolerance.
    Inside { index: usize, depth: f64 },
}

/// The unsafe regions together with target, kernels and band width.
#[derive(Debug, Clone)]
pub struct ConstraintArrangement {
    sets: Vec<ConstraintSet>,
    kernels: Vec<UnitPoint>,
    target: UnitPoint,
    epsilon: f64,
    delta_measured: f64,
    configured_delta: Option<f64>,
}

impl ConstraintArrangement {
    /// Builds the arrangement and measures pairwise separation. Kernels default to each set's natural kernel.
    pub fn new(
        sets: Vec<ConstraintSet>,
        kernels: Option<Vec<UnitPoint>>,
        target: UnitPoint,
        epsilon: f64,
    ) -> Result<Self, ConstraintError> {
        let dim = target.len();
        for s in &sets {
            if s.ambient_dim() != dim {
                return Err(ConstraintError::DimensionMismatch {
                    expected: dim,
                    got: s.ambient_dim(),
                });
            }
        }
        let kernels = match kernels {
            Some(k) => {
                if k.len() != sets.len() {
                    return Err(ConstraintError::InvalidArrangement(format!(
                        "{} kernels for {} sets",
                        k.len(),
                        sets.len()
                    )));
                }
                if let Some(bad) = k.iter().find(|g| g.len() != dim) {
                    return Err(ConstraintError::DimensionMismatch {
                        expected: dim,
                        got: bad.len(),
                    });
                }
                k
            }
            None => sets.iter().map(|s| s.default_kernel().clone()).collect(),
        };
        if !(epsilon > 0.0) || epsilon.is_nan() {
            return Err(ConstraintError::InvalidArrangement(format!("band width {epsilon} must be positive")));
        }
        let delta_measured = pairwise_separation_sets(&sets, DEFAULT_SEPARATION_SAMPLES)?;
        Ok(ConstraintArrangement {
            sets,
            kernels,
            target,
            epsilon,
            delta_measured,
            configured_delta: None,
        })
    }

    pub fn with_configured_delta(mut self, delta: Option<f64>) -> Self {
        self.configured_delta = delta;
        self
    }

    /// Same sets and separation with a different band width.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut a = self.clone();
        a.epsilon = epsilon;
        a
    }

    pub fn sets(&self) -> &[ConstraintSet] {
        &self.sets
    }

    pub fn kernels(&self) -> &[UnitPoint] {
        &self.kernels
    }

    pub fn target(&self) -> &UnitPoint {
        &self.target
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta_measured(&self) -> f64 {
        self.delta_measured
    }

    pub fn configured_delta(&self) -> Option<f64> {
        self.configured_delta
    }

    pub fn all_caps(&self) -> bool {
        self.sets.iter().all(ConstraintSet::is_cap)
    }

    /// ε̄ = d_s(x_d, U); +∞ with no sets.
    pub fn epsilon_bar(&self) -> Result<f64, ConstraintError> {
        let mut best = f64::INFINITY;
        for s in &self.sets {
            best = best.min(s.distance(&self.target)?);
        }
        Ok(best)
    }

    /// Minimum signed distance to the unsafe sets and the index attaining it.
    pub fn signed_distance(&self, x: &DVector<f64>) -> Result<(f64, Option<usize>), ConstraintError> {
        let mut best = (f64::INFINITY, None);
        for (i, s) in self.sets.iter().enumerate() {
            let d = s.signed_distance(x)?;
            if d < best.0 {
                best = (d, Some(i));
            }
        }
        Ok(best)
    }

    /// Classifies x against the ε-bands.
    pub fn proximity(&self, x: &DVector<f64>) -> Result<Proximity, ConstraintError> {
        let mut found: Option<(usize, f64)> = None;
        for (i, s) in self.sets.iter().enumerate() {
            if let Some(d) = s.signed_distance_within(x, self.epsilon)? {
                if d < -INSIDE_TOL {
                    return Ok(Proximity::Inside { index: i, depth: -d });
                }
                let d = d.max(0.0);
                match found {
                    Some((j, dj)) => {
                        debug_assert!((d - dj).abs() > 1e-12, "sets {i} and {j} tie for the active band");
                        if d < dj {
                            found = Some((i, d));
                        }
                    }
                    None => found = Some((i, d)),
                }
            }
        }
        Ok(match found {
            Some((index, distance)) => Proximity::Band { index, distance },
            None => Proximity::Clear,
        })
    }

    /// Human-readable list of violated arrangement invariants.
    pub fn issues(&self) -> Result<Vec<String>, ConstraintError> {
        let mut out = Vec::new();
        if let Some(cfg) = self.configured_delta {
            if self.delta_measured < cfg {
                out.push(format!(
                    "measured separation {:.6} is below the configured {:.6}",
                    self.delta_measured, cfg
                ));
            }
        }
        let eb = self.epsilon_bar()?;
        if eb <= 0.0 {
            out.push("target lies inside an unsafe set".into());
        }
        let phi_d = if self.delta_measured.is_finite() {
            if self.delta_measured > 0.0 {
                phi(self.delta_measured.min(2.0))?
            } else {
                0.0
            }
        } else {
            f64::INFINITY
        };
        if !(self.epsilon < phi_d.min(eb)) {
            out.push(format!(
                "band width {} is not below min(Φ(δ) = {:.6}, ε̄ = {:.6})",
                self.epsilon, phi_d, eb
            ));
        }
        Ok(out)
    }
}

/// Whether x lies in the dilation D_p(A).
pub fn in_dilation(set: &ConstraintSet, x: &DVector<f64>, p: f64) -> Result<bool, ConstraintError> {
    Ok(set.signed_distance_within(x, p)?.is_some())
}

/// Spherical distance from a point to the dilation D_p(A), given its distance to A.
pub fn distance_to_dilation(d_to_set: f64, p: f64) -> f64 {
    angle_to_distance((distance_to_angle(d_to_set) - distance_to_angle(p)).max(0.0))
}
