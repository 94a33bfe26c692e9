//! Closed-loop integration of ẋ = P(x)u(x), safety and convergence monitoring, and diagnostics.

mod csv;
mod diagnostics;
mod quaternion;

pub use csv::{write_csv, write_long_csv, CSV_PRECISION};
pub use diagnostics::{
    check_vdot_positive, distance_to_half_circle, jacobian_fd, lyapunov_vi, w_i, JacobianReport, VdotReport,
    VdotViolation,
};
pub use quaternion::{integrate_quaternion, quaternion_adapter, quaternion_matrix};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::constraints::ConstraintError;
use crate::control::{ControlError, FeedbackLaw};
use crate::geometry::{normalize, project_to_tangent, spherical_distance, TangentVector, UnitPoint};

/// Converged once d_s(x, x_d) drops below this.
pub const CONVERGENCE_TOL: f64 = 1e-8;
/// Signed distances above −SAFETY_TOL count as safe.
pub const SAFETY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("initial state lies inside unsafe set {index} (depth {depth:e})")]
    StartInsideUnsafe { index: usize, depth: f64 },
    #[error("state became non-finite at t = {0}")]
    NonFiniteState(f64),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("projection onto the kernel's tangent space is degenerate (norm {0:e})")]
    DegenerateProjection(f64),
    #[error("controller is not smooth within the finite-difference step (distance {0:e} to a switching surface)")]
    NonSmoothNeighborhood(f64),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub renormalize_every: usize,
    pub log_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            t_max: 30.0,
            renormalize_every: 1,
            log_stride: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0) || !(self.t_max >= self.dt) {
            return Err(SimError::InvalidConfig(format!(
                "need dt > 0 and t_max ≥ dt (dt = {}, t_max = {})",
                self.dt, self.t_max
            )));
        }
        if self.renormalize_every == 0 || self.log_stride == 0 {
            return Err(SimError::InvalidConfig("step counts must be at least 1".into()));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub x: UnitPoint,
    pub u: DVector<f64>,
    pub d_target: f64,
    /// Signed distance to the unsafe set; negative inside.
    pub d_unsafe: f64,
    pub active_i: Option<usize>,
    pub v_active: Option<f64>,
    /// Body rate, for the quaternion formulation.
    pub omega: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", content = "reason", rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxTime,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub termination: Termination,
    pub safe: bool,
    /// Smallest signed distance to the unsafe set over every integration step.
    pub min_margin: f64,
    pub t_final: f64,
    pub final_d_target: f64,
}

impl Verdict {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn success(&self) -> bool {
        self.converged() && self.safe
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub verdict: Verdict,
}

impl Trajectory {
    pub fn final_state(&self) -> &UnitPoint {
        &self.records.last().expect("trajectories hold at least one record").x
    }
}

/// P(x)u(x).
pub fn closed_loop_field(x: &UnitPoint, law: &dyn FeedbackLaw) -> Result<TangentVector, ControlError> {
    let out = law.control(x)?;
    Ok(project_to_tangent(x, &out.u))
}

fn unit(v: &DVector<f64>, t: f64) -> Result<UnitPoint, SimError> {
    if v.iter().any(|c| !c.is_finite()) {
        return Err(SimError::NonFiniteState(t));
    }
    normalize(v).map_err(|_| SimError::NonFiniteState(t))
}

/// Right-hand side used by the integrator; returns the state derivative and an optional body rate.
pub(crate) type Rhs<'a> = dyn Fn(&UnitPoint) -> Result<(DVector<f64>, Option<DVector<f64>>), ControlError> + Sync + 'a;

pub(crate) fn record(
    law: &dyn FeedbackLaw,
    t: f64,
    x: &UnitPoint,
    omega: Option<DVector<f64>>,
) -> Result<TrajectoryRecord, SimError> {
    let arr = law.arrangement();
    let out = law.control(x)?;
    let (d_unsafe, _) = arr.signed_distance(x)?;
    let v_active = out
        .active
        .and_then(|i| lyapunov_vi(x, &arr.kernels()[i], arr.target()).ok());
    Ok(TrajectoryRecord {
        t,
        x: x.clone(),
        u: out.u,
        d_target: spherical_distance(x, arr.target()),
        d_unsafe,
        active_i: out.active,
        v_active,
        omega,
    })
}

pub(crate) fn integrate_with(
    x0: &UnitPoint,
    law: &dyn FeedbackLaw,
    cfg: &SimConfig,
    rhs: &Rhs<'_>,
) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    let arr = law.arrangement();
    if x0.len() != arr.target().len() {
        return Err(SimError::DimensionMismatch {
            expected: arr.target().len(),
            got: x0.len(),
        });
    }
    let (d0, idx) = arr.signed_distance(x0)?;
    if d0 < -SAFETY_TOL {
        return Err(SimError::StartInsideUnsafe {
            index: idx.unwrap_or(0),
            depth: -d0,
        });
    }
    let dt = cfg.dt;
    let steps = cfg.steps();
    let mut x = x0.clone();
    let mut raw = x0.coords().clone();
    let mut min_margin = d0;
    let mut records = Vec::new();
    let finish = |records: Vec<TrajectoryRecord>, termination, min_margin: f64, t: f64, d: f64| Trajectory {
        records,
        verdict: Verdict {
            termination,
            safe: min_margin >= -SAFETY_TOL,
            min_margin,
            t_final: t,
            final_d_target: d,
        },
    };
    let omega0 = rhs(&x)?.1;
    records.push(record(law, 0.0, &x, omega0)?);
    let mut d = spherical_distance(&x, arr.target());
    if d < CONVERGENCE_TOL {
        return Ok(finish(records, Termination::Converged, min_margin, 0.0, d));
    }
    for k in 1..=steps {
        let t = k as f64 * dt;
        let stage = |y: &DVector<f64>| -> Result<DVector<f64>, SimError> {
            let p = unit(y, t)?;
            Ok(rhs(&p)?.0)
        };
        let step = (|| -> Result<DVector<f64>, SimError> {
            let k1 = rhs(&x)?.0;
            let k2 = stage(&(&raw + &k1 * (dt / 2.0)))?;
            let k3 = stage(&(&raw + &k2 * (dt / 2.0)))?;
            let k4 = stage(&(&raw + &k3 * dt))?;
            Ok(&raw + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
        })();
        let next = match step {
            Ok(v) => v,
            Err(SimError::NonFiniteState(t)) => return Err(SimError::NonFiniteState(t)),
            Err(e) => {
                let t_prev = (k - 1) as f64 * dt;
                let safe_margin = match &e {
                    SimError::Control(ControlError::InsideUnsafe { depth, .. }) => min_margin.min(-depth),
                    _ => min_margin,
                };
                return Ok(finish(records, Termination::Aborted(e.to_string()), safe_margin, t_prev, d));
            }
        };
        x = unit(&next, t)?;
        raw = if k % cfg.renormalize_every == 0 { x.coords().clone() } else { next };
        let mut du = f64::INFINITY;
        for set in arr.sets() {
            if let Some(d) = set.signed_distance_within(&x, min_margin)? {
                du = du.min(d);
            }
        }
        min_margin = min_margin.min(du);
        d = spherical_distance(&x, arr.target());
        let converged = d < CONVERGENCE_TOL;
        if k % cfg.log_stride == 0 || converged || k == steps {
            let omega = match rhs(&x) {
                Ok((_, w)) => w,
                Err(e) => {
                    return Ok(finish(records, Termination::Aborted(e.to_string()), min_margin.min(du), t, d));
                }
            };
            match record(law, t, &x, omega) {
                Ok(r) => records.push(r),
                Err(e) => return Ok(finish(records, Termination::Aborted(e.to_string()), min_margin, t, d)),
            }
        }
        if converged {
            return Ok(finish(records, Termination::Converged, min_margin, t, d));
        }
    }
    Ok(finish(records, Termination::MaxTime, min_margin, steps as f64 * dt, d))
}

/// Fixed-step RK4 on ẋ = P(x)u(x), evaluating the field at normalized stage points and renormalizing the state.
pub fn integrate(x0: &UnitPoint, law: &dyn FeedbackLaw, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    let rhs = |p: &UnitPoint| -> Result<(DVector<f64>, Option<DVector<f64>>), ControlError> {
        Ok((closed_loop_field(p, law)?.into_vec(), None))
    };
    integrate_with(x0, law, cfg, &rhs)
}

/// min d_unsafe over the logged records.
pub fn monitor_safety(traj: &Trajectory) -> f64 {
    traj.records.iter().map(|r| r.d_unsafe).fold(f64::INFINITY, f64::min)
}

/// Runs at dt and dt/2; returns both trajectories and the distance between their final states.
pub fn step_doubling(
    x0: &UnitPoint,
    law: &dyn FeedbackLaw,
    cfg: &SimConfig,
) -> Result<(Trajectory, Trajectory, f64), SimError> {
    let coarse = integrate(x0, law, cfg)?;
    let fine_cfg = SimConfig {
        dt: cfg.dt / 2.0,
        log_stride: cfg.log_stride * 2,
        ..*cfg
    };
    let fine = integrate(x0, law, &fine_cfg)?;
    let diff = (coarse.final_state().coords() - fine.final_state().coords()).norm();
    Ok((coarse, fine, diff))
}

/// Integrates every initial condition, in parallel on up to `threads` workers; output is sorted by id.
pub fn run_batch(
    ics: &[(usize, UnitPoint)],
    law: &dyn FeedbackLaw,
    cfg: &SimConfig,
    threads: Option<usize>,
) -> Vec<(usize, Result<Trajectory, SimError>)> {
    run_batch_with(ics, threads, |x0| integrate(x0, law, cfg))
}

/// As [`run_batch`] with a caller-supplied integrator.
pub fn run_batch_with<F>(ics: &[(usize, UnitPoint)], threads: Option<usize>, run: F) -> Vec<(usize, Result<Trajectory, SimError>)>
where
    F: Fn(&UnitPoint) -> Result<Trajectory, SimError> + Sync,
{
    let work = || -> Vec<(usize, Result<Trajectory, SimError>)> {
        let mut out: Vec<_> = ics.par_iter().map(|(id, x0)| (*id, run(x0))).collect();
        out.sort_by_key(|(id, _)| *id);
        out
    };
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    }
}
