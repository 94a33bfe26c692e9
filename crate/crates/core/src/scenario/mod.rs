//! Scenario files: parsing, validation of invariants, and construction of the arrangement and controller.

mod commands;
mod file;

pub use commands::{
    analytic_jacobian,
    cmd_diagnose, cmd_run, cmd_sweep, cmd_validate, run_trajectories, DiagnosePoint, DiagnoseReport, DiagnoseTarget,
    KernelCheck, RegionCheck, RunEntry, RunReport, SweepEntry, SweepParam, SweepReport, ValidationReport,
};
pub use file::{
    AutoOr, ConstraintSpec, ControllerSpec, Formulation, IcSpec, LawKind, ProfileSpec, RandomIcs, ScenarioFile,
    SimSpec, ValidationSpec,
};

use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::constraints::{
    build_projected_star_with, suggest_epsilon, ConicCap, ConstraintArrangement, ConstraintError, ConstraintSet,
    EuclideanStarBody, Profile, StarBuildOptions,
};
use crate::control::{
    suggest_kappa, ConicController, ConicParams, ControlError, FeedbackLaw, KappaSuggestion, StarController,
    StarParams,
};
use crate::geometry::{SphereSampler, UnitPoint};
use crate::sim::{integrate, integrate_quaternion, SimConfig, SimError, Trajectory, SAFETY_TOL};

/// Environment variable overriding the random initial-condition seed.
pub const SEED_ENV: &str = "SPHERE_NAV_SEED";

const MAX_IC_ATTEMPTS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError { line: usize, column: usize, message: String },
    #[error("scenario violates {} invariant(s):\n  {}", .0.len(), .0.join("\n  "))]
    InvariantViolation(Vec<String>),
    #[error("{SEED_ENV} must be an unsigned integer, got {0:?}")]
    BadSeed(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

/// A parsed and fully built scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub arrangement: Arc<ConstraintArrangement>,
    pub law: LawKind,
    pub k1: f64,
    /// Repulsion gain of the star law.
    pub kappa: Option<f64>,
    pub kappa_suggestion: Option<KappaSuggestion>,
    pub sim: SimConfig,
    pub formulation: Formulation,
    pub initial_conditions: Vec<UnitPoint>,
}

pub fn parse_scenario_str(text: &str) -> Result<ScenarioFile, ScenarioError> {
    serde_json::from_str(text).map_err(|e| ScenarioError::ParseError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Reads and builds a scenario, using the seed from the environment if set.
pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    load_scenario(path, seed_from_env()?)
}

pub fn load_scenario(path: &Path, seed_override: Option<u64>) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    build_scenario(parse_scenario_str(&text)?, seed_override)
}

pub fn seed_from_env() -> Result<Option<u64>, ScenarioError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| ScenarioError::BadSeed(s)),
        Err(_) => Ok(None),
    }
}

fn vector(v: &[f64], len: usize, what: &str, errs: &mut Vec<String>) -> Option<DVector<f64>> {
    if v.len() != len {
        errs.push(format!("{what} has {} components, expected {len}", v.len()));
        return None;
    }
    if v.iter().any(|c| !c.is_finite()) {
        errs.push(format!("{what} has non-finite components"));
        return None;
    }
    Some(DVector::from_column_slice(v))
}

fn unit(v: &[f64], len: usize, what: &str, errs: &mut Vec<String>) -> Option<UnitPoint> {
    let d = vector(v, len, what, errs)?;
    match UnitPoint::new(d) {
        Ok(p) => Some(p),
        Err(e) => {
            errs.push(format!("{what}: {e}"));
            None
        }
    }
}

fn build_profile(p: &ProfileSpec, local: usize, what: &str, errs: &mut Vec<String>) -> Option<Profile> {
    let center = |c: &Option<Vec<f64>>, errs: &mut Vec<String>| match c {
        Some(c) => vector(c, local, &format!("{what} profile center"), errs),
        None => Some(DVector::zeros(local)),
    };
    Some(match p {
        ProfileSpec::PowerSum {
            exponent,
            level,
            center: c,
        } => Profile::PowerSum {
            exponent: *exponent,
            level: *level,
            center: center(c, errs)?,
        },
        ProfileSpec::Ellipsoid { semi_axes, center: c } => Profile::Ellipsoid {
            semi_axes: vector(semi_axes, local, &format!("{what} semi-axes"), errs)?,
            center: center(c, errs)?,
        },
        ProfileSpec::Crescent {
            outer_radius,
            bite_center,
            bite_radius,
        } => Profile::Crescent {
            outer_radius: *outer_radius,
            bite_center: vector(bite_center, local, &format!("{what} bite center"), errs)?,
            bite_radius: *bite_radius,
        },
        ProfileSpec::RadialTable { radii } => Profile::RadialTable { radii: radii.clone() },
    })
}

fn build_set(spec: &ConstraintSpec, m: usize, i: usize, errs: &mut Vec<String>) -> Option<ConstraintSet> {
    let what = format!("constraint {i}");
    match spec {
        ConstraintSpec::Cap { axis, xi } => {
            let axis = unit(axis, m, &format!("{what} axis"), errs)?;
            match ConicCap::new(axis, *xi) {
                Ok(c) => Some(c.into()),
                Err(e) => {
                    errs.push(format!("{what}: {e}"));
                    None
                }
            }
        }
        ConstraintSpec::Star {
            anchor,
            normal,
            basis,
            kernel,
            resolution,
            profile,
        } => {
            let anchor = vector(anchor, m, &format!("{what} anchor"), errs)?;
            let normal = match normal {
                Some(v) => Some(vector(v, m, &format!("{what} normal"), errs)?),
                None => None,
            };
            let basis = match basis {
                Some(b) => Some(
                    b.iter()
                        .map(|v| vector(v, m, &format!("{what} basis vector"), errs))
                        .collect::<Option<Vec<_>>>()?,
                ),
                None => None,
            };
            let kernel = match kernel {
                Some(v) => Some(vector(v, m, &format!("{what} kernel"), errs)?),
                None => None,
            };
            let profile = build_profile(profile, m - 1, &what, errs)?;
            let opts = StarBuildOptions {
                resolution: resolution.unwrap_or(StarBuildOptions::default().resolution),
                ..Default::default()
            };
            let built = EuclideanStarBody::new(anchor, normal, basis, kernel, profile)
                .and_then(|body| build_projected_star_with(body, &opts));
            match built {
                Ok(s) => Some(s.into()),
                Err(e) => {
                    errs.push(format!("{what}: {e}"));
                    None
                }
            }
        }
    }
}

fn draw_ics(arr: &ConstraintArrangement, count: usize, seed: u64) -> Result<Vec<UnitPoint>, String> {
    let mut sampler = SphereSampler::new(arr.dim(), seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > MAX_IC_ATTEMPTS {
            return Err(format!("could not draw {count} safe initial conditions"));
        }
        let p = sampler.next_point();
        match arr.signed_distance(&p) {
            Ok((d, _)) if d > 0.0 => out.push(p),
            Ok(_) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(out)
}

/// Builds every set, the arrangement and the initial conditions, collecting all violated invariants.
pub fn build_scenario(file: ScenarioFile, seed_override: Option<u64>) -> Result<Scenario, ScenarioError> {
    let mut errs = Vec::new();
    let n = file.dimension;
    if n < 1 {
        return Err(ScenarioError::InvariantViolation(vec!["dimension must be at least 1".into()]));
    }
    let m = n + 1;
    let target = unit(&file.target, m, "target", &mut errs);
    let sets: Vec<Option<ConstraintSet>> = file
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| build_set(c, m, i, &mut errs))
        .collect();
    let kernels = file.kernels.as_ref().map(|ks| {
        if ks.len() != file.constraints.len() {
            errs.push(format!("{} kernels for {} constraints", ks.len(), file.constraints.len()));
        }
        ks.iter()
            .enumerate()
            .map(|(i, k)| unit(k, m, &format!("kernel {i}"), &mut errs))
            .collect::<Vec<_>>()
    });
    let c = &file.controller;
    if !(c.k1 > 0.0) {
        errs.push(format!("k1 = {} must be positive", c.k1));
    }
    match (&c.epsilon, c.epsilon.value()) {
        (_, Some(e)) if !(e > 0.0) => errs.push(format!("epsilon = {e} must be positive")),
        (a, None) if !a.is_auto() => errs.push("epsilon must be a number or \"auto\"".into()),
        _ => {}
    }
    match (c.law, &c.kappa) {
        (LawKind::StarPiecewise, None) => errs.push("the star-piecewise law needs kappa".into()),
        (_, Some(k)) => match k.value() {
            Some(v) if !(v > 0.0) => errs.push(format!("kappa = {v} must be positive")),
            None if !k.is_auto() => errs.push("kappa must be a number or \"auto\"".into()),
            _ => {}
        },
        _ => {}
    }
    if c.law == LawKind::ConicGradient && file.constraints.iter().any(|s| matches!(s, ConstraintSpec::Star { .. })) {
        errs.push("the conic-gradient law only supports cap constraints".into());
    }
    if file.sim.formulation == Formulation::Quaternion && n != 3 {
        errs.push(format!("the quaternion formulation needs dimension 3, got {n}"));
    }
    if let Err(e) = file.sim.config.validate() {
        errs.push(e.to_string());
    }
    let explicit: Vec<Option<UnitPoint>> = file
        .initial_conditions
        .explicit
        .iter()
        .enumerate()
        .map(|(i, v)| unit(v, m, &format!("initial condition {i}"), &mut errs))
        .collect();
    if !errs.is_empty() {
        return Err(ScenarioError::InvariantViolation(errs));
    }
    let target = target.expect("checked above");
    let sets: Vec<ConstraintSet> = sets.into_iter().map(|s| s.expect("checked above")).collect();
    let kernels = kernels.map(|ks| ks.into_iter().map(|k| k.expect("checked above")).collect());
    let eps0 = c.epsilon.value().unwrap_or(1.0);
    let mut arr = ConstraintArrangement::new(sets, kernels, target, eps0)?.with_configured_delta(file.delta);
    for (i, s) in arr.sets().iter().enumerate() {
        if s.signed_distance(arr.target())? <= 0.0 {
            errs.push(format!("target lies in unsafe set {i}"));
        }
    }
    for (i, (g, s)) in arr.kernels().iter().zip(arr.sets()).enumerate() {
        if !s.contains_interior(g) {
            errs.push(format!("kernel {i} is not inside its set"));
        }
    }
    if !errs.is_empty() {
        return Err(ScenarioError::InvariantViolation(errs));
    }
    if c.epsilon.is_auto() {
        arr = arr.with_epsilon(suggest_epsilon(&arr)?);
    }
    let mut ics = Vec::new();
    for (i, p) in explicit.into_iter().enumerate() {
        let p = p.expect("checked above");
        let (d, idx) = arr.signed_distance(&p)?;
        if d < -SAFETY_TOL {
            errs.push(format!(
                "initial condition {i} lies in unsafe set {} (depth {:e})",
                idx.unwrap_or(0),
                -d
            ));
        }
        ics.push(p);
    }
    if let Some(r) = file.initial_conditions.random {
        match draw_ics(&arr, r.count, seed_override.unwrap_or(r.seed)) {
            Ok(v) => ics.extend(v),
            Err(e) => errs.push(e),
        }
    }
    let (kappa, kappa_suggestion) = if c.law == LawKind::StarPiecewise {
        let s = suggest_kappa(&arr)?;
        let k = match c.kappa.as_ref().and_then(AutoOr::value) {
            Some(v) => v,
            None => {
                if !s.recommended.is_finite() {
                    errs.push("kappa cannot be chosen automatically: the estimated bound is unbounded".into());
                }
                s.recommended
            }
        };
        (Some(k), Some(s))
    } else {
        (None, None)
    };
    if !errs.is_empty() {
        return Err(ScenarioError::InvariantViolation(errs));
    }
    let sc = Scenario {
        law: c.law,
        k1: c.k1,
        kappa,
        kappa_suggestion,
        sim: file.sim.config,
        formulation: file.sim.formulation,
        initial_conditions: ics,
        arrangement: Arc::new(arr),
        file,
    };
    if let Err(e) = sc.controller() {
        return Err(ScenarioError::InvariantViolation(vec![e.to_string()]));
    }
    Ok(sc)
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn epsilon(&self) -> f64 {
        self.arrangement.epsilon()
    }

    pub fn controller(&self) -> Result<Box<dyn FeedbackLaw>, ControlError> {
        Ok(match self.law {
            LawKind::ConicGradient => Box::new(ConicController::new(
                self.arrangement.clone(),
                ConicParams { k1: self.k1 },
            )?),
            LawKind::StarPiecewise => Box::new(StarController::new(
                self.arrangement.clone(),
                StarParams {
                    k1: self.k1,
                    kappa: self.kappa.expect("star scenarios resolve kappa"),
                },
            )?),
        })
    }

    /// Copy with some gains replaced; a new band width rebuilds nothing but the arrangement's ε.
    pub fn with_overrides(&self, k1: Option<f64>, kappa: Option<f64>, epsilon: Option<f64>) -> Result<Scenario, ScenarioError> {
        let mut s = self.clone();
        if let Some(k) = k1 {
            s.k1 = k;
        }
        if let Some(k) = kappa {
            s.kappa = Some(k);
        }
        if let Some(e) = epsilon {
            if !(e > 0.0) {
                return Err(ScenarioError::InvariantViolation(vec![format!("epsilon = {e} must be positive")]));
            }
            s.arrangement = Arc::new(s.arrangement.with_epsilon(e));
        }
        s.controller()?;
        Ok(s)
    }

    pub fn integrate(&self, x0: &UnitPoint, law: &dyn FeedbackLaw) -> Result<Trajectory, SimError> {
        match self.formulation {
            Formulation::Sphere => integrate(x0, law, &self.sim),
            Formulation::Quaternion => integrate_quaternion(x0, law, &self.sim),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAPS: &str = r#"{
        "name": "caps",
        "dimension": 2,
        "target": [0, 0, 1],
        "constraints": [
            {"type": "cap", "axis": [1, 0, 0], "xi": 0.3},
            {"type": "cap", "axis": [-1, 0, 0], "xi": 0.3}
        ],
        "controller": {"law": "conic-gradient", "k1": 1, "epsilon": 0.01},
        "initial_conditions": {"explicit": [[0, 1, 0]], "random": {"count": 3, "seed": 4}}
    }"#;

    #[test]
    fn parses_and_builds() {
        let s = build_scenario(parse_scenario_str(CAPS).unwrap(), None).unwrap();
        assert_eq!(s.arrangement.sets().len(), 2);
        assert_eq!(s.initial_conditions.len(), 4);
        assert_eq!(s.sim, SimConfig::default());
        let again = build_scenario(parse_scenario_str(CAPS).unwrap(), None).unwrap();
        assert_eq!(s.initial_conditions, again.initial_conditions);
        let other = build_scenario(parse_scenario_str(CAPS).unwrap(), Some(99)).unwrap();
        assert_eq!(other.initial_conditions[0], s.initial_conditions[0]);
        assert_ne!(other.initial_conditions[1], s.initial_conditions[1]);
    }

    #[test]
    fn reports_the_failing_line() {
        let bad = "{\n  \"name\": \"x\",\n  \"dimension\": 2,\n  \"target\": [0, 0, 1,\n}";
        match parse_scenario_str(bad) {
            Err(ScenarioError::ParseError { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lists_every_violation() {
        let text = CAPS
            .replace("\"target\": [0, 0, 1]", "\"target\": [0, 0, 1, 0]")
            .replace("\"k1\": 1", "\"k1\": -1")
            .replace("\"xi\": 0.3}", "\"xi\": 4.0}");
        match build_scenario(parse_scenario_str(&text).unwrap(), None) {
            Err(ScenarioError::InvariantViolation(v)) => assert!(v.len() >= 4, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn target_inside_a_cap_is_rejected() {
        let text = CAPS.replace("\"target\": [0, 0, 1]", "\"target\": [1, 0, 0]");
        match build_scenario(parse_scenario_str(&text).unwrap(), None) {
            Err(ScenarioError::InvariantViolation(v)) => assert!(v[0].contains("target lies in unsafe set 0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn automatic_epsilon() {
        let text = CAPS.replace("\"epsilon\": 0.01", "\"epsilon\": \"auto\"");
        let s = build_scenario(parse_scenario_str(&text).unwrap(), None).unwrap();
        assert!(s.epsilon() > 0.0 && s.arrangement.issues().unwrap().is_empty());
    }
}
