//! The validate / run / diagnose / sweep commands, returning serializable reports.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{LawKind, Scenario, ScenarioError};
use crate::constraints::{pairwise_separation, phi, suggest_epsilon, validate_kernel, validate_region_disjointness};
use crate::control::FeedbackLaw;
use crate::geometry::UnitPoint;
use crate::sim::{
    check_vdot_positive, jacobian_fd, run_batch_with, write_csv, write_long_csv, SimError, Trajectory,
};

/// Exclusion margin and tolerance of the V̇ monitor.
pub const VDOT_MARGIN: f64 = 1e-2;
pub const VDOT_TOL: f64 = -1e-6;

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelCheck {
    pub index: usize,
    pub ok: bool,
    pub interior_margin: Option<f64>,
    pub reverse_margin: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionCheck {
    pub ok: bool,
    /// Whether a failure counts against the scenario (the star law relies on disjoint regions).
    pub required: bool,
    pub samples: usize,
    pub witnesses: usize,
    pub witness: Option<(Vec<f64>, usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub scenario: String,
    pub sets: usize,
    pub delta_measured: Option<f64>,
    pub delta_configured: Option<f64>,
    pub phi_delta: Option<f64>,
    pub epsilon: f64,
    pub epsilon_bar: Option<f64>,
    pub epsilon_suggested: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_bar: Option<f64>,
    pub kappa_recommended: Option<f64>,
    pub kappa_per_set: Vec<Option<f64>>,
    pub kernels: Vec<KernelCheck>,
    pub regions: RegionCheck,
    pub failures: Vec<String>,
    pub ok: bool,
}

/// Separation, band-width admissibility, kernels, region overlap and the κ estimate.
pub fn cmd_validate(sc: &Scenario) -> Result<ValidationReport, ScenarioError> {
    let arr = &*sc.arrangement;
    let v = sc.file.validation;
    let mut failures = Vec::new();
    let delta = if v.separation_samples == crate::constraints::DEFAULT_SEPARATION_SAMPLES {
        arr.delta_measured()
    } else {
        pairwise_separation(arr, v.separation_samples)?
    };
    if delta <= 0.0 {
        failures.push("unsafe sets overlap or touch (measured separation is zero)".into());
    }
    let phi_delta = if delta.is_finite() && delta > 0.0 {
        Some(phi(delta.min(2.0))?)
    } else {
        None
    };
    failures.extend(arr.issues()?);
    let epsilon_suggested = suggest_epsilon(arr).ok();
    let kernels: Vec<KernelCheck> = arr
        .sets()
        .iter()
        .zip(arr.kernels())
        .enumerate()
        .map(|(i, (s, g))| match validate_kernel(s, g, v.kernel_samples) {
            Ok(r) => KernelCheck {
                index: i,
                ok: true,
                interior_margin: Some(r.interior_margin),
                reverse_margin: Some(r.reverse_margin),
                error: None,
            },
            Err(e) => KernelCheck {
                index: i,
                ok: false,
                interior_margin: None,
                reverse_margin: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    for k in kernels.iter().filter(|k| !k.ok) {
        failures.push(format!(
            "kernel of set {}: {}",
            k.index,
            k.error.as_deref().unwrap_or("invalid")
        ));
    }
    let required = sc.law == LawKind::StarPiecewise;
    let rep = validate_region_disjointness(arr, v.region_samples, v.seed)?;
    if required && !rep.ok {
        failures.push(format!(
            "shadow regions overlap ({} of {} samples)",
            rep.witnesses, rep.samples
        ));
    }
    let regions = RegionCheck {
        ok: rep.ok,
        required,
        samples: rep.samples,
        witnesses: rep.witnesses,
        witness: rep.witness.map(|(p, i, j)| (p.iter().copied().collect(), i, j)),
    };
    let ks = sc.kappa_suggestion.as_ref();
    if sc.file.controller.strict {
        if let (Some(k), Some(s)) = (sc.kappa, ks) {
            if !(k > s.kappa_bar) {
                failures.push(format!("kappa = {k} does not exceed the estimated bound {}", s.kappa_bar));
            }
        }
    }
    let ok = failures.is_empty();
    Ok(ValidationReport {
        scenario: sc.name().to_string(),
        sets: arr.sets().len(),
        delta_measured: finite(delta),
        delta_configured: arr.configured_delta(),
        phi_delta,
        epsilon: arr.epsilon(),
        epsilon_bar: finite(arr.epsilon_bar()?),
        epsilon_suggested,
        kappa: sc.kappa,
        kappa_bar: ks.and_then(|s| finite(s.kappa_bar)),
        kappa_recommended: ks.and_then(|s| finite(s.recommended)),
        kappa_per_set: ks.map_or(Vec::new(), |s| s.per_set.iter().map(|&k| finite(k)).collect()),
        kernels,
        regions,
        failures,
        ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunEntry {
    pub ic_id: usize,
    pub x0: Vec<f64>,
    pub error: Option<String>,
    pub termination: Option<crate::sim::Termination>,
    pub converged: bool,
    pub safe: bool,
    pub min_margin: Option<f64>,
    pub convergence_time: Option<f64>,
    pub final_d_target: Option<f64>,
    pub records: usize,
    pub vdot_checked: Option<usize>,
    pub vdot_violations: Option<usize>,
    pub csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub law: LawKind,
    pub formulation: super::Formulation,
    pub k1: f64,
    pub kappa: Option<f64>,
    pub epsilon: f64,
    pub dt: f64,
    pub t_max: f64,
    pub total: usize,
    pub converged: usize,
    pub safe: usize,
    pub runs: Vec<RunEntry>,
    pub plot: Option<String>,
}

impl RunReport {
    pub fn all_ok(&self) -> bool {
        self.converged == self.total && self.safe == self.total
    }
}

/// Integrates every initial condition of the scenario; results sorted by id.
pub fn run_trajectories(
    sc: &Scenario,
    law: &dyn FeedbackLaw,
    threads: Option<usize>,
) -> Vec<(usize, Result<Trajectory, SimError>)> {
    let ics: Vec<(usize, UnitPoint)> = sc.initial_conditions.iter().cloned().enumerate().collect();
    run_batch_with(&ics, threads, |x0| sc.integrate(x0, law))
}

fn io_err(path: &Path, e: std::io::Error) -> ScenarioError {
    ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> std::io::Result<()>) -> Result<(), ScenarioError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    f(BufWriter::new(file)).map_err(|e| io_err(path, e))
}

/// Runs the batch; with `out`, writes one CSV per initial condition, a long-format plot file and a summary JSON.
pub fn cmd_run(
    sc: &Scenario,
    threads: Option<usize>,
    out: Option<&Path>,
) -> Result<(RunReport, Vec<(usize, Result<Trajectory, SimError>)>), ScenarioError> {
    let law = sc.controller()?;
    let results = run_trajectories(sc, law.as_ref(), threads);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let star = sc.law == LawKind::StarPiecewise;
    let mut runs = Vec::with_capacity(results.len());
    for (id, res) in &results {
        let x0 = sc.initial_conditions[*id].iter().copied().collect();
        let entry = match res {
            Err(e) => RunEntry {
                ic_id: *id,
                x0,
                error: Some(e.to_string()),
                termination: None,
                converged: false,
                safe: false,
                min_margin: None,
                convergence_time: None,
                final_d_target: None,
                records: 0,
                vdot_checked: None,
                vdot_violations: None,
                csv: None,
            },
            Ok(tr) => {
                let vdot = if star && tr.verdict.safe {
                    Some(check_vdot_positive(tr, &sc.arrangement, VDOT_MARGIN, VDOT_TOL)?)
                } else {
                    None
                };
                let csv = match out {
                    Some(dir) => {
                        let name = format!("{}_ic{:03}.csv", sc.name(), id);
                        write_file(&dir.join(&name), |w| write_csv(tr, w))?;
                        Some(name)
                    }
                    None => None,
                };
                let v = &tr.verdict;
                RunEntry {
                    ic_id: *id,
                    x0,
                    error: None,
                    termination: Some(v.termination.clone()),
                    converged: v.converged(),
                    safe: v.safe,
                    min_margin: finite(v.min_margin),
                    convergence_time: v.converged().then_some(v.t_final),
                    final_d_target: Some(v.final_d_target),
                    records: tr.records.len(),
                    vdot_checked: vdot.as_ref().map(|r| r.checked),
                    vdot_violations: vdot.as_ref().map(|r| r.violations.len()),
                    csv,
                }
            }
        };
        runs.push(entry);
    }
    let plot = match out {
        Some(dir) => {
            let name = format!("{}_plot.csv", sc.name());
            let ok: Vec<(usize, &Trajectory)> = results
                .iter()
                .filter_map(|(id, r)| r.as_ref().ok().map(|t| (*id, t)))
                .collect();
            write_file(&dir.join(&name), |w| write_long_csv(ok, w))?;
            Some(name)
        }
        None => None,
    };
    let report = RunReport {
        scenario: sc.name().to_string(),
        law: sc.law,
        formulation: sc.formulation,
        k1: sc.k1,
        kappa: sc.kappa,
        epsilon: sc.epsilon(),
        dt: sc.sim.dt,
        t_max: sc.sim.t_max,
        total: runs.len(),
        converged: runs.iter().filter(|r| r.converged).count(),
        safe: runs.iter().filter(|r| r.safe).count(),
        runs,
        plot,
    };
    if let Some(dir) = out {
        let path: PathBuf = dir.join(format!("{}_summary.json", sc.name()));
        write_file(&path, |mut w| {
            serde_json::to_writer_pretty(&mut w, &report).map_err(std::io::Error::other)?;
            std::io::Write::write_all(&mut w, b"\n")
        })?;
    }
    Ok((report, results))
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiagnoseTarget {
    Equilibria,
    Points(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosePoint {
    pub label: String,
    pub x: Vec<f64>,
    pub step: f64,
    pub retried: bool,
    pub note: Option<String>,
    pub jacobian: Option<Vec<Vec<f64>>>,
    pub ambient_eigenvalues: Vec<(f64, f64)>,
    pub tangent_eigenvalues: Vec<(f64, f64)>,
    /// Closed-form Jacobian at the equilibria.
    pub expected: Option<Vec<Vec<f64>>>,
    pub max_deviation: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnoseReport {
    pub scenario: String,
    pub law: LawKind,
    pub k1: f64,
    pub points: Vec<DiagnosePoint>,
}

const FD_STEP: f64 = 1e-6;

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

/// Closed-form Jacobians: −k1(I + x_d x_dᵀ) at x_d; at −x_d, c·k1(I + x_d x_dᵀ) with c = 1/9 for the
/// gradient law (u = k1 x_d/(1 + d)² with d = 2) and c = 1 for the piecewise law.
pub fn analytic_jacobian(sc: &Scenario, at_target: bool) -> DMatrix<f64> {
    let xd = sc.arrangement.target().coords();
    let m = xd.len();
    let base = DMatrix::identity(m, m) + xd * xd.transpose();
    if at_target {
        base * -sc.k1
    } else {
        let c = match sc.law {
            LawKind::ConicGradient => 1.0 / 9.0,
            LawKind::StarPiecewise => 1.0,
        };
        base * (c * sc.k1)
    }
}

fn diagnose_point(law: &dyn FeedbackLaw, label: String, x: UnitPoint, expected: Option<DMatrix<f64>>) -> DiagnosePoint {
    let mut step = FD_STEP;
    let mut retried = false;
    let mut note = None;
    let mut res = jacobian_fd(&x, law, step);
    if let Err(SimError::NonSmoothNeighborhood(gap)) = res {
        note = Some(format!(
            "within {gap:e} of a switching surface; step shrunk from {step:e} to {:e}",
            step / 100.0
        ));
        step /= 100.0;
        retried = true;
        res = jacobian_fd(&x, law, step);
    }
    let pairs = |v: &[nalgebra::Complex<f64>]| v.iter().map(|z| (z.re, z.im)).collect::<Vec<_>>();
    match res {
        Ok(r) => DiagnosePoint {
            label,
            x: x.iter().copied().collect(),
            step,
            retried,
            note,
            max_deviation: expected.as_ref().map(|e| (&r.ambient - e).amax()),
            expected: expected.as_ref().map(rows),
            jacobian: Some(rows(&r.ambient)),
            ambient_eigenvalues: pairs(&r.ambient_eigenvalues),
            tangent_eigenvalues: pairs(&r.tangent_eigenvalues),
            error: None,
        },
        Err(e) => DiagnosePoint {
            label,
            x: x.iter().copied().collect(),
            step,
            retried,
            note,
            jacobian: None,
            ambient_eigenvalues: Vec::new(),
            tangent_eigenvalues: Vec::new(),
            expected: expected.as_ref().map(rows),
            max_deviation: None,
            error: Some(e.to_string()),
        },
    }
}

/// Finite-difference Jacobians and spectra at the equilibria or at given points.
pub fn cmd_diagnose(sc: &Scenario, target: &DiagnoseTarget) -> Result<DiagnoseReport, ScenarioError> {
    let law = sc.controller()?;
    let arr = &sc.arrangement;
    let mut points = Vec::new();
    match target {
        DiagnoseTarget::Equilibria => {
            let xd = arr.target().clone();
            points.push(diagnose_point(law.as_ref(), "target".into(), xd.clone(), Some(analytic_jacobian(sc, true))));
            let anti = xd.antipode();
            let (d, _) = arr.signed_distance(&anti)?;
            if d > arr.epsilon() {
                points.push(diagnose_point(
                    law.as_ref(),
                    "antipode".into(),
                    anti,
                    Some(analytic_jacobian(sc, false)),
                ));
            }
        }
        DiagnoseTarget::Points(ps) => {
            for (i, p) in ps.iter().enumerate() {
                let label = format!("point {i}");
                match UnitPoint::new(DVector::from_column_slice(p)) {
                    Ok(x) if x.len() == arr.target().len() => points.push(diagnose_point(law.as_ref(), label, x, None)),
                    Ok(x) => points.push(DiagnosePoint {
                        label,
                        x: p.clone(),
                        step: FD_STEP,
                        retried: false,
                        note: None,
                        jacobian: None,
                        ambient_eigenvalues: Vec::new(),
                        tangent_eigenvalues: Vec::new(),
                        expected: None,
                        max_deviation: None,
                        error: Some(format!("expected {} components, got {}", arr.target().len(), x.len())),
                    }),
                    Err(e) => points.push(DiagnosePoint {
                        label,
                        x: p.clone(),
                        step: FD_STEP,
                        retried: false,
                        note: None,
                        jacobian: None,
                        ambient_eigenvalues: Vec::new(),
                        tangent_eigenvalues: Vec::new(),
                        expected: None,
                        max_deviation: None,
                        error: Some(e.to_string()),
                    }),
                }
            }
        }
    }
    Ok(DiagnoseReport {
        scenario: sc.name().to_string(),
        law: sc.law,
        k1: sc.k1,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Kappa,
    K1,
    Epsilon,
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "kappa" => Ok(SweepParam::Kappa),
            "k1" => Ok(SweepParam::K1),
            "epsilon" => Ok(SweepParam::Epsilon),
            _ => Err(format!("unknown sweep parameter {s:?} (expected kappa, k1 or epsilon)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub value: f64,
    pub error: Option<String>,
    pub total: usize,
    pub converged: usize,
    pub safe: usize,
    pub min_margin: Option<f64>,
    pub mean_convergence_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub scenario: String,
    pub param: SweepParam,
    pub entries: Vec<SweepEntry>,
}

/// Reruns the batch for each value of one gain.
pub fn cmd_sweep(
    sc: &Scenario,
    param: SweepParam,
    values: &[f64],
    threads: Option<usize>,
) -> Result<SweepReport, ScenarioError> {
    let mut entries = Vec::with_capacity(values.len());
    for &v in values {
        let variant = match param {
            SweepParam::Kappa if sc.law != LawKind::StarPiecewise => Err(ScenarioError::InvariantViolation(vec![
                "kappa only applies to the star-piecewise law".into(),
            ])),
            SweepParam::Kappa => sc.with_overrides(None, Some(v), None),
            SweepParam::K1 => sc.with_overrides(Some(v), None, None),
            SweepParam::Epsilon => sc.with_overrides(None, None, Some(v)),
        };
        let variant = match variant {
            Ok(s) => s,
            Err(e) => {
                entries.push(SweepEntry {
                    value: v,
                    error: Some(e.to_string()),
                    total: 0,
                    converged: 0,
                    safe: 0,
                    min_margin: None,
                    mean_convergence_time: None,
                });
                continue;
            }
        };
        let law = variant.controller()?;
        let results = run_trajectories(&variant, law.as_ref(), threads);
        let ok: Vec<&Trajectory> = results.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
        let times: Vec<f64> = ok.iter().filter(|t| t.verdict.converged()).map(|t| t.verdict.t_final).collect();
        entries.push(SweepEntry {
            value: v,
            error: results.iter().find_map(|(_, r)| r.as_ref().err().map(|e| e.to_string())),
            total: results.len(),
            converged: times.len(),
            safe: ok.iter().filter(|t| t.verdict.safe).count(),
            min_margin: finite(ok.iter().map(|t| t.verdict.min_margin).fold(f64::INFINITY, f64::min)),
            mean_convergence_time: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
        });
    }
    Ok(SweepReport {
        scenario: sc.name().to_string(),
        param,
        entries,
    })
}
