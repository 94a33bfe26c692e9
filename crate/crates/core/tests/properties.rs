//! Randomized and trajectory-level properties of the geometry, control laws and integrator.

mod common;

use std::sync::OnceLock;

use nalgebra::DVector;
use proptest::prelude::*;
use spherenav::constraints::{phi, region_ri_membership, ConicCap, ConstraintSet, Proximity};
use spherenav::geometry::{normalize, project, slerp, SphereSampler, UnitPoint};
use spherenav::scenario::{build_scenario, LawKind, RandomIcs, Scenario};
use spherenav::sim::{integrate, integrate_quaternion, SimConfig, SimError, Termination, Trajectory};

use common::scenario;

fn point(n: usize, seed: u64) -> UnitPoint {
    SphereSampler::new(n, seed).next_point()
}

/// Unit vector tangent at `g`, drawn from `s`.
fn tangent(g: &UnitPoint, s: &mut SphereSampler) -> DVector<f64> {
    loop {
        let t = project(g, s.next_point().coords());
        if t.norm() > 1e-3 {
            return t.normalize();
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cap_distance_matches_boundary_sampling(n in 2usize..=3, seed in any::<u64>(), xi in 0.1f64..1.3) {
        let g = point(n, seed);
        let cap = ConicCap::new(g.clone(), xi).unwrap();
        let mut s = SphereSampler::new(n, seed ^ 0xabcd);
        let x = s.next_point();
        let analytic = cap.distance(&x);
        if cap.contains(&x) {
            prop_assert_eq!(analytic, 0.0);
            prop_assert!(cap.signed_distance(&x) <= 0.0);
        } else {
            // for x outside the cap the supremum of x·a is attained on the boundary circle
            let best = (0..10_000)
                .map(|_| {
                    let t = tangent(&g, &mut s);
                    (g.coords() * xi.cos() + t * xi.sin()).dot(&x)
                })
                .fold(f64::MIN, f64::max);
            prop_assert!(analytic <= 1.0 - best + 1e-12);
            prop_assert!((1.0 - best) - analytic <= 1e-3, "sampled {} analytic {}", 1.0 - best, analytic);
        }
    }

    #[test]
    fn separated_caps_have_disjoint_dilations(seed in any::<u64>(), xa in 0.1f64..0.6, xb in 0.1f64..0.6, gap in 0.05f64..0.8, frac in 0.05f64..0.95) {
        let a = point(2, seed);
        let mut s = SphereSampler::new(2, seed.wrapping_add(1));
        let t = tangent(&a, &mut s);
        let ang = xa + xb + gap;
        let b = normalize(&(a.coords() * ang.cos() + t * ang.sin())).unwrap();
        let ca = ConicCap::new(a, xa).unwrap();
        let cb = ConicCap::new(b, xb).unwrap();
        let delta = 1.0 - gap.cos();
        let eps = frac * phi(delta).unwrap();
        for _ in 0..100_000 {
            let x = s.next_point();
            prop_assert!(!(ca.distance(&x) <= eps && cb.distance(&x) <= eps), "witness {:?}", x);
        }
    }
}

/// A point at distance ε from set `i`, reached along the reverse geodesic from a boundary sample.
fn band_edge_point(sc: &Scenario, i: usize, b: &UnitPoint) -> Option<(UnitPoint, DVector<f64>)> {
    let arr = &sc.arrangement;
    let eps = arr.epsilon();
    let ng = arr.kernels()[i].antipode();
    let set = &arr.sets()[i];
    let at = |l: f64| slerp(b, &ng, l).unwrap();
    let (mut lo, mut hi) = (0.0, 1e-3);
    while set.signed_distance(&at(hi)).unwrap() < eps {
        lo = hi;
        hi *= 2.0;
        if hi > 0.5 {
            return None;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if set.signed_distance(&at(mid)).unwrap() < eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = at(0.5 * (lo + hi));
    let dir = project(&x, &(at(hi).coords() - at(lo).coords()));
    (dir.norm() > 0.0).then(|| (x, dir.normalize()))
}

#[test]
fn star_law_is_continuous_across_band_edges() {
    let sc = scenario("s2_star4");
    let law = sc.controller().unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for i in 0..sc.arrangement.sets().len() {
        for b in sc.arrangement.sets()[i].boundary_samples(250, 40 + i as u64) {
            let Some((x, dir)) = band_edge_point(&sc, i, &b) else { continue };
            // skip edge points that sit in another set's band
            if matches!(sc.arrangement.proximity(&x).unwrap(), Proximity::Band { index, .. } if index != i) {
                continue;
            }
            let plus = normalize(&(x.coords() + &dir * 1e-6)).unwrap();
            let minus = normalize(&(x.coords() - &dir * 1e-6)).unwrap();
            let du = law.control(&plus).unwrap().u - law.control(&minus).unwrap().u;
            worst = worst.max(du.norm());
            checked += 1;
        }
    }
    assert!(checked >= 900, "only {checked} edge points");
    assert!(worst < 1e-4, "jump {worst:e}");
}

#[test]
fn star_law_output_spans_target_and_one_kernel() {
    for name in ["s2_star4", "s3_star1"] {
        let sc = scenario(name);
        let law = sc.controller().unwrap();
        let arr = &sc.arrangement;
        let xd = arr.target().coords();
        let n = xd.len() - 1;
        let mut s = SphereSampler::new(n, 77);
        let mut in_band = 0;
        for _ in 0..1000 {
            let x = s.next_point();
            let Ok(out) = law.control(&x) else { continue };
            let r = match out.active {
                None => &out.u - xd * xd.dot(&out.u),
                Some(i) => {
                    in_band += 1;
                    let g = arr.kernels()[i].coords();
                    let q2 = (g - xd * xd.dot(g)).normalize();
                    &out.u - xd * xd.dot(&out.u) - &q2 * q2.dot(&out.u)
                }
            };
            assert!(r.norm() < 1e-12, "{name}: residual {:e}", r.norm());
        }
        assert!(in_band > 0, "{name}: no band samples");
    }
}

#[test]
fn both_laws_repel_at_the_unsafe_boundary() {
    // piecewise law: strictly repulsive on the boundary itself
    for name in ["s2_star4", "s3_star1"] {
        let sc = scenario(name);
        let law = sc.controller().unwrap();
        let arr = &sc.arrangement;
        for (i, set) in arr.sets().iter().enumerate() {
            let g = arr.kernels()[i].coords();
            for b in set.boundary_samples(200, 5 + i as u64) {
                let pu = project(&b, &law.control(&b).unwrap().u);
                let pg = project(&b, &(-g));
                assert!(pu.dot(&pg) > 0.0, "{name} set {i}");
            }
        }
    }
    // gradient law: zero on the boundary, repulsive immediately outside it
    let sc = scenario("s3_cones7");
    let law = sc.controller().unwrap();
    let arr = &sc.arrangement;
    for (i, set) in arr.sets().iter().enumerate() {
        let g = &arr.kernels()[i];
        let ConstraintSet::Cap(cap) = set else { unreachable!() };
        for b in set.boundary_samples(200, 9 + i as u64) {
            assert!(project(&b, &law.control(&b).unwrap().u).norm() < 1e-12);
            let x = slerp(g, &b, 1.0 + 1e-6 / cap.xi()).unwrap();
            let pu = project(&x, &law.control(&x).unwrap().u);
            let pg = project(&x, &(-g.coords()));
            assert!(pu.dot(&pg) > 0.0, "s3_cones7 set {i}");
        }
    }
}

struct Runs {
    scenario: Scenario,
    runs: Vec<(usize, Result<Trajectory, SimError>)>,
}

/// The bundled scenario with 100 seeded initial conditions and an optional shorter, coarser run.
fn hundred(name: &str, sim: Option<(f64, f64)>) -> Runs {
    let base = scenario(name);
    let mut file = base.file.clone();
    let seed = file.initial_conditions.random.map_or(1, |r| r.seed);
    file.initial_conditions.random = Some(RandomIcs { count: 100, seed });
    if let Some((dt, t_max)) = sim {
        file.sim.config.dt = dt;
        file.sim.config.t_max = t_max;
    }
    let sc = build_scenario(file, None).unwrap();
    let law = sc.controller().unwrap();
    let runs = spherenav::scenario::run_trajectories(&sc, law.as_ref(), None);
    Runs { scenario: sc, runs }
}

fn batches() -> &'static [Runs] {
    static CELL: OnceLock<Vec<Runs>> = OnceLock::new();
    CELL.get_or_init(|| {
        vec![
            hundred("s3_cones7", None),
            hundred("s2_star4", None),
            // a shorter, coarser horizon keeps 100 runs of the costliest body affordable
            hundred("s3_star1", Some((5e-3, 5.0))),
        ]
    })
}

#[test]
fn trajectories_stay_on_the_sphere_and_in_the_safe_set() {
    for b in batches() {
        let name = b.scenario.name();
        assert_eq!(b.runs.len(), 100);
        for (id, r) in &b.runs {
            let tr = r.as_ref().unwrap_or_else(|e| panic!("{name} ic {id}: {e}"));
            assert!(!matches!(tr.verdict.termination, Termination::Aborted(_)), "{name} ic {id}");
            for rec in &tr.records {
                assert!((rec.x.coords().norm() - 1.0).abs() <= 1e-10, "{name} ic {id} t {}", rec.t);
            }
            assert!(tr.verdict.min_margin >= -1e-9, "{name} ic {id}: {}", tr.verdict.min_margin);
        }
    }
}

#[test]
fn target_distance_decreases_away_from_bands_and_regions() {
    let mut checked = 0;
    for b in batches() {
        let arr = &b.scenario.arrangement;
        let name = b.scenario.name();
        for (id, r) in &b.runs {
            let tr = r.as_ref().unwrap();
            let free = |rec: &spherenav::sim::TrajectoryRecord| -> bool {
                rec.active_i.is_none()
                    && rec.d_target > 0.0
                    && rec.d_target < 2.0
                    && (0..arr.sets().len()).all(|i| !region_ri_membership(&rec.x, i, arr).unwrap())
            };
            for w in tr.records.windows(2) {
                if free(&w[0]) && free(&w[1]) {
                    checked += 1;
                    assert!(w[1].d_target < w[0].d_target, "{name} ic {id} at t = {}", w[1].t);
                }
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn star_trajectories_never_return_to_a_boundary_they_left() {
    for b in batches().iter().filter(|b| b.scenario.law == LawKind::StarPiecewise) {
        let arr = &b.scenario.arrangement;
        for (id, r) in &b.runs {
            let tr = r.as_ref().unwrap();
            for (i, set) in arr.sets().iter().enumerate() {
                let mut left = false;
                for rec in &tr.records {
                    let d = set.signed_distance(&rec.x).unwrap();
                    if left {
                        assert!(d >= 1e-9, "{} ic {id} set {i} returned at t = {}", b.scenario.name(), rec.t);
                    }
                    left |= d > 1e-6;
                }
            }
        }
    }
}

fn halved(cfg: &SimConfig) -> SimConfig {
    SimConfig {
        dt: cfg.dt / 2.0,
        log_stride: cfg.log_stride * 2,
        ..*cfg
    }
}

#[test]
fn halving_the_step_keeps_verdicts_and_endpoints() {
    for (name, count) in [("s3_cones7", 10), ("s2_star4", 9), ("s3_star1_eps005", 3)] {
        let sc = scenario(name);
        let law = sc.controller().unwrap();
        let mut fine_sc = sc.clone();
        fine_sc.sim = halved(&sc.sim);
        for (id, x0) in sc.initial_conditions.iter().take(count).enumerate() {
            let a = sc.integrate(x0, law.as_ref()).unwrap();
            let b = fine_sc.integrate(x0, law.as_ref()).unwrap();
            assert_eq!(a.verdict.converged(), b.verdict.converged(), "{name} ic {id}");
            assert_eq!(a.verdict.safe, b.verdict.safe, "{name} ic {id}");
            let gap = (a.final_state().coords() - b.final_state().coords()).norm();
            assert!(gap < 1e-6, "{name} ic {id}: endpoints differ by {gap:e}");
        }
    }
}

#[test]
fn quaternion_kinematics_reproduce_the_sphere_flow() {
    let sc = scenario("s3_cones7");
    let law = sc.controller().unwrap();
    for (id, x0) in sc.initial_conditions.iter().enumerate() {
        let a = integrate(x0, law.as_ref(), &sc.sim).unwrap();
        let b = integrate_quaternion(x0, law.as_ref(), &sc.sim).unwrap();
        assert_eq!(a.records.len(), b.records.len(), "ic {id}");
        let sup = a
            .records
            .iter()
            .zip(&b.records)
            .map(|(p, q)| (p.x.coords() - q.x.coords()).amax())
            .fold(0.0, f64::max);
        assert!(sup < 1e-9, "ic {id}: sup-norm gap {sup:e}");
        for r in &b.records {
            let w = r.omega.as_ref().unwrap();
            assert!(w.iter().all(|c| c.is_finite()));
            assert!(w.norm() <= 2.0 * r.u.norm() + 1e-12);
        }
    }
}

#[test]
fn quaternion_rates_respect_the_piecewise_law_bound() {
    let sc = scenario("s3_star1_eps005");
    let law = sc.controller().unwrap();
    let bound = 2.0 * sc.k1 * (1.0 + 1.0 / sc.kappa.unwrap());
    for x0 in sc.initial_conditions.iter().take(2) {
        let tr = integrate_quaternion(x0, law.as_ref(), &sc.sim).unwrap();
        for r in &tr.records {
            let w = r.omega.as_ref().unwrap();
            assert!(w.norm() <= 2.0 * r.u.norm() + 1e-12 && w.norm() <= bound + 1e-12);
        }
    }
}

#[test]
fn identity_start_gives_zero_rate() {
    let sc = scenario("s3_star1_eps005");
    let law = sc.controller().unwrap();
    let xd = sc.arrangement.target().clone();
    let tr = integrate_quaternion(&xd, law.as_ref(), &sc.sim).unwrap();
    assert!(tr.verdict.converged());
    for r in &tr.records {
        assert!(r.omega.as_ref().unwrap().norm() < 1e-12);
    }
}
