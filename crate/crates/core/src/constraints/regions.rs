//! Shadow regions R_i of the dilated sets as seen from the target (or its antipode), and their overlap check.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;

use super::{distance_to_dilation, ConstraintArrangement, ConstraintError, ConstraintSet};
use crate::geometry::{arc_angle, distance_to_angle, spherical_distance, SphereSampler, UnitPoint};

/// Smallest march step; larger steps are the exact gap to the dilation, which cannot skip a crossing.
const MIN_MARCH_STEP: f64 = 1e-5;

/// Per-set data needed for membership tests.
struct RegionSpec {
    /// −x_d ∉ D_ε(U_i): the region hangs behind the set as seen from x_d.
    seen_from_target: bool,
    threshold: f64,
}

fn region_spec(arr: &ConstraintArrangement, i: usize) -> Result<RegionSpec, ConstraintError> {
    let set = &arr.sets()[i];
    let eps = arr.epsilon();
    let anti = arr.target().antipode();
    let seen_from_target = set.distance(&anti)? > eps;
    let threshold = if seen_from_target {
        distance_to_dilation(set.distance(arr.target())?, eps)
    } else {
        0.0
    };
    Ok(RegionSpec {
        seen_from_target,
        threshold,
    })
}

/// Whether the great-circle ray from `origin` through x, at or beyond x, meets D_ε(set) before the antipode of `origin`.
fn ray_meets_dilation(origin: &UnitPoint, x: &UnitPoint, set: &ConstraintSet, eps: f64) -> Result<bool, ConstraintError> {
    let theta_x = origin.angle_to(x);
    let t = x.coords() - origin.coords() * origin.dot(x);
    let tn = t.norm();
    if tn < 1e-12 {
        return Ok(false);
    }
    let t = t / tn;
    let eps_ang = distance_to_angle(eps);
    let (center, radius) = set.bounding_cap();
    let reach = radius + eps_ang;
    let at = |s: f64| -> DVector<f64> { origin.coords() * s.cos() + &t * s.sin() };
    let s_end = PI - 1e-9;
    let mut s = theta_x;
    let mut steps = 0usize;
    while s < s_end && steps < 200_000 {
        steps += 1;
        let p = at(s);
        let to_bound = arc_angle(p.dot(center)) - reach;
        let gap = if to_bound > 0.0 {
            to_bound
        } else {
            let d = set.signed_distance(&p)?;
            if d <= eps {
                return Ok(true);
            }
            distance_to_angle(d) - eps_ang
        };
        s += gap.max(MIN_MARCH_STEP);
    }
    Ok(false)
}

/// Membership of x in the shadow region R_i.
pub fn region_ri_membership(x: &UnitPoint, i: usize, arr: &ConstraintArrangement) -> Result<bool, ConstraintError> {
    let spec = region_spec(arr, i)?;
    member_with(x, i, arr, &spec)
}

fn member_with(x: &UnitPoint, i: usize, arr: &ConstraintArrangement, spec: &RegionSpec) -> Result<bool, ConstraintError> {
    let set = &arr.sets()[i];
    if set.contains_interior(x) {
        return Ok(false);
    }
    let eps = arr.epsilon();
    if spec.seen_from_target {
        let d = spherical_distance(x, arr.target());
        if d == 0.0 || d < spec.threshold {
            return Ok(false);
        }
        ray_meets_dilation(arr.target(), x, set, eps)
    } else {
        let anti = arr.target().antipode();
        if spherical_distance(x, &anti) < 1e-15 {
            return Ok(true);
        }
        ray_meets_dilation(&anti, x, set, eps)
    }
}

/// Outcome of the Monte-Carlo overlap check.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub ok: bool,
    pub samples: usize,
    pub witnesses: usize,
    /// A point in two regions, with the two indices.
    pub witness: Option<(UnitPoint, usize, usize)>,
}

/// Samples the sphere and counts points lying in two or more shadow regions.
pub fn validate_region_disjointness(
    arr: &ConstraintArrangement,
    samples: usize,
    seed: u64,
) -> Result<RegionReport, ConstraintError> {
    let m = arr.sets().len();
    if m < 2 {
        return Ok(RegionReport {
            ok: true,
            samples,
            witnesses: 0,
            witness: None,
        });
    }
    let specs: Vec<RegionSpec> = (0..m).map(|i| region_spec(arr, i)).collect::<Result<_, _>>()?;
    let mut sampler = SphereSampler::new(arr.dim(), seed);
    let pts: Vec<UnitPoint> = (0..samples).map(|_| sampler.next_point()).collect();
    let hits: Vec<Option<(usize, usize)>> = pts
        .par_iter()
        .map(|x| {
            let mut first = None;
            for i in 0..m {
                if member_with(x, i, arr, &specs[i])? {
                    match first {
                        None => first = Some(i),
                        Some(j) => return Ok(Some((j, i))),
                    }
                }
            }
            Ok(None)
        })
        .collect::<Result<_, ConstraintError>>()?;
    let witnesses = hits.iter().filter(|h| h.is_some()).count();
    let witness = hits
        .iter()
        .zip(pts.iter())
        .find_map(|(h, p)| h.map(|(i, j)| (p.clone(), i, j)));
    Ok(RegionReport {
        ok: witnesses == 0,
        samples,
        witnesses,
        witness,
    })
}
