use rayon::prelude::*;
use thiserror::Error;

use super::{ConstraintArrangement, ConstraintError, ConstraintSet, INSIDE_TOL};
use crate::geometry::{GreatCircleArc, UnitPoint};
use crate::numeric::pattern_search_max;

/// Φ(δ) = 1 − √((2 − δ)/2).
pub fn phi(delta: f64) -> Result<f64, ConstraintError> {
    if !(delta > 0.0 && delta <= 2.0) {
        return Err(ConstraintError::DomainError(delta));
    }
    Ok(1.0 - ((2.0 - delta) / 2.0).sqrt())
}

/// 0.9·min(Φ(δ), ε̄); with fewer than two sets only ε̄ binds.
pub fn suggest_epsilon(arr: &ConstraintArrangement) -> Result<f64, ConstraintError> {
    let mut eb = f64::INFINITY;
    for (i, s) in arr.sets().iter().enumerate() {
        let d = s.distance(arr.target())?;
        if d <= 0.0 {
            return Err(ConstraintError::TargetInsideUnsafe(i));
        }
        eb = eb.min(d);
    }
    let delta = arr.delta_measured();
    let bound = if delta.is_finite() {
        if delta <= 0.0 {
            let (i, j) = overlapping_pair(arr.sets())?.unwrap_or((0, 1));
            return Err(ConstraintError::Overlapping(i, j));
        }
        phi(delta.min(2.0))?.min(eb)
    } else {
        eb
    };
    Ok(0.9 * bound)
}

fn overlapping_pair(sets: &[ConstraintSet]) -> Result<Option<(usize, usize)>, ConstraintError> {
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            if pair_gap(&sets[i], &sets[j], 512)? <= 0.0 {
                return Ok(Some((i, j)));
            }
        }
    }
    Ok(None)
}

/// min over boundary points b of `from` of d_s(b, `to`), grid search then pattern refinement.
fn pair_gap(from: &ConstraintSet, to: &ConstraintSet, samples: usize) -> Result<f64, ConstraintError> {
    let (grid, step) = from.boundary_grid(samples);
    let mut scored = Vec::with_capacity(grid.len());
    for (a, p) in &grid {
        let d = to.distance(p)?;
        if d <= 0.0 {
            return Ok(0.0);
        }
        scored.push((d, a));
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut best = scored[0].0;
    for (_, a) in scored.iter().take(3) {
        let (_, v) = pattern_search_max(
            |q| -to.distance(&from.boundary_at(q)).unwrap_or(f64::INFINITY),
            a,
            step,
            1e-9,
            20_000,
        );
        best = best.min(-v);
    }
    Ok(best.max(0.0))
}

/// Minimum pairwise spherical distance between sets; +∞ for fewer than two.
pub fn pairwise_separation_sets(sets: &[ConstraintSet], samples: usize) -> Result<f64, ConstraintError> {
    if sets.len() < 2 {
        return Ok(f64::INFINITY);
    }
    let pairs: Vec<(usize, usize)> = (0..sets.len())
        .flat_map(|i| (0..sets.len()).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let gaps: Result<Vec<f64>, ConstraintError> =
        pairs.par_iter().map(|&(i, j)| pair_gap(&sets[i], &sets[j], samples)).collect();
    Ok(gaps?.into_iter().fold(f64::INFINITY, f64::min))
}

pub fn pairwise_separation(arr: &ConstraintArrangement, samples: usize) -> Result<f64, ConstraintError> {
    pairwise_separation_sets(arr.sets(), samples)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel is not in the interior of the set (margin {0:e})")]
    NotInInterior(f64),
    #[error("antipode of the kernel lies in the set")]
    AntipodeInside,
    #[error("geodesic from the kernel to boundary point {x:?} leaves the set at λ = {lambda}")]
    GeodesicEscapes { lambda: f64, x: Vec<f64> },
    #[error("geodesic from boundary point {x:?} to the kernel antipode enters the set at λ = {lambda}")]
    ReverseGeodesicEnters { lambda: f64, x: Vec<f64> },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

/// Margins found while validating a kernel point.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    /// d_s(g, ∂U).
    pub interior_margin: f64,
    /// Minimum signed distance along the reverse geodesics G(x, −g) (≈ 0 at λ = 0).
    pub reverse_margin: f64,
    /// Smallest positive-λ signed distance along the reverse geodesics.
    pub reverse_margin_off_boundary: f64,
    pub samples: usize,
}

const KERNEL_LAMBDA_GRID: usize = 50;

/// Checks that g is an interior kernel point of the set: interior, antipode outside,
/// geodesics from g to the boundary stay inside, and continuations to −g stay out of the interior.
pub fn validate_kernel(set: &ConstraintSet, g: &UnitPoint, samples: usize) -> Result<KernelReport, KernelError> {
    let interior_margin = -set.signed_distance(g)?;
    if !(interior_margin > 0.0) || !set.contains_interior(g) {
        return Err(KernelError::NotInInterior(interior_margin));
    }
    let ng = g.antipode();
    if set.contains(&ng) {
        return Err(KernelError::AntipodeInside);
    }
    let boundary = set.boundary_samples(samples, 0xb0_u64 ^ samples as u64);
    let results: Vec<Result<(f64, f64), KernelError>> = boundary
        .par_iter()
        .map(|x| {
            let fwd = GreatCircleArc::new(g.clone(), x.clone()).map_err(|_| KernelError::AntipodeInside)?;
            for k in 0..=KERNEL_LAMBDA_GRID {
                let l = k as f64 / KERNEL_LAMBDA_GRID as f64;
                if !set.contains(&fwd.at(l)) {
                    return Err(KernelError::GeodesicEscapes {
                        lambda: l,
                        x: x.iter().copied().collect(),
                    });
                }
            }
            let rev = GreatCircleArc::new(x.clone(), ng.clone()).map_err(|_| KernelError::AntipodeInside)?;
            let mut worst = f64::INFINITY;
            let mut worst_off = f64::INFINITY;
            for k in 0..=KERNEL_LAMBDA_GRID {
                let l = k as f64 / KERNEL_LAMBDA_GRID as f64;
                let p = rev.at(l);
                let d = set.signed_distance(&p)?;
                if k > 0 && (set.contains_interior(&p) || d < -INSIDE_TOL) {
                    return Err(KernelError::ReverseGeodesicEnters {
                        lambda: l,
                        x: x.iter().copied().collect(),
                    });
                }
                worst = worst.min(d);
                if k > 0 {
                    worst_off = worst_off.min(d);
                }
            }
            Ok((worst, worst_off))
        })
        .collect();
    let mut reverse_margin = f64::INFINITY;
    let mut reverse_margin_off_boundary = f64::INFINITY;
    for r in results {
        let (w, o) = r?;
        reverse_margin = reverse_margin.min(w);
        reverse_margin_off_boundary = reverse_margin_off_boundary.min(o);
    }
    Ok(KernelReport {
        interior_margin,
        reverse_margin,
        reverse_margin_off_boundary,
        samples,
    })
}
