use super::ControlError;
use crate::constraints::ConstraintArrangement;
use crate::geometry::{project, GreatCircleArc};

const LAMBDA_GRID: usize = 1000;

/// Gain bound estimated along the arcs G(x_d, −g_i).
#[derive(Debug, Clone, PartialEq)]
pub struct KappaSuggestion {
    pub kappa_bar: f64,
    pub recommended: f64,
    pub per_set: Vec<f64>,
}

/// κ_i = max(0, ε − μ₁)/(μ₁μ₂) with μ₁ the smallest distance to U_i and μ₂ the smallest ‖P(x)x_d‖
/// over the part of G(x_d, −g_i) inside the band of U_i.
pub fn suggest_kappa(arr: &ConstraintArrangement) -> Result<KappaSuggestion, ControlError> {
    let eps = arr.epsilon();
    let xd = arr.target();
    let mut per_set = Vec::with_capacity(arr.sets().len());
    for (set, g) in arr.sets().iter().zip(arr.kernels()) {
        let ng = g.antipode();
        let arc = match GreatCircleArc::new(xd.clone(), ng) {
            Ok(a) => a,
            // g = x_d: the arc degenerates and the set cannot be in the target's way
            Err(_) => {
                per_set.push(0.0);
                continue;
            }
        };
        let mut mu1 = f64::INFINITY;
        let mut mu2 = f64::INFINITY;
        for k in 0..=LAMBDA_GRID {
            let p = arc.at(k as f64 / LAMBDA_GRID as f64);
            let d = set.signed_distance(&p)?;
            if d <= eps {
                mu1 = mu1.min(d.max(0.0));
                mu2 = mu2.min(project(&p, xd.coords()).norm());
            }
        }
        let ki = if !mu1.is_finite() {
            0.0
        } else if mu1 <= 0.0 || mu2 <= 0.0 {
            f64::INFINITY
        } else {
            (eps - mu1).max(0.0) / (mu1 * mu2)
        };
        per_set.push(ki);
    }
    let kappa_bar = per_set.iter().copied().fold(0.0, f64::max);
    Ok(KappaSuggestion {
        kappa_bar,
        recommended: (1.1 * kappa_bar).max(1e-3),
        per_set,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{ConicCap, ConstraintSet};
    use crate::geometry::{normalize, UnitPoint};
    use nalgebra::DVector;

    fn arr(axis: &[f64], xi: f64, eps: f64) -> ConstraintArrangement {
        let c: ConstraintSet = ConicCap::new(normalize(&DVector::from_column_slice(axis)).unwrap(), xi)
            .unwrap()
            .into();
        ConstraintArrangement::new(vec![c], None, UnitPoint::basis(2, 0), eps).unwrap()
    }

    #[test]
    fn arc_away_from_the_set_gives_zero() {
        // G(x_d, −g) heads directly away from the cap
        let a = arr(&[0.0, 1.0, 0.0], 0.3, 0.01);
        let s = suggest_kappa(&a).unwrap();
        assert_eq!(s.per_set, vec![0.0]);
        assert_eq!(s.recommended, 1e-3);
    }

    #[test]
    fn target_in_band_is_unbounded() {
        // for a cap the distance grows along G(x_d, −g), so only the start can be in the band, where μ₂ = 0
        let eps = 0.2;
        let beta: f64 = 1.2;
        let a = arr(&[beta.cos(), beta.sin(), 0.0], 1.0, eps);
        assert!(1.0 - (beta - 1.0).cos() < eps);
        assert_eq!(suggest_kappa(&a).unwrap().per_set[0], f64::INFINITY);
    }
}
