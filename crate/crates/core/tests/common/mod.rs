#![allow(dead_code)]

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DVector;
use spherenav::constraints::{ConicCap, ConstraintArrangement, ConstraintSet};
use spherenav::geometry::{normalize, UnitPoint};
use spherenav::scenario::{load_scenario, Scenario};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

pub fn scenario(name: &str) -> Scenario {
    load_scenario(&scenario_path(name), None).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Writes straight to the process stdout so the line survives the test harness's capture.
pub fn verdict_line(label: &str, pass: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "\n{} {label}: {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = out.flush();
}

/// Four π/6 caps on S² around the equator, target at the north pole; the south pole is unobstructed.
pub fn equatorial_caps(eps: f64) -> Arc<ConstraintArrangement> {
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];
    let sets: Vec<ConstraintSet> = axes
        .iter()
        .map(|a| {
            ConicCap::new(normalize(&DVector::from_column_slice(a)).unwrap(), std::f64::consts::PI / 6.0)
                .unwrap()
                .into()
        })
        .collect();
    Arc::new(ConstraintArrangement::new(sets, None, UnitPoint::basis(2, 2), eps).unwrap())
}
