//! On-disk scenario format.

use serde::{Deserialize, Serialize};

use crate::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    /// n, for states on Sⁿ ⊂ ℝⁿ⁺¹.
    pub dimension: usize,
    pub target: Vec<f64>,
    pub constraints: Vec<ConstraintSpec>,
    /// Kernel point per set; defaults to each set's natural kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<Vec<Vec<f64>>>,
    pub controller: ControllerSpec,
    #[serde(default)]
    pub sim: SimSpec,
    #[serde(default)]
    pub initial_conditions: IcSpec,
    /// Separation the arrangement is claimed to satisfy; reported against the measured value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub validation: ValidationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstraintSpec {
    Cap {
        axis: Vec<f64>,
        /// Half-angle in radians.
        xi: f64,
    },
    Star {
        anchor: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        normal: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        basis: Option<Vec<Vec<f64>>>,
        /// Ambient kernel point on the body's hyperplane.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kernel: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
        profile: ProfileSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    PowerSum {
        exponent: f64,
        level: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    Ellipsoid {
        semi_axes: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    Crescent {
        outer_radius: f64,
        bite_center: Vec<f64>,
        bite_radius: f64,
    },
    RadialTable {
        radii: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    ConicGradient,
    StarPiecewise,
}

/// A number or the string "auto".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    Value(f64),
    Keyword(String),
}

impl AutoOr {
    pub fn value(&self) -> Option<f64> {
        match self {
            AutoOr::Value(v) => Some(*v),
            AutoOr::Keyword(_) => None,
        }
    }

    pub fn is_auto(&self) -> bool {
        matches!(self, AutoOr::Keyword(k) if k == "auto")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub law: LawKind,
    #[serde(default = "one")]
    pub k1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<AutoOr>,
    pub epsilon: AutoOr,
    /// Require κ above the estimated bound.
    #[serde(default)]
    pub strict: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    /// ẋ = P(x)u.
    #[default]
    Sphere,
    /// ẋ = ½A(x)ω with ω = 2A(x)ᵀu, on S³ only.
    Quaternion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    #[serde(flatten)]
    pub config: SimConfig,
    #[serde(default)]
    pub formulation: Formulation,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            config: SimConfig::default(),
            formulation: Formulation::Sphere,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explicit: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomIcs>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomIcs {
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSpec {
    pub separation_samples: usize,
    pub region_samples: usize,
    pub kernel_samples: usize,
    pub seed: u64,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        ValidationSpec {
            separation_samples: 2048,
            region_samples: 200_000,
            kernel_samples: 200,
            seed: 1,
        }
    }
}
