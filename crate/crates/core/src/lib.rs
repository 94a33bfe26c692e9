//! Safe navigation on the unit sphere Sⁿ with unsafe cap and star-shaped regions.

pub mod constraints;
pub mod control;
pub mod geometry;
pub mod numeric;
pub mod scenario;
pub mod sim;

pub use constraints::{ConicCap, ConstraintArrangement, ConstraintError, ConstraintSet, ProjectedStarShape};
pub use control::{ConicController, ControlError, FeedbackLaw, StarController};
pub use geometry::{GeometryError, UnitPoint};
pub use sim::{integrate, SimConfig, SimError, Trajectory, TrajectoryRecord, Verdict};
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioError};
