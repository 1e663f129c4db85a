//! Reductions to the complete-intersection case: exact extrema of a quadric
//! on a ball, slack-variable lifting, ε-thickening, strict inequalities and
//! homotheties.

mod lift;
mod thicken;
mod trust;

pub use lift::{homothety_polyline, homothety_scene, project_down, slack_lift, LiftedScene};
pub use thicken::{regular_eps_search, strict_to_nonstrict, thicken, EpsSearch, StrictReplacement, ThickenedScene};
pub use trust::{max_abs_on_ball, maximize_on_ball, minimize_on_ball, BallExtremum};
