//! Morse checks, normalized-gradient trajectories on `M` and the two
//! diameter estimators.

mod graph;
mod morse;
mod trajectory;

pub use graph::{
    graph_geodesic_diameter, trajectory_diameter_estimate, ComponentDiameter, EstimateOptions, GraphDiameter, SampleGraph,
    TrajectoryEstimate,
};
pub use morse::{generate_morse, morse_check, morse_check_with, CriticalPoint, MorseOptions, MorseReport};
pub use trajectory::{integrate_trajectory, Direction, FlowOptions, Terminal, Trajectory};
