//! Front end for `qg-core`: argument parsing, output files and run reports.

mod commands;
pub mod report;
mod svg;

pub use commands::{load_scene, run, Cli, CliError, Command, Common, Method, Outcome};
pub use svg::polylines_svg;
