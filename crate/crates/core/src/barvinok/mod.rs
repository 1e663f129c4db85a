//! The parameterized linear system behind the thalweg bound: `S(u)`, `Φ`,
//! `C`, corank control, pivot patterns, root counting on a hyperplane and
//! the bound polynomials.

pub mod bounds;
mod corank;
mod pattern;
mod solve;
mod system;

pub use bounds::{
    bound_component, bound_p, bound_pattern_count, bound_q, bound_r, bound_report, bound_s, bound_t, c_of_k, Bound,
    BoundReport, BoundRow,
};
pub use corank::{corank, corank_scan, lifted_operator_spectrum, random_h_scene, CorankScan, CORANK_TOL};
pub use pattern::{detect_pattern, pattern_membership, reduced_residual, solve_pattern, PivotPattern};
pub use solve::{count_hyperplane_solutions, FullSolution, HyperplaneSolutions, ACCEPT_RESIDUAL, DEDUP_RADIUS};
pub use system::{a_matrix, full_jacobian, full_residual, phi, rhs_c, s_of_u, ParameterPoint};
