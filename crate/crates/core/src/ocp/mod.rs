//! Regularized optimal control of the obstacle problem and the penalty path.

mod path;
mod problem;
mod slater;
mod solve;
mod state;

pub use path::{
    contact_tolerance, diagnostics, path_follow, separation, PathFailure, PathHistory, PathOptions,
    Schedule, StepDiagnostics, URefPolicy, CSV_HEADER,
};
pub use problem::{
    ControlBox, LinearObjective, Objective, OcpProblem, ProblemData, ProxCenter, TrackingObjective,
};
pub use slater::{construct_slater_candidate, slater_check};
pub use solve::{
    evaluate, reduced_gradient, reduced_objective, solve_pgamma, Evaluation, OcpIterate, Penalty,
    SolveOptions,
};
pub use state::{m_delta, m_delta_prime, m_delta_second, smoothed_state_solve, SmoothedState};
