//! Scenario files and the `solve`, `verify`, `oracle` and `slater` commands.

pub mod config;
pub mod expr;
mod run;

pub use config::{ScenarioConfig, UHatSpec, URefSpec};
pub use expr::{Expr, ExprError};
pub use run::{exit_code, run_oracle, run_slater, run_solve, run_verify, Which};

/// Exit codes of the command line tool.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
