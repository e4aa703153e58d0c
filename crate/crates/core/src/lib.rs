// `!(x > 0.0)` is used on purpose so NaN is rejected; index loops mirror the
// nodal formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cli;
pub mod error;
pub mod fem;
pub mod ocp;
pub mod oracle;
pub mod stationarity;
pub mod vi;

pub use error::{Error, Result};
