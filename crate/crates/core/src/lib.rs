//! Regression on relational (dyadic) arrays with dependence-aware standard
//! errors: exchangeable and dyadic-clustering sandwich estimators, the
//! matrix-free algebra behind them, GEE, and simulation harnesses.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the actor subscripts of the sums they compute.
#![allow(clippy::needless_range_loop)]

pub mod array;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod fit;
pub mod forms;
pub mod gee;
pub mod inversion;
pub mod relational;
pub mod rng;
pub mod simulation;
pub mod theory;
