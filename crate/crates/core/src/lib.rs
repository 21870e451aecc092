//! Dynamic mean–downside-risk portfolio selection with a capped terminal
//! wealth in a market with deterministic coefficients.
//!
//! The optimal terminal wealth of every problem here is a piecewise affine
//! function of the terminal state-price deflator, so wealth processes,
//! policies and risk figures are available in closed form. Monte-Carlo
//! replication and a static scenario-LP baseline are provided for
//! comparison.

// `!(x > 0.0)` is the NaN-rejecting guard used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod cvar;
pub mod exec;
pub mod kernels;
pub mod lpm;
pub mod market;
pub mod mv;
pub mod payoff;
pub mod process;
pub mod rng;
pub mod sim;
pub mod simplex;
pub mod solvers;

pub use lpm::{Case, LpmError, LpmProblem, Multipliers, PolicySolution};
pub use market::{
    validate_market, DeflatorMoments, MarketError, MarketModel, RawMarket, RawSegment,
};
pub use process::OptimalProcess;
