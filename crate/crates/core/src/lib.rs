//! Stability of recursive-utility fixed points via the spectral radius of
//! the valuation operator, with Monte Carlo and quadrature estimators.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod lambda;
pub mod model;
pub mod operator;
pub mod output;
pub mod prefs;
pub mod rng;
pub mod solver;
pub mod sweep;

pub use config::{ConfigError, ConfigTree, RunConfig};
pub use error::{Error, Result};
pub use grid::Grid;
pub use lambda::{estimate_h, estimate_lambda_1_direct, estimate_lambda_p, InitLaw, LambdaEstimate, McSettings};
pub use model::{ByConstantVol, ByStochVol, FiniteChain, MehraPrescott, ModelSpec, Ssy, StatePoint};
pub use operator::{DiscreteOperator, OperatorOptions, SpectralResult};
pub use prefs::PreferenceSpec;
pub use rng::RngStream;
pub use solver::{
    apply_a, apply_b, classify_stability, scalar_closed_form, solve_fixed_point, FramingSpec, ShockSpec, SolveReport,
    SolveStatus, Stability, StateFunction,
};
pub use sweep::{sweep_stability_map, SweepCell};
