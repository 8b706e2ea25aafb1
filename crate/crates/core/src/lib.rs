//! Recovery of utility functions from observed consumption and investment
//! rules: consistency checks, dual maps, risk-attitude classification and
//! Monte-Carlo verification.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar for the common cases.

// `!(x > 0)` is how NaN gets rejected along with the rest
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blackpde;
pub mod deterministic;
pub mod error;
pub mod market;
pub mod montecarlo;
pub mod numerics;
pub mod risk;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Market64 = market::MarketParams<f64>;
pub type Surface64 = market::StrategySurface<f64>;
pub type Pair64 = market::StrategyPair<f64>;
pub type DualMap64 = blackpde::DualMap<f64>;
pub type Recovered64 = blackpde::RecoveredUtility<f64>;
pub type SimConfig64 = montecarlo::SimConfig<f64>;
pub type DetConfig64 = deterministic::DetConfig<f64>;
pub type RiskProfile64 = risk::RiskProfile<f64>;

pub type Market32 = market::MarketParams<f32>;
pub type Surface32 = market::StrategySurface<f32>;
pub type Pair32 = market::StrategyPair<f32>;
pub type DualMap32 = blackpde::DualMap<f32>;
pub type SimConfig32 = montecarlo::SimConfig<f32>;
