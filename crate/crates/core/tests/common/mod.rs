//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use inverse_merton::blackpde::timehom_consumption;
use inverse_merton::market::{MarketParams, StrategyPair, StrategySurface, TimeFunction};

pub const KAPPA: f64 = 0.1;
pub const PHI: f64 = 0.5;

/// `c = κw`, `π = φw` with `r = 0.03`, `σ = 0.2`, `θ = 0.08` (so `R = 0.8`).
pub fn crra() -> (StrategyPair<f64>, MarketParams<f64>) {
    (
        StrategyPair::new(StrategySurface::Linear { coef: KAPPA }, StrategySurface::Linear { coef: PHI }),
        MarketParams::new(0.03, 0.2, 0.08).unwrap(),
    )
}

pub fn crra_risk_aversion() -> f64 {
    let (_, m) = crra();
    m.theta / (m.sigma * PHI)
}

/// Convex consumption `κw + α(e^{−aw} − 1)` with its square-root investment.
pub fn convex() -> (StrategyPair<f64>, MarketParams<f64>) {
    let (kappa, sigma, r, alpha, a) = (0.4, 0.25, 0.6, 0.1, 1.25);
    (
        StrategyPair::new(
            StrategySurface::ExpShiftLinear { kappa, alpha, a },
            StrategySurface::SqrtConvex { sigma, r, kappa, alpha, a },
        ),
        MarketParams::new(r, sigma, 0.95).unwrap(),
    )
}

pub fn bounded_cons() -> (StrategyPair<f64>, MarketParams<f64>) {
    (
        StrategyPair::new(
            StrategySurface::ExpBoundedConsumption { beta: 0.3, sigma: 0.5 },
            StrategySurface::ExpBounded,
        ),
        MarketParams::new(0.0, 0.5, 0.25).unwrap(),
    )
}

pub fn bounded_cons_reference() -> TimeFunction<f64> {
    TimeFunction::Constant(2f64.ln())
}

pub fn bounded_wealth() -> (StrategyPair<f64>, MarketParams<f64>) {
    (
        StrategyPair::new(
            StrategySurface::CubicBounded { r: 0.5, sigma: 0.25, beta: 0.1 },
            StrategySurface::LogisticBounded,
        )
        .with_wealth_bound(TimeFunction::Constant(1.0)),
        MarketParams::new(0.5, 0.25, 0.7).unwrap(),
    )
}

pub fn bounded_wealth_reference() -> TimeFunction<f64> {
    TimeFunction::Constant(0.5)
}

/// Power-shift investment with the consumption that makes it consistent,
/// for the convex-investment parameter set.
pub fn convex_convex() -> (StrategyPair<f64>, MarketParams<f64>) {
    power_shift_pair(MarketParams::new(0.3, 0.25, 0.026).unwrap(), 2.1, -60.0, 1.0 / 30.0)
}

/// Same construction with concave investment.
pub fn concave_concave() -> (StrategyPair<f64>, MarketParams<f64>) {
    power_shift_pair(MarketParams::new(0.05, 0.25, 0.13).unwrap(), 0.5, 60.0, 0.2)
}

fn power_shift_pair(market: MarketParams<f64>, phi: f64, psi: f64, p: f64) -> (StrategyPair<f64>, MarketParams<f64>) {
    let pi = StrategySurface::PowerShift { phi, psi, p };
    let c = timehom_consumption(&pi, TimeFunction::Constant(10.0), &market).unwrap().consumption;
    (StrategyPair::new(c, pi), market)
}
