//! Risk-attitude classification from strategies and from recovered
//! utilities.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::blackpde::{DualMap, RecoveredUtility};
use crate::error::{Error, Result};
use crate::market::{MarketParams, StrategyPair, TimeFunction};
use crate::numerics::{log_spaced, Partial};
use crate::scalar::Real;

/// Monotonicity of absolute or relative risk aversion in consumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RiskVerdict {
    Dara,
    Cara,
    Iara,
    Drra,
    Crra,
    Irra,
    Mixed,
}

impl fmt::Display for RiskVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RiskVerdict::Dara => "DARA",
            RiskVerdict::Cara => "CARA",
            RiskVerdict::Iara => "IARA",
            RiskVerdict::Drra => "DRRA",
            RiskVerdict::Crra => "CRRA",
            RiskVerdict::Irra => "IRRA",
            RiskVerdict::Mixed => "MIXED",
        };
        f.write_str(s)
    }
}

/// Whether a margin measures absolute or relative risk aversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Absolute,
    Relative,
}

/// Verdict from margins whose sign is the sign of `ρ_c` (or of the
/// relative counterpart): non-positive everywhere means decreasing.
/// Margins within `tol` of zero count as equality.
pub fn verdict_from_margins<T: Real>(margins: &[T], tol: T, measure: Measure) -> RiskVerdict {
    let flat = margins.iter().all(|m| m.abs() <= tol);
    let dec = margins.iter().all(|&m| m <= tol);
    let inc = margins.iter().all(|&m| m >= -tol);
    match (measure, flat, dec, inc) {
        (Measure::Absolute, true, _, _) => RiskVerdict::Cara,
        (Measure::Absolute, _, true, _) => RiskVerdict::Dara,
        (Measure::Absolute, _, _, true) => RiskVerdict::Iara,
        (Measure::Relative, true, _, _) => RiskVerdict::Crra,
        (Measure::Relative, _, true, _) => RiskVerdict::Drra,
        (Measure::Relative, _, _, true) => RiskVerdict::Irra,
        _ => RiskVerdict::Mixed,
    }
}

/// Which computation produced a [`RiskProfile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    StrategyCriterion,
    RecoveredUtility,
}

/// Margins below `VERDICT_TOL·scale` count as equality.
pub const VERDICT_TOL: f64 = 1e-6;

/// One probe of a risk profile. `margin` carries the sign of the
/// consumption derivative of the measured risk aversion, scaled by the
/// size of the terms that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSample<T> {
    pub t: T,
    pub c: T,
    pub rho: T,
    pub margin: T,
}

/// Summary written next to the sample table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictBlock<T> {
    pub verdict: RiskVerdict,
    pub measure: Measure,
    pub route: Route,
    pub min_margin: T,
    pub max_margin: T,
    pub n_probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile<T> {
    pub samples: Vec<RiskSample<T>>,
    pub verdict: RiskVerdict,
    pub measure: Measure,
    pub route: Route,
}

impl<T: Real> RiskProfile<T> {
    fn from_samples(samples: Vec<RiskSample<T>>, measure: Measure, route: Route, tol: T) -> Self {
        let margins: Vec<T> = samples.iter().map(|s| s.margin).collect();
        let verdict = verdict_from_margins(&margins, tol, measure);
        Self { samples, verdict, measure, route }
    }

    pub fn min_margin(&self) -> T {
        self.samples.iter().map(|s| s.margin).fold(T::infinity(), T::min)
    }

    pub fn max_margin(&self) -> T {
        self.samples.iter().map(|s| s.margin).fold(T::neg_infinity(), T::max)
    }

    pub fn verdict_block(&self) -> VerdictBlock<T> {
        VerdictBlock {
            verdict: self.verdict,
            measure: self.measure,
            route: self.route,
            min_margin: self.min_margin(),
            max_margin: self.max_margin(),
            n_probes: self.samples.len(),
        }
    }

    /// Rows `t,c,rho,margin`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t", "c", "rho", "margin"])?;
        for s in &self.samples {
            wtr.write_record([s.t.to_string(), s.c.to_string(), s.rho.to_string(), s.margin.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Probe times used when none are given.
pub fn default_probe_times<T: Real>() -> Vec<T> {
    vec![T::lit(0.1), T::one(), T::lit(5.0)]
}

/// `(t, c)` probes: for each `t`, 20 log-spaced consumption levels in
/// `[0.05, 0.95]·c̄(t)`. When consumption is unbounded `c(t, 20)` stands in
/// for `c̄(t)`.
pub fn default_probes<T: Real>(map: &DualMap<T>, times: &[T]) -> Result<Vec<(T, T)>> {
    let mut out = Vec::with_capacity(times.len() * 20);
    for &t in times {
        let mut top = map.cbar(t)?;
        if !top.is_finite() {
            top = map.pair.c(t, T::lit(20.0))?;
        }
        if !(top > T::zero()) {
            return Err(Error::InvalidParameter(format!("no positive consumption to probe at t={t}")));
        }
        for c in log_spaced(T::lit(0.05) * top, T::lit(0.95) * top, 20) {
            out.push((t, c));
        }
    }
    Ok(out)
}

fn rho_at_wealth<T: Real>(pair: &StrategyPair<T>, market: &MarketParams<T>, t: T, y: T) -> Result<T> {
    let pi = pair.pi(t, y)?;
    let cw = pair.c_partial(t, y, Partial::W)?;
    if !(pi > T::zero()) || !(cw > T::zero()) {
        return Err(Error::SingularIntegrand { w: y.to_f64_lossy() });
    }
    Ok(market.theta_over_sigma() / (pi * cw))
}

/// `ρ` does not depend on the base point; any interior wealth will do.
fn map_for<T: Real>(pair: &StrategyPair<T>, market: &MarketParams<T>) -> Result<DualMap<T>> {
    let w0 = pair.wbar(T::zero()).map_or(T::one(), |b| T::lit(0.5) * b);
    DualMap::new(pair.clone(), *market, TimeFunction::Constant(w0))
}

/// `ρ(t, c) = θ/(σ π(t, Y)) · Y_c` with `Y = Y(t, c)` and `Y_c = 1/c_w(t, Y)`.
pub fn rho_from_strategy<T: Real>(pair: &StrategyPair<T>, market: &MarketParams<T>, t: T, c: T) -> Result<T> {
    let map = map_for(pair, market)?;
    let y = map.consumption_inverse(t, c)?;
    rho_at_wealth(pair, market, t, y)
}

fn strategy_profile<T: Real>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    probes: &[(T, T)],
    tol: T,
    measure: Measure,
) -> Result<RiskProfile<T>> {
    let map = map_for(pair, market)?;
    let samples = probes
        .iter()
        .map(|&(t, c)| {
            let y = map.consumption_inverse(t, c)?;
            let pi = pair.pi(t, y)?;
            let pi_w = pair.pi_partial(t, y, Partial::W)?;
            let cv = pair.c(t, y)?;
            let cw = pair.c_partial(t, y, Partial::W)?;
            let cww = pair.c_partial(t, y, Partial::WW)?;
            let a = pi_w / pi;
            let b = cww / cw;
            let margin = match measure {
                // ρ_c ≤ 0 iff π_w/π + c_ww/c_w ≥ 0
                Measure::Absolute => -(a + b) / T::one().max(a.abs()).max(b.abs()),
                Measure::Relative => {
                    let g = cw / cv;
                    (g - b - a) / T::one().max(g.abs()).max(a.abs()).max(b.abs())
                }
            };
            Ok(RiskSample { t, c, rho: rho_at_wealth(pair, market, t, y)?, margin })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskProfile::from_samples(samples, measure, Route::StrategyCriterion, tol))
}

/// Absolute risk aversion verdict from `π_w/π ≥ −c_ww/c_w` at `(t, c)` probes.
pub fn classify_dara_stoch<T: Real>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    probes: &[(T, T)],
    tol: T,
) -> Result<RiskProfile<T>> {
    strategy_profile(pair, market, probes, tol, Measure::Absolute)
}

/// Relative risk aversion verdict from
/// `∂_w log(c/c_w) ≤ ∂_w log π` at `(t, c)` probes.
pub fn classify_drra<T: Real>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    probes: &[(T, T)],
    tol: T,
) -> Result<RiskProfile<T>> {
    strategy_profile(pair, market, probes, tol, Measure::Relative)
}

/// `u_c` values at or below this are treated as satiation.
const SATURATION: f64 = 1e-12;

/// Step for differencing `log u_c` at `c`, kept inside `(0, c̄)`.
fn log_step<T: Real>(c: T, cbar: T, rel: T) -> T {
    let mut h = rel * c;
    if cbar.is_finite() {
        h = h.min(T::lit(0.25) * (cbar - c));
    }
    h
}

fn log_uc<T: Real, F: Fn(T) -> Result<T>>(uc: &F, c: T) -> Result<T> {
    let u = uc(c)?;
    if !(u > T::lit(SATURATION)) {
        return Err(Error::Saturated { c: c.to_f64_lossy(), uc: u.to_f64_lossy() });
    }
    Ok(u.ln())
}

/// `ρ = −∂_c log u_c` for any marginal utility `uc`, by Richardson-extrapolated
/// central differences.
pub fn rho_from_marginal<T: Real, F: Fn(T) -> Result<T>>(uc: F, c: T, cbar: T) -> Result<T> {
    if !(c > T::zero()) {
        return Err(Error::InvalidParameter(format!("consumption must be > 0, got {c}")));
    }
    if c >= cbar {
        return Err(Error::Saturated { c: c.to_f64_lossy(), uc: 0.0 });
    }
    log_uc(&uc, c)?;
    let h = log_step(c, cbar, T::lit(1e-3));
    let d = |h: T| -> Result<T> { Ok((log_uc(&uc, c + h)? - log_uc(&uc, c - h)?) / (T::lit(2.0) * h)) };
    let (d1, d2) = (d(h)?, d(h / T::lit(2.0))?);
    Ok(-(T::lit(4.0) * d2 - d1) / T::lit(3.0))
}

/// `ρ_c = −∂²_c log u_c`, extrapolated like [`rho_from_marginal`].
fn rho_slope<T: Real, F: Fn(T) -> Result<T>>(uc: F, c: T, cbar: T) -> Result<T> {
    let h = log_step(c, cbar, T::lit(1e-2));
    let g0 = log_uc(&uc, c)?;
    let d = |h: T| -> Result<T> { Ok((log_uc(&uc, c + h)? - T::lit(2.0) * g0 + log_uc(&uc, c - h)?) / (h * h)) };
    let (d1, d2) = (d(h)?, d(h / T::lit(2.0))?);
    Ok(-(T::lit(4.0) * d2 - d1) / T::lit(3.0))
}

/// `ρ(t, c) = −u_cc/u_c` from the recovered marginal utility.
pub fn rho_from_utility<T: Real>(recovered: &RecoveredUtility<T>, t: T, c: T) -> Result<T> {
    let cbar = recovered.map.cbar(t)?;
    rho_from_marginal(|b| recovered.uc(t, b), c, cbar)
}

/// Verdict from the recovered utility: the margin is `c·ρ_c/ρ` for
/// absolute and `1 + c·ρ_c/ρ` (the elasticity of `cρ`) for relative risk
/// aversion.
pub fn classify_from_utility<T: Real>(
    recovered: &RecoveredUtility<T>,
    probes: &[(T, T)],
    measure: Measure,
    tol: T,
) -> Result<RiskProfile<T>> {
    let samples = probes
        .iter()
        .map(|&(t, c)| {
            let cbar = recovered.map.cbar(t)?;
            let uc = |b: T| recovered.uc(t, b);
            let rho = rho_from_marginal(uc, c, cbar)?;
            let e = c * rho_slope(uc, c, cbar)? / rho;
            let margin = match measure {
                Measure::Absolute => e,
                Measure::Relative => T::one() + e,
            };
            Ok(RiskSample { t, c, rho, margin })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskProfile::from_samples(samples, measure, Route::RecoveredUtility, tol))
}

/// Largest relative gap `|ρ_strategy − ρ_utility|/ρ_strategy` over the probes.
pub fn route_disagreement<T: Real>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    recovered: &RecoveredUtility<T>,
    probes: &[(T, T)],
) -> Result<T> {
    let mut worst = T::zero();
    for &(t, c) in probes {
        let a = rho_from_strategy(pair, market, t, c)?;
        let b = rho_from_utility(recovered, t, c)?;
        worst = worst.max((a - b).abs() / a.abs());
    }
    Ok(worst)
}
