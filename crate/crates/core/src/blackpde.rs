//! Stochastic inverse problem: Black's consistency equation, the time
//! function `β(t)` and discount `A(t)`, the marginal-utility map
//! `F(t, w)` with its inverse `f(t, z)`, and the recovered utility.
//!
//! A pair `(c, π)` is consistent when
//! `π_t + σ²/2·π²π_ww − (c − rw)π_w + πc_w − rπ = 0`. Dividing by `π²` and
//! integrating in `w` from a base point `w0(t)` gives
//! `∫_{w0}^w π_t/π² dξ + σ²/2·π_w + c/π − rw/π = β(t)`, and then
//! `F(t, w) = e^{A(t)} exp(−(θ/σ) ∫_{w0}^w dξ/π)` is the marginal utility
//! of the wealth-`w` investor at time `t`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{MarketParams, StrategyPair, StrategySurface, TimeFunction};
use crate::montecarlo::{estimate_h, HSample, SimConfig};
use crate::numerics::{gauss_legendre, invert_try, log_spaced, quad_to_infinity, quad_try, ErrorSlot, Partial, TailMode};
use crate::scalar::{pairwise_sum, Real};

/// Tolerances for the consistency check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct BlackConfig<T> {
    /// Residuals are compared with `res_tol·max(1, |terms|)`.
    pub res_tol: T,
    /// `β` flatness is compared with `flat_tol·max(1, |β|)`.
    pub flat_tol: T,
    pub quad_tol: T,
}

impl<T: Real> Default for BlackConfig<T> {
    fn default() -> Self {
        Self { res_tol: T::lit(1e-6), flat_tol: T::lit(1e-6), quad_tol: T::lit(1e-12) }
    }
}

impl<T: Real> BlackConfig<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("res_tol", self.res_tol), ("flat_tol", self.flat_tol), ("quad_tol", self.quad_tol)] {
            if !(v > T::zero()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Residual of Black's equation and the largest term magnitude (at least 1).
pub fn black_residual_scaled<T: Real>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    t: T,
    w: T,
) -> Result<(T, T)> {
    let half = T::lit(0.5);
    let pi = pair.pi(t, w)?;
    let pi_t = pair.pi_partial(t, w, Partial::T)?;
    let pi_w = pair.pi_partial(t, w, Partial::W)?;
    let pi_ww = pair.pi_partial(t, w, Partial::WW)?;
    let c = pair.c(t, w)?;
    let c_w = pair.c_partial(t, w, Partial::W)?;
    let terms = [
        pi_t,
        half * market.sigma * market.sigma * pi * pi * pi_ww,
        -(c - market.r * w) * pi_w,
        pi * c_w,
        -market.r * pi,
    ];
    let scale = terms.iter().fold(T::one(), |m, x| m.max(x.abs()));
    Ok((terms.iter().copied().sum(), scale))
}

/// `π_t + σ²/2·π²π_ww − (c − rw)π_w + πc_w − rπ`.
pub fn black_residual<T: Real>(pair: &StrategyPair<T>, market: &MarketParams<T>, t: T, w: T) -> Result<T> {
    black_residual_scaled(pair, market, t, w).map(|r| r.0)
}

/// Left-hand side of the integrated equation based at `reference`.
pub fn integrated_lhs<T: Real>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    t: T,
    w: T,
    reference: T,
    quad_tol: T,
) -> Result<T> {
    let pi = positive_pi(pair, t, w)?;
    let local = T::lit(0.5) * market.sigma * market.sigma * pair.pi_partial(t, w, Partial::W)?
        + (pair.c(t, w)? - market.r * w) / pi;
    if pair.investment.is_time_homogeneous() || w == reference {
        return Ok(local);
    }
    let drift = quad_try(
        |x| {
            let p = positive_pi(pair, t, x)?;
            Ok(pair.pi_partial(t, x, Partial::T)? / (p * p))
        },
        reference,
        w,
        quad_tol,
    )?;
    Ok(drift + local)
}

fn positive_pi<T: Real>(pair: &StrategyPair<T>, t: T, w: T) -> Result<T> {
    let pi = pair.pi(t, w)?;
    if pi > T::zero() {
        Ok(pi)
    } else {
        Err(Error::SingularIntegrand { w: w.to_f64_lossy() })
    }
}

/// `β(t)` as the mean of the integrated left-hand side over a wealth grid,
/// with its standard deviation as flatness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSample<T> {
    pub t: T,
    pub beta: T,
    pub flatness: T,
}

pub fn extract_beta<T: Real>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    t: T,
    w_grid: &[T],
    reference: T,
) -> Result<BetaSample<T>> {
    if w_grid.is_empty() {
        return Err(Error::InvalidParameter("wealth grid is empty".into()));
    }
    let tol = BlackConfig::default().quad_tol;
    let values =
        w_grid.par_iter().map(|&w| integrated_lhs(pair, market, t, w, reference, tol)).collect::<Result<Vec<T>>>()?;
    let n = T::from_count(values.len());
    let beta = pairwise_sum(&values) / n;
    let sq: Vec<T> = values.iter().map(|&v| (v - beta) * (v - beta)).collect();
    let flatness = (pairwise_sum(&sq) / n).sqrt();
    Ok(BetaSample { t, beta, flatness })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consistency {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample<T> {
    pub t: T,
    pub w: T,
    pub residual: T,
    pub scale: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport<T> {
    pub residual_grid: Vec<ResidualSample<T>>,
    pub beta: Vec<BetaSample<T>>,
    /// Largest `|residual| / scale`.
    pub max_residual: T,
    /// Largest `flatness / max(1, |β|)`.
    pub max_flatness: T,
    pub verdict: Consistency,
}

impl<T: Real> ConsistencyReport<T> {
    pub fn is_consistent(&self) -> bool {
        self.verdict == Consistency::Consistent
    }

    /// Rows `t,w,residual`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t", "w", "residual"])?;
        for r in &self.residual_grid {
            wtr.write_record([r.t.to_string(), r.w.to_string(), r.residual.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Residuals and `β` flatness over a probe grid.
pub fn check_consistency<T: Real>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    t_probes: &[T],
    w_probes: &[T],
    reference: &TimeFunction<T>,
    cfg: &BlackConfig<T>,
) -> Result<ConsistencyReport<T>> {
    market.validate()?;
    cfg.validate()?;
    if t_probes.is_empty() || w_probes.is_empty() {
        return Err(Error::InvalidParameter("probe grids must be non-empty".into()));
    }
    let points: Vec<(T, T)> = t_probes.iter().flat_map(|&t| w_probes.iter().map(move |&w| (t, w))).collect();
    let residual_grid = points
        .par_iter()
        .map(|&(t, w)| {
            black_residual_scaled(pair, market, t, w).map(|(residual, scale)| ResidualSample { t, w, residual, scale })
        })
        .collect::<Result<Vec<_>>>()?;
    let beta = t_probes
        .iter()
        .map(|&t| {
            let inside: Vec<T> = w_probes.iter().copied().filter(|&w| pair.wbar(t).is_none_or(|b| w < b)).collect();
            extract_beta(pair, market, t, &inside, reference.eval(t))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_residual = residual_grid.iter().map(|r| r.residual.abs() / r.scale).fold(T::zero(), T::max);
    let max_flatness = beta.iter().map(|b| b.flatness / b.beta.abs().max(T::one())).fold(T::zero(), T::max);
    let verdict = if max_residual <= cfg.res_tol && max_flatness <= cfg.flat_tol {
        Consistency::Consistent
    } else {
        Consistency::Inconsistent
    };
    Ok(ConsistencyReport { residual_grid, beta, max_residual, max_flatness, verdict })
}

/// Default wealth probes: inside `(0, w̄)` for bounded pairs, else a spread
/// around 1.
pub fn default_w_probes<T: Real>(pair: &StrategyPair<T>) -> Vec<T> {
    match pair.wbar(T::zero()) {
        Some(b) => (1..10).map(|k| b * T::from_count(k) / T::lit(10.0)).collect(),
        None => [0.2, 0.5, 1.0, 2.0, 5.0].iter().map(|&x| T::lit(x)).collect(),
    }
}

/// `A(t) = −(θ/σ)∫_0^t β + (θ²/2 − r)t` from sampled `(s, β(s))` pairs,
/// linearly interpolated; a single sample is treated as constant.
pub fn discount_from_beta<T: Real>(beta_samples: &[(T, T)], market: &MarketParams<T>, t: T) -> Result<T> {
    if beta_samples.is_empty() {
        return Err(Error::InvalidParameter("no beta samples".into()));
    }
    let drift = (T::lit(0.5) * market.theta * market.theta - market.r) * t;
    if t == T::zero() {
        return Ok(T::zero());
    }
    let integral = if beta_samples.len() == 1 || beta_samples.iter().all(|b| b.1 == beta_samples[0].1) {
        beta_samples[0].1 * t
    } else {
        let last = beta_samples.last().unwrap();
        if beta_samples[0].0 > T::zero() || last.0 < t {
            return Err(Error::InvalidParameter(format!("beta samples do not cover [0, {t}]")));
        }
        let mut acc = Vec::new();
        for pair in beta_samples.windows(2) {
            let (s0, b0) = pair[0];
            let (s1, b1) = pair[1];
            if s0 >= t {
                break;
            }
            let end = s1.min(t);
            let b_end = b0 + (b1 - b0) * (end - s0) / (s1 - s0);
            acc.push((end - s0) * (b0 + b_end) * T::lit(0.5));
        }
        pairwise_sum(&acc)
    };
    Ok(-market.theta_over_sigma() * integral + drift)
}

/// The map from wealth to marginal utility and back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualMap<T> {
    pub pair: StrategyPair<T>,
    pub market: MarketParams<T>,
    /// Base point `w0(t)` of the wealth integrals.
    pub reference: TimeFunction<T>,
    pub quad_tol: T,
}

impl<T: Real> DualMap<T> {
    pub fn new(pair: StrategyPair<T>, market: MarketParams<T>, reference: TimeFunction<T>) -> Result<Self> {
        market.validate()?;
        let map = Self { pair, market, reference, quad_tol: T::lit(1e-12) };
        positive_pi(&map.pair, T::zero(), map.reference.eval(T::zero()))?;
        if let Some(b) = map.pair.wbar(T::zero()) {
            if !(map.reference.eval(T::zero()) < b) {
                return Err(Error::InvalidParameter("reference wealth must lie below the wealth bound".into()));
            }
        }
        Ok(map)
    }

    /// True when `A(t)` is linear in `t`.
    pub fn is_stationary(&self) -> bool {
        self.pair.consumption.is_time_homogeneous()
            && self.pair.investment.is_time_homogeneous()
            && self.reference.is_constant()
    }

    /// `β(t)`: the integrated left-hand side at the base point.
    pub fn beta(&self, t: T) -> Result<T> {
        let w0 = self.reference.eval(t);
        integrated_lhs(&self.pair, &self.market, t, w0, w0, self.quad_tol)
    }

    /// `dA/dt`, including the correction for a moving base point.
    fn discount_rate(&self, s: T) -> Result<T> {
        let m = &self.market;
        let mut rate = -m.theta_over_sigma() * self.beta(s)? + T::lit(0.5) * m.theta * m.theta - m.r;
        let dw0 = self.reference.derivative(s);
        if dw0 != T::zero() {
            rate = rate - m.theta_over_sigma() * dw0 / positive_pi(&self.pair, s, self.reference.eval(s))?;
        }
        Ok(rate)
    }

    /// `A(t)`.
    pub fn discount(&self, t: T) -> Result<T> {
        if t == T::zero() {
            return Ok(T::zero());
        }
        if self.is_stationary() {
            return Ok(self.discount_rate(T::zero())? * t);
        }
        quad_try(|s| self.discount_rate(s), T::zero(), t, self.quad_tol)
    }

    /// `A` at ascending times, integrating increment by increment.
    pub fn discount_profile(&self, ts: &[T]) -> Result<Vec<T>> {
        if ts.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::InvalidParameter("times must be ascending".into()));
        }
        if self.is_stationary() {
            let rate = self.discount_rate(T::zero())?;
            return Ok(ts.iter().map(|&t| rate * t).collect());
        }
        let mut out = Vec::with_capacity(ts.len());
        let mut prev_t = T::zero();
        let mut acc = T::zero();
        for &t in ts {
            acc = acc + quad_try(|s| self.discount_rate(s), prev_t, t, self.quad_tol)?;
            out.push(acc);
            prev_t = t;
        }
        Ok(out)
    }

    /// `∫_{w0(t)}^w dξ / π(t, ξ)`.
    pub fn reciprocal_integral(&self, t: T, w: T) -> Result<T> {
        let w0 = self.reference.eval(t);
        if let Some(v) = self.pair.investment.reciprocal_integral(t, w0, w) {
            return Ok(v);
        }
        let (lo, hi) = (w0.min(w), w0.max(w));
        if lo > T::zero() && hi > T::lit(4.0) * lo {
            // in ln ξ, so that wide ranges do not exhaust the bisection depth
            return quad_try(
                |s| {
                    let x = s.exp();
                    positive_pi(&self.pair, t, x).map(|p| x / p)
                },
                w0.ln(),
                w.ln(),
                self.quad_tol,
            );
        }
        quad_try(|x| positive_pi(&self.pair, t, x).map(|p| T::one() / p), w0, w, self.quad_tol)
    }

    /// `F(t, w)` given `A(t)`.
    pub fn marginal_with(&self, discount: T, t: T, w: T) -> Result<T> {
        if w <= T::zero() {
            return Ok(T::infinity());
        }
        if self.pair.wbar(t).is_some_and(|b| w >= b) {
            return Ok(T::zero());
        }
        Ok((discount - self.market.theta_over_sigma() * self.reciprocal_integral(t, w)?).exp())
    }

    /// `F(t, w) = e^{A(t)} exp(−(θ/σ) ∫_{w0}^w dξ/π)`.
    pub fn marginal(&self, t: T, w: T) -> Result<T> {
        self.marginal_with(self.discount(t)?, t, w)
    }

    /// `f(t, z)` given `A(t)`: the wealth whose marginal utility is `z`.
    pub fn inverse_with(&self, discount: T, t: T, z: T) -> Result<T> {
        let out_of_range = || Error::OutOfRange { t: t.to_f64_lossy(), z: z.to_f64_lossy() };
        if !(z > T::zero()) || !z.is_finite() {
            return Err(out_of_range());
        }
        let target = (discount - z.ln()) / self.market.theta_over_sigma();
        let w0 = self.reference.eval(t);
        let wbar = self.pair.wbar(t);
        if let Some(w) = self.pair.investment.inverse_reciprocal_integral(t, w0, target) {
            if wbar.is_some_and(|b| w >= b) {
                return Err(out_of_range());
            }
            return Ok(w);
        }
        if target == T::zero() {
            return Ok(w0);
        }
        let g = |w: T| self.reciprocal_integral(t, w);
        let two = T::lit(2.0);
        let (mut lo, mut hi) = (w0, w0);
        // step out by squaring until the float range is exhausted; slowly
        // diverging ∫ dξ/π can put the root many decades away from w0
        let mut found = false;
        let mut scale = T::one();
        loop {
            scale = if scale == T::one() { two } else { scale * scale };
            if target > T::zero() {
                let next = match wbar {
                    Some(b) => b - (b - w0) / scale,
                    None => (w0 * scale).min(T::max_value()),
                };
                if next <= hi {
                    break;
                }
                lo = hi;
                hi = next;
                if g(hi)? >= target {
                    found = true;
                    break;
                }
            } else {
                let next = (w0 / scale).max(T::min_positive_value());
                if next >= lo {
                    break;
                }
                hi = lo;
                lo = next;
                if g(lo)? <= target {
                    found = true;
                    break;
                }
            }
        }
        if !found {
            return Err(out_of_range());
        }
        if wbar.is_some() {
            return invert_try(g, target, (lo, hi), T::lit(1e-15));
        }
        invert_try(|s: T| g(s.exp()), target, (lo.ln(), hi.ln()), T::lit(1e-15)).map(T::exp)
    }

    pub fn inverse(&self, t: T, z: T) -> Result<T> {
        self.inverse_with(self.discount(t)?, t, z)
    }

    /// Upper consumption frontier `c̄(t)`: consumption on the wealth bound,
    /// else the saturation level of `c(t, ·)`, else infinity.
    pub fn cbar(&self, t: T) -> Result<T> {
        if let Some(b) = self.pair.wbar(t) {
            return self.pair.c(t, b);
        }
        let mut w = T::lit(100.0);
        let mut c = self.pair.c(t, w)?;
        for _ in 0..10 {
            let c_next = self.pair.c(t, w * T::lit(2.0))?;
            if c_next <= c * (T::one() + T::lit(1e-9)) {
                return Ok(c_next.max(c));
            }
            w = w * T::lit(2.0);
            c = c_next;
        }
        Ok(T::infinity())
    }

    /// `Y(t, c)`: the wealth at which the investor consumes `c`.
    pub fn consumption_inverse(&self, t: T, c: T) -> Result<T> {
        self.consumption_inverse_below(t, c, self.cbar(t)?)
    }

    pub(crate) fn consumption_inverse_below(&self, t: T, c: T, cbar: T) -> Result<T> {
        if !(c >= T::zero()) {
            return Err(Error::InvalidParameter(format!("consumption must be >= 0, got {c}")));
        }
        if c == T::zero() {
            return Ok(T::zero());
        }
        if c >= cbar {
            return Err(Error::AboveFrontier { t: t.to_f64_lossy(), value: c.to_f64_lossy(), cbar: cbar.to_f64_lossy() });
        }
        let cons = |w: T| self.pair.c(t, w);
        let hi = match self.pair.wbar(t) {
            Some(b) => b,
            None => {
                let mut hi = self.reference.eval(t).max(T::one());
                let mut k = 0;
                while cons(hi)? < c {
                    hi = hi * T::lit(2.0);
                    k += 1;
                    if k > 200 {
                        return Err(Error::NotBracketed {
                            target: c.to_f64_lossy(),
                            f_lo: 0.0,
                            f_hi: cons(hi)?.to_f64_lossy(),
                        });
                    }
                }
                hi
            }
        };
        invert_try(cons, c, (T::zero(), hi), T::lit(1e-15))
    }

    /// `u_c(t, c) = F(t, Y(t, c))`, zero at and above `c̄(t)`.
    pub fn marginal_utility(&self, t: T, c: T) -> Result<T> {
        let cbar = self.cbar(t)?;
        if c >= cbar {
            return Ok(T::zero());
        }
        let y = self.consumption_inverse_below(t, c, cbar)?;
        self.marginal(t, y)
    }

    /// Inverse marginal utility `I(t, z) = c(t, f(t, z))`.
    pub fn inverse_marginal_utility(&self, t: T, z: T) -> Result<T> {
        self.pair.c(t, self.inverse(t, z)?)
    }

    /// `H(t, c) = ∫_{c0(t)}^c u_c(t, b) db`, computed in wealth as
    /// `∫_{Y(c0)}^{Y(c)} F(t, ω) c_w(t, ω) dω`. The base consumption
    /// defaults to `c(t, w0(t))`.
    pub fn antiderivative(&self, t: T, c: T, base: Option<&TimeFunction<T>>) -> Result<T> {
        let a = self.discount(t)?;
        let cbar = self.cbar(t)?;
        let lower = match base {
            Some(c0) => self.consumption_inverse_below(t, c0.eval(t), cbar)?,
            None => self.reference.eval(t),
        };
        if c >= cbar && self.pair.wbar(t).is_none() {
            return self.antiderivative_in_wealth(a, t, lower, T::infinity());
        }
        let upper = if c >= cbar { self.pair.wbar(t).unwrap() } else { self.consumption_inverse_below(t, c, cbar)? };
        self.antiderivative_in_wealth(a, t, lower, upper)
    }

    /// `∫_{lower}^{upper} F(t, ω) c_w(t, ω) dω` given `A(t)`; `upper` may be
    /// infinite.
    pub fn antiderivative_in_wealth(&self, discount: T, t: T, lower: T, upper: T) -> Result<T> {
        let integrand =
            |w: T| -> Result<T> { Ok(self.marginal_with(discount, t, w)? * self.pair.c_partial(t, w, Partial::W)?) };
        if upper.is_infinite() {
            let slot = ErrorSlot::new();
            let v = quad_to_infinity(|w| slot.take(integrand(w)), lower, self.quad_tol, TailMode::Substitution);
            return slot.finish(v);
        }
        let wbar = self.pair.wbar(t);
        if lower > T::zero() && upper > T::zero() && wbar.is_none_or(|b| lower < b && upper < b) {
            return self.antiderivative_panels(discount, t, lower, upper, wbar);
        }
        quad_try(integrand, lower, upper, T::lit(1e-11))
    }

    /// Composite Gauss–Legendre in `s = ln w`, or `s = ln(w/(b − w))` below a
    /// wealth bound `b`. `∫ dξ/π` is carried from panel to panel, so `F` is
    /// never re-integrated from the base point.
    fn antiderivative_panels(&self, discount: T, t: T, lower: T, upper: T, wbar: Option<T>) -> Result<T> {
        let to_w = |s: T| match wbar {
            Some(b) => b / (T::one() + (-s).exp()),
            None => s.exp(),
        };
        let jac = |w: T| match wbar {
            Some(b) => w * (b - w) / b,
            None => w,
        };
        let to_s = |w: T| match wbar {
            Some(b) => (w / (b - w)).ln(),
            None => w.ln(),
        };
        let recip = |s: T| -> Result<T> {
            let w = to_w(s);
            Ok(jac(w) / positive_pi(&self.pair, t, w)?)
        };
        let (s0, s1) = (to_s(lower), to_s(upper));
        let n = ((s1 - s0).abs().to_f64_lossy() / PANEL_WIDTH).ceil().max(1.0) as usize;
        let step = (s1 - s0) / T::from_count(n);
        let k_ts = self.market.theta_over_sigma();
        let mut g = self.reciprocal_integral(t, lower)?;
        let mut total = T::zero();
        for k in 0..n {
            let a = s0 + step * T::from_count(k);
            let b = if k + 1 == n { s1 } else { a + step };
            let g_a = g;
            total = total
                + gauss_legendre(
                    |s| {
                        let w = to_w(s);
                        let gs = g_a + gauss_legendre(recip, a, s)?;
                        Ok((discount - k_ts * gs).exp() * self.pair.c_partial(t, w, Partial::W)? * jac(w))
                    },
                    a,
                    b,
                )?;
            g = g + gauss_legendre(recip, a, b)?;
        }
        Ok(total)
    }
}

/// Panel width, in the log or logit variable, of the `H` quadrature.
const PANEL_WIDTH: f64 = 0.25;

/// Options for [`recover_utility`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct RecoverConfig<T> {
    /// Base point `w0(t)` of the wealth integrals.
    pub reference: TimeFunction<T>,
    /// Base consumption `c0(t)` of `H`; `None` means `c(t, w0(t))`.
    pub h_base: Option<TimeFunction<T>>,
    /// Initial wealth for the Monte-Carlo estimate of `h(t)`.
    pub x0: T,
    /// Proceed even if the pair fails the consistency check.
    pub force: bool,
    pub black: BlackConfig<T>,
    /// Wealth probes for the consistency check; defaults per
    /// [`default_w_probes`].
    pub w_probes: Option<Vec<T>>,
}

impl<T: Real> Default for RecoverConfig<T> {
    fn default() -> Self {
        Self {
            reference: TimeFunction::Constant(T::one()),
            h_base: None,
            x0: T::one(),
            force: false,
            black: BlackConfig::default(),
            w_probes: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityRow<T> {
    pub t: T,
    pub c: T,
    pub uc: T,
    pub h: T,
}

/// Output of [`recover_utility`]: sampled `u_c`, `H`, `A`, `β`, `c̄` plus
/// the map needed to evaluate them anywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredUtility<T> {
    pub map: DualMap<T>,
    pub h_base: Option<TimeFunction<T>>,
    /// `(t, A(t))`.
    pub discount: Vec<(T, T)>,
    /// `(t, β(t))`.
    pub beta: Vec<(T, T)>,
    /// `(t, c̄(t))`; infinite when unbounded.
    pub cbar: Vec<(T, T)>,
    /// `(t, w̄(t))` when the pair has a wealth bound.
    pub wbar: Option<Vec<(T, T)>>,
    pub table: Vec<UtilityRow<T>>,
    /// `h(t)` with Monte-Carlo standard errors.
    pub h: Option<Vec<HSample<T>>>,
    pub consistency: ConsistencyReport<T>,
    pub regularity: RegularityReport<T>,
    /// False when recovery was forced past a failed consistency check.
    pub verified: bool,
}

impl<T: Real> RecoveredUtility<T> {
    pub fn marginal(&self, t: T, w: T) -> Result<T> {
        self.map.marginal(t, w)
    }

    pub fn inverse(&self, t: T, z: T) -> Result<T> {
        self.map.inverse(t, z)
    }

    pub fn consumption_inverse(&self, t: T, c: T) -> Result<T> {
        self.map.consumption_inverse(t, c)
    }

    pub fn uc(&self, t: T, c: T) -> Result<T> {
        self.map.marginal_utility(t, c)
    }

    pub fn big_h(&self, t: T, c: T) -> Result<T> {
        self.map.antiderivative(t, c, self.h_base.as_ref())
    }

    /// Rows `t,c,u_c,H`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t", "c", "u_c", "H"])?;
        for r in &self.table {
            wtr.write_record([r.t.to_string(), r.c.to_string(), r.uc.to_string(), r.h.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Checks consistency, then tabulates `u_c` and `H` on `t_grid × c_grid`
/// and, with `mc` given, estimates `h(t)` on `t_grid`.
pub fn recover_utility<T: Real>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    t_grid: &[T],
    c_grid: &[T],
    cfg: &RecoverConfig<T>,
    mc: Option<&SimConfig<T>>,
) -> Result<RecoveredUtility<T>> {
    if t_grid.is_empty() || c_grid.is_empty() {
        return Err(Error::InvalidParameter("time and consumption grids must be non-empty".into()));
    }
    let w_probes = cfg.w_probes.clone().unwrap_or_else(|| default_w_probes(pair));
    let consistency = check_consistency(pair, market, t_grid, &w_probes, &cfg.reference, &cfg.black)?;
    if !consistency.is_consistent() && !cfg.force {
        return Err(Error::InconsistentPair(format!(
            "max scaled residual {}, max flatness {}",
            consistency.max_residual, consistency.max_flatness
        )));
    }
    let regularity = check_regularity(pair, market, None)?;
    let map = DualMap::new(pair.clone(), *market, cfg.reference)?;
    let discount = t_grid.iter().map(|&t| map.discount(t).map(|a| (t, a))).collect::<Result<Vec<_>>>()?;
    let beta = t_grid.iter().map(|&t| map.beta(t).map(|b| (t, b))).collect::<Result<Vec<_>>>()?;
    let cbar = t_grid.iter().map(|&t| map.cbar(t).map(|c| (t, c))).collect::<Result<Vec<_>>>()?;
    let wbar = pair.wealth_bound.map(|b| t_grid.iter().map(|&t| (t, b.eval(t))).collect());
    let points: Vec<(T, T)> = t_grid.iter().flat_map(|&t| c_grid.iter().map(move |&c| (t, c))).collect();
    let table = points
        .par_iter()
        .map(|&(t, c)| -> Result<UtilityRow<T>> {
            Ok(UtilityRow { t, c, uc: map.marginal_utility(t, c)?, h: map.antiderivative(t, c, cfg.h_base.as_ref())? })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut recovered = RecoveredUtility {
        map,
        h_base: cfg.h_base,
        discount,
        beta,
        cbar,
        wbar,
        table,
        h: None,
        consistency,
        regularity,
        verified: true,
    };
    recovered.verified = recovered.consistency.is_consistent();
    if let Some(sim) = mc {
        recovered.h = Some(estimate_h(&recovered, cfg.x0, t_grid, sim)?);
    }
    Ok(recovered)
}

/// A consumption surface built from a time-homogeneous investment rule,
/// with admissibility warnings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeHomConstruction<T> {
    pub consumption: StrategySurface<T>,
    pub warnings: Vec<String>,
}

/// `c(t, w) = rw − σ²/2·π(w)π_w(w) + β(t)π(w)`.
pub fn timehom_consumption<T: Real>(
    investment: &StrategySurface<T>,
    beta: TimeFunction<T>,
    market: &MarketParams<T>,
) -> Result<TimeHomConstruction<T>> {
    market.validate()?;
    let probes_w = log_spaced(T::lit(1e-3), T::lit(1e3), 25);
    let probes_t = [T::zero(), T::one(), T::lit(5.0)];
    for &t in &probes_t {
        for &w in &probes_w {
            let pi_t = investment.partial(t, w, Partial::T)?;
            let pi = investment.value(t, w)?;
            if pi_t.abs() > T::lit(1e-8) * pi.abs().max(T::one()) {
                return Err(Error::NotTimeHomogeneous { t: t.to_f64_lossy(), w: w.to_f64_lossy(), pi_t: pi_t.to_f64_lossy() });
            }
        }
    }
    let consumption = StrategySurface::TimeHomogeneous {
        investment: Box::new(investment.clone()),
        beta,
        r: market.r,
        sigma: market.sigma,
    };
    let mut warnings = Vec::new();
    for &t in &probes_t {
        for &w in &probes_w {
            let c = consumption.value(t, w)?;
            let c_w = consumption.partial(t, w, Partial::W)?;
            if c < T::zero() {
                warnings.push(format!("negative consumption {c} at t={t}, w={w}"));
            }
            if c_w <= T::zero() {
                warnings.push(format!("consumption not increasing in wealth (c_w = {c_w}) at t={t}, w={w}"));
            }
        }
    }
    Ok(TimeHomConstruction { consumption, warnings })
}

/// Bounds and conditions for the global Lipschitz regularity lemma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport<T> {
    /// Infimum of `π_w`, including its limits at the ends of the domain.
    pub delta1: T,
    /// Supremum of `π_w`.
    pub delta2: T,
    /// Infimum of `c_w`.
    pub kappa1: T,
    /// Supremum of `c_w`.
    pub kappa2: T,
    /// `θ/σ ≤ δ1`.
    pub condition_a: bool,
    /// `δ1 < θ/σ ≤ δ2` and `θ(1 − δ2/δ1) + σδ2 > 0`.
    pub condition_b: bool,
    /// `δ1 > δ2/2`, which makes the second part of condition (b) automatic.
    pub shortcut: bool,
    /// `∫ dξ/π` diverges at both ends of the wealth domain.
    pub pi_integrals_diverge: bool,
    pub time_homogeneous: bool,
    pub lemma_applies: bool,
}

/// Estimates the regularity bounds at `t = 0` on a log grid (default
/// `[1e-4, 1e4]`, clipped to the wealth bound), extrapolating `π_w` to its
/// limits at zero and infinity.
pub fn check_regularity<T: Real>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    probes: Option<&[T]>,
) -> Result<RegularityReport<T>> {
    let t = T::zero();
    let wbar = pair.wbar(t);
    let grid: Vec<T> = match probes {
        Some(p) => p.to_vec(),
        None => log_spaced(T::lit(1e-4), T::lit(1e4), 161),
    };
    let grid: Vec<T> = grid.into_iter().filter(|&w| w > T::zero() && wbar.is_none_or(|b| w < b)).collect();
    if grid.is_empty() {
        return Err(Error::InvalidParameter("no regularity probes inside the wealth domain".into()));
    }
    let pi_w = |w: T| pair.pi_partial(t, w, Partial::W);
    let mut slopes = grid.iter().map(|&w| pi_w(w)).collect::<Result<Vec<_>>>()?;
    let w_lo = grid[0];
    slopes.push(T::lit(2.0) * pi_w(w_lo * T::lit(0.5))? - pi_w(w_lo)?);
    if wbar.is_none() {
        let w_hi = *grid.last().unwrap();
        slopes.push((T::lit(4.0) * pi_w(w_hi * T::lit(2.0))? - pi_w(w_hi)?) / T::lit(3.0));
    }
    let delta1 = slopes.iter().copied().fold(T::infinity(), T::min);
    let delta2 = slopes.iter().copied().fold(T::neg_infinity(), T::max);
    let c_slopes = grid.iter().map(|&w| pair.c_partial(t, w, Partial::W)).collect::<Result<Vec<_>>>()?;
    let kappa1 = c_slopes.iter().copied().fold(T::infinity(), T::min);
    let kappa2 = c_slopes.iter().copied().fold(T::neg_infinity(), T::max);

    let ts = market.theta_over_sigma();
    let condition_a = ts <= delta1;
    let condition_b = delta1 < ts
        && ts <= delta2
        && market.theta * (T::one() - delta2 / delta1) + market.sigma * delta2 > T::zero();
    let shortcut = delta1 > delta2 * T::lit(0.5);
    let pi_integrals_diverge = reciprocal_integrals_diverge(pair, t)?;
    let time_homogeneous = pair.investment.is_time_homogeneous();
    let lemma_applies = time_homogeneous
        && (condition_a || condition_b)
        && delta1 > T::zero()
        && kappa1 > T::zero()
        && pi_integrals_diverge;
    Ok(RegularityReport {
        delta1,
        delta2,
        kappa1,
        kappa2,
        condition_a,
        condition_b,
        shortcut,
        pi_integrals_diverge,
        time_homogeneous,
        lemma_applies,
    })
}

/// Divergence test for `∫ dξ/π` at both ends of the wealth domain: the
/// integral over successive decades approaching the end must not shrink
/// below half of the first decade's contribution.
type Segments<T> = Vec<(T, T)>;

fn reciprocal_integrals_diverge<T: Real>(pair: &StrategyPair<T>, t: T) -> Result<bool> {
    let ten = T::lit(10.0);
    let segment = |a: T, b: T| -> Result<T> {
        if let Some(v) = pair.investment.reciprocal_integral(t, a, b) {
            return Ok(v);
        }
        quad_try(|x| positive_pi(pair, t, x).map(|p| T::one() / p), a, b, T::lit(1e-10))
    };
    let diverges = |pieces: &[T]| {
        let first = pieces[0];
        let last = *pieces.last().unwrap();
        first > T::zero() && last >= T::lit(0.5) * first
    };
    let (lower, upper): (Segments<T>, Segments<T>) = match pair.wbar(t) {
        Some(b) => (
            (1..7).map(|k| (b * ten.powi(-k - 1), b * ten.powi(-k))).collect(),
            (1..7).map(|k| (b - b * ten.powi(-k), b - b * ten.powi(-k - 1))).collect(),
        ),
        None => (
            (0..6).map(|k| (ten.powi(-k - 1), ten.powi(-k))).collect(),
            (0..6).map(|k| (ten.powi(k), ten.powi(k + 1))).collect(),
        ),
    };
    let lo = lower.iter().map(|&(a, b)| segment(a, b)).collect::<Result<Vec<_>>>();
    let hi = upper.iter().map(|&(a, b)| segment(a, b)).collect::<Result<Vec<_>>>();
    match (lo, hi) {
        (Ok(lo), Ok(hi)) => Ok(diverges(&lo) && diverges(&hi)),
        (Err(Error::SingularIntegrand { .. }), _) | (_, Err(Error::SingularIntegrand { .. })) => Ok(false),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

/// Change of Sharpe ratio `θ → θ̂`: `Î(t, z) = I(t, z^{θ/θ̂} e^{μt})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeRemap<T> {
    pub theta: T,
    pub theta_hat: T,
    /// `(θ/2)(θ − θ̂) + r(θ/θ̂ − 1)`.
    pub mu: T,
}

pub fn sharpe_remap<T: Real>(market: &MarketParams<T>, theta_hat: T) -> Result<SharpeRemap<T>> {
    if !(theta_hat > T::zero()) || !theta_hat.is_finite() {
        return Err(Error::InvalidParameter(format!("theta_hat must be > 0, got {theta_hat}")));
    }
    let theta = market.theta;
    let mu = T::lit(0.5) * theta * (theta - theta_hat) + market.r * (theta / theta_hat - T::one());
    Ok(SharpeRemap { theta, theta_hat, mu })
}

impl<T: Real> SharpeRemap<T> {
    pub fn is_identity(&self) -> bool {
        self.theta == self.theta_hat
    }

    /// `Î(t, z)` for the inverse marginal utility `inverse`.
    pub fn apply<F: Fn(T, T) -> T>(&self, inverse: F, t: T, z: T) -> T {
        if self.is_identity() {
            return inverse(t, z);
        }
        inverse(t, z.powf(self.theta / self.theta_hat) * (self.mu * t).exp())
    }

    /// `λ̂ = λ^{θ̂/θ}`.
    pub fn lambda_hat(&self, lambda: T) -> T {
        lambda.powf(self.theta_hat / self.theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn crra_market() -> MarketParams<f64> {
        MarketParams::new(0.03, 0.2, 0.08).unwrap()
    }

    fn crra_pair() -> StrategyPair<f64> {
        StrategyPair::new(StrategySurface::Linear { coef: 0.1 }, StrategySurface::Linear { coef: 0.5 })
    }

    fn convex_pair() -> (StrategyPair<f64>, MarketParams<f64>) {
        let (kappa, sigma, r, alpha, a) = (0.4, 0.25, 0.6, 0.1, 1.25);
        (
            StrategyPair::new(
                StrategySurface::ExpShiftLinear { kappa, alpha, a },
                StrategySurface::SqrtConvex { sigma, r, kappa, alpha, a },
            ),
            MarketParams::new(r, sigma, 0.95).unwrap(),
        )
    }

    fn bounded_cons() -> (StrategyPair<f64>, MarketParams<f64>) {
        (
            StrategyPair::new(
                StrategySurface::ExpBoundedConsumption { beta: 0.3, sigma: 0.5 },
                StrategySurface::ExpBounded,
            ),
            MarketParams::new(0.0, 0.5, 0.25).unwrap(),
        )
    }

    #[test]
    fn crra_residual_vanishes() {
        for (t, w) in [(0.0, 0.5), (1.0, 1.0), (5.0, 3.0)] {
            assert!(black_residual(&crra_pair(), &crra_market(), t, w).unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn perturbed_pair_has_residual() {
        let pair = StrategyPair::new(
            StrategySurface::Linear { coef: 0.1 },
            StrategySurface::Affine { slope: 0.5, intercept: 0.1 },
        );
        let r = black_residual(&pair, &crra_market(), 0.0, 1.0).unwrap();
        // 0.1·(κ − r)
        assert_abs_diff_eq!(r, 0.007, epsilon = 1e-12);
        let b = extract_beta(&pair, &crra_market(), 0.0, &[0.2, 0.5, 1.0, 2.0, 5.0], 1.0).unwrap();
        assert!(b.flatness > 1e-3);
    }

    #[test]
    fn convex_pair_residual() {
        let (pair, market) = convex_pair();
        for w in [0.2, 1.0, 5.0] {
            let (res, scale) = black_residual_scaled(&pair, &market, 1.0, w).unwrap();
            assert!(res.abs() <= 1e-6 * scale, "{w}: {res}");
        }
    }

    #[test]
    fn crra_beta() {
        let b = extract_beta(&crra_pair(), &crra_market(), 2.0, &[0.2, 0.5, 1.0, 2.0, 5.0], 1.0).unwrap();
        // (κ − r)/φ + σ²φ/2
        assert_abs_diff_eq!(b.beta, 0.07 / 0.5 + 0.04 * 0.5 / 2.0, epsilon = 1e-12);
        assert!(b.flatness <= 1e-10);
    }

    #[test]
    fn bounded_consumption_beta() {
        let (pair, market) = bounded_cons();
        let b = extract_beta(&pair, &market, 0.5, &[0.1, 0.5, 1.0, 3.0], 2f64.ln()).unwrap();
        assert_abs_diff_eq!(b.beta, 0.3, epsilon = 1e-12);
        assert!(b.flatness <= 1e-8);
    }

    #[test]
    fn discount_examples() {
        let m = crra_market();
        let map = DualMap::new(crra_pair(), m, TimeFunction::Constant(1.0)).unwrap();
        assert_abs_diff_eq!(map.discount(1.0).unwrap(), -0.0868, epsilon = 1e-12);
        assert_eq!(map.discount(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(discount_from_beta(&[(0.0, 0.15)], &m, 1.0).unwrap(), -0.0868, epsilon = 1e-12);
        let flat = MarketParams { r: 0.5 * 0.08 * 0.08, sigma: 0.2, theta: 0.08 };
        assert_eq!(discount_from_beta(&[(0.0, 0.0)], &flat, 3.0).unwrap(), 0.0);
        let profile = map.discount_profile(&[0.0, 0.5, 2.0]).unwrap();
        assert_abs_diff_eq!(profile[2], -0.0868 * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn crra_marginal_and_inverse() {
        let map = DualMap::new(crra_pair(), crra_market(), TimeFunction::Constant(1.0)).unwrap();
        let f = map.marginal(0.0, 2.0).unwrap();
        assert_abs_diff_eq!(f, 2f64.powf(-0.8), epsilon = 1e-8);
        assert_abs_diff_eq!(map.inverse(0.0, f).unwrap(), 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(map.marginal_utility(0.0, 0.1).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bounded_wealth_symmetric_point() {
        let pair = StrategyPair::new(
            StrategySurface::CubicBounded { r: 0.5, sigma: 0.25, beta: 0.1 },
            StrategySurface::LogisticBounded,
        )
        .with_wealth_bound(TimeFunction::Constant(1.0));
        let market = MarketParams::new(0.5, 0.25, 0.7).unwrap();
        let map = DualMap::new(pair, market, TimeFunction::Constant(0.5)).unwrap();
        assert_abs_diff_eq!(map.marginal(0.0, 0.5).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(map.cbar(0.0).unwrap(), 0.5);
        assert!(map.marginal_utility(0.0, map.pair.c(0.0, 1.0 - 1e-6).unwrap()).unwrap() < 1e-3);
    }

    #[test]
    fn bounded_consumption_inverse_closed_form() {
        let (pair, market) = bounded_cons();
        let map = DualMap::new(pair, market, TimeFunction::Constant(2f64.ln())).unwrap();
        assert_abs_diff_eq!(map.marginal(0.0, 2f64.ln()).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(map.inverse(0.0, 1.0).unwrap(), 2f64.ln(), epsilon = 1e-14);
        let ratio = market.sigma / market.theta;
        for (t, z) in [(0.5f64, 0.3f64), (1.0, 2.0), (3.0, 0.9)] {
            let a = map.discount(t).unwrap();
            let closed = ((a * ratio).exp() * z.powf(-ratio) + 1.0).ln();
            assert_relative_eq!(map.inverse(t, z).unwrap(), closed, max_relative = 1e-10);
        }
    }

    #[test]
    fn numeric_inverse_matches_closed_form() {
        // PowerShift has no closed-form reciprocal integral
        let pi = StrategySurface::PowerShift { phi: 0.5, psi: 60.0, p: 0.2 };
        let market = MarketParams::new(0.05, 0.25, 0.13).unwrap();
        let c = timehom_consumption(&pi, TimeFunction::Constant(10.0), &market).unwrap().consumption;
        let map = DualMap::new(StrategyPair::new(c, pi), market, TimeFunction::Constant(1.0)).unwrap();
        for w in [0.05, 0.7, 3.0, 40.0] {
            let z = map.marginal(1.0, w).unwrap();
            assert_relative_eq!(map.inverse(1.0, z).unwrap(), w, max_relative = 1e-9);
        }
        assert!(matches!(map.inverse(1.0, -1.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn timehom_examples() {
        let m = crra_market();
        let lin = timehom_consumption(&StrategySurface::Linear { coef: 0.5 }, TimeFunction::Constant(0.15), &m).unwrap();
        assert!(lin.warnings.is_empty());
        let k = m.r - 0.5 * m.sigma * m.sigma * 0.25 + 0.15 * 0.5;
        assert_relative_eq!(lin.consumption.value(0.0, 2.0).unwrap(), k * 2.0, max_relative = 1e-12);

        let (pair, market) = convex_pair();
        let built = timehom_consumption(&pair.investment, TimeFunction::Constant(0.0), &market).unwrap();
        for w in [0.01, 0.2, 1.0, 5.0, 50.0] {
            assert_relative_eq!(
                built.consumption.value(0.0, w).unwrap(),
                pair.consumption.value(0.0, w).unwrap(),
                max_relative = 1e-9
            );
        }

        let sq = StrategySurface::Power { coef: 1.0, exponent: 2.0 };
        let neg = timehom_consumption(&sq, TimeFunction::Constant(1.0), &m).unwrap();
        assert!(neg.warnings.iter().any(|w| w.starts_with("negative consumption")));

        let moving = StrategySurface::GLog;
        assert!(matches!(
            timehom_consumption(&moving, TimeFunction::Constant(0.0), &m),
            Err(Error::NotTimeHomogeneous { .. })
        ));
    }

    #[test]
    fn regularity_crra() {
        let rep = check_regularity(&crra_pair(), &crra_market(), None).unwrap();
        assert_abs_diff_eq!(rep.delta1, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.delta2, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.kappa1, 0.1, epsilon = 1e-12);
        assert!(rep.condition_a && rep.pi_integrals_diverge && rep.lemma_applies);
    }

    #[test]
    fn regularity_convex() {
        let (pair, market) = convex_pair();
        let rep = check_regularity(&pair, &market, None).unwrap();
        let s = market.sigma;
        assert_relative_eq!(rep.delta1, 2f64.sqrt() / s * 0.2f64.sqrt(), max_relative = 1e-6);
        assert_relative_eq!(rep.delta2, 2f64.sqrt() / s * 0.325f64.sqrt(), max_relative = 1e-6);
        assert!(rep.shortcut);
        assert!(!rep.condition_a && !rep.condition_b && !rep.lemma_applies);
        assert!(rep.pi_integrals_diverge);
    }

    #[test]
    fn sharpe_remap_examples() {
        let m = crra_market();
        let id = sharpe_remap(&m, m.theta).unwrap();
        assert_eq!(id.mu, 0.0);
        assert_eq!(id.apply(|t, z| t + z.sqrt(), 0.7, 3.3), 0.7 + 3.3f64.sqrt());
        let half = sharpe_remap(&m, 0.04).unwrap();
        assert_abs_diff_eq!(half.mu, 0.0316, epsilon = 1e-15);
        assert_abs_diff_eq!(half.lambda_hat(4.0), 2.0, epsilon = 1e-12);
    }
}
