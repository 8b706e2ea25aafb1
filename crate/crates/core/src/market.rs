//! Market parameters, the state-price density and strategy surfaces.
//!
//! A [`StrategySurface`] is a consumption rule `c(t, w)` or an investment
//! rule `π(t, w)`. Closed-form families carry analytic partial derivatives
//! where they are cheap; everything else (and [`Tabulated`] data) falls back
//! to central finite differences.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{default_step, default_step_second, fd_partial_in, FdDomain, Partial};
use crate::scalar::Real;

/// Black–Scholes market: interest rate, volatility and Sharpe ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams<T> {
    pub r: T,
    pub sigma: T,
    pub theta: T,
}

impl<T: Real> MarketParams<T> {
    pub fn new(r: T, sigma: T, theta: T) -> Result<Self> {
        let m = Self { r, sigma, theta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.r.is_finite() {
            return Err(Error::InvalidParameter(format!("interest rate must be finite, got {}", self.r)));
        }
        if !(self.sigma > T::zero()) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.theta > T::zero()) || !self.theta.is_finite() {
            return Err(Error::InvalidParameter(format!("theta must be > 0, got {}", self.theta)));
        }
        Ok(())
    }

    /// Like [`MarketParams::validate`] but admits `θ = 0` (no risk
    /// premium), which simulation supports.
    pub fn validate_allow_zero_theta(&self) -> Result<()> {
        if self.theta == T::zero() {
            return MarketParams { theta: T::one(), ..*self }.validate();
        }
        self.validate()
    }

    /// `θ/σ`, the exponent scale of the marginal-utility map `F`.
    pub fn theta_over_sigma(&self) -> T {
        self.theta / self.sigma
    }

    pub fn state_price_density(&self, t: T, brownian: T) -> T {
        state_price_density(self, t, brownian)
    }
}

/// `Z_t = exp(-r t - θ B_t - θ² t / 2)`. At `t = 0` the Brownian motion
/// is pinned at zero, so `Z_0 = 1` whatever `brownian` says.
pub fn state_price_density<T: Real>(market: &MarketParams<T>, t: T, brownian: T) -> T {
    if t == T::zero() {
        return T::one();
    }
    let half = T::lit(0.5);
    (-market.r * t - market.theta * brownian - half * market.theta * market.theta * t).exp()
}

/// A scalar function of time: a constant or `intercept + slope·t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeFunction<T> {
    Constant(T),
    Affine { intercept: T, slope: T },
}

impl<T: Real> TimeFunction<T> {
    pub fn eval(&self, t: T) -> T {
        match *self {
            TimeFunction::Constant(v) => v,
            TimeFunction::Affine { intercept, slope } => intercept + slope * t,
        }
    }

    pub fn derivative(&self, _t: T) -> T {
        match *self {
            TimeFunction::Constant(_) => T::zero(),
            TimeFunction::Affine { slope, .. } => slope,
        }
    }

    /// `∫_0^t`.
    pub fn integral(&self, t: T) -> T {
        match *self {
            TimeFunction::Constant(v) => v * t,
            TimeFunction::Affine { intercept, slope } => intercept * t + T::lit(0.5) * slope * t * t,
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            TimeFunction::Constant(_) => true,
            TimeFunction::Affine { slope, .. } => slope == T::zero(),
        }
    }
}

/// A consumption or investment rule as a function of time and wealth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySurface<T> {
    /// `coef·w`.
    Linear { coef: T },
    /// `slope·w + intercept`; does not vanish at zero wealth.
    Affine { slope: T, intercept: T },
    /// `coef·w^exponent`.
    Power { coef: T, exponent: T },
    /// `φ w + ψ((1+w)^p − 1)`.
    PowerShift { phi: T, psi: T, p: T },
    /// `(2/σ)·sqrt((r−κ)/2·w² + αw + (α/a)(e^{−aw} − 1))`; generates the
    /// convex consumption `κw + α(e^{−aw} − 1)` with zero time function.
    SqrtConvex { sigma: T, r: T, kappa: T, alpha: T, a: T },
    /// `κw + α(e^{−aw} − 1)`.
    ExpShiftLinear { kappa: T, alpha: T, a: T },
    /// `max(w(1 − w), 0)`.
    LogisticBounded,
    /// Cubic consumption consistent with [`StrategySurface::LogisticBounded`]
    /// on `(0, 1)`, constant `r` from `w = 1` on.
    CubicBounded { r: T, sigma: T, beta: T },
    /// `1 − e^{−w}`.
    ExpBounded,
    /// `(β − σ²/2·e^{−w})(1 − e^{−w})`, bounded above by `β`.
    ExpBoundedConsumption { beta: T, sigma: T },
    /// Deterministic consumption whose wealth paths are `ln(1 + xt)/t`.
    GLog,
    /// Deterministic consumption whose wealth paths are `(1 − e^{−xt})/t`.
    GExp,
    /// `r w − σ²/2·π π_w + β(t) π` for a time-homogeneous investment `π`.
    TimeHomogeneous { investment: Box<StrategySurface<T>>, beta: TimeFunction<T>, r: T, sigma: T },
    /// Bilinear interpolation of gridded data.
    Tabulated(TabulatedSurface<T>),
}

impl<T: Real> StrategySurface<T> {
    pub fn value(&self, t: T, w: T) -> Result<T> {
        let one = T::one();
        let half = T::lit(0.5);
        let v = match self {
            StrategySurface::Linear { coef } => *coef * w,
            StrategySurface::Affine { slope, intercept } => *slope * w + *intercept,
            StrategySurface::Power { coef, exponent } => {
                if w <= T::zero() {
                    T::zero()
                } else {
                    *coef * w.powf(*exponent)
                }
            }
            StrategySurface::PowerShift { phi, psi, p } => *phi * w + *psi * (*p * w.ln_1p()).exp_m1(),
            StrategySurface::SqrtConvex { sigma, r, kappa, alpha, a } => {
                let g = sqrt_convex_g(*r, *kappa, *alpha, *a, w);
                T::lit(2.0) / *sigma * g.max(T::zero()).sqrt()
            }
            StrategySurface::ExpShiftLinear { kappa, alpha, a } => *kappa * w + *alpha * (-*a * w).exp_m1(),
            StrategySurface::LogisticBounded => {
                if w > T::zero() && w < one {
                    w * (one - w)
                } else {
                    T::zero()
                }
            }
            StrategySurface::CubicBounded { r, sigma, beta } => {
                if w >= one {
                    *r
                } else {
                    let s2 = *sigma * *sigma;
                    w * (*r - half * s2 + *beta) + w * w * (T::lit(1.5) * s2 - *beta) - w * w * w * s2
                }
            }
            StrategySurface::ExpBounded => -(-w).exp_m1(),
            StrategySurface::ExpBoundedConsumption { beta, sigma } => {
                let e = (-w).exp();
                (*beta - half * *sigma * *sigma * e) * -(-w).exp_m1()
            }
            StrategySurface::GLog => w * w * glog_kernel(w * t),
            StrategySurface::GExp => {
                let s = w * t;
                if s >= one {
                    one / (t * t)
                } else {
                    w * w * gexp_kernel(s)
                }
            }
            StrategySurface::TimeHomogeneous { investment, beta, r, sigma } => {
                let pi = investment.value(t, w)?;
                let pi_w = investment.partial(t, w, Partial::W)?;
                *r * w - half * *sigma * *sigma * pi * pi_w + beta.eval(t) * pi
            }
            StrategySurface::Tabulated(tab) => tab.value(t, w)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("surface value at t={t}, w={w}")))
        }
    }

    /// Analytic partial derivative, when the family provides one.
    pub fn analytic_partial(&self, t: T, w: T, which: Partial) -> Option<Result<T>> {
        let one = T::one();
        let two = T::lit(2.0);
        let half = T::lit(0.5);
        let v = match (self, which) {
            (StrategySurface::Tabulated(_), _) => return None,
            (StrategySurface::GLog | StrategySurface::GExp, Partial::T) => return None,
            (StrategySurface::TimeHomogeneous { investment, beta, .. }, Partial::T) => {
                if !investment.is_time_homogeneous() {
                    return None;
                }
                return Some(investment.value(t, w).map(|pi| beta.derivative(t) * pi));
            }
            (StrategySurface::TimeHomogeneous { .. }, Partial::WW) => return None,
            (_, Partial::T) => T::zero(),
            (StrategySurface::Linear { coef }, Partial::W) => *coef,
            (StrategySurface::Linear { .. }, Partial::WW) => T::zero(),
            (StrategySurface::Affine { slope, .. }, Partial::W) => *slope,
            (StrategySurface::Affine { .. }, Partial::WW) => T::zero(),
            (StrategySurface::Power { coef, exponent }, Partial::W) => *coef * *exponent * w.powf(*exponent - one),
            (StrategySurface::Power { coef, exponent }, Partial::WW) => {
                *coef * *exponent * (*exponent - one) * w.powf(*exponent - two)
            }
            (StrategySurface::PowerShift { phi, psi, p }, Partial::W) => *phi + *psi * *p * (one + w).powf(*p - one),
            (StrategySurface::PowerShift { psi, p, .. }, Partial::WW) => {
                *psi * *p * (*p - one) * (one + w).powf(*p - two)
            }
            (StrategySurface::SqrtConvex { sigma, r, kappa, alpha, a }, which) => {
                sqrt_convex_derivative(*sigma, *r, *kappa, *alpha, *a, w, which)
            }
            (StrategySurface::ExpShiftLinear { kappa, alpha, a }, Partial::W) => *kappa - *alpha * *a * (-*a * w).exp(),
            (StrategySurface::ExpShiftLinear { alpha, a, .. }, Partial::WW) => *alpha * *a * *a * (-*a * w).exp(),
            (StrategySurface::LogisticBounded, Partial::W) => {
                if w > T::zero() && w < one {
                    one - two * w
                } else if w <= T::zero() {
                    one
                } else {
                    T::zero()
                }
            }
            (StrategySurface::LogisticBounded, Partial::WW) => {
                if w < one {
                    -two
                } else {
                    T::zero()
                }
            }
            (StrategySurface::CubicBounded { r, sigma, beta }, Partial::W) => {
                if w >= one {
                    T::zero()
                } else {
                    let s2 = *sigma * *sigma;
                    (*r - half * s2 + *beta) + two * w * (T::lit(1.5) * s2 - *beta) - T::lit(3.0) * s2 * w * w
                }
            }
            (StrategySurface::CubicBounded { sigma, beta, .. }, Partial::WW) => {
                if w >= one {
                    T::zero()
                } else {
                    let s2 = *sigma * *sigma;
                    two * (T::lit(1.5) * s2 - *beta) - T::lit(6.0) * s2 * w
                }
            }
            (StrategySurface::ExpBounded, Partial::W) => (-w).exp(),
            (StrategySurface::ExpBounded, Partial::WW) => -(-w).exp(),
            (StrategySurface::ExpBoundedConsumption { beta, sigma }, Partial::W) => {
                let s = half * *sigma * *sigma;
                let e = (-w).exp();
                (s + *beta) * e - two * s * e * e
            }
            (StrategySurface::ExpBoundedConsumption { beta, sigma }, Partial::WW) => {
                let s = half * *sigma * *sigma;
                let e = (-w).exp();
                -(s + *beta) * e + T::lit(4.0) * s * e * e
            }
            (StrategySurface::GLog, Partial::W) => w * glog_slope_kernel(w * t),
            (StrategySurface::GLog, Partial::WW) => (-w * t).exp(),
            (StrategySurface::GExp, Partial::W) => {
                let s = w * t;
                if s >= one {
                    T::zero()
                } else if s.abs() < T::lit(1e-8) {
                    w
                } else {
                    -(-s).ln_1p() / t
                }
            }
            (StrategySurface::GExp, Partial::WW) => {
                let s = w * t;
                if s >= one {
                    T::zero()
                } else {
                    one / (one - s)
                }
            }
            (StrategySurface::TimeHomogeneous { investment, beta, r, sigma }, Partial::W) => {
                let res = (|| -> Result<T> {
                    let pi = investment.value(t, w)?;
                    let pi_w = investment.partial(t, w, Partial::W)?;
                    let pi_ww = investment.partial(t, w, Partial::WW)?;
                    Ok(*r - half * *sigma * *sigma * (pi_w * pi_w + pi * pi_ww) + beta.eval(t) * pi_w)
                })();
                return Some(res);
            }
        };
        Some(if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("analytic derivative at t={t}, w={w}")))
        })
    }

    pub fn has_analytic(&self, which: Partial) -> bool {
        match (self, which) {
            (StrategySurface::Tabulated(_), _) => false,
            (StrategySurface::GLog | StrategySurface::GExp, Partial::T) => false,
            (StrategySurface::TimeHomogeneous { investment, .. }, Partial::T) => investment.is_time_homogeneous(),
            (StrategySurface::TimeHomogeneous { .. }, Partial::WW) => false,
            _ => true,
        }
    }

    pub fn has_analytic_t(&self) -> bool {
        self.has_analytic(Partial::T)
    }

    pub fn has_analytic_w(&self) -> bool {
        self.has_analytic(Partial::W)
    }

    pub fn has_analytic_ww(&self) -> bool {
        self.has_analytic(Partial::WW)
    }

    /// Partial derivative: analytic when available, otherwise a central
    /// difference (one-sided at `w = 0` and at the table edges).
    pub fn partial(&self, t: T, w: T, which: Partial) -> Result<T> {
        if let Some(v) = self.analytic_partial(t, w, which) {
            return v;
        }
        // c_ww of a constructed consumption: difference the analytic c_w.
        if let (StrategySurface::TimeHomogeneous { .. }, Partial::WW) = (self, which) {
            return fd_partial_in(
                |tt, ww| self.partial(tt, ww, Partial::W).unwrap_or(T::nan()),
                (t, w),
                Partial::W,
                default_step(w),
                &self.fd_domain(),
            );
        }
        self.fd_partial(t, w, which)
    }

    /// Finite-difference partial, ignoring any analytic formula.
    pub fn fd_partial(&self, t: T, w: T, which: Partial) -> Result<T> {
        let h = match which {
            Partial::T => default_step(t),
            Partial::W => default_step(w),
            Partial::WW => default_step_second(w),
        };
        fd_partial_in(|tt, ww| self.value(tt, ww).unwrap_or(T::nan()), (t, w), which, h, &self.fd_domain())
    }

    fn fd_domain(&self) -> FdDomain<T> {
        match self {
            StrategySurface::Tabulated(tab) => tab.fd_domain(),
            _ => FdDomain::default(),
        }
    }

    pub fn is_time_homogeneous(&self) -> bool {
        match self {
            StrategySurface::GLog | StrategySurface::GExp => false,
            StrategySurface::TimeHomogeneous { investment, beta, .. } => {
                beta.is_constant() && investment.is_time_homogeneous()
            }
            StrategySurface::Tabulated(tab) => tab.t_knots.len() == 1,
            _ => true,
        }
    }

    /// Closed form of `∫_a^b dξ / π(t, ξ)` when the family has one.
    pub fn reciprocal_integral(&self, _t: T, a: T, b: T) -> Option<T> {
        let one = T::one();
        match self {
            StrategySurface::Linear { coef } if a > T::zero() && b > T::zero() => Some((b / a).ln() / *coef),
            StrategySurface::Power { coef, exponent } if a > T::zero() && b > T::zero() => {
                let e = one - *exponent;
                if e == T::zero() {
                    Some((b / a).ln() / *coef)
                } else {
                    Some((b.powf(e) - a.powf(e)) / (*coef * e))
                }
            }
            StrategySurface::LogisticBounded if a > T::zero() && b > T::zero() && a < one && b < one => {
                let logit = |x: T| (x / (one - x)).ln();
                Some(logit(b) - logit(a))
            }
            StrategySurface::ExpBounded if a > T::zero() && b > T::zero() => Some(b.exp_m1().ln() - a.exp_m1().ln()),
            _ => None,
        }
    }
}


impl<T: Real> StrategySurface<T> {
    /// The `b` solving `∫_a^b dξ / π(t, ξ) = value`, when
    /// [`Self::reciprocal_integral`] has a closed form; `None` also when
    /// `value` lies outside the attainable range.
    pub fn inverse_reciprocal_integral(&self, _t: T, a: T, value: T) -> Option<T> {
        let one = T::one();
        if !(a > T::zero()) || !value.is_finite() {
            return None;
        }
        let b = match self {
            StrategySurface::Linear { coef } => a * (*coef * value).exp(),
            StrategySurface::Power { coef, exponent } => {
                let e = one - *exponent;
                if e == T::zero() {
                    a * (*coef * value).exp()
                } else {
                    let base = a.powf(e) + *coef * e * value;
                    if !(base > T::zero()) {
                        return None;
                    }
                    base.powf(one / e)
                }
            }
            StrategySurface::LogisticBounded if a < one => {
                let l = (a / (one - a)).ln() + value;
                one / (one + (-l).exp())
            }
            StrategySurface::ExpBounded => (a.exp_m1() * value.exp()).ln_1p(),
            _ => return None,
        };
        if b.is_finite() && b > T::zero() {
            Some(b)
        } else {
            None
        }
    }
}

/// `(s + e^{−s} − 1)/s²`, finite at `s = 0`.
fn glog_kernel<T: Real>(s: T) -> T {
    if s.abs() < T::lit(1e-3) {
        // Σ_{k≥2} (−s)^{k−2}/k!
        let mut term = T::lit(0.5);
        let mut sum = term;
        for k in 3..12 {
            term = term * (-s) / T::from_count(k);
            sum = sum + term;
        }
        sum
    } else {
        (s + (-s).exp_m1()) / (s * s)
    }
}

/// `(1 − e^{−s})/s`, finite at `s = 0`.
fn glog_slope_kernel<T: Real>(s: T) -> T {
    if s.abs() < T::lit(1e-8) {
        T::one() - s * T::lit(0.5)
    } else {
        -(-s).exp_m1() / s
    }
}

/// `(s + (1 − s) ln(1 − s))/s²`, finite at `s = 0`.
fn gexp_kernel<T: Real>(s: T) -> T {
    if s.abs() < T::lit(1e-3) {
        // Σ_{k≥2} s^{k−2}/(k(k−1))
        let mut sum = T::zero();
        let mut pow = T::one();
        for k in 2..14 {
            sum = sum + pow / T::from_count(k * (k - 1));
            pow = pow * s;
        }
        sum
    } else {
        (s + (T::one() - s) * (-s).ln_1p()) / (s * s)
    }
}

/// `x + e^{−x} − 1` without cancellation for small `x`.
fn x_plus_expm1_neg<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-3) {
        x * x * glog_kernel(x)
    } else {
        x + (-x).exp_m1()
    }
}

fn sqrt_convex_g<T: Real>(r: T, kappa: T, alpha: T, a: T, w: T) -> T {
    let q = (r - kappa) * T::lit(0.5);
    q * w * w + alpha / a * x_plus_expm1_neg(a * w)
}

fn sqrt_convex_derivative<T: Real>(sigma: T, r: T, kappa: T, alpha: T, a: T, w: T, which: Partial) -> T {
    let two = T::lit(2.0);
    let q = (r - kappa) * T::lit(0.5);
    // g = A w² + B w³ + … near zero
    let lead = q + alpha * a * T::lit(0.5);
    let cubic = -alpha * a * a / T::lit(6.0);
    if w < T::lit(1e-7) {
        let sqrt_lead = lead.sqrt();
        return match which {
            Partial::W => two / sigma * sqrt_lead,
            Partial::WW => two / sigma * sqrt_lead * cubic / lead,
            Partial::T => T::zero(),
        };
    }
    let g = sqrt_convex_g(r, kappa, alpha, a, w);
    let g1 = two * q * w - alpha * (-a * w).exp_m1();
    let g2 = two * q + alpha * a * (-a * w).exp();
    let sg = g.sqrt();
    match which {
        Partial::W => g1 / (sigma * sg),
        Partial::WW => (g2 / sg - g1 * g1 / (two * g * sg)) / sigma,
        Partial::T => T::zero(),
    }
}

/// Gridded surface, bilinear between knots.
///
/// Queries outside the `t` hull fail with [`Error::OutOfDomain`] unless the
/// table has a single time knot, in which case it is time-homogeneous.
/// Beyond the last wealth knot the value is held constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedSurface<T> {
    pub t_knots: Vec<T>,
    pub w_knots: Vec<T>,
    /// Row-major: `values[i * w_knots.len() + j]` is the value at
    /// `(t_knots[i], w_knots[j])`.
    pub values: Vec<T>,
}

impl<T: Real> TabulatedSurface<T> {
    pub fn new(t_knots: Vec<T>, w_knots: Vec<T>, values: Vec<T>) -> Result<Self> {
        let strictly_increasing = |k: &[T]| k.windows(2).all(|p| p[0] < p[1]) && k.iter().all(|x| x.is_finite());
        if t_knots.is_empty() || !strictly_increasing(&t_knots) {
            return Err(Error::InvalidParameter("time knots must be non-empty and strictly increasing".into()));
        }
        if w_knots.len() < 2 || !strictly_increasing(&w_knots) {
            return Err(Error::InvalidParameter("wealth knots must be at least two and strictly increasing".into()));
        }
        if values.len() != t_knots.len() * w_knots.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                t_knots.len() * w_knots.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("tabulated values must be finite".into()));
        }
        Ok(Self { t_knots, w_knots, values })
    }

    /// Sample `surface` on the tensor grid of knots.
    pub fn sample(surface: &StrategySurface<T>, t_knots: Vec<T>, w_knots: Vec<T>) -> Result<Self> {
        let mut values = Vec::with_capacity(t_knots.len() * w_knots.len());
        for &t in &t_knots {
            for &w in &w_knots {
                values.push(surface.value(t, w)?);
            }
        }
        Self::new(t_knots, w_knots, values)
    }

    /// Parse `t,w,value` CSV (header required). Rows may come in any order
    /// but must cover the full tensor grid exactly once.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            t: f64,
            w: f64,
            value: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "w", "value"] {
            return Err(Error::InvalidParameter(format!("expected header t,w,value, got {:?}", headers)));
        }
        let mut rows = Vec::new();
        for rec in rdr.deserialize::<Row>() {
            rows.push(rec?);
        }
        rows.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.w.total_cmp(&b.w)));
        let mut t_knots: Vec<f64> = rows.iter().map(|r| r.t).collect();
        t_knots.dedup();
        let mut w_knots: Vec<f64> = rows.iter().map(|r| r.w).collect();
        w_knots.sort_by(f64::total_cmp);
        w_knots.dedup();
        if rows.len() != t_knots.len() * w_knots.len() {
            return Err(Error::InvalidParameter(format!(
                "table is not a full grid: {} rows for {} x {} knots",
                rows.len(),
                t_knots.len(),
                w_knots.len()
            )));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.t != t_knots[k / w_knots.len()] || row.w != w_knots[k % w_knots.len()] {
                return Err(Error::InvalidParameter(format!("duplicate or missing knot near t={}, w={}", row.t, row.w)));
            }
        }
        Self::new(
            t_knots.into_iter().map(T::lit).collect(),
            w_knots.into_iter().map(T::lit).collect(),
            rows.into_iter().map(|r| T::lit(r.value)).collect(),
        )
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t", "w", "value"])?;
        let nw = self.w_knots.len();
        for (i, t) in self.t_knots.iter().enumerate() {
            for (j, w) in self.w_knots.iter().enumerate() {
                wtr.write_record([t.to_string(), w.to_string(), self.values[i * nw + j].to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    fn fd_domain(&self) -> FdDomain<T> {
        let (t_min, t_max) = self.t_hull();
        FdDomain { t_min, t_max, w_min: self.w_knots[0], w_max: T::infinity() }
    }

    fn t_hull(&self) -> (T, T) {
        if self.t_knots.len() == 1 {
            (T::neg_infinity(), T::infinity())
        } else {
            (self.t_knots[0], *self.t_knots.last().unwrap())
        }
    }

    pub fn value(&self, t: T, w: T) -> Result<T> {
        let out = || Error::OutOfDomain { t: t.to_f64_lossy(), w: w.to_f64_lossy() };
        let (t_lo, t_hi) = self.t_hull();
        if !(t >= t_lo && t <= t_hi) || !(w >= self.w_knots[0]) {
            return Err(out());
        }
        let nw = self.w_knots.len();
        let (j, sw) = bracket(&self.w_knots, w);
        let row = |i: usize| {
            let base = i * nw;
            self.values[base + j] * (T::one() - sw) + self.values[base + j + 1] * sw
        };
        if self.t_knots.len() == 1 {
            return Ok(row(0));
        }
        let (i, st) = bracket(&self.t_knots, t);
        Ok(row(i) * (T::one() - st) + row(i + 1) * st)
    }
}

/// Index of the cell containing `x` and the fractional position in it;
/// clamps to the last knot above the range.
fn bracket<T: Real>(knots: &[T], x: T) -> (usize, T) {
    let n = knots.len();
    if x >= knots[n - 1] {
        return (n - 2, T::one());
    }
    let j = knots.partition_point(|&k| k <= x).saturating_sub(1).min(n - 2);
    let s = (x - knots[j]) / (knots[j + 1] - knots[j]);
    (j, s)
}

/// A consumption rule together with an investment rule, optionally with a
/// maximal wealth `w̄(t)` beyond which investment stops and consumption is
/// frozen at its value on the frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct StrategyPair<T> {
    pub consumption: StrategySurface<T>,
    pub investment: StrategySurface<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wealth_bound: Option<TimeFunction<T>>,
}

impl<T: Real> StrategyPair<T> {
    pub fn new(consumption: StrategySurface<T>, investment: StrategySurface<T>) -> Self {
        Self { consumption, investment, wealth_bound: None }
    }

    pub fn with_wealth_bound(mut self, bound: TimeFunction<T>) -> Self {
        self.wealth_bound = Some(bound);
        self
    }

    pub fn wbar(&self, t: T) -> Option<T> {
        self.wealth_bound.map(|b| b.eval(t))
    }

    fn beyond(&self, t: T, w: T) -> Option<T> {
        match self.wbar(t) {
            Some(b) if w >= b => Some(b),
            _ => None,
        }
    }

    pub fn c(&self, t: T, w: T) -> Result<T> {
        match self.beyond(t, w) {
            Some(b) => self.consumption.value(t, b),
            None => self.consumption.value(t, w),
        }
    }

    pub fn pi(&self, t: T, w: T) -> Result<T> {
        match self.beyond(t, w) {
            Some(_) => Ok(T::zero()),
            None => self.investment.value(t, w),
        }
    }

    pub fn c_partial(&self, t: T, w: T, which: Partial) -> Result<T> {
        match (self.beyond(t, w), which) {
            (Some(_), Partial::W | Partial::WW) => Ok(T::zero()),
            (Some(b), Partial::T) => self.consumption.partial(t, b, Partial::T),
            (None, _) => self.consumption.partial(t, w, which),
        }
    }

    pub fn pi_partial(&self, t: T, w: T, which: Partial) -> Result<T> {
        match self.beyond(t, w) {
            Some(_) => Ok(T::zero()),
            None => self.investment.partial(t, w, which),
        }
    }
}
