//! Inverse problem without risky investment: recover marginal utility from
//! a consumption rule and a weighting of initial wealth.
//!
//! Wealth obeys `w_t = −c(t, w)` with `w(0, x) = x`. For a weighting `D`
//! the marginal utility is `u_c(t, c) = ∫_{y(t,c)}^∞ D`, where `y(t, ·)`
//! inverts `x ↦ c(t, w(t, x))`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::StrategySurface;
use crate::numerics::{integrate_ode, invert_try, log_spaced, ErrorSlot, Grid1D, Partial};
use crate::risk::{verdict_from_margins, Measure, RiskVerdict};
use crate::scalar::Real;

const MAX_STEPS: usize = 2_000_000;

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// User-supplied weighting: density and its tail integral `∫_x^∞ D`.
#[derive(Clone)]
pub struct CustomWeight<T> {
    pub density: ScalarFn<T>,
    pub tail: ScalarFn<T>,
}

impl<T> fmt::Debug for CustomWeight<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomWeight")
    }
}

/// Strictly positive weighting `D(x)` of initial wealth with finite tails.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightFunction<T> {
    /// `D(x) = R x^{−R−1}`.
    PowerTail { r: T },
    /// `D(x) = x e^{−ηx²}`.
    Gaussian { eta: T },
    /// `D(x) = e^{−ζx}`.
    Exp { zeta: T },
    #[serde(skip)]
    Custom(CustomWeight<T>),
}

impl<T: Real> WeightFunction<T> {
    pub fn custom(
        density: impl Fn(T) -> T + Send + Sync + 'static,
        tail: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        WeightFunction::Custom(CustomWeight { density: Arc::new(density), tail: Arc::new(tail) })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        };
        match self {
            WeightFunction::PowerTail { r } => positive("R", *r),
            WeightFunction::Gaussian { eta } => positive("eta", *eta),
            WeightFunction::Exp { zeta } => positive("zeta", *zeta),
            WeightFunction::Custom(w) => {
                for x in [1e-2, 0.5, 1.0, 2.0, 10.0] {
                    let x = T::lit(x);
                    positive("custom density", (w.density)(x))?;
                    positive("custom tail", (w.tail)(x))?;
                }
                Ok(())
            }
        }
    }

    pub fn density(&self, x: T) -> T {
        match self {
            WeightFunction::PowerTail { r } => *r * x.powf(-*r - T::one()),
            WeightFunction::Gaussian { eta } => x * (-*eta * x * x).exp(),
            WeightFunction::Exp { zeta } => (-*zeta * x).exp(),
            WeightFunction::Custom(w) => (w.density)(x),
        }
    }

    pub fn density_x(&self, x: T) -> T {
        let one = T::one();
        match self {
            WeightFunction::PowerTail { r } => -*r * (*r + one) * x.powf(-*r - T::lit(2.0)),
            WeightFunction::Gaussian { eta } => (one - T::lit(2.0) * *eta * x * x) * (-*eta * x * x).exp(),
            WeightFunction::Exp { zeta } => -*zeta * (-*zeta * x).exp(),
            WeightFunction::Custom(w) => {
                let h = T::lit(1e-5).max(T::lit(1e-5) * x.abs()).min(x * T::lit(0.5));
                ((w.density)(x + h) - (w.density)(x - h)) / (T::lit(2.0) * h)
            }
        }
    }

    /// `∫_x^∞ D(ξ) dξ`.
    pub fn tail(&self, x: T) -> T {
        match self {
            WeightFunction::PowerTail { r } => x.powf(-*r),
            WeightFunction::Gaussian { eta } => (-*eta * x * x).exp() / (T::lit(2.0) * *eta),
            WeightFunction::Exp { zeta } => (-*zeta * x).exp() / *zeta,
            WeightFunction::Custom(w) => (w.tail)(x),
        }
    }

    /// `D(x) / ∫_x^∞ D`, computed without underflow for the built-in kinds.
    pub fn hazard(&self, x: T) -> T {
        match self {
            WeightFunction::PowerTail { r } => *r / x,
            WeightFunction::Gaussian { eta } => T::lit(2.0) * *eta * x,
            WeightFunction::Exp { zeta } => *zeta,
            WeightFunction::Custom(w) => (w.density)(x) / (w.tail)(x),
        }
    }

    /// `D_x / D`.
    pub fn log_slope(&self, x: T) -> T {
        let one = T::one();
        match self {
            WeightFunction::PowerTail { r } => -(*r + one) / x,
            WeightFunction::Gaussian { eta } => one / x - T::lit(2.0) * *eta * x,
            WeightFunction::Exp { zeta } => -*zeta,
            WeightFunction::Custom(w) => self.density_x(x) / (w.density)(x),
        }
    }
}

/// Numerical settings for the deterministic inverse problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct DetConfig<T> {
    /// Smallest initial wealth in the path family.
    pub x_min: T,
    /// Largest initial wealth in the path family.
    pub x_max: T,
    pub n_paths: usize,
    /// RK4 steps per unit of time when solving a single path.
    pub steps_per_unit_time: T,
    pub min_steps: usize,
    /// Relative tolerance on consumption when inverting for wealth.
    pub inversion_tol: T,
    /// Margins below `cara_tol·scale` count as zero.
    pub cara_tol: T,
}

impl<T: Real> Default for DetConfig<T> {
    fn default() -> Self {
        Self {
            x_min: T::lit(1e-2),
            x_max: T::lit(1e2),
            n_paths: 201,
            steps_per_unit_time: T::lit(400.0),
            min_steps: 200,
            inversion_tol: T::lit(1e-13),
            cara_tol: T::lit(1e-6),
        }
    }
}

impl<T: Real> DetConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_min > T::zero() && self.x_max > self.x_min) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < x_min < x_max, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.n_paths < 2 || self.min_steps < 1 || !(self.steps_per_unit_time > T::zero()) {
            return Err(Error::InvalidParameter("path family needs n_paths >= 2 and positive step counts".into()));
        }
        for (name, v) in [("inversion_tol", self.inversion_tol), ("cara_tol", self.cara_tol)] {
            if !(v > T::zero()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Largest step of a solve to `t`.
    fn base_step(&self, t: T) -> T {
        let by_time = T::one() / self.steps_per_unit_time;
        let by_count = t / T::from_usize(self.min_steps).unwrap_or(T::one());
        by_time.min(by_count)
    }
}

/// Samples of a single wealth path `w(t, x0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthPath<T> {
    pub x0: T,
    pub samples: Vec<(T, T)>,
}

/// RK4 path of `w_t = −c(t, w)` on `n` nodes of `[0, horizon]`, absorbed at 0.
pub fn solve_wealth_path<T: Real>(c: &StrategySurface<T>, x0: T, horizon: T, n: usize) -> Result<WealthPath<T>> {
    if !(x0 >= T::zero()) || !x0.is_finite() {
        return Err(Error::InvalidParameter(format!("initial wealth must be >= 0, got {x0}")));
    }
    let grid = Grid1D::new(T::zero(), horizon, n)?;
    let slot = ErrorSlot::new();
    let out = integrate_ode(|t, w| -slot.take(c.value(t, w)), T::zero(), x0, &grid, Some(T::zero()));
    Ok(WealthPath { x0, samples: slot.finish(out)? })
}

/// `w(t, x)` from a fresh RK4 solve.
///
/// The step is `h0 / (1 + 20·h0·|∂_w c|)`, re-evaluated at every node and
/// clipped at `t`, so stiff starts are resolved and the result stays
/// continuous in `x`.
pub fn wealth_at<T: Real>(c: &StrategySurface<T>, x: T, t: T, cfg: &DetConfig<T>) -> Result<T> {
    if !(x >= T::zero()) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("initial wealth must be >= 0, got {x}")));
    }
    if t == T::zero() {
        return Ok(x);
    }
    let h0 = cfg.base_step(t);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let rhs = |s: T, w: T| -> Result<T> {
        let v = -c.value(s, w.max(T::zero()))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("consumption at t={s}, w={w}")))
        }
    };
    let (mut s, mut w) = (T::zero(), x);
    for _ in 0..MAX_STEPS {
        if w <= T::zero() {
            return Ok(T::zero());
        }
        if s >= t {
            return Ok(w);
        }
        let lip = c.partial(s, w, Partial::W).unwrap_or(T::zero()).abs();
        let mut h = h0 / (T::one() + T::lit(20.0) * h0 * lip);
        let last = s + h >= t;
        if last {
            h = t - s;
        }
        let k1 = rhs(s, w)?;
        let k2 = rhs(s + half * h, w + half * h * k1)?;
        let k3 = rhs(s + half * h, w + half * h * k2)?;
        let k4 = rhs(s + h, w + h * k3)?;
        w = (w + h * (k1 + two * k2 + two * k3 + k4) / T::lit(6.0)).max(T::zero());
        s = if last { t } else { s + h };
    }
    Err(Error::NonFinite(format!("in wealth solve to t={t} from x={x}: step budget {MAX_STEPS} exhausted")))
}

/// Total consumption along a path relative to its initial wealth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetExhaustion<T> {
    /// `∫_0^T c dt / x0` over the sampled horizon.
    pub ratio: T,
    /// Estimated consumption after the horizon, in cash.
    pub tail: T,
    /// `(∫_0^T c dt + tail) / x0`.
    pub ratio_with_tail: T,
}

/// Budget exhaustion check.
///
/// The tail beyond the horizon assumes consumption decays exponentially
/// at the rate `k = c(T)/w(T)` implied by the terminal consumption to
/// wealth ratio, giving `c(T)/k`.
pub fn budget_exhaustion<T: Real>(path: &WealthPath<T>, c: &StrategySurface<T>) -> Result<BudgetExhaustion<T>> {
    let samples = &path.samples;
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("wealth path needs at least two samples".into()));
    }
    let rates = samples.iter().map(|&(t, w)| c.value(t, w)).collect::<Result<Vec<T>>>()?;
    let ts: Vec<T> = samples.iter().map(|s| s.0).collect();
    let total = composite_simpson(&ts, &rates);
    let (_, w_end) = *samples.last().unwrap();
    let c_end = *rates.last().unwrap();
    let tail = if c_end > T::zero() && w_end > T::zero() { c_end / (c_end / w_end) } else { T::zero() };
    let x0 = path.x0;
    if x0 > T::zero() && tail > T::lit(0.01) * x0 {
        return Err(Error::TailNotNegligible { tail: tail.to_f64_lossy(), limit: (T::lit(0.01) * x0).to_f64_lossy() });
    }
    let denom = if x0 > T::zero() { x0 } else { T::one() };
    Ok(BudgetExhaustion { ratio: total / denom, tail, ratio_with_tail: (total + tail) / denom })
}

/// Simpson's rule on consecutive node pairs, trapezoid on a leftover interval.
fn composite_simpson<T: Real>(ts: &[T], ys: &[T]) -> T {
    let n = ts.len();
    let mut parts = Vec::with_capacity(n / 2 + 1);
    let mut i = 0;
    while i + 2 < n {
        let (h0, h1) = (ts[i + 1] - ts[i], ts[i + 2] - ts[i + 1]);
        let h = h0 + h1;
        // non-uniform Simpson
        let a = (T::lit(2.0) * h0 - h1) * h / (T::lit(6.0) * h0);
        let b = h * h * h / (T::lit(6.0) * h0 * h1);
        let cc = (T::lit(2.0) * h1 - h0) * h / (T::lit(6.0) * h1);
        parts.push(a * ys[i] + b * ys[i + 1] + cc * ys[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        parts.push((ts[i + 1] - ts[i]) * (ys[i] + ys[i + 1]) * T::lit(0.5));
    }
    crate::scalar::pairwise_sum(&parts)
}

/// Wealth paths for a log-spaced family of initial wealths, evaluated at a
/// single time `t`, used to invert `x ↦ c(t, w(t, x))`.
#[derive(Debug, Clone)]
pub struct PathFamily<'a, T> {
    pub surface: &'a StrategySurface<T>,
    pub t: T,
    pub xs: Vec<T>,
    /// `c(t, w(t, x))` for each `x` in `xs`.
    pub consumption: Vec<T>,
    /// Upper consumption frontier `c̄(t)`; infinite when no saturation is seen.
    pub cbar: T,
    config: DetConfig<T>,
}

impl<'a, T: Real> PathFamily<'a, T> {
    pub fn new(surface: &'a StrategySurface<T>, t: T, config: &DetConfig<T>) -> Result<Self> {
        config.validate()?;
        if !(t >= T::zero()) {
            return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
        }
        let mut xs = log_spaced(config.x_min, config.x_max, config.n_paths);
        let consumption_at = |x: T| -> Result<T> { surface.value(t, wealth_at(surface, x, t, config)?) };
        let mut consumption = xs.par_iter().map(|&x| consumption_at(x)).collect::<Result<Vec<T>>>()?;

        // Double the largest initial wealth until consumption saturates.
        let sat_tol = T::lit(1e-6);
        let mut cbar = T::infinity();
        let mut x_hi = *xs.last().unwrap();
        let mut c_hi = *consumption.last().unwrap();
        for _ in 0..10 {
            let x_next = x_hi * T::lit(2.0);
            let c_next = consumption_at(x_next)?;
            if c_next <= c_hi * (T::one() + sat_tol) {
                cbar = c_next.max(c_hi);
                break;
            }
            xs.push(x_next);
            consumption.push(c_next);
            x_hi = x_next;
            c_hi = c_next;
        }

        for i in 1..consumption.len() {
            let (prev, cur) = (consumption[i - 1], consumption[i]);
            let saturated = cbar.is_finite() && prev >= cbar * (T::one() - sat_tol);
            if !(cur > prev) && !saturated {
                return Err(Error::DegenerateConsumption { t: t.to_f64_lossy(), x: xs[i].to_f64_lossy() });
            }
        }
        Ok(Self { surface, t, xs, consumption, cbar, config: *config })
    }

    /// `c(t, w(t, x))` from an exact path solve.
    pub fn consumption_of(&self, x: T) -> Result<T> {
        self.surface.value(self.t, wealth_at(self.surface, x, self.t, &self.config)?)
    }

    /// The initial wealth `y(t, value)` whose path consumes `value` at `t`.
    pub fn invert(&self, value: T) -> Result<T> {
        if value >= self.cbar {
            return Err(Error::AboveFrontier {
                t: self.t.to_f64_lossy(),
                value: value.to_f64_lossy(),
                cbar: self.cbar.to_f64_lossy(),
            });
        }
        let cs = &self.consumption;
        let n = cs.len();
        if !(value >= cs[0] && value <= cs[n - 1]) {
            return Err(Error::NotBracketed {
                target: value.to_f64_lossy(),
                f_lo: cs[0].to_f64_lossy(),
                f_hi: cs[n - 1].to_f64_lossy(),
            });
        }
        let j = cs.partition_point(|&c| c < value);
        if cs[j] == value {
            return Ok(self.xs[j]);
        }
        let (lo, hi) = (self.xs[j - 1], self.xs[j]);
        invert_try(|x| self.consumption_of(x), value, (lo, hi), self.config.inversion_tol)
    }

    /// `∂_x c(t, w(t, x))` by central differences across neighbouring paths.
    /// Richardson-extrapolated from steps `h` and `2h`.
    pub fn slope(&self, x: T) -> Result<T> {
        let central = |h: T| -> Result<T> {
            Ok((self.consumption_of(x + h)? - self.consumption_of(x - h)?) / (T::lit(2.0) * h))
        };
        let h = T::lit(1e-4) * x;
        Ok((T::lit(4.0) * central(h)? - central(h * T::lit(2.0))?) / T::lit(3.0))
    }

    /// `∂²_x c(t, w(t, x))`, Richardson-extrapolated like [`Self::slope`].
    pub fn curvature(&self, x: T) -> Result<T> {
        let mid = self.consumption_of(x)?;
        let central = |h: T| -> Result<T> {
            Ok((self.consumption_of(x + h)? - T::lit(2.0) * mid + self.consumption_of(x - h)?) / (h * h))
        };
        let h = T::lit(1e-3) * x;
        Ok((T::lit(4.0) * central(h)? - central(h * T::lit(2.0))?) / T::lit(3.0))
    }
}

/// Inverse wealth `y(t, value)` for a consumption rule.
pub fn invert_consumption<T: Real>(c: &StrategySurface<T>, t: T, value: T, config: &DetConfig<T>) -> Result<T> {
    PathFamily::new(c, t, config)?.invert(value)
}

/// Marginal utility recovered on a consumption grid at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicRecovery<T> {
    pub t: T,
    pub c_grid: Vec<T>,
    pub y_of_c: Vec<T>,
    pub uc: Vec<T>,
    pub ucc: Vec<T>,
    /// Absolute risk aversion `−u_cc/u_c`.
    pub rho: Vec<T>,
    pub cbar: T,
}

impl<T: Real> DeterministicRecovery<T> {
    /// Rows `t,c,y,u_c,u_cc,rho`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t", "c", "y", "u_c", "u_cc", "rho"])?;
        for i in 0..self.c_grid.len() {
            wtr.write_record([
                self.t.to_string(),
                self.c_grid[i].to_string(),
                self.y_of_c[i].to_string(),
                self.uc[i].to_string(),
                self.ucc[i].to_string(),
                self.rho[i].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `u_c(t, c) = ∫_{y(t,c)}^∞ D` on `c_grid`, with
/// `u_cc = −D(y)/∂_x c(t, w(t, y))`.
pub fn recover_marginal_utility<T: Real>(
    c: &StrategySurface<T>,
    weight: &WeightFunction<T>,
    t: T,
    c_grid: &[T],
    config: &DetConfig<T>,
) -> Result<DeterministicRecovery<T>> {
    weight.validate()?;
    let family = PathFamily::new(c, t, config)?;
    let rows = c_grid
        .par_iter()
        .map(|&value| -> Result<(T, T, T, T)> {
            let y = family.invert(value)?;
            let slope = family.slope(y)?;
            if !(slope > T::zero()) {
                return Err(Error::DegenerateConsumption { t: t.to_f64_lossy(), x: y.to_f64_lossy() });
            }
            let uc = weight.tail(y);
            let ucc = -weight.density(y) / slope;
            let rho = weight.hazard(y) / slope;
            Ok((y, uc, ucc, rho))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DeterministicRecovery {
        t,
        c_grid: c_grid.to_vec(),
        y_of_c: rows.iter().map(|r| r.0).collect(),
        uc: rows.iter().map(|r| r.1).collect(),
        ucc: rows.iter().map(|r| r.2).collect(),
        rho: rows.iter().map(|r| r.3).collect(),
        cbar: family.cbar,
    })
}

/// Sign criterion evaluated at one `(t, x)` probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeMargin<T> {
    pub t: T,
    pub x: T,
    /// `D_x/D + D/∫_x^∞ D − ∂²_x c*/∂_x c*`; has the sign of `ρ_c`.
    pub margin: T,
    /// Largest magnitude among the three terms, used to scale tolerances.
    pub scale: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetRiskReport<T> {
    pub verdict: RiskVerdict,
    pub min_margin: T,
    pub max_margin: T,
    pub probes: Vec<ProbeMargin<T>>,
}

/// DARA/CARA/IARA verdict from the sign of `ρ_c` at each `(t, x)` probe.
pub fn classify_risk_det<T: Real>(
    c: &StrategySurface<T>,
    weight: &WeightFunction<T>,
    probes: &[(T, T)],
    config: &DetConfig<T>,
) -> Result<DetRiskReport<T>> {
    weight.validate()?;
    if probes.is_empty() {
        return Err(Error::InvalidParameter("at least one probe is required".into()));
    }
    let margins = probes
        .par_iter()
        .map(|&(t, x)| -> Result<ProbeMargin<T>> {
            let family = PathFamily { surface: c, t, xs: vec![], consumption: vec![], cbar: T::infinity(), config: *config };
            let slope = family.slope(x)?;
            if !(slope > T::zero()) {
                return Err(Error::DegenerateConsumption { t: t.to_f64_lossy(), x: x.to_f64_lossy() });
            }
            let curv = family.curvature(x)? / slope;
            let (a, b) = (weight.log_slope(x), weight.hazard(x));
            let scale = a.abs().max(b.abs()).max(curv.abs()).max(T::one());
            Ok(ProbeMargin { t, x, margin: a + b - curv, scale })
        })
        .collect::<Result<Vec<_>>>()?;
    let scaled: Vec<T> = margins.iter().map(|m| m.margin / m.scale).collect();
    let verdict = verdict_from_margins(&scaled, config.cara_tol, Measure::Absolute);
    let min_margin = margins.iter().map(|m| m.margin).fold(T::infinity(), T::min);
    let max_margin = margins.iter().map(|m| m.margin).fold(T::neg_infinity(), T::max);
    Ok(DetRiskReport { verdict, min_margin, max_margin, probes: margins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn crra() -> StrategySurface<f64> {
        StrategySurface::Linear { coef: 0.1 }
    }

    #[test]
    fn crra_path_decays_exponentially() {
        let p = solve_wealth_path(&crra(), 1.0, 10.0, 2001).unwrap();
        assert_abs_diff_eq!(p.samples.last().unwrap().1, (-1.0f64).exp(), epsilon = 1e-7);
    }

    #[test]
    fn zero_consumption_keeps_wealth() {
        let zero = StrategySurface::Linear { coef: 0.0 };
        let p = solve_wealth_path(&zero, 1.5, 5.0, 11).unwrap();
        assert!(p.samples.iter().all(|s| s.1 == 1.5));
        assert_eq!(budget_exhaustion(&p, &zero).unwrap().ratio, 0.0);
    }

    #[test]
    fn glog_path_matches_closed_form() {
        let p = solve_wealth_path(&StrategySurface::GLog, 1.0, 2.0, 2001).unwrap();
        assert_abs_diff_eq!(p.samples.last().unwrap().1, 3f64.ln() / 2.0, epsilon = 1e-6);
    }

    #[test]
    fn crra_budget_ratio() {
        let p = solve_wealth_path(&crra(), 1.0, 100.0, 20001).unwrap();
        let b = budget_exhaustion(&p, &crra()).unwrap();
        assert_abs_diff_eq!(b.ratio, 1.0 - (-10.0f64).exp(), epsilon = 1e-8);
        assert_relative_eq!(b.ratio_with_tail, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn slow_consumption_leaves_large_tail() {
        let slow = StrategySurface::Linear { coef: 0.01 };
        let p = solve_wealth_path(&slow, 1.0, 10.0, 101).unwrap();
        assert!(matches!(budget_exhaustion(&p, &slow), Err(Error::TailNotNegligible { .. })));
    }

    #[test]
    fn crra_inverse_wealth() {
        let cfg = DetConfig::default();
        let y = invert_consumption(&crra(), 10.0, 0.05, &cfg).unwrap();
        assert_abs_diff_eq!(y, 0.5 * 1f64.exp(), epsilon = 1e-5);
        let y0 = invert_consumption(&crra(), 0.0, 0.1, &cfg).unwrap();
        assert_abs_diff_eq!(y0, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn glog_round_trip() {
        let cfg = DetConfig::default();
        let g = StrategySurface::GLog;
        let w = (1.0f64 + 2.0).ln();
        let target = g.value(1.0, w).unwrap();
        assert_abs_diff_eq!(invert_consumption(&g, 1.0, target, &cfg).unwrap(), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn gexp_frontier_is_detected() {
        // w(t, x) → 1/t so c̄(t) = 1/t²
        let cfg = DetConfig::default();
        let fam = PathFamily::new(&StrategySurface::GExp, 1.0, &cfg).unwrap();
        assert_relative_eq!(fam.cbar, 1.0, max_relative = 1e-6);
        assert!(matches!(fam.invert(1.5), Err(Error::AboveFrontier { .. })));
    }

    #[test]
    fn crra_power_tail_marginal_utility() {
        let cfg = DetConfig::default();
        let rec =
            recover_marginal_utility(&crra(), &WeightFunction::PowerTail { r: 2.0 }, 0.0, &[0.2, 0.1], &cfg).unwrap();
        assert_relative_eq!(rec.uc[0], 0.25, max_relative = 1e-9);
        assert_relative_eq!(rec.uc[1], 1.0, max_relative = 1e-9);
        assert!(rec.cbar.is_infinite());
        // ρ = R/c
        assert_relative_eq!(rec.rho[0], 10.0, max_relative = 1e-6);
    }

    #[test]
    fn verdicts_for_crra_paths() {
        let cfg = DetConfig::default();
        let probes = [(0.5, 0.5), (1.0, 1.0), (5.0, 2.0)];
        let cases = [
            (WeightFunction::PowerTail { r: 2.0 }, RiskVerdict::Dara),
            (WeightFunction::Gaussian { eta: 0.5 }, RiskVerdict::Iara),
            (WeightFunction::Exp { zeta: 1.5 }, RiskVerdict::Cara),
        ];
        for (w, expected) in cases {
            let rep = classify_risk_det(&crra(), &w, &probes, &cfg).unwrap();
            assert_eq!(rep.verdict, expected, "{w:?}: {rep:?}");
        }
    }

    #[test]
    fn gexp_paths_are_never_dara_under_power_tail() {
        let cfg = DetConfig::default();
        let probes = [(0.5, 0.5), (1.0, 1.0), (5.0, 2.0), (0.5, 5.0)];
        let g = StrategySurface::GExp;
        let rep = classify_risk_det(&g, &WeightFunction::Gaussian { eta: 0.5 }, &probes, &cfg).unwrap();
        assert_eq!(rep.verdict, RiskVerdict::Iara);
        let rep = classify_risk_det(&g, &WeightFunction::PowerTail { r: 2.0 }, &probes, &cfg).unwrap();
        assert_eq!(rep.verdict, RiskVerdict::Mixed);
        // ∂²_x c*/∂_x c* = 1/x − t, so the margin is t − 2/x
        for p in &rep.probes {
            assert_abs_diff_eq!(p.margin, p.t - 2.0 / p.x, epsilon = 1e-5);
        }
    }

    #[test]
    fn custom_weight_matches_builtin() {
        let custom = WeightFunction::custom(|x: f64| 2.0 * x.powi(-3), |x: f64| x.powi(-2));
        let builtin = WeightFunction::PowerTail { r: 2.0 };
        for x in [0.3, 1.0, 4.0] {
            assert_relative_eq!(custom.density_x(x), builtin.density_x(x), max_relative = 1e-8);
            assert_relative_eq!(custom.hazard(x), builtin.hazard(x), max_relative = 1e-14);
        }
    }
}
