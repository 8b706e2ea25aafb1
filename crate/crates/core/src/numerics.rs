//! Numerical kernel: RK4 stepping, adaptive Simpson quadrature, bracketed
//! monotone inversion, finite differences and seeded Gaussian increments.
//!
//! Every routine is a pure function of its inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform grid of `n` nodes on `[start, stop]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D<T> {
    pub start: T,
    pub stop: T,
    pub n: usize,
}

impl<T: Real> Grid1D<T> {
    pub fn new(start: T, stop: T, n: usize) -> Result<Self> {
        let g = Self { start, stop, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) || !(self.start < self.stop) {
            return Err(Error::InvalidParameter(format!(
                "grid needs finite start < stop, got [{}, {}]",
                self.start, self.stop
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("grid needs n >= 2, got {}", self.n)));
        }
        Ok(())
    }

    pub fn spacing(&self) -> T {
        (self.stop - self.start) / T::from_count(self.n - 1)
    }

    pub fn node(&self, i: usize) -> T {
        if i + 1 == self.n {
            self.stop
        } else {
            self.start + self.spacing() * T::from_count(i)
        }
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|i| self.node(i)).collect()
    }
}

/// `n` points geometrically spaced from `start` to `stop` (both > 0).
pub fn log_spaced<T: Real>(start: T, stop: T, n: usize) -> Vec<T> {
    assert!(start > T::zero() && stop > start && n >= 2);
    let (l0, l1) = (start.ln(), stop.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                start
            } else if i + 1 == n {
                stop
            } else {
                (l0 + (l1 - l0) * T::from_count(i) / T::from_count(n - 1)).exp()
            }
        })
        .collect()
}

/// Classical fourth-order Runge–Kutta on the nodes of `grid`.
///
/// With `floor = Some(y0)`, a step that would take `y` below the floor is
/// clamped to the floor and the solution is held there (absorption).
pub fn integrate_ode<T, F>(rhs: F, t0: T, y0: T, grid: &Grid1D<T>, floor: Option<T>) -> Result<Vec<(T, T)>>
where
    T: Real,
    F: Fn(T, T) -> T,
{
    grid.validate()?;
    if (grid.start - t0).abs() > T::epsilon() * (T::one() + t0.abs()) * T::lit(16.0) {
        return Err(Error::InvalidParameter(format!("grid starts at {} but t0 = {}", grid.start, t0)));
    }
    let eval = |t: T, y: T| -> Result<T> {
        let v = rhs(t, y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("in ODE right-hand side at t={t}, y={y}")))
        }
    };
    let h = grid.spacing();
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    let mut out = Vec::with_capacity(grid.n);
    let mut y = y0;
    let mut absorbed = matches!(floor, Some(f) if y0 <= f);
    if let (true, Some(f)) = (absorbed, floor) {
        y = f;
    }
    out.push((t0, y));
    for i in 0..grid.n - 1 {
        let t = grid.node(i);
        let t_next = grid.node(i + 1);
        if !absorbed {
            let k1 = eval(t, y)?;
            let k2 = eval(t + half * h, y + half * h * k1)?;
            let k3 = eval(t + half * h, y + half * h * k2)?;
            let k4 = eval(t + h, y + h * k3)?;
            y = y + h * (k1 + two * k2 + two * k3 + k4) / six;
            if let Some(f) = floor {
                if y <= f {
                    y = f;
                    absorbed = true;
                }
            }
        }
        out.push((t_next, y));
    }
    Ok(out)
}

/// Adaptive quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig<T> {
    pub tol: T,
    pub max_depth: usize,
    /// Relative offset used to step off an endpoint where the integrand is
    /// not finite.
    pub endpoint_offset: T,
}

impl<T: Real> Default for QuadConfig<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-10), max_depth: 50, endpoint_offset: T::lit(1e-12) }
    }
}

impl<T: Real> QuadConfig<T> {
    pub fn with_tol(tol: T) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Adaptive Simpson estimate of `∫_a^b f` to absolute tolerance `tol`.
pub fn quad<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> Result<T> {
    quad_with(f, a, b, &QuadConfig::with_tol(tol))
}

pub fn quad_with<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, cfg: &QuadConfig<T>) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    if b < a {
        return quad_with(f, b, a, cfg).map(|v| -v);
    }
    let m = (a + b) * T::lit(0.5);
    if !f(a).is_finite() && !f(b).is_finite() {
        return Ok(quad_endpoint_safe(&f, a, m, cfg)? + quad_endpoint_safe(&f, m, b, cfg)?);
    }
    quad_endpoint_safe(&f, a, b, cfg)
}

fn quad_endpoint_safe<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, cfg: &QuadConfig<T>) -> Result<T> {
    let width = b - a;
    let singular_a = !f(a).is_finite();
    let singular_b = !f(b).is_finite();
    if singular_a || singular_b {
        // x = a + width·u² (mirrored for b) flattens integrable endpoint singularities
        let g = |u: T| {
            let x = if singular_a { a + width * u * u } else { b - width * u * u };
            T::lit(2.0) * width * u * f(x)
        };
        return quad_regular(g, T::zero(), T::one(), cfg);
    }
    quad_regular(f, a, b, cfg)
}

fn quad_regular<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, cfg: &QuadConfig<T>) -> Result<T> {
    let width = b - a;
    let fa = endpoint_value(&f, a, width * cfg.endpoint_offset)?;
    let fb = endpoint_value(&f, b, -width * cfg.endpoint_offset)?;
    let m = (a + b) * T::lit(0.5);
    let fm = finite(f(m), m)?;
    let whole = width / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, cfg.tol, cfg.max_depth)
}

fn finite<T: Real>(v: T, x: T) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("integrand at x={x}")))
    }
}

fn endpoint_value<T: Real, F: Fn(T) -> T>(f: &F, x: T, offset: T) -> Result<T> {
    let v = f(x);
    if v.is_finite() {
        return Ok(v);
    }
    let shifted = x + offset;
    finite(f(shifted), shifted)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: usize,
) -> Result<T> {
    let half = T::lit(0.5);
    let m = (a + b) * half;
    let lm = (a + m) * half;
    let rm = (m + b) * half;
    let flm = finite(f(lm), lm)?;
    let frm = finite(f(rm), rm)?;
    let six = T::lit(6.0);
    let four = T::lit(4.0);
    let left = (m - a) / six * (fa + four * flm + fm);
    let right = (b - m) / six * (fm + four * frm + fb);
    let delta = left + right - whole;
    let noise = T::lit(64.0) * T::epsilon() * (left.abs() + right.abs());
    if delta.abs() <= T::lit(15.0) * tol.max(noise) {
        return Ok(left + right + delta / T::lit(15.0));
    }
    if depth == 0 || !(lm > a && rm < b) {
        return Err(Error::MaxDepthExceeded { depth, a: a.to_f64_lossy(), b: b.to_f64_lossy() });
    }
    let l = simpson_step(f, a, m, fa, flm, fm, left, tol * half, depth - 1)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, tol * half, depth - 1)?;
    Ok(l + r)
}

const GL8: [(f64, f64); 4] = [
    (0.1834346424956498, 0.362683783378362),
    (0.525532409916329, 0.31370664587788727),
    (0.7966664774136267, 0.22238103445337448),
    (0.9602898564975363, 0.10122853629037626),
];

/// 8-point Gauss–Legendre estimate of `∫_a^b f`. Never evaluates `f` at the
/// endpoints.
pub fn gauss_legendre<T: Real, F: FnMut(T) -> Result<T>>(mut f: F, a: T, b: T) -> Result<T> {
    let half = T::lit(0.5) * (b - a);
    let mid = T::lit(0.5) * (a + b);
    let mut acc = T::zero();
    for &(x, w) in &GL8 {
        let d = half * T::lit(x);
        acc = acc + T::lit(w) * (f(mid - d)? + f(mid + d)?);
    }
    Ok(acc * half)
}

/// How to handle an improper upper limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// Map `[a, ∞)` onto `(0, 1]` with `ξ = a/s` (or `ξ = a + s/(1-s)`
    /// when `a <= 0`).
    #[default]
    Substitution,
    /// Cut the range where `|f(ξ)|·ξ` falls below the tolerance.
    Truncate,
}

/// `∫_a^∞ f`, for integrands decaying faster than `1/ξ`.
pub fn quad_to_infinity<T: Real, F: Fn(T) -> T>(f: F, a: T, tol: T, mode: TailMode) -> Result<T> {
    match mode {
        TailMode::Substitution => {
            if a > T::zero() {
                let g = |s: T| {
                    if s <= T::zero() {
                        T::zero()
                    } else {
                        let xi = a / s;
                        let v = f(xi) * a / (s * s);
                        if v.is_finite() {
                            v
                        } else {
                            T::zero()
                        }
                    }
                };
                quad(g, T::zero(), T::one(), tol)
            } else {
                let g = |s: T| {
                    if s >= T::one() {
                        T::zero()
                    } else {
                        let om = T::one() - s;
                        let v = f(a + s / om) / (om * om);
                        if v.is_finite() {
                            v
                        } else {
                            T::zero()
                        }
                    }
                };
                quad(g, T::zero(), T::one(), tol)
            }
        }
        TailMode::Truncate => {
            let mut b = a.abs().max(T::one()) * T::lit(2.0) + a.max(T::zero());
            let mut steps = 0;
            while (f(b).abs() * b) >= tol {
                b = b * T::lit(2.0);
                steps += 1;
                if steps > 200 || !b.is_finite() {
                    return Err(Error::NonFinite(format!("integrand does not decay beyond x={a}")));
                }
            }
            quad(f, a, b, tol)
        }
    }
}

/// Solve `f(x) = target` for strictly monotone `f` on a bracket (Brent's
/// bisection/secant/inverse-quadratic hybrid).
///
/// Converges when `|f(x) - target| <= tol * max(1, |target|)` or when the
/// bracket shrinks to a few ulps.
pub fn invert_monotone<T: Real, F: Fn(T) -> T>(f: F, target: T, bracket: (T, T), tol: T) -> Result<T> {
    let (mut a, mut b) = bracket;
    let g = |x: T| f(x) - target;
    let mut fa = g(a);
    let mut fb = g(b);
    if !(fa.is_finite() && fb.is_finite()) || fa * fb > T::zero() {
        return Err(Error::NotBracketed {
            target: target.to_f64_lossy(),
            f_lo: (fa + target).to_f64_lossy(),
            f_hi: (fb + target).to_f64_lossy(),
        });
    }
    let ftol = tol * T::one().max(target.abs());
    if fa.abs() <= ftol {
        return Ok(a);
    }
    if fb.abs() <= ftol {
        return Ok(b);
    }
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if fb * fc > T::zero() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let xtol = two * T::epsilon() * b.abs() + T::min_positive_value();
        let m = half * (c - b);
        if fb.abs() <= ftol || m.abs() <= xtol {
            if !fb.is_finite() {
                break;
            }
            return Ok(b);
        }
        if e.abs() >= xtol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * m * s;
                q = T::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (two * m * qa * (qa - r) - (b - a) * (r - T::one()));
                q = (qa - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            } else {
                p = -p;
            }
            let min1 = T::lit(3.0) * m * q - (xtol * q).abs();
            let min2 = (e * q).abs();
            if two * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b = if d.abs() > xtol { b + d } else { b + xtol * m.signum() };
        fb = g(b);
        if !fb.is_finite() {
            return Err(Error::NonFinite(format!("monotone inversion at x={b}")));
        }
    }
    Ok(b)
}

/// Records the first error raised inside a closure that must return a
/// plain scalar, substituting NaN so the caller's kernel aborts.
pub(crate) struct ErrorSlot(std::cell::RefCell<Option<Error>>);

impl ErrorSlot {
    pub(crate) fn new() -> Self {
        Self(std::cell::RefCell::new(None))
    }

    pub(crate) fn take<T: Real>(&self, r: Result<T>) -> T {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                T::nan()
            }
        }
    }

    /// The recorded error if any, else `r`.
    pub(crate) fn finish<V>(self, r: Result<V>) -> Result<V> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => r,
        }
    }
}

/// [`quad`] for a fallible integrand.
pub(crate) fn quad_try<T: Real, F: Fn(T) -> Result<T>>(f: F, a: T, b: T, tol: T) -> Result<T> {
    let slot = ErrorSlot::new();
    let v = quad(|x| slot.take(f(x)), a, b, tol);
    slot.finish(v)
}

/// [`invert_monotone`] for a fallible function.
pub(crate) fn invert_try<T: Real, F: Fn(T) -> Result<T>>(f: F, target: T, bracket: (T, T), tol: T) -> Result<T> {
    let slot = ErrorSlot::new();
    let v = invert_monotone(|x| slot.take(f(x)), target, bracket, tol);
    slot.finish(v)
}

/// Which partial derivative to take of a surface `f(t, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partial {
    T,
    W,
    WW,
}

/// Closed domain for finite-difference stencils; stencils that would leave
/// it switch to one-sided formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdDomain<T> {
    pub t_min: T,
    pub t_max: T,
    pub w_min: T,
    pub w_max: T,
}

impl<T: Real> Default for FdDomain<T> {
    fn default() -> Self {
        Self { t_min: T::zero(), t_max: T::infinity(), w_min: T::zero(), w_max: T::infinity() }
    }
}

/// Default step for first derivatives: `max(1e-5, 1e-5·|x|)`.
pub fn default_step<T: Real>(x: T) -> T {
    T::lit(1e-5).max(T::lit(1e-5) * x.abs())
}

/// Default step for second derivatives: `max(1e-4, 1e-4·|x|)`.
pub fn default_step_second<T: Real>(x: T) -> T {
    T::lit(1e-4).max(T::lit(1e-4) * x.abs())
}

/// Second-order finite difference of `f` at `(t, w)` on the default domain
/// `t >= 0, w >= 0`.
pub fn fd_partial<T: Real, F: Fn(T, T) -> T>(f: F, point: (T, T), which: Partial, h: T) -> Result<T> {
    fd_partial_in(f, point, which, h, &FdDomain::default())
}

pub fn fd_partial_in<T: Real, F: Fn(T, T) -> T>(
    f: F,
    point: (T, T),
    which: Partial,
    h: T,
    domain: &FdDomain<T>,
) -> Result<T> {
    if !(h > T::zero()) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be > 0, got {h}")));
    }
    let (t, w) = point;
    let check = |v: T, tt: T, ww: T| -> Result<T> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("finite-difference stencil at t={tt}, w={ww}")))
        }
    };
    let two = T::lit(2.0);
    match which {
        Partial::T => {
            let g = |s: T| check(f(s, w), s, w);
            if t - h >= domain.t_min && t + h <= domain.t_max {
                Ok((g(t + h)? - g(t - h)?) / (two * h))
            } else if t - h < domain.t_min {
                Ok((T::lit(-3.0) * g(t)? + T::lit(4.0) * g(t + h)? - g(t + two * h)?) / (two * h))
            } else {
                Ok((T::lit(3.0) * g(t)? - T::lit(4.0) * g(t - h)? + g(t - two * h)?) / (two * h))
            }
        }
        Partial::W => {
            let g = |x: T| check(f(t, x), t, x);
            if w - h >= domain.w_min && w + h <= domain.w_max {
                Ok((g(w + h)? - g(w - h)?) / (two * h))
            } else if w - h < domain.w_min {
                Ok((T::lit(-3.0) * g(w)? + T::lit(4.0) * g(w + h)? - g(w + two * h)?) / (two * h))
            } else {
                Ok((T::lit(3.0) * g(w)? - T::lit(4.0) * g(w - h)? + g(w - two * h)?) / (two * h))
            }
        }
        Partial::WW => {
            let g = |x: T| check(f(t, x), t, x);
            let h2 = h * h;
            if w - h >= domain.w_min && w + h <= domain.w_max {
                Ok((g(w + h)? - two * g(w)? + g(w - h)?) / h2)
            } else if w - h < domain.w_min {
                Ok((two * g(w)? - T::lit(5.0) * g(w + h)? + T::lit(4.0) * g(w + two * h)?
                    - g(w + T::lit(3.0) * h)?)
                    / h2)
            } else {
                Ok((two * g(w)? - T::lit(5.0) * g(w - h)? + T::lit(4.0) * g(w - two * h)?
                    - g(w - T::lit(3.0) * h)?)
                    / h2)
            }
        }
    }
}

/// Identifies one reproducible stream of pseudo-random numbers.
///
/// The generator is ChaCha8 (`rand_chacha`) seeded with `master_seed`
/// via `seed_from_u64`, with its 64-bit stream selector set to
/// `stream_id`; normals come from `rand_distr::StandardNormal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// `n_steps` i.i.d. `Normal(0, dt)` draws from `stream`.
pub fn gaussian_increments<T: Real>(stream: RngStream, n_steps: usize, dt: T) -> Vec<T> {
    let scale = dt.sqrt().to_f64_lossy();
    let mut rng = stream.rng();
    (0..n_steps)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            T::lit(z * scale)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(Grid1D::new(1.0, 1.0, 5).is_err());
        assert!(Grid1D::new(0.0, 1.0, 1).is_err());
        assert!(Grid1D::new(0.0, f64::NAN, 3).is_err());
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        assert_eq!(g.nodes().last().copied(), Some(1.0));
        assert_abs_diff_eq!(g.spacing(), 0.1);
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_fifteen() {
        let v = gauss_legendre(|x: f64| Ok(x.powi(15) + x.powi(4)), 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 16.0 + 0.2, epsilon = 1e-15);
        let back = gauss_legendre(|x: f64| Ok(x.exp()), 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(back, 1.0 - std::f64::consts::E, epsilon = 1e-14);
    }

    #[test]
    fn rk4_linear_decay() {
        let g = Grid1D::new(0.0, 1.0, 101).unwrap();
        let sol = integrate_ode(|_, y| -y, 0.0, 1.0, &g, None).unwrap();
        assert_abs_diff_eq!(sol.last().unwrap().1, (-1.0f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn rk4_constant_path() {
        let g = Grid1D::new(0.0, 4.0, 9).unwrap();
        let sol = integrate_ode(|_, _| 0.0, 0.0, 3.0, &g, None).unwrap();
        assert!(sol.iter().all(|&(_, y)| y == 3.0));
    }

    #[test]
    fn rk4_crra_wealth() {
        let g = Grid1D::new(0.0, 10.0, 1001).unwrap();
        let sol = integrate_ode(|_, y| -0.1 * y, 0.0, 1.0, &g, Some(0.0)).unwrap();
        assert_abs_diff_eq!(sol.last().unwrap().1, 0.367879441171, epsilon = 1e-7);
    }

    #[test]
    fn rk4_absorbs_at_floor() {
        let g = Grid1D::new(0.0, 3.0, 31).unwrap();
        let sol = integrate_ode(|_, _| -1.0, 0.0, 1.0, &g, Some(0.0)).unwrap();
        let last = sol.last().unwrap().1;
        assert_eq!(last, 0.0);
        assert!(sol.iter().all(|&(_, y)| y >= 0.0));
        // held once absorbed
        let first_zero = sol.iter().position(|&(_, y)| y == 0.0).unwrap();
        assert!(sol[first_zero..].iter().all(|&(_, y)| y == 0.0));
    }

    #[test]
    fn rk4_reports_non_finite_rhs() {
        let g = Grid1D::new(0.0, 1.0, 5).unwrap();
        let err = integrate_ode(|_, _| f64::NAN, 0.0, 1.0, &g, None).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn quad_examples() {
        assert_abs_diff_eq!(quad(|x| x, 0.0, 1.0, 1e-10).unwrap(), 0.5, epsilon = 1e-12);
        let phi = 0.5;
        let v = quad(|xi: f64| 1.0 / (phi * xi), 1.0, 2.0, 1e-10).unwrap();
        assert_abs_diff_eq!(v, 2.0f64.ln() / phi, epsilon = 1e-8);
        let tail = quad_to_infinity(|xi: f64| 2.0 * xi.powi(-3), 1.0, 1e-10, TailMode::Substitution).unwrap();
        assert_abs_diff_eq!(tail, 1.0, epsilon = 1e-8);
        let tail = quad_to_infinity(|xi: f64| 2.0 * xi.powi(-3), 1.0, 1e-10, TailMode::Truncate).unwrap();
        assert_abs_diff_eq!(tail, 1.0, epsilon = 1e-4);
        let tail = quad_to_infinity(|xi: f64| (-xi).exp(), -1.0, 1e-10, TailMode::Substitution).unwrap();
        assert_abs_diff_eq!(tail, 1.0f64.exp(), epsilon = 1e-8);
    }

    #[test]
    fn quad_reversed_limits_negate() {
        let a = quad(|x: f64| x * x, 0.0, 2.0, 1e-12).unwrap();
        let b = quad(|x: f64| x * x, 2.0, 0.0, 1e-12).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn quad_depth_limit() {
        let cfg = QuadConfig { tol: 1e-14, max_depth: 3, endpoint_offset: 1e-12 };
        let err = quad_with(|x: f64| (50.0 * x).sin(), 0.0, 10.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::MaxDepthExceeded { .. }));
    }

    #[test]
    fn quad_steps_off_singular_endpoint() {
        // ∫_0^1 x^{-1/2} = 2; the endpoint value is infinite
        let cfg = QuadConfig { tol: 1e-6, max_depth: 60, endpoint_offset: 1e-12 };
        let v = quad_with(|x: f64| x.powf(-0.5), 0.0, 1.0, &cfg).unwrap();
        assert!((v - 2.0).abs() < 1e-3, "{v}");
    }

    #[test]
    fn invert_examples() {
        let x = invert_monotone(|x: f64| x * x, 4.0, (0.0, 10.0), 1e-12).unwrap();
        assert_abs_diff_eq!(x, 2.0, epsilon = 1e-10);
        let x = invert_monotone(|w: f64| 0.1 * w, 0.05, (0.0, 10.0), 1e-12).unwrap();
        assert_abs_diff_eq!(x, 0.5, epsilon = 1e-10);
        let (theta, sigma) = (0.25f64, 0.5f64);
        let f = |w: f64| (w.exp() - 1.0).powf(-theta / sigma);
        let x = invert_monotone(f, 1.0, (1.5f64.ln(), 4.0f64.ln()), 1e-12).unwrap();
        assert_abs_diff_eq!(x, 2.0f64.ln(), epsilon = 1e-8);
    }

    #[test]
    fn invert_requires_bracket() {
        let err = invert_monotone(|x: f64| x, 5.0, (0.0, 1.0), 1e-12).unwrap_err();
        assert!(matches!(err, Error::NotBracketed { .. }));
    }

    #[test]
    fn fd_examples() {
        let f = |_t: f64, w: f64| w * w;
        assert_abs_diff_eq!(fd_partial(f, (0.0, 3.0), Partial::W, 1e-5).unwrap(), 6.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fd_partial(f, (0.0, 3.0), Partial::WW, 1e-4).unwrap(), 2.0, epsilon = 1e-5);
        let (phi, psi, p) = (0.5, 60.0, 0.2);
        let g = |_t: f64, w: f64| phi * w + psi * ((1.0 + w).powf(p) - 1.0);
        // w = 0 is on the boundary: one-sided stencil
        let d = fd_partial(g, (1.0, 0.0), Partial::W, 1e-5).unwrap();
        assert_abs_diff_eq!(d, 12.5, epsilon = 1e-5);
    }

    #[test]
    fn fd_time_derivative_one_sided_at_zero() {
        let f = |t: f64, w: f64| t * t * w;
        let d = fd_partial(f, (0.0, 2.0), Partial::T, 1e-4).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-7);
        let d = fd_partial(f, (1.0, 2.0), Partial::T, 1e-4).unwrap();
        assert_abs_diff_eq!(d, 4.0, epsilon = 1e-7);
    }

    #[test]
    fn fd_rejects_bad_step_and_nan() {
        assert!(fd_partial(|_, w: f64| w, (0.0, 1.0), Partial::W, 0.0).is_err());
        let err = fd_partial(|_, _| f64::NAN, (0.0, 1.0), Partial::W, 1e-3).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn increments_are_deterministic() {
        let s = RngStream::new(42, 7);
        let a: Vec<f64> = gaussian_increments(s, 4, 0.01);
        let b: Vec<f64> = gaussian_increments(s, 4, 0.01);
        assert_eq!(a, b);
        let c: Vec<f64> = gaussian_increments(RngStream::new(42, 8), 4, 0.01);
        assert_ne!(a, c);
    }

    #[test]
    fn generic_over_f32() {
        let g = Grid1D::new(0.0f32, 1.0, 101).unwrap();
        let sol = integrate_ode(|_, y| -y, 0.0f32, 1.0, &g, None).unwrap();
        assert!((sol.last().unwrap().1 - (-1.0f32).exp()).abs() < 1e-5);
        let q = quad(|x: f32| x * x, 0.0, 1.0, 1e-6).unwrap();
        assert!((q - 1.0 / 3.0).abs() < 1e-5);
    }
}
