//! Monte-Carlo verification: Euler–Maruyama wealth paths alongside the
//! exact state-price density, the budget identity, the dual wealth
//! representation and the normalising function `h(t)`.
//!
//! Path `i` draws its Brownian increments from stream `i` of the master
//! seed, and every cross-path reduction runs over fixed-size chunks in
//! path order, so results do not depend on the number of threads.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blackpde::{DualMap, RecoveredUtility};
use crate::error::{Error, Result};
use crate::market::{state_price_density, MarketParams, StrategyPair};
use crate::numerics::{gaussian_increments, RngStream};
use crate::scalar::{mean_and_stderr, pairwise_sum, Real};

const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig<T> {
    pub n_paths: usize,
    pub dt: T,
    pub horizon: T,
    pub master_seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
}

impl<T: Real> SimConfig<T> {
    pub fn new(n_paths: usize, dt: T, horizon: T, master_seed: u64) -> Result<Self> {
        let cfg = Self { n_paths, dt, horizon, master_seed, scheme: Scheme::EulerMaruyama };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::InvalidParameter("n_paths must be >= 1".into()));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon must be >= dt, got {}", self.horizon)));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round().to_usize().unwrap_or(1).max(1)
    }

    /// Time nodes `k·dt`, `k = 0..=n_steps`.
    pub fn times(&self) -> Vec<T> {
        (0..=self.n_steps()).map(|k| self.dt * T::from_count(k)).collect()
    }
}

/// One Euler–Maruyama step of the wealth SDE from `w` with consumption
/// `c = c(t, w)` already evaluated, absorbed at zero.
fn euler_step<T: Real>(pair: &StrategyPair<T>, market: &MarketParams<T>, t: T, w: T, c: T, db: T, dt: T) -> Result<T> {
    if w <= T::zero() {
        return Ok(T::zero());
    }
    let pi = pair.pi(t, w)?;
    let next = w + pi * market.sigma * (db + market.theta * dt) + (market.r * w - c) * dt;
    if !next.is_finite() {
        return Err(Error::NonFinite(format!("wealth step at t={t}, w={w}")));
    }
    Ok(next.max(T::zero()))
}

/// Consumption at a node; an absorbed path consumes nothing.
fn node_consumption<T: Real>(pair: &StrategyPair<T>, t: T, w: T) -> Result<T> {
    if w <= T::zero() {
        Ok(T::zero())
    } else {
        pair.c(t, w)
    }
}

/// Runs one path, calling `visit(k, t, W, Z, B, c)` at every node.
fn run_path<T: Real, V: FnMut(usize, T, T, T, T, T) -> Result<()>>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    x: T,
    cfg: &SimConfig<T>,
    path: usize,
    mut visit: V,
) -> Result<()> {
    let n = cfg.n_steps();
    let increments = gaussian_increments(RngStream::new(cfg.master_seed, path as u64), n, cfg.dt);
    let (mut w, mut b) = (x, T::zero());
    let mut c = node_consumption(pair, T::zero(), w)?;
    visit(0, T::zero(), w, T::one(), b, c)?;
    for (k, &db) in increments.iter().enumerate() {
        let t = cfg.dt * T::from_count(k);
        w = euler_step(pair, market, t, w, c, db, cfg.dt)?;
        b = b + db;
        let t_next = cfg.dt * T::from_count(k + 1);
        c = node_consumption(pair, t_next, w)?;
        visit(k + 1, t_next, w, state_price_density(market, t_next, b), b, c)?;
    }
    Ok(())
}

fn check_start<T: Real>(pair: &StrategyPair<T>, x: T) -> Result<()> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("initial wealth must be > 0, got {x}")));
    }
    if let Some(b) = pair.wbar(T::zero()) {
        if !(x < b) {
            return Err(Error::InvalidParameter(format!("initial wealth {x} must lie below the wealth bound {b}")));
        }
    }
    Ok(())
}

/// Full set of simulated paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble<T> {
    pub times: Vec<T>,
    /// `wealth[path][node]`.
    pub wealth: Vec<Vec<T>>,
    pub density: Vec<Vec<T>>,
    pub brownian: Vec<Vec<T>>,
}

impl<T: Real> PathEnsemble<T> {
    /// Rows `path_id,t,W,Z`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["path_id", "t", "W", "Z"])?;
        for (p, (ws, zs)) in self.wealth.iter().zip(&self.density).enumerate() {
            for (k, t) in self.times.iter().enumerate() {
                wtr.write_record([p.to_string(), t.to_string(), ws[k].to_string(), zs[k].to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Euler–Maruyama for `dW = πσ(dB + θdt) + (rW − c)dt` with `Z` computed
/// exactly from the same Brownian path.
pub fn simulate<T: Real>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    x: T,
    cfg: &SimConfig<T>,
) -> Result<PathEnsemble<T>> {
    market.validate_allow_zero_theta()?;
    cfg.validate()?;
    check_start(pair, x)?;
    let n = cfg.n_steps() + 1;
    let paths = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
            let (mut ws, mut zs, mut bs) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
            run_path(pair, market, x, cfg, p, |_, _, w, z, b, _| {
                ws.push(w);
                zs.push(z);
                bs.push(b);
                Ok(())
            })?;
            Ok((ws, zs, bs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ens = PathEnsemble { times: cfg.times(), wealth: vec![], density: vec![], brownian: vec![] };
    for (w, z, b) in paths {
        ens.wealth.push(w);
        ens.density.push(z);
        ens.brownian.push(b);
    }
    Ok(ens)
}

/// Per-node cross-path sums of one chunk of paths.
#[derive(Debug, Clone)]
struct ChunkSums<T> {
    zc: Vec<T>,
    zw: Vec<T>,
    zw_sq: Vec<T>,
}

impl<T: Real> ChunkSums<T> {
    fn zeros(n: usize) -> Self {
        Self { zc: vec![T::zero(); n], zw: vec![T::zero(); n], zw_sq: vec![T::zero(); n] }
    }

    fn add(mut self, other: &Self) -> Self {
        for k in 0..self.zc.len() {
            self.zc[k] = self.zc[k] + other.zc[k];
            self.zw[k] = self.zw[k] + other.zw[k];
            self.zw_sq[k] = self.zw_sq[k] + other.zw_sq[k];
        }
        self
    }
}

/// Pairwise combination in a fixed order.
fn tree_sum<T: Real>(mut parts: Vec<ChunkSums<T>>) -> ChunkSums<T> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a.add(&b),
                None => a,
            });
        }
        parts = next;
    }
    parts.pop().expect("at least one chunk")
}

/// Cross-path statistics of a simulation that is too large to store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats<T> {
    pub times: Vec<T>,
    /// `E[Z_t c(t, W_t)]`.
    pub mean_zc: Vec<T>,
    /// `E[Z_t W_t]` and its standard error.
    pub mean_zw: Vec<T>,
    pub se_zw: Vec<T>,
    /// `∫_0^T Z_t c(t, W_t) dt` per path (trapezoid).
    pub discounted_consumption: Vec<T>,
    pub max_wealth: T,
}

/// Streams paths and keeps only per-node means and per-path integrals.
pub fn simulate_stats<T: Real>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    x: T,
    cfg: &SimConfig<T>,
) -> Result<EnsembleStats<T>> {
    market.validate_allow_zero_theta()?;
    cfg.validate()?;
    check_start(pair, x)?;
    let n = cfg.n_steps() + 1;
    let half_dt = cfg.dt * T::lit(0.5);
    let chunks: Vec<(usize, usize)> =
        (0..cfg.n_paths).step_by(CHUNK).map(|s| (s, (s + CHUNK).min(cfg.n_paths))).collect();
    let results = chunks
        .par_iter()
        .map(|&(start, end)| -> Result<(ChunkSums<T>, Vec<T>, T)> {
            let mut sums = ChunkSums::zeros(n);
            let mut integrals = Vec::with_capacity(end - start);
            let mut max_w = T::zero();
            for p in start..end {
                let mut integral = T::zero();
                let mut prev = T::zero();
                run_path(pair, market, x, cfg, p, |k, _, w, z, _, c| {
                    let zc = z * c;
                    let zw = z * w;
                    sums.zc[k] = sums.zc[k] + zc;
                    sums.zw[k] = sums.zw[k] + zw;
                    sums.zw_sq[k] = sums.zw_sq[k] + zw * zw;
                    if k > 0 {
                        integral = integral + half_dt * (prev + zc);
                    }
                    prev = zc;
                    max_w = max_w.max(w);
                    Ok(())
                })?;
                integrals.push(integral);
            }
            Ok((sums, integrals, max_w))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut parts = Vec::with_capacity(results.len());
    let mut discounted_consumption = Vec::with_capacity(cfg.n_paths);
    let mut max_wealth = T::zero();
    for (sums, integrals, max_w) in results {
        parts.push(sums);
        discounted_consumption.extend(integrals);
        max_wealth = max_wealth.max(max_w);
    }
    let total = tree_sum(parts);
    let np = T::from_count(cfg.n_paths);
    let mean_zw: Vec<T> = total.zw.iter().map(|&s| s / np).collect();
    let se_zw = total
        .zw_sq
        .iter()
        .zip(&mean_zw)
        .map(|(&sq, &m)| {
            if cfg.n_paths < 2 {
                return T::zero();
            }
            let var = (sq - np * m * m).max(T::zero()) / (np - T::one());
            (var / np).sqrt()
        })
        .collect();
    Ok(EnsembleStats {
        times: cfg.times(),
        mean_zc: total.zc.iter().map(|&s| s / np).collect(),
        mean_zw,
        se_zw,
        discounted_consumption,
        max_wealth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport<T> {
    /// `E[∫_0^T Z_t c(t, W_t) dt]`.
    pub estimate: T,
    pub std_error: T,
    /// Initial wealth `x`.
    pub target: T,
    /// Fitted consumption value beyond the horizon.
    pub truncation_adjustment: T,
    /// Fitted exponential decay rate of `E[Z_t c_t]`.
    pub decay_rate: T,
    pub horizon: T,
    pub n_paths: usize,
    pub pass: bool,
}

/// Fits `E[Z_t c_t] ≈ m e^{−k t}` over the last quarter of the horizon and
/// returns `(tail, k)` with `tail = E[Z_T c_T]/k`.
fn fit_tail<T: Real>(times: &[T], mean_zc: &[T]) -> (T, T) {
    let n = times.len();
    let start = n - (n / 4).max(2).min(n);
    let pts: Vec<(T, T)> =
        (start..n).filter(|&k| mean_zc[k] > T::zero()).map(|k| (times[k], mean_zc[k].ln())).collect();
    let last = mean_zc[n - 1];
    if last <= T::zero() || pts.len() < 2 {
        return (T::zero(), T::zero());
    }
    let m = T::from_count(pts.len());
    let tx = pts.iter().map(|p| p.0).sum::<T>() / m;
    let ty = pts.iter().map(|p| p.1).sum::<T>() / m;
    let sxy = pts.iter().map(|p| (p.0 - tx) * (p.1 - ty)).sum::<T>();
    let sxx = pts.iter().map(|p| (p.0 - tx) * (p.0 - tx)).sum::<T>();
    let k = -sxy / sxx;
    if k > T::zero() {
        (last / k, k)
    } else {
        (T::infinity(), k)
    }
}

/// Monte-Carlo check of `E[∫_0^∞ Z_t c(t, W_t) dt] = x`, truncated at the
/// horizon plus a fitted exponential tail. Passes when
/// `|estimate + tail − x| ≤ max(3·std_error, 0.01·x)`.
pub fn verify_budget<T: Real>(
    pair: &StrategyPair<T>,
    market: &MarketParams<T>,
    x: T,
    cfg: &SimConfig<T>,
) -> Result<BudgetReport<T>> {
    let stats = simulate_stats(pair, market, x, cfg)?;
    budget_from_stats(&stats, x, cfg)
}

pub fn budget_from_stats<T: Real>(stats: &EnsembleStats<T>, x: T, cfg: &SimConfig<T>) -> Result<BudgetReport<T>> {
    let (estimate, std_error) = mean_and_stderr(&stats.discounted_consumption);
    let (tail, k) = fit_tail(&stats.times, &stats.mean_zc);
    let limit = T::lit(0.1) * x;
    if tail > limit {
        return Err(Error::TailNotNegligible { tail: tail.to_f64_lossy(), limit: limit.to_f64_lossy() });
    }
    let gate = (T::lit(3.0) * std_error).max(T::lit(0.01) * x);
    Ok(BudgetReport {
        estimate,
        std_error,
        target: x,
        truncation_adjustment: tail,
        decay_rate: k,
        horizon: cfg.horizon,
        n_paths: cfg.n_paths,
        pass: (estimate + tail - x).abs() <= gate,
    })
}

/// `f(t, F(0, x)·Z_t)` along each path of the ensemble.
pub fn dual_wealth<T: Real>(map: &DualMap<T>, x: T, ensemble: &PathEnsemble<T>) -> Result<Vec<Vec<T>>> {
    let lambda = map.marginal(T::zero(), x)?;
    let discount = map.discount_profile(&ensemble.times)?;
    ensemble
        .density
        .par_iter()
        .map(|zs| {
            zs.iter()
                .enumerate()
                .map(|(k, &z)| {
                    if k == 0 {
                        Ok(x)
                    } else {
                        map.inverse_with(discount[k], ensemble.times[k], lambda * z)
                    }
                })
                .collect::<Result<Vec<T>>>()
        })
        .collect()
}

/// Mean over `n_paths` of `max_t |W_euler − f(t, λZ_t)|` at each step size.
///
/// All levels share one Brownian path per stream, sampled at the finest
/// step and aggregated for coarser ones; every `dts[i]` must be an integer
/// multiple of the smallest.
pub fn pathwise_dual_error<T: Real>(
    map: &DualMap<T>,
    x: T,
    n_paths: usize,
    dts: &[T],
    horizon: T,
    master_seed: u64,
) -> Result<Vec<T>> {
    let pair = &map.pair;
    let market = &map.market;
    check_start(pair, x)?;
    let fine = dts.iter().copied().fold(T::infinity(), T::min);
    let n_fine = (horizon / fine).round().to_usize().unwrap_or(0);
    if n_paths == 0 || n_fine == 0 {
        return Err(Error::InvalidParameter("need at least one path and one step".into()));
    }
    let mut factors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let m = (dt / fine).round();
        if (m * fine - dt).abs() > T::lit(1e-9) * dt || !n_fine.is_multiple_of(m.to_usize().unwrap_or(1)) {
            return Err(Error::InvalidParameter(format!("step {dt} is not a multiple of {fine} dividing the horizon")));
        }
        factors.push(m.to_usize().unwrap_or(1));
    }
    let lambda = map.marginal(T::zero(), x)?;
    let levels = factors
        .iter()
        .map(|&m| {
            let dt = fine * T::from_count(m);
            let times: Vec<T> = (0..=n_fine / m).map(|k| dt * T::from_count(k)).collect();
            map.discount_profile(&times).map(|a| (m, dt, times, a))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_path = (0..n_paths)
        .into_par_iter()
        .map(|p| -> Result<Vec<T>> {
            let increments = gaussian_increments(RngStream::new(master_seed, p as u64), n_fine, fine);
            levels
                .iter()
                .map(|(m, dt, times, discount)| -> Result<T> {
                    let (mut w, mut b, mut worst) = (x, T::zero(), T::zero());
                    for (k, chunk) in increments.chunks(*m).enumerate() {
                        let db: T = chunk.iter().copied().sum();
                        let c = node_consumption(pair, times[k], w)?;
                        w = euler_step(pair, market, times[k], w, c, db, *dt)?;
                        b = b + db;
                        let t = times[k + 1];
                        let z = state_price_density(market, t, b);
                        let dual = map.inverse_with(discount[k + 1], t, lambda * z)?;
                        worst = worst.max((w - dual).abs());
                    }
                    Ok(worst)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..dts.len())
        .map(|i| {
            let col: Vec<T> = per_path.iter().map(|v| v[i]).collect();
            pairwise_sum(&col) / T::from_count(n_paths)
        })
        .collect())
}

/// `h(t)` estimate with its standard error and `E[(H − h)^+]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HSample<T> {
    pub t: T,
    pub mean: T,
    pub std_error: T,
    pub positive_part: T,
}

/// `h(t) = E[H(t, c(t, W_t))]` with `W_t = f(t, F(0, x0) Z_t)`; `Z` is
/// sampled exactly at the requested times, so there is no time-stepping
/// bias.
pub fn estimate_h<T: Real>(
    recovered: &RecoveredUtility<T>,
    x0: T,
    t_grid: &[T],
    cfg: &SimConfig<T>,
) -> Result<Vec<HSample<T>>> {
    if t_grid.windows(2).any(|p| p[1] <= p[0]) || t_grid.first().is_some_and(|&t| t < T::zero()) {
        return Err(Error::InvalidParameter("t_grid must be non-negative and strictly increasing".into()));
    }
    if cfg.n_paths < 1 {
        return Err(Error::InvalidParameter("n_paths must be >= 1".into()));
    }
    let map = &recovered.map;
    let market = &map.market;
    let lambda = map.marginal(T::zero(), x0)?;
    let discount = map.discount_profile(t_grid)?;
    let cbars = t_grid.iter().map(|&t| map.cbar(t)).collect::<Result<Vec<_>>>()?;
    let lowers = t_grid
        .iter()
        .zip(&cbars)
        .map(|(&t, &cbar)| match &recovered.h_base {
            Some(c0) => map.consumption_inverse_below(t, c0.eval(t), cbar),
            None => Ok(map.reference.eval(t)),
        })
        .collect::<Result<Vec<_>>>()?;
    let samples = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| -> Result<Vec<T>> {
            let draws = gaussian_increments(RngStream::new(cfg.master_seed, p as u64), t_grid.len(), T::one());
            let (mut b, mut prev_t) = (T::zero(), T::zero());
            let mut out = Vec::with_capacity(t_grid.len());
            for (k, &t) in t_grid.iter().enumerate() {
                b = b + draws[k] * (t - prev_t).sqrt();
                prev_t = t;
                let w = if t == T::zero() {
                    x0
                } else {
                    map.inverse_with(discount[k], t, lambda * state_price_density(market, t, b))?
                };
                out.push(map.antiderivative_in_wealth(discount[k], t, lowers[k], w)?);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let col: Vec<T> = samples.iter().map(|v| v[k]).collect();
            let (mean, std_error) = mean_and_stderr(&col);
            let pos: Vec<T> = col.iter().map(|&h| (h - mean).max(T::zero())).collect();
            HSample { t, mean, std_error, positive_part: pairwise_sum(&pos) / T::from_count(col.len()) }
        })
        .collect())
}
