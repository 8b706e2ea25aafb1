//! Built-in fixture configs for the `examples` subcommand.

use inverse_merton::blackpde::{timehom_consumption, BlackConfig};
use inverse_merton::deterministic::{DetConfig, WeightFunction};
use inverse_merton::market::{MarketParams, StrategySurface, TimeFunction};
use inverse_merton::montecarlo::SimConfig;

use crate::config::{BlackJob, DetJob, Grid, JobConfig, PairSpec, PlotSpec, RecoverJob, SimJob, Spacing, SurfaceSpec};
use crate::error::CliError;

fn market(r: f64, sigma: f64, theta: f64) -> MarketParams<f64> {
    MarketParams { r, sigma, theta }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Grid {
    Grid::Spaced(Spacing { lo, hi, n, log: true })
}

fn sim(n_paths: usize, dt: f64, horizon: f64, master_seed: u64) -> SimConfig<f64> {
    SimConfig { n_paths, dt, horizon, master_seed, scheme: Default::default() }
}

fn det_job(name: &str, c: StrategySurface<f64>, weight: WeightFunction<f64>, times: Vec<f64>, c_grid: Grid) -> JobConfig {
    JobConfig {
        name: name.into(),
        market: market(0.03, 0.2, 0.08),
        pair: PairSpec { consumption: SurfaceSpec::Family(c), investment: None, wealth_bound: None },
        det: Some(DetJob { weight, times, c_grid, probe_x: vec![0.5, 1.0, 2.0, 4.0], config: DetConfig::default() }),
        black: None,
        recover: None,
        simulation: None,
    }
}

struct Stoch {
    name: &'static str,
    market: MarketParams<f64>,
    c: StrategySurface<f64>,
    pi: StrategySurface<f64>,
    wealth_bound: Option<TimeFunction<f64>>,
    reference: TimeFunction<f64>,
    c_grid: Grid,
    t0: f64,
    x0: f64,
    sim: SimConfig<f64>,
}

fn stoch_job(s: Stoch) -> JobConfig {
    let black = BlackJob {
        t_probes: vec![0.0, 1.0, 5.0],
        w_probes: None,
        reference: s.reference,
        tolerances: BlackConfig::default(),
    };
    let recover = RecoverJob {
        t_grid: vec![0.1, 1.0, 5.0],
        c_grid: s.c_grid,
        reference: s.reference,
        h_base: None,
        x0: s.x0,
        mc: Some(sim(2000, 0.1, 5.0, 7)),
        risk_tol: inverse_merton::risk::VERDICT_TOL,
        probe_times: None,
        plot: PlotSpec { t0: s.t0, ..PlotSpec::default() },
        theta_hat: None,
    };
    JobConfig {
        name: s.name.into(),
        market: s.market,
        pair: PairSpec {
            consumption: SurfaceSpec::Family(s.c),
            investment: Some(SurfaceSpec::Family(s.pi)),
            wealth_bound: s.wealth_bound,
        },
        det: None,
        black: Some(black),
        recover: Some(recover),
        simulation: Some(SimJob { x0: s.x0, config: s.sim }),
    }
}

fn power_shift(
    name: &'static str,
    m: MarketParams<f64>,
    phi: f64,
    psi: f64,
    p: f64,
) -> Result<JobConfig, CliError> {
    let pi = StrategySurface::PowerShift { phi, psi, p };
    let c = timehom_consumption(&pi, TimeFunction::Constant(10.0), &m)?.consumption;
    Ok(stoch_job(Stoch {
        name,
        market: m,
        c,
        pi,
        wealth_bound: None,
        reference: TimeFunction::Constant(1.0),
        c_grid: log_grid(0.5, 20.0, 12),
        t0: 0.1,
        x0: 1.0,
        sim: sim(2000, 1e-4, 2.0, 2024),
    }))
}

/// Every fixture config; `name` doubles as the file stem.
pub fn all() -> Result<Vec<JobConfig>, CliError> {
    let crra_c = StrategySurface::Linear { coef: 0.1 };
    let crra_times = vec![0.0, 1.0, 5.0];
    let crra_grid = log_grid(0.05, 1.0, 20);
    let g_times = vec![0.5, 1.0, 2.0];
    let power = WeightFunction::PowerTail { r: 2.0 };
    let mut jobs = vec![
        det_job("crra_det_power", crra_c.clone(), power.clone(), crra_times.clone(), crra_grid.clone()),
        det_job(
            "crra_det_gauss",
            crra_c.clone(),
            WeightFunction::Gaussian { eta: 0.5 },
            crra_times.clone(),
            crra_grid.clone(),
        ),
        det_job("crra_det_exp", crra_c, WeightFunction::Exp { zeta: 1.5 }, crra_times, crra_grid),
        det_job("gexp_det_power", StrategySurface::GExp, power.clone(), g_times.clone(), log_grid(0.01, 0.2, 15)),
        det_job("glog_det_power", StrategySurface::GLog, power, g_times, log_grid(0.01, 0.2, 15)),
    ];
    let mut perturbed = stoch_job(Stoch {
        name: "crra_perturbed",
        c: StrategySurface::ExpShiftLinear { kappa: 0.1, alpha: 0.05, a: 1.0 },
        sim: sim(1000, 0.01, 10.0, 2024),
        ..crra_fixture()
    });
    perturbed.recover.as_mut().expect("stochastic job").mc = None;
    jobs.push(stoch_job(crra_fixture()));
    jobs.push(perturbed);
    jobs.push(stoch_job(Stoch {
        name: "convex_c",
        market: market(0.6, 0.25, 0.95),
        c: StrategySurface::ExpShiftLinear { kappa: 0.4, alpha: 0.1, a: 1.25 },
        pi: StrategySurface::SqrtConvex { sigma: 0.25, r: 0.6, kappa: 0.4, alpha: 0.1, a: 1.25 },
        wealth_bound: None,
        reference: TimeFunction::Constant(1.0),
        c_grid: log_grid(0.01, 2.0, 12),
        t0: 0.1,
        x0: 1.0,
        sim: sim(20_000, 0.01, 30.0, 2024),
    }));
    jobs.push(stoch_job(Stoch {
        name: "bounded_wealth",
        market: market(0.5, 0.25, 0.7),
        c: StrategySurface::CubicBounded { r: 0.5, sigma: 0.25, beta: 0.1 },
        pi: StrategySurface::LogisticBounded,
        wealth_bound: Some(TimeFunction::Constant(1.0)),
        reference: TimeFunction::Constant(0.5),
        c_grid: log_grid(0.01, 0.45, 12),
        t0: 1.0,
        x0: 0.5,
        sim: sim(1000, 1e-3, 10.0, 11),
    }));
    jobs.push(stoch_job(Stoch {
        name: "bounded_cons",
        market: market(0.0, 0.5, 0.25),
        c: StrategySurface::ExpBoundedConsumption { beta: 0.3, sigma: 0.5 },
        pi: StrategySurface::ExpBounded,
        wealth_bound: None,
        reference: TimeFunction::Constant(2f64.ln()),
        c_grid: log_grid(0.01, 0.28, 12),
        t0: 0.1,
        x0: 1.0,
        sim: sim(100_000, 0.01, 60.0, 2024),
    }));
    jobs.push(power_shift("convex_convex", market(0.3, 0.25, 0.026), 2.1, -60.0, 1.0 / 30.0)?);
    jobs.push(power_shift("concave_concave", market(0.05, 0.25, 0.13), 0.5, 60.0, 0.2)?);
    Ok(jobs)
}

fn crra_fixture() -> Stoch {
    Stoch {
        name: "crra_stoch",
        market: market(0.03, 0.2, 0.08),
        c: StrategySurface::Linear { coef: 0.1 },
        pi: StrategySurface::Linear { coef: 0.5 },
        wealth_bound: None,
        reference: TimeFunction::Constant(1.0),
        c_grid: log_grid(0.05, 1.0, 10),
        t0: 0.1,
        x0: 1.0,
        sim: sim(100_000, 0.01, 60.0, 2024),
    }
}
