//! Job configuration: one JSON file per job, parsed strictly.

use std::fs::File;
use std::path::{Path, PathBuf};

use inverse_merton::blackpde::BlackConfig;
use inverse_merton::deterministic::{DetConfig, WeightFunction};
use inverse_merton::market::{MarketParams, StrategyPair, StrategySurface, TabulatedSurface, TimeFunction};
use inverse_merton::montecarlo::SimConfig;
use inverse_merton::numerics::log_spaced;
use inverse_merton::risk::VERDICT_TOL;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub name: String,
    pub market: MarketParams<f64>,
    pub pair: PairSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub det: Option<DetJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub black: Option<BlackJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recover: Option<RecoverJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimJob>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub consumption: SurfaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub investment: Option<SurfaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wealth_bound: Option<TimeFunction<f64>>,
}

/// A parametric family, or `{"csv": path}` for a `t,w,value` table. Paths
/// are relative to the config file.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum SurfaceSpec {
    Csv { csv: PathBuf },
    Family(StrategySurface<f64>),
}

impl<'de> Deserialize<'de> for SurfaceSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Csv {
            csv: PathBuf,
        }
        let v = serde_json::Value::deserialize(d)?;
        if v.get("csv").is_some() {
            let c: Csv = serde_json::from_value(v).map_err(D::Error::custom)?;
            return Ok(SurfaceSpec::Csv { csv: c.csv });
        }
        serde_json::from_value(v).map(SurfaceSpec::Family).map_err(D::Error::custom)
    }
}

/// Explicit values, or `n` points from `lo` to `hi` (log-spaced with `log`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Spaced(Spacing),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spacing {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    #[serde(default)]
    pub log: bool,
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let pts = match self {
            Grid::Values(v) => v.clone(),
            Grid::Spaced(s) => {
                if s.n < 2 || !(s.lo < s.hi) || (s.log && !(s.lo > 0.0)) {
                    return Err(CliError::Config(format!("bad grid spacing {s:?}")));
                }
                if s.log {
                    log_spaced(s.lo, s.hi, s.n)
                } else {
                    (0..s.n).map(|k| s.lo + (s.hi - s.lo) * k as f64 / (s.n - 1) as f64).collect()
                }
            }
        };
        if pts.is_empty() || pts.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config("grids must be non-empty and finite".into()));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetJob {
    pub weight: WeightFunction<f64>,
    pub times: Vec<f64>,
    pub c_grid: Grid,
    /// Initial wealths at which the verdict is probed, for every time.
    #[serde(default = "default_probe_x")]
    pub probe_x: Vec<f64>,
    #[serde(default)]
    pub config: DetConfig<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlackJob {
    #[serde(default = "default_times")]
    pub t_probes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_probes: Option<Vec<f64>>,
    #[serde(default = "unit_reference")]
    pub reference: TimeFunction<f64>,
    #[serde(default)]
    pub tolerances: BlackConfig<f64>,
}

impl Default for BlackJob {
    fn default() -> Self {
        Self {
            t_probes: default_times(),
            w_probes: None,
            reference: unit_reference(),
            tolerances: BlackConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverJob {
    pub t_grid: Vec<f64>,
    pub c_grid: Grid,
    #[serde(default = "unit_reference")]
    pub reference: TimeFunction<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_base: Option<TimeFunction<f64>>,
    #[serde(default = "unit")]
    pub x0: f64,
    /// Monte-Carlo settings for `h(t)`; skipped when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<SimConfig<f64>>,
    #[serde(default = "default_risk_tol")]
    pub risk_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_times: Option<Vec<f64>>,
    #[serde(default)]
    pub plot: PlotSpec,
    /// Sharpe ratio for the remapped inverse marginal utility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotSpec {
    pub t0: f64,
    /// Right end of the wealth axis; defaults to just below the wealth
    /// bound, or 5.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_max: Option<f64>,
    pub n: usize,
}

impl Default for PlotSpec {
    fn default() -> Self {
        Self { t0: 0.1, w_max: None, n: 60 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimJob {
    pub x0: f64,
    pub config: SimConfig<f64>,
}

fn default_probe_x() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}

fn default_times() -> Vec<f64> {
    vec![0.0, 1.0, 5.0]
}

fn unit_reference() -> TimeFunction<f64> {
    TimeFunction::Constant(1.0)
}

fn unit() -> f64 {
    1.0
}

fn default_risk_tol() -> f64 {
    VERDICT_TOL
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be > 0, got {v}")))
    }
}

fn non_negative(name: &str, vs: &[f64]) -> Result<(), CliError> {
    if vs.is_empty() || vs.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(CliError::Config(format!("{name} must be a non-empty list of values >= 0")));
    }
    Ok(())
}

fn config_err(e: inverse_merton::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl JobConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let job: JobConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        job.validate()?;
        Ok(job)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialises");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.trim().is_empty() {
            return Err(CliError::Config("name must not be empty".into()));
        }
        self.market.validate_allow_zero_theta().map_err(config_err)?;
        if let Some(d) = &self.det {
            d.weight.validate().map_err(config_err)?;
            d.config.validate().map_err(config_err)?;
            non_negative("det.times", &d.times)?;
            d.c_grid.points()?;
            non_negative("det.probe_x", &d.probe_x)?;
        }
        if let Some(b) = &self.black {
            b.tolerances.validate().map_err(config_err)?;
            non_negative("black.t_probes", &b.t_probes)?;
            if let Some(w) = &b.w_probes {
                non_negative("black.w_probes", w)?;
            }
        }
        if let Some(r) = &self.recover {
            non_negative("recover.t_grid", &r.t_grid)?;
            r.c_grid.points()?;
            positive("recover.risk_tol", r.risk_tol)?;
            positive("recover.x0", r.x0)?;
            if let Some(mc) = &r.mc {
                mc.validate().map_err(config_err)?;
            }
            if let Some(ts) = &r.probe_times {
                non_negative("recover.probe_times", ts)?;
            }
            non_negative("recover.plot.t0", &[r.plot.t0])?;
            if let Some(w) = r.plot.w_max {
                positive("recover.plot.w_max", w)?;
            }
            if r.plot.n < 2 {
                return Err(CliError::Config("recover.plot.n must be >= 2".into()));
            }
            if let Some(th) = r.theta_hat {
                positive("recover.theta_hat", th)?;
            }
        }
        if let Some(s) = &self.simulation {
            s.config.validate().map_err(config_err)?;
            if !(s.x0 >= 0.0) || !s.x0.is_finite() {
                return Err(CliError::Config(format!("simulation.x0 must be >= 0, got {}", s.x0)));
            }
        }
        Ok(())
    }
}

/// A parsed job together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedJob {
    pub job: JobConfig,
    pub base: PathBuf,
}

impl LoadedJob {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let job = JobConfig::from_json(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { job, base })
    }

    pub fn surface(&self, spec: &SurfaceSpec) -> Result<StrategySurface<f64>, CliError> {
        match spec {
            SurfaceSpec::Family(s) => Ok(s.clone()),
            SurfaceSpec::Csv { csv } => {
                let path = self.base.join(csv);
                let file =
                    File::open(&path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                let table = TabulatedSurface::from_csv(file)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                Ok(StrategySurface::Tabulated(table))
            }
        }
    }

    pub fn consumption(&self) -> Result<StrategySurface<f64>, CliError> {
        self.surface(&self.job.pair.consumption)
    }

    /// Both surfaces; fails if the investment rule is missing.
    pub fn pair(&self) -> Result<StrategyPair<f64>, CliError> {
        let spec = self
            .job
            .pair
            .investment
            .as_ref()
            .ok_or_else(|| CliError::Config("pair.investment is required for this command".into()))?;
        let mut pair = StrategyPair::new(self.consumption()?, self.surface(spec)?);
        if let Some(b) = self.job.pair.wealth_bound {
            pair = pair.with_wealth_bound(b);
        }
        Ok(pair)
    }
}
