//! One function per subcommand. Each writes its artifacts under `out` and
//! reports whether the domain check passed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use inverse_merton::blackpde::{
    check_consistency, recover_utility, sharpe_remap, BetaSample, Consistency, RecoverConfig, RegularityReport,
    SharpeRemap,
};
use inverse_merton::deterministic::{classify_risk_det, recover_marginal_utility, WeightFunction};
use inverse_merton::montecarlo::{simulate, verify_budget, BudgetReport, HSample};
use inverse_merton::risk::{
    classify_dara_stoch, classify_drra, classify_from_utility, default_probe_times, default_probes,
    rho_from_strategy, route_disagreement, Measure, RiskVerdict, VerdictBlock,
};
use serde::Serialize;

use crate::config::{BlackJob, LoadedJob};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(out)?;
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn write_json<S: Serialize>(out: &Path, name: &str, value: &S) -> Result<(), CliError> {
    let mut w = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_rows<const N: usize>(
    out: &Path,
    name: &str,
    header: [&str; N],
    rows: impl IntoIterator<Item = [f64; N]>,
) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(create(out, name)?);
    wtr.write_record(header).map_err(inverse_merton::Error::from)?;
    for row in rows {
        wtr.write_record(row.map(|v| v.to_string())).map_err(inverse_merton::Error::from)?;
    }
    wtr.flush()?;
    Ok(())
}

fn section<'a, S>(s: &'a Option<S>, name: &str) -> Result<&'a S, CliError> {
    s.as_ref().ok_or_else(|| CliError::Config(format!("this command needs a \"{name}\" section")))
}

#[derive(Serialize)]
struct DetReport<'a> {
    name: &'a str,
    weight: &'a WeightFunction<f64>,
    verdict: RiskVerdict,
    min_margin: f64,
    max_margin: f64,
    n_probes: usize,
    /// `(t, c̄(t))`.
    cbar: Vec<(f64, f64)>,
}

pub fn det_recover(loaded: &LoadedJob, out: &Path) -> Result<Outcome, CliError> {
    let job = &loaded.job;
    let det = section(&job.det, "det")?;
    let c = loaded.consumption()?;
    let grid = det.c_grid.points()?;
    let mut rows = Vec::new();
    let mut cbar = Vec::new();
    for &t in &det.times {
        let rec = recover_marginal_utility(&c, &det.weight, t, &grid, &det.config)?;
        cbar.push((t, rec.cbar));
        for k in 0..rec.c_grid.len() {
            rows.push([t, rec.c_grid[k], rec.y_of_c[k], rec.uc[k], rec.ucc[k], rec.rho[k]]);
        }
    }
    write_rows(out, "det_recovery.csv", ["t", "c", "y", "u_c", "u_cc", "rho"], rows)?;
    let probes: Vec<(f64, f64)> =
        det.times.iter().flat_map(|&t| det.probe_x.iter().map(move |&x| (t, x))).collect();
    let risk = classify_risk_det(&c, &det.weight, &probes, &det.config)?;
    write_rows(
        out,
        "det_margins.csv",
        ["t", "x", "margin", "scale"],
        risk.probes.iter().map(|p| [p.t, p.x, p.margin, p.scale]),
    )?;
    let report = DetReport {
        name: &job.name,
        weight: &det.weight,
        verdict: risk.verdict,
        min_margin: risk.min_margin,
        max_margin: risk.max_margin,
        n_probes: risk.probes.len(),
        cbar,
    };
    write_json(out, "det_report.json", &report)?;
    println!("det-recover {}: {}", job.name, risk.verdict);
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct BlackReport<'a> {
    name: &'a str,
    verdict: Consistency,
    max_residual: f64,
    max_flatness: f64,
    res_tol: f64,
    flat_tol: f64,
    beta: &'a [BetaSample<f64>],
}

pub fn black_check(loaded: &LoadedJob, out: &Path) -> Result<Outcome, CliError> {
    let job = &loaded.job;
    job.market.validate()?;
    let black = job.black.clone().unwrap_or_default();
    let pair = loaded.pair()?;
    let w_probes = black.w_probes.clone().unwrap_or_else(|| inverse_merton::blackpde::default_w_probes(&pair));
    let report = check_consistency(&pair, &job.market, &black.t_probes, &w_probes, &black.reference, &black.tolerances)?;
    report.write_csv(create(out, "black_residuals.csv")?)?;
    write_json(
        out,
        "black_report.json",
        &BlackReport {
            name: &job.name,
            verdict: report.verdict,
            max_residual: report.max_residual,
            max_flatness: report.max_flatness,
            res_tol: black.tolerances.res_tol,
            flat_tol: black.tolerances.flat_tol,
            beta: &report.beta,
        },
    )?;
    println!(
        "black-check {}: {:?} (max residual {:.3e}, max flatness {:.3e})",
        job.name, report.verdict, report.max_residual, report.max_flatness
    );
    Ok(if report.is_consistent() { Outcome::Pass } else { Outcome::Fail })
}

#[derive(Serialize)]
struct ConsistencySummary {
    verdict: Consistency,
    max_residual: f64,
    max_flatness: f64,
}

#[derive(Serialize)]
struct RiskSummary {
    absolute: VerdictBlock<f64>,
    relative: VerdictBlock<f64>,
    absolute_from_utility: VerdictBlock<f64>,
    /// Largest relative gap between the two routes to `ρ`.
    route_gap: f64,
}

#[derive(Serialize)]
struct RecoverReport<'a> {
    name: &'a str,
    /// False when the consistency check failed and recovery was forced.
    verified: bool,
    consistency: ConsistencySummary,
    regularity: &'a RegularityReport<f64>,
    risk: RiskSummary,
    discount: &'a [(f64, f64)],
    beta: &'a [(f64, f64)],
    cbar: &'a [(f64, f64)],
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<&'a [HSample<f64>]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    remap: Option<SharpeRemap<f64>>,
}

pub fn recover(loaded: &LoadedJob, out: &Path, force: bool) -> Result<Outcome, CliError> {
    let job = &loaded.job;
    job.market.validate()?;
    let params = section(&job.recover, "recover")?;
    let black: BlackJob = job.black.clone().unwrap_or_default();
    let pair = loaded.pair()?;
    let cfg = RecoverConfig {
        reference: params.reference,
        h_base: params.h_base,
        x0: params.x0,
        force,
        black: black.tolerances,
        w_probes: black.w_probes.clone(),
    };
    let rec = recover_utility(&pair, &job.market, &params.t_grid, &params.c_grid.points()?, &cfg, params.mc.as_ref())?;
    if !rec.verified {
        eprintln!("warning: {} failed the consistency check; results are not verified", job.name);
    }
    rec.write_csv(create(out, "utility.csv")?)?;

    let times = params.probe_times.clone().unwrap_or_else(default_probe_times);
    let probes = default_probes(&rec.map, &times)?;
    let absolute = classify_dara_stoch(&pair, &job.market, &probes, params.risk_tol)?;
    let relative = classify_drra(&pair, &job.market, &probes, params.risk_tol)?;
    let from_utility = classify_from_utility(&rec, &probes, Measure::Absolute, params.risk_tol)?;
    let route_gap = route_disagreement(&pair, &job.market, &rec, &probes)?;
    absolute.write_csv(create(out, "rho.csv")?)?;

    if let Some(h) = &rec.h {
        write_rows(
            out,
            "h.csv",
            ["t", "mean", "std_error", "positive_part"],
            h.iter().map(|s| [s.t, s.mean, s.std_error, s.positive_part]),
        )?;
    }

    let t0 = params.plot.t0;
    let wbar = pair.wbar(t0);
    let w_max = params.plot.w_max.unwrap_or_else(|| wbar.map_or(5.0, |b| 0.99 * b));
    let n = params.plot.n;
    let ws: Vec<f64> = (1..=n).map(|k| w_max * k as f64 / n as f64).collect();
    let mut pi_rows = Vec::with_capacity(n);
    let mut c_rows = Vec::with_capacity(n);
    let mut rho_rows = Vec::with_capacity(n);
    let mut u_rows = Vec::with_capacity(n);
    let cbar = rec.map.cbar(t0)?;
    for &w in &ws {
        let c = pair.c(t0, w)?;
        pi_rows.push([w, pair.pi(t0, w)?]);
        c_rows.push([w, c]);
        if c > 0.0 && c < cbar {
            rho_rows.push([c, rho_from_strategy(&pair, &job.market, t0, c)?]);
            u_rows.push([c, rec.big_h(t0, c)?]);
        }
    }
    write_rows(out, "plot_pi.csv", ["w", "pi"], pi_rows)?;
    write_rows(out, "plot_c.csv", ["w", "c"], c_rows)?;
    write_rows(out, "plot_rho.csv", ["c", "rho"], rho_rows)?;
    write_rows(out, "plot_u.csv", ["c", "u"], u_rows)?;

    let remap = match params.theta_hat {
        Some(th) => {
            let remap = sharpe_remap(&job.market, th)?;
            let lambda = rec.marginal(0.0, params.x0)?;
            let mut rows = Vec::new();
            for &t in &params.t_grid {
                for z in [0.5 * lambda, lambda, 2.0 * lambda] {
                    let base = rec.map.inverse_marginal_utility(t, z)?;
                    let hat = remap.apply(|t, z| rec.map.inverse_marginal_utility(t, z).unwrap_or(f64::NAN), t, z);
                    if !hat.is_finite() {
                        return Err(inverse_merton::Error::NonFinite(format!("in remapped inverse at t={t}, z={z}")).into());
                    }
                    rows.push([t, z, base, hat]);
                }
            }
            write_rows(out, "remap.csv", ["t", "z", "I", "I_hat"], rows)?;
            Some(remap)
        }
        None => None,
    };

    let report = RecoverReport {
        name: &job.name,
        verified: rec.verified,
        consistency: ConsistencySummary {
            verdict: rec.consistency.verdict,
            max_residual: rec.consistency.max_residual,
            max_flatness: rec.consistency.max_flatness,
        },
        regularity: &rec.regularity,
        risk: RiskSummary {
            absolute: absolute.verdict_block(),
            relative: relative.verdict_block(),
            absolute_from_utility: from_utility.verdict_block(),
            route_gap,
        },
        discount: &rec.discount,
        beta: &rec.beta,
        cbar: &rec.cbar,
        h: rec.h.as_deref(),
        remap,
    };
    write_json(out, "recover_report.json", &report)?;
    println!(
        "recover {}: {} / {}{}",
        job.name,
        absolute.verdict,
        relative.verdict,
        if rec.verified { "" } else { " (not verified)" }
    );
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    name: &'a str,
    x0: f64,
    n_paths: usize,
    n_steps: usize,
    dt: f64,
    horizon: f64,
    master_seed: u64,
    max_wealth: f64,
    mean_terminal_wealth: f64,
    mean_terminal_zw: f64,
}

pub fn simulate_cmd(loaded: &LoadedJob, out: &Path) -> Result<Outcome, CliError> {
    let job = &loaded.job;
    let sim = section(&job.simulation, "simulation")?;
    let pair = loaded.pair()?;
    let ens = simulate(&pair, &job.market, sim.x0, &sim.config)?;
    ens.write_csv(create(out, "paths.csv")?)?;
    let n = ens.wealth.len() as f64;
    let last = ens.times.len() - 1;
    let report = SimulateReport {
        name: &job.name,
        x0: sim.x0,
        n_paths: sim.config.n_paths,
        n_steps: sim.config.n_steps(),
        dt: sim.config.dt,
        horizon: sim.config.horizon,
        master_seed: sim.config.master_seed,
        max_wealth: ens.wealth.iter().flatten().copied().fold(0.0, f64::max),
        mean_terminal_wealth: ens.wealth.iter().map(|p| p[last]).sum::<f64>() / n,
        mean_terminal_zw: ens.wealth.iter().zip(&ens.density).map(|(w, z)| w[last] * z[last]).sum::<f64>() / n,
    };
    write_json(out, "simulate_report.json", &report)?;
    println!("simulate {}: {} paths x {} steps", job.name, report.n_paths, report.n_steps);
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct BudgetOut<'a> {
    name: &'a str,
    #[serde(flatten)]
    report: BudgetReport<f64>,
}

pub fn budget(loaded: &LoadedJob, out: &Path) -> Result<Outcome, CliError> {
    let job = &loaded.job;
    let sim = section(&job.simulation, "simulation")?;
    let pair = loaded.pair()?;
    let report = verify_budget(&pair, &job.market, sim.x0, &sim.config)?;
    write_json(out, "budget_report.json", &BudgetOut { name: &job.name, report })?;
    println!(
        "budget {}: {} (estimate {:.6} + tail {:.2e} vs {}, se {:.2e})",
        job.name,
        if report.pass { "PASS" } else { "FAIL" },
        report.estimate,
        report.truncation_adjustment,
        report.target,
        report.std_error
    );
    Ok(if report.pass { Outcome::Pass } else { Outcome::Fail })
}
