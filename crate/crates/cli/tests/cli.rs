use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use inverse_merton::market::StrategySurface;
use inverse_merton::montecarlo::SimConfig;
use inverse_merton_cli::config::{JobConfig, SimJob, SurfaceSpec};
use inverse_merton_cli::examples;
use serde_json::Value;
use tempfile::TempDir;

fn invmerton(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_invmerton"));
    cmd.args(args).env_remove("TOOL_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn fixture(name: &str) -> JobConfig {
    examples::all().unwrap().into_iter().find(|j| j.name == name).unwrap()
}

fn write_job(dir: &Path, job: &JobConfig) -> PathBuf {
    let path = dir.join(format!("{}.json", job.name));
    fs::write(&path, job.to_json()).unwrap();
    path
}

fn run_job(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    invmerton(&args, &[])
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn read_xy(path: &Path) -> Vec<(f64, f64)> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].parse().unwrap())
        })
        .collect()
}

fn small_sim(job: &mut JobConfig, n_paths: usize, horizon: f64) {
    job.simulation = Some(SimJob { x0: 1.0, config: SimConfig::new(n_paths, 0.01, horizon, 3).unwrap() });
}

#[test]
fn examples_parse_and_reserialise_identically() {
    let tmp = TempDir::new().unwrap();
    let out = invmerton(&["examples", "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0);
    let mut n = 0;
    for entry in fs::read_dir(tmp.path()).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        let job = JobConfig::from_json(&text).unwrap();
        assert_eq!(job.to_json(), text);
        n += 1;
    }
    assert_eq!(n, examples::all().unwrap().len());
}

#[test]
fn deterministic_crra_is_dara() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_job(tmp.path(), &fixture("crra_det_power"));
    let out = tmp.path().join("out");
    assert_eq!(code(&run_job("det-recover", &cfg, &out, &[])), 0);
    assert_eq!(read_json(&out.join("det_report.json"))["verdict"], "DARA");
    assert!(out.join("det_recovery.csv").exists());
}

#[test]
fn black_check_passes_consistent_and_fails_perturbed_pairs() {
    let tmp = TempDir::new().unwrap();
    let good = write_job(tmp.path(), &fixture("crra_stoch"));
    let bad = write_job(tmp.path(), &fixture("crra_perturbed"));
    let out = tmp.path().join("out");
    assert_eq!(code(&run_job("black-check", &good, &out, &[])), 0);
    assert_eq!(read_json(&out.join("black_report.json"))["verdict"], "consistent");
    assert_eq!(code(&run_job("black-check", &bad, &out, &[])), 1);
    assert_eq!(read_json(&out.join("black_report.json"))["verdict"], "inconsistent");
}

#[test]
fn force_overrides_the_consistency_gate() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_job(tmp.path(), &fixture("crra_perturbed"));
    let out = tmp.path().join("out");
    assert_eq!(code(&run_job("recover", &cfg, &out, &[])), 1);
    assert!(!out.join("recover_report.json").exists());
    let forced = run_job("recover", &cfg, &out, &["--force"]);
    assert_eq!(code(&forced), 0, "{}", String::from_utf8_lossy(&forced.stderr));
    assert_eq!(read_json(&out.join("recover_report.json"))["verified"], false);
}

#[test]
fn budget_fails_without_consumption() {
    let tmp = TempDir::new().unwrap();
    let mut job = fixture("crra_stoch");
    job.pair.consumption = SurfaceSpec::Family(StrategySurface::Linear { coef: 0.0 });
    small_sim(&mut job, 200, 5.0);
    let cfg = write_job(tmp.path(), &job);
    let out = tmp.path().join("out");
    assert_eq!(code(&run_job("budget", &cfg, &out, &[])), 1);
    assert_eq!(read_json(&out.join("budget_report.json"))["pass"], false);
}

#[test]
fn bad_input_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let text = fixture("crra_det_power").to_json();

    let unknown = tmp.path().join("unknown.json");
    fs::write(&unknown, text.replacen("\"name\"", "\"colour\": 1,\n  \"name\"", 1)).unwrap();
    assert_eq!(code(&run_job("det-recover", &unknown, &out, &[])), 2);

    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["det"].as_object_mut().unwrap().remove("weight");
    let no_weight = tmp.path().join("no_weight.json");
    fs::write(&no_weight, v.to_string()).unwrap();
    let o = run_job("det-recover", &no_weight, &out, &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("weight"));

    let missing_section = write_job(tmp.path(), &fixture("crra_det_power"));
    assert_eq!(code(&run_job("black-check", &missing_section, &out, &[])), 2);
    assert_eq!(code(&run_job("recover", &tmp.path().join("absent.json"), &out, &[])), 2);
    assert_eq!(code(&invmerton(&["det-recover", "--out", out.to_str().unwrap()], &[])), 2);
    let examples_dir = tmp.path().join("ex");
    let threads = invmerton(&["examples", "--out", examples_dir.to_str().unwrap()], &[("TOOL_THREADS", "zero")]);
    assert_eq!(code(&threads), 2);
}

#[test]
fn numerical_failure_exits_with_three() {
    let tmp = TempDir::new().unwrap();
    let mut job = fixture("crra_stoch");
    job.pair.investment = Some(SurfaceSpec::Family(StrategySurface::Linear { coef: 0.0 }));
    let cfg = write_job(tmp.path(), &job);
    let o = run_job("black-check", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let mut job = fixture("convex_c");
    small_sim(&mut job, 64, 1.0);
    let cfg = write_job(tmp.path(), &job);
    let mut outputs = Vec::new();
    for threads in ["1", "4", "4"] {
        let out = tmp.path().join(format!("out{}", outputs.len()));
        let args = ["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        assert_eq!(code(&invmerton(&args, &[("TOOL_THREADS", threads)])), 0);
        outputs.push((fs::read(out.join("paths.csv")).unwrap(), fs::read(out.join("simulate_report.json")).unwrap()));
    }
    assert!(outputs.windows(2).all(|p| p[0] == p[1]));
}

fn write_table(path: &Path, surface: &StrategySurface<f64>) {
    let mut wtr = csv::Writer::from_path(path).unwrap();
    wtr.write_record(["t", "w", "value"]).unwrap();
    for k in 0..=400 {
        let w = 0.05 * k as f64;
        wtr.write_record([0.0.to_string(), w.to_string(), surface.value(0.0, w).unwrap().to_string()]).unwrap();
    }
    wtr.flush().unwrap();
}

fn family_surface(spec: &SurfaceSpec) -> &StrategySurface<f64> {
    match spec {
        SurfaceSpec::Family(s) => s,
        SurfaceSpec::Csv { .. } => panic!("fixtures use parametric surfaces"),
    }
}

#[test]
fn tabulated_surfaces_reproduce_the_family_verdicts() {
    let tmp = TempDir::new().unwrap();
    for (name, expected) in [("crra_stoch", 0), ("crra_perturbed", 1)] {
        let family = fixture(name);
        let mut tabulated = family.clone();
        tabulated.name = format!("{name}_table");
        write_table(&tmp.path().join(format!("{name}_c.csv")), family_surface(&family.pair.consumption));
        write_table(&tmp.path().join(format!("{name}_pi.csv")), family_surface(family.pair.investment.as_ref().unwrap()));
        tabulated.pair.consumption = SurfaceSpec::Csv { csv: format!("{name}_c.csv").into() };
        tabulated.pair.investment = Some(SurfaceSpec::Csv { csv: format!("{name}_pi.csv").into() });
        if let Some(b) = tabulated.black.as_mut() {
            b.w_probes = Some(vec![0.5, 1.0, 2.0, 5.0, 10.0]);
        }
        let mut family = family;
        family.black.as_mut().unwrap().w_probes = Some(vec![0.5, 1.0, 2.0, 5.0, 10.0]);
        let out = tmp.path().join("out");
        let a = code(&run_job("black-check", &write_job(tmp.path(), &family), &out, &[]));
        let b = code(&run_job("black-check", &write_job(tmp.path(), &tabulated), &out, &[]));
        assert_eq!((a, b), (expected, expected), "{name}");
    }
}

#[test]
fn convex_consumption_figure_data_has_the_expected_shape() {
    let tmp = TempDir::new().unwrap();
    let mut job = fixture("convex_c");
    job.recover.as_mut().unwrap().mc = None;
    let cfg = write_job(tmp.path(), &job);
    let out = tmp.path().join("out");
    let o = run_job("recover", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("recover_report.json"));
    assert_eq!(report["risk"]["absolute"]["verdict"], "DARA");

    let increasing = |xy: &[(f64, f64)]| xy.windows(2).all(|p| p[1].0 > p[0].0 && p[1].1 > p[0].1);
    let second_diffs = |xy: &[(f64, f64)]| -> Vec<f64> {
        xy.windows(3)
            .map(|p| {
                let s1 = (p[1].1 - p[0].1) / (p[1].0 - p[0].0);
                let s2 = (p[2].1 - p[1].1) / (p[2].0 - p[1].0);
                s2 - s1
            })
            .collect()
    };
    let pi = read_xy(&out.join("plot_pi.csv"));
    let c = read_xy(&out.join("plot_c.csv"));
    let rho = read_xy(&out.join("plot_rho.csv"));
    let u = read_xy(&out.join("plot_u.csv"));
    assert!(pi.len() >= 50 && rho.len() >= 50 && u.len() >= 50);
    assert!(increasing(&pi));
    assert!(increasing(&c));
    assert!(second_diffs(&c).iter().all(|&d| d > -1e-12));
    assert!(rho.windows(2).all(|p| p[1].0 > p[0].0 && p[1].1 < p[0].1));
    assert!(increasing(&u));
    assert!(second_diffs(&u).iter().all(|&d| d < 1e-9));
}
