use inverse_merton::deterministic::{
    classify_risk_det, invert_consumption, recover_marginal_utility, wealth_at, DetConfig, WeightFunction,
};
use inverse_merton::market::StrategySurface;
use inverse_merton::numerics::log_spaced;
use proptest::prelude::*;

fn fixtures() -> Vec<StrategySurface<f64>> {
    vec![StrategySurface::Linear { coef: 0.1 }, StrategySurface::GLog, StrategySurface::GExp]
}

fn weights() -> Vec<WeightFunction<f64>> {
    vec![
        WeightFunction::PowerTail { r: 2.0 },
        WeightFunction::Gaussian { eta: 0.5 },
        WeightFunction::Exp { zeta: 1.5 },
    ]
}

fn consumption_from(c: &StrategySurface<f64>, x: f64, t: f64, cfg: &DetConfig<f64>) -> f64 {
    c.value(t, wealth_at(c, x, t, cfg).unwrap()).unwrap()
}

#[test]
fn inverse_wealth_round_trip() {
    let cfg = DetConfig::default();
    for c in fixtures() {
        for t in [0.5, 1.0, 5.0] {
            for x in [0.5, 1.0, 2.0] {
                let value = consumption_from(&c, x, t, &cfg);
                let y = invert_consumption(&c, t, value, &cfg).unwrap();
                assert!((y / x - 1.0).abs() <= 1e-5, "{c:?} t={t} x={x}: {y}");
            }
        }
    }
}

#[test]
fn marginal_utility_decreasing_and_vanishing_at_frontier() {
    let cfg = DetConfig::default();
    for c in fixtures() {
        for weight in weights() {
            for t in [0.5, 1.0, 5.0] {
                let lo = consumption_from(&c, 0.05, t, &cfg);
                let hi = consumption_from(&c, 5.0 / t, t, &cfg);
                let grid = log_spaced(lo, hi, 25);
                let rec = recover_marginal_utility(&c, &weight, t, &grid, &cfg).unwrap();
                assert!(rec.uc.iter().all(|&u| u >= 0.0));
                assert!(rec.uc.windows(2).all(|p| p[1] < p[0]), "{c:?} {weight:?} t={t}");
                assert!(rec.y_of_c.windows(2).all(|p| p[1] > p[0]));
            }
        }
    }
    // G = 1 − e^{−z} saturates at c̄(t) = 1/t².
    let c = StrategySurface::GExp;
    let weight = WeightFunction::Exp { zeta: 1.0 };
    let rec = recover_marginal_utility(&c, &weight, 1.0, &[0.9, 0.99, 0.999], &cfg).unwrap();
    assert!((rec.cbar - 1.0).abs() <= 1e-9);
    assert!(rec.uc.windows(2).all(|p| p[1] < p[0]) && rec.uc[2] < 1e-3);
}

#[test]
fn first_order_condition_constant_in_time() {
    let cfg = DetConfig::default();
    for c in fixtures() {
        for weight in weights() {
            for x in [0.5, 1.0, 2.0] {
                let lambda = weight.tail(x);
                for t in [0.5, 1.0, 5.0] {
                    let value = consumption_from(&c, x, t, &cfg);
                    let uc = recover_marginal_utility(&c, &weight, t, &[value], &cfg).unwrap().uc[0];
                    assert!((uc / lambda - 1.0).abs() <= 1e-5, "{c:?} {weight:?} x={x} t={t}: {uc} vs {lambda}");
                }
            }
        }
    }
}

#[test]
fn verdict_sign_matches_recovered_rho_slope() {
    let cfg = DetConfig::default();
    for c in fixtures() {
        for weight in weights() {
            for t in [0.5, 1.0, 2.0] {
                for x in [0.5, 1.0, 2.0, 4.0] {
                    let report = classify_risk_det(&c, &weight, &[(t, x)], &cfg).unwrap();
                    let probe = report.probes[0];
                    if probe.margin.abs() <= 1e-3 * probe.scale {
                        continue;
                    }
                    let (c_lo, c_hi) = (consumption_from(&c, 0.98 * x, t, &cfg), consumption_from(&c, 1.02 * x, t, &cfg));
                    let rec = recover_marginal_utility(&c, &weight, t, &[c_lo, c_hi], &cfg).unwrap();
                    let slope = (rec.rho[1] - rec.rho[0]) / (c_hi - c_lo);
                    assert_eq!(slope > 0.0, probe.margin > 0.0, "{c:?} {weight:?} ({t}, {x}): {slope} vs {}", probe.margin);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn crra_power_tail_matches_closed_form(
        r in prop_oneof![0.3f64..0.9, 1.1f64..4.0],
        kappa in 0.05f64..0.5,
        t in 0.0f64..5.0,
    ) {
        let cfg = DetConfig::default();
        let c = StrategySurface::Linear { coef: kappa };
        let grid = log_spaced(0.05, 1.0, 8);
        let rec = recover_marginal_utility(&c, &WeightFunction::PowerTail { r }, t, &grid, &cfg).unwrap();
        for (i, &cv) in grid.iter().enumerate() {
            let exact = cv.powf(-r) * kappa.powf(r) * (-r * kappa * t).exp();
            prop_assert!((rec.uc[i] / exact - 1.0).abs() <= 1e-6);
        }
    }
}
