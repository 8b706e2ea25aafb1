mod common;

use inverse_merton::blackpde::{
    black_residual_scaled, extract_beta, sharpe_remap, timehom_consumption, DualMap,
};
use inverse_merton::market::{MarketParams, StrategyPair, StrategySurface, TimeFunction};
use inverse_merton::numerics::log_spaced;
use proptest::prelude::*;

type Fixture = (StrategyPair<f64>, MarketParams<f64>, TimeFunction<f64>);

fn fixtures() -> Vec<(&'static str, Fixture)> {
    let one = TimeFunction::Constant(1.0);
    let with = |(p, m): (StrategyPair<f64>, MarketParams<f64>), r| (p, m, r);
    vec![
        ("crra", with(common::crra(), one)),
        ("convex", with(common::convex(), one)),
        ("bounded_cons", with(common::bounded_cons(), common::bounded_cons_reference())),
        ("bounded_wealth", with(common::bounded_wealth(), common::bounded_wealth_reference())),
        ("convex_convex", with(common::convex_convex(), one)),
        ("concave_concave", with(common::concave_concave(), one)),
    ]
}

fn wealth_grid(pair: &StrategyPair<f64>) -> Vec<f64> {
    match pair.wbar(0.0) {
        Some(b) => (1..10).map(|k| b * k as f64 / 10.0).collect(),
        None => log_spaced(0.1, 10.0, 9),
    }
}

fn dual(f: &Fixture) -> DualMap<f64> {
    DualMap::new(f.0.clone(), f.1, f.2).unwrap()
}

#[test]
fn beta_is_flat_for_consistent_pairs() {
    for (name, (pair, market, reference)) in fixtures() {
        for t in [0.0, 1.0, 5.0] {
            let b = extract_beta(&pair, &market, t, &wealth_grid(&pair), reference.eval(t)).unwrap();
            assert!(b.flatness <= 1e-8 * b.beta.abs().max(1.0), "{name} t={t}: {b:?}");
        }
    }
}

#[test]
fn beta_is_not_flat_for_a_perturbed_pair() {
    let (_, market) = common::crra();
    let pair = StrategyPair::new(
        StrategySurface::ExpShiftLinear { kappa: common::KAPPA, alpha: 0.05, a: 1.0 },
        StrategySurface::Linear { coef: common::PHI },
    );
    let b = extract_beta(&pair, &market, 1.0, &wealth_grid(&pair), 1.0).unwrap();
    assert!(b.flatness > 1e-3, "{b:?}");
}

#[test]
fn marginal_is_decreasing_with_the_right_limits() {
    for (name, f) in fixtures() {
        let map = dual(&f);
        for t in [0.0, 1.0] {
            let (lo, hi) = match f.0.wbar(t) {
                Some(b) => (1e-6 * b, b * (1.0 - 1e-6)),
                None => (1e-60, 1e60),
            };
            let grid = log_spaced(lo, hi, 40);
            let values: Vec<f64> = grid.iter().map(|&w| map.marginal(t, w).unwrap()).collect();
            assert!(values.windows(2).all(|p| p[1] < p[0] || p[0] == 0.0), "{name} t={t}: {values:?}");
            let mid = map.marginal(t, f.2.eval(t)).unwrap();
            assert!(values[0] > 1e2 * mid, "{name} t={t}: F(0+) = {}", values[0]);
            assert!(values[39] < 1e-2 * mid, "{name} t={t}: F(top) = {}", values[39]);
        }
    }
}

#[test]
fn sharpe_remap_at_the_same_ratio_is_the_identity() {
    let f = &fixtures()[1].1;
    let map = dual(f);
    let remap = sharpe_remap(&f.1, f.1.theta).unwrap();
    assert!(remap.is_identity());
    assert_eq!(remap.mu, 0.0);
    assert_eq!(remap.lambda_hat(0.7), 0.7);
    for (t, z) in [(0.0, 0.5), (1.0, 1.0), (3.0, 2.0)] {
        let direct = map.inverse_marginal_utility(t, z).unwrap();
        let remapped = remap.apply(|t, z| map.inverse_marginal_utility(t, z).unwrap(), t, z);
        assert_eq!(direct, remapped);
    }
}

fn market_strategy() -> impl Strategy<Value = MarketParams<f64>> {
    (0.0f64..0.5, 0.1f64..0.6, 0.05f64..1.0).prop_map(|(r, s, th)| MarketParams::new(r, s, th).unwrap())
}

fn investment_strategy() -> impl Strategy<Value = StrategySurface<f64>> {
    prop_oneof![
        (0.2f64..3.0).prop_map(|coef| StrategySurface::Linear { coef }),
        (0.2f64..3.0, -0.5f64..0.5, 0.1f64..0.9).prop_map(|(phi, psi, p)| StrategySurface::PowerShift { phi, psi, p }),
        (0.2f64..2.0, 0.5f64..1.5).prop_map(|(coef, exponent)| StrategySurface::Power { coef, exponent }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn time_homogeneous_construction_solves_black(
        pi in investment_strategy(),
        market in market_strategy(),
        b0 in 0.1f64..10.0,
        b1 in -1.0f64..1.0,
    ) {
        let beta = TimeFunction::Affine { intercept: b0, slope: b1 };
        let c = timehom_consumption(&pi, beta, &market).unwrap().consumption;
        let pair = StrategyPair::new(c, pi);
        for t in [0.0, 1.0, 5.0] {
            for w in [0.2, 1.0, 5.0] {
                let (res, scale) = black_residual_scaled(&pair, &market, t, w).unwrap();
                prop_assert!(res.abs() <= 1e-8 * scale, "t={} w={}: {} / {}", t, w, res, scale);
            }
        }
    }

    #[test]
    fn marginal_utility_inverts_the_dual_map(k in 0usize..6, t in 0.0f64..5.0, ln_y in -1.5f64..1.5) {
        let f = &fixtures()[k].1;
        let map = dual(f);
        let y = map.marginal(t, f.2.eval(t)).unwrap() * ln_y.exp();
        let w = map.inverse(t, y).unwrap();
        let c = f.0.c(t, w).unwrap();
        let back = map.marginal_utility(t, c).unwrap();
        prop_assert!((back / y - 1.0).abs() <= 1e-6, "{}: y={} back={}", fixtures()[k].0, y, back);
    }

    #[test]
    fn investment_matches_dual_slope(k in 0usize..6, t in 0.0f64..5.0, ln_y in -1.5f64..1.5) {
        let f = &fixtures()[k].1;
        let map = dual(f);
        let z = map.marginal(t, f.2.eval(t)).unwrap() * ln_y.exp();
        let h = 1e-5;
        let f_z = (map.inverse(t, z * (1.0 + h)).unwrap() - map.inverse(t, z * (1.0 - h)).unwrap()) / (2.0 * h * z);
        let w = map.inverse(t, z).unwrap();
        let lhs = f.1.sigma * f.0.pi(t, w).unwrap();
        let rhs = -f.1.theta * z * f_z;
        prop_assert!((lhs - rhs).abs() <= 1e-5 * lhs.abs().max(1e-3), "{}: {} vs {}", fixtures()[k].0, lhs, rhs);
    }
}
