use proptest::prelude::*;

use carroll_core::characteristics::{
    blowup_bounds_at, integrand_bracket, integrate_riccati, riccati_integrand, riccati_reciprocals, BundleOptions,
    CharacteristicBundle, RiccatiOutcome,
};
use carroll_core::classify::{admissibility_gate, region_bounds};
use carroll_core::gamma3::{characteristic_position, predict_blowup_gamma3, Gamma3Solution};
use carroll_core::reference::{upwind_step, Ghosts, Grid1D};
use carroll_core::run::{cmd_certify, to_json, DataSource, RunConfig, SolverKind};
use carroll_core::state::{eigen, from_riemann, make_params, speeds, to_riemann, Family, FluidState, RiemannState};
use carroll_core::{InitialData, PresetSpec};

fn preset(name: &str, kv: &[(&str, f64)]) -> InitialData {
    kv.iter()
        .fold(PresetSpec::new(name), |s, &(k, v)| s.with(k, v))
        .build()
        .unwrap()
}

/// Admissible state from `(γ, σ, r)` with `β = r·σ^θ`, `|r| < 1`.
fn state_from(gamma: f64, sigma: f64, r: f64) -> (carroll_core::GammaParams, FluidState) {
    let p = make_params(gamma).unwrap();
    let beta = r * sigma.powf(p.theta());
    (p, FluidState::new(sigma, beta))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn riemann_round_trip(gamma in 1.05f64..3.0, sigma in 0.05f64..10.0, r in -0.98f64..0.98) {
        let (p, s) = state_from(gamma, sigma, r);
        let rs = to_riemann(s, &p).unwrap();
        prop_assert!(rs.w1 > rs.w2);
        let back = from_riemann(rs, &p).unwrap();
        prop_assert!((back.sigma - s.sigma).abs() <= 1e-12 * s.sigma);
        prop_assert!((back.beta - s.beta).abs() <= 1e-12 * s.sigma.powf(p.theta()));
    }

    #[test]
    fn speeds_have_fixed_signs_and_reciprocal_slownesses(gamma in 1.05f64..3.0, sigma in 0.05f64..10.0, r in -0.98f64..0.98) {
        let (p, s) = state_from(gamma, sigma, r);
        let e = eigen(s, &p).unwrap();
        prop_assert!(e.lambda1 < 0.0 && e.lambda2 > 0.0);
        prop_assert!((e.lambda1 * e.mu1 - 1.0).abs() <= 1e-12);
        prop_assert!((e.lambda2 * e.mu2 - 1.0).abs() <= 1e-12);
        let (l1, l2) = speeds(to_riemann(s, &p).unwrap(), &p);
        prop_assert!((l1 - e.lambda1).abs() <= 1e-12 * e.lambda1.abs());
        prop_assert!((l2 - e.lambda2).abs() <= 1e-12 * e.lambda2.abs());
    }

    #[test]
    fn integrand_within_box_bracket(gamma in 1.1f64..3.0, eps in 0.05f64..1.0, x in -20.0f64..20.0) {
        let p = make_params(gamma).unwrap();
        let data = preset("arctan-compressive", &[("sigma", 2.0), ("eps", eps), ("samples", 4001.0)]);
        let bounds = region_bounds(&data, &p).unwrap();
        prop_assume!(admissibility_gate(&bounds, &p).admissible);
        let rs = data.riemann(x, &p).unwrap();
        for family in Family::BOTH {
            let i = riccati_integrand(rs, family, &p).unwrap();
            let (lo, hi) = integrand_bracket(&bounds, family, &p);
            prop_assert!(i > 0.0);
            prop_assert!(lo <= i * (1.0 + 1e-12) && i <= hi * (1.0 + 1e-12), "{lo} ≤ {i} ≤ {hi}");
        }
    }

    #[test]
    fn exact_gamma3_transports_invariants(eps in 0.05f64..1.2, x0 in -10.0f64..10.0, t in 0.0f64..30.0) {
        let data = preset("arctan-rarefactive", &[("sigma", 2.0), ("eps", eps), ("samples", 4001.0)]);
        let p = make_params(3.0).unwrap();
        let sol = Gamma3Solution::new(&data).unwrap();
        let rs0 = data.riemann(x0, &p).unwrap();
        for family in Family::BOTH {
            let x = characteristic_position(&data, family, x0, t).unwrap();
            let rs = sol.evaluate(t, &[x]).unwrap()[0];
            prop_assert!((family.carried(rs) - family.carried(rs0)).abs() <= 1e-9);
        }
    }

    #[test]
    fn gamma3_blowup_time_is_the_infimum(sigma in 1.0f64..4.0, frac in 0.05f64..0.6) {
        let eps = frac * sigma;
        let data = preset("arctan-compressive", &[("sigma", sigma), ("eps", eps), ("samples", 4001.0)]);
        let p = make_params(3.0).unwrap();
        let t_star = predict_blowup_gamma3(&data).unwrap().t_star.unwrap();
        for x in data.sample_points() {
            let rs = data.riemann(x, &p).unwrap();
            let d = data.derivative_field(x, &p).unwrap();
            for family in Family::BOTH {
                let a = d.invariant(family);
                if a > 0.0 {
                    let w = family.carried(rs);
                    prop_assert!(t_star <= w * w / a * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn reciprocal_is_strictly_decreasing(gamma in 1.2f64..2.8, alpha0 in -2.0f64..2.0) {
        prop_assume!(alpha0.abs() > 1e-3);
        let p = make_params(gamma).unwrap();
        let data = preset("arctan-compressive", &[("sigma", 2.0), ("eps", 0.3), ("samples", 2001.0)]);
        let bundle = CharacteristicBundle::build(&data, &p, 1.0, BundleOptions { n_feet: 401, ..Default::default() }).unwrap();
        for family in Family::BOTH {
            let trace = bundle.trace(family, 0.3, 1.0, 0.05).unwrap();
            let r = riccati_reciprocals(&trace, alpha0, &p).unwrap();
            prop_assert!(r.windows(2).all(|w| w[1] < w[0]));
            if alpha0 < 0.0 {
                let alive = matches!(integrate_riccati(&trace, alpha0, &p).unwrap(), RiccatiOutcome::Alive { .. });
                prop_assert!(alive);
            }
        }
    }

    #[test]
    fn upwind_step_does_not_expand_range(
        gamma in 1.2f64..3.0,
        amps in proptest::collection::vec(-0.3f64..0.3, 6),
        frac in 0.1f64..1.0,
    ) {
        let p = make_params(gamma).unwrap();
        let grid = Grid1D::new(0.0, 1.0, 64, 0.9).unwrap();
        let field: Vec<RiemannState> = grid
            .centers()
            .iter()
            .map(|&x| {
                let s = |k: usize| (std::f64::consts::TAU * (k + 1) as f64 * x).sin();
                let sigma = 1.0 + amps[0] * s(0) + amps[1] * s(1) + amps[2] * s(2);
                let r = amps[3] * s(0) + amps[4] * s(1) + amps[5] * s(2);
                to_riemann(FluidState::new(sigma, r * sigma.powf(p.theta())), &p).unwrap()
            })
            .collect();
        let smax = field.iter().map(|&rs| { let (a, b) = speeds(rs, &p); b.max(-a) }).fold(0.0, f64::max);
        let dt = frac * 0.9 * grid.dx / smax;
        let next = upwind_step(&field, &grid, dt, &p, Ghosts::Periodic).unwrap();
        let range = |f: &[RiemannState], g: fn(&RiemannState) -> f64| {
            f.iter().map(g).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        for g in [(|rs: &RiemannState| rs.w1) as fn(&RiemannState) -> f64, |rs: &RiemannState| rs.w2] {
            let (lo0, hi0) = range(&field, g);
            let (lo1, hi1) = range(&next, g);
            prop_assert!(lo1 >= lo0 - 1e-14 && hi1 <= hi0 + 1e-14);
        }
    }
}

#[test]
fn riccati_derivative_matches_bundle_differences() {
    let p = make_params(2.0).unwrap();
    let data = preset("arctan-compressive", &[("sigma", 2.0), ("eps", 0.3), ("samples", 8001.0)]);
    let t = 2.0;
    let bundle = CharacteristicBundle::build(&data, &p, t, BundleOptions { n_feet: 8001, ..Default::default() }).unwrap();
    for family in Family::BOTH {
        for x0 in [-1.5, 0.0, 0.7] {
            let (trace, outcome) = bundle.trace_until_blowup(family, x0, t, 1e-3).unwrap();
            let RiccatiOutcome::Alive { alpha, .. } = outcome else {
                panic!("no blow-up expected before t={t}");
            };
            let x = trace.end().x;
            let h = 1e-2;
            let fd = (bundle.invariant_at(family, t, x + h) - bundle.invariant_at(family, t, x - h)) / (2.0 * h);
            assert!((alpha - fd).abs() <= 1e-3 * alpha.abs().max(1e-2), "{family}: α={alpha}, difference {fd}");
        }
    }
}

#[test]
fn trace_converges_at_second_order() {
    let p = make_params(1.5).unwrap();
    let data = preset("gaussian-bump", &[("a", 0.3), ("samples", 8001.0)]);
    let bundle = CharacteristicBundle::build(&data, &p, 3.0, BundleOptions { n_feet: 8001, ..Default::default() }).unwrap();
    for family in Family::BOTH {
        let ends: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&dt| bundle.trace(family, 0.4, 3.0, dt).unwrap().end().x)
            .collect();
        let d: Vec<f64> = ends.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
        let order = (d[1] / d[2]).log2();
        assert!(order >= 1.8, "{family}: self-convergence order {order}, differences {d:?}");
    }
}

#[test]
fn pinned_intervals_collapse_continuously_as_gamma_tends_to_three() {
    let data = preset("arctan-compressive", &[("sigma", 2.0), ("eps", 0.2), ("samples", 4001.0)]);
    let feet = [-0.5, 0.0, 0.8];
    let p3 = make_params(3.0).unwrap();
    let exact: Vec<f64> = blowup_bounds_at(&data, &p3, &feet)
        .unwrap()
        .intervals
        .iter()
        .map(|iv| {
            let w = iv.family.carried(data.riemann(iv.x0, &p3).unwrap());
            let a = data.derivative_field(iv.x0, &p3).unwrap().invariant(iv.family);
            w * w / a
        })
        .collect();
    let mut prev = f64::INFINITY;
    for theta in [0.9, 0.99, 0.999, 1.0] {
        let p = make_params(1.0 + 2.0 * theta).unwrap();
        let report = blowup_bounds_at(&data, &p, &feet).unwrap();
        assert_eq!(report.intervals.len(), exact.len());
        let gap = report
            .intervals
            .iter()
            .zip(&exact)
            .map(|(iv, &e)| ((iv.sharp[0] - e).abs().max((iv.sharp[1] - e).abs())) / e)
            .fold(0.0, f64::max);
        assert!(gap < prev, "θ={theta}: gap {gap} did not shrink from {prev}");
        prev = gap;
    }
    assert!(prev <= 1e-12, "θ=1 pinned interval is not the exact time: gap {prev}");
}

#[test]
fn displayed_interval_keeps_positive_width_at_theta_one() {
    let data = preset("arctan-compressive", &[("sigma", 2.0), ("eps", 0.2), ("samples", 4001.0)]);
    let p3 = make_params(3.0).unwrap();
    let report = blowup_bounds_at(&data, &p3, &[0.0]).unwrap();
    for iv in &report.intervals {
        assert!(iv.t_hi - iv.t_lo > 1.0, "width {}", iv.t_hi - iv.t_lo);
        assert!(iv.t_lo <= iv.sharp[0] && iv.sharp[1] <= iv.t_hi);
    }
}

#[test]
fn grid_and_bundle_agree() {
    let p = make_params(2.0).unwrap();
    let data = preset("arctan-rarefactive", &[("sigma", 2.0), ("eps", 0.5), ("samples", 8001.0)]);
    let t = 1.0;
    let bundle = CharacteristicBundle::build(&data, &p, t, BundleOptions::default()).unwrap();
    let mut errs = Vec::new();
    for n in [800, 1600] {
        let grid = Grid1D::new(-12.0, 12.0, n, 0.9).unwrap();
        let sol = carroll_core::reference::run(&data, &grid, t, &[], &p, Default::default()).unwrap();
        let xs = grid.centers();
        let reference = bundle.field(t, &xs).unwrap();
        let num = sol.snapshot(t).unwrap();
        let err = xs
            .iter()
            .zip(num.iter().zip(&reference))
            .filter(|(x, _)| x.abs() <= 6.0)
            .map(|(_, (a, b))| (a.w1 - b.w1).abs().max((a.w2 - b.w2).abs()))
            .fold(0.0, f64::max);
        errs.push(err);
    }
    let order = (errs[0] / errs[1]).log2();
    assert!((0.8..=1.2).contains(&order), "errors {errs:?}, order {order}");
}

#[test]
fn max_derivative_grows_towards_the_lower_bound() {
    let p = make_params(2.0).unwrap();
    let data = preset("arctan-compressive", &[("sigma", 2.0), ("eps", 0.5), ("samples", 8001.0)]);
    let report = blowup_bounds_at(&data, &p, &data.sample_points()).unwrap();
    let t_lo = report.envelope.unwrap()[0];
    let t_end = 0.95 * t_lo;
    let bundle = CharacteristicBundle::build(&data, &p, t_end, BundleOptions::default()).unwrap();
    let xs: Vec<f64> = (0..=2000).map(|i| -10.0 + 0.01 * i as f64).collect();
    let mut prev = 0.0;
    for k in 0..=10 {
        let t = t_end * k as f64 / 10.0;
        let f = bundle.field(t, &xs).unwrap();
        let m = f
            .windows(2)
            .map(|w| ((w[1].w1 - w[0].w1).abs().max((w[1].w2 - w[0].w2).abs())) / 0.01)
            .fold(0.0, f64::max);
        assert!(m >= prev * (1.0 - 1e-9), "t={t}: max |wₓ| {m} fell below {prev}");
        prev = m;
    }
}

#[test]
fn certify_output_is_deterministic() {
    let mut config = RunConfig::new(
        2.0,
        DataSource::Preset {
            name: "remark-family".into(),
            params: [("m".to_string(), 1.0), ("theta".to_string(), 0.5), ("samples".to_string(), 4001.0)].into(),
        },
    );
    config.solver = SolverKind::Characteristics;
    let a = to_json(&cmd_certify(&config).unwrap()).unwrap();
    let b = to_json(&cmd_certify(&config).unwrap()).unwrap();
    assert_eq!(a, b);
}
