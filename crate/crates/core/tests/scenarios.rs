//! End-to-end checks of the solvers and certificates against oracles built
//! here from closed-form profiles.

use carroll_core::characteristics::{
    one_sided_lipschitz_certificate_general, BundleOptions, CharacteristicBundle, RiccatiOutcome,
};
use carroll_core::classify::{admissibility_gate, certify_runtime_region, region_bounds};
use carroll_core::gamma3::{
    characteristic_position, one_sided_lipschitz_certificate_gamma3, solve_exact_gamma3,
    Gamma3Solution,
};
use carroll_core::initial_data::ingest_tabulated;
use carroll_core::reference::{self, Grid1D, RunOptions};
use carroll_core::state::{make_params, to_riemann, Family, FluidState, RiemannState};
use carroll_core::{InitialData, PresetSpec};

fn preset(name: &str, kv: &[(&str, f64)]) -> InitialData {
    kv.iter()
        .fold(PresetSpec::new(name), |s, &(k, v)| s.with(k, v))
        .build()
        .unwrap()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Bisection for an increasing function on `[lo, hi]`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) <= 0.0 && f(hi) >= 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Linear interpolation of a cell-centred field at `x`.
fn sample(xs: &[f64], field: &[RiemannState], x: f64) -> RiemannState {
    let k = xs.partition_point(|&c| c <= x).clamp(1, xs.len() - 1);
    let s = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    let lerp = |a: f64, b: f64| a + s * (b - a);
    RiemannState::new(lerp(field[k - 1].w1, field[k].w1), lerp(field[k - 1].w2, field[k].w2))
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect()
}

#[test]
fn arctan_region_bounds_match_dense_sampling() {
    let p = make_params(3.0).unwrap();
    let data = preset("arctan-compressive", &[("sigma", 2.0), ("eps", 0.1)]);
    let b = region_bounds(&data, &p).unwrap();
    let (lo, hi) = data.truncation();
    let n = ((hi - lo) / 1e-4).round() as usize;
    let (mut m1, mut big_m1, mut m2, mut big_m2) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    // the box also covers the limits at ±∞, where arctan → ±π/2
    let limits = [f64::NEG_INFINITY, f64::INFINITY];
    for x in (0..=n).map(|i| lo + i as f64 * 1e-4).chain(limits) {
        let (w1, w2) = (0.1 * x.atan() + 2.0, 0.1 * x.atan() - 2.0);
        m1 = m1.min(w1);
        big_m1 = big_m1.max(w1);
        m2 = m2.min(w2);
        big_m2 = big_m2.max(w2);
    }
    for (got, want) in [(b.m1, m1), (b.M1, big_m1), (b.m2, m2), (b.M2, big_m2)] {
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    }
}

#[test]
fn exact_snapshots_of_compressive_data_stay_in_the_region() {
    let p = make_params(3.0).unwrap();
    let data = preset("arctan-compressive", &[("sigma", 2.0), ("eps", 0.1)]);
    let sol = Gamma3Solution::new(&data).unwrap();
    let t_star = sol.report().t_star.unwrap();
    let xs = linspace(-20.0, 20.0, 2001);
    for t in [0.1, 0.5, 0.9 * t_star] {
        let field = sol.evaluate(t, &xs).unwrap();
        let cert = certify_runtime_region(&xs, &field, sol.bounds(), &p, 1e-9);
        assert!(cert.passed, "t={t}: {cert:?}");
    }
}

#[test]
fn exact_global_solution_solves_the_foot_equation_and_matches_the_grid() {
    // β₀ = −arctan x, σ₀ = 2; at γ = 3 the fast speed is 1/w₁
    let data = preset("arctan-rarefactive", &[("sigma", 2.0), ("eps", 1.0)]);
    let w1_0 = |x: f64| 2.0 - x.atan();
    let x0 = bisect(|x0| x0 + 1.0 / w1_0(x0), -5.0, 5.0);
    let exact = solve_exact_gamma3(&data, 1.0, &[0.0]).unwrap()[0];
    assert!((exact.w1 - w1_0(x0)).abs() <= 1e-10, "{} vs {}", exact.w1, w1_0(x0));

    let p = make_params(3.0).unwrap();
    let errors: Vec<f64> = [800, 1600, 3200]
        .iter()
        .map(|&n| {
            let grid = Grid1D::new(-12.0, 12.0, n, 0.9).unwrap();
            let sol = reference::run(&data, &grid, 1.0, &[], &p, RunOptions::default()).unwrap();
            let w = sample(&grid.centers(), sol.snapshot(1.0).unwrap(), 0.0);
            (w.w1 - exact.w1).abs()
        })
        .collect();
    for q in orders(&errors) {
        assert!((0.8..=1.2).contains(&q), "errors {errors:?}");
    }
}

#[test]
fn lipschitz_certificates_pass_for_global_data() {
    let rare = preset("arctan-rarefactive", &[("sigma", 2.0), ("eps", 1.0)]);
    let xs = linspace(-20.0, 20.0, 801);
    assert!(one_sided_lipschitz_certificate_gamma3(&rare, 1.0, &xs).unwrap().passed);

    let p = make_params(2.0).unwrap();
    let constant = preset("constant", &[("sigma", 2.0)]);
    assert!(one_sided_lipschitz_certificate_general(&constant, &p, 1.0).unwrap().passed);
    let global = preset("arctan-rarefactive", &[("sigma", 2.0), ("eps", 0.5)]);
    let cert = one_sided_lipschitz_certificate_general(&global, &p, 1.0).unwrap();
    assert!(cert.passed, "{cert:?}");
}

#[test]
fn gamma3_traces_are_the_exact_straight_lines() {
    let p = make_params(3.0).unwrap();
    let data = preset("arctan-rarefactive", &[("sigma", 2.0), ("eps", 0.5)]);
    let bundle = CharacteristicBundle::build(&data, &p, 5.0, BundleOptions::default()).unwrap();
    for family in Family::BOTH {
        for x0 in [-3.0, 0.0, 1.7] {
            let trace = bundle.trace(family, x0, 5.0, 0.01).unwrap();
            let x = characteristic_position(&data, family, x0, 5.0).unwrap();
            assert!((trace.end().x - x).abs() <= 1e-10, "{family} x0={x0}: {} vs {x}", trace.end().x);
        }
    }
}

#[test]
fn gamma3_riccati_crossing_is_the_closed_form_time() {
    let p = make_params(3.0).unwrap();
    let data = preset("arctan-compressive", &[("sigma", 2.0), ("eps", 1.0)]);
    let x0 = 0.4;
    let rs = data.riemann(x0, &p).unwrap();
    let d = data.derivative_field(x0, &p).unwrap();
    for family in Family::BOTH {
        let w = family.carried(rs);
        let t_cross_exact = w * w / d.invariant(family);
        let bundle = CharacteristicBundle::build(&data, &p, 1.01 * t_cross_exact, BundleOptions::default()).unwrap();
        let (_, outcome) = bundle.trace_until_blowup(family, x0, 1.01 * t_cross_exact, 1e-3).unwrap();
        let RiccatiOutcome::BlownUp { t_cross } = outcome else {
            panic!("{family}: no crossing");
        };
        assert!(((t_cross - t_cross_exact) / t_cross_exact).abs() <= 1e-9, "{t_cross} vs {t_cross_exact}");
    }
}

#[test]
fn gamma2_traces_agree_with_the_grid_at_first_order() {
    let p = make_params(2.0).unwrap();
    let data = preset("arctan-rarefactive", &[("sigma", 2.0), ("eps", 0.5)]);
    let bundle = CharacteristicBundle::build(&data, &p, 1.0, BundleOptions::default()).unwrap();
    let traces: Vec<_> = Family::BOTH
        .iter()
        .map(|&f| (f, bundle.trace(f, 0.3, 1.0, 1e-3).unwrap()))
        .collect();
    let errors: Vec<f64> = [400, 800, 1600]
        .iter()
        .map(|&n| {
            let grid = Grid1D::new(-12.0, 12.0, n, 0.9).unwrap();
            let sol = reference::run(&data, &grid, 1.0, &[], &p, RunOptions::default()).unwrap();
            let xs = grid.centers();
            traces
                .iter()
                .map(|(f, tr)| {
                    let end = tr.end();
                    let own = f.carried(end.riemann());
                    (f.carried(sample(&xs, sol.snapshot(1.0).unwrap(), end.x)) - own).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    for q in orders(&errors) {
        assert!((0.8..=1.2).contains(&q), "errors {errors:?}");
    }
}

#[test]
fn grid_solves_the_scalar_problem_when_one_invariant_is_constant() {
    // w₂ ≡ −2 reduces the system to w₁ₜ + λ₂(w₁, −2)·w₁ₓ = 0
    let gamma = 2.0;
    let th = 0.5;
    let p = make_params(gamma).unwrap();
    let w1_0 = |x: f64| 2.0 - 0.2 * x.tanh();
    let table: Vec<(f64, f64, f64)> = linspace(-20.0, 20.0, 8001)
        .into_iter()
        .map(|x| {
            let (w1, w2) = (w1_0(x), -2.0);
            let sigma = (th * (w1 - w2) / 2.0).powf(1.0 / th);
            (x, sigma, (w1 + w2) / 2.0)
        })
        .collect();
    let data = ingest_tabulated(&table).unwrap();
    let lambda2 = |w1: f64| 2.0 / ((1.0 + th) * w1 + (1.0 - th) * -2.0);
    let t = 2.0;
    let exact = |x: f64| w1_0(bisect(|x0| x0 + t * lambda2(w1_0(x0)) - x, -40.0, 40.0));
    let errors: Vec<f64> = [400, 800, 1600]
        .iter()
        .map(|&n| {
            let grid = Grid1D::new(-10.0, 10.0, n, 0.9).unwrap();
            let sol = reference::run(&data, &grid, t, &[], &p, RunOptions::default()).unwrap();
            let field = sol.snapshot(t).unwrap();
            assert!(field.iter().all(|rs| (rs.w2 + 2.0).abs() <= 1e-12));
            grid.centers()
                .iter()
                .zip(field)
                .filter(|(x, _)| x.abs() <= 6.0)
                .map(|(&x, rs)| (rs.w1 - exact(x)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    for q in orders(&errors) {
        assert!((0.8..=1.2).contains(&q), "errors {errors:?}");
    }
}

#[test]
fn grid_region_excess_is_below_ten_cells_for_global_gamma2_data() {
    let p = make_params(2.0).unwrap();
    let data = preset("arctan-rarefactive", &[("sigma", 2.0), ("eps", 0.5)]);
    let grid = Grid1D::new(-20.0, 20.0, 1600, 0.9).unwrap();
    let sol = reference::run(&data, &grid, 1.0, &[0.5], &p, RunOptions::default()).unwrap();
    assert!(sol.all_certified());
    for c in &sol.certificates {
        assert!(c.max_excess < 10.0 * grid.dx, "{c:?}");
    }
}

#[test]
fn tabulated_samples_reproduce_the_analytic_verdict() {
    let analytic = preset("arctan-compressive", &[("sigma", 2.0), ("eps", 0.1)]);
    let table: Vec<(f64, f64, f64)> = linspace(-20.0, 20.0, 4001)
        .into_iter()
        .map(|x| (x, 2.0, 0.1 * x.atan()))
        .collect();
    let tabulated = ingest_tabulated(&table).unwrap();
    for gamma in [1.5, 2.0, 3.0] {
        let p = make_params(gamma).unwrap();
        let a = region_bounds(&analytic, &p).unwrap();
        let b = region_bounds(&tabulated, &p).unwrap();
        assert_eq!(admissibility_gate(&a, &p).admissible, admissibility_gate(&b, &p).admissible);
        // the table ends at ±20 and is constant beyond, so its box is the scan of [−20, 20]
        let edge = to_riemann(FluidState::new(2.0, 0.1 * 20f64.atan()), &p).unwrap();
        assert!((b.M1 - edge.w1).abs() < 1e-12 && (b.M2 - edge.w2).abs() < 1e-12);
        assert!(a.M1 > b.M1 && a.m1 < b.m1);
    }
    let rs = to_riemann(FluidState::new(2.0, 0.0), &make_params(3.0).unwrap()).unwrap();
    assert_eq!(tabulated.riemann(0.0, &make_params(3.0).unwrap()).unwrap(), rs);
}
