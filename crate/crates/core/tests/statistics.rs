//! Statistical checks against independent oracles: Gaussian moment formulas,
//! the reflection/exit-time law of Brownian motion, closed-form GBM moments
//! and hand-computed method-of-steps solutions.

use memgap::analysis::{
    convergence_rate, holder_check, martingale_inequality_check, moment_bound_check, richardson_method_of_steps,
    strong_error, strong_errors, ExactSolution, Exec, Integrand, MartingaleSetup, McOptions, Reference, Substeps, Z95,
};
use memgap::drivers::{generate_brownian, BrownianPath, SeedSpec, StreamTag};
use memgap::models::{builtin_model, ParamMap};
use memgap::paths::{InitialFunction, TimeGrid};
use memgap::scheme::{solve_memory_gap, SchemeConfig};
use rand::Rng;

fn params(pairs: &[(&str, f64)]) -> ParamMap {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// `E sup_{[0,1]} |W|^2` from the exit-time series of Brownian motion.
fn sup_abs_w_second_moment() -> f64 {
    let pi = std::f64::consts::PI;
    let cdf = |x: f64| -> f64 {
        4.0 / pi
            * (0..100)
                .map(|n| {
                    let o = (2 * n + 1) as f64;
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    sign / o * (-(o * o) * pi * pi / (8.0 * x * x)).exp()
                })
                .sum::<f64>()
    };
    let (n, upper) = (100_000, 12.0);
    let h = upper / n as f64;
    (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            2.0 * x * (1.0 - cdf(x)) * h
        })
        .sum()
}

#[test]
fn brownian_increments_have_gaussian_moments() {
    let grid = TimeGrid::new(0.0, 1.0, 1024).unwrap();
    let mut incs = Vec::new();
    let mut ends = Vec::new();
    for i in 0..100 {
        let w = generate_brownian(&grid, 1, SeedSpec::new(9, i, StreamTag::Brownian)).unwrap();
        incs.extend_from_slice(w.increments());
        ends.push(w.aggregate(0.0, 1.0).unwrap()[0]);
    }
    let (m, v) = mean_var(&incs);
    let dt = 1.0 / 1024.0;
    let n = incs.len() as f64;
    assert!(m.abs() < 4.0 * (dt / n).sqrt(), "mean {m}");
    // Var of the sample variance of a Gaussian is 2 s^4 / (n - 1).
    assert!((v - dt).abs() < 4.0 * dt * (2.0 / n).sqrt(), "variance {v} vs {dt}");
    let fourth = incs.iter().map(|x| x.powi(4)).sum::<f64>() / n;
    assert!(
        (fourth / (3.0 * dt * dt) - 1.0).abs() < 0.05,
        "fourth moment ratio {}",
        fourth / (3.0 * dt * dt)
    );
    let (_, vend) = mean_var(&ends);
    assert!((vend - 1.0).abs() < 0.5);
}

#[test]
fn path_streams_are_uncorrelated() {
    let grid = TimeGrid::new(0.0, 1.0, 16).unwrap();
    let n = 4000;
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let w = |idx| generate_brownian(&grid, 1, SeedSpec::new(1, idx, StreamTag::Brownian)).unwrap();
        a.push(w(2 * i).aggregate(0.0, 1.0).unwrap()[0]);
        b.push(w(2 * i + 1).aggregate(0.0, 1.0).unwrap()[0]);
        let mut rng = SeedSpec::new(1, 2 * i, StreamTag::Initial).rng();
        c.push(rng.random::<f64>() - 0.5);
    }
    let corr = |x: &[f64], y: &[f64]| {
        let (mx, vx) = mean_var(x);
        let (my, vy) = mean_var(y);
        x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / ((n - 1) as f64 * (vx * vy).sqrt())
    };
    // Under independence the sample correlation has sd 1/sqrt(n).
    let bound = 4.0 / (n as f64).sqrt();
    assert!(corr(&a, &b).abs() < bound);
    assert!(corr(&a, &c).abs() < bound);
}

#[test]
fn pure_noise_second_moment_is_t() {
    let model = builtin_model("pure_noise", &ParamMap::new()).unwrap();
    let cfg = SchemeConfig::new(8, 4, 2.0);
    let n = 20_000;
    let mut sq = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let (w, theta) = memgap::analysis::path_inputs(&model, 2.0, cfg.steps_per_unit(), 3, i).unwrap();
        sq.push(solve_memory_gap(&model, &cfg, &w, &theta).unwrap().eval(2.0).unwrap()[0].powi(2));
    }
    let (m, v) = mean_var(&sq);
    assert!((m - 2.0).abs() < Z95 * (v / n as f64).sqrt() * 2.0, "E|W(2)|^2 = {m}");
}

#[test]
fn gbm_mean_matches_closed_form() {
    let model = builtin_model("gbm_l0", &params(&[("mu", 0.05), ("sigma", 0.2)])).unwrap();
    let cfg = SchemeConfig::new(64, 8, 1.0);
    let n = 20_000;
    let mut xs = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let (w, theta) = memgap::analysis::path_inputs(&model, 1.0, cfg.steps_per_unit(), 4, i).unwrap();
        xs.push(solve_memory_gap(&model, &cfg, &w, &theta).unwrap().eval(1.0).unwrap()[0]);
    }
    let (m, v) = mean_var(&xs);
    let hw = Z95 * (v / n as f64).sqrt();
    // The lagged drift biases the mean by O(1/k); allow it on top of the noise.
    assert!(
        (m - 0.05f64.exp()).abs() < hw + 0.05 / 64.0,
        "mean {m} vs {}",
        0.05f64.exp()
    );
}

#[test]
fn martingale_lhs_matches_exit_time_law() {
    let exact = sup_abs_w_second_moment();
    assert!((exact - 1.8319).abs() < 1e-3, "series value {exact}");
    let setup = MartingaleSetup {
        d: 1,
        m: 1,
        a: 0.0,
        b: 1.0,
        steps_per_unit: 4096,
    };
    let c = martingale_inequality_check(1, Integrand::Constant, &setup, 10_000, 17, Exec::default()).unwrap();
    // The discrete max sits slightly below the continuous sup.
    assert!(c.lhs < exact + c.lhs_half_width, "lhs {} vs {exact}", c.lhs);
    assert!(c.lhs > exact - c.lhs_half_width - 0.05, "lhs {} vs {exact}", c.lhs);
    assert!(c.pass);
    for order in [1, 2] {
        let c =
            martingale_inequality_check(order, Integrand::ClippedBrownian, &setup, 2000, 18, Exec::default()).unwrap();
        assert!(c.pass && c.lhs > 0.0);
    }
}

#[test]
fn pure_noise_moment_estimate_is_sup_of_brownian_motion() {
    let model = builtin_model("pure_noise", &ParamMap::new()).unwrap();
    let opts = McOptions::new(4000, 1.0, 23);
    let r = moment_bound_check(&model, &[64], Substeps::Fixed(16), 1.0, &opts).unwrap();
    let exact = sup_abs_w_second_moment();
    let e = r.estimates[0];
    assert!(e.value < exact + e.std_error);
    assert!(e.value > exact - e.std_error - 0.05, "{} vs {exact}", e.value);
    assert!(r.ceiling > exact);
}

#[test]
fn cauchy_monotonicity_on_stochastic_models() {
    let cases = [
        (
            "point_delay_linear",
            params(&[("a", 1.5), ("b", 0.1), ("theta_scale", 1.0)]),
        ),
        (
            "distributed_delay",
            params(&[("a", 1.0), ("b", 0.5), ("theta_scale", 1.0)]),
        ),
        ("gbm_l0", params(&[("mu", 0.05), ("sigma", 0.2)])),
        // Exact at the nodes of every k; only the interpolation differs.
        ("pure_noise", ParamMap::new()),
    ];
    for (name, p) in cases {
        let model = builtin_model(name, &p).unwrap();
        let opts = McOptions::new(500, 1.0, 8);
        let e = strong_errors(&model, &[4, 8], &Reference::Gap(32), &opts, Substeps::Fixed(8)).unwrap();
        assert!(
            e[1].value < e[0].value + e[0].std_error + e[1].std_error,
            "{name}: {} then {}",
            e[0].value,
            e[1].value
        );
        assert!(e.iter().all(|x| x.std_error >= 0.0 && x.value.is_finite()));
    }
}

fn dde_exact() -> Box<ExactSolution> {
    // x = 1 + t on [0, 1], 2 + (t^2 - 1)/2 on [1, 2], theta = 1 before.
    Box::new(|w: &BrownianPath, _: &InitialFunction| {
        let grid = TimeGrid::new(1.0, w.horizon(), w.steps_per_unit())?;
        memgap::paths::SamplePath::from_fn(grid, 1, |t, x| {
            x[0] = if t <= 0.0 {
                1.0
            } else if t <= 1.0 {
                1.0 + t
            } else {
                2.0 + (t * t - 1.0) / 2.0
            }
        })
    })
}

#[test]
fn dde_strong_error_against_method_of_steps() {
    let model = builtin_model("deterministic_dde", &ParamMap::new()).unwrap();
    let exact = dde_exact();
    let reference = Reference::Exact {
        tag: "method of steps",
        solution: exact.as_ref(),
    };
    let opts = McOptions::new(2, 2.0, 0);
    let e = strong_error(&model, 64, &reference, &opts, Substeps::Fixed(8)).unwrap();
    assert!(e.value <= 1e-3, "squared sup error {}", e.value);
    assert_eq!(e.std_error, 0.0);
    let r = convergence_rate(&model, &[8, 16, 32, 64], &reference, &opts, Substeps::Fixed(8)).unwrap();
    assert!(r.order().unwrap() >= 0.9, "order {:?}", r.order());
}

#[test]
fn richardson_agrees_with_hand_solution_at_three() {
    let model = builtin_model("deterministic_dde", &ParamMap::new()).unwrap();
    let theta = InitialFunction::constant(1.0, vec![1.0]);
    let (path, _) = richardson_method_of_steps(&model, &theta, 3.0, 512).unwrap();
    // int_2^3 (2 + ((u-1)^2 - 1)/2) du = 2 + (7/3 - 1)/2.
    let x3 = 3.5 + 2.0 + (7.0 / 3.0 - 1.0) / 2.0;
    assert!((path.eval(3.0).unwrap()[0] - x3).abs() < 1e-10);
}

#[test]
fn brownian_holder_exponent() {
    let model = builtin_model("pure_noise", &ParamMap::new()).unwrap();
    let lags: Vec<f64> = (2..=10).map(|e| 0.5f64.powi(e)).collect();
    // k * r = 2^14 steps per unit.
    let r = holder_check(&model, 2048, 8, &lags, &McOptions::new(40, 1.0, 31)).unwrap();
    let median = r.median.unwrap();
    assert!((0.35..=0.55).contains(&median), "median exponent {median}");
    assert_eq!(r.degenerate, 0);
}

#[test]
fn gap_solution_holder_exponent_is_below_one() {
    let model = builtin_model("point_delay_linear", &params(&[("a", 1.0), ("b", 0.5)])).unwrap();
    let lags: Vec<f64> = (2..=8).map(|e| 0.5f64.powi(e)).collect();
    let r = holder_check(&model, 64, 16, &lags, &McOptions::new(30, 1.0, 12)).unwrap();
    let (q10, q90) = (r.q10.unwrap(), r.q90.unwrap());
    assert!(q10 > 0.2 && q90 < 0.8, "quantiles {q10} {q90}");
}
