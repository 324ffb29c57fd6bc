//! Reference-solver checks against independent oracles.

use std::f64::consts::PI;
use std::sync::Arc;

use deeponet::solvers::*;
use deeponet::spaces::{GrfSampler, InputFunction, SensorGrid};

fn fine(t: f64) -> Arc<SensorGrid> {
    Arc::new(SensorGrid::uniform(0.0, t, 1001).unwrap())
}

fn sup_over<F: Fn(f64) -> f64>(n: usize, a: f64, b: f64, f: F) -> f64 {
    (0..=n)
        .map(|i| f(a + (b - a) * i as f64 / n as f64))
        .fold(0.0, f64::max)
}

#[test]
fn antiderivative_of_one_is_identity() {
    let u = InputFunction::constant(fine(1.0), 1.0).unwrap();
    let traj = solve_ode_rk45(&OdeSystem::antiderivative(0.0, 1.0), &u, 1e-8, 1e-10).unwrap();
    let err = sup_over(1000, 0.0, 1.0, |x| (traj.eval(x).unwrap()[0] - x).abs());
    assert!(err < 1e-8, "{err}");
}

#[test]
fn riccati_and_pendulum_fixed_points() {
    let zero = InputFunction::constant(fine(1.0), 0.0).unwrap();
    let t = solve_ode_rk45(&OdeSystem::riccati_like(0.0, 1.0), &zero, 1e-8, 1e-10).unwrap();
    assert!(sup_over(100, 0.0, 1.0, |x| t.eval(x).unwrap()[0].abs()) == 0.0);
    let p = pendulum_solve(&zero, 1.0, 1.0).unwrap();
    assert_eq!(p.dim(), 2);
    assert!(sup_over(100, 0.0, 1.0, |x| p.eval(x).unwrap().iter().map(|v| v.abs()).sum()) == 0.0);
}

#[test]
fn rk45_agrees_with_trapezoid_on_grf_inputs() {
    for l in [0.1, 0.2, 0.5] {
        let sampler = GrfSampler::new(l, fine(1.0)).unwrap();
        for u in sampler.sample_batch(42, 0..5) {
            let traj = solve_ode_rk45(&OdeSystem::antiderivative(0.0, 1.0), &u, 1e-8, 1e-10).unwrap();
            let table = AntiderivativeTable::new(&u);
            let err = sup_over(2000, 0.0, 1.0, |x| (traj.eval(x).unwrap()[0] - table.eval(x).unwrap()).abs());
            assert!(err < 1e-6, "l = {l}: sup error {err}");
        }
    }
}

#[test]
fn tighter_tolerances_do_not_increase_error() {
    let sampler = GrfSampler::new(0.2, fine(1.0)).unwrap();
    for u in sampler.sample_batch(7, 0..20) {
        let table = AntiderivativeTable::new(&u);
        let err = |rtol: f64, atol: f64| {
            let traj = solve_ode_rk45(&OdeSystem::antiderivative(0.0, 1.0), &u, rtol, atol).unwrap();
            sup_over(1000, 0.0, 1.0, |x| (traj.eval(x).unwrap()[0] - table.eval(x).unwrap()).abs())
        };
        let coarse = err(1e-4, 1e-6);
        let halved = err(5e-5, 5e-7);
        assert!(halved <= coarse, "{halved} > {coarse}");
    }
}

/// Nested trapezoid on a 1e5-cell grid: s2 = int u, s1 = int s2.
fn nested_quadrature(u: &InputFunction, horizon: f64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let h = horizon / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let uv: Vec<f64> = xs.iter().map(|&x| u.eval(x.min(horizon)).unwrap()).collect();
    let mut s2 = vec![0.0; n + 1];
    let mut s1 = vec![0.0; n + 1];
    for i in 1..=n {
        s2[i] = s2[i - 1] + 0.5 * h * (uv[i - 1] + uv[i]);
        s1[i] = s1[i - 1] + 0.5 * h * (s2[i - 1] + s2[i]);
    }
    (xs, s1, s2)
}

#[test]
fn frictionless_free_pendulum_matches_nested_quadrature() {
    let horizon = 2.0;
    let sampler = GrfSampler::new(0.2, fine(horizon)).unwrap();
    for u in sampler.sample_batch(3, 0..3) {
        let traj = pendulum_solve(&u, 0.0, horizon).unwrap();
        let (xs, s1, s2) = nested_quadrature(&u, horizon, 100_000);
        for i in (0..xs.len()).step_by(997) {
            let s = traj.eval(xs[i]).unwrap();
            assert!((s[0] - s1[i]).abs() < 1e-6, "s1 at {}: {} vs {}", xs[i], s[0], s1[i]);
            assert!((s[1] - s2[i]).abs() < 1e-6, "s2 at {}: {} vs {}", xs[i], s[1], s2[i]);
        }
    }
}

#[test]
fn unforced_pendulum_conserves_energy() {
    let k = 1.0;
    let horizon = 5.0;
    let zero = InputFunction::constant(fine(horizon), 0.0).unwrap();
    let sys = OdeSystem::new(OdeRhs::Pendulum { k }, vec![0.5, 0.0], 0.0, horizon).unwrap();
    let traj = solve_ode(&sys, &zero, &OdeOptions::default()).unwrap();
    let energy = |s: &[f64]| 0.5 * s[1] * s[1] - k * s[0].cos();
    let h0 = energy(&[0.5, 0.0]);
    let drift = sup_over(500, 0.0, horizon, |x| (energy(&traj.eval(x).unwrap()) - h0).abs());
    assert!(drift < 1e-6, "{drift}");
}

#[test]
fn riccati_blowup_is_flagged_not_fatal() {
    let u = InputFunction::constant(fine(1.0), -400.0).unwrap();
    let traj = solve_ode_rk45(&OdeSystem::riccati_like(0.0, 1.0), &u, 1e-8, 1e-10).unwrap();
    assert!(traj.is_divergent(), "{:?}", traj.status);
    assert!(traj.eval(0.9).is_err());
}

#[test]
fn invalid_ode_inputs_rejected() {
    let u = InputFunction::constant(fine(1.0), 1.0).unwrap();
    assert!(solve_ode_rk45(&OdeSystem::antiderivative(0.0, 1.0), &u, 0.0, 1e-10).is_err());
    assert!(pendulum_solve(&u, 1.0, 2.0).is_err(), "u only covers [0, 1]");
    assert!(pendulum_solve(&u, 1.0, 0.0).is_err());
    assert!(OdeSystem::new(OdeRhs::Antiderivative, vec![0.0, 1.0], 0.0, 1.0).is_err());
}

fn manufactured_error(intervals: usize) -> f64 {
    let d = 0.01;
    let cfg = PdeConfig {
        diffusion: d,
        reaction: 0.0,
        nx: intervals + 1,
        nt: intervals + 1,
        ..PdeConfig::default()
    };
    // s* = t sin(pi x); source = s*_t - D s*_xx
    let sol = solve_reaction_diffusion(&cfg, |x, t| (PI * x).sin() * (1.0 + d * PI * PI * t)).unwrap();
    let mut worst = 0.0f64;
    for (j, &t) in sol.ts.iter().enumerate() {
        for (i, &x) in sol.xs.iter().enumerate() {
            worst = worst.max((sol.at(i, j) - t * (PI * x).sin()).abs());
        }
    }
    worst
}

#[test]
fn crank_nicolson_is_second_order_on_manufactured_solution() {
    let e25 = manufactured_error(25);
    let e50 = manufactured_error(50);
    let e100 = manufactured_error(100);
    for ratio in [e25 / e50, e50 / e100] {
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio} ({e25:e}, {e50:e}, {e100:e})");
    }
}

#[test]
fn strong_diffusion_reaches_steady_state() {
    let cfg = PdeConfig {
        diffusion: 1.0,
        reaction: 0.0,
        ..PdeConfig::default()
    };
    let u = InputFunction::from_fn(fine(1.0), |x| (PI * x).sin()).unwrap();
    let sol = diffusion_reaction_solve(&u, &cfg).unwrap();
    let last = sol.ts.len() - 1;
    for (i, &x) in sol.xs.iter().enumerate() {
        let steady = (PI * x).sin() / (PI * PI);
        assert!((sol.at(i, last) - steady).abs() <= 0.05 * steady.abs() + 1e-12);
    }
}

fn reaction_diffusion_grid(u: &InputFunction, intervals: usize) -> PdeSolution {
    let cfg = PdeConfig {
        nx: intervals + 1,
        nt: intervals + 1,
        ..PdeConfig::default()
    };
    diffusion_reaction_solve(u, &cfg).unwrap()
}

#[test]
fn diffusion_reaction_self_convergence() {
    let sampler = GrfSampler::new(0.2, fine(1.0)).unwrap();
    for u in sampler.sample_batch(5, 0..3) {
        let reference = reaction_diffusion_grid(&u, 400);
        let err = |intervals: usize| {
            let sol = reaction_diffusion_grid(&u, intervals);
            let stride = 400 / intervals;
            let mut worst = 0.0f64;
            for j in 0..=intervals {
                for i in 0..=intervals {
                    worst = worst.max((sol.at(i, j) - reference.at(i * stride, j * stride)).abs());
                }
            }
            worst
        };
        let (e50, e100) = (err(50), err(100));
        let ratio = e50 / e100;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio} ({e50:e}, {e100:e})");
    }
}

#[test]
fn solvers_are_deterministic() {
    let sampler = GrfSampler::new(0.2, fine(1.0)).unwrap();
    let u = sampler.sample(1, 0);
    let a = pendulum_solve(&u, 1.0, 1.0).unwrap();
    let b = pendulum_solve(&u, 1.0, 1.0).unwrap();
    assert_eq!(a.nodes(), b.nodes());
    let p = diffusion_reaction_solve(&u, &PdeConfig::default()).unwrap();
    let q = diffusion_reaction_solve(&u, &PdeConfig::default()).unwrap();
    assert_eq!(p.values, q.values);
}
