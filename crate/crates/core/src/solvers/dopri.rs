//! Dormand-Prince 5(4) with PI step-size control and cubic Hermite dense
//! output between accepted steps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spaces::InputFunction;

/// Right-hand side `g(s, u(x), x)` of `ds/dx = g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OdeRhs {
    /// `ds/dx = u(x)`
    Antiderivative,
    /// `ds/dx = -s^2 + u(x)`
    RiccatiLike,
    /// `ds1/dt = s2`, `ds2/dt = -k sin(s1) + u(t)`
    Pendulum { k: f64 },
}

impl OdeRhs {
    pub fn dim(&self) -> usize {
        match self {
            OdeRhs::Antiderivative | OdeRhs::RiccatiLike => 1,
            OdeRhs::Pendulum { .. } => 2,
        }
    }

    #[inline]
    fn eval(&self, s: &[f64], u: f64, out: &mut [f64]) {
        match *self {
            OdeRhs::Antiderivative => out[0] = u,
            OdeRhs::RiccatiLike => out[0] = -s[0] * s[0] + u,
            OdeRhs::Pendulum { k } => {
                out[0] = s[1];
                out[1] = -k * s[0].sin() + u;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSystem {
    pub rhs: OdeRhs,
    pub s0: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl OdeSystem {
    pub fn new(rhs: OdeRhs, s0: Vec<f64>, a: f64, b: f64) -> Result<Self> {
        if s0.len() != rhs.dim() {
            return Err(invalid(format!(
                "initial state has {} components, system needs {}",
                s0.len(),
                rhs.dim()
            )));
        }
        if s0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("initial state must be finite"));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!("bad interval [{a}, {b}]")));
        }
        if let OdeRhs::Pendulum { k } = rhs {
            if !k.is_finite() {
                return Err(invalid("pendulum k must be finite"));
            }
        }
        Ok(Self { rhs, s0, a, b })
    }

    pub fn antiderivative(a: f64, b: f64) -> Self {
        Self::new(OdeRhs::Antiderivative, vec![0.0], a, b).expect("valid")
    }

    pub fn riccati_like(a: f64, b: f64) -> Self {
        Self::new(OdeRhs::RiccatiLike, vec![0.0], a, b).expect("valid")
    }

    pub fn pendulum(k: f64, horizon: f64) -> Result<Self> {
        Self::new(OdeRhs::Pendulum { k }, vec![0.0, 0.0], 0.0, horizon)
    }

    pub fn dim(&self) -> usize {
        self.rhs.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// `|s|` above this marks the trajectory divergent.
    pub blowup: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 1_000_000,
            blowup: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    Diverged { at: f64, reason: String },
}

/// Accepted steps of an ODE solve with `(x, s, ds/dx)` at every node.
#[derive(Debug, Clone)]
pub struct OdeTrajectory {
    dim: usize,
    xs: Vec<f64>,
    states: Vec<f64>,
    derivs: Vec<f64>,
    pub status: SolveStatus,
    pub rejected_steps: usize,
}

impl OdeTrajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self.status, SolveStatus::Diverged { .. })
    }

    pub fn state_at_node(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    /// Solution at `x` (cubic Hermite between accepted steps).
    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        let (lo, hi) = (self.xs[0], *self.xs.last().unwrap());
        let tol = 1e-12 * (hi - lo).abs().max(1.0);
        if self.is_divergent() {
            return Err(Error::OutOfDomain(format!(
                "query {x} on a divergent trajectory ({:?})",
                self.status
            )));
        }
        if !(x >= lo - tol && x <= hi + tol) {
            return Err(Error::OutOfDomain(format!("x = {x} (solved on [{lo}, {hi}])")));
        }
        let x = x.clamp(lo, hi);
        let n = self.xs.len();
        if n == 1 {
            return Ok(self.states.clone());
        }
        let j = self.xs.partition_point(|&p| p <= x).saturating_sub(1).min(n - 2);
        let (x0, x1) = (self.xs[j], self.xs[j + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let d = self.dim;
        Ok((0..d)
            .map(|k| {
                let y0 = self.states[j * d + k];
                let y1 = self.states[(j + 1) * d + k];
                let f0 = self.derivs[j * d + k];
                let f1 = self.derivs[(j + 1) * d + k];
                h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
            })
            .collect())
    }

    pub fn eval_component(&self, x: f64, component: usize) -> Result<f64> {
        if component >= self.dim {
            return Err(invalid(format!("component {component} of a {}-dim state", self.dim)));
        }
        Ok(self.eval(x)?[component])
    }

    /// CSV with columns `x, s1, ..., sK` at the accepted nodes.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|k| format!("s{k}")).collect();
        writeln!(w, "x,{}", header.join(","))?;
        for (i, x) in self.xs.iter().enumerate() {
            let s: Vec<String> = self.state_at_node(i).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{x},{}", s.join(","))?;
        }
        Ok(())
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;

/// Integrates `system` driven by `u` over `[a, b]`.
///
/// Blow-up, step-size underflow and step-count exhaustion are reported in
/// [`OdeTrajectory::status`] rather than as errors.
pub fn solve_ode(system: &OdeSystem, u: &InputFunction, opts: &OdeOptions) -> Result<OdeTrajectory> {
    if !(opts.rtol > 0.0) || !(opts.atol > 0.0) {
        return Err(invalid(format!(
            "tolerances must be positive (rtol {}, atol {})",
            opts.rtol, opts.atol
        )));
    }
    let (ua, ub) = u.domain();
    let span_tol = 1e-12 * (system.b - system.a).abs().max(1.0);
    if ua > system.a + span_tol || ub < system.b - span_tol {
        return Err(Error::OutOfDomain(format!(
            "input defined on [{ua}, {ub}] but the system needs [{}, {}]",
            system.a, system.b
        )));
    }

    let d = system.dim();
    let rhs = system.rhs;
    let f = |x: f64, s: &[f64], out: &mut [f64]| rhs.eval(s, u.eval_clamped(x), out);

    let (a, b) = (system.a, system.b);
    let mut x = a;
    let mut y = system.s0.clone();
    let mut k1 = vec![0.0; d];
    f(x, &y, &mut k1);

    let mut traj = OdeTrajectory {
        dim: d,
        xs: vec![x],
        states: y.clone(),
        derivs: k1.clone(),
        status: SolveStatus::Converged,
        rejected_steps: 0,
    };

    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut k5 = vec![0.0; d];
    let mut k6 = vec![0.0; d];
    let mut k7 = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    let mut y_new = vec![0.0; d];

    let mut h = initial_step(&f, x, &y, &k1, b - a, opts);
    let h_min = 1e-14 * (b - a);
    let mut err_old = 1e-4f64;
    let mut rejected_last = false;
    let mut steps = 0usize;
    // u is piecewise linear, so the right-hand side has kinks at the input
    // grid nodes; steps never straddle one.
    let kinks: Vec<f64> = u
        .grid()
        .points()
        .iter()
        .copied()
        .filter(|&p| p > a + h_min && p < b - h_min)
        .chain(std::iter::once(b))
        .collect();
    let mut next_kink = 0usize;

    while x < b {
        if steps >= opts.max_steps {
            traj.status = SolveStatus::Diverged {
                at: x,
                reason: format!("exceeded {} steps", opts.max_steps),
            };
            return Ok(traj);
        }
        if h < h_min {
            traj.status = SolveStatus::Diverged {
                at: x,
                reason: format!("step size underflow (h = {h:e})"),
            };
            return Ok(traj);
        }
        let stop = kinks[next_kink];
        let clipped = x + h >= stop;
        if clipped {
            h = stop - x;
        }

        for i in 0..d {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        f(x + C2 * h, &tmp, &mut k2);
        for i in 0..d {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(x + C3 * h, &tmp, &mut k3);
        for i in 0..d {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(x + C4 * h, &tmp, &mut k4);
        for i in 0..d {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(x + C5 * h, &tmp, &mut k5);
        for i in 0..d {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let x_new = if clipped { stop } else { x + h };
        f(x_new, &tmp, &mut k6);
        for i in 0..d {
            y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(x_new, &y_new, &mut k7);
        steps += 1;

        let mut err = 0.0;
        for i in 0..d {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / d as f64).sqrt();

        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            // treat as a failed step; repeated failures end in underflow
            h *= FAC_MIN;
            rejected_last = true;
            traj.rejected_steps += 1;
            continue;
        }

        if err <= 1.0 {
            x = x_new;
            if clipped {
                next_kink += 1;
            }
            y.copy_from_slice(&y_new);
            k1.copy_from_slice(&k7);
            traj.xs.push(x);
            traj.states.extend_from_slice(&y);
            traj.derivs.extend_from_slice(&k1);
            if y.iter().any(|v| v.abs() > opts.blowup) {
                traj.status = SolveStatus::Diverged {
                    at: x,
                    reason: format!("|s| exceeded {:e}", opts.blowup),
                };
                return Ok(traj);
            }
            let mut fac = SAFETY * err.max(1e-10).powf(-EXPO) * err_old.powf(BETA);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if rejected_last {
                fac = fac.min(1.0);
            }
            err_old = err.max(1e-4);
            rejected_last = false;
            h *= fac;
        } else {
            let fac = (SAFETY * err.powf(-EXPO)).max(FAC_MIN);
            h *= fac;
            rejected_last = true;
            traj.rejected_steps += 1;
        }
    }
    Ok(traj)
}

fn initial_step<F>(f: &F, x: f64, y: &[f64], f0: &[f64], span: f64, opts: &OdeOptions) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    // Hairer-Wanner starting step heuristic
    let d = y.len();
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let norm = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / d as f64).sqrt();
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; d];
    f(x + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

pub fn solve_ode_rk45(system: &OdeSystem, u: &InputFunction, rtol: f64, atol: f64) -> Result<OdeTrajectory> {
    let opts = OdeOptions {
        rtol,
        atol,
        ..OdeOptions::default()
    };
    solve_ode(system, u, &opts)
}

/// Pendulum trajectory `(s1, s2)` on `[0, horizon]` from rest.
pub fn pendulum_solve(u: &InputFunction, k: f64, horizon: f64) -> Result<OdeTrajectory> {
    if !(horizon > 0.0) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    solve_ode(&OdeSystem::pendulum(k, horizon)?, u, &OdeOptions::default())
}
