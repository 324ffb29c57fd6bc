//! Crank-Nicolson solver for `s_t = D s_xx + k s^2 + f(x, t)` on
//! `[0, 1] x [0, 1]` with zero initial and boundary values.
//!
//! Each step solves the CN system twice: a predictor with the reaction term
//! frozen at the old level, then one Picard sweep with the reaction term
//! averaged between the old level and the predictor.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::SolveStatus;
use crate::error::{invalid, Result};
use crate::spaces::InputFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeConfig {
    pub diffusion: f64,
    pub reaction: f64,
    /// Grid points in x (including both boundaries).
    pub nx: usize,
    /// Grid points in t (including t = 0).
    pub nt: usize,
    /// Magnitude above which the solution is flagged divergent.
    pub blowup: f64,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            diffusion: 0.01,
            reaction: 0.01,
            nx: 100,
            nt: 100,
            blowup: 1e3,
        }
    }
}

impl PdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.diffusion > 0.0) || !self.diffusion.is_finite() {
            return Err(invalid(format!("diffusion must be positive, got {}", self.diffusion)));
        }
        if !self.reaction.is_finite() {
            return Err(invalid("reaction rate must be finite"));
        }
        if self.nx < 3 || self.nt < 3 {
            return Err(invalid(format!("grid sizes must be >= 3, got {} x {}", self.nx, self.nt)));
        }
        Ok(())
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(self.nx)
    }

    pub fn ts(&self) -> Vec<f64> {
        linspace(self.nt)
    }
}

fn linspace(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    v[n - 1] = 1.0;
    v
}

/// Solution on the full space-time grid; `values[[j, i]] = s(x_i, t_j)`.
#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    pub values: Array2<f64>,
    pub status: SolveStatus,
}

impl PdeSolution {
    pub fn is_divergent(&self) -> bool {
        matches!(self.status, SolveStatus::Diverged { .. })
    }

    pub fn at(&self, ix: usize, it: usize) -> f64 {
        self.values[[it, ix]]
    }

    /// CSV with columns `x, t, s`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "x,t,s")?;
        for (j, t) in self.ts.iter().enumerate() {
            for (i, x) in self.xs.iter().enumerate() {
                writeln!(w, "{x},{t},{}", self.values[[j, i]])?;
            }
        }
        Ok(())
    }
}

/// Thomas algorithm for a tridiagonal system with constant off-diagonals
/// `off` and diagonal `diag`. `rhs` is overwritten with the solution.
pub fn solve_tridiagonal_constant(diag: f64, off: f64, rhs: &mut [f64], scratch: &mut Vec<f64>) {
    let n = rhs.len();
    scratch.clear();
    scratch.resize(n, 0.0);
    let c = scratch;
    let mut denom = diag;
    c[0] = off / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag - off * c[i - 1];
        c[i] = off / denom;
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// General source version; `source(x, t)` is the forcing term.
pub fn solve_reaction_diffusion<F>(cfg: &PdeConfig, source: F) -> Result<PdeSolution>
where
    F: Fn(f64, f64) -> f64,
{
    cfg.validate()?;
    let xs = cfg.xs();
    let ts = cfg.ts();
    let (nx, nt) = (cfg.nx, cfg.nt);
    let h = 1.0 / (nx - 1) as f64;
    let dt = 1.0 / (nt - 1) as f64;
    let r = cfg.diffusion * dt / (h * h);
    let k = cfg.reaction;
    let interior = nx - 2;

    let mut values = Array2::<f64>::zeros((nt, nx));
    let mut status = SolveStatus::Converged;

    let mut old = vec![0.0; nx];
    let mut f_old: Vec<f64> = xs.iter().map(|&x| source(x, ts[0])).collect();
    let mut f_new = vec![0.0; nx];
    let mut base = vec![0.0; interior];
    let mut rhs = vec![0.0; interior];
    let mut pred = vec![0.0; interior];
    let mut scratch = Vec::with_capacity(interior);

    for j in 1..nt {
        for (i, fx) in f_new.iter_mut().enumerate() {
            *fx = source(xs[i], ts[j]);
        }
        // explicit half of CN plus the averaged source
        for i in 1..nx - 1 {
            base[i - 1] = (1.0 - r) * old[i]
                + 0.5 * r * (old[i - 1] + old[i + 1])
                + dt * 0.5 * (f_old[i] + f_new[i]);
        }
        // predictor: reaction at the old level
        for i in 0..interior {
            let s = old[i + 1];
            pred[i] = base[i] + dt * k * s * s;
        }
        solve_tridiagonal_constant(1.0 + r, -0.5 * r, &mut pred, &mut scratch);
        // one Picard sweep with the reaction averaged over the step
        for i in 0..interior {
            let s0 = old[i + 1];
            let s1 = pred[i];
            rhs[i] = base[i] + dt * k * 0.5 * (s0 * s0 + s1 * s1);
        }
        solve_tridiagonal_constant(1.0 + r, -0.5 * r, &mut rhs, &mut scratch);

        old[0] = 0.0;
        old[nx - 1] = 0.0;
        old[1..nx - 1].copy_from_slice(&rhs);
        std::mem::swap(&mut f_old, &mut f_new);
        let mut row = values.row_mut(j);
        row.as_slice_mut().unwrap().copy_from_slice(&old);

        if old.iter().any(|v| !v.is_finite() || v.abs() > cfg.blowup) {
            status = SolveStatus::Diverged {
                at: ts[j],
                reason: format!("|s| exceeded {:e}", cfg.blowup),
            };
            break;
        }
    }
    Ok(PdeSolution {
        xs,
        ts,
        values,
        status,
    })
}

/// Diffusion-reaction solution driven by the time-independent source `u(x)`.
pub fn diffusion_reaction_solve(u: &InputFunction, cfg: &PdeConfig) -> Result<PdeSolution> {
    cfg.validate()?;
    let xs = cfg.xs();
    let (a, b) = u.domain();
    if a > 0.0 || b < 1.0 {
        return Err(crate::Error::OutOfDomain(format!(
            "source defined on [{a}, {b}], PDE needs [0, 1]"
        )));
    }
    let ux: Vec<f64> = xs.iter().map(|&x| u.eval(x)).collect::<Result<_>>()?;
    let h = 1.0 / (cfg.nx - 1) as f64;
    solve_reaction_diffusion(cfg, |x, _t| {
        let i = (x / h).round() as usize;
        ux[i.min(ux.len() - 1)]
    })
}
