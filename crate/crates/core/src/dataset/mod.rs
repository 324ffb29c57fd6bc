//! Triplet datasets `(u at sensors, y, G(u)(y))`.
//!
//! Records are kept struct-of-arrays. Sensor vectors are stored once per
//! input function and referenced by row, which is also the layout training
//! wants for branch-side deduplication.

mod build;
mod io;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

pub use build::{
    build_ode_dataset, build_ode_dataset_from_inputs, build_ode_dataset_opts, build_pde_dataset,
    build_ode_dataset_ids, build_pde_dataset_from_inputs, build_pde_dataset_ids, build_pde_dataset_with,
    split_by_u, OdeBuildOptions,
};
pub use io::{load_dataset, read_dataset, save_dataset, write_dataset, DATASET_MAGIC};

use crate::error::{invalid, shape, Result};
use crate::solvers::{OdeSystem, PdeConfig};
use crate::spaces::SensorGrid;

/// The four operator-learning problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    /// `ds/dx = u(x)`, `s(0) = 0` on `[0, 1]`.
    Antiderivative,
    /// `ds/dx = -s^2 + u(x)`, `s(0) = 0` on `[0, 1]`.
    NonlinearOde,
    /// `s1' = s2`, `s2' = -k sin s1 + u`, zero initial state; target is `s1`.
    Pendulum { k: f64, horizon: f64 },
    /// `s_t = D s_xx + k s^2 + u(x)` on `[0, 1]^2`, zero initial and boundary data.
    DiffusionReaction { diffusion: f64, reaction: f64 },
}

impl Problem {
    pub fn tag(&self) -> u8 {
        match self {
            Problem::Antiderivative => 1,
            Problem::NonlinearOde => 2,
            Problem::Pendulum { .. } => 3,
            Problem::DiffusionReaction { .. } => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Problem::Antiderivative => "antiderivative",
            Problem::NonlinearOde => "nonlinear_ode",
            Problem::Pendulum { .. } => "pendulum",
            Problem::DiffusionReaction { .. } => "diffusion_reaction",
        }
    }

    /// Dimension of the query location `y`.
    pub fn dim_y(&self) -> usize {
        match self {
            Problem::DiffusionReaction { .. } => 2,
            _ => 1,
        }
    }

    /// Right end of the input domain `[0, T]`.
    pub fn horizon(&self) -> f64 {
        match *self {
            Problem::Pendulum { horizon, .. } => horizon,
            _ => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Problem::Pendulum { k, horizon } => {
                if !k.is_finite() || !(horizon > 0.0 && horizon.is_finite()) {
                    return Err(invalid(format!("pendulum needs finite k and T > 0, got k={k}, T={horizon}")));
                }
            }
            Problem::DiffusionReaction { diffusion, reaction } => {
                PdeConfig {
                    diffusion,
                    reaction,
                    ..PdeConfig::default()
                }
                .validate()?;
            }
            _ => {}
        }
        Ok(())
    }

    /// The ODE system, or `None` for the PDE problem.
    pub fn ode_system(&self) -> Result<Option<OdeSystem>> {
        Ok(match *self {
            Problem::Antiderivative => Some(OdeSystem::antiderivative(0.0, 1.0)),
            Problem::NonlinearOde => Some(OdeSystem::riccati_like(0.0, 1.0)),
            Problem::Pendulum { k, horizon } => Some(OdeSystem::pendulum(k, horizon)?),
            Problem::DiffusionReaction { .. } => None,
        })
    }

    /// Whether `y` lies in the problem's query domain.
    pub fn contains(&self, y: &[f64]) -> bool {
        const TOL: f64 = 1e-12;
        y.len() == self.dim_y() && y.iter().all(|&v| v >= -TOL && v <= self.horizon() + TOL)
    }
}

/// One record, borrowed from a [`Dataset`].
#[derive(Debug, Clone, Copy)]
pub struct Triplet<'a> {
    pub u_sensors: ArrayView1<'a, f64>,
    pub y: ArrayView1<'a, f64>,
    pub target: f64,
    pub u_id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    problem: Problem,
    sensors: SensorGrid,
    /// Sample identifier of each stored input function.
    u_ids: Vec<u64>,
    /// Sensor values, one row per input function.
    u_table: Array2<f64>,
    /// Row of `u_table` for each record.
    record_u: Vec<usize>,
    ys: Array2<f64>,
    targets: Vec<f64>,
    config: serde_json::Value,
    dropped: usize,
}

impl Dataset {
    /// Assembles a dataset, checking every structural invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        problem: Problem,
        sensors: SensorGrid,
        u_ids: Vec<u64>,
        u_table: Array2<f64>,
        record_u: Vec<usize>,
        ys: Array2<f64>,
        targets: Vec<f64>,
        config: serde_json::Value,
        dropped: usize,
    ) -> Result<Self> {
        let m = sensors.len();
        if u_table.ncols() != m {
            return Err(shape(format!("sensor rows have length {}, grid has {m}", u_table.ncols())));
        }
        if u_table.nrows() != u_ids.len() {
            return Err(shape(format!("{} sensor rows for {} u ids", u_table.nrows(), u_ids.len())));
        }
        let n = targets.len();
        if ys.nrows() != n || record_u.len() != n {
            return Err(shape(format!(
                "record arrays disagree: {} targets, {} locations, {} u refs",
                n,
                ys.nrows(),
                record_u.len()
            )));
        }
        if ys.ncols() != problem.dim_y() {
            return Err(shape(format!("locations have dim {}, problem needs {}", ys.ncols(), problem.dim_y())));
        }
        let mut seen = std::collections::HashSet::with_capacity(u_ids.len());
        if !u_ids.iter().all(|id| seen.insert(*id)) {
            return Err(invalid("duplicate u id"));
        }
        if let Some(&r) = record_u.iter().find(|&&r| r >= u_ids.len()) {
            return Err(shape(format!("record references u row {r} of {}", u_ids.len())));
        }
        if !u_table.iter().all(|v| v.is_finite()) || !targets.iter().all(|v| v.is_finite()) {
            return Err(invalid("non-finite sensor value or target"));
        }
        for y in ys.rows() {
            if !problem.contains(&y.to_vec()) {
                return Err(invalid(format!("location {y} outside the {} domain", problem.name())));
            }
        }
        Ok(Dataset {
            problem,
            sensors,
            u_ids,
            u_table,
            record_u,
            ys,
            targets,
            config,
            dropped,
        })
    }

    pub fn problem(&self) -> Problem {
        self.problem
    }

    pub fn sensors(&self) -> &SensorGrid {
        &self.sensors
    }

    /// Number of sensors.
    pub fn m(&self) -> usize {
        self.sensors.len()
    }

    pub fn dim_y(&self) -> usize {
        self.ys.ncols()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn record(&self, i: usize) -> Triplet<'_> {
        let row = self.record_u[i];
        Triplet {
            u_sensors: self.u_table.row(row),
            y: self.ys.row(i),
            target: self.targets[i],
            u_id: self.u_ids[row],
        }
    }

    pub fn records(&self) -> impl Iterator<Item = Triplet<'_>> {
        (0..self.len()).map(|i| self.record(i))
    }

    pub fn u_ids(&self) -> &[u64] {
        &self.u_ids
    }

    pub fn u_table(&self) -> ArrayView2<'_, f64> {
        self.u_table.view()
    }

    pub fn record_u(&self) -> &[usize] {
        &self.record_u
    }

    pub fn ys(&self) -> ArrayView2<'_, f64> {
        self.ys.view()
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Generation settings (seeds, space parameters, solver settings).
    pub fn config(&self) -> &serde_json::Value {
        &self.config
    }

    /// Records lost to divergent trajectories at build time.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Per-record sensor matrix (`n x m`). Allocates.
    pub fn u_sensors_dense(&self) -> Array2<f64> {
        self.u_table.select(Axis(0), &self.record_u)
    }

    /// Training-time shape validation against a model.
    pub fn check_shapes(&self, m: usize, dim_y: usize) -> Result<()> {
        if self.m() != m || self.dim_y() != dim_y {
            return Err(shape(format!(
                "dataset has m={}, dim(y)={}; model expects m={m}, dim(y)={dim_y}",
                self.m(),
                self.dim_y()
            )));
        }
        Ok(())
    }

    /// The records whose input function has one of the given table rows,
    /// in the original record order.
    pub fn subset_by_rows(&self, rows: &[usize]) -> Dataset {
        let mut new_row = vec![usize::MAX; self.u_ids.len()];
        let mut kept: Vec<usize> = rows.to_vec();
        kept.sort_unstable();
        kept.dedup();
        for (new, &old) in kept.iter().enumerate() {
            new_row[old] = new;
        }
        let records: Vec<usize> = (0..self.len()).filter(|&i| new_row[self.record_u[i]] != usize::MAX).collect();
        Dataset {
            problem: self.problem,
            sensors: self.sensors.clone(),
            u_ids: kept.iter().map(|&r| self.u_ids[r]).collect(),
            u_table: self.u_table.select(Axis(0), &kept),
            record_u: records.iter().map(|&i| new_row[self.record_u[i]]).collect(),
            ys: self.ys.select(Axis(0), &records),
            targets: records.iter().map(|&i| self.targets[i]).collect(),
            config: self.config.clone(),
            dropped: 0,
        }
    }

    /// CSV with columns `u_1..u_m`, the location components, `target`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.m()).map(|i| format!("u_{i}")).collect();
        if self.dim_y() == 1 {
            header.push("y".into());
        } else {
            header.extend(["x".into(), "t".into()]);
        }
        header.push("target".into());
        writeln!(w, "{}", header.join(","))?;
        for rec in self.records() {
            let fields: Vec<String> = rec
                .u_sensors
                .iter()
                .chain(rec.y.iter())
                .chain(std::iter::once(&rec.target))
                .map(|v| format!("{v:e}"))
                .collect();
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}
