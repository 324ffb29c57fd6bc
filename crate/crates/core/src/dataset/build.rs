use std::ops::Range;
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use super::{Dataset, Problem};
use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Purpose};
use crate::solvers::{diffusion_reaction_solve, solve_ode, OdeOptions, OdeSystem, PdeConfig};
use crate::spaces::{restrict_to_sensors, InputFunction, InputSpace, SensorGrid, FINE_GRID_POINTS};

/// Functions sampled and solved per work unit.
const CHUNK: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeBuildOptions {
    pub rtol: f64,
    pub atol: f64,
    pub fine_grid_points: usize,
}

impl Default for OdeBuildOptions {
    fn default() -> Self {
        let ode = OdeOptions::default();
        OdeBuildOptions {
            rtol: ode.rtol,
            atol: ode.atol,
            fine_grid_points: FINE_GRID_POINTS,
        }
    }
}

/// Records produced by one input function.
struct Block {
    u_id: u64,
    sensors: Vec<f64>,
    ys: Vec<f64>,
    targets: Vec<f64>,
}

fn ode_block(
    system: &OdeSystem,
    opts: &OdeOptions,
    u: &InputFunction,
    u_id: u64,
    sensors: &SensorGrid,
    y_per_u: usize,
    seed: u64,
) -> Result<Option<Block>> {
    let traj = solve_ode(system, u, opts)?;
    if traj.is_divergent() {
        return Ok(None);
    }
    let mut rng = stream(seed, Purpose::QueryLocation, u_id);
    let span = system.b - system.a;
    let ys: Vec<f64> = (0..y_per_u).map(|_| system.a + span * rng.random::<f64>()).collect();
    let targets = ys.iter().map(|&y| traj.eval_component(y, 0)).collect::<Result<_>>()?;
    Ok(Some(Block {
        u_id,
        sensors: restrict_to_sensors(u, sensors)?,
        ys,
        targets,
    }))
}

fn check_sizes(m: usize, n_u: usize, per_u: usize) -> Result<()> {
    if m < 2 {
        return Err(invalid(format!("need at least 2 sensors, got {m}")));
    }
    if n_u == 0 || per_u == 0 {
        return Err(invalid(format!(
            "need at least one function and one location per function (got {n_u}, {per_u})"
        )));
    }
    Ok(())
}

fn assemble(
    problem: Problem,
    sensors: SensorGrid,
    blocks: Vec<Option<Block>>,
    config: serde_json::Value,
    per_u: usize,
) -> Result<Dataset> {
    let attempted = blocks.len();
    let blocks: Vec<Block> = blocks.into_iter().flatten().collect();
    if blocks.is_empty() {
        return Err(Error::AllDiverged(attempted));
    }
    let dropped = (attempted - blocks.len()) * per_u;
    let m = sensors.len();
    let dim_y = problem.dim_y();
    let n: usize = blocks.iter().map(|b| b.targets.len()).sum();
    let mut u_table = Vec::with_capacity(blocks.len() * m);
    let mut ys = Vec::with_capacity(n * dim_y);
    let mut targets = Vec::with_capacity(n);
    let mut record_u = Vec::with_capacity(n);
    let mut u_ids = Vec::with_capacity(blocks.len());
    for (row, b) in blocks.into_iter().enumerate() {
        u_ids.push(b.u_id);
        u_table.extend_from_slice(&b.sensors);
        record_u.extend(std::iter::repeat_n(row, b.targets.len()));
        ys.extend_from_slice(&b.ys);
        targets.extend_from_slice(&b.targets);
    }
    let n_funcs = u_ids.len();
    Dataset::from_parts(
        problem,
        sensors,
        u_ids,
        Array2::from_shape_vec((n_funcs, m), u_table).map_err(|e| invalid(e.to_string()))?,
        record_u,
        Array2::from_shape_vec((n, dim_y), ys).map_err(|e| invalid(e.to_string()))?,
        targets,
        config,
        dropped,
    )
}

/// Samples `n_u` inputs (ids `0..n_u`), solves each once and draws `y_per_u`
/// uniform locations on `[0, T]` per solution.
pub fn build_ode_dataset(
    problem: Problem,
    space: InputSpace,
    m: usize,
    n_u: usize,
    y_per_u: usize,
    seed: u64,
) -> Result<Dataset> {
    build_ode_dataset_opts(problem, space, m, n_u, y_per_u, seed, &OdeBuildOptions::default())
}

pub fn build_ode_dataset_opts(
    problem: Problem,
    space: InputSpace,
    m: usize,
    n_u: usize,
    y_per_u: usize,
    seed: u64,
    opts: &OdeBuildOptions,
) -> Result<Dataset> {
    build_ode_dataset_ids(problem, space, m, 0..n_u as u64, y_per_u, seed, opts)
}

/// Builds from the input functions with ids in `ids`. Disjoint id ranges under
/// one seed give disjoint function sets.
pub fn build_ode_dataset_ids(
    problem: Problem,
    space: InputSpace,
    m: usize,
    ids: Range<u64>,
    y_per_u: usize,
    seed: u64,
    opts: &OdeBuildOptions,
) -> Result<Dataset> {
    let n_u = (ids.end.saturating_sub(ids.start)) as usize;
    check_sizes(m, n_u, y_per_u)?;
    problem.validate()?;
    let system = problem
        .ode_system()?
        .ok_or_else(|| invalid("build_ode_dataset needs an ODE problem"))?;
    let horizon = problem.horizon();
    let fine = Arc::new(SensorGrid::uniform(0.0, horizon, opts.fine_grid_points)?);
    let sensors = SensorGrid::uniform(0.0, horizon, m)?;
    let sampler = space.sampler(fine)?;
    let ode_opts = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        ..OdeOptions::default()
    };

    let chunks: Vec<Vec<Option<Block>>> = (0..(n_u as u64).div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let range = ids.start + c * CHUNK..(ids.start + (c + 1) * CHUNK).min(ids.end);
            let inputs = sampler.sample_batch(seed, range.clone());
            inputs
                .iter()
                .zip(range)
                .map(|(u, id)| ode_block(&system, &ode_opts, u, id, &sensors, y_per_u, seed))
                .collect()
        })
        .collect::<Result<_>>()?;

    let config = json!({
        "problem": problem,
        "space": space,
        "m": m,
        "ids": [ids.start, ids.end],
        "y_per_u": y_per_u,
        "seed": seed,
        "solver": {"method": "dopri5", "rtol": opts.rtol, "atol": opts.atol},
        "fine_grid_points": opts.fine_grid_points,
    });
    assemble(problem, sensors, chunks.into_iter().flatten().collect(), config, y_per_u)
}

/// Like [`build_ode_dataset`] for caller-supplied inputs; input `i` gets u id `i`.
pub fn build_ode_dataset_from_inputs(
    problem: Problem,
    inputs: &[InputFunction],
    m: usize,
    y_per_u: usize,
    seed: u64,
) -> Result<Dataset> {
    check_sizes(m, inputs.len(), y_per_u)?;
    problem.validate()?;
    let system = problem
        .ode_system()?
        .ok_or_else(|| invalid("build_ode_dataset needs an ODE problem"))?;
    let sensors = SensorGrid::uniform(0.0, problem.horizon(), m)?;
    let opts = OdeOptions::default();
    let blocks = inputs
        .par_iter()
        .enumerate()
        .map(|(i, u)| ode_block(&system, &opts, u, i as u64, &sensors, y_per_u, seed))
        .collect::<Result<Vec<_>>>()?;
    let config = json!({
        "problem": problem,
        "space": "explicit",
        "m": m,
        "n_u": inputs.len(),
        "y_per_u": y_per_u,
        "seed": seed,
        "solver": {"method": "dopri5", "rtol": opts.rtol, "atol": opts.atol},
    });
    assemble(problem, sensors, blocks, config, y_per_u)
}

fn pde_block(cfg: &PdeConfig, u: &InputFunction, u_id: u64, sensors: &SensorGrid, p: usize, seed: u64) -> Result<Option<Block>> {
    let sol = diffusion_reaction_solve(u, cfg)?;
    if sol.is_divergent() {
        return Ok(None);
    }
    let mut rng = stream(seed, Purpose::PdeSampling, u_id);
    let picks = rand::seq::index::sample(&mut rng, cfg.nx * cfg.nt, p);
    let mut ys = Vec::with_capacity(2 * p);
    let mut targets = Vec::with_capacity(p);
    for k in picks.iter() {
        let (ix, it) = (k % cfg.nx, k / cfg.nx);
        ys.extend([sol.xs[ix], sol.ts[it]]);
        targets.push(sol.at(ix, it));
    }
    Ok(Some(Block {
        u_id,
        sensors: restrict_to_sensors(u, sensors)?,
        ys,
        targets,
    }))
}

fn pde_problem(cfg: &PdeConfig, m: usize, n_u: usize, p: usize) -> Result<Problem> {
    cfg.validate()?;
    check_sizes(m, n_u, p)?;
    let total = cfg.nx * cfg.nt;
    if p > total {
        return Err(invalid(format!("P = {p} exceeds the {total} grid points")));
    }
    Ok(Problem::DiffusionReaction {
        diffusion: cfg.diffusion,
        reaction: cfg.reaction,
    })
}

/// Diffusion-reaction dataset with the default coefficients and 100 x 100 grid.
pub fn build_pde_dataset(space: InputSpace, m: usize, n_u: usize, p: usize, seed: u64) -> Result<Dataset> {
    build_pde_dataset_with(&PdeConfig::default(), space, m, n_u, p, seed)
}

/// Solves each of `n_u` sources once and keeps `p` grid points drawn
/// without replacement.
pub fn build_pde_dataset_with(
    cfg: &PdeConfig,
    space: InputSpace,
    m: usize,
    n_u: usize,
    p: usize,
    seed: u64,
) -> Result<Dataset> {
    build_pde_dataset_ids(cfg, space, m, 0..n_u as u64, p, seed)
}

/// Diffusion-reaction counterpart of [`build_ode_dataset_ids`].
pub fn build_pde_dataset_ids(
    cfg: &PdeConfig,
    space: InputSpace,
    m: usize,
    ids: Range<u64>,
    p: usize,
    seed: u64,
) -> Result<Dataset> {
    let n_u = (ids.end.saturating_sub(ids.start)) as usize;
    let problem = pde_problem(cfg, m, n_u, p)?;
    let fine = Arc::new(SensorGrid::uniform(0.0, 1.0, FINE_GRID_POINTS)?);
    let sensors = SensorGrid::uniform(0.0, 1.0, m)?;
    let sampler = space.sampler(fine)?;
    let chunks: Vec<Vec<Option<Block>>> = (0..(n_u as u64).div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let range = ids.start + c * CHUNK..(ids.start + (c + 1) * CHUNK).min(ids.end);
            let inputs = sampler.sample_batch(seed, range.clone());
            inputs
                .iter()
                .zip(range)
                .map(|(u, id)| pde_block(cfg, u, id, &sensors, p, seed))
                .collect()
        })
        .collect::<Result<_>>()?;

    let config = json!({
        "problem": problem,
        "space": space,
        "m": m,
        "ids": [ids.start, ids.end],
        "points_per_u": p,
        "seed": seed,
        "solver": {"method": "crank_nicolson_picard", "nx": cfg.nx, "nt": cfg.nt},
        "fine_grid_points": FINE_GRID_POINTS,
    });
    assemble(problem, sensors, chunks.into_iter().flatten().collect(), config, p)
}

/// Like [`build_pde_dataset_with`] for caller-supplied sources; input `i` gets u id `i`.
pub fn build_pde_dataset_from_inputs(
    cfg: &PdeConfig,
    inputs: &[InputFunction],
    m: usize,
    p: usize,
    seed: u64,
) -> Result<Dataset> {
    let problem = pde_problem(cfg, m, inputs.len(), p)?;
    let sensors = SensorGrid::uniform(0.0, 1.0, m)?;
    let blocks = inputs
        .par_iter()
        .enumerate()
        .map(|(i, u)| pde_block(cfg, u, i as u64, &sensors, p, seed))
        .collect::<Result<Vec<_>>>()?;
    let config = json!({
        "problem": problem,
        "space": "explicit",
        "m": m,
        "n_u": inputs.len(),
        "points_per_u": p,
        "seed": seed,
        "solver": {"method": "crank_nicolson_picard", "nx": cfg.nx, "nt": cfg.nt},
    });
    assemble(problem, sensors, blocks, config, p)
}

/// Partitions the pool's input functions into disjoint train and test sets.
pub fn split_by_u(pool: &Dataset, train_u: usize, test_u: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let available = pool.u_ids().len();
    if train_u + test_u > available {
        return Err(invalid(format!(
            "requested {train_u} + {test_u} input functions, pool has {available}"
        )));
    }
    let mut rows: Vec<usize> = (0..available).collect();
    rows.shuffle(&mut stream(seed, Purpose::Split, 0));
    let mut train = pool.subset_by_rows(&rows[..train_u]);
    let mut test = pool.subset_by_rows(&rows[train_u..train_u + test_u]);
    for (set, role) in [(&mut train, "train"), (&mut test, "test")] {
        set.config = json!({"pool": pool.config(), "split": {"role": role, "seed": seed}});
    }
    Ok((train, test))
}
