//! Reference solvers producing the ground-truth operator outputs.

mod dopri;
mod pde;
mod quadrature;

pub use dopri::{
    pendulum_solve, solve_ode, solve_ode_rk45, OdeOptions, OdeRhs, OdeSystem, OdeTrajectory,
    SolveStatus,
};
pub use pde::{
    diffusion_reaction_solve, solve_reaction_diffusion, solve_tridiagonal_constant, PdeConfig,
    PdeSolution,
};
pub use quadrature::{antiderivative_exact, AntiderivativeTable};
