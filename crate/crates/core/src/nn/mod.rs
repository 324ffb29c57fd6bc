//! Minimal dense-network engine: forward/backward passes, Adam, losses and a
//! finite-difference gradient checker.
//!
//! All arithmetic is `f64`. Matrix products go through `ndarray`'s serial
//! GEMM, so identical inputs give bit-identical outputs.

mod adam;
mod gradcheck;
mod io;
mod loss;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::gradient_check;
pub use io::{read_params, write_params, PARAMS_MAGIC};
pub use loss::mse;
pub use mlp::{
    mlp_backward, mlp_forward, mlp_init, Activation, Dense, ForwardCache, MlpParams, MlpSpec,
};

/// A model whose trainable parameters can be viewed as flat blocks.
///
/// Gradients use the same type as the parameters, so two values of one type
/// always expose blocks of matching lengths in matching order.
pub trait ParamSet {
    fn param_blocks(&self) -> Vec<&[f64]>;
    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|b| b.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.param_blocks()
            .iter()
            .all(|b| b.iter().all(|v| v.is_finite()))
    }
}
