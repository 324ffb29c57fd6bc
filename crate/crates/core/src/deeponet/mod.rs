//! Branch-trunk operator networks and the concatenated-input baseline.
//!
//! A model maps sensor values `u(x_1..x_m)` and a location `y` to
//! `sum_k b_k(u) t_k(y) + b0`. Batches index into deduplicated `u` and `y`
//! tables; the merge is evaluated per record and its gradient scattered back.

mod batch;
mod checkpoint;
mod fnn;
mod model;

pub use batch::{Batch, IndexedData};
pub use checkpoint::{load_model, read_model, save_model, write_model, MODEL_MAGIC};
pub use fnn::{fnn_forward, FnnBaseline};
pub use model::{
    deeponet_forward, deeponet_gradients, merge_outputs, Branch, DeepOnet, DeepOnetConfig, OperatorModel, Variant,
};
