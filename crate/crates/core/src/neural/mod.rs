//! Dense linear algebra, the GCN, losses, Adam and checkpoints.

mod adam;
mod checkpoint;
mod gcn;
mod loss;
mod matrix;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{decode_model, encode_model, load_model, load_model_with_head, save_model};
pub use gcn::{
    gcn_backward, gcn_forward, sigmoid, Architecture, ForwardPass, GcnModel, Gradients, Head,
};
pub use loss::{bce_loss, td_loss, td_targets, BCE_CLAMP};
pub use matrix::{normalize_adjacency, DenseMatrix, NormalizedAdjacency};
