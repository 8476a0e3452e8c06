//! From-scratch convolutional network: layer kernels, forward and backward
//! passes, binary cross-entropy, Adam and checkpoints.

mod adam;
mod checkpoint;
mod layers;
mod model;
mod params;
mod scalar;
mod spec;
mod tensor;

pub use adam::{adam_step, adam_update, AdamConfig, OptimizerState};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint, CHECKPOINT_VERSION,
};
pub use model::{
    backward, batch_gradient, bce_loss, forward, forward_trace, predict_many, Backprop, BatchGradient, Trace,
    BCE_EPSILON,
};
pub use params::{init_params, LayerParams, ModelParams};
pub use scalar::Scalar;
pub use spec::{Layer, NetworkSpec};
pub use tensor::Tensor;
