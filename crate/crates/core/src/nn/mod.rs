//! Minimal dense-network substrate: layers, softmax and sigmoid heads,
//! cross-entropy and policy-gradient backward passes, SGD, checkpoints.

mod checkpoint;
mod network;
mod optim;
mod tensor;

pub use checkpoint::{
    load_checkpoint, load_tensors, read_tensors, save_checkpoint, save_tensors, write_tensors, FORMAT_VERSION, MAGIC,
};
pub(crate) use network::sigmoid;
pub use network::{Activation, Head, Layer, Network, Target, Trace};
pub use optim::{apply_update, OptimizerState};
pub use tensor::ParamTensor;
