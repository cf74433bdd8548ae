//! Hand-differentiated 1-D network primitives: layers, losses and Adam.

mod adam;
mod layer;
mod loss;

pub use adam::{adam_step, AdamConfig, AdamState, Direction};
pub(crate) use layer::{backward_impl, dense_backward_rows, dense_forward_rows};
pub use layer::{
    layer_backward, layer_forward, FeatureMap, GradientBundle, LayerCache, LayerKind, LayerParams,
    LayerSpec,
};
pub use loss::{argmax, logistic_loss, sigmoid, softmax, softmax_xent_loss, softplus};
