//! Feedforward networks with hand-written reverse-mode gradients.
//!
//! The batch dimension is always the leading axis. A [`Network`] caches every
//! layer input during [`Network::forward`] so that [`Network::backward`] can
//! produce exact parameter and input gradients; [`Network::predict`] is the
//! cache-free inference path.

mod layer;
mod loss;
mod network;
mod optim;

pub use layer::{Activation, Conv2d, ConvGeometry, Dense, Layer, LayerKind};
pub use loss::{huber_loss, mse_loss};
pub use network::{Network, ParamMut};
pub use optim::{Optimizer, OptimizerKind};
