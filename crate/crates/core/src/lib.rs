//! Numerical core of the autoencoder + Double DQN / Retrace(λ) feature-acquisition
//! classifier.
//!
//! Everything here is pure computation over in-memory buffers: dense tensors, a
//! small neural-network library with hand-written backpropagation, the
//! convolutional autoencoder, the costly-feature classification environment, the
//! Q-learning agent and a linear SVM baseline. File formats, dataset parsing and
//! the command-line driver live in the `aeddqn` crate.
#![no_std]

extern crate alloc;

pub mod agent;
pub mod autoencoder;
pub mod env;
mod error;
pub mod features;
pub mod nn;
pub mod rng;
pub mod svm;
pub mod tensor;

pub use error::{Error, Result};
pub use features::LatentFeatures;
pub use rng::SeededRng;
pub use tensor::Tensor;
