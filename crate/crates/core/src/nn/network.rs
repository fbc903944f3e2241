use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::Layer;
use crate::{Error, Result, Tensor};

/// An ordered stack of layers with statically validated shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    input_len: usize,
    output_len: usize,
}

/// A trainable tensor paired with its most recent gradient.
pub struct ParamMut<'a> {
    pub layer: usize,
    pub name: &'static str,
    pub value: &'a mut Tensor,
    pub grad: &'a Tensor,
}

impl ParamMut<'_> {
    pub fn label(&self) -> String {
        format!("layer {} {}", self.layer, self.name)
    }
}

fn layer_error(layer: usize, err: Error) -> Error {
    match err {
        Error::BackwardBeforeForward => err,
        other => Error::Layer {
            layer,
            message: other.to_string(),
        },
    }
}

impl Network {
    /// Validates that each layer accepts its predecessor's output. The first
    /// layer must fix the input length (Dense or Conv2d).
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let input_len = layers.first().and_then(Layer::input_len).ok_or_else(|| {
            Error::Config("network must start with a Dense or Conv2d layer".into())
        })?;
        let mut shape = alloc::vec![input_len];
        for (i, layer) in layers.iter().enumerate() {
            shape = layer.output_shape(&shape).map_err(|e| layer_error(i, e))?;
        }
        Ok(Network {
            output_len: shape.iter().product(),
            layers,
            input_len,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    /// Forward pass that retains every intermediate for [`Network::backward`].
    /// The result is flattened to `[batch, output_len]`.
    pub fn forward(&mut self, batch: &Tensor) -> Result<Tensor> {
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            x = layer.forward(&x).map_err(|e| layer_error(i, e))?;
        }
        Ok(x.flatten_rows())
    }

    /// Inference without touching the backward caches.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.infer(&x).map_err(|e| layer_error(i, e))?;
        }
        Ok(x.flatten_rows())
    }

    /// Back-propagates `upstream` (gradient of the loss w.r.t. the last forward
    /// output), storing parameter gradients. Returns the input gradient shaped
    /// like the last forward batch.
    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let mut grad = upstream.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            grad = layer.backward(&grad).map_err(|e| layer_error(i, e))?;
        }
        Ok(grad)
    }

    pub fn params_mut(&mut self) -> Vec<ParamMut<'_>> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            if let Some(((w, gw), (b, gb))) = layer.params_and_grads_mut() {
                out.push(ParamMut {
                    layer: i,
                    name: "weight",
                    value: w,
                    grad: gw,
                });
                out.push(ParamMut {
                    layer: i,
                    name: "bias",
                    value: b,
                    grad: gb,
                });
            }
        }
        out
    }

    /// Copies all parameters from `other`, which must have the same architecture.
    pub fn copy_params_from(&mut self, other: &Network) -> Result<()> {
        if self.layers.len() != other.layers.len()
            || self
                .layers
                .iter()
                .zip(&other.layers)
                .any(|(a, b)| a.kind() != b.kind())
        {
            return Err(Error::Config(
                "cannot copy parameters between different architectures".into(),
            ));
        }
        for (dst, src) in self.params_mut().into_iter().zip(other.param_tensors()) {
            dst.value.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }

    fn param_tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .flat_map(|(w, b)| [w, b])
    }

    /// All parameters flattened in layer order (weights before biases).
    pub fn flat_params(&self) -> Vec<f64> {
        self.param_tensors()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }
}
