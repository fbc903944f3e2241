use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, SeededRng, Tensor};

/// Spatial configuration of a valid-padding 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvGeometry {
    pub fn validate(&self) -> Result<()> {
        let g = self;
        if g.in_channels == 0 || g.out_channels == 0 || g.kernel == 0 {
            return Err(Error::Config(format!("degenerate convolution {g:?}")));
        }
        if g.stride == 0 {
            return Err(Error::Config(
                "convolution stride must be at least 1".into(),
            ));
        }
        if g.kernel > g.in_height || g.kernel > g.in_width {
            return Err(Error::Config(format!(
                "kernel {k}x{k} larger than input {h}x{w}",
                k = g.kernel,
                h = g.in_height,
                w = g.in_width
            )));
        }
        let sizes = [
            [g.in_channels, g.in_height, g.in_width],
            [g.out_channels, g.in_height, g.in_width],
            [g.in_channels, g.kernel, g.kernel],
        ];
        if sizes
            .iter()
            .any(|s| s.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).is_none())
        {
            return Err(Error::Config(format!("convolution {g:?} overflows")));
        }
        Ok(())
    }

    pub fn out_height(&self) -> usize {
        (self.in_height - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.in_width - self.kernel) / self.stride + 1
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.in_height * self.in_width
    }

    pub fn output_len(&self) -> usize {
        self.out_channels * self.out_height() * self.out_width()
    }

    /// Length of one im2col patch row.
    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense { inputs: usize, outputs: usize },
    Conv2d(ConvGeometry),
    Relu,
    Sigmoid,
}

/// Uniform Glorot initialisation bound.
fn glorot(rng: &mut SeededRng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform_range(-bound, bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape and data agree")
}

fn require_row_len(x: &Tensor, expected: usize) -> Result<()> {
    if x.shape().len() < 2 || x.row_len() != expected {
        return Err(Error::Shape {
            op: "layer input",
            left: x.shape().to_vec(),
            right: vec![expected],
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    weight: Tensor,
    bias: Tensor,
    grad_weight: Tensor,
    grad_bias: Tensor,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut SeededRng) -> Self {
        let weight = glorot(rng, &[inputs, outputs], inputs, outputs);
        Dense::from_params(weight, Tensor::zeros(&[outputs])).expect("consistent shapes")
    }

    /// `weight` is `[inputs, outputs]`, `bias` is `[outputs]`.
    pub fn from_params(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[1]] {
            return Err(Error::Shape {
                op: "dense params",
                left: weight.shape().to_vec(),
                right: bias.shape().to_vec(),
            });
        }
        Ok(Dense {
            grad_weight: Tensor::zeros(weight.shape()),
            grad_bias: Tensor::zeros(bias.shape()),
            weight,
            bias,
            input: None,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        require_row_len(x, self.inputs())?;
        let x = x.clone().flatten_rows();
        let mut y = x.matmul(&self.weight)?;
        y.add_row_bias(&self.bias)?;
        Ok(y)
    }

    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or(Error::BackwardBeforeForward)?;
        let x2 = x.clone().flatten_rows();
        if grad.len() != x2.rows() * self.outputs() {
            return Err(Error::Shape {
                op: "dense backward",
                left: grad.shape().to_vec(),
                right: vec![x2.rows(), self.outputs()],
            });
        }
        let grad = grad.clone().reshape(&[x2.rows(), self.outputs()])?;
        self.grad_weight = x2.matmul_tn(&grad)?;
        self.grad_bias = grad.sum_rows();
        grad.matmul_nt(&self.weight)?.reshape(x.shape())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    geometry: ConvGeometry,
    /// `[out_channels, in_channels·kernel·kernel]`
    weight: Tensor,
    bias: Tensor,
    grad_weight: Tensor,
    grad_bias: Tensor,
    cols: Option<Tensor>,
}

impl Conv2d {
    pub fn new(geometry: ConvGeometry, rng: &mut SeededRng) -> Result<Self> {
        geometry.validate()?;
        let k2 = geometry.kernel * geometry.kernel;
        let weight = glorot(
            rng,
            &[geometry.out_channels, geometry.patch_len()],
            geometry.in_channels * k2,
            geometry.out_channels * k2,
        );
        Conv2d::from_params(geometry, weight, Tensor::zeros(&[geometry.out_channels]))
    }

    pub fn from_params(geometry: ConvGeometry, weight: Tensor, bias: Tensor) -> Result<Self> {
        geometry.validate()?;
        if weight.shape() != [geometry.out_channels, geometry.patch_len()]
            || bias.shape() != [geometry.out_channels]
        {
            return Err(Error::Shape {
                op: "conv2d params",
                left: weight.shape().to_vec(),
                right: bias.shape().to_vec(),
            });
        }
        Ok(Conv2d {
            geometry,
            grad_weight: Tensor::zeros(weight.shape()),
            grad_bias: Tensor::zeros(bias.shape()),
            weight,
            bias,
            cols: None,
        })
    }

    pub fn geometry(&self) -> ConvGeometry {
        self.geometry
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    /// Patch matrix `[batch·out_h·out_w, in_channels·kernel·kernel]`.
    fn im2col(&self, x: &Tensor) -> Tensor {
        let g = &self.geometry;
        let (oh, ow, k) = (g.out_height(), g.out_width(), g.kernel);
        let batch = x.rows();
        let patch = g.patch_len();
        let mut cols = vec![0.0; batch * oh * ow * patch];
        for b in 0..batch {
            let img = x.row(b);
            for oy in 0..oh {
                for ox in 0..ow {
                    let r = (b * oh + oy) * ow + ox;
                    let dst = &mut cols[r * patch..(r + 1) * patch];
                    for c in 0..g.in_channels {
                        for ky in 0..k {
                            let src =
                                (c * g.in_height + oy * g.stride + ky) * g.in_width + ox * g.stride;
                            let d = (c * k + ky) * k;
                            dst[d..d + k].copy_from_slice(&img[src..src + k]);
                        }
                    }
                }
            }
        }
        Tensor::new(vec![batch * oh * ow, patch], cols).expect("im2col shape")
    }

    fn conv_from_cols(&self, cols: &Tensor, batch: usize) -> Result<Tensor> {
        let g = &self.geometry;
        let spatial = g.out_height() * g.out_width();
        let mut y2 = cols.matmul_nt(&self.weight)?;
        y2.add_row_bias(&self.bias)?;
        // [b·spatial, out_ch] -> [b, out_ch, oh, ow]
        let mut out = vec![0.0; batch * g.out_channels * spatial];
        for b in 0..batch {
            for s in 0..spatial {
                let src = y2.row(b * spatial + s);
                for (o, &v) in src.iter().enumerate() {
                    out[(b * g.out_channels + o) * spatial + s] = v;
                }
            }
        }
        Tensor::new(
            vec![batch, g.out_channels, g.out_height(), g.out_width()],
            out,
        )
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        require_row_len(x, self.geometry.input_len())?;
        let cols = self.im2col(x);
        self.conv_from_cols(&cols, x.rows())
    }

    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        require_row_len(x, self.geometry.input_len())?;
        let cols = self.im2col(x);
        let y = self.conv_from_cols(&cols, x.rows())?;
        self.cols = Some(cols);
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let cols = self.cols.as_ref().ok_or(Error::BackwardBeforeForward)?;
        let g = self.geometry;
        let spatial = g.out_height() * g.out_width();
        let batch = cols.rows() / spatial;
        if grad.len() != batch * g.output_len() {
            return Err(Error::Shape {
                op: "conv2d backward",
                left: grad.shape().to_vec(),
                right: vec![batch, g.out_channels, g.out_height(), g.out_width()],
            });
        }
        // [b, out_ch, oh, ow] -> [b·spatial, out_ch]
        let mut g2 = vec![0.0; batch * spatial * g.out_channels];
        let gd = grad.data();
        for b in 0..batch {
            for o in 0..g.out_channels {
                for s in 0..spatial {
                    g2[(b * spatial + s) * g.out_channels + o] =
                        gd[(b * g.out_channels + o) * spatial + s];
                }
            }
        }
        let g2 = Tensor::new(vec![batch * spatial, g.out_channels], g2)?;
        self.grad_weight = g2.matmul_tn(cols)?;
        self.grad_bias = g2.sum_rows();
        let dcols = g2.matmul(&self.weight)?;

        // col2im
        let (ow, k) = (g.out_width(), g.kernel);
        let patch = g.patch_len();
        let mut dx = vec![0.0; batch * g.input_len()];
        for b in 0..batch {
            let img = &mut dx[b * g.input_len()..(b + 1) * g.input_len()];
            for s in 0..spatial {
                let (oy, ox) = (s / ow, s % ow);
                let src = dcols.row(b * spatial + s);
                for c in 0..g.in_channels {
                    for ky in 0..k {
                        let dst =
                            (c * g.in_height + oy * g.stride + ky) * g.in_width + ox * g.stride;
                        let d = (c * k + ky) * k;
                        for kx in 0..k {
                            img[dst + kx] += src[d + kx];
                        }
                    }
                }
            }
        }
        debug_assert_eq!(patch, dcols.row_len());
        Tensor::new(vec![batch, g.in_channels, g.in_height, g.in_width], dx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ActivationFn {
    Relu,
    Sigmoid,
}

/// Elementwise nonlinearity; caches its output for backward.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    func: ActivationFn,
    cache: Option<Tensor>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn relu() -> Self {
        Activation {
            func: ActivationFn::Relu,
            cache: None,
        }
    }

    pub fn sigmoid() -> Self {
        Activation {
            func: ActivationFn::Sigmoid,
            cache: None,
        }
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        match self.func {
            ActivationFn::Relu => x.map(|v| if v > 0.0 { v } else { 0.0 }),
            ActivationFn::Sigmoid => x.map(sigmoid),
        }
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        let y = self.infer(x);
        // ReLU needs the sign of its input, which its output preserves.
        self.cache = Some(y.clone());
        y
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let y = self.cache.as_ref().ok_or(Error::BackwardBeforeForward)?;
        let grad = if grad.shape() != y.shape() && grad.len() == y.len() {
            &grad.clone().reshape(y.shape())?
        } else {
            grad
        };
        let local = match self.func {
            ActivationFn::Relu => y.map(|v| if v > 0.0 { 1.0 } else { 0.0 }),
            ActivationFn::Sigmoid => y.map(|s| s * (1.0 - s)),
        };
        grad.mul(&local)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    Relu(Activation),
    Sigmoid(Activation),
}

impl Layer {
    pub fn dense(inputs: usize, outputs: usize, rng: &mut SeededRng) -> Self {
        Layer::Dense(Dense::new(inputs, outputs, rng))
    }

    pub fn conv2d(geometry: ConvGeometry, rng: &mut SeededRng) -> Result<Self> {
        Conv2d::new(geometry, rng).map(Layer::Conv2d)
    }

    pub fn relu() -> Self {
        Layer::Relu(Activation::relu())
    }

    pub fn sigmoid() -> Self {
        Layer::Sigmoid(Activation::sigmoid())
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Dense(d) => LayerKind::Dense {
                inputs: d.inputs(),
                outputs: d.outputs(),
            },
            Layer::Conv2d(c) => LayerKind::Conv2d(c.geometry),
            Layer::Relu(_) => LayerKind::Relu,
            Layer::Sigmoid(_) => LayerKind::Sigmoid,
        }
    }

    /// Flat per-sample input length, if the layer fixes one.
    pub fn input_len(&self) -> Option<usize> {
        match self {
            Layer::Dense(d) => Some(d.inputs()),
            Layer::Conv2d(c) => Some(c.geometry.input_len()),
            Layer::Relu(_) | Layer::Sigmoid(_) => None,
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let len: usize = input.iter().product();
        if let Some(expected) = self.input_len() {
            if expected != len {
                return Err(Error::Shape {
                    op: "layer input",
                    left: input.to_vec(),
                    right: vec![expected],
                });
            }
        }
        Ok(match self {
            Layer::Dense(d) => vec![d.outputs()],
            Layer::Conv2d(c) => {
                let g = c.geometry;
                vec![g.out_channels, g.out_height(), g.out_width()]
            }
            Layer::Relu(_) | Layer::Sigmoid(_) => input.to_vec(),
        })
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(d) => d.forward(x),
            Layer::Conv2d(c) => c.forward(x),
            Layer::Relu(a) | Layer::Sigmoid(a) => Ok(a.forward(x)),
        }
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(d) => d.infer(x),
            Layer::Conv2d(c) => c.infer(x),
            Layer::Relu(a) | Layer::Sigmoid(a) => Ok(a.infer(x)),
        }
    }

    /// Stores parameter gradients and returns the gradient w.r.t. the input.
    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(d) => d.backward(grad),
            Layer::Conv2d(c) => c.backward(grad),
            Layer::Relu(a) | Layer::Sigmoid(a) => a.backward(grad),
        }
    }

    /// `(weight, bias)` for parametric layers.
    pub fn params(&self) -> Option<(&Tensor, &Tensor)> {
        match self {
            Layer::Dense(d) => Some((&d.weight, &d.bias)),
            Layer::Conv2d(c) => Some((&c.weight, &c.bias)),
            _ => None,
        }
    }

    pub fn grads(&self) -> Option<(&Tensor, &Tensor)> {
        match self {
            Layer::Dense(d) => Some((&d.grad_weight, &d.grad_bias)),
            Layer::Conv2d(c) => Some((&c.grad_weight, &c.grad_bias)),
            _ => None,
        }
    }

    #[allow(clippy::type_complexity)]
    pub(crate) fn params_and_grads_mut(
        &mut self,
    ) -> Option<((&mut Tensor, &Tensor), (&mut Tensor, &Tensor))> {
        match self {
            Layer::Dense(d) => Some(((&mut d.weight, &d.grad_weight), (&mut d.bias, &d.grad_bias))),
            Layer::Conv2d(c) => {
                Some(((&mut c.weight, &c.grad_weight), (&mut c.bias, &c.grad_bias)))
            }
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self.kind() {
            LayerKind::Dense { inputs, outputs } => format!("Dense({inputs}->{outputs})"),
            LayerKind::Conv2d(g) => format!(
                "Conv2d({}->{}, {}x{}, stride {})",
                g.in_channels, g.out_channels, g.kernel, g.kernel, g.stride
            ),
            LayerKind::Relu => "ReLU".into(),
            LayerKind::Sigmoid => "Sigmoid".into(),
        }
    }
}
