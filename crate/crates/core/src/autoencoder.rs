//! Convolutional autoencoder producing the latent feature pool.
//!
//! Encoder: `Conv2d(1→8, 3×3, stride 2) → ReLU → Conv2d(8→16, 3×3, stride 2) → ReLU → Dense(→latent)`
//! with an unbounded latent layer. Decoder: `Dense(latent→256) → ReLU → Dense(256→pixels) → Sigmoid`.
//! Trained with Adam on pixel MSE.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::nn::{mse_loss, ConvGeometry, Layer, LayerKind, Network, Optimizer, OptimizerKind};
use crate::{Error, LatentFeatures, Result, SeededRng, Tensor};

const INFERENCE_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderConfig {
    pub latent_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub conv_channels: [usize; 2],
    pub kernel: usize,
    pub stride: usize,
    pub decoder_hidden: usize,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            latent_dim: 128,
            epochs: 10,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
            conv_channels: [8, 16],
            kernel: 3,
            stride: 2,
            decoder_hidden: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    encoder: Network,
    decoder: Network,
    height: usize,
    width: usize,
}

impl AutoencoderModel {
    /// Freshly initialised model for `height × width` single-channel images.
    pub fn new(
        height: usize,
        width: usize,
        cfg: &AutoencoderConfig,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if cfg.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be positive".into()));
        }
        let first = ConvGeometry {
            in_channels: 1,
            in_height: height,
            in_width: width,
            out_channels: cfg.conv_channels[0],
            kernel: cfg.kernel,
            stride: cfg.stride,
        };
        first.validate()?;
        let second = ConvGeometry {
            in_channels: cfg.conv_channels[0],
            in_height: first.out_height(),
            in_width: first.out_width(),
            out_channels: cfg.conv_channels[1],
            kernel: cfg.kernel,
            stride: cfg.stride,
        };
        second.validate()?;
        let encoder = Network::new(vec![
            Layer::conv2d(first, rng)?,
            Layer::relu(),
            Layer::conv2d(second, rng)?,
            Layer::relu(),
            Layer::dense(second.output_len(), cfg.latent_dim, rng),
        ])?;
        let pixels = height * width;
        let decoder = Network::new(vec![
            Layer::dense(cfg.latent_dim, cfg.decoder_hidden, rng),
            Layer::relu(),
            Layer::dense(cfg.decoder_hidden, pixels, rng),
            Layer::sigmoid(),
        ])?;
        AutoencoderModel::from_parts(encoder, decoder, height, width)
    }

    /// Assembles a model from separately stored networks.
    pub fn from_parts(
        encoder: Network,
        decoder: Network,
        height: usize,
        width: usize,
    ) -> Result<Self> {
        let pixels = height * width;
        if encoder.input_len() != pixels {
            return Err(Error::Config(format!(
                "encoder expects {} inputs, images have {pixels} pixels",
                encoder.input_len()
            )));
        }
        if encoder.output_len() != decoder.input_len() {
            return Err(Error::Config(format!(
                "encoder emits {} latents but decoder expects {}",
                encoder.output_len(),
                decoder.input_len()
            )));
        }
        if decoder.output_len() != pixels {
            return Err(Error::Config(format!(
                "decoder emits {} values for {pixels} pixels",
                decoder.output_len()
            )));
        }
        if decoder.layers().last().map(Layer::kind) != Some(LayerKind::Sigmoid) {
            return Err(Error::Config("decoder must end in a Sigmoid".into()));
        }
        Ok(AutoencoderModel {
            encoder,
            decoder,
            height,
            width,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_len()
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn encoder(&self) -> &Network {
        &self.encoder
    }

    pub fn decoder(&self) -> &Network {
        &self.decoder
    }

    fn check_images(&self, images: &Tensor) -> Result<()> {
        if images.shape().len() < 2 || images.row_len() != self.height * self.width {
            return Err(Error::Shape {
                op: "autoencoder input",
                left: images.shape().to_vec(),
                right: vec![self.height, self.width],
            });
        }
        Ok(())
    }

    /// `[n, latent_dim]` codes for `[n, H, W]` images.
    pub fn encode_batch(&self, images: &Tensor) -> Result<Tensor> {
        self.check_images(images)?;
        self.chunked(images, |x| self.encoder.predict(x))
    }

    /// `[n, H·W]` reconstructions.
    pub fn reconstruct(&self, images: &Tensor) -> Result<Tensor> {
        self.check_images(images)?;
        self.chunked(images, |x| self.decoder.predict(&self.encoder.predict(x)?))
    }

    fn chunked(&self, images: &Tensor, f: impl Fn(&Tensor) -> Result<Tensor>) -> Result<Tensor> {
        let n = images.rows();
        let mut out = Vec::new();
        let mut width = 0;
        let mut start = 0;
        while start < n {
            let idx: Vec<usize> = (start..(start + INFERENCE_CHUNK).min(n)).collect();
            let y = f(&images.select_rows(&idx))?;
            width = y.row_len();
            out.extend_from_slice(y.data());
            start += INFERENCE_CHUNK;
        }
        if n == 0 {
            width = self.latent_dim();
        }
        Tensor::new(vec![n, width], out)
    }
}

fn check_pixels(images: &Tensor) -> Result<()> {
    if images.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Data("pixel values must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Trains a fresh model on `[n, H, W]` images. Returns the model and the mean
/// training MSE of each epoch.
pub fn train_autoencoder(
    images: &Tensor,
    cfg: &AutoencoderConfig,
) -> Result<(AutoencoderModel, Vec<f64>)> {
    if images.shape().len() != 3 {
        return Err(Error::Shape {
            op: "train_autoencoder",
            left: images.shape().to_vec(),
            right: vec![0, 0, 0],
        });
    }
    let (n, height, width) = (images.shape()[0], images.shape()[1], images.shape()[2]);
    if cfg.batch_size == 0 || n < cfg.batch_size {
        return Err(Error::Config(format!(
            "need at least batch_size={} images, got {n}",
            cfg.batch_size
        )));
    }
    check_pixels(images)?;

    let mut rng = SeededRng::new(cfg.seed);
    let mut model = AutoencoderModel::new(height, width, cfg, &mut rng)?;
    let mut enc_opt = Optimizer::new(OptimizerKind::adam(cfg.lr));
    let mut dec_opt = Optimizer::new(OptimizerKind::adam(cfg.lr));
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let order = rng.permutation(n);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = images.select_rows(chunk);
            let z = model.encoder.forward(&x)?;
            let y = model.decoder.forward(&z)?;
            let (loss, grad) = mse_loss(&y, &x.clone().flatten_rows())?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    stage: "epoch",
                    index: epoch,
                });
            }
            let gz = model.decoder.backward(&grad)?;
            model.encoder.backward(&gz)?;
            dec_opt
                .step(&mut model.decoder)
                .map_err(|_| Error::Divergence {
                    stage: "epoch",
                    index: epoch,
                })?;
            enc_opt
                .step(&mut model.encoder)
                .map_err(|_| Error::Divergence {
                    stage: "epoch",
                    index: epoch,
                })?;
            total += loss * chunk.len() as f64;
        }
        let mean = total / n as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence {
                stage: "epoch",
                index: epoch,
            });
        }
        curve.push(mean);
    }
    Ok((model, curve))
}

/// Encodes labelled images into the agent's feature pool.
pub fn encode(
    model: &AutoencoderModel,
    images: &Tensor,
    labels: &[usize],
    num_classes: usize,
    source_dataset: impl Into<String>,
) -> Result<LatentFeatures> {
    let codes = model.encode_batch(images)?;
    LatentFeatures::new(codes, labels.to_vec(), num_classes, source_dataset)
}

/// Mean over samples of the per-sample mean squared pixel error.
pub fn reconstruction_error(model: &AutoencoderModel, images: &Tensor) -> Result<f64> {
    let recon = model.reconstruct(images)?;
    let n = recon.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let pixels = recon.row_len() as f64;
    let mut total = 0.0;
    for i in 0..n {
        let se: f64 = recon
            .row(i)
            .iter()
            .zip(images.row(i))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        total += se / pixels;
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern_images(n: usize, h: usize, w: usize) -> Tensor {
        let one: Vec<f64> = (0..h * w)
            .map(|i| 0.3 + 0.4 * ((i * 7 % 11) as f64 / 10.0))
            .collect();
        let data = (0..n).flat_map(|_| one.iter().copied()).collect();
        Tensor::new(vec![n, h, w], data).unwrap()
    }

    fn small_cfg(latent_dim: usize, epochs: usize) -> AutoencoderConfig {
        AutoencoderConfig {
            latent_dim,
            epochs,
            batch_size: 16,
            decoder_hidden: 64,
            ..AutoencoderConfig::default()
        }
    }

    #[test]
    fn identical_images_are_memorised() {
        let images = pattern_images(128, 12, 12);
        let (model, curve) = train_autoencoder(&images, &small_cfg(4, 20)).unwrap();
        assert_eq!(curve.len(), 20);
        assert!(*curve.last().unwrap() < 0.01, "{curve:?}");
        assert!(curve.last() < curve.first());
        assert!(reconstruction_error(&model, &images).unwrap() < 0.01);
    }

    #[test]
    fn zero_epochs_is_initialisation() {
        let images = pattern_images(16, 8, 8);
        let cfg = small_cfg(3, 0);
        let (model, curve) = train_autoencoder(&images, &cfg).unwrap();
        assert!(curve.is_empty());
        let fresh = AutoencoderModel::new(8, 8, &cfg, &mut SeededRng::new(cfg.seed)).unwrap();
        assert_eq!(model, fresh);
    }

    #[test]
    fn latent_width_follows_config() {
        let mut rng = SeededRng::new(1);
        for (h, m) in [(28, 128), (32, 256)] {
            let cfg = AutoencoderConfig {
                latent_dim: m,
                ..AutoencoderConfig::default()
            };
            let model = AutoencoderModel::new(h, h, &cfg, &mut rng).unwrap();
            let images = Tensor::filled(&[2, h, h], 0.5);
            let feats = encode(&model, &images, &[0, 1], 10, "x").unwrap();
            assert_eq!(feats.dim(), m);
            assert_eq!(feats.sample(0), feats.sample(1));
        }
    }

    #[test]
    fn hand_computed_reconstruction_error() {
        use crate::nn::Dense;
        // Decoder ignores its input and always emits sigmoid(ln 3) = 0.75.
        let encoder = Network::new(vec![Layer::Dense(
            Dense::from_params(Tensor::zeros(&[4, 1]), Tensor::zeros(&[1])).unwrap(),
        )])
        .unwrap();
        let decoder = Network::new(vec![
            Layer::Dense(
                Dense::from_params(Tensor::zeros(&[1, 4]), Tensor::filled(&[4], libm::log(3.0)))
                    .unwrap(),
            ),
            Layer::sigmoid(),
        ])
        .unwrap();
        let model = AutoencoderModel::from_parts(encoder, decoder, 2, 2).unwrap();
        let images =
            Tensor::new(vec![2, 2, 2], vec![0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        // image 1: (0.5625 + 0.0625 + 0.5625 + 0.0625) / 4 = 0.3125; image 2: 0.0625
        let e = reconstruction_error(&model, &images).unwrap();
        assert!((e - 0.1875).abs() < 1e-12, "{e}");
        // Perfect reconstruction would score zero.
        assert!(reconstruction_error(&model, &Tensor::filled(&[1, 2, 2], 0.75)).unwrap() < 1e-15);
    }

    #[test]
    fn untrained_error_is_bounded() {
        let mut rng = SeededRng::new(2);
        let model = AutoencoderModel::new(10, 10, &small_cfg(5, 0), &mut rng).unwrap();
        let images = Tensor::new(vec![3, 10, 10], rng.uniform_vec(300)).unwrap();
        let e = reconstruction_error(&model, &images).unwrap();
        assert!(e > 0.0 && e <= 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let images = pattern_images(4, 8, 8);
        assert!(matches!(
            train_autoencoder(&images, &small_cfg(2, 1)),
            Err(Error::Config(_))
        ));
        let bright = Tensor::filled(&[20, 8, 8], 1.5);
        assert!(matches!(
            train_autoencoder(&bright, &small_cfg(2, 1)),
            Err(Error::Data(_))
        ));
        let model = AutoencoderModel::new(8, 8, &small_cfg(2, 0), &mut SeededRng::new(0)).unwrap();
        assert!(model.encode_batch(&Tensor::zeros(&[1, 9, 9])).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = SeededRng::new(4);
        let images = Tensor::new(vec![40, 8, 8], rng.uniform_vec(40 * 64)).unwrap();
        let cfg = small_cfg(3, 2);
        let (a, ca) = train_autoencoder(&images, &cfg).unwrap();
        let (b, cb) = train_autoencoder(&images, &cfg).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(
            a.encode_batch(&images).unwrap(),
            b.encode_batch(&images).unwrap()
        );
    }
}
