//! On-disk formats for feature caches, networks and SVM models.
//!
//! Feature cache: `AEDQFTR1`, version byte, `n: u64`, `m: u64`, `K: u32`,
//! `n·m` f32 values row by row, then `n` label bytes. All integers and floats
//! are little-endian.
//!
//! Model file: `AEDQNET1` followed by tagged records until end of file. Each
//! record is a tag byte, a fixed number of `u64` header fields, then `f64`
//! payload:
//!
//! | tag | record  | header fields                                   | payload |
//! |-----|---------|-------------------------------------------------|---------|
//! | 1   | Dense   | in, out                                         | weight `[in, out]`, bias `[out]` |
//! | 2   | Conv2d  | in_ch, in_h, in_w, out_ch, kernel, stride       | weight `[out_ch, in_ch·k·k]`, bias `[out_ch]` |
//! | 3   | ReLU    |                                                 | |
//! | 4   | Sigmoid |                                                 | |
//! | 5   | SVM     | K, m                                            | weights `[K, m]`, bias `[K]`, reg_lambda |
//!
//! An autoencoder is stored as two model files, one per half.

use std::path::Path;

use aeddqn_core::nn::{Conv2d, ConvGeometry, Dense, Layer, Network};
use aeddqn_core::svm::LinearSvmModel;
use aeddqn_core::{LatentFeatures, Tensor};

use crate::output::write_atomic;
use crate::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 8] = b"AEDQFTR1";
pub const FEATURE_VERSION: u8 = 1;
pub const MODEL_MAGIC: &[u8; 8] = b"AEDQNET1";

const TAG_DENSE: u8 = 1;
const TAG_CONV: u8 = 2;
const TAG_RELU: u8 = 3;
const TAG_SIGMOID: u8 = 4;
const TAG_SVM: u8 = 5;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.bytes.len() => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            _ => Err(Error::Truncated {
                needed: self.pos.saturating_add(n),
                available: self.bytes.len(),
            }),
        }
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    /// Reads a u64 that must fit in memory as a count.
    fn count(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.array()?);
        usize::try_from(v).map_err(|_| Error::Format(format!("count {v} does not fit in memory")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    /// Reads `n` f64 values, checking the length before allocating.
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| Error::Format(format!("payload of {n} values overflows")))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn tensor(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor> {
    Ok(Tensor::new(shape, data)?)
}

pub fn encode_features(features: &LatentFeatures) -> Result<Vec<u8>> {
    let (n, m) = (features.len(), features.dim());
    let k = u32::try_from(features.num_classes())
        .ok()
        .filter(|&k| k <= 256)
        .ok_or_else(|| {
            Error::Format(format!(
                "{} classes do not fit in a label byte",
                features.num_classes()
            ))
        })?;
    let mut out = Vec::with_capacity(29 + n * m * 4 + n);
    out.extend_from_slice(FEATURE_MAGIC);
    out.push(FEATURE_VERSION);
    out.extend((n as u64).to_le_bytes());
    out.extend((m as u64).to_le_bytes());
    out.extend(k.to_le_bytes());
    for &v in features.features().data() {
        let q = v as f32;
        if !q.is_finite() {
            return Err(Error::Format(format!(
                "feature value {v} is not representable as f32"
            )));
        }
        out.extend(q.to_le_bytes());
    }
    out.extend(features.labels().iter().map(|&l| l as u8));
    Ok(out)
}

pub fn decode_features(bytes: &[u8], source_dataset: &str) -> Result<LatentFeatures> {
    let mut c = Cursor { bytes, pos: 0 };
    if &c.array::<8>()? != FEATURE_MAGIC {
        return Err(Error::Format("not a feature cache (bad magic)".into()));
    }
    let version = c.u8()?;
    if version != FEATURE_VERSION {
        return Err(Error::Format(format!(
            "unsupported feature cache version {version}"
        )));
    }
    let n = c.count()?;
    let m = c.count()?;
    let k = c.u32()? as usize;
    let values = n
        .checked_mul(m)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Format(format!("{n}×{m} feature matrix overflows")))?;
    let data = c
        .take(values)?
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().expect("4 bytes"))))
        .collect();
    let labels = c.take(n)?.iter().map(|&l| l as usize).collect();
    if !c.at_end() {
        return Err(Error::Consistency(
            "trailing bytes after feature cache labels".into(),
        ));
    }
    Ok(LatentFeatures::new(
        tensor(vec![n, m], data)?,
        labels,
        k,
        source_dataset,
    )?)
}

pub fn write_feature_cache(path: &Path, features: &LatentFeatures) -> Result<()> {
    write_atomic(path, &encode_features(features)?)
}

/// Reads a cache, naming the dataset after the file stem.
pub fn read_feature_cache(path: &Path) -> Result<LatentFeatures> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_features(&bytes, &name)
}

fn push_u64s(out: &mut Vec<u8>, vals: &[usize]) {
    for &v in vals {
        out.extend((v as u64).to_le_bytes());
    }
}

fn push_f64s(out: &mut Vec<u8>, vals: &[f64]) {
    for &v in vals {
        out.extend(v.to_le_bytes());
    }
}

fn push_layer(out: &mut Vec<u8>, layer: &Layer) {
    match layer {
        Layer::Dense(d) => {
            out.push(TAG_DENSE);
            push_u64s(out, &[d.inputs(), d.outputs()]);
            push_f64s(out, d.weight().data());
            push_f64s(out, d.bias().data());
        }
        Layer::Conv2d(c) => {
            let g = c.geometry();
            out.push(TAG_CONV);
            push_u64s(
                out,
                &[
                    g.in_channels,
                    g.in_height,
                    g.in_width,
                    g.out_channels,
                    g.kernel,
                    g.stride,
                ],
            );
            push_f64s(out, c.weight().data());
            push_f64s(out, c.bias().data());
        }
        Layer::Relu(_) => out.push(TAG_RELU),
        Layer::Sigmoid(_) => out.push(TAG_SIGMOID),
    }
}

pub fn encode_network(net: &Network) -> Vec<u8> {
    let mut out = MODEL_MAGIC.to_vec();
    for layer in net.layers() {
        push_layer(&mut out, layer);
    }
    out
}

fn read_layer(c: &mut Cursor<'_>, tag: u8) -> Result<Layer> {
    match tag {
        TAG_DENSE => {
            let (inputs, outputs) = (c.count()?, c.count()?);
            let w = c.f64s(
                inputs
                    .checked_mul(outputs)
                    .ok_or_else(|| Error::Format("dense size overflows".into()))?,
            )?;
            let b = c.f64s(outputs)?;
            Ok(Layer::Dense(Dense::from_params(
                tensor(vec![inputs, outputs], w)?,
                tensor(vec![outputs], b)?,
            )?))
        }
        TAG_CONV => {
            let g = ConvGeometry {
                in_channels: c.count()?,
                in_height: c.count()?,
                in_width: c.count()?,
                out_channels: c.count()?,
                kernel: c.count()?,
                stride: c.count()?,
            };
            g.validate()?;
            let patch = g
                .in_channels
                .checked_mul(g.kernel)
                .and_then(|v| v.checked_mul(g.kernel))
                .ok_or_else(|| Error::Format("conv size overflows".into()))?;
            let w = c.f64s(
                g.out_channels
                    .checked_mul(patch)
                    .ok_or_else(|| Error::Format("conv size overflows".into()))?,
            )?;
            let b = c.f64s(g.out_channels)?;
            Ok(Layer::Conv2d(Conv2d::from_params(
                g,
                tensor(vec![g.out_channels, patch], w)?,
                tensor(vec![g.out_channels], b)?,
            )?))
        }
        TAG_RELU => Ok(Layer::relu()),
        TAG_SIGMOID => Ok(Layer::sigmoid()),
        TAG_SVM => Err(Error::Format(
            "SVM record found where a network layer was expected".into(),
        )),
        other => Err(Error::Format(format!("unknown record tag {other}"))),
    }
}

fn check_magic(c: &mut Cursor<'_>) -> Result<()> {
    if &c.array::<8>()? != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    Ok(())
}

pub fn decode_network(bytes: &[u8]) -> Result<Network> {
    let mut c = Cursor { bytes, pos: 0 };
    check_magic(&mut c)?;
    let mut layers = Vec::new();
    while !c.at_end() {
        let tag = c.u8()?;
        layers.push(read_layer(&mut c, tag)?);
    }
    if layers.is_empty() {
        return Err(Error::Format("model file holds no layers".into()));
    }
    Ok(Network::new(layers)?)
}

pub fn encode_svm(model: &LinearSvmModel) -> Vec<u8> {
    let mut out = MODEL_MAGIC.to_vec();
    out.push(TAG_SVM);
    push_u64s(&mut out, &[model.num_classes(), model.dim()]);
    push_f64s(&mut out, model.weights().data());
    push_f64s(&mut out, model.bias());
    push_f64s(&mut out, &[model.reg_lambda()]);
    out
}

pub fn decode_svm(bytes: &[u8]) -> Result<LinearSvmModel> {
    let mut c = Cursor { bytes, pos: 0 };
    check_magic(&mut c)?;
    if c.u8()? != TAG_SVM {
        return Err(Error::Format("model file does not hold an SVM".into()));
    }
    let (k, m) = (c.count()?, c.count()?);
    let w = c.f64s(
        k.checked_mul(m)
            .ok_or_else(|| Error::Format("SVM size overflows".into()))?,
    )?;
    let b = c.f64s(k)?;
    let reg = c.f64()?;
    if !c.at_end() {
        return Err(Error::Consistency("trailing bytes after SVM record".into()));
    }
    Ok(LinearSvmModel::from_parts(tensor(vec![k, m], w)?, b, reg)?)
}

pub fn write_network(path: &Path, net: &Network) -> Result<()> {
    write_atomic(path, &encode_network(net))
}

pub fn read_network(path: &Path) -> Result<Network> {
    decode_network(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_svm(path: &Path, model: &LinearSvmModel) -> Result<()> {
    write_atomic(path, &encode_svm(model))
}

pub fn read_svm(path: &Path) -> Result<LinearSvmModel> {
    decode_svm(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
