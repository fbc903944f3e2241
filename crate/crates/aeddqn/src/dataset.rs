//! Image datasets and their binary distribution formats.
//!
//! IDX (MNIST, Fashion-MNIST): big-endian `u32` magic (2051 images, 2049
//! labels), `u32` count, then for images `u32` rows and cols followed by one
//! byte per pixel. CIFAR-10 binary batches: records of one label byte and
//! 3072 channel-planar RGB bytes, reduced here to 32×32 luminance.

use std::path::Path;

use aeddqn_core::{SeededRng, Tensor};

use crate::{Error, Result};

pub const IDX_IMAGE_MAGIC: u32 = 2051;
pub const IDX_LABEL_MAGIC: u32 = 2049;
pub const CIFAR_SIDE: usize = 32;
pub const CIFAR_RECORD_LEN: usize = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE;
const NUM_CLASSES: usize = 10;

/// Normalised images `[n, H, W]` in `[0, 1]` with labels in `[0, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub name: String,
    pub num_classes: usize,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn height(&self) -> usize {
        self.images.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.images.shape()[2]
    }

    pub fn subset(&self, idx: &[usize]) -> RawDataset {
        RawDataset {
            images: self.images.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            name: self.name.clone(),
            num_classes: self.num_classes,
        }
    }

    /// The first `n` samples.
    pub fn take(&self, n: usize) -> RawDataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(Error::Truncated {
                needed: self.pos.saturating_add(n),
                available: self.bytes.len(),
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32_be(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

/// Header fields of an IDX image file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdxImageHeader {
    pub magic: u32,
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
}

pub fn parse_idx_image_header(bytes: &[u8]) -> Result<IdxImageHeader> {
    let mut r = Reader::new(bytes);
    let magic = r.u32_be()?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "IDX image magic {magic}, expected {IDX_IMAGE_MAGIC}"
        )));
    }
    Ok(IdxImageHeader {
        magic,
        count: r.u32_be()? as usize,
        rows: r.u32_be()? as usize,
        cols: r.u32_be()? as usize,
    })
}

/// Parses an IDX image buffer and its label buffer into a dataset.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8], name: &str) -> Result<RawDataset> {
    let header = parse_idx_image_header(image_bytes)?;
    if header.rows == 0 || header.cols == 0 {
        return Err(Error::Format(
            "IDX images must have positive dimensions".into(),
        ));
    }
    let mut images = Reader::new(image_bytes);
    images.take(16)?;
    let pixels = header
        .count
        .checked_mul(header.rows * header.cols)
        .ok_or_else(|| Error::Format("IDX image count overflows".into()))?;
    let raw = images.take(pixels)?;
    if images.remaining() != 0 {
        return Err(Error::Consistency(format!(
            "{} trailing bytes after {} images",
            images.remaining(),
            header.count
        )));
    }

    let mut labels_reader = Reader::new(label_bytes);
    let magic = labels_reader.u32_be()?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::Format(format!(
            "IDX label magic {magic}, expected {IDX_LABEL_MAGIC}"
        )));
    }
    let label_count = labels_reader.u32_be()? as usize;
    let label_raw = labels_reader.take(label_count)?;
    if labels_reader.remaining() != 0 {
        return Err(Error::Consistency(format!(
            "{} trailing bytes after {label_count} labels",
            labels_reader.remaining()
        )));
    }
    if label_count != header.count {
        return Err(Error::Consistency(format!(
            "{} images but {label_count} labels",
            header.count
        )));
    }
    let labels = label_raw
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if (l as usize) < NUM_CLASSES {
                Ok(l as usize)
            } else {
                Err(Error::Label {
                    record: i,
                    label: l,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let data = raw.iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(RawDataset {
        images: Tensor::new(vec![header.count, header.rows, header.cols], data)?,
        labels,
        name: name.to_string(),
        num_classes: NUM_CLASSES,
    })
}

/// Parses concatenated CIFAR-10 binary records, converting each image to
/// luminance `(0.299 R + 0.587 G + 0.114 B) / 255`.
pub fn parse_cifar10(bytes: &[u8], name: &str) -> Result<RawDataset> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        return Err(Error::Format(format!(
            "CIFAR-10 buffer of {} bytes is not a multiple of the {CIFAR_RECORD_LEN}-byte record",
            bytes.len()
        )));
    }
    let plane = CIFAR_SIDE * CIFAR_SIDE;
    let n = bytes.len() / CIFAR_RECORD_LEN;
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * plane);
    for (i, record) in bytes.chunks_exact(CIFAR_RECORD_LEN).enumerate() {
        let label = record[0];
        if label as usize >= NUM_CLASSES {
            return Err(Error::Label { record: i, label });
        }
        labels.push(label as usize);
        let (r, rest) = record[1..].split_at(plane);
        let (g, b) = rest.split_at(plane);
        for p in 0..plane {
            let y = (0.299 * f64::from(r[p]) + 0.587 * f64::from(g[p]) + 0.114 * f64::from(b[p]))
                / 255.0;
            data.push(y.min(1.0));
        }
    }
    Ok(RawDataset {
        images: Tensor::new(vec![n, CIFAR_SIDE, CIFAR_SIDE], data)?,
        labels,
        name: name.to_string(),
        num_classes: NUM_CLASSES,
    })
}

/// Seeded shuffle split into `(train, test)` with `round(n·test_fraction)` test samples.
pub fn train_test_split(
    ds: &RawDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(RawDataset, RawDataset)> {
    let (train_idx, test_idx) = split_indices(ds.len(), test_fraction, seed)?;
    Ok((ds.subset(&train_idx), ds.subset(&test_idx)))
}

pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::Config(format!(
            "splitting {n} samples at {test_fraction} leaves an empty side"
        )));
    }
    let perm = SeededRng::new(seed).permutation(n);
    let (test, train) = perm.split_at(n_test);
    Ok((train.to_vec(), test.to_vec()))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads `<prefix>-images-idx3-ubyte` and `<prefix>-labels-idx1-ubyte`.
pub fn load_idx(prefix: &Path, name: &str) -> Result<RawDataset> {
    let with_suffix = |suffix: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(suffix);
        std::path::PathBuf::from(s)
    };
    let images = read(&with_suffix("-images-idx3-ubyte"))?;
    let labels = read(&with_suffix("-labels-idx1-ubyte"))?;
    parse_idx(&images, &labels, name)
}

/// Loads and concatenates one or more CIFAR-10 batch files.
pub fn load_cifar10(paths: &[&Path], name: &str) -> Result<RawDataset> {
    let mut bytes = Vec::new();
    for p in paths {
        bytes.extend(read(p)?);
    }
    parse_cifar10(&bytes, name)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IDX_IMAGE_MAGIC, count, rows, cols] {
            b.extend(v.to_be_bytes());
        }
        b.extend(pixels);
        b
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend(IDX_LABEL_MAGIC.to_be_bytes());
        b.extend((labels.len() as u32).to_be_bytes());
        b.extend(labels);
        b
    }

    #[test]
    fn official_train_header() {
        // First 16 bytes of train-images-idx3-ubyte as distributed.
        let header = [
            0x00, 0x00, 0x08, 0x03, 0x00, 0x00, 0xEA, 0x60, 0x00, 0x00, 0x00, 0x1C, 0x00, 0x00,
            0x00, 0x1C,
        ];
        let h = parse_idx_image_header(&header).unwrap();
        assert_eq!(
            h,
            IdxImageHeader {
                magic: 2051,
                count: 60000,
                rows: 28,
                cols: 28
            }
        );
    }

    #[test]
    fn single_blank_image() {
        let ds = parse_idx(
            &idx_images(1, 28, 28, &[0; 784]),
            &idx_labels(&[9]),
            "mnist",
        )
        .unwrap();
        assert_eq!(ds.images.shape(), &[1, 28, 28]);
        assert!(ds.images.data().iter().all(|&v| v == 0.0));
        assert_eq!(ds.labels, vec![9]);
    }

    #[test]
    fn normalisation_endpoints() {
        let ds = parse_idx(&idx_images(1, 1, 3, &[0, 128, 255]), &idx_labels(&[0]), "x").unwrap();
        assert_eq!(ds.images.data(), &[0.0, 128.0 / 255.0, 1.0]);
    }

    #[test]
    fn idx_errors() {
        let good = idx_images(2, 2, 2, &[1; 8]);
        assert!(matches!(
            parse_idx(&good, &idx_labels(&[1]), "x"),
            Err(Error::Consistency(_))
        ));
        assert!(matches!(
            parse_idx(&good[..20], &idx_labels(&[1, 2]), "x"),
            Err(Error::Truncated { .. })
        ));
        let mut bad = good.clone();
        bad[3] = 0x01;
        assert!(matches!(
            parse_idx(&bad, &idx_labels(&[1, 2]), "x"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            parse_idx(&good, &good, "x"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            parse_idx(&good, &idx_labels(&[1, 12]), "x"),
            Err(Error::Label { record: 1, .. })
        ));
    }

    fn cifar_record(label: u8, r: u8, g: u8, b: u8) -> Vec<u8> {
        let mut rec = vec![label];
        for v in [r, g, b] {
            rec.extend(std::iter::repeat_n(v, 1024));
        }
        rec
    }

    #[test]
    fn cifar_luminance() {
        let mut bytes = cifar_record(3, 255, 255, 255);
        bytes.extend(cifar_record(7, 255, 0, 0));
        let ds = parse_cifar10(&bytes, "cifar10").unwrap();
        assert_eq!(ds.images.shape(), &[2, 32, 32]);
        assert_eq!(ds.images.row_len(), 1024);
        assert_eq!(ds.labels, vec![3, 7]);
        assert!(ds.images.row(0).iter().all(|&v| v == 1.0));
        assert!(ds.images.row(1).iter().all(|&v| (v - 0.299).abs() < 1e-12));
    }

    #[test]
    fn cifar_errors() {
        let rec = cifar_record(1, 0, 0, 0);
        assert!(matches!(
            parse_cifar10(&rec[..3000], "x"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            parse_cifar10(&cifar_record(10, 0, 0, 0), "x"),
            Err(Error::Label { .. })
        ));
        assert_eq!(parse_cifar10(&[], "x").unwrap().len(), 0);
    }

    #[test]
    fn split_examples() {
        let (train, test) = split_indices(10, 0.2, 5).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        assert!(train.iter().all(|i| !test.contains(i)));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_indices(10, 0.2, 5).unwrap(), (train, test));
        assert!(split_indices(3, 0.1, 0).is_err());
        assert!(split_indices(10, 1.0, 0).is_err());
    }
}
