#![allow(dead_code)]

use std::path::{Path, PathBuf};

use aeddqn_core::SeededRng;

pub fn idx_image_bytes(count: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    for v in [2051u32, count as u32, rows as u32, cols as u32] {
        b.extend(v.to_be_bytes());
    }
    b.extend(pixels);
    b
}

pub fn idx_label_bytes(labels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend(2049u32.to_be_bytes());
    b.extend((labels.len() as u32).to_be_bytes());
    b.extend(labels);
    b
}

/// Blobby 28×28 digits-like images: each class lights a different band.
pub fn synthetic_idx(dir: &Path, prefix: &str, count: usize, seed: u64) -> PathBuf {
    let mut rng = SeededRng::new(seed);
    let mut pixels = Vec::with_capacity(count * 784);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let label = rng.below(10);
        labels.push(label as u8);
        for r in 0..28 {
            for _ in 0..28 {
                let lit = r / 3 == label;
                let noise = rng.below(40) as u8;
                pixels.push(if lit { 215 + noise } else { noise });
            }
        }
    }
    let base = dir.join(prefix);
    std::fs::write(
        dir.join(format!("{prefix}-images-idx3-ubyte")),
        idx_image_bytes(count, 28, 28, &pixels),
    )
    .unwrap();
    std::fs::write(
        dir.join(format!("{prefix}-labels-idx1-ubyte")),
        idx_label_bytes(&labels),
    )
    .unwrap();
    base
}
