#!/usr/bin/env python3
"""Rebuild data/mnist-10k/ from the digit JSON files shipped in the npm `mnist` package.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_from_npm.py package/src/digits data/mnist-10k

The package stores 10,000 MNIST digits as pixel/255 rounded to three decimals,
so round(v * 255) recovers the original bytes exactly. Samples are shuffled
with a fixed seed and written as IDX files: 9,000 train and 1,000 test.
"""
import json
import random
import struct
import sys
from pathlib import Path

TRAIN_N = 9000


def write_idx(prefix: Path, samples):
    with open(f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(samples), 28, 28))
        for pixels, _ in samples:
            f.write(bytes(pixels))
    with open(f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    dst.mkdir(parents=True, exist_ok=True)
    samples = []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(data) % 784 == 0
        for i in range(0, len(data), 784):
            pixels = [round(v * 255) for v in data[i : i + 784]]
            assert all(0 <= p <= 255 for p in pixels)
            samples.append((pixels, digit))
    random.Random(20191208).shuffle(samples)
    write_idx(dst / "train", samples[:TRAIN_N])
    write_idx(dst / "test", samples[TRAIN_N:])
    print(f"wrote {TRAIN_N} train / {len(samples) - TRAIN_N} test samples to {dst}")


if __name__ == "__main__":
    main()
