#!/usr/bin/env python3
"""Build the committed 8x8 digits IDX fixture under data/digits/.

Scikit-learn's digits set (1,797 samples, 8x8, pixel values 0..16) is split
500 test / 1,297 train with a fixed shuffle, and the training pool is grown
to exactly 2,000 samples by appending one-pixel right-shifted copies of the
first 703 images. Pixels are rescaled to 0..255 bytes. The output follows
the IDX conventions: big-endian magic 0x00000803 / 0x00000801, big-endian
dimension sizes, unsigned byte payload.
"""

import pathlib
import struct

import numpy as np
from sklearn.datasets import load_digits


def write_idx(images: np.ndarray, labels: np.ndarray, stem: pathlib.Path) -> None:
    n, rows, cols = images.shape
    with open(f"{stem}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())
    with open(f"{stem}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.astype(np.uint8).tobytes())


def main() -> None:
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "digits"
    out.mkdir(parents=True, exist_ok=True)

    digits = load_digits()
    images = np.round(digits.images * 255.0 / 16.0).astype(np.uint8)
    labels = digits.target.astype(np.uint8)

    rng = np.random.default_rng(0)
    order = rng.permutation(len(labels))
    test_idx, train_idx = order[:500], order[500:]

    train_images = images[train_idx]
    train_labels = labels[train_idx]
    extra = 2000 - len(train_idx)
    shifted = np.roll(train_images[:extra], shift=1, axis=2)
    train_images = np.concatenate([train_images, shifted])
    train_labels = np.concatenate([train_labels, train_labels[:extra]])

    write_idx(train_images, train_labels, out / "train")
    write_idx(images[test_idx], labels[test_idx], out / "test")
    print(f"train {train_images.shape} test {images[test_idx].shape} -> {out}")


if __name__ == "__main__":
    main()
