#!/usr/bin/env python3
"""Write the scikit-learn 8x8 handwritten digits as 28x28 IDX files.

Stand-in for the EMNIST digits split when the NIST download is unavailable.
Each 8x8 digit (values 0..16) is bilinearly resized to 20x20 and centred in a
28x28 frame with a 4 pixel margin, as in the MNIST layout.
"""
import argparse
import struct
from pathlib import Path

import numpy as np
from scipy.ndimage import zoom
from sklearn.datasets import load_digits


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir", type=Path)
    args = ap.parse_args()
    digits = load_digits()
    imgs = digits.images / 16.0
    out = np.zeros((len(imgs), 28, 28), dtype=np.uint8)
    for k, im in enumerate(imgs):
        big = np.clip(zoom(im, 20 / 8, order=1), 0.0, 1.0)
        out[k, 4:24, 4:24] = np.round(big * 255).astype(np.uint8)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    with open(args.out_dir / "digits-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(out), 28, 28))
        f.write(out.tobytes())
    with open(args.out_dir / "digits-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(out)))
        f.write(digits.target.astype(np.uint8).tobytes())


if __name__ == "__main__":
    main()
