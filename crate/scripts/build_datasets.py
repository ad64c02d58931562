#!/usr/bin/env python3
"""Regenerate the bundled datasets under data/.

  data/mnist/   10000 MNIST digits (IDX, gzip) converted from the JSON digit
                dump shipped by the `mnist` npm package (pass its directory).
  data/natural/ 20 grayscale 128x128 crops (binary PGM) of the public-domain
                photographs bundled with scikit-image and scikit-learn.

Usage: build_datasets.py NPM_MNIST_PACKAGE_DIR
"""
import gzip
import json
import os
import struct
import sys

import numpy as np

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")


def build_mnist(pkg):
    images, labels = [], []
    for digit in range(10):
        with open(os.path.join(pkg, "src", "digits", f"{digit}.json")) as f:
            raw = np.asarray(json.load(f)["data"], dtype=np.float64)
        raw = raw.reshape(-1, 28 * 28)
        images.append(np.rint(raw * 255.0).clip(0, 255).astype(np.uint8))
        labels.append(np.full(len(raw), digit, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.default_rng(20121001).permutation(len(labels))
    images, labels = images[order], labels[order]
    out = os.path.join(ROOT, "mnist")
    os.makedirs(out, exist_ok=True)
    with gzip.GzipFile(os.path.join(out, "digits-images-idx3-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(images.tobytes())
    with gzip.GzipFile(os.path.join(out, "digits-labels-idx1-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.tobytes())
    print("mnist:", len(labels), "digits, counts", np.bincount(labels))


def build_natural():
    from skimage import color, data, transform
    from sklearn.datasets import load_sample_image

    sources = {
        "camera": data.camera(),
        "astronaut": data.astronaut(),
        "coffee": data.coffee(),
        "chelsea": data.chelsea(),
        "rocket": data.rocket(),
        "coins": data.coins(),
        "moon": data.moon(),
        "hubble": data.hubble_deep_field(),
        "china": load_sample_image("china.jpg"),
        "flower": load_sample_image("flower.jpg"),
    }
    out = os.path.join(ROOT, "natural")
    os.makedirs(out, exist_ok=True)
    for name, im in sources.items():
        if im.ndim == 3:
            im = color.rgb2gray(im[..., :3])
        im = im.astype(np.float64)
        im = (im - im.min()) / (im.max() - im.min())
        h, w = im.shape
        scale = 256.0 / min(h, w)
        im = transform.resize(im, (round(h * scale), round(w * scale)), anti_aliasing=True)
        h, w = im.shape
        crops = [(h // 2 - 64, w // 2 - 64), (h // 4 - 32, w - w // 4 - 96)]
        for i, (r, c) in enumerate(crops):
            patch = np.rint(im[r:r + 128, c:c + 128] * 255).clip(0, 255).astype(np.uint8)
            with open(os.path.join(out, f"{name}_{i}.pgm"), "wb") as f:
                f.write(b"P5\n128 128\n255\n")
                f.write(patch.tobytes())
    print("natural:", len(os.listdir(out)), "crops")


if __name__ == "__main__":
    build_mnist(sys.argv[1])
    build_natural()
