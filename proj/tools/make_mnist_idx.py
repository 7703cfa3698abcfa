#!/usr/bin/env python3
"""Build the desk-scale MNIST subset used by the acceptance suite.

The `mnist` npm package ships 10,000 MNIST digits as per-class JSON arrays of
pixel intensities normalized to [0, 1] (three decimals). This script converts
them into the standard IDX layout (images magic 0x00000803, labels magic
0x00000801) and splits them into a fixed 8,000 / 2,000 train/test partition.

Usage:
    python3 tools/make_mnist_idx.py [--package DIR] [--out data/mnist]

Without --package the script runs `npm pack mnist` into a temporary directory.
"""

import argparse
import json
import random
import struct
import subprocess
import tarfile
import tempfile
from pathlib import Path

TRAIN_COUNT = 8000
SPLIT_SEED = 20250101


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def fetch_package(workdir):
    subprocess.run(["npm", "pack", "mnist", "--silent"], cwd=workdir, check=True)
    tgz = next(Path(workdir).glob("mnist-*.tgz"))
    with tarfile.open(tgz) as tar:
        tar.extractall(workdir)
    return Path(workdir) / "package"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--package", type=Path, help="extracted npm package directory")
    ap.add_argument("--out", type=Path, default=Path("data/mnist"))
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        pkg = args.package or fetch_package(tmp)
        samples = []
        for digit in range(10):
            data = json.loads((pkg / "src" / "digits" / f"{digit}.json").read_text())["data"]
            assert len(data) % 784 == 0
            for i in range(0, len(data), 784):
                pixels = [min(255, max(0, round(v * 255))) for v in data[i:i + 784]]
                samples.append((pixels, digit))

    random.Random(SPLIT_SEED).shuffle(samples)
    train, test = samples[:TRAIN_COUNT], samples[TRAIN_COUNT:]
    args.out.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train), ("test", test)):
        write_images(args.out / f"{name}-images-idx3-ubyte", [p for p, _ in part])
        write_labels(args.out / f"{name}-labels-idx1-ubyte", [l for _, l in part])
        print(f"{name}: {len(part)} samples")


if __name__ == "__main__":
    main()
