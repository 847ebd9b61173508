#!/usr/bin/env python3
"""Write IDX files from the 5000-image MNIST subset bundled with mlxtend.

The full MNIST archives cannot be fetched from an offline machine, but the
mlxtend wheel ships 5000 MNIST training images (500 per digit) as a gzipped
CSV. This script splits them per digit into 400 train / 100 test images and
writes them in the standard IDX layout under the usual MNIST file names.

    pip download --no-deps mlxtend -d /tmp/pkgs
    python3 tools/mnist_subset_to_idx.py /tmp/pkgs/mlxtend-*.whl data/mnist
"""

import argparse
import gzip
import struct
import zipfile
from pathlib import Path

CSV_MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def write_idx(path, dims, payload):
    header = bytes([0, 0, 8, len(dims)]) + b"".join(struct.pack(">I", d) for d in dims)
    path.write_bytes(header + bytes(payload))


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("wheel", type=Path)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--train-per-digit", type=int, default=400)
    args = parser.parse_args()

    with zipfile.ZipFile(args.wheel) as zf:
        text = gzip.decompress(zf.read(CSV_MEMBER)).decode()

    seen = [0] * 10
    splits = {"train": ([], []), "test": ([], [])}
    for line in text.strip().splitlines():
        fields = [int(float(v)) for v in line.split(",")]
        pixels, label = fields[:-1], fields[-1]
        assert len(pixels) == 784 and 0 <= label <= 9
        split = "train" if seen[label] < args.train_per_digit else "test"
        seen[label] += 1
        splits[split][0].extend(pixels)
        splits[split][1].append(label)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    names = {"train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
             "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")}
    for split, (images, labels) in splits.items():
        img_name, lbl_name = names[split]
        write_idx(args.out_dir / img_name, [len(labels), 28, 28], images)
        write_idx(args.out_dir / lbl_name, [len(labels)], labels)
        print(f"{split}: {len(labels)} images")


if __name__ == "__main__":
    main()
