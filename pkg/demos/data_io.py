"""Datasets: Gaussian toy data, synthetic keyword counts, IDX digit files,
stratified splits and CSV round trips.

Run: python demos/data_io.py [MNIST_DIR]
With a directory holding the MNIST IDX files the 3-vs-7 pair is loaded too.
"""
import sys
import tempfile
from pathlib import Path

import numpy as np

from svmsec.data import (SplitSpec, find_mnist_files, gen_gaussian_2d, gen_keyword_counts, load_csv,
                         load_mnist_pair, read_idx, save_csv, split, write_idx)

toy = gen_gaussian_2d(100, seed=0)
print("gaussian toy:", toy.features.shape, "class counts", toy.class_counts())

pdfs = gen_keyword_counts(200, seed=0)
mal, ben = pdfs.features[pdfs.labels == 1], pdfs.features[pdfs.labels == -1]
print(f"keyword counts: {pdfs.features.shape}, mean words per malicious sample {mal.sum(1).mean():.1f}, "
      f"per benign sample {ben.sum(1).mean():.1f}")

train, val, test = split(pdfs, SplitSpec(50, 25, "remainder", seed=1))
print("split sizes:", train.n, val.n, test.n)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "toy.csv"
    save_csv(toy, path)
    back = load_csv(path)
    print("CSV round trip exact:", np.array_equal(back.features, toy.features))

    images = np.random.default_rng(0).integers(0, 256, size=(4, 28, 28), dtype=np.uint8)
    write_idx(Path(tmp) / "imgs", images)
    print("IDX round trip exact:", np.array_equal(read_idx(Path(tmp) / "imgs"), images))

if len(sys.argv) > 1:
    img, lab = find_mnist_files(sys.argv[1])
    digits = load_mnist_pair(img, lab, 3, 7)
    print(f"MNIST 3 vs 7: {digits.n} images of {digits.d} pixels in [0, 1]")
