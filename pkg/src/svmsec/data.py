"""Dataset generation, loading and resampling.

Every generator is a pure function of its arguments and seed.  MNIST is read
from user-supplied IDX files; nothing is downloaded.
"""

import csv
import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, InvalidArgumentError
from .svm import LabeledDataset

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
KEYWORD_CAP = 100

GAUSS_MEAN_NEG = (-1.5, 0.0)
GAUSS_MEAN_POS = (1.5, 0.0)
GAUSS_VAR = 0.6


def gen_gaussian_2d(n_per_class, seed):
    """Two isotropic Gaussians at (-1.5, 0) (label -1) and (1.5, 0) (label +1),
    covariance 0.6 I."""
    if n_per_class < 1:
        raise InvalidArgumentError("n_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    sd = np.sqrt(GAUSS_VAR)
    neg = rng.normal(GAUSS_MEAN_NEG, sd, size=(n_per_class, 2))
    pos = rng.normal(GAUSS_MEAN_POS, sd, size=(n_per_class, 2))
    X = np.vstack([neg, pos])
    y = np.repeat([-1, 1], n_per_class)
    return LabeledDataset(X, y)


# --- IDX ---------------------------------------------------------------------

_IDX_DTYPES = {0x08: np.uint8, 0x09: np.int8, 0x0B: ">i2", 0x0C: ">i4", 0x0D: ">f4", 0x0E: ">f8"}


def _open(path):
    path = os.fspath(path)
    with open(path, "rb") as f:
        head = f.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(path, expected_magic=None):
    """Read an IDX file (optionally gzip-compressed) into a numpy array."""
    with _open(path) as f:
        raw = f.read()
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated header", offset=len(raw))
    magic = struct.unpack(">I", raw[:4])[0]
    if expected_magic is not None and magic != expected_magic:
        raise FormatError(f"{path}: bad magic number 0x{magic:08x} at byte offset 0, "
                          f"expected 0x{expected_magic:08x}", offset=0)
    if raw[0] != 0 or raw[1] != 0 or raw[2] not in _IDX_DTYPES:
        raise FormatError(f"{path}: bad magic number 0x{magic:08x} at byte offset 0", offset=0)
    ndim = raw[3]
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated dimension header", offset=len(raw))
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    dtype = np.dtype(_IDX_DTYPES[raw[2]])
    need = int(np.prod(dims)) * dtype.itemsize
    have = len(raw) - header
    if have < need:
        raise FormatError(f"{path}: truncated data, expected {need} bytes after offset "
                          f"{header} but file ends at offset {len(raw)}", offset=len(raw))
    return np.frombuffer(raw, dtype=dtype, count=int(np.prod(dims)), offset=header).reshape(dims)


def write_idx(path, array):
    """Write an unsigned-byte IDX file (the MNIST layout)."""
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise InvalidArgumentError("write_idx only writes uint8 arrays")
    with open(path, "wb") as f:
        f.write(struct.pack(">BBBB", 0, 0, 0x08, array.ndim))
        f.write(struct.pack(f">{array.ndim}I", *array.shape))
        f.write(np.ascontiguousarray(array).tobytes())


def load_mnist_pair(image_path, label_path, digit_a, digit_b):
    """Two-digit subset of an MNIST split.

    ``digit_a`` maps to +1 and ``digit_b`` to -1.  Pixels are scaled to [0, 1]
    by dividing by 255 and flattened in raster-scan order.
    """
    images = read_idx(image_path, IDX_IMAGES_MAGIC)
    labels = read_idx(label_path, IDX_LABELS_MAGIC)
    if images.ndim != 3 or labels.ndim != 1:
        raise FormatError("unexpected IDX dimensionality for MNIST", offset=3)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"image count {images.shape[0]} does not match label count "
                          f"{labels.shape[0]} (count field at byte offset 4)", offset=4)
    if digit_a == digit_b:
        raise InvalidArgumentError("the two digits must differ")
    keep = (labels == digit_a) | (labels == digit_b)
    X = images[keep].reshape(int(keep.sum()), -1).astype(float) / 255.0
    y = np.where(labels[keep] == digit_a, 1, -1)
    return LabeledDataset(X, y)


def find_mnist_files(directory, split="train"):
    """Locate ``{split}-images-idx3-ubyte[.gz]`` and the matching labels file."""
    prefix = "train" if split == "train" else "t10k"
    found = []
    for kind, tag in (("images", "idx3"), ("labels", "idx1")):
        for name in (f"{prefix}-{kind}-{tag}-ubyte", f"{prefix}-{kind}.{tag}-ubyte",
                     f"{prefix}-{kind}-{tag}-ubyte.gz", f"{prefix}-{kind}.{tag}-ubyte.gz"):
            path = os.path.join(directory, name)
            if os.path.exists(path):
                found.append(path)
                break
        else:
            raise FileNotFoundError(f"no {prefix} {kind} IDX file in {directory}")
    return tuple(found)


# --- synthetic keyword counts -------------------------------------------------

@dataclass(frozen=True)
class _KeywordProfile:
    benign_rates: np.ndarray        # (features,)
    family_rates: np.ndarray        # (families, features)


def _keyword_profile(n_features, profile_seed=2013):
    """Fixed Poisson class profiles.

    Benign documents form one homogeneous population that uses a block of
    benign-typical keywords.  Malicious documents come from a few families,
    each using its own handful of malicious-typical keywords.  The remaining
    structural keywords have the same rates in both classes.
    """
    if n_features < 4:
        raise InvalidArgumentError("n_features must be at least 4")
    rng = np.random.default_rng(profile_seed)
    n_mark = max(2, n_features // 10)
    n_common = n_features - 2 * n_mark
    common = rng.gamma(2.0, 0.5, n_common)
    rare = np.full(n_mark, 0.05)
    benign = np.concatenate([rng.uniform(0.5, 1.5, n_mark), rare, common])
    fam_size = max(1, n_mark * 3 // 10)
    families = []
    for _ in range(4):
        mal = rare.copy()
        idx = rng.choice(n_mark, fam_size, replace=False)
        mal[idx] = rng.uniform(1.0, 3.0, fam_size)
        families.append(np.concatenate([rare, mal, common]))
    return _KeywordProfile(benign, np.array(families))


def gen_keyword_counts(n_per_class, n_features=100, seed=0):
    """Synthetic PDF-like keyword tallies: nonnegative integers capped at 100.

    Label -1 is benign, +1 malicious; each malicious sample belongs to a
    family chosen uniformly at random.
    """
    if n_per_class < 1:
        raise InvalidArgumentError("n_per_class must be >= 1")
    profile = _keyword_profile(n_features)
    rng = np.random.default_rng(seed)
    benign = rng.poisson(profile.benign_rates, size=(n_per_class, n_features))
    fam = rng.integers(0, len(profile.family_rates), n_per_class)
    malicious = rng.poisson(profile.family_rates[fam])
    X = np.minimum(np.vstack([benign, malicious]), KEYWORD_CAP).astype(float)
    y = np.repeat([-1, 1], n_per_class)
    return LabeledDataset(X, y)


# --- resampling ----------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_per_class: int
    val_per_class: int
    test_per_class: object = "remainder"
    seed: int = 0


def split(data, spec):
    """Disjoint stratified (train, val, test) subsets drawn by a seeded shuffle.

    With ``test_per_class="remainder"`` the test set takes every unused point.
    """
    rng = np.random.default_rng(spec.seed)
    parts = ([], [], [])
    for label in (-1, 1):
        idx = np.flatnonzero(data.labels == label)
        rng.shuffle(idx)
        n_tr, n_val = spec.train_per_class, spec.val_per_class
        n_te = idx.size - n_tr - n_val if spec.test_per_class == "remainder" else spec.test_per_class
        if min(n_tr, n_val, n_te) < 0 or n_tr + n_val + n_te > idx.size:
            raise InvalidArgumentError(
                f"split needs {n_tr}+{n_val}+{n_te} points of class {label:+d}, "
                f"only {idx.size} available")
        parts[0].append(idx[:n_tr])
        parts[1].append(idx[n_tr:n_tr + n_val])
        parts[2].append(idx[n_tr + n_val:n_tr + n_val + n_te])
    out = []
    for chunks in parts:
        idx = np.concatenate(chunks)
        rng.shuffle(idx)
        out.append(data.subset(idx) if idx.size else None)
    return tuple(out)


# --- CSV interchange -------------------------------------------------------------

def save_csv(data, path):
    """Write ``label,f0,f1,...`` with one row per sample."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["label"] + [f"f{j}" for j in range(data.d)])
        for x, y in zip(data.features, data.labels):
            w.writerow([int(y)] + [repr(float(v)) for v in x])


def load_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][0] != "label":
        raise FormatError(f"{path}: CSV must start with a 'label,f0,...' header", offset=0)
    body = np.array(rows[1:], dtype=float)
    if body.ndim != 2 or body.shape[0] == 0:
        raise FormatError(f"{path}: no samples", offset=None)
    return LabeledDataset(body[:, 1:], body[:, 0].astype(int))


def load_dataset(path, digits=None):
    """Load CSV, or an MNIST IDX image file when ``digits=(a, b)`` is given.

    For IDX, the labels file is found by swapping ``images-idx3`` for
    ``labels-idx1`` in the file name.
    """
    path = os.fspath(path)
    if path.endswith(".csv"):
        return load_csv(path)
    if "idx3" in path:
        if digits is None:
            raise InvalidArgumentError("IDX input needs a digit pair")
        label_path = path.replace("images-idx3", "labels-idx1").replace("images.idx3", "labels.idx1")
        return load_mnist_pair(path, label_path, *digits)
    raise InvalidArgumentError(f"cannot infer dataset format from {path!r}")
