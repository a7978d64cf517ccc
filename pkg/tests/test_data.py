import gzip
import struct

import numpy as np
import pytest

from svmsec.data import (SplitSpec, find_mnist_files, gen_gaussian_2d, gen_keyword_counts, load_csv,
                         load_dataset, load_mnist_pair, read_idx, save_csv, split, write_idx)
from svmsec.errors import FormatError, InvalidArgumentError
from svmsec.svm import train_svm


def reference_idx(path):
    """Second, byte-by-byte IDX reader for unsigned-byte files."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as f:
        blob = f.read()
    zero1, zero2, code, ndim = blob[0], blob[1], blob[2], blob[3]
    assert (zero1, zero2, code) == (0, 0, 8)
    dims = []
    for k in range(ndim):
        b = blob[4 + 4 * k:8 + 4 * k]
        dims.append(((b[0] * 256 + b[1]) * 256 + b[2]) * 256 + b[3])
    start = 4 + 4 * ndim
    values = list(blob[start:start + int(np.prod(dims))])
    return dims, values


def fake_mnist(tmp_path, n=60, seed=0, gz=False):
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, size=(n, 28, 28), dtype=np.uint8)
    labels = rng.integers(0, 10, size=n).astype(np.uint8)
    img, lab = tmp_path / "train-images-idx3-ubyte", tmp_path / "train-labels-idx1-ubyte"
    write_idx(img, images)
    write_idx(lab, labels)
    if gz:
        for p in (img, lab):
            data = p.read_bytes()
            with gzip.open(str(p) + ".gz", "wb") as f:
                f.write(data)
            p.unlink()
        img, lab = img.with_name(img.name + ".gz"), lab.with_name(lab.name + ".gz")
    return img, lab, images, labels


def test_gaussian_moments():
    data = gen_gaussian_2d(100_000, seed=1)
    for label, mean in ((-1, [-1.5, 0.0]), (1, [1.5, 0.0])):
        X = data.features[data.labels == label]
        np.testing.assert_allclose(X.mean(0), mean, atol=0.02)
        np.testing.assert_allclose(np.cov(X.T), 0.6 * np.eye(2), atol=0.02)


def test_gaussian_deterministic():
    a, b = gen_gaussian_2d(10, 3), gen_gaussian_2d(10, 3)
    np.testing.assert_array_equal(a.features, b.features)
    assert not np.array_equal(a.features, gen_gaussian_2d(10, 4).features)


def test_idx_round_trip_matches_reference(tmp_path):
    img, lab, images, labels = fake_mnist(tmp_path)
    np.testing.assert_array_equal(read_idx(img), images)
    dims, values = reference_idx(img)
    assert dims == [60, 28, 28]
    assert values == images.ravel().tolist()
    dims, values = reference_idx(lab)
    assert values == labels.tolist()


def test_idx_gzip(tmp_path):
    img, _, images, _ = fake_mnist(tmp_path, gz=True)
    np.testing.assert_array_equal(read_idx(img), images)


def test_idx_wider_dtype(tmp_path):
    arr = (np.arange(6).reshape(2, 3) - 3).astype(">i4")
    path = tmp_path / "x.idx"
    path.write_bytes(struct.pack(">BBBB", 0, 0, 0x0C, 2) + struct.pack(">2I", 2, 3) + arr.tobytes())
    np.testing.assert_array_equal(read_idx(path), arr)


def test_idx_bad_magic(tmp_path):
    img, lab, *_ = fake_mnist(tmp_path)
    with pytest.raises(FormatError) as err:
        read_idx(lab, expected_magic=0x803)
    assert err.value.offset == 0
    path = tmp_path / "junk"
    path.write_bytes(b"\x12\x34\x56\x78" + b"\0" * 16)
    with pytest.raises(FormatError):
        read_idx(path)


def test_idx_truncated(tmp_path):
    img, *_ = fake_mnist(tmp_path, n=5)
    raw = img.read_bytes()
    img.write_bytes(raw[:-10])
    with pytest.raises(FormatError) as err:
        read_idx(img)
    assert err.value.offset == len(raw) - 10
    img.write_bytes(raw[:6])
    with pytest.raises(FormatError):
        read_idx(img)


def test_mnist_count_mismatch(tmp_path):
    img, lab, images, labels = fake_mnist(tmp_path, n=10)
    write_idx(lab, labels[:9])
    with pytest.raises(FormatError) as err:
        load_mnist_pair(img, lab, 3, 7)
    assert err.value.offset == 4


def test_mnist_pair_scaling_and_labels(tmp_path):
    img, lab, images, labels = fake_mnist(tmp_path, n=200)
    data = load_mnist_pair(img, lab, 3, 7)
    keep = (labels == 3) | (labels == 7)
    assert data.n == keep.sum()
    assert data.d == 784
    np.testing.assert_array_equal(data.labels, np.where(labels[keep] == 3, 1, -1))
    np.testing.assert_allclose(data.features, images[keep].reshape(-1, 784) / 255.0)
    # counting one digit agrees with the reference reader
    _, ref = reference_idx(lab)
    assert int((data.labels == 1).sum()) == ref.count(3)


def test_find_mnist_files_and_load_dataset(tmp_path):
    fake_mnist(tmp_path, n=50, gz=True)
    img, lab = find_mnist_files(tmp_path)
    assert img.endswith("train-images-idx3-ubyte.gz")
    a = load_dataset(img, digits=(1, 2))
    assert a.features.shape[1] == 784
    with pytest.raises(FileNotFoundError):
        find_mnist_files(tmp_path, split="test")
    with pytest.raises(InvalidArgumentError):
        load_dataset(img)


def test_keyword_counts_properties():
    data = gen_keyword_counts(300, seed=2)
    X = data.features
    assert X.shape == (600, 100)
    assert np.all(X == np.round(X)) and X.min() >= 0 and X.max() <= 100
    assert sorted(set(data.labels.tolist())) == [-1, 1]
    np.testing.assert_array_equal(X, gen_keyword_counts(300, seed=2).features)
    assert not np.array_equal(X, gen_keyword_counts(300, seed=3).features)
    assert gen_keyword_counts(5, n_features=20, seed=0).d == 20


def test_keyword_counts_linearly_learnable():
    data = gen_keyword_counts(500, seed=0)
    train, _, test = split(data, SplitSpec(250, 0, "remainder", seed=0))
    assert train_svm(train, 1.0).error_rate(test) <= 0.05


def test_split_properties():
    data = gen_gaussian_2d(100, seed=0)
    tr, va, te = split(data, SplitSpec(20, 30, "remainder", seed=5))
    for part, k in ((tr, 20), (va, 30), (te, 50)):
        assert (part.labels == -1).sum() == k and (part.labels == 1).sum() == k
    rows = lambda d: {tuple(r) for r in d.features}
    assert not rows(tr) & rows(va) and not rows(tr) & rows(te) and not rows(va) & rows(te)
    assert len(rows(tr) | rows(va) | rows(te)) == 200
    again = split(data, SplitSpec(20, 30, "remainder", seed=5))
    np.testing.assert_array_equal(again[0].features, tr.features)
    with pytest.raises(InvalidArgumentError):
        split(data, SplitSpec(80, 30, "remainder", seed=0))


def test_csv_round_trip(tmp_path):
    data = gen_gaussian_2d(7, seed=9)
    path = tmp_path / "d.csv"
    save_csv(data, path)
    assert path.read_text().splitlines()[0] == "label,f0,f1"
    back = load_csv(path)
    np.testing.assert_array_equal(back.features, data.features)
    np.testing.assert_array_equal(back.labels, data.labels)
    np.testing.assert_array_equal(load_dataset(str(path)).features, data.features)
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    with pytest.raises(FormatError):
        load_csv(bad)
