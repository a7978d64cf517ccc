"""Independent reference computations used by the test-suite.

Nothing here imports the code paths it is used to check: finite differences
call only the public scalar function, and the naive evaluators loop in pure
Python.
"""

import math

import numpy as np


def central_difference(f, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        grad[j] = (f(x + e) - f(x - e)) / (2 * step)
    return grad


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def naive_kernel(kind, x, z, gamma=1.0, degree=2, coef0=0.0):
    dot = sum(float(a) * float(b) for a, b in zip(x, z))
    if kind == "linear":
        return dot
    if kind == "rbf":
        return math.exp(-gamma * sum((float(a) - float(b)) ** 2 for a, b in zip(x, z)))
    return (dot + coef0) ** degree


def naive_decision(alphas, labels, points, bias, x, **kernel):
    total = bias
    for a, y, p in zip(alphas, labels, points):
        total += a * y * naive_kernel(x=x, z=p, **kernel)
    return total


def gaussian_blobs(rng, n, d, sep=1.0, noise=1.0):
    """Two overlapping classes in d dims, standardized."""
    y = np.where(rng.random(n) < 0.5, -1, 1)
    if np.all(y == y[0]):
        y[0] = -y[0]
    mu = rng.normal(size=d)
    mu *= sep / np.linalg.norm(mu)
    X = rng.normal(scale=noise, size=(n, d)) + y[:, None] * mu
    X = (X - X.mean(0)) / X.std(0)
    return X, y
