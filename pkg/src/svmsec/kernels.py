"""Kernel functions and their gradients with respect to the first argument."""

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

LINEAR = "linear"
RBF = "rbf"
POLY = "poly"
_KINDS = (LINEAR, RBF, POLY)


@dataclass(frozen=True)
class KernelSpec:
    """Tagged kernel choice.

    ``gamma`` is only read for RBF; ``degree`` and ``coef0`` only for the
    polynomial kernel ``(<x, z> + coef0) ** degree``.
    """

    kind: str = LINEAR
    gamma: float = 1.0
    degree: int = 2
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidArgumentError(f"unknown kernel kind {self.kind!r}")
        if self.kind == RBF and not self.gamma > 0:
            raise InvalidArgumentError("RBF kernel needs gamma > 0")
        if self.kind == POLY:
            if int(self.degree) != self.degree or self.degree < 1:
                raise InvalidArgumentError("polynomial degree must be an integer >= 1")
            object.__setattr__(self, "degree", int(self.degree))

    @classmethod
    def linear(cls):
        return cls(LINEAR)

    @classmethod
    def rbf(cls, gamma):
        return cls(RBF, gamma=float(gamma))

    @classmethod
    def poly(cls, degree, coef0=0.0):
        return cls(POLY, degree=degree, coef0=float(coef0))

    def to_dict(self):
        if self.kind == LINEAR:
            return {"kind": LINEAR}
        if self.kind == RBF:
            return {"kind": RBF, "gamma": self.gamma}
        return {"kind": POLY, "degree": self.degree, "coef0": self.coef0}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", None)
        if kind is None:
            raise InvalidArgumentError("kernel object needs a 'kind' field")
        unknown = set(d) - {"gamma", "degree", "coef0"}
        if unknown:
            raise InvalidArgumentError(f"unknown kernel fields: {sorted(unknown)}")
        if kind == RBF and "gamma" not in d:
            raise InvalidArgumentError("rbf kernel needs 'gamma'")
        return cls(kind, **d)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _as_matrix(a):
    a = np.asarray(a, dtype=float)
    return a[None, :] if a.ndim == 1 else a


def _check_dims(x, z):
    if x.shape[-1] != z.shape[-1]:
        raise InvalidArgumentError(
            f"dimension mismatch: {x.shape[-1]} vs {z.shape[-1]}")


def sq_distances(X, Z):
    """Pairwise squared Euclidean distances, clipped at zero."""
    X = _as_matrix(X)
    Z = _as_matrix(Z)
    _check_dims(X, Z)
    d = (X * X).sum(1)[:, None] + (Z * Z).sum(1)[None, :] - 2.0 * X @ Z.T
    return np.maximum(d, 0.0)


def kernel_matrix(spec, X, Z):
    """Kernel values between the rows of ``X`` (m, d) and ``Z`` (n, d)."""
    X = _as_matrix(X)
    Z = _as_matrix(Z)
    _check_dims(X, Z)
    if spec.kind == LINEAR:
        return X @ Z.T
    if spec.kind == RBF:
        if X.shape[0] * Z.shape[0] * X.shape[1] <= 2_000_000:
            # direct differences stay exact near x == z, the expansion does not
            d = ((X[:, None, :] - Z[None, :, :]) ** 2).sum(-1)
        else:
            d = sq_distances(X, Z)
        return np.exp(-spec.gamma * d)
    return (X @ Z.T + spec.coef0) ** spec.degree


def kernel_eval(spec, x, z):
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.ndim != 1 or z.ndim != 1:
        raise InvalidArgumentError("kernel_eval takes two vectors")
    _check_dims(x, z)
    if spec.kind == LINEAR:
        return float(x @ z)
    if spec.kind == RBF:
        diff = x - z
        return float(np.exp(-spec.gamma * (diff @ diff)))
    return float((x @ z + spec.coef0) ** spec.degree)


def kernel_grad_rows(spec, x, Z):
    """Gradients of ``k(x, z_i)`` with respect to ``x``, one row per ``z_i``."""
    x = np.asarray(x, dtype=float)
    Z = _as_matrix(Z)
    _check_dims(x, Z)
    if spec.kind == LINEAR:
        return Z.copy()
    if spec.kind == RBF:
        diff = x[None, :] - Z
        k = np.exp(-spec.gamma * (diff * diff).sum(1))
        return (-2.0 * spec.gamma * k)[:, None] * diff
    p = spec.degree
    base = Z @ x + spec.coef0
    return (p * base ** (p - 1))[:, None] * Z


def kernel_grad(spec, x, z):
    """Gradient of ``k(x, z)`` with respect to ``x``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.ndim != 1 or z.ndim != 1:
        raise InvalidArgumentError("kernel_grad takes two vectors")
    return kernel_grad_rows(spec, x, z[None, :])[0]
