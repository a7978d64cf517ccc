"""Differentially private linear SVM by output perturbation.

The non-private weight vector is learned without an explicit bias: every
feature vector is augmented with a constant 1, and the matching weight plays
the bias role.  The release adds i.i.d. Laplace noise with scale
``4 C kappa sqrt(F) / beta`` to each weight.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, PreconditionError
from .svm import LabeledDataset, train_linear_unbiased

_MANTISSA = 2 ** 53


@dataclass(frozen=True)
class PrivacyParams:
    beta: float
    kappa: float
    feature_dim: int
    phi: float = 1.0
    delta: float = 0.05

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidArgumentError("beta must be > 0")
        if not self.kappa > 0:
            raise InvalidArgumentError("kappa must be > 0")
        if int(self.feature_dim) != self.feature_dim or self.feature_dim < 1:
            raise InvalidArgumentError("feature_dim must be a positive integer")
        if not self.phi > 0:
            raise InvalidArgumentError("phi must be > 0")
        if not 0 < self.delta < 1:
            raise InvalidArgumentError("delta must lie in (0, 1)")


def global_sensitivity(c_param, params):
    """L1 sensitivity bound ``4 C kappa sqrt(F)`` of the learned weight vector."""
    if not c_param > 0:
        raise InvalidArgumentError("c_param must be > 0")
    return 4.0 * c_param * params.kappa * np.sqrt(params.feature_dim)


def utility_epsilon(c_param, params):
    """``8 C kappa Phi sqrt(F) (F + ln(1/delta)) / beta``: with probability at
    least ``1 - delta`` the private and non-private discriminants differ by at
    most this much anywhere in the Phi-ball."""
    if not c_param > 0:
        raise InvalidArgumentError("c_param must be > 0")
    F = params.feature_dim
    return (8.0 * c_param * params.kappa * params.phi * np.sqrt(F)
            * (F + np.log(1.0 / params.delta)) / params.beta)


def laplace_noise(scale, dim, seed):
    """``dim`` i.i.d. zero-mean Laplace draws with the given scale.

    Uniforms in the open interval (0, 1) come from a Philox counter-based
    stream keyed by ``seed`` and are mapped through the inverse CDF.
    """
    if not scale > 0:
        raise InvalidArgumentError("scale must be > 0")
    if dim < 0:
        raise InvalidArgumentError("dim must be >= 0")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    u = (rng.integers(0, _MANTISSA, size=dim, dtype=np.int64) + 0.5) / _MANTISSA
    lower = u < 0.5
    out = np.empty(dim)
    out[lower] = scale * np.log(2.0 * u[lower])
    out[~lower] = -scale * np.log(2.0 * (1.0 - u[~lower]))
    return out


def augment(features):
    features = np.asarray(features, dtype=float)
    return np.hstack([features, np.ones((features.shape[0], 1))])


def _validated(data, params):
    X = augment(data.features)
    if X.shape[1] != params.feature_dim:
        raise InvalidArgumentError(
            f"augmented data has {X.shape[1]} features, params declare {params.feature_dim}")
    norms = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(norms > params.kappa)
    if bad.size:
        i = int(bad[0])
        raise PreconditionError(
            f"sample {i} has augmented L2 norm {norms[i]:.6g} > kappa {params.kappa:g}", index=i)
    return LabeledDataset(X, data.labels)


def nonprivate_weights(data, c_param, params):
    """Weight vector (bias last) of the SVM trained on augmented features."""
    return train_linear_unbiased(_validated(data, params), c_param)


def private_svm_train(data, c_param, params, seed):
    """Release ``w_hat + Laplace(0, sensitivity / beta)`` noise."""
    w_hat = nonprivate_weights(data, c_param, params)
    return w_hat + laplace_noise(global_sensitivity(c_param, params) / params.beta, w_hat.size, seed)


def private_releases(data, c_param, params, seeds):
    """Many releases of the same data, one per seed, training only once.

    Row ``j`` equals ``private_svm_train(data, c_param, params, seeds[j])``.
    """
    w_hat = nonprivate_weights(data, c_param, params)
    scale = global_sensitivity(c_param, params) / params.beta
    return np.array([w_hat + laplace_noise(scale, w_hat.size, s) for s in seeds]).reshape(-1, w_hat.size)


def release_dict(weights, c_param, params):
    return {
        "weights": [float(v) for v in weights],
        "beta": float(params.beta),
        "sensitivity": float(global_sensitivity(c_param, params)),
        "epsilon_bound": float(utility_epsilon(c_param, params)),
        "delta": float(params.delta),
    }


def release_json(weights, c_param, params):
    return json.dumps(release_dict(weights, c_param, params), sort_keys=True)


def private_decision(weights, features):
    """Discriminant of a released weight vector on raw (unaugmented) features."""
    return augment(np.atleast_2d(features)) @ np.asarray(weights)
