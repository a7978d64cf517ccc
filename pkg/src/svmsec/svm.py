"""Soft-margin SVM training via a two-variable (SMO) dual solver.

The dual problem is

    min_a  1/2 a' Q a - 1' a    s.t.  y' a = 0,  0 <= a_i <= C,

with ``Q = K * y y'``.  The solver repeatedly picks a maximally KKT-violating
pair and optimizes it analytically.  After convergence the margin set is
identified and the equality-constrained KKT system on it is solved exactly
("polishing"), which gives the machine-precision solutions that the
poisoning gradient and its finite-difference checks rely on.
"""

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import ConvergenceError, InvalidArgumentError, UnsupportedInputError
from .kernels import KernelSpec, LINEAR, kernel_grad_rows, kernel_matrix

ALPHA_TOL = 1e-6
MARGIN_TOL = 1e-4
SOLVER_TOL = 1e-6
MAX_PAIR_UPDATES = 10_000_000


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature matrix (n, d) with labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        y = np.array(self.labels)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidArgumentError(f"features must be a non-empty (n, d) matrix, got {X.shape}")
        if y.shape != (X.shape[0],):
            raise InvalidArgumentError(
                f"labels shape {y.shape} does not match {X.shape[0]} samples")
        if not np.all(np.isfinite(X)):
            raise InvalidArgumentError("features contain NaN or infinite values")
        if not np.all((y == 1) | (y == -1)):
            raise InvalidArgumentError("labels must be -1 or +1")
        y = y.astype(np.int64)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def subset(self, index):
        index = np.asarray(index)
        return LabeledDataset(self.features[index], self.labels[index])

    def with_point(self, x, y):
        x = np.asarray(x, dtype=float).reshape(1, -1)
        if x.shape[1] != self.d:
            raise InvalidArgumentError(f"point has {x.shape[1]} features, dataset has {self.d}")
        return LabeledDataset(np.vstack([self.features, x]), np.append(self.labels, int(y)))

    def concat(self, other):
        return LabeledDataset(np.vstack([self.features, other.features]),
                              np.concatenate([self.labels, other.labels]))

    def class_counts(self):
        return int(np.sum(self.labels == -1)), int(np.sum(self.labels == 1))

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels))

    __hash__ = None


class KktSets(NamedTuple):
    """Index partition: margin (S), error (E) and reserve (R) vectors."""

    S: np.ndarray
    E: np.ndarray
    R: np.ndarray


def partition(alphas, c_param, tol=ALPHA_TOL):
    alphas = np.asarray(alphas)
    E = alphas >= c_param - tol
    R = (alphas <= tol) & ~E
    S = ~E & ~R
    return KktSets(np.flatnonzero(S), np.flatnonzero(E), np.flatnonzero(R))


@dataclass(frozen=True, eq=False)
class SvmModel:
    alphas: np.ndarray
    bias: float
    train_data: LabeledDataset
    kernel: KernelSpec
    c_param: float
    sets: KktSets = None
    kkt_tolerance: float = ALPHA_TOL
    margin_tolerance: float = MARGIN_TOL
    n_iter: int = 0
    _gram: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        a = np.array(self.alphas, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "bias", float(self.bias))
        if self.sets is None:
            object.__setattr__(self, "sets", partition(a, self.c_param, self.kkt_tolerance))

    @property
    def n_features(self):
        return self.train_data.d

    @property
    def dual_coef(self):
        """``alpha_i * y_i`` for every training point."""
        return self.alphas * self.train_data.labels

    def gram(self):
        """Training kernel matrix, computed once and cached."""
        if self._gram is None:
            X = self.train_data.features
            object.__setattr__(self, "_gram", kernel_matrix(self.kernel, X, X))
        return self._gram

    def _support(self):
        sv = self.alphas > 0
        return self.train_data.features[sv], self.dual_coef[sv]

    def _check_x(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_features or x.ndim > 2:
            raise InvalidArgumentError(
                f"expected {self.n_features} features, got shape {x.shape}")
        return x

    def decision_function(self, x):
        """Discriminant ``g(x) = sum_i a_i y_i k(x, x_i) + b``.

        Accepts a single vector (returns a float) or a matrix of row vectors.
        """
        x = self._check_x(x)
        Xs, coef = self._support()
        if Xs.shape[0] == 0:
            g = np.full(x.shape[0] if x.ndim == 2 else 1, self.bias)
        else:
            g = kernel_matrix(self.kernel, x, Xs) @ coef + self.bias
        return float(g[0]) if x.ndim == 1 else g

    def decision_gradient(self, x):
        x = self._check_x(x)
        if x.ndim != 1:
            raise InvalidArgumentError("decision_gradient takes a single vector")
        Xs, coef = self._support()
        if Xs.shape[0] == 0:
            return np.zeros_like(x)
        return coef @ kernel_grad_rows(self.kernel, x, Xs)

    def classify(self, x):
        g = self.decision_function(x)
        if np.ndim(g) == 0:
            return -1 if g < 0 else 1
        return np.where(g < 0, -1, 1)

    def weight_vector(self):
        """Primal normal ``w = sum_i a_i y_i x_i`` (linear kernel only)."""
        if self.kernel.kind != LINEAR:
            raise InvalidArgumentError("explicit weights exist only for the linear kernel")
        return self.dual_coef @ self.train_data.features

    def error_rate(self, data):
        return float(np.mean(self.classify(data.features) != data.labels))

    def to_dict(self):
        keep = self.alphas > self.kkt_tolerance
        return {
            "alphas": self.alphas[keep].tolist(),
            "bias": self.bias,
            "kernel": self.kernel.to_dict(),
            "c_param": self.c_param,
            "support_points": self.train_data.features[keep].tolist(),
            "support_labels": self.train_data.labels[keep].tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        data = LabeledDataset(np.asarray(d["support_points"], dtype=float),
                              np.asarray(d["support_labels"]))
        return cls(np.asarray(d["alphas"], dtype=float), d["bias"], data,
                   KernelSpec.from_dict(d["kernel"]), float(d["c_param"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def label_gram(K, y):
    return K * np.outer(y, y)


def _select_pair(alphas, G, y, C):
    yG = -y * G
    up = np.where(y > 0, alphas < C, alphas > 0)
    low = np.where(y > 0, alphas > 0, alphas < C)
    cand_up = np.where(up, yG, -np.inf)
    cand_low = np.where(low, yG, np.inf)
    i = int(np.argmax(cand_up))
    j = int(np.argmin(cand_low))
    return i, j, cand_up[i] - cand_low[j]


def max_violation(alphas, G, y, C):
    """Maximal KKT violation ``m(a) - M(a)``; zero or negative at the optimum."""
    return _select_pair(alphas, G, y, C)[2]


@njit(cache=True)
def _smo_loop(Q, y, C, a, G, tol, max_iter):
    n = Q.shape[0]
    it = 0
    while True:
        # i: maximal violator in I_up
        i = -1
        gmax = -np.inf
        for t in range(n):
            if (a[t] < C) if y[t] > 0 else (a[t] > 0):
                v = -y[t] * G[t]
                if v > gmax:
                    gmax = v
                    i = t
        # j: second-order gain among violating partners in I_low
        j = -1
        gmin = np.inf
        best = np.inf
        for t in range(n):
            if (a[t] > 0) if y[t] > 0 else (a[t] < C):
                v = -y[t] * G[t]
                if v < gmin:
                    gmin = v
                if i >= 0 and v < gmax:
                    b = gmax - v
                    eta = Q[i, i] + Q[t, t] - 2.0 * y[i] * y[t] * Q[i, t]
                    if eta <= 0.0:
                        eta = 1e-12
                    gain = -b * b / eta
                    if gain < best:
                        best = gain
                        j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap < tol:
            return it, gap
        if it >= max_iter:
            return -1, gap
        it += 1
        eta = Q[i, i] + Q[j, j] - 2.0 * y[i] * y[j] * Q[i, j]
        if eta <= 0.0:
            eta = 1e-12
        step = (gmax + y[j] * G[j]) / eta
        # bounds from a_i + y_i * step and a_j - y_j * step staying in [0, C]
        lim_i = C - a[i] if y[i] > 0 else a[i]
        lim_j = a[j] if y[j] > 0 else C - a[j]
        hit_i = step >= lim_i
        hit_j = step >= lim_j
        step = min(step, lim_i, lim_j)
        ai = a[i] + y[i] * step
        aj = a[j] - y[j] * step
        # snap to the exact bound so that set membership is unambiguous
        if hit_i and step == lim_i:
            ai = C if y[i] > 0 else 0.0
        if hit_j and step == lim_j:
            aj = 0.0 if y[j] > 0 else C
        di = ai - a[i]
        dj = aj - a[j]
        a[i] = ai
        a[j] = aj
        for t in range(n):
            G[t] += Q[t, i] * di + Q[t, j] * dj


def solve_dual(Q, y, C, alpha0=None, tol=SOLVER_TOL, max_iter=MAX_PAIR_UPDATES):
    """SMO on the label-annotated kernel matrix ``Q``.

    The first index of each pair is the maximal KKT violator; the second is
    chosen by second-order gain among its violating partners (Fan, Chen and
    Lin, 2005).  Stops when the maximal violation drops below ``tol``.

    Returns ``(alphas, G, n_iter)`` where ``G = Q a - 1`` is the dual gradient.
    """
    n = Q.shape[0]
    y = np.asarray(y, dtype=float)
    Q = np.ascontiguousarray(Q, dtype=float)
    if alpha0 is None:
        a = np.zeros(n)
        G = -np.ones(n)
    else:
        a = np.clip(np.array(alpha0, dtype=float), 0.0, C)
        G = Q @ a - 1.0
    it, gap = _smo_loop(Q, y, float(C), a, G, float(tol), int(max_iter))
    if it < 0:
        raise ConvergenceError(
            f"SMO did not converge in {max_iter} pair updates", residual=gap)
    return a, G, it


def solve_bias(alphas, G, y, C, tol=ALPHA_TOL):
    """Average ``y_i - f(x_i)`` over margin vectors; midpoint of the feasible
    interval when there are none."""
    sets = partition(alphas, C, tol)
    # y_i - f(x_i) equals -y_i G_i because G_i = y_i f(x_i) - 1
    if sets.S.size:
        return float(np.mean(-y[sets.S] * G[sets.S]))
    yG = -y * G
    lower_mask = np.zeros(len(y), bool)
    upper_mask = np.zeros(len(y), bool)
    lower_mask[sets.R] = y[sets.R] > 0
    lower_mask[sets.E] = y[sets.E] < 0
    upper_mask[sets.R] = y[sets.R] < 0
    upper_mask[sets.E] = y[sets.E] > 0
    lo = yG[lower_mask].max() if lower_mask.any() else -np.inf
    hi = yG[upper_mask].min() if upper_mask.any() else np.inf
    if np.isfinite(lo) and np.isfinite(hi):
        return float(0.5 * (lo + hi))
    if np.isfinite(lo):
        return float(lo)
    if np.isfinite(hi):
        return float(hi)
    return 0.0


def _polish(Q, y, C, alphas, tol=ALPHA_TOL):
    """Solve the KKT equalities on the current margin set exactly.

    Keeps error vectors at C and reserve vectors at 0 and solves
    ``Q_ss a_s + y_s b = 1 - Q_se C``, ``y_s' a_s = -C sum(y_e)``.
    Returns ``None`` when the system is singular or the result leaves the box.
    """
    S, E, _ = partition(alphas, C, tol)
    if S.size == 0:
        return None
    rhs = np.empty(S.size + 1)
    rhs[:-1] = 1.0 - C * Q[np.ix_(S, E)].sum(1)
    rhs[-1] = -C * y[E].sum()
    A = np.zeros((S.size + 1, S.size + 1))
    A[:-1, :-1] = Q[np.ix_(S, S)]
    A[:-1, -1] = y[S]
    A[-1, :-1] = y[S]
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    a_s = sol[:-1]
    if np.any(a_s <= 0) or np.any(a_s >= C):
        return None
    out = alphas.copy()
    out[S] = a_s
    return out


def _fit(data, c_param, kernel, K, alpha0, tol, max_iter):
    y = data.labels.astype(float)
    Q = label_gram(K, y)
    a, G, it = solve_dual(Q, y, c_param, alpha0=alpha0, tol=tol, max_iter=max_iter)
    polished = _polish(Q, y, c_param, a)
    if polished is not None:
        G_p = Q @ polished - 1.0
        if max_violation(polished, G_p, y, c_param) <= max(max_violation(a, G, y, c_param), tol):
            a, G = polished, G_p
    b = solve_bias(a, G, y, c_param)
    return SvmModel(a, b, data, kernel, float(c_param), n_iter=it, _gram=K)


def _check_train_args(data, c_param):
    if not c_param > 0:
        raise InvalidArgumentError("C must be positive")
    neg, pos = data.class_counts()
    if neg == 0 or pos == 0:
        raise UnsupportedInputError("training data must contain both classes")


def train_svm(data, c_param, kernel=None, tol=SOLVER_TOL, max_iter=MAX_PAIR_UPDATES):
    """Train a soft-margin SVM on ``data`` by solving the dual QP."""
    kernel = kernel or KernelSpec.linear()
    _check_train_args(data, c_param)
    K = kernel_matrix(kernel, data.features, data.features)
    return _fit(data, c_param, kernel, K, None, tol, max_iter)


def retrain_with_point(model, x_new, y_new, tol=SOLVER_TOL, max_iter=MAX_PAIR_UPDATES):
    """Train on ``model.train_data`` plus one point, warm-started from ``model``.

    Previous dual values are reused as the initial feasible point and the new
    point starts at zero.  The cached kernel matrix is extended by one row.
    """
    data = model.train_data.with_point(x_new, y_new)
    _check_train_args(data, model.c_param)
    x_new = data.features[-1]
    K_old = model.gram()
    row = kernel_matrix(model.kernel, x_new[None, :], data.features)[0]
    n = data.n
    K = np.empty((n, n))
    K[:-1, :-1] = K_old
    K[-1, :] = row
    K[:, -1] = row
    alpha0 = np.append(model.alphas, 0.0)
    return _fit(data, model.c_param, model.kernel, K, alpha0, tol, max_iter)


def retrain_moved_point(model, index, x_new, tol=SOLVER_TOL, max_iter=MAX_PAIR_UPDATES):
    """Retrain after moving training point ``index`` to ``x_new``, keeping its
    label.  Warm-started from ``model``'s dual values, which stay feasible."""
    data = model.train_data
    x_new = np.asarray(x_new, dtype=float)
    if x_new.shape != (data.d,):
        raise InvalidArgumentError(f"point has shape {x_new.shape}, dataset has {data.d} features")
    F = data.features.copy()
    F[index] = x_new
    moved = LabeledDataset(F, data.labels)
    K = model.gram().copy()
    row = kernel_matrix(model.kernel, x_new[None, :], F)[0]
    K[index, :] = row
    K[:, index] = row
    return _fit(moved, model.c_param, model.kernel, K, np.array(model.alphas), tol, max_iter)


def kkt_sets(model):
    return model.sets


def decision_function(model, x):
    return model.decision_function(x)


def classify(model, x):
    return model.classify(x)


def train_linear_unbiased(data, c_param, tol=1e-10, max_epochs=100_000):
    """Linear SVM without a bias term, by dual coordinate descent.

    Solves ``min_a 1/2 a'Qa - 1'a`` subject only to ``0 <= a_i <= C`` and
    returns the primal weight vector ``w = sum_i a_i y_i x_i``.  Used with
    features that already carry a constant coordinate.
    """
    if not c_param > 0:
        raise InvalidArgumentError("C must be positive")
    X = data.features
    y = data.labels.astype(float)
    qd = (X * X).sum(1)
    a = np.zeros(data.n)
    w = np.zeros(data.d)
    for _ in range(max_epochs):
        worst = 0.0
        for i in range(data.n):
            if qd[i] == 0.0:
                continue
            g = y[i] * (w @ X[i]) - 1.0
            # projected gradient
            pg = min(g, 0.0) if a[i] <= 0.0 else (max(g, 0.0) if a[i] >= c_param else g)
            worst = max(worst, abs(pg))
            if pg != 0.0:
                new = min(max(a[i] - g / qd[i], 0.0), c_param)
                w += (new - a[i]) * y[i] * X[i]
                a[i] = new
        if worst < tol:
            return w
    raise ConvergenceError("coordinate descent did not converge", residual=worst)
