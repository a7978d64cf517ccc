"""Gradient-descent evasion with a kernel-density mimicry term.

The attacker minimizes

    E(x) = g(x) - lam * p_hat(x),    p_hat(x) = 1/n sum_i exp(-d(x, x_i) / h)

over points within distance ``d_max`` of the starting sample, where the x_i
are legitimate (label -1) samples.  ``g`` can be the target's discriminant
(perfect knowledge) or a surrogate's (limited knowledge); any object with
``decision_function(x)`` and ``decision_gradient(x)`` works.

For the L2 norm the KDE uses the squared distance (a Gaussian kernel); for
L1 it uses the Manhattan distance (a Laplacian kernel).
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError
from .trace import AttackTrace, Termination, distance

L1 = "l1"
L2 = "l2"


@dataclass(frozen=True)
class EvasionConfig:
    lam: float = 0.0
    bandwidth: float = 10.0
    d_max: float = 5000 / 255
    step: float = 10 / 255
    distance_norm: str = L1
    box_lower: object = 0.0
    box_upper: object = 1.0
    monotone_increments: bool = False
    stop_epsilon: float = 1e-9
    max_iters: int = 1000
    kde_neighbors: int = 50

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidArgumentError("lam must be >= 0")
        if not self.bandwidth > 0:
            raise InvalidArgumentError("bandwidth must be > 0")
        if not self.d_max >= 0:
            raise InvalidArgumentError("d_max must be >= 0")
        if not self.step > 0:
            raise InvalidArgumentError("step must be > 0")
        if self.distance_norm not in (L1, L2):
            raise InvalidArgumentError(f"distance_norm must be 'l1' or 'l2', got {self.distance_norm!r}")
        if np.any(np.asarray(self.box_lower) > np.asarray(self.box_upper)):
            raise InvalidArgumentError("box_lower must not exceed box_upper")
        if not self.stop_epsilon > 0:
            raise InvalidArgumentError("stop_epsilon must be > 0")
        if self.max_iters < 1 or self.kde_neighbors < 1:
            raise InvalidArgumentError("max_iters and kde_neighbors must be >= 1")

    @classmethod
    def mnist(cls, **overrides):
        """Gray-level digit settings: L1 budget of 5000 gray levels, steps of 10."""
        base = dict(lam=0.0, bandwidth=10.0, d_max=5000 / 255, step=10 / 255, distance_norm=L1,
                    box_lower=0.0, box_upper=1.0, max_iters=1000, kde_neighbors=50)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def keyword_counts(cls, **overrides):
        """PDF keyword-count settings: increments only, counts capped at 100."""
        base = dict(lam=500.0, bandwidth=10.0, d_max=50, step=1.0, distance_norm=L1,
                    box_lower=0.0, box_upper=100.0, monotone_increments=True,
                    max_iters=1000, kde_neighbors=50)
        base.update(overrides)
        return cls(**base)

    def bounds(self, x0):
        """Per-feature box, tightened to ``x >= x0`` for increment-only attacks."""
        lo = np.broadcast_to(np.asarray(self.box_lower, dtype=float), x0.shape).copy()
        hi = np.broadcast_to(np.asarray(self.box_upper, dtype=float), x0.shape).copy()
        if self.monotone_increments:
            lo = np.maximum(lo, x0)
        return lo, hi


def _norm_distances(diff, norm):
    if norm == L1:
        return np.abs(diff).sum(1)
    return (diff * diff).sum(1)


def _neighbors(negatives, x, norm, k):
    negatives = np.asarray(negatives, dtype=float)
    if negatives.ndim != 2 or negatives.shape[0] == 0:
        raise InvalidArgumentError("need at least one legitimate sample for the KDE")
    if negatives.shape[1] != x.shape[0]:
        raise InvalidArgumentError("dimension mismatch between x and the KDE samples")
    diff = x[None, :] - negatives
    dist = _norm_distances(diff, norm)
    if k is not None and k < dist.size:
        keep = np.argpartition(dist, k - 1)[:k]
        return diff[keep], dist[keep]
    return diff, dist


def kde_value(negatives, x, h, norm=L1, neighbors=None):
    """Mean of ``exp(-d(x, x_i) / h)`` over the ``neighbors`` nearest samples."""
    x = np.asarray(x, dtype=float)
    _, dist = _neighbors(negatives, x, norm, neighbors)
    return float(np.mean(np.exp(-dist / h)))


def kde_grad(negatives, x, h, norm=L1, neighbors=None):
    """(Sub)gradient of :func:`kde_value` with respect to ``x``.

    L2: ``-2/(n h) sum exp(-|x - x_i|^2 / h) (x - x_i)``.
    L1: ``-1/(n h) sum exp(-|x - x_i|_1 / h) sign(x - x_i)``; ``sign(0) = 0``
    picks a valid subgradient at the kinks.
    """
    x = np.asarray(x, dtype=float)
    diff, dist = _neighbors(negatives, x, norm, neighbors)
    w = np.exp(-dist / h)
    n = dist.size
    if norm == L1:
        return -(w @ np.sign(diff)) / (n * h)
    return -2.0 * (w @ diff) / (n * h)


def evasion_objective(g_hat, negatives, x, config):
    """``E(x) = g(x) - lam * kde_value(x)``."""
    value = g_hat.decision_function(x)
    if config.lam:
        value -= config.lam * kde_value(negatives, x, config.bandwidth,
                                        config.distance_norm, config.kde_neighbors)
    return float(value)


def evasion_gradient(g_hat, negatives, x, config):
    grad = np.asarray(g_hat.decision_gradient(x), dtype=float)
    if config.lam:
        grad = grad - config.lam * kde_grad(negatives, x, config.bandwidth,
                                            config.distance_norm, config.kde_neighbors)
    return grad


def project_l1_box(x, x0, radius, lo, hi, iters=100):
    """Euclidean projection onto ``{|x - x0|_1 <= radius} & [lo, hi]``.

    Needs ``lo <= x0 <= hi``.  Soft-thresholding the offset by ``theta`` and
    clipping to the box solves the problem for the right ``theta``, which is
    found by bisection; the upper bracket is returned so the budget holds.
    """
    v = x - x0
    a, b = lo - x0, hi - x0
    z = np.clip(v, a, b)
    if np.abs(z).sum() <= radius:
        return x0 + z

    def shrunk(theta):
        return np.clip(np.sign(v) * np.maximum(np.abs(v) - theta, 0.0), a, b)

    low, high = 0.0, float(np.abs(v).max())
    for _ in range(iters):
        mid = 0.5 * (low + high)
        if np.abs(shrunk(mid)).sum() > radius:
            low = mid
        else:
            high = mid
    return x0 + shrunk(high)


def project_l2_box(x, x0, radius, lo, hi, iters=100):
    """Projection onto ``{|x - x0|_2 <= radius} & [lo, hi]`` by alternating
    (Dykstra) projections, capped at ``iters`` rounds.

    A final radial pull towards ``x0`` guarantees feasibility; it cannot leave
    the box because the box is convex and contains ``x0``.
    """
    def ball(z):
        r = np.linalg.norm(z - x0)
        return z if r <= radius else x0 + (z - x0) * (radius / r)

    z = x.copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(iters):
        yk = np.clip(z + p, lo, hi)
        p = z + p - yk
        z_new = ball(yk + q)
        q = yk + q - z_new
        if np.allclose(z_new, z, rtol=0, atol=1e-14):
            z = z_new
            break
        z = z_new
    z = np.clip(z, lo, hi)
    return ball(z)


def project_feasible(x, x0, config, lo=None, hi=None):
    if lo is None:
        lo, hi = config.bounds(x0)
    if config.distance_norm == L1:
        return project_l1_box(x, x0, config.d_max, lo, hi)
    return project_l2_box(x, x0, config.d_max, lo, hi)


def _unit(v, norm):
    n = np.abs(v).sum() if norm == L1 else np.linalg.norm(v)
    return v / n


def _best_min(values):
    return int(np.argmin(np.asarray(values)))


def evade(g_hat, negatives, x0, config):
    """Density-augmented gradient descent from ``x0``.

    Each step moves ``config.step`` along the unit descent direction (unit in
    the attack's distance norm), then projects onto the box intersected with
    the distance budget.  Stops when an iteration improves E by less than
    ``stop_epsilon``.  The returned trace marks the lowest-E iterate.
    """
    x0 = np.asarray(x0, dtype=float)
    lo, hi = config.bounds(x0)
    if np.any(x0 < lo - 1e-12) or np.any(x0 > hi + 1e-12):
        raise InvalidArgumentError("x0 lies outside the feature box")
    x = x0.copy()
    E = evasion_objective(g_hat, negatives, x, config)
    iterates, values = [x.copy()], [E]
    termination = Termination.MAX_ITERS
    for _ in range(config.max_iters):
        grad = evasion_gradient(g_hat, negatives, x, config)
        if not np.any(grad):
            termination = Termination.STALLED
            break
        x_new = project_feasible(x - config.step * _unit(grad, config.distance_norm), x0, config, lo, hi)
        E_new = evasion_objective(g_hat, negatives, x_new, config)
        iterates.append(x_new)
        values.append(E_new)
        if E - E_new < config.stop_epsilon:
            termination = Termination.CONVERGED
            break
        x, E = x_new, E_new
    return AttackTrace(iterates, values, _best_min(values), termination)


def unit_steps(x, x0, config):
    """Default neighbourhood: +-1 on a single feature (+1 only for
    increment-only attacks)."""
    d = x.shape[0]
    eye = np.eye(d)
    if config.monotone_increments:
        return eye
    return np.vstack([eye, -eye])


def evade_discrete(g_hat, negatives, x0, config, neighbor_rule=unit_steps):
    """Steepest feasible-neighbour descent in a discrete feature space.

    Candidate moves are ranked by how well their direction aligns with
    ``-grad E``; the best-aligned feasible move that strictly lowers E is
    taken.  Moves whose first-order change is not a decrease are never tried.
    Stops (Converged) when no candidate improves.
    """
    x0 = np.asarray(x0, dtype=float)
    lo, hi = config.bounds(x0)
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise InvalidArgumentError("x0 lies outside the feature box")
    x = x0.copy()
    E = evasion_objective(g_hat, negatives, x, config)
    iterates, values = [x.copy()], [E]
    termination = Termination.MAX_ITERS
    for _ in range(config.max_iters):
        grad = evasion_gradient(g_hat, negatives, x, config)
        moves = neighbor_rule(x, x0, config)
        align = -(moves @ grad) / np.linalg.norm(moves, axis=1)
        moved = False
        for m in np.argsort(-align, kind="stable"):
            if align[m] <= 0:
                break
            z = x + moves[m]
            if np.any(z < lo) or np.any(z > hi):
                continue
            if distance(z - x0, config.distance_norm) > config.d_max + 1e-9:
                continue
            E_z = evasion_objective(g_hat, negatives, z, config)
            if E_z < E:
                x, E = z, E_z
                moved = True
                break
        if not moved:
            termination = Termination.CONVERGED
            break
        iterates.append(x.copy())
        values.append(E)
    return AttackTrace(iterates, values, _best_min(values), termination)


def with_budget(config, d_max):
    return replace(config, d_max=d_max)
