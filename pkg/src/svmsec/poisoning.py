"""Gradient-ascent poisoning: craft one training point that maximizes the
validation hinge loss of the retrained SVM.

The gradient follows from keeping the KKT conditions of the margin vectors
satisfied while the attack point moves.  Differentiating

    Q_ss da_s + y_s db = -dQ_sc a_c,    y_s' da_s = 0

gives the change of the dual values and bias, and hence of every validation
margin g_k = y_k g(x_k) - 1.  The loss is P = sum_k max(0, -g_k), so its
gradient is minus the sum of dg_k over the active (margin-violating)
validation points.  The bordered system is solved directly instead of
forming an explicit inverse of Q_ss, which is singular whenever there are
more margin vectors than the feature space can pin down (linear kernel).
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateStructureError, InvalidArgumentError
from .kernels import kernel_grad_rows, kernel_matrix
from .svm import retrain_moved_point, train_svm
from .trace import AttackTrace, Termination

RIDGE = 1e-10
SET_WIDENING = 10.0


@dataclass(frozen=True)
class PoisonConfig:
    attack_label: int
    step: float = 0.05
    box_lower: object = -np.inf
    box_upper: object = np.inf
    stop_epsilon: float = 1e-6
    max_iters: int = 500
    restarts: int = 0
    ridge: float = RIDGE
    seed: int = 0

    def __post_init__(self):
        if self.attack_label not in (-1, 1):
            raise InvalidArgumentError("attack_label must be -1 or +1")
        if not self.step > 0:
            raise InvalidArgumentError("step must be > 0")
        if np.any(np.asarray(self.box_lower) > np.asarray(self.box_upper)):
            raise InvalidArgumentError("box_lower must not exceed box_upper")
        if not self.stop_epsilon > 0:
            raise InvalidArgumentError("stop_epsilon must be > 0")
        if self.max_iters < 1 or self.restarts < 0:
            raise InvalidArgumentError("max_iters must be >= 1 and restarts >= 0")
        if self.ridge < 0:
            raise InvalidArgumentError("ridge must be >= 0")

    def clip(self, x):
        return np.clip(x, self.box_lower, self.box_upper)


def _check_val(model, val):
    if val.d != model.n_features:
        raise InvalidArgumentError(
            f"validation set has {val.d} features, model expects {model.n_features}")


def validation_margins(model, val):
    """``g_k = y_k g(x_k) - 1`` for every validation point."""
    _check_val(model, val)
    return val.labels * model.decision_function(val.features) - 1.0


def validation_loss(model, val):
    """Summed hinge loss ``sum_k max(0, 1 - y_k g(x_k))``."""
    return float(np.maximum(0.0, -validation_margins(model, val)).sum())


def _margin_set(model):
    S = model.sets.S
    if S.size:
        return S
    # every dual value is at a bound; fall back to points lying on the margin
    data = model.train_data
    gap = np.abs(data.labels * model.decision_function(data.features) - 1.0)
    return np.flatnonzero(gap <= SET_WIDENING * model.margin_tolerance)


def poison_gradient(model, val, x_c, y_star, index=-1, ridge=RIDGE):
    """Gradient of :func:`validation_loss` with respect to the attack point.

    ``model`` must be trained on data whose point ``index`` is
    ``(x_c, y_star)``.  The attack point may be an error vector (its dual value
    fixed at C) or a margin vector (its dual value moves with the others).
    Returns zeros when no validation point violates its margin or when the
    attack point is a reserve vector.
    """
    data = model.train_data
    c = index % data.n
    x_c = np.asarray(x_c, dtype=float)
    if x_c.shape != (data.d,) or not np.array_equal(data.features[c], x_c) or data.labels[c] != y_star:
        raise InvalidArgumentError("model was not trained with (x_c, y_star) at the given index")
    g_val = validation_margins(model, val)
    active = g_val < 0
    a = model.alphas
    if not active.any() or a[c] <= model.kkt_tolerance:
        return np.zeros(data.d)

    S = _margin_set(model)
    if S.size == 0:
        raise DegenerateStructureError(
            "no margin support vectors; restart the attack from a different initial point")
    X, y = data.features, data.labels.astype(float)
    kern = model.kernel
    a_c, y_c = a[c], float(y_star)
    grad_tr = kernel_grad_rows(kern, x_c, X)

    # right-hand side: derivative of each margin condition at fixed dual values
    v = (y[S] * y_c * a_c)[:, None] * grad_tr[S]
    pos = np.flatnonzero(S == c)
    if pos.size:
        others = np.arange(data.n) != c
        v[pos[0]] = y_c * ((y[others] * a[others]) @ grad_tr[others]) + 2.0 * a_c * grad_tr[c]

    m = S.size
    A = np.zeros((m + 1, m + 1))
    A[:m, :m] = y[S][:, None] * y[S][None, :] * model.gram()[np.ix_(S, S)] + ridge * np.eye(m)
    A[:m, m] = y[S]
    A[m, :m] = y[S]
    rhs = np.vstack([-v, np.zeros((1, data.d))])
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateStructureError(f"margin system is singular even with ridge {ridge}") from exc
    if not np.all(np.isfinite(sol)):
        raise DegenerateStructureError("margin system produced non-finite derivatives")
    d_alpha, d_b = sol[:m], sol[m]

    Xk, yk = val.features[active], val.labels[active].astype(float)
    K_ks = kernel_matrix(kern, Xk, X[S])
    grad_val = kernel_grad_rows(kern, x_c, Xk)
    dg = yk[:, None] * ((K_ks * y[S]) @ d_alpha + d_b[None, :] + y_c * a_c * grad_val)
    return -dg.sum(0)


def initial_candidates(model, train, attack_label):
    """Attacked-class indices of ``train`` ordered from deepest inside their
    own class (largest ``-y* g``) to shallowest."""
    idx = np.flatnonzero(train.labels == -attack_label)
    if idx.size == 0:
        raise InvalidArgumentError("training set has no point of the attacked class")
    depth = -attack_label * model.decision_function(train.features[idx])
    return idx[np.argsort(-depth, kind="stable")]


def _error(model, data):
    return float(model.error_rate(data)) if data is not None else float("nan")


def _single_run(base_model, val, x0, config, test):
    x = config.clip(np.asarray(x0, dtype=float))
    y_star = config.attack_label
    model = train_svm(base_model.train_data.with_point(x, y_star), base_model.c_param, base_model.kernel)
    P = validation_loss(model, val)
    iterates, values = [x.copy()], [P]
    val_err, test_err = [_error(model, val)], [_error(model, test)]
    termination = Termination.MAX_ITERS

    def partial():
        return AttackTrace(iterates, values, int(np.argmax(values)), Termination.STALLED,
                           {"validation_error": val_err, "test_error": test_err})

    for _ in range(config.max_iters):
        try:
            grad = poison_gradient(model, val, x, y_star, ridge=config.ridge)
        except DegenerateStructureError as exc:
            exc.trace = partial()
            raise
        norm = np.linalg.norm(grad)
        if norm == 0:
            # flat loss (no active validation point) or a reserve attack point
            reserve = model.alphas[-1] <= model.kkt_tolerance
            termination = Termination.STALLED if reserve else Termination.CONVERGED
            break
        x_new = config.clip(x + config.step * grad / norm)
        model_new = retrain_moved_point(model, -1, x_new)
        P_new = validation_loss(model_new, val)
        iterates.append(x_new)
        values.append(P_new)
        val_err.append(_error(model_new, val))
        test_err.append(_error(model_new, test))
        if P_new - P < config.stop_epsilon:
            termination = Termination.CONVERGED
            break
        x, P, model = x_new, P_new, model_new
    return AttackTrace(iterates, values, int(np.argmax(values)), termination,
                       {"validation_error": val_err, "test_error": test_err})


def poison(train, val, config, kernel=None, c_param=1.0, test=None, x0=None):
    """Single-point poisoning attack; returns the trace with maximal loss.

    The first run starts from the attacked-class point lying deepest inside
    its own class, cloned with label ``attack_label``.  Each of the
    ``restarts`` further runs starts from a point drawn uniformly from the
    deepest quarter of the attacked class.  Pass ``x0`` to fix the first
    start.  A run that hits a degenerate margin structure contributes its
    partial trace; the error is raised only when every run fails.
    ``test`` (optional) adds a per-iterate test-error column.
    """
    _check_val_dims(train, val)
    base = train_svm(train, c_param, kernel)
    order = initial_candidates(base, train, config.attack_label)
    rng = np.random.default_rng(config.seed)
    top = order[:max(1, int(np.ceil(order.size / 4)))]
    starts = [train.features[order[0]] if x0 is None else np.asarray(x0, dtype=float)]
    starts += [train.features[rng.choice(top)] for _ in range(config.restarts)]

    best, failures = None, []
    for start in starts:
        try:
            tr = _single_run(base, val, start, config, test)
        except DegenerateStructureError as exc:
            failures.append(exc)
            tr = exc.trace
        if best is None or tr.best_value > best.best_value:
            best = tr
    if len(failures) == len(starts):
        raise failures[-1]
    return best


def _check_val_dims(train, val):
    if train.d != val.d:
        raise InvalidArgumentError(f"train has {train.d} features, validation has {val.d}")


@dataclass
class MultiPoisonResult:
    points: np.ndarray
    labels: np.ndarray
    traces: list
    validation_errors: list
    test_errors: list


def poison_multi(train, val, config, n_points, kernel=None, c_param=1.0, test=None):
    """Greedy sequential attack: each new point is optimized against the SVM
    trained on ``train`` plus every previously injected point.

    ``validation_errors[j]`` is the error after injecting ``j`` points
    (index 0 is the clean model).
    """
    current = train
    base = train_svm(current, c_param, kernel)
    points, traces = [], []
    val_errs, test_errs = [_error(base, val)], [_error(base, test)]
    for j in range(n_points):
        cfg = replace(config, seed=config.seed + 7919 * j)
        tr = poison(current, val, cfg, kernel, c_param)
        x = tr.best_point
        points.append(x)
        traces.append(tr)
        current = current.with_point(x, config.attack_label)
        model = train_svm(current, c_param, kernel)
        val_errs.append(_error(model, val))
        test_errs.append(_error(model, test))
    pts = np.array(points).reshape(n_points, train.d)
    return MultiPoisonResult(pts, np.full(n_points, config.attack_label), traces, val_errs, test_errs)


def random_label_flips(train, attack_label, n_points, seed):
    """Baseline: clone ``n_points`` random attacked-class points with their
    labels flipped to ``attack_label``."""
    idx = np.flatnonzero(train.labels == -attack_label)
    if idx.size == 0:
        raise InvalidArgumentError("training set has no point of the attacked class")
    rng = np.random.default_rng(seed)
    pick = rng.choice(idx, size=n_points, replace=n_points > idx.size)
    out = train
    for i in pick:
        out = out.with_point(train.features[i], attack_label)
    return out


def label_flip_error(train, val, attack_label, n_points, seed, kernel=None, c_param=1.0):
    """Validation error after the random label-flip baseline."""
    model = train_svm(random_label_flips(train, attack_label, n_points, seed), c_param, kernel)
    return _error(model, val)
