"""Evaluation protocol: surrogate training, FN rate at a fixed FP rate,
evasion curves over the distance budget and poisoning curves over the
contamination fraction."""

import csv
import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateStructureError, InvalidArgumentError, UnsupportedInputError
from .evasion import evade, evade_discrete, with_budget
from .kernels import KernelSpec
from .poisoning import poison_multi
from .svm import LabeledDataset, train_svm


class Knowledge(str, enum.Enum):
    PERFECT = "perfect"
    LIMITED = "limited"


@dataclass(frozen=True)
class ScenarioSpec:
    knowledge: Knowledge = Knowledge.PERFECT
    n_query: int = 100
    relabel_with_target: bool = True
    surrogate_c: float = 100.0
    surrogate_kernel: KernelSpec = field(default_factory=lambda: KernelSpec.rbf(0.1))

    def __post_init__(self):
        object.__setattr__(self, "knowledge", Knowledge(self.knowledge))
        if self.knowledge == Knowledge.LIMITED and self.n_query < 1:
            raise InvalidArgumentError("n_query must be >= 1 for limited knowledge")
        if not self.surrogate_c > 0:
            raise InvalidArgumentError("surrogate_c must be > 0")


def train_surrogate(target, pool, spec, seed):
    """Train the attacker's model on ``n_query`` points drawn from ``pool``.

    Labels come from the target's predictions when ``relabel_with_target``,
    otherwise from the pool's own labels.
    """
    if pool.n < spec.n_query:
        raise InvalidArgumentError(f"pool has {pool.n} points, n_query is {spec.n_query}")
    rng = np.random.default_rng(seed)
    idx = rng.permutation(pool.n)[:spec.n_query]
    X = pool.features[idx]
    y = target.classify(X) if spec.relabel_with_target else pool.labels[idx]
    return train_svm(LabeledDataset(X, y), spec.surrogate_c, spec.surrogate_kernel)


def attack_model_for(target, pool, spec, seed):
    """The target itself under perfect knowledge, else a fresh surrogate."""
    if spec.knowledge == Knowledge.PERFECT:
        return target
    return train_surrogate(target, pool, spec, seed)


def fp_threshold(neg_scores, fp_target):
    """Smallest threshold ``t`` with ``mean(neg_scores > t) <= fp_target``.

    A sample is flagged positive when its score exceeds ``t``.
    """
    if not 0 <= fp_target <= 1:
        raise InvalidArgumentError("fp_target must lie in [0, 1]")
    s = np.sort(np.asarray(neg_scores, dtype=float))[::-1]
    allowed = int(np.floor(fp_target * s.size + 1e-9))
    if allowed >= s.size:
        return -np.inf
    return float(s[allowed])


def fn_at_fp(model, test, fp_target=0.005):
    """Threshold at the requested FP rate and the resulting FN rate."""
    neg, pos = test.labels == -1, test.labels == 1
    if not neg.any() or not pos.any():
        raise UnsupportedInputError("fn_at_fp needs both classes in the test set")
    scores = model.decision_function(test.features)
    theta = fp_threshold(scores[neg], fp_target)
    return theta, float(np.mean(scores[pos] <= theta))


@dataclass
class CurveTable:
    """Rows of a result curve; ``failures`` counts attacks or runs that raised."""
    columns: list
    rows: list
    failures: int = 0

    def column(self, name):
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows], dtype=float)

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([v if isinstance(v, int) else repr(float(v)) for v in r])


@dataclass(frozen=True)
class EvasionRun:
    """One repetition: the target, the model the attacker differentiates, the
    labelled test set, and the attacker's legitimate samples for the KDE."""
    target: object
    attack_model: object
    test: LabeledDataset
    negatives: np.ndarray


def _prefix_sweep(config, discrete):
    # increment-only unit steps grow the distance by exactly one per move,
    # so the trajectory under a budget is a prefix of the unlimited one
    return discrete and config.monotone_increments and config.distance_norm == "l1"


def evasion_fn_rates(run, d_max_grid, config, fp_target=0.005, discrete=False):
    """FN rate of the target for each budget in ``d_max_grid``.

    Every malicious test point is attacked through ``run.attack_model``; the
    resulting point counts as a false negative when the TARGET scores it at
    or below the FP-calibrated threshold.  Attack failures count as
    non-evasions.
    """
    return _fn_rates(run, d_max_grid, config, fp_target, discrete)[0]


def _fn_rates(run, d_max_grid, config, fp_target, discrete):
    failures = 0
    theta, _ = fn_at_fp(run.target, run.test, fp_target)
    grid = [float(d) for d in d_max_grid]
    mal = run.test.features[run.test.labels == 1]
    evaded = np.zeros((len(grid), mal.shape[0]), dtype=bool)
    attack = evade_discrete if discrete else evade
    for i, x0 in enumerate(mal):
        if _prefix_sweep(config, discrete):
            try:
                tr = attack(run.attack_model, run.negatives, x0, with_budget(config, max(grid)))
            except (ArithmeticError, DegenerateStructureError, InvalidArgumentError):
                failures += 1
                evaded[:, i] = run.target.decision_function(x0) <= theta
                continue
            values = np.asarray(tr.objective_values)
            for j, d in enumerate(grid):
                steps = min(int(np.floor(d / config.step + 1e-9)), len(values) - 1)
                best = int(np.argmin(values[:steps + 1]))
                evaded[j, i] = run.target.decision_function(tr.iterates[best]) <= theta
            continue
        for j, d in enumerate(grid):
            try:
                tr = attack(run.attack_model, run.negatives, x0, with_budget(config, d))
                x = tr.best_point
            except (ArithmeticError, DegenerateStructureError, InvalidArgumentError):
                failures += 1
                x = x0
            evaded[j, i] = run.target.decision_function(x) <= theta
    return evaded.mean(1), failures


def evasion_curve(runs, d_max_grid, config, fp_target=0.005, discrete=False):
    """Mean and standard deviation of the FN rate across repetitions.

    Columns: ``d_max, mean_fn, std_fn, n_runs``; ``failures`` counts the
    individual attacks that raised.
    """
    if isinstance(runs, EvasionRun):
        runs = [runs]
    results = [_fn_rates(r, d_max_grid, config, fp_target, discrete) for r in runs]
    rates = np.array([r for r, _ in results])
    rows = [(float(d), float(rates[:, j].mean()), float(rates[:, j].std()), len(runs))
            for j, d in enumerate(d_max_grid)]
    return CurveTable(["d_max", "mean_fn", "std_fn", "n_runs"], rows, sum(f for _, f in results))


def n_attack_points(fraction, n_train):
    """Attack points needed for ``fraction`` of the original training size."""
    return int(round(fraction * n_train))


def poisoning_curve(tasks, fractions, runs, config, kernel=None, c_param=1.0):
    """Validation and test error against the contamination fraction.

    ``tasks`` is one ``(train, val, test)`` triple or a list of them; run
    ``r`` uses task ``r % len(tasks)`` and seed ``config.seed + r``.  Each
    run greedily injects optimized points up to the largest fraction and
    reads every smaller fraction off the same sequence.  Runs that hit a
    degenerate margin structure are skipped and counted.

    Returns ``(table, n_failed)`` with columns ``fraction, mean_val_err,
    std_val_err, mean_test_err, std_test_err, n_runs``.
    """
    if isinstance(tasks, tuple):
        tasks = [tasks]
    fractions = [float(f) for f in fractions]
    if any(not 0 <= f <= 0.5 for f in fractions):
        raise InvalidArgumentError("fractions must lie in [0, 0.5]")
    val_errs, test_errs, failed = [], [], 0
    for r in range(runs):
        train, val, test = tasks[r % len(tasks)]
        counts = [n_attack_points(f, train.n) for f in fractions]
        try:
            res = poison_multi(train, val, replace(config, seed=config.seed + r), max(counts),
                               kernel, c_param, test)
        except DegenerateStructureError:
            failed += 1
            continue
        val_errs.append([res.validation_errors[k] for k in counts])
        test_errs.append([res.test_errors[k] for k in counts])
    V, T = np.array(val_errs).reshape(-1, len(fractions)), np.array(test_errs).reshape(-1, len(fractions))
    rows = []
    for j, f in enumerate(fractions):
        if V.shape[0]:
            rows.append((f, float(V[:, j].mean()), float(V[:, j].std()),
                         float(T[:, j].mean()), float(T[:, j].std()), V.shape[0]))
        else:
            rows.append((f, float("nan"), float("nan"), float("nan"), float("nan"), 0))
    cols = ["fraction", "mean_val_err", "std_val_err", "mean_test_err", "std_test_err", "n_runs"]
    return CurveTable(cols, rows, failed), failed
