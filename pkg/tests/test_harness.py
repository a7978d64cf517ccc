import numpy as np
import pytest

from svmsec.data import SplitSpec, gen_gaussian_2d, gen_keyword_counts, split
from svmsec.errors import InvalidArgumentError, UnsupportedInputError
from svmsec.evasion import EvasionConfig, evade_discrete, with_budget
from svmsec.harness import (CurveTable, EvasionRun, Knowledge, ScenarioSpec, attack_model_for,
                            evasion_curve, evasion_fn_rates, fn_at_fp, fp_threshold, n_attack_points,
                            poisoning_curve, train_surrogate)
from svmsec.kernels import KernelSpec
from svmsec.poisoning import PoisonConfig
from svmsec.svm import LabeledDataset, train_svm


class Scores:
    """Stand-in model whose decision values are the first feature."""

    def decision_function(self, X):
        X = np.atleast_2d(X)
        return X[:, 0]


def sweep_oracle(neg, pos, fp_target):
    """Try every candidate threshold and keep the smallest admissible one."""
    candidates = sorted(set(neg.tolist()) | {-np.inf, np.inf})
    for t in candidates:
        if np.mean(neg > t) <= fp_target:
            return t, float(np.mean(pos <= t))


@pytest.mark.parametrize("fp", [0.0, 0.005, 0.01, 0.1, 0.37, 1.0])
def test_fn_at_fp_matches_sweep(rng, fp):
    for _ in range(20):
        neg = np.round(rng.normal(-1, 1, 200), 1)  # ties on purpose
        pos = np.round(rng.normal(1, 1, 150), 1)
        test = LabeledDataset(np.concatenate([neg, pos])[:, None], np.repeat([-1, 1], [200, 150]))
        theta, fn = fn_at_fp(Scores(), test, fp)
        ref_theta, ref_fn = sweep_oracle(neg, pos, fp)
        assert theta == ref_theta
        assert fn == ref_fn
        assert np.mean(neg > theta) <= fp


def test_fn_at_fp_limits():
    test = LabeledDataset([[-2.0], [-1.0], [0.5], [3.0]], [-1, -1, 1, 1])
    assert fn_at_fp(Scores(), test, 1.0) == (-np.inf, 0.0)
    assert fn_at_fp(Scores(), test, 0.0) == (-1.0, 0.0)
    assert fp_threshold([1.0, 2.0, 3.0, 4.0], 0.25) == 3.0
    with pytest.raises(UnsupportedInputError):
        fn_at_fp(Scores(), LabeledDataset([[0.0]], [1]), 0.1)
    with pytest.raises(InvalidArgumentError):
        fp_threshold([0.0], 1.5)


def test_surrogate_relabels_with_target():
    pool = gen_gaussian_2d(100, seed=0)
    target = train_svm(pool, 1.0, KernelSpec.linear())
    spec = ScenarioSpec(Knowledge.LIMITED, n_query=50)
    sur = train_surrogate(target, pool, spec, seed=3)
    np.testing.assert_array_equal(sur.train_data.labels, target.classify(sur.train_data.features))
    assert sur.train_data.n == 50
    assert sur.c_param == 100.0 and sur.kernel == KernelSpec.rbf(0.1)
    own = train_surrogate(target, pool, ScenarioSpec(Knowledge.LIMITED, 50, relabel_with_target=False), 3)
    pool_rows = {tuple(r): l for r, l in zip(pool.features, pool.labels)}
    assert all(pool_rows[tuple(r)] == l for r, l in zip(own.train_data.features, own.train_data.labels))
    assert attack_model_for(target, pool, ScenarioSpec(), 0) is target
    with pytest.raises(InvalidArgumentError):
        train_surrogate(target, pool, ScenarioSpec(Knowledge.LIMITED, n_query=500), 0)


def test_surrogate_agrees_with_target():
    pool = gen_gaussian_2d(200, seed=1)
    target = train_svm(pool, 1.0, KernelSpec.linear())
    sur = train_surrogate(target, pool, ScenarioSpec(Knowledge.LIMITED, n_query=100), seed=0)
    probe = gen_gaussian_2d(500, seed=2).features
    assert np.mean(sur.classify(probe) == target.classify(probe)) >= 0.9


@pytest.fixture(scope="module")
def keyword_run():
    data = gen_keyword_counts(60, seed=4)
    train, _, test = split(data, SplitSpec(30, 0, "remainder", seed=0))
    model = train_svm(train, 1.0)
    return EvasionRun(model, model, test, train.features[train.labels == -1])


def test_curve_zero_budget_is_baseline(keyword_run):
    cfg = EvasionConfig.keyword_counts(lam=0.0)
    table = evasion_curve([keyword_run], [0, 1, 3, 6, 10], cfg, discrete=True)
    fn = table.column("mean_fn")
    assert fn[0] == fn_at_fp(keyword_run.target, keyword_run.test)[1]
    assert np.all(np.diff(fn) >= 0)
    assert table.columns == ["d_max", "mean_fn", "std_fn", "n_runs"]
    assert table.column("n_runs")[0] == 1


def test_prefix_sweep_equals_separate_runs(keyword_run):
    cfg = EvasionConfig.keyword_counts(lam=0.0)
    grid = [0, 2, 5, 9]
    fast = evasion_fn_rates(keyword_run, grid, cfg, discrete=True)
    theta, _ = fn_at_fp(keyword_run.target, keyword_run.test)
    mal = keyword_run.test.features[keyword_run.test.labels == 1]
    slow = []
    for d in grid:
        x = [evade_discrete(keyword_run.attack_model, keyword_run.negatives, x0, with_budget(cfg, d)).best_point
             for x0 in mal]
        slow.append(np.mean(keyword_run.target.decision_function(np.array(x)) <= theta))
    np.testing.assert_array_equal(fast, slow)


def test_curve_with_mimicry_is_monotone(keyword_run):
    cfg = EvasionConfig.keyword_counts(lam=500.0)
    fn = evasion_curve(keyword_run, [0, 2, 4, 8], cfg, discrete=True).column("mean_fn")
    assert np.all(np.diff(fn) >= 0)


def test_curve_table_csv(tmp_path):
    t = CurveTable(["d_max", "mean_fn", "n_runs"], [(0.0, 0.1, 3), (1.0, 1 / 3, 3)])
    t.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines == ["d_max,mean_fn,n_runs", "0.0,0.1,3", "1.0,0.3333333333333333,3"]


def test_n_attack_points():
    assert n_attack_points(0.0, 100) == 0
    assert n_attack_points(0.06, 100) == 6
    assert n_attack_points(0.02, 75) == 2


def test_poisoning_curve_fraction_zero_is_baseline():
    tasks = []
    for s in range(2):
        data = gen_gaussian_2d(80, seed=s)
        tasks.append(split(data, SplitSpec(10, 30, "remainder", seed=s)))
    cfg = PoisonConfig(attack_label=-1, box_lower=-5, box_upper=5, max_iters=30)
    table, failed = poisoning_curve(tasks, [0.0, 0.05, 0.1], 2, cfg, KernelSpec.rbf(0.5))
    assert failed == 0
    base = [train_svm(tr, 1.0, KernelSpec.rbf(0.5)) for tr, _, _ in tasks]
    assert table.column("mean_val_err")[0] == pytest.approx(np.mean([m.error_rate(v) for m, (_, v, _) in
                                                                     zip(base, tasks)]))
    assert table.column("mean_test_err")[0] == pytest.approx(np.mean([m.error_rate(t) for m, (_, _, t) in
                                                                      zip(base, tasks)]))
    assert table.column("n_runs").tolist() == [2, 2, 2]
    with pytest.raises(InvalidArgumentError):
        poisoning_curve(tasks, [0.6], 1, cfg)
