import numpy as np
import pytest

from oracles import cosine, rel_err
from svmsec.data import gen_gaussian_2d
from svmsec.errors import InvalidArgumentError
from svmsec.kernels import KernelSpec
from svmsec.poisoning import (PoisonConfig, label_flip_error, poison, poison_gradient, poison_multi,
                              random_label_flips, validation_loss)
from svmsec.svm import LabeledDataset, retrain_moved_point, train_svm

from test_svm import assert_kkt

DELTA = 1e-5


def toy(seed):
    return gen_gaussian_2d(25, 2 * seed), gen_gaussian_2d(500, 2 * seed + 1)


def same_structure(models, val):
    ref = models[0]
    act = lambda m: val.labels * m.decision_function(val.features) < 1
    return all(all(np.array_equal(a, b) for a, b in zip(m.sets, ref.sets))
               and np.array_equal(act(m), act(ref)) for m in models[1:])


def retrain_fd(train, val, x, y_star, kernel):
    """Central differences of the validation loss, one full retrain per probe.

    Returns None when any probe changes the set structure (a kink of P)."""
    models = [train_svm(train.with_point(x, y_star), 1.0, kernel)]
    grad = np.empty(x.size)
    for j in range(x.size):
        e = np.zeros(x.size)
        e[j] = DELTA
        hi = train_svm(train.with_point(x + e, y_star), 1.0, kernel)
        lo = train_svm(train.with_point(x - e, y_star), 1.0, kernel)
        models += [hi, lo]
        grad[j] = (validation_loss(hi, val) - validation_loss(lo, val)) / (2 * DELTA)
    if not same_structure(models, val):
        return None, models[0]
    return grad, models[0]


def smooth_instances(kernel, count, rng):
    out = []
    while len(out) < count:
        train, val = toy(int(rng.integers(0, 1000)))
        val = val.subset(rng.choice(val.n, 100, replace=False))
        x = rng.uniform(-3, 3, 2)
        y_star = int(rng.choice([-1, 1]))
        fd, model = retrain_fd(train, val, x, y_star, kernel)
        if fd is None or model.alphas[-1] <= model.kkt_tolerance or np.linalg.norm(fd) < 1e-6:
            continue
        if model.sets.S.size == 0:
            continue
        out.append((model, val, x, y_star, fd))
    return out


def test_validation_loss_zero_when_margins_satisfied():
    model = train_svm(LabeledDataset([[-1.0], [1.0]], [-1, 1]), 10.0)
    assert validation_loss(model, LabeledDataset([[-2.0], [3.0]], [-1, 1])) == 0.0


def test_validation_loss_on_boundary_is_one():
    model = train_svm(LabeledDataset([[-1.0], [1.0]], [-1, 1]), 10.0)
    assert validation_loss(model, LabeledDataset([[0.0]], [1])) == pytest.approx(1.0, abs=1e-12)


def test_validation_loss_matches_per_point_sum():
    train, val = toy(0)
    model = train_svm(train, 1.0, KernelSpec.rbf(0.5))
    ref = 0.0
    for x, y in zip(val.features, val.labels):
        ref += max(0.0, 1.0 - y * model.decision_function(x))
    assert validation_loss(model, val) == pytest.approx(ref, rel=1e-12)


def test_validation_loss_dimension_mismatch():
    model = train_svm(gen_gaussian_2d(5, seed=0), 1.0)
    with pytest.raises(InvalidArgumentError):
        validation_loss(model, LabeledDataset([[0.0, 0.0, 0.0]], [1]))


def test_gradient_zero_without_active_points():
    train, _ = toy(1)
    x = np.array([-2.0, 0.0])
    model = train_svm(train.with_point(x, 1), 1.0)
    far = LabeledDataset([[-9.0, 0.0], [9.0, 0.0]], [-1, 1])
    assert validation_loss(model, far) == 0.0
    np.testing.assert_array_equal(poison_gradient(model, far, x, 1), [0.0, 0.0])


def test_gradient_zero_for_reserve_attack_point():
    train, val = toy(1)
    x = np.array([4.0, 0.0])  # deep on its own label's side
    model = train_svm(train.with_point(x, 1), 1.0)
    assert model.alphas[-1] == 0.0
    np.testing.assert_array_equal(poison_gradient(model, val, x, 1), [0.0, 0.0])


def test_gradient_requires_matching_attack_point():
    train, val = toy(1)
    model = train_svm(train.with_point([0.5, 0.5], 1), 1.0)
    with pytest.raises(InvalidArgumentError):
        poison_gradient(model, val, np.array([0.4, 0.5]), 1)
    with pytest.raises(InvalidArgumentError):
        poison_gradient(model, val, np.array([0.5, 0.5]), -1)


@pytest.mark.parametrize("kernel", [KernelSpec.linear(), KernelSpec.rbf(0.5)], ids=lambda k: k.kind)
def test_gradient_matches_retrain_finite_difference(kernel):
    rng = np.random.default_rng(7 if kernel.kind == "linear" else 8)
    for model, val, x, y_star, fd in smooth_instances(kernel, 25, rng):
        g = poison_gradient(model, val, x, y_star)
        assert cosine(g, fd) >= 0.99
        assert rel_err(g, fd) <= 0.05


def literal_gradient(model, val, x_c, y_star):
    """Textbook form with an explicit inverse of Q_ss; valid when the attack
    point is an error vector and Q_ss is well conditioned."""
    data = model.train_data
    X, y, a = data.features, data.labels.astype(float), model.alphas
    S = model.sets.S
    k = model.kernel
    gam = k.gamma

    def K(u, v):
        return np.exp(-gam * np.sum((u - v) ** 2))

    def dK(u, xc):  # gradient of K(u, xc) with respect to xc
        return 2 * gam * K(u, xc) * (u - xc)

    Qss = np.array([[y[i] * y[j] * K(X[i], X[j]) for j in S] for i in S])
    Qinv = np.linalg.inv(Qss)
    ups = Qinv @ y[S]
    zeta = y[S] @ ups
    dQsc = np.array([y[s] * y_star * dK(X[s], x_c) for s in S])
    total = np.zeros(x_c.size)
    for xk, yk in zip(val.features, val.labels):
        if yk * model.decision_function(xk) - 1 >= 0:
            continue
        Qks = np.array([yk * y[s] * K(xk, X[s]) for s in S])
        Mk = -(Qks @ (zeta * Qinv - np.outer(ups, ups)) + yk * ups) / zeta
        total += (Mk @ dQsc + yk * y_star * dK(xk, x_c)) * a[-1]
    return total


def test_gradient_matches_literal_formula():
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 10:
        train, val = toy(int(rng.integers(0, 1000)))
        x = rng.uniform(-3, 3, 2)
        model = train_svm(train.with_point(x, -1), 1.0, KernelSpec.rbf(0.5))
        if model.alphas[-1] < model.c_param - 1e-6:
            continue
        checked += 1
        # the literal form sums dg_k; the loss gradient is its negative
        np.testing.assert_allclose(poison_gradient(model, val, x, -1),
                                   -literal_gradient(model, val, x, -1), rtol=1e-6, atol=1e-8)


def test_small_step_first_order():
    kernel = KernelSpec.rbf(0.5)
    rng = np.random.default_rng(0)
    for model, val_s, x, y_star, _ in smooth_instances(kernel, 5, rng):
        g = poison_gradient(model, val_s, x, y_star)
        P0 = validation_loss(model, val_s)
        for t in (1e-3, 1e-4):
            moved = retrain_moved_point(model, -1, x + t * g / np.linalg.norm(g))
            assert abs(validation_loss(moved, val_s) - P0) <= t * np.linalg.norm(g) * 1.05 + 1e-9


def test_retrain_moved_point_matches_cold(rng):
    train, _ = toy(3)
    for kernel in (KernelSpec.linear(), KernelSpec.rbf(0.5)):
        model = train_svm(train.with_point([0.2, 0.1], -1), 1.0, kernel)
        x = rng.uniform(-3, 3, 2)
        warm = retrain_moved_point(model, -1, x)
        cold = train_svm(train.with_point(x, -1), 1.0, kernel)
        assert_kkt(warm)
        probes = rng.uniform(-4, 4, (100, 2))
        assert np.max(np.abs(warm.decision_function(probes) - cold.decision_function(probes))) <= 1e-5


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        PoisonConfig(attack_label=0)
    with pytest.raises(InvalidArgumentError):
        PoisonConfig(attack_label=1, step=0)
    with pytest.raises(InvalidArgumentError):
        PoisonConfig(attack_label=1, box_lower=1, box_upper=0)


def test_attack_properties():
    train, val = toy(4)
    test = gen_gaussian_2d(200, seed=99)
    cfg = PoisonConfig(attack_label=-1, box_lower=-5, box_upper=5, restarts=2, seed=1)
    tr = poison(train, val, cfg, KernelSpec.rbf(0.5), 1.0, test=test)
    for x in tr.iterates:
        assert np.all(x >= -5) and np.all(x <= 5)
    assert tr.best_value >= tr.objective_values[0]
    assert tr.best_value == max(tr.objective_values)
    assert set(tr.columns) == {"validation_error", "test_error"}
    assert len(tr.columns["test_error"]) == len(tr)
    # every iterate re-derives a consistent KKT structure
    for x in tr.iterates:
        assert_kkt(train_svm(train.with_point(x, -1), 1.0, KernelSpec.rbf(0.5)))
    # recorded losses are reproducible by cold retrains
    for x, P in zip(tr.iterates, tr.objective_values):
        assert validation_loss(train_svm(train.with_point(x, -1), 1.0, KernelSpec.rbf(0.5)), val) == \
            pytest.approx(P, rel=1e-6)


def test_attack_deterministic():
    train, val = toy(5)
    cfg = PoisonConfig(attack_label=-1, box_lower=-5, box_upper=5, restarts=2, seed=3)
    a = poison(train, val, cfg, KernelSpec.rbf(0.5))
    b = poison(train, val, cfg, KernelSpec.rbf(0.5))
    assert a.objective_values == b.objective_values


def test_multi_point_greedy():
    train, val = toy(6)
    cfg = PoisonConfig(attack_label=-1, box_lower=-5, box_upper=5)
    res = poison_multi(train, val, cfg, 3, KernelSpec.rbf(0.5))
    assert res.points.shape == (3, 2)
    assert len(res.validation_errors) == 4
    model = train_svm(train.concat(LabeledDataset(res.points, res.labels)), 1.0, KernelSpec.rbf(0.5))
    assert model.error_rate(val) == pytest.approx(res.validation_errors[-1])


def test_label_flip_baseline():
    train, val = toy(7)
    flipped = random_label_flips(train, -1, 3, seed=0)
    assert flipped.n == train.n + 3
    added = flipped.features[train.n:]
    pos = train.features[train.labels == 1]
    assert all(any(np.array_equal(a, p) for p in pos) for a in added)
    assert np.all(flipped.labels[train.n:] == -1)
    assert 0 <= label_flip_error(train, val, -1, 3, seed=0) <= 1
