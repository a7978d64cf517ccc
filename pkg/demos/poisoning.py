"""Poisoning an SVM with a single crafted training point.

The attacker injects one point with the attacked label and moves it by
gradient ascent on the hinge loss over a validation set.  The SVM is
retrained after every move.  Several points are added greedily in the
multi-point variant.  A random label flip serves as the naive baseline.

Run: python demos/poisoning.py
"""
from svmsec import KernelSpec
from svmsec.data import SplitSpec, gen_gaussian_2d, split
from svmsec.poisoning import PoisonConfig, label_flip_error, poison, poison_multi

data = gen_gaussian_2d(150, seed=3)
train, val, test = split(data, SplitSpec(12, 60, "remainder", seed=0))
kernel = KernelSpec.rbf(0.5)
cfg = PoisonConfig(attack_label=-1, step=0.05, box_lower=-5, box_upper=5, max_iters=300, restarts=2)

trace = poison(train, val, cfg, kernel, test=test)
val_err, test_err = trace.columns["validation_error"], trace.columns["test_error"]
print(f"single point: hinge loss {trace.objective_values[0]:.2f} -> {trace.best_value:.2f}, "
      f"validation error {val_err[0]:.3f} -> {val_err[trace.best_index]:.3f}, "
      f"test error {test_err[0]:.3f} -> {test_err[trace.best_index]:.3f} "
      f"({len(trace)} iterates, {trace.termination.value})")
print("poison point starts at", trace.iterates[0].round(2), "ends at", trace.best_point.round(2))

flip = label_flip_error(train, val, attack_label=-1, n_points=1, seed=0, kernel=kernel)
print(f"random label flip: validation error {flip:.3f}")

multi = poison_multi(train, val, PoisonConfig(attack_label=-1, step=0.05, box_lower=-5, box_upper=5,
                                              max_iters=150), n_points=3, kernel=kernel, test=test)
print("greedy multi-point validation error:", [round(e, 3) for e in multi.validation_errors])
