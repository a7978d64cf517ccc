"""Gradient-descent evasion against a linear and an RBF SVM.

A malicious sample is pushed across the decision boundary inside an L1
budget.  With lam > 0 the attack also pulls the sample toward dense regions
of the legitimate class, so the result looks benign and not merely
misclassified.

Run: python demos/evasion.py
"""
import numpy as np

from svmsec import KernelSpec, train_svm
from svmsec.data import gen_gaussian_2d, gen_keyword_counts
from svmsec.evasion import EvasionConfig, evade, evade_discrete, kde_value

data = gen_gaussian_2d(100, seed=0)
benign = data.features[data.labels == -1]
x0 = data.features[data.labels == 1][0]

for kernel in (KernelSpec.linear(), KernelSpec.rbf(0.5)):
    model = train_svm(data, 1.0, kernel)
    for lam in (0.0, 20.0):
        cfg = EvasionConfig(lam=lam, bandwidth=1.0, d_max=4.0, step=0.05, box_lower=-5, box_upper=5)
        trace = evade(model, benign, x0, cfg)
        x = trace.best_point
        print(f"{kernel.kind:6s} lam={lam:3.0f}: g {model.decision_function(x0):+.2f} -> "
              f"{model.decision_function(x):+.2f}, L1 moved {np.abs(x - x0).sum():.2f}, "
              f"benign density {kde_value(benign, x0, 1.0):.3f} -> {kde_value(benign, x, 1.0):.3f}, "
              f"{len(trace)} iterates ({trace.termination.value})")

# integer keyword counts: the attacker may only add words
pdfs = gen_keyword_counts(100, seed=1)
model = train_svm(pdfs, 1.0)
benign = pdfs.features[pdfs.labels == -1]
x0 = pdfs.features[pdfs.labels == 1][0]
trace = evade_discrete(model, benign, x0, EvasionConfig.keyword_counts(lam=0.0, d_max=15))
x = trace.best_point
added = np.flatnonzero(x > x0)
print(f"keyword sample: g {model.decision_function(x0):+.2f} -> {model.decision_function(x):+.2f} "
      f"after adding {int((x - x0).sum())} words to features {added.tolist()}")
