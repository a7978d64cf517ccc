"""Differentially private linear SVM by output perturbation.

The weight vector of a hinge-loss SVM moves by at most 4 C kappa sqrt(F) in
L1 when one training record changes.  Releasing it with Laplace noise of
scale sensitivity / beta is beta-differentially private.  Larger beta means
less noise and a tighter utility bound.

Run: python demos/privacy.py
"""
import numpy as np

from svmsec.data import gen_gaussian_2d
from svmsec.privacy import (PrivacyParams, global_sensitivity, nonprivate_weights, private_decision,
                            private_releases, release_json, utility_epsilon)

data = gen_gaussian_2d(500, seed=0)
# scale records so that the augmented features (x, 1) have L2 norm <= kappa
X = data.features / np.linalg.norm(data.features, axis=1).max()
data = type(data)(X, data.labels)
kappa = np.sqrt(2.0)
C = 0.01
test = gen_gaussian_2d(2000, seed=1)
test_X = test.features / np.linalg.norm(test.features, axis=1).max()

w_hat = nonprivate_weights(data, C, PrivacyParams(beta=1.0, kappa=kappa, feature_dim=3))
base_acc = np.mean(np.sign(private_decision(w_hat, test_X)) == test.labels)
print(f"non-private weights {w_hat.round(3)}, test accuracy {base_acc:.3f}")

for beta in (0.5, 2.0, 10.0):
    params = PrivacyParams(beta=beta, kappa=kappa, feature_dim=3, phi=kappa, delta=0.05)
    W = private_releases(data, C, params, seeds=range(200))
    acc = [np.mean(np.sign(private_decision(w, test_X)) == test.labels) for w in W]
    # largest discriminant change over the test points, one value per release
    gap = np.abs(np.c_[test_X, np.ones(len(test_X))] @ (W - w_hat).T).max(axis=0)
    print(f"beta {beta:5.1f}: sensitivity {global_sensitivity(C, params):.4f}, "
          f"mean accuracy {np.mean(acc):.3f}, "
          f"share of releases within the bound {np.mean(gap <= utility_epsilon(C, params)):.3f} "
          f"(bound {utility_epsilon(C, params):.3f})")

print("example release:", release_json(W[0], C, params))
