"""Train linear and RBF SVMs on two Gaussian blobs and inspect the dual.

Run: python demos/kernels_and_svm.py
"""
import numpy as np

from svmsec import KernelSpec, train_svm
from svmsec.data import SplitSpec, gen_gaussian_2d, split
from svmsec.kernels import kernel_grad, kernel_matrix

data = gen_gaussian_2d(100, seed=0)
train, _, test = split(data, SplitSpec(50, 0, "remainder", seed=0))

for kernel in (KernelSpec.linear(), KernelSpec.rbf(0.5), KernelSpec.poly(3, 1.0)):
    model = train_svm(train, 1.0, kernel)
    sets = model.sets
    print(f"{kernel.to_json():40s} test error {model.error_rate(test):.3f}  "
          f"margin SVs {len(sets.S)}  bounded SVs {len(sets.E)}")

# the Gram matrix is symmetric positive semidefinite
K = kernel_matrix(KernelSpec.rbf(0.5), train.features, train.features)
print("min Gram eigenvalue:", np.linalg.eigvalsh(K).min())

# analytic kernel gradient against a central difference
x, z = train.features[0], train.features[1]
spec = KernelSpec.rbf(0.5)
eps = 1e-6
numeric = [(kernel_matrix(spec, x + eps * e, z)[0, 0] - kernel_matrix(spec, x - eps * e, z)[0, 0]) / (2 * eps)
           for e in np.eye(2)]
print("kernel gradient:", kernel_grad(spec, x, z), "numeric:", np.array(numeric))

# gradient of the decision function with respect to the input
model = train_svm(train, 1.0, spec)
print("g(x) =", model.decision_function(x), " dg/dx =", model.decision_gradient(x))
