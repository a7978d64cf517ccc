"""Security evaluation of support vector machines: evasion, poisoning and
differentially private training."""

__version__ = "0.1.0"

from .kernels import KernelSpec
from .svm import LabeledDataset, SvmModel, train_svm

__all__ = ["KernelSpec", "LabeledDataset", "SvmModel", "train_svm", "__version__"]
