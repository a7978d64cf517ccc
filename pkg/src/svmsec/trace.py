"""Attack traces: the auditable record every attack returns."""

import csv
import enum
from dataclasses import dataclass, field

import numpy as np


class Termination(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    STALLED = "stalled"


@dataclass
class AttackTrace:
    """Iterates with their objective values.

    ``best_index`` points at the minimal objective for evasion and the
    maximal one for poisoning.  ``columns`` holds optional extra per-iterate
    series (e.g. validation and test error for poisoning).
    """

    iterates: list
    objective_values: list
    best_index: int = 0
    termination: Termination = Termination.MAX_ITERS
    columns: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.iterates) != len(self.objective_values):
            raise ValueError("iterates and objective_values differ in length")

    def __len__(self):
        return len(self.iterates)

    @property
    def best_point(self):
        return self.iterates[self.best_index]

    @property
    def best_value(self):
        return self.objective_values[self.best_index]

    @property
    def final_point(self):
        return self.iterates[-1]

    def to_csv(self, path, labels, origin=None, norm="l1", points_path=None):
        """Write ``iter,objective,distance_from_origin,predicted_label`` rows
        plus any extra columns.

        ``labels`` are the predicted labels per iterate.  With ``points_path``
        every iterate's features go to a sidecar CSV (``iter,f0,f1,...``).
        """
        origin = self.iterates[0] if origin is None else origin
        extra = sorted(self.columns)
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["iter", "objective", "distance_from_origin", "predicted_label"] + extra)
            for k, (x, obj) in enumerate(zip(self.iterates, self.objective_values)):
                dist = distance(np.asarray(x) - origin, norm)
                w.writerow([k, repr(float(obj)), repr(float(dist)), int(labels[k])]
                           + [repr(float(self.columns[c][k])) for c in extra])
        if points_path is not None:
            d = len(self.iterates[0])
            with open(points_path, "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["iter"] + [f"f{j}" for j in range(d)])
                for k, x in enumerate(self.iterates):
                    w.writerow([k] + [repr(float(v)) for v in x])


def distance(diff, norm):
    diff = np.asarray(diff, dtype=float)
    if norm == "l1":
        return float(np.abs(diff).sum())
    return float(np.sqrt(diff @ diff))
