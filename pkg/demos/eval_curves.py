"""Security evaluation curves.

Evasion: false-negative rate at a 0.5% false-positive operating point as the
attacker's budget grows, under perfect knowledge and with a surrogate model
learned from queries.  Poisoning: validation and test error as the share
of injected points grows.

Run: python demos/eval_curves.py
"""
from svmsec import KernelSpec, train_svm
from svmsec.data import SplitSpec, gen_gaussian_2d, gen_keyword_counts, split
from svmsec.evasion import EvasionConfig
from svmsec.harness import EvasionRun, Knowledge, ScenarioSpec, attack_model_for, evasion_curve, poisoning_curve
from svmsec.poisoning import PoisonConfig

grid = list(range(0, 11, 2))
cfg = EvasionConfig.keyword_counts(lam=0.0)
for knowledge in (Knowledge.PERFECT, Knowledge.LIMITED):
    runs = []
    for s in range(3):
        train, _, test = split(gen_keyword_counts(200, seed=s), SplitSpec(100, 0, "remainder", seed=s))
        target = train_svm(train, 1.0)
        attacker = attack_model_for(target, test, ScenarioSpec(knowledge, n_query=100,
                                                               surrogate_kernel=KernelSpec.linear()), seed=s)
        runs.append(EvasionRun(target, attacker, test, train.features[train.labels == -1]))
    table = evasion_curve(runs, grid, cfg, discrete=True)
    print(f"{knowledge.value:8s} knowledge, words added {grid}: FN rate",
          [round(float(v), 3) for v in table.column("mean_fn")])

tasks = [split(gen_gaussian_2d(120, seed=s), SplitSpec(15, 50, "remainder", seed=s)) for s in range(3)]
pcfg = PoisonConfig(attack_label=-1, step=0.1, box_lower=-5, box_upper=5, max_iters=100)
table, failed = poisoning_curve(tasks, [0.0, 0.05, 0.1], 3, pcfg, KernelSpec.rbf(0.5))
print(table.columns)
for row in table.rows:
    print([round(float(v), 3) for v in row])
