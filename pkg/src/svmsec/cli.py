"""Command-line interface.

Every subcommand reads an optional JSON config (``--config``) whose keys are
the long flag names with underscores; flags given on the command line win.
Each run writes ``<out stem>.manifest.json`` next to its output recording
the resolved parameters and the library version.  A manifest can be passed
back as ``--config`` to repeat the run.

Exit codes: 0 success, 2 invalid configuration, 3 data error, 4 too many
convergence or degeneracy failures.
"""

import argparse
import json
import os
import sys
import urllib.request
from pathlib import Path

import numpy as np

from . import __version__
from .data import (SplitSpec, find_mnist_files, gen_gaussian_2d, gen_keyword_counts, load_dataset, save_csv,
                   split)
from .errors import (ConvergenceError, DegenerateStructureError, FormatError, InvalidArgumentError,
                     PreconditionError, UnsupportedInputError)
from .evasion import EvasionConfig, evade, evade_discrete
from .harness import EvasionRun, Knowledge, ScenarioSpec, attack_model_for, evasion_curve, poisoning_curve
from .kernels import KernelSpec
from .poisoning import PoisonConfig, poison
from .privacy import PrivacyParams, private_svm_train, release_dict
from .svm import SvmModel, train_svm

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_FAILURES = 0, 2, 3, 4

MNIST_URL = "https://ossci-datasets.s3.amazonaws.com/mnist/"
# published sizes of the gzip-compressed files
MNIST_SIZES = {
    "train-images-idx3-ubyte.gz": 9912422,
    "train-labels-idx1-ubyte.gz": 28881,
    "t10k-images-idx3-ubyte.gz": 1648877,
    "t10k-labels-idx1-ubyte.gz": 4542,
}


class ConfigError(Exception):
    pass


class QuotaExceeded(Exception):
    pass


# --- parameter resolution ------------------------------------------------------

EVASION_KEYS = ("lam", "bandwidth", "d_max", "step", "distance_norm", "box_lower", "box_upper",
                "monotone_increments", "stop_epsilon", "max_iters", "kde_neighbors")

COMMON = {"config": None, "out": None}

DEFAULTS = {
    "gen data": dict(kind="keywords", n_per_class=500, n_features=100, seed=0),
    "gen mnist": dict(dir=".", url=MNIST_URL),
    "train": dict(data=None, digits=None, kernel={"kind": "linear"}, c=1.0),
    "evade": dict(model=None, data=None, digits=None, legit=None, index=None, preset="mnist", discrete=False,
                  points_out=None),
    "poison": dict(train=None, val=None, test=None, data=None, digits=None, train_per_class=None,
                   val_per_class=None, split_seed=0, kernel={"kind": "linear"}, c=1.0, attack_label=None,
                   step=0.05, box_lower=None, box_upper=None, stop_epsilon=1e-6, max_iters=500, restarts=4,
                   seed=0, points_out=None),
    "private-train": dict(data=None, c=1.0, beta=1.0, kappa=None, phi=1.0, delta=0.05, seed=0),
    "eval evasion-curve": dict(data=None, digits=None, kernel={"kind": "linear"}, c=1.0, knowledge="perfect",
                               n_query=100, relabel_with_target=True, surrogates=5, surrogate_c=100.0,
                               surrogate_kernel={"kind": "rbf", "gamma": 0.1}, splits=5, train_per_class=None,
                               d_max_grid=[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20, 30, 40, 50], fp=0.005,
                               preset="keywords", discrete=True, seed=0, failure_quota=0.2),
    "eval poisoning-curve": dict(data=None, digits=None, train_per_class=None, val_per_class=None, runs=10,
                                 fractions=[0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06], kernel={"kind": "linear"},
                                 c=1.0, attack_label=None, step=0.05, box_lower=None, box_upper=None,
                                 stop_epsilon=1e-6, max_iters=500, restarts=0, seed=0, failure_quota=0.2),
}
EVASION_COMMANDS = ("evade", "eval evasion-curve")
PRESETS = {"mnist": EvasionConfig.mnist, "keywords": EvasionConfig.keyword_counts}


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg.get("params", cfg)  # manifests nest the parameters


def resolve(command, args):
    """Built-in defaults, then preset, then config file, then flags."""
    allowed = dict(DEFAULTS[command])
    if command in EVASION_COMMANDS:
        allowed.update({k: None for k in EVASION_KEYS})
    cfg = _load_config(args.config)
    unknown = set(cfg) - set(allowed) - set(COMMON)
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    flags = {k: v for k, v in vars(args).items() if k in allowed and v is not None}
    params = {**DEFAULTS[command], **{k: v for k, v in cfg.items() if k in allowed}, **flags}
    if command in EVASION_COMMANDS:
        preset = params["preset"]
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        base = PRESETS[preset]()
        for k in EVASION_KEYS:
            if params.get(k) is None:
                params[k] = getattr(base, k)
    if "failure_quota" in params and not 0 <= float(params["failure_quota"]) <= 1:
        raise ConfigError("failure_quota must lie in [0, 1]")
    out = args.out if args.out is not None else cfg.get("out")
    return params, out


def _kernel(value):
    if isinstance(value, KernelSpec):
        return value
    try:
        if isinstance(value, str):
            value = json.loads(value)
        return KernelSpec.from_dict(value)
    except (json.JSONDecodeError, TypeError, InvalidArgumentError) as exc:
        raise ConfigError(f"bad kernel JSON {value!r}: {exc}") from exc


def _number_list(value, cast=float):
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    try:
        return [cast(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected a list of numbers, got {value!r}") from exc


def _digits(value):
    if value is None:
        return None
    digits = _number_list(value, int)
    if len(digits) != 2:
        raise ConfigError("digits must name exactly two classes, e.g. 3,7")
    return tuple(digits)


def _require(params, *keys):
    missing = [k for k in keys if params.get(k) is None]
    if missing:
        raise ConfigError("missing required parameter(s): " + ", ".join("--" + k.replace("_", "-")
                                                                         for k in missing))


def _evasion_config(params):
    try:
        return EvasionConfig(**{k: params[k] for k in EVASION_KEYS})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _box(value, default):
    return default if value is None else float(value)


def _poison_config(params):
    _require(params, "attack_label")
    return PoisonConfig(attack_label=int(params["attack_label"]), step=float(params["step"]),
                        box_lower=_box(params["box_lower"], -np.inf), box_upper=_box(params["box_upper"], np.inf),
                        stop_epsilon=float(params["stop_epsilon"]), max_iters=int(params["max_iters"]),
                        restarts=int(params["restarts"]), seed=int(params["seed"]))


def _load(path, digits=None):
    if path is None:
        return None
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    return load_dataset(path, _digits(digits))


# --- output ----------------------------------------------------------------------

def manifest_path(out):
    out = Path(out)
    return out.with_name(out.stem + ".manifest.json")


def _write_manifest(command, params, out, extra=None):
    seeds = {k: v for k, v in sorted(params.items()) if "seed" in k}
    doc = {"command": command, "params": params, "seeds": seeds, "version": __version__}
    if extra:
        doc.update(extra)
    with open(manifest_path(out), "w") as f:
        json.dump(_jsonable(doc), f, indent=2, sort_keys=True)
        f.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, KernelSpec):
        return obj.to_dict()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def _check_quota(failures, total, quota):
    if total and failures / total > float(quota):
        raise QuotaExceeded(f"{failures} of {total} attacks or runs failed, above the quota {quota}")


# --- subcommands -------------------------------------------------------------------

def cmd_gen_data(params, out):
    if params["kind"] == "gaussian":
        data = gen_gaussian_2d(int(params["n_per_class"]), int(params["seed"]))
    elif params["kind"] == "keywords":
        data = gen_keyword_counts(int(params["n_per_class"]), int(params["n_features"]), int(params["seed"]))
    else:
        raise ConfigError(f"unknown generator {params['kind']!r} (choose gaussian or keywords)")
    save_csv(data, out)


def cmd_gen_mnist(params, out):
    """Download the four MNIST files and verify their published sizes."""
    target = Path(params["dir"])
    target.mkdir(parents=True, exist_ok=True)
    for name, size in MNIST_SIZES.items():
        path = target / name
        if not path.exists():
            urllib.request.urlretrieve(params["url"] + name, path)
        got = path.stat().st_size
        if got != size:
            raise FormatError(f"{path}: {got} bytes, the published size is {size}")
    find_mnist_files(target)
    find_mnist_files(target, "test")


def cmd_train(params, out):
    _require(params, "data")
    model = train_svm(_load(params["data"], params["digits"]), float(params["c"]), _kernel(params["kernel"]))
    Path(out).write_text(model.to_json() + "\n")


def cmd_evade(params, out):
    _require(params, "model", "data")
    model = SvmModel.from_json(Path(params["model"]).read_text())
    data = _load(params["data"], params["digits"])
    legit = _load(params["legit"], params["digits"])
    negatives = (legit if legit is not None else model.train_data)
    negatives = negatives.features[negatives.labels == -1]
    if params["index"] is None:
        positives = np.flatnonzero(data.labels == 1)
        if positives.size == 0:
            raise UnsupportedInputError("no sample labelled +1 to attack; pass --index")
        index = int(positives[0])
    else:
        index = int(params["index"])
        if not 0 <= index < data.n:
            raise ConfigError(f"index {index} outside the dataset of {data.n} samples")
    params["index"] = index
    cfg = _evasion_config(params)
    attack = evade_discrete if params["discrete"] else evade
    trace = attack(model, negatives, data.features[index], cfg)
    labels = model.classify(np.array(trace.iterates))
    trace.to_csv(out, labels, norm=cfg.distance_norm, points_path=params["points_out"])


def _task_from(params):
    """(train, val, test) from explicit files or a stratified split of ``data``."""
    if params["data"] is not None:
        _require(params, "train_per_class", "val_per_class")
        data = _load(params["data"], params["digits"])
        return split(data, SplitSpec(int(params["train_per_class"]), int(params["val_per_class"]),
                                     "remainder", int(params["split_seed"])))
    _require(params, "train", "val")
    return (_load(params["train"], params["digits"]), _load(params["val"], params["digits"]),
            _load(params["test"], params["digits"]))


def cmd_poison(params, out):
    train, val, test = _task_from(params)
    if test is not None and test.n == 0:
        test = None
    cfg = _poison_config(params)
    try:
        trace = poison(train, val, cfg, _kernel(params["kernel"]), float(params["c"]), test=test)
    except DegenerateStructureError as exc:
        raise QuotaExceeded(f"every restart hit a degenerate margin structure: {exc}") from exc
    labels = [cfg.attack_label] * len(trace)  # the attack point keeps its label
    if test is None:
        trace.columns.pop("test_error", None)
    trace.to_csv(out, labels, norm="l2", points_path=params["points_out"])


def cmd_private_train(params, out):
    _require(params, "data", "kappa")
    data = _load(params["data"])
    p = PrivacyParams(beta=float(params["beta"]), kappa=float(params["kappa"]), feature_dim=data.d + 1,
                      phi=float(params["phi"]), delta=float(params["delta"]))
    w = private_svm_train(data, float(params["c"]), p, int(params["seed"]))
    Path(out).write_text(json.dumps(release_dict(w, float(params["c"]), p), sort_keys=True) + "\n")


def cmd_evasion_curve(params, out):
    _require(params, "data", "train_per_class")
    data = _load(params["data"], params["digits"])
    kernel = _kernel(params["kernel"])
    scenario = ScenarioSpec(Knowledge(params["knowledge"]), int(params["n_query"]),
                            bool(params["relabel_with_target"]), float(params["surrogate_c"]),
                            _kernel(params["surrogate_kernel"]))
    n_sur = 1 if scenario.knowledge == Knowledge.PERFECT else int(params["surrogates"])
    seed = int(params["seed"])
    runs = []
    for s in range(int(params["splits"])):
        train, _, test = split(data, SplitSpec(int(params["train_per_class"]), 0, "remainder", seed + s))
        target = train_svm(train, float(params["c"]), kernel)
        for r in range(n_sur):
            attacker = attack_model_for(target, test, scenario, seed=seed + 1000 * (s + 1) + r)
            legit = attacker.train_data if attacker is not target else train
            runs.append(EvasionRun(target, attacker, test, legit.features[legit.labels == -1]))
    grid = _number_list(params["d_max_grid"])
    table = evasion_curve(runs, grid, _evasion_config(params), float(params["fp"]), bool(params["discrete"]))
    table.to_csv(out)
    attacked = sum(int((r.test.labels == 1).sum()) for r in runs)
    _check_quota(table.failures, attacked * (1 if params["discrete"] else len(grid)), params["failure_quota"])
    return {"failures": table.failures}


def cmd_poisoning_curve(params, out):
    _require(params, "data", "train_per_class", "val_per_class")
    data = _load(params["data"], params["digits"])
    seed = int(params["seed"])
    runs = int(params["runs"])
    tasks = [split(data, SplitSpec(int(params["train_per_class"]), int(params["val_per_class"]), "remainder",
                                   seed + r)) for r in range(runs)]
    table, failed = poisoning_curve(tasks, _number_list(params["fractions"]), runs, _poison_config(params),
                                    _kernel(params["kernel"]), float(params["c"]))
    table.to_csv(out)
    _check_quota(failed, runs, params["failure_quota"])
    return {"failures": failed}


COMMANDS = {
    "gen data": cmd_gen_data,
    "gen mnist": cmd_gen_mnist,
    "train": cmd_train,
    "evade": cmd_evade,
    "poison": cmd_poison,
    "private-train": cmd_private_train,
    "eval evasion-curve": cmd_evasion_curve,
    "eval poisoning-curve": cmd_poisoning_curve,
}


# --- argument parsing ----------------------------------------------------------------

def _bool(text):
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _add(p, name, type=str, help=None):
    p.add_argument("--" + name.replace("_", "-"), dest=name, type=type, default=None, help=help)


def _common(p, needs_out=True):
    p.add_argument("--config", default=None, help="JSON file of parameters (flags override it)")
    p.add_argument("--out", default=None, required=False,
                   help="output file; the manifest is written beside it" if needs_out else argparse.SUPPRESS)


def _evasion_flags(p):
    _add(p, "preset", help="base settings: mnist or keywords")
    _add(p, "lam", float, "mimicry weight")
    _add(p, "bandwidth", float, "KDE bandwidth h")
    _add(p, "d_max", float, "distance budget")
    _add(p, "step", float, "step size")
    _add(p, "distance_norm", help="l1 or l2")
    _add(p, "box_lower", float)
    _add(p, "box_upper", float)
    _add(p, "monotone_increments", _bool, "only allow feature increments")
    _add(p, "stop_epsilon", float)
    _add(p, "max_iters", int)
    _add(p, "kde_neighbors", int, "nearest legitimate samples used by the KDE")
    _add(p, "discrete", _bool, "use the discrete unit-step descent")


def _poison_flags(p):
    _add(p, "kernel", help='kernel JSON, e.g. \'{"kind": "rbf", "gamma": 0.5}\'')
    _add(p, "c", float, "SVM regularization C")
    _add(p, "attack_label", int, "label y* given to the attack points (-1 or 1)")
    _add(p, "step", float)
    _add(p, "box_lower", float)
    _add(p, "box_upper", float)
    _add(p, "stop_epsilon", float)
    _add(p, "max_iters", int)
    _add(p, "restarts", int, "extra random starts per attack point")
    _add(p, "seed", int)
    _add(p, "digits", help="MNIST digit pair a,b (a is +1) for IDX input")


def build_parser():
    parser = argparse.ArgumentParser(prog="svmsec", description="Security evaluation of SVMs.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)

    gen = sub.add_parser("gen", help="generate or fetch datasets").add_subparsers(dest="what", required=True)
    p = gen.add_parser("data", help="synthetic dataset as CSV")
    _common(p)
    _add(p, "kind", help="gaussian or keywords")
    _add(p, "n_per_class", int)
    _add(p, "n_features", int)
    _add(p, "seed", int)
    p = gen.add_parser("mnist", help="download MNIST and verify published file sizes")
    _common(p, needs_out=False)
    _add(p, "dir", help="destination directory")
    _add(p, "url", help="base URL")

    p = sub.add_parser("train", help="train an SVM and write it as JSON")
    _common(p)
    _add(p, "data", help="CSV or MNIST IDX image file")
    _add(p, "digits", help="MNIST digit pair a,b (a is +1)")
    _add(p, "kernel", help="kernel JSON")
    _add(p, "c", float)

    p = sub.add_parser("evade", help="evasion attack on one sample; writes the trace CSV")
    _common(p)
    _add(p, "model", help="model JSON from `svmsec train`")
    _add(p, "data", help="dataset holding the sample")
    _add(p, "digits")
    _add(p, "legit", help="dataset whose -1 samples feed the KDE (default: the model's support vectors)")
    _add(p, "index", int, "row to attack (default: first +1 sample)")
    _add(p, "points_out", help="optional per-iterate feature CSV")
    _evasion_flags(p)

    p = sub.add_parser("poison", help="single-point poisoning attack; writes the trace CSV")
    _common(p)
    for name in ("train", "val", "test", "data"):
        _add(p, name)
    _add(p, "train_per_class", int)
    _add(p, "val_per_class", int)
    _add(p, "split_seed", int)
    _add(p, "points_out")
    _poison_flags(p)

    p = sub.add_parser("private-train", help="differentially private linear SVM release (JSON)")
    _common(p)
    _add(p, "data")
    _add(p, "c", float)
    _add(p, "beta", float, "privacy level")
    _add(p, "kappa", float, "bound on augmented feature norms")
    _add(p, "phi", float, "radius of the utility ball")
    _add(p, "delta", float, "utility failure probability")
    _add(p, "seed", int)

    ev = sub.add_parser("eval", help="evaluation curves").add_subparsers(dest="what", required=True)
    p = ev.add_parser("evasion-curve", help="FN rate at fixed FP against d_max")
    _common(p)
    _add(p, "data")
    _add(p, "digits")
    _add(p, "kernel", help="target kernel JSON")
    _add(p, "c", float, "target C")
    _add(p, "knowledge", help="perfect or limited")
    _add(p, "n_query", int)
    _add(p, "relabel_with_target", _bool)
    _add(p, "surrogates", int, "surrogates per split under limited knowledge")
    _add(p, "surrogate_c", float)
    _add(p, "surrogate_kernel")
    _add(p, "splits", int)
    _add(p, "train_per_class", int)
    _add(p, "d_max_grid", help="comma-separated budgets")
    _add(p, "fp", float, "false positive rate for the threshold")
    _add(p, "seed", int)
    _add(p, "failure_quota", float, "tolerated fraction of failed attacks")
    _evasion_flags(p)

    p = ev.add_parser("poisoning-curve", help="error against contamination fraction")
    _common(p)
    _add(p, "data")
    _add(p, "train_per_class", int)
    _add(p, "val_per_class", int)
    _add(p, "runs", int)
    _add(p, "fractions", help="comma-separated fractions in [0, 0.5]")
    _add(p, "failure_quota", float, "tolerated fraction of skipped runs")
    _poison_flags(p)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    command = args.verb if args.verb not in ("gen", "eval") else f"{args.verb} {args.what}"
    try:
        params, out = resolve(command, args)
        if out is None and command != "gen mnist":
            raise ConfigError("--out is required")
        extra = COMMANDS[command](params, out)
        if out is not None:
            _write_manifest(command, params, out, extra)
    except (ConfigError, InvalidArgumentError, argparse.ArgumentTypeError) as exc:
        print(f"svmsec: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, PreconditionError, UnsupportedInputError, FileNotFoundError, OSError) as exc:
        print(f"svmsec: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (QuotaExceeded, ConvergenceError) as exc:
        print(f"svmsec: {exc}", file=sys.stderr)
        return EXIT_FAILURES
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
