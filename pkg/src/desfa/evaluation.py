"""Experimental protocol: repeated splits, bagged pools, every method scored
on the same test split, plus leave-one-out k-NN and paired t-tests.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import stats

from . import constants as K
from .competence import build_filtered_index, build_index, loo_knn_predictions
from .datasets import Dataset, SplitSpec, concat, resolve_dataset, split, split_train_validation
from .ensemble import PerceptronParams, bagging, vote_labels
from .errors import InvariantError, ValidationError
from .selection import classify_batch

METHOD_ORDER = ("des-fa-1", "des-fa-3", "des-fa-5", "aknn-knora-e", "knora-e",
                "static", "oracle", "single-best")
DYNAMIC = ("aknn-knora-e", "knora-e")
STATIC = ("static", "oracle", "single-best")
DEFAULT_METHODS = ("des-fa", "aknn-knora-e", "knora-e", "static", "oracle", "single-best")


def method_label(name: str) -> str:
    if name.startswith("des-fa-"):
        return f"DES-FA ({name.rsplit('-', 1)[1]})"
    return {"aknn-knora-e": "A-k-NN + KNORA-E", "knora-e": "KNORA-E", "static": "Static Ensemble",
            "oracle": "Oracle", "single-best": "Single Best"}[name]


def _method_key(name):
    if name in METHOD_ORDER:
        return (METHOD_ORDER.index(name), 0)
    # des-fa with an unusual ENN k: keep them ahead of the baselines
    return (2, int(name.rsplit("-", 1)[1]))


def expand_methods(methods, enn_ks) -> tuple:
    """Resolve ``des-fa`` into one ``des-fa-<k>`` per ENN k, in table order."""
    out = set()
    for m in methods:
        m = m.strip().lower()
        if m == "des-fa":
            out.update(f"des-fa-{k}" for k in enn_ks)
        elif m.startswith("des-fa-") and m.rsplit("-", 1)[1].isdigit() and int(m.rsplit("-", 1)[1]) >= 1:
            out.add(m)
        elif m in DYNAMIC or m in STATIC:
            out.add(m)
        else:
            raise ValidationError(f"unknown method {m!r}")
    if not out:
        raise ValidationError("no methods requested")
    return tuple(sorted(out, key=_method_key))


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "pima"
    ensemble_size: int = K.ENSEMBLE_SIZE
    k: int = K.NEIGHBORS
    enn_ks: tuple = K.ENN_KS
    iterations: int = K.ITERATIONS
    train_fraction: float = K.TRAIN_FRACTION
    validation_fraction: float = K.VALIDATION_FRACTION
    stratified: bool = True
    methods: tuple = DEFAULT_METHODS
    seed: int = 0
    epochs: int = K.PERCEPTRON_EPOCHS
    learning_rate: float = K.PERCEPTRON_LEARNING_RATE
    scale: bool = True
    leave_one_out: bool = True
    data_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "enn_ks", tuple(int(k) for k in self.enn_ks))
        object.__setattr__(self, "methods", tuple(self.methods))
        checks = [
            (self.ensemble_size >= 1, "ensemble_size must be >= 1"),
            (self.k >= 1, "k must be >= 1"),
            (all(k >= 1 for k in self.enn_ks), "ENN k values must be >= 1"),
            (self.iterations >= 1, "iterations must be >= 1"),
            (0 < self.train_fraction < 1, "train_fraction must lie in (0, 1)"),
            (0 < self.validation_fraction < 1, "validation_fraction must lie in (0, 1)"),
            (self.seed >= 0, "seed must be non-negative"),
            (self.epochs >= 1, "epochs must be >= 1"),
            (self.learning_rate > 0, "learning_rate must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValidationError(msg)
        self.method_names  # validates method names

    @property
    def method_names(self) -> tuple:
        return expand_methods(self.methods, self.enn_ks)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["enn_ks"] = list(self.enn_ks)
        d["methods"] = list(self.methods)
        return d

    @classmethod
    def from_dict(cls, d) -> ExperimentConfig:
        names = {f.name for f in fields(cls)}
        d = {k: v for k, v in d.items() if k in names}
        for key in ("enn_ks", "methods"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def iteration_seeds(master_seed, iterations) -> list[int]:
    return [int(np.random.SeedSequence([master_seed, i]).generate_state(1, np.uint64)[0])
            for i in range(iterations)]


@dataclass
class MethodResult:
    scores: list = field(default_factory=list)   # percent, one per iteration
    reductions: int = 0
    fallbacks: int = 0
    wall_time: float = 0.0

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))

    @property
    def std(self) -> float:
        # population convention
        return float(np.std(self.scores))


@dataclass(frozen=True)
class TTestResult:
    method_a: str
    method_b: str
    t: float
    p_value: float
    significant: bool
    alpha: float = 0.05


def paired_t_test(scores_a, scores_b, alpha=0.05, labels=("a", "b")) -> TTestResult:
    """Two-sided paired t-test on per-iteration differences ``a - b``.

    All-zero differences are not significant (t = 0). Constant non-zero
    differences are reported as significant with t = +/-inf.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"paired samples must have equal length, got {a.shape} and {b.shape}")
    if a.size < 2:
        raise ValidationError("paired t-test needs at least two pairs")
    d = a - b
    n = d.size
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0:
        if mean == 0:
            return TTestResult(labels[0], labels[1], 0.0, 1.0, False, alpha)
        return TTestResult(labels[0], labels[1], math.copysign(math.inf, mean), 0.0, True, alpha)
    t = float(mean / (sd / math.sqrt(n)))
    p = float(2 * stats.t.sf(abs(t), n - 1))
    crit = stats.t.ppf(1 - alpha / 2, n - 1)
    return TTestResult(labels[0], labels[1], t, p, bool(abs(t) > crit), alpha)


def minmax_fit(X):
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    return lo, np.where(span > 0, span, 1.0)


def _scaled(ds: Dataset, lo, span) -> Dataset:
    return ds.with_features((ds.features - lo) / span)


def leave_one_out_knn(dataset: Dataset, k=K.NEIGHBORS, scale=True) -> float:
    """Fraction of patterns labelled correctly by k-NN over all other patterns."""
    if not 1 <= k < dataset.n_samples:
        raise ValidationError(f"k must be in [1, {dataset.n_samples - 1}], got {k}")
    X = dataset.features
    if scale:
        lo, span = minmax_fit(X)
        X = (X - lo) / span
    pred = loo_knn_predictions(X, dataset.labels, dataset.n_classes, k)
    return float((pred == dataset.labels).mean())


@dataclass
class ExperimentReport:
    dataset: str
    config: dict
    methods: dict
    t_tests: list
    seeds: list
    leave_one_out: float | None = None
    flags: dict = field(default_factory=dict)
    leave_one_out_scores: list = field(default_factory=list)
    stddev: str = "population"

    def to_dict(self, timing=False) -> dict:
        methods = {}
        for name, r in self.methods.items():
            methods[name] = {"label": method_label(name), "mean": r.mean, "std": r.std,
                             "reductions": r.reductions, "fallbacks": r.fallbacks, "scores": list(r.scores)}
            if timing:
                methods[name]["wall_time"] = r.wall_time
        return {"dataset": self.dataset, "config": self.config, "stddev": self.stddev,
                "seeds": self.seeds, "leave_one_out": self.leave_one_out,
                "leave_one_out_scores": list(self.leave_one_out_scores), "methods": methods,
                "t_tests": [asdict(t) for t in self.t_tests], "flags": self.flags}

    @classmethod
    def from_dict(cls, d, timing=None) -> ExperimentReport:
        methods = {}
        for name, m in d["methods"].items():
            wall = (timing or {}).get(name, {}).get("seconds", m.get("wall_time", 0.0))
            methods[name] = MethodResult(list(m["scores"]), m["reductions"], m["fallbacks"], wall)
        return cls(d["dataset"], d["config"], methods, [TTestResult(**t) for t in d["t_tests"]],
                   d["seeds"], d.get("leave_one_out"), d.get("flags", {}),
                   d.get("leave_one_out_scores", []), d.get("stddev", "population"))

    def timing(self) -> dict:
        return {name: {"seconds": r.wall_time, "reductions": r.reductions, "fallbacks": r.fallbacks}
                for name, r in self.methods.items()}


# ---------------------------------------------------------------- protocol

def _prepare(source, config, seed):
    split_seed, bag_seed = (int(s) for s in np.random.SeedSequence(seed).generate_state(2, np.uint64))
    if source.predefined:
        train, validation = split_train_validation(source.train, config.validation_fraction,
                                                   seed=split_seed, stratified=config.stratified)
        test = source.test
    else:
        spec = SplitSpec(config.train_fraction, config.validation_fraction, split_seed, config.stratified)
        train, validation, test = split(source.data, spec)
    if config.scale:
        lo, span = minmax_fit(np.vstack([train.features, validation.features]))
        train, validation, test = (_scaled(d, lo, span) for d in (train, validation, test))
    params = PerceptronParams(config.epochs, config.learning_rate)
    ensemble = bagging(train, config.ensemble_size, params, seed=bag_seed)
    return train, validation, test, ensemble


def run_iteration(source, config: ExperimentConfig, iteration: int, seed: int, trace=None) -> dict:
    """Score every configured method on one split; returns per-method stats."""
    try:
        train, validation, test, ensemble = _prepare(source, config, seed)
    except ValidationError as exc:
        raise ValidationError(f"{source.name}, iteration {iteration}: {exc}") from exc
    y = test.labels
    preds = ensemble.predictions(test.features)
    n_classes = test.n_classes
    out = {}
    flags = []

    def record(name, labels, t0, reductions=0, fallbacks=0):
        out[name] = {"accuracy": 100.0 * float((labels == y).mean()), "reductions": int(reductions),
                     "fallbacks": int(fallbacks), "seconds": time.perf_counter() - t0}

    oracle_hits = (preds == y[:, None]).any(axis=1)
    for name in config.method_names:
        t0 = time.perf_counter()
        if name == "static":
            record(name, vote_labels(preds, n_classes=n_classes), t0)
        elif name == "oracle":
            out[name] = {"accuracy": 100.0 * float(oracle_hits.mean()), "reductions": 0, "fallbacks": 0,
                         "seconds": time.perf_counter() - t0}
        elif name == "single-best":
            val_acc = (ensemble.predictions(validation.features) == validation.labels[:, None]).mean(axis=0)
            record(name, preds[:, int(np.argmax(val_acc))], t0)
        else:
            if name.startswith("des-fa-"):
                k_enn = int(name.rsplit("-", 1)[1])
                index = build_filtered_index(validation, ensemble, k_enn)
                if index.flags.get("emptied_class"):
                    flags.append(name)
                adaptive = True
            else:
                adaptive = name == "aknn-knora-e"
                index = build_index(validation, ensemble, adaptive=adaptive)
            res = classify_batch(ensemble, index, test.features, config.k, adaptive, predictions=preds)
            record(name, res.labels, t0, res.reductions.sum(), res.fallback.sum())
            if trace is not None:
                for rec in res.trace_records(name):
                    trace.write(json.dumps({"iteration": iteration, **rec}) + "\n")
    loo = None
    if config.leave_one_out:
        # "training data" = the non-test half, in the iteration's scaled space
        trainval = concat(train, validation)
        if trainval.n_samples > config.k:
            loo = 100.0 * leave_one_out_knn(trainval, config.k, scale=False)
    oracle = 100.0 * float(oracle_hits.mean())
    for name, r in out.items():
        if r["accuracy"] > oracle + 1e-9:
            raise InvariantError(f"{source.name}, iteration {iteration}: {name} "
                                 f"({r['accuracy']:.4f}) exceeds the oracle ({oracle:.4f})")
    return {"methods": out, "emptied_class": flags, "leave_one_out": loo}


def _worker(args):
    config, iteration, seed = args
    source = resolve_dataset(config.dataset, config.data_dir)
    return run_iteration(source, config, iteration, seed)


def run_experiment(config: ExperimentConfig, jobs=1, trace=None, source=None) -> ExperimentReport:
    """Run ``config.iterations`` independent iterations and aggregate.

    Results do not depend on ``jobs``. ``trace`` (a text stream) receives one
    JSON record per dynamic-selection query and forces sequential execution.
    """
    if source is None:
        source = resolve_dataset(config.dataset, config.data_dir)
    seeds = iteration_seeds(config.seed, config.iterations)
    if jobs > 1 and trace is None:
        with ProcessPoolExecutor(jobs) as pool:
            runs = list(pool.map(_worker, [(config, i, s) for i, s in enumerate(seeds)]))
    else:
        runs = [run_iteration(source, config, i, s, trace) for i, s in enumerate(seeds)]

    methods = {name: MethodResult() for name in config.method_names}
    flags = {}
    for i, run in enumerate(runs):
        for name, r in run["methods"].items():
            m = methods[name]
            m.scores.append(r["accuracy"])
            m.reductions += r["reductions"]
            m.fallbacks += r["fallbacks"]
            m.wall_time += r["seconds"]
        for name in run["emptied_class"]:
            flags.setdefault("emptied_class", {}).setdefault(name, []).append(i)

    t_tests = []
    if "knora-e" in methods and config.iterations >= 2:
        for name in methods:
            if name.startswith("des-fa-") or name == "aknn-knora-e":
                t_tests.append(paired_t_test(methods[name].scores, methods["knora-e"].scores,
                                             labels=(name, "knora-e")))
    loo_scores = [run["leave_one_out"] for run in runs if run["leave_one_out"] is not None]
    loo = float(np.mean(loo_scores)) if loo_scores else None
    return ExperimentReport(source.name, config.to_dict(), methods, t_tests, seeds, loo, flags, loo_scores)


def measure_timing(config: ExperimentConfig, jobs=1) -> dict:
    """Per-method wall seconds plus total k-reductions and fallbacks."""
    return run_experiment(config, jobs=jobs).timing()


# ------------------------------------------------------------ report files

REPORT_FILE = "report.json"
TIMING_FILE = "timing.json"
SCORES_FILE = "scores.csv"
TABLE_FILE = "table.txt"


def write_report(report: ExperimentReport, out_dir) -> dict:
    """Write the deterministic report, raw scores, timing and a text table.

    Wall-clock seconds live only in ``timing.json`` so that reruns produce
    byte-identical ``report.json`` and ``scores.csv``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"report": out / REPORT_FILE, "timing": out / TIMING_FILE,
             "scores": out / SCORES_FILE, "table": out / TABLE_FILE}
    paths["report"].write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    paths["timing"].write_text(json.dumps(report.timing(), indent=2) + "\n")
    names = list(report.methods)
    with paths["scores"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "seed"] + names)
        for i, seed in enumerate(report.seeds):
            w.writerow([i, seed] + [repr(report.methods[n].scores[i]) for n in names])
    paths["table"].write_text(render_accuracy_table([report]) + "\n")
    return {k: str(v) for k, v in paths.items()}


def load_report(directory) -> ExperimentReport:
    directory = Path(directory)
    timing = None
    if (directory / TIMING_FILE).is_file():
        timing = json.loads((directory / TIMING_FILE).read_text())
    return ExperimentReport.from_dict(json.loads((directory / REPORT_FILE).read_text()), timing)


# --------------------------------------------------------------- rendering

def _grid(header, rows):
    widths = [max(len(str(r[j])) for r in [header] + rows) for j in range(len(header))]
    line = lambda r: "  ".join(str(c).ljust(w) if j == 0 else str(c).rjust(w)
                               for j, (c, w) in enumerate(zip(r, widths)))
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(header), sep] + [line(r) for r in rows])


def _columns(reports):
    names = set()
    for r in reports:
        names.update(r.methods)
    return sorted(names, key=_method_key)


def render_accuracy_table(reports) -> str:
    """Mean(std) accuracy per dataset, columns in the comparative-table order."""
    cols = _columns(reports)
    rows = [[r.dataset] + [f"{r.methods[c].mean:.2f}({r.methods[c].std:.2f})" if c in r.methods else "-"
                           for c in cols] for r in reports]
    return _grid(["Database"] + [method_label(c) for c in cols], rows)


def render_loo_table(reports) -> str:
    """Leave-one-out k-NN next to KNORA-E, static ensemble and oracle means."""
    cols = ["knora-e", "static", "oracle"]
    rows = []
    for r in reports:
        loo = "-" if r.leave_one_out is None else f"{r.leave_one_out:.2f}"
        rows.append([r.dataset, loo] + [f"{r.methods[c].mean:.2f}" if c in r.methods else "-" for c in cols])
    return _grid(["Database", "Leave-One-Out"] + [method_label(c) for c in cols], rows)


def best_des_fa(report: ExperimentReport) -> str | None:
    cands = [n for n in report.methods if n.startswith("des-fa-")]
    if not cands:
        return None
    # highest mean; ties go to the smaller ENN k
    return max(sorted(cands, key=_method_key), key=lambda n: report.methods[n].mean)


def render_cost_table(reports) -> str:
    """Wall seconds and k-reduction counts: best DES-FA variant vs KNORA-E."""
    rows = []
    for r in reports:
        best = best_des_fa(r)
        d = r.methods.get(best) if best else None
        e = r.methods.get("knora-e")
        rows.append([r.dataset,
                     method_label(best) if best else "-",
                     f"{d.wall_time:.2f}" if d else "-", f"{e.wall_time:.2f}" if e else "-",
                     str(d.reductions) if d else "-", str(e.reductions) if e else "-"])
    return _grid(["Database", "DES-FA (k)", "DES-FA s", "KNORA-E s", "DES-FA reductions",
                  "KNORA-E reductions"], rows)
