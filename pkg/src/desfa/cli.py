"""Command-line entry point: ``desfa run | demo-enn | table``."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from . import constants as K
from .competence import enn_keep_mask
from .datasets import DATASET_NAMES, generate_two_gaussians, resolve_dataset
from .errors import ValidationError
from .evaluation import (DEFAULT_METHODS, REPORT_FILE, ExperimentConfig, load_report,
                         render_loo_table, render_accuracy_table, render_cost_table, run_experiment, write_report)

MANIFEST_FILE = "manifest.json"
TRACE_FILE = "trace.jsonl"


def default_out() -> Path:
    return Path(os.environ.get("DESFA_OUT", "results"))


def _csv_list(text, cast=str):
    return tuple(cast(t.strip()) for t in text.split(",") if t.strip())


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def cmd_run(args) -> int:
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text())
        config = ExperimentConfig.from_dict(manifest["config"])
    else:
        config = ExperimentConfig(
            dataset=args.dataset,
            methods=_csv_list(args.methods) if args.methods else DEFAULT_METHODS,
            k=args.k,
            enn_ks=_csv_list(args.enn_k, int),
            ensemble_size=args.ensemble_size,
            iterations=args.iterations,
            seed=args.seed,
            epochs=args.epochs,
            stratified=not args.no_stratify,
            data_dir=args.data_dir,
        )
    source = resolve_dataset(config.dataset, config.data_dir)
    out = Path(args.out) if args.out else default_out()
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    if args.trace:
        with (out / TRACE_FILE).open("w") as trace:
            report = run_experiment(config, trace=trace, source=source)
    else:
        report = run_experiment(config, jobs=args.jobs, source=source)
    artifacts = write_report(report, out)
    if args.trace:
        artifacts["trace"] = str(out / TRACE_FILE)
    manifest = {
        "tool": "desfa",
        "version": __version__,
        "config": config.to_dict(),
        "seeds": report.seeds,
        "data_files": {f: _sha256(f) for f in source.files},
        "artifacts": artifacts,
        "started": started,
        "finished": _now(),
    }
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2) + "\n")
    print(render_accuracy_table([report]))
    print(f"\nreport written to {out}")
    return 0


def cmd_demo_enn(args) -> int:
    data = generate_two_gaussians(args.n_per_class, variance=args.variance, seed=args.seed)
    out = Path(args.out) if args.out else default_out() / "demo_enn"
    out.mkdir(parents=True, exist_ok=True)
    header = "x0,x1,label"
    rows = [f"{x[0]!r},{x[1]!r},{c}" for x, c in zip(data.features.tolist(), data.labels)]
    (out / "original.csv").write_text("\n".join([header] + rows) + "\n")
    summary = {"n": data.n_samples, "variance": args.variance, "seed": args.seed, "kept": {}}
    for k in _csv_list(args.enn_k, int):
        keep = enn_keep_mask(data, k)
        lines = [header + ",kept"] + [f"{r},{int(m)}" for r, m in zip(rows, keep)]
        (out / f"enn_k{k}.csv").write_text("\n".join(lines) + "\n")
        summary["kept"][str(k)] = int(keep.sum())
        print(f"ENN k={k}: kept {int(keep.sum())} of {data.n_samples}")
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return 0


def _order(report):
    name = report.dataset
    return (DATASET_NAMES.index(name) if name in DATASET_NAMES else len(DATASET_NAMES), name)


def cmd_table(args) -> int:
    root = Path(args.reports)
    paths = sorted(root.rglob(REPORT_FILE)) if root.is_dir() else []
    if not paths:
        print(f"no {REPORT_FILE} found under {root}", file=sys.stderr)
        return 2
    reports = sorted((load_report(p.parent) for p in paths), key=_order)
    parts = []
    if args.which in ("loo", "all"):
        parts.append("Leave-one-out vs. selection\n" + render_loo_table(reports))
    if args.which in ("accuracy", "all"):
        parts.append("Comparative accuracy, mean(std)\n" + render_accuracy_table(reports))
    if args.which in ("cost", "all"):
        parts.append("Processing cost\n" + render_cost_table(reports))
    text = "\n\n".join(parts) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="desfa", description="Dynamic ensemble selection benchmarks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the repeated-split experiment on one dataset")
    r.add_argument("--dataset", default="pima", help=f"one of {', '.join(DATASET_NAMES)} or a CSV path")
    r.add_argument("--methods", help="comma list: des-fa, des-fa-<k>, aknn-knora-e, knora-e, "
                                     "static, oracle, single-best")
    r.add_argument("--k", type=int, default=K.NEIGHBORS)
    r.add_argument("--enn-k", default=",".join(map(str, K.ENN_KS)))
    r.add_argument("--ensemble-size", type=int, default=K.ENSEMBLE_SIZE)
    r.add_argument("--iterations", type=int, default=K.ITERATIONS)
    r.add_argument("--epochs", type=int, default=K.PERCEPTRON_EPOCHS)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--no-stratify", action="store_true")
    r.add_argument("--data-dir")
    r.add_argument("--out")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--trace", action="store_true", help=f"write per-query records to {TRACE_FILE}")
    r.add_argument("--manifest", help="re-run the configuration recorded in a manifest.json")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("demo-enn", help="ENN on two Gaussian classes, CSV output for plotting")
    d.add_argument("--n-per-class", type=int, default=200)
    d.add_argument("--variance", type=float, default=K.GAUSS_VARIANCE)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--enn-k", default="1,3,5")
    d.add_argument("--out")
    d.set_defaults(func=cmd_demo_enn)

    t = sub.add_parser("table", help="render stored reports as comparison tables")
    t.add_argument("--reports", default=str(default_out()))
    t.add_argument("--which", choices=["loo", "accuracy", "cost", "all"], default="all")
    t.add_argument("--out")
    t.set_defaults(func=cmd_table)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
