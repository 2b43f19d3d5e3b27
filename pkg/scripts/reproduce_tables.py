"""Run the default protocol on every available benchmark and print the tables.

    python scripts/reproduce_tables.py --out results/ --jobs 4

One sub-directory per dataset receives report.json, scores.csv, timing.json
and manifest.json (via ``desfa run``); the combined tables go to
``<out>/tables.txt``. Datasets whose files are missing are skipped with a
note.
"""

import argparse
import sys
from pathlib import Path

from desfa.cli import main as desfa
from desfa.datasets import DATASET_NAMES, DatasetUnavailableError, resolve_dataset


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--datasets", default=",".join(DATASET_NAMES))
    args = p.parse_args(argv)

    out = Path(args.out)
    for name in args.datasets.split(","):
        try:
            resolve_dataset(name)
        except DatasetUnavailableError as exc:
            print(f"skipping {name}: {exc}", file=sys.stderr)
            continue
        print(f"== {name}", flush=True)
        code = desfa(["run", "--dataset", name, "--seed", str(args.seed), "--jobs", str(args.jobs),
                      "--out", str(out / name)])
        if code:
            return code
    return desfa(["table", "--reports", str(out), "--out", str(out / "tables.txt")])


if __name__ == "__main__":
    sys.exit(main())
