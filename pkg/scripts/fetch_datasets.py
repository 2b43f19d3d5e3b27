"""Materialise the UCI benchmark CSVs under data/.

No network access is needed: the files are rebuilt from copies bundled in
installed Python packages.

  * pima, liver (bupa), vehicle, optdigits, segmentation: the ``keel-ds``
    wheel (``pip install --no-deps keel-ds``), which ships the KEEL copies
    of the UCI files.
  * wdbc: ``sklearn.datasets.load_breast_cancer`` (the UCI WDBC file).
  * blood: not bundled anywhere; pass ``--blood transfusion.data`` with the
    file downloaded from the UCI repository.

OptDigits in KEEL is the UCI training file (3823 rows) followed by the UCI
test file (1797 rows), so the predefined split is recovered by position.
KEEL's segmentation is the shuffled 2310-row union; we rebuild a 210/2100
split with 30 training samples per class, matching the UCI file layout.
"""

import argparse
import csv
from importlib import resources
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "data"


def read_keel(name):
    text = resources.files("keel_ds").joinpath(f"data/balanced/raw/{name}.dat").read_text()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([c.strip() for c in line.split(",")])
    return rows


def write(path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def header_for(rows):
    return [f"x{j}" for j in range(len(rows[0]) - 1)] + ["label"]


def fetch_keel(out):
    for name, target in [("pima", "pima"), ("bupa", "liver"), ("vehicle", "vehicle")]:
        rows = read_keel(name)
        write(out / f"{target}.csv", header_for(rows), rows)

    rows = read_keel("optdigits")
    assert len(rows) == 5620
    write(out / "optdigits_train.csv", header_for(rows), rows[:3823])
    write(out / "optdigits_test.csv", header_for(rows), rows[3823:])

    rows = read_keel("segment")
    labels = np.array([r[-1] for r in rows])
    rng = np.random.default_rng(0)
    train_idx = []
    for c in sorted(set(labels)):
        idx = np.flatnonzero(labels == c)
        train_idx.extend(rng.choice(idx, 30, replace=False))
    mask = np.zeros(len(rows), bool)
    mask[train_idx] = True
    write(out / "segmentation_train.csv", header_for(rows), [r for r, m in zip(rows, mask) if m])
    write(out / "segmentation_test.csv", header_for(rows), [r for r, m in zip(rows, mask) if not m])


def fetch_wdbc(out):
    from sklearn.datasets import load_breast_cancer

    d = load_breast_cancer()
    # sklearn codes malignant as 0; keep the UCI tokens
    tokens = np.where(d.target == 0, "M", "B")
    rows = [[repr(float(v)) for v in x] + [t] for x, t in zip(d.data, tokens)]
    write(out / "wdbc.csv", header_for(rows), rows)


def convert_blood(src, out):
    with open(src, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not all(_num(c) for c in rows[0]):
        rows = rows[1:]
    write(out / "blood.csv", header_for(rows), rows)


def _num(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=OUT)
    ap.add_argument("--blood", type=Path, help="path to UCI transfusion.data")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    fetch_keel(args.out)
    fetch_wdbc(args.out)
    if args.blood:
        convert_blood(args.blood, args.out)
    elif not (args.out / "blood.csv").exists():
        print("blood.csv missing: download transfusion.data from UCI and rerun with --blood")


if __name__ == "__main__":
    main()
