"""Datasets: CSV ingestion, synthetic generators, splits and the name registry."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import constants as K
from .errors import ParseError, ValidationError


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix plus dense integer labels in ``[0, n_classes)``.

    Arrays are copied to read-only float64/int64 on construction; rows of
    ``features`` and ``labels`` only ever move together (see :meth:`subset`).
    """

    name: str
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels, dtype=np.int64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError(f"{self.name}: features must be a non-empty N x D matrix")
        if y.shape != (X.shape[0],):
            raise ValidationError(f"{self.name}: {y.shape[0]} labels for {X.shape[0]} rows")
        if self.n_classes < 2:
            raise ValidationError(f"{self.name}: need at least 2 classes, got {self.n_classes}")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValidationError(f"{self.name}: labels outside [0, {self.n_classes})")
        if not np.all(np.isfinite(X)):
            raise ValidationError(f"{self.name}: non-finite feature values")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def label_names(self) -> list[str]:
        return self.metadata.get("label_names", [str(c) for c in range(self.n_classes)])

    def subset(self, indices, name=None) -> Dataset:
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(name or self.name, self.features[indices], self.labels[indices],
                       self.n_classes, dict(self.metadata))

    def with_features(self, features) -> Dataset:
        return Dataset(self.name, features, self.labels, self.n_classes, dict(self.metadata))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def concat(a: Dataset, b: Dataset, name=None) -> Dataset:
    if a.n_features != b.n_features or a.n_classes != b.n_classes:
        raise ValidationError("cannot concatenate datasets of different shape")
    return Dataset(name or a.name, np.vstack([a.features, b.features]),
                   np.concatenate([a.labels, b.labels]), a.n_classes, dict(a.metadata))


# --------------------------------------------------------------------- CSV

_CLASSES_DIRECTIVE = "# classes:"


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_csv(path, label_column="last", name=None) -> Dataset:
    """Read a comma-separated file with one class token per row.

    A non-numeric first data row is treated as a header. Class tokens are
    mapped to ``0..C-1`` by first appearance unless the file carries a
    ``# classes: a,b,...`` line (written by :func:`save_csv`).
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    class_order = None
    rows = []
    with path.open(newline="") as fh:
        for lineno, raw in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in raw]
            if not cells or all(c == "" for c in cells):
                continue
            if cells[0].startswith("#"):
                line = ",".join(raw).strip()
                if line.startswith(_CLASSES_DIRECTIVE):
                    class_order = [t.strip() for t in line[len(_CLASSES_DIRECTIVE):].split(",")]
                continue
            rows.append((lineno, cells))
    if not rows:
        raise ParseError(f"{path}: no data rows")

    width = len(rows[0][1])
    if width < 2:
        raise ParseError("need at least one feature and a label column", rows[0][0])
    col = width - 1 if label_column == "last" else int(label_column)
    if not -width <= col < width:
        raise ValidationError(f"label column {label_column} out of range for {width} columns")
    col %= width
    feat_cols = [j for j in range(width) if j != col]

    first_feats = [rows[0][1][j] for j in feat_cols]
    if not all(_is_number(t) for t in first_feats):
        rows = rows[1:]  # header
    if not rows:
        raise ParseError(f"{path}: header but no data rows")

    mapping = {t: i for i, t in enumerate(class_order)} if class_order else {}
    X = np.empty((len(rows), len(feat_cols)))
    y = np.empty(len(rows), dtype=np.int64)
    for r, (lineno, cells) in enumerate(rows):
        if len(cells) != width:
            raise ParseError(f"expected {width} columns, found {len(cells)}", lineno)
        for out_j, j in enumerate(feat_cols):
            try:
                X[r, out_j] = float(cells[j])
            except ValueError:
                raise ParseError(f"non-numeric feature value {cells[j]!r} in column {j + 1}",
                                 lineno) from None
        token = cells[col]
        if token not in mapping:
            if class_order:
                raise ParseError(f"class {token!r} not declared in '# classes:' line", lineno)
            mapping[token] = len(mapping)
        y[r] = mapping[token]
    if not np.all(np.isfinite(X)):
        raise ParseError(f"{path}: non-finite feature value")
    names = list(mapping)
    if len(np.unique(y)) < 2:
        raise ValidationError(f"{path}: only one class present ({names[y[0]]!r})")
    return Dataset(name or path.stem, X, y, len(names), {"label_names": names, "source": str(path)})


def save_csv(dataset: Dataset, path) -> Path:
    """Write ``dataset`` so that :func:`load_csv` reproduces it exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = dataset.label_names
    with path.open("w", newline="") as fh:
        fh.write(f"{_CLASSES_DIRECTIVE} {','.join(names)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(dataset.n_features)] + ["label"])
        for x, c in zip(dataset.features, dataset.labels):
            w.writerow([repr(float(v)) for v in x] + [names[c]])
    return path


# -------------------------------------------------------------- generators

def generate_two_gaussians(n_per_class=200, mu1=K.GAUSS_MU1, mu2=K.GAUSS_MU2,
                           variance=K.GAUSS_VARIANCE, seed=0) -> Dataset:
    if n_per_class < 1:
        raise ValidationError("n_per_class must be >= 1")
    if not variance > 0:
        raise ValidationError(f"variance must be positive, got {variance}")
    rng = np.random.default_rng(seed)
    sd = math.sqrt(variance)
    parts = [np.asarray(mu, float) + sd * rng.standard_normal((n_per_class, 2)) for mu in (mu1, mu2)]
    y = np.repeat([0, 1], n_per_class)
    return Dataset("two_gaussians", np.vstack(parts), y, 2,
                   {"generator": "two_gaussians", "seed": seed, "variance": variance})


def _balanced_counts(n_total):
    if n_total < 2:
        raise ValidationError(f"n_total must be >= 2, got {n_total}")
    return n_total - n_total // 2, n_total // 2


def generate_banana(n_total=600, noise=K.BANANA_NOISE, seed=0) -> Dataset:
    """Two interleaved crescents on arcs of radius ``BANANA_RADIUS``."""
    if not noise > 0:
        raise ValidationError(f"noise must be positive, got {noise}")
    n0, n1 = _balanced_counts(n_total)
    rng = np.random.default_rng(seed)
    lo, hi = K.BANANA_ARC
    r = K.BANANA_RADIUS

    def arc(n):
        theta = rng.uniform(lo, hi, n)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    a = arc(n0) + noise * rng.standard_normal((n0, 2))
    b = -arc(n1) + np.asarray(K.BANANA_SHIFT) + noise * rng.standard_normal((n1, 2))
    y = np.repeat([0, 1], [n0, n1])
    return Dataset("banana", np.vstack([a, b]), y, 2,
                   {"generator": "banana", "seed": seed, "noise": noise})


def generate_lithuanian(n_total=600, seed=0, noise=K.LITHUANIAN_NOISE) -> Dataset:
    """Two parallel parabolic ridges that overlap near the boundary."""
    if not noise > 0:
        raise ValidationError(f"noise must be positive, got {noise}")
    n0, n1 = _balanced_counts(n_total)
    rng = np.random.default_rng(seed)

    def ridge(n, offset):
        t = rng.uniform(-K.LITHUANIAN_SPAN, K.LITHUANIAN_SPAN, n)
        pts = np.column_stack([t, K.LITHUANIAN_CURVATURE * t ** 2 + offset])
        return pts + noise * rng.standard_normal((n, 2))

    X = np.vstack([ridge(n0, 0.0), ridge(n1, K.LITHUANIAN_OFFSET)])
    y = np.repeat([0, 1], [n0, n1])
    return Dataset("lithuanian", X, y, 2, {"generator": "lithuanian", "seed": seed})


# ------------------------------------------------------------------ splits

@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = K.TRAIN_FRACTION
    validation_fraction_of_train: float = K.VALIDATION_FRACTION
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        for f in (self.train_fraction, self.validation_fraction_of_train):
            if not 0.0 < f < 1.0:
                raise ValidationError(f"split fractions must lie in (0, 1), got {f}")


def _allocate(counts, total):
    """Largest-remainder apportionment of ``total`` over ``counts``."""
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.sum()
    quota = counts * (total / n)
    alloc = np.floor(quota).astype(np.int64)
    rest = total - alloc.sum()
    if rest > 0:
        # stable sort: equal remainders go to the lower class index
        order = np.argsort(-(quota - alloc), kind="stable")
        alloc[order[:rest]] += 1
    return alloc


def _partition(dataset, fraction_second, rng, stratified, min_per_class, take_floor):
    """Split indices into (first, second) with |second| = floor or ceil of fraction * N."""
    n = dataset.n_samples
    exact = fraction_second * n
    n_second = math.floor(exact + 1e-9) if take_floor else math.ceil(exact - 1e-9)
    if not stratified:
        perm = rng.permutation(n)
        if n_second < 1 or n_second >= n:
            raise ValidationError(f"{dataset.name}: split would leave an empty part")
        return np.sort(perm[n_second:]), np.sort(perm[:n_second])
    counts = dataset.class_counts()
    present = counts > 0
    alloc = np.zeros_like(counts)
    alloc[present] = _allocate(counts[present], n_second)
    for c in np.flatnonzero(present):
        if min_per_class and (alloc[c] < 1 or counts[c] - alloc[c] < 1):
            raise ValidationError(
                f"{dataset.name}: class {dataset.label_names[c]!r} has {counts[c]} samples, "
                "too few to stratify")
    first, second = [], []
    for c in range(dataset.n_classes):
        idx = np.flatnonzero(dataset.labels == c)
        if idx.size == 0:
            continue
        idx = idx[rng.permutation(idx.size)]
        second.append(idx[:alloc[c]])
        first.append(idx[alloc[c]:])
    return np.sort(np.concatenate(first)), np.sort(np.concatenate(second))


def split_train_validation(dataset, validation_fraction=K.VALIDATION_FRACTION, seed=0,
                           stratified=True, rng=None):
    """Hold out ``floor(validation_fraction * N)`` samples as validation."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    t_idx, v_idx = _partition(dataset, validation_fraction, rng, stratified,
                              min_per_class=True, take_floor=True)
    return dataset.subset(t_idx, f"{dataset.name}/train"), dataset.subset(v_idx, f"{dataset.name}/validation")


def split(dataset: Dataset, spec: SplitSpec):
    """Return ``(train, validation, test)``.

    The train+validation part has ``ceil(train_fraction * N)`` samples; the
    validation part takes ``floor(validation_fraction * |train+validation|)``.
    """
    rng = np.random.default_rng(spec.seed)
    test_fraction = 1.0 - spec.train_fraction
    tv_idx, test_idx = _partition(dataset, test_fraction, rng, spec.stratified,
                                  min_per_class=True, take_floor=True)
    trainval = dataset.subset(tv_idx)
    train, validation = split_train_validation(trainval, spec.validation_fraction_of_train,
                                               stratified=spec.stratified, rng=rng)
    return train, validation, dataset.subset(test_idx, f"{dataset.name}/test")


# ---------------------------------------------------------------- registry

@dataclass(frozen=True)
class DataSource:
    """A named benchmark: either one dataset to split or a predefined train/test pair."""

    name: str
    data: Dataset | None = None
    train: Dataset | None = None
    test: Dataset | None = None
    files: tuple = ()

    @property
    def predefined(self) -> bool:
        return self.train is not None

    def full(self) -> Dataset:
        if self.data is not None:
            return self.data
        return concat(self.train, self.test, self.name)


class UnknownDatasetError(ValidationError):
    pass


class DatasetUnavailableError(ValidationError):
    pass


UCI_FILES = {
    "pima": ("pima.csv",),
    "liver": ("liver.csv",),
    "wdbc": ("wdbc.csv",),
    "blood": ("blood.csv",),
    "vehicle": ("vehicle.csv",),
    "optdigits": ("optdigits_train.csv", "optdigits_test.csv"),
    "segmentation": ("segmentation_train.csv", "segmentation_test.csv"),
}
GENERATORS = {
    "banana": lambda: generate_banana(600, seed=0),
    "lithuanian": lambda: generate_lithuanian(600, seed=0),
}
DATASET_NAMES = ("pima", "liver", "wdbc", "optdigits", "blood", "segmentation",
                 "banana", "vehicle", "lithuanian")

_REPO_DATA = Path(__file__).resolve().parents[2] / "data"


def data_dir() -> Path:
    return Path(os.environ.get("DESFA_DATA_DIR", _REPO_DATA))


def resolve_dataset(ref: str, directory=None) -> DataSource:
    """Look up a registry name, or load ``ref`` as a CSV path."""
    directory = Path(directory) if directory is not None else data_dir()
    key = ref.lower()
    if key in GENERATORS:
        return DataSource(key, data=GENERATORS[key]())
    if key in UCI_FILES:
        paths = [directory / f for f in UCI_FILES[key]]
        missing = [p for p in paths if not p.is_file()]
        if missing:
            raise DatasetUnavailableError(
                f"dataset {key!r} needs {', '.join(str(p) for p in missing)}; "
                "see data/README.md for download instructions")
        loaded = [load_csv(p, name=key) for p in paths]
        if len(loaded) == 1:
            return DataSource(key, data=loaded[0], files=tuple(map(str, paths)))
        train, test = loaded
        train, test = _align_labels(train, test)
        return DataSource(key, train=train, test=test, files=tuple(map(str, paths)))
    path = Path(ref)
    if path.is_file():
        return DataSource(path.stem, data=load_csv(path), files=(str(path),))
    raise UnknownDatasetError(f"unknown dataset {ref!r}; known: {', '.join(DATASET_NAMES)}")


def _align_labels(train: Dataset, test: Dataset):
    """Remap ``test`` label ids onto ``train``'s token order."""
    names = list(train.label_names)
    for t in test.label_names:
        if t not in names:
            names.append(t)
    lookup = np.array([names.index(t) for t in test.label_names])
    meta = {**train.metadata, "label_names": names}
    train = Dataset(train.name, train.features, train.labels, len(names), meta)
    test = Dataset(test.name, test.features, lookup[test.labels], len(names),
                   {**test.metadata, "label_names": names})
    return train, test
