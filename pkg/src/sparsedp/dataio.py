"""CSV ingestion and seeded synthetic datasets."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numkit import Rng

log = logging.getLogger(__name__)


class DataError(Exception):
    """Base class for dataset problems (CLI exit code 3)."""


class MalformedHeaderError(DataError):
    pass


class MissingTargetError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


@dataclass
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    column_names: list[str]
    encoding_map: dict[str, dict[str, int]] = field(default_factory=dict)
    dropped_rows: int = 0
    standardization: dict[str, tuple[float, float]] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.features.ndim != 2 or self.targets.ndim != 1:
            raise DataError("features must be 2-D and targets 1-D")
        if self.features.shape[0] != self.targets.shape[0]:
            raise DataError("features and targets have different row counts")
        if self.features.shape[0] < 1:
            raise EmptyDatasetError("dataset has no rows")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.targets))):
            raise DataError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def replace_record(self, i: int, x, y: float) -> "Dataset":
        """Copy of the dataset with record ``i`` swapped for ``(x, y)``."""
        feats = self.features.copy()
        targs = self.targets.copy()
        feats[i] = x
        targs[i] = y
        return Dataset(feats, targs, list(self.column_names), self.encoding_map)


def _parse_float(text: str) -> float | None:
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_csv(
    path,
    target_column: str,
    drop_columns=(),
    categorical_columns=(),
    standardize: bool = True,
) -> Dataset:
    """Read a headered, comma-separated UTF-8 file into a :class:`Dataset`.

    Dropped columns are removed first. Categorical columns are encoded by
    order of first appearance among the retained rows. Rows with a missing
    or unparseable cell, or the wrong number of cells, are skipped and
    counted in ``dropped_rows``. With ``standardize`` each feature column is
    shifted and scaled to zero mean and unit variance.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedHeaderError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if not header or any(not h for h in header) or len(set(header)) != len(header):
            raise MalformedHeaderError(f"{path}: header has empty or duplicate column names")
        if target_column not in header:
            raise MissingTargetError(f"{path}: target column {target_column!r} not found")
        drop = set(drop_columns)
        categorical = [c for c in categorical_columns if c not in drop]
        for c in list(drop) + categorical:
            if c not in header:
                raise MalformedHeaderError(f"{path}: column {c!r} not in header")
        if target_column in drop:
            raise MissingTargetError("target column cannot be dropped")
        keep = [c for c in header if c not in drop]
        feature_cols = [c for c in keep if c != target_column]
        pos = {c: header.index(c) for c in keep}
        cat_set = set(categorical)

        rows = []
        dropped = 0
        for record in reader:
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != len(header):
                dropped += 1
                continue
            cells = {c: record[pos[c]].strip() for c in keep}
            if any(cells[c] == "" for c in keep):
                dropped += 1
                continue
            if any(c not in cat_set and _parse_float(cells[c]) is None for c in keep):
                dropped += 1
                continue
            rows.append(cells)

    if not rows:
        raise EmptyDatasetError(f"{path}: no usable rows ({dropped} dropped)")
    if dropped:
        log.warning("%s: dropped %d malformed row(s)", path, dropped)

    encoding = {c: {} for c in categorical}
    for cells in rows:
        for c in categorical:
            encoding[c].setdefault(cells[c], len(encoding[c]))

    def value(cells, c):
        return float(encoding[c][cells[c]]) if c in cat_set else float(cells[c])

    x = np.array([[value(r, c) for c in feature_cols] for r in rows], dtype=np.float64)
    x = x.reshape(len(rows), len(feature_cols))
    y = np.array([value(r, target_column) for r in rows], dtype=np.float64)

    stats = None
    if standardize:
        x, stats = standardize_columns(x, feature_cols)
    return Dataset(x, y, feature_cols, encoding, dropped, stats)


def standardize_columns(x: np.ndarray, names):
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    stats = {name: (float(m), float(s)) for name, m, s in zip(names, mean, safe)}
    return (x - mean) / safe, stats


def _conditioned_design(rng: Rng, n: int, n_x: int, condition_target: float) -> np.ndarray:
    g = rng.standard_normal((n, n_x))
    u, _, vt = np.linalg.svd(g, full_matrices=False)
    # singular values of X / sqrt(n) run geometrically from 1 down to 1/condition
    s = np.geomspace(1.0, 1.0 / condition_target, n_x) if n_x > 1 else np.ones(1)
    return np.sqrt(n) * (u * s) @ vt


def _unit_vector(rng: Rng, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def synthesize_regression(
    rng: Rng, n: int, n_x: int, noise_std: float = 1.0, condition_target: float = 10.0
) -> tuple[Dataset, np.ndarray]:
    """Linear-Gaussian regression data with a controlled design condition number.

    Returns the dataset and the true parameter (a uniform draw from the unit
    sphere); targets are ``X theta_true`` plus N(0, noise_std**2) noise.
    """
    if n < n_x:
        raise ValueError(f"need n >= n_x, got n={n}, n_x={n_x}")
    if n_x < 1:
        raise ValueError("n_x must be positive")
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    if condition_target < 1:
        raise ValueError("condition_target must be at least 1")
    x = _conditioned_design(rng.child("design"), n, n_x, condition_target)
    theta = _unit_vector(rng.child("theta"), n_x)
    y = x @ theta + noise_std * rng.child("noise").standard_normal(n)
    names = [f"x{j}" for j in range(n_x)]
    return Dataset(x, y, names), theta


def synthesize_classification(
    rng: Rng, n: int, n_x: int, flip_prob: float = 0.05, condition_target: float = 1.0
) -> tuple[Dataset, np.ndarray]:
    """Labels in {-1, +1} from a random separating direction, with label flips."""
    if n < 1 or n_x < 1:
        raise ValueError("n and n_x must be positive")
    if not 0 <= flip_prob < 0.5:
        raise ValueError("flip_prob must be in [0, 0.5)")
    x = _conditioned_design(rng.child("design"), max(n, n_x), n_x, condition_target)[:n]
    theta = _unit_vector(rng.child("theta"), n_x)
    labels = np.where(x @ theta >= 0, 1.0, -1.0)
    flips = rng.child("flips").random(n) < flip_prob
    labels[flips] *= -1
    names = [f"x{j}" for j in range(n_x)]
    return Dataset(x, labels, names), theta
