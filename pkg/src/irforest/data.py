"""Dataset container, CSV ingestion, and the two synthetic generators.

A Dataset is a plain bundle of immutable numpy arrays: an (n, p) float64
feature matrix, an (n,) label vector (0/1 for classification), and an (n,)
vector of dense environment ids in [0, E). Environments group rows that
were produced by one data-generating regime; the invariance penalty
compares split behavior across them.

The synthetic generators mirror two processes:

Classification (per environment e, stable flip q, environment flip u_e):
    Y  ~ Bern(label_prior)
    X1 = |Y*1_d - C1| + N1,  C1 ~ Bern_d(q),    N1 ~ N(0, noise_std^2 I_d)
    X2 = |Y*1_d - C2| + N2,  C2 ~ Bern_d(u_e),  N2 ~ N(0, noise_std^2 I_d)

Regression (per environment e, noise scale s_e):
    X1 ~ N(0, I_d)
    Y  = sum(X1) + N,        N ~ N(0, d)
    X2 = Y*1_d + Ne,         Ne ~ N(0, s_e^2 d I_d), independent per column

Features are the 2d columns [X1 | X2]; columns 0..d-1 are the stable block.
All randomness comes from a single PCG64 generator seeded by the config, so
identical configs give bit-identical datasets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import (
    EmptyFeatureSetError,
    EmptyFileError,
    InvalidLabelError,
    MissingColumnError,
    NonNumericCellError,
)


class Task(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, p) float64
    labels: np.ndarray    # (n,) float64; {0, 1} for classification
    env_ids: np.ndarray   # (n,) int64; dense ids 0..E-1, each present
    task: Task

    def __post_init__(self):
        # own copies so freezing them read-only never mutates caller arrays
        features = np.array(self.features, dtype=np.float64, order="C")
        labels = np.array(self.labels, dtype=np.float64)
        env_ids = np.array(self.env_ids, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        n = features.shape[0]
        if n < 1:
            raise ValueError("dataset must contain at least one row")
        if labels.shape != (n,) or env_ids.shape != (n,):
            raise ValueError("features, labels and env_ids must share the row count")
        if features.shape[1] < 1:
            raise EmptyFeatureSetError("a dataset needs at least one feature column")
        if not np.isfinite(features).all() or not np.isfinite(labels).all():
            raise ValueError("features and labels must be finite")
        if env_ids.min() != 0 or not np.array_equal(
            np.unique(env_ids), np.arange(env_ids.max() + 1)
        ):
            raise ValueError("env_ids must be dense integers 0..E-1, each present")
        if self.task == Task.CLASSIFICATION and not np.isin(labels, (0.0, 1.0)).all():
            raise ValueError("classification labels must be exactly 0.0 or 1.0")
        for arr in (features, labels, env_ids):
            arr.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "env_ids", env_ids)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def n_envs(self) -> int:
        return int(self.env_ids.max()) + 1


def env_partition(ds: Dataset) -> list[np.ndarray]:
    """Row indices per environment (ascending); disjoint and exhaustive."""
    return [np.flatnonzero(ds.env_ids == e) for e in range(ds.n_envs)]


def select_envs(ds: Dataset, envs: Sequence[int]) -> Dataset:
    """Restrict to the given environments, re-densifying ids in list order."""
    envs = list(envs)
    parts = []
    for new_id, e in enumerate(envs):
        rows = np.flatnonzero(ds.env_ids == e)
        if rows.size == 0:
            raise ValueError(f"environment {e} not present")
        parts.append((rows, new_id))
    rows_all = np.concatenate([r for r, _ in parts])
    new_ids = np.concatenate([np.full(r.size, i, dtype=np.int64) for r, i in parts])
    return Dataset(ds.features[rows_all], ds.labels[rows_all], new_ids, ds.task)


# ---------------------------------------------------------------------------
# synthetic generators
# ---------------------------------------------------------------------------

def _check_prob(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")


@dataclass(frozen=True)
class ClassGenConfig:
    d: int
    env_flips: tuple[float, ...]          # one flip probability per environment
    n_per_env: int
    seed: int
    label_prior: float = 0.5
    stable_flip: float = 0.3
    noise_std: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "env_flips", tuple(float(u) for u in self.env_flips))
        if self.d < 1:
            raise ValueError("d must be a positive integer")
        if self.n_per_env < 1:
            raise ValueError("n_per_env must be a positive integer")
        if not self.env_flips:
            raise ValueError("env_flips must be non-empty")
        _check_prob("label_prior", self.label_prior)
        _check_prob("stable_flip", self.stable_flip)
        for u in self.env_flips:
            _check_prob("env_flips entry", u)
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


@dataclass(frozen=True)
class RegGenConfig:
    d: int
    env_noise_stds: tuple[float, ...]     # one sigma_e per environment
    n_per_env: int
    seed: int

    def __post_init__(self):
        object.__setattr__(
            self, "env_noise_stds", tuple(float(s) for s in self.env_noise_stds)
        )
        if self.d < 1:
            raise ValueError("d must be a positive integer")
        if self.n_per_env < 1:
            raise ValueError("n_per_env must be a positive integer")
        if not self.env_noise_stds:
            raise ValueError("env_noise_stds must be non-empty")
        if any(s <= 0 for s in self.env_noise_stds):
            raise ValueError("env_noise_stds must all be positive")


def generate_classification(cfg: ClassGenConfig) -> tuple[Dataset, frozenset[int]]:
    """Draw the classification process; returns (dataset, stable column set)."""
    rng = np.random.default_rng(cfg.seed)
    n, d = cfg.n_per_env, cfg.d
    feats, labels, envs = [], [], []
    for e, u in enumerate(cfg.env_flips):
        y = (rng.random(n) < cfg.label_prior).astype(np.float64)
        c1 = (rng.random((n, d)) < cfg.stable_flip).astype(np.float64)
        n1 = rng.standard_normal((n, d)) * cfg.noise_std
        c2 = (rng.random((n, d)) < u).astype(np.float64)
        n2 = rng.standard_normal((n, d)) * cfg.noise_std
        x1 = np.abs(y[:, None] - c1) + n1
        x2 = np.abs(y[:, None] - c2) + n2
        feats.append(np.hstack([x1, x2]))
        labels.append(y)
        envs.append(np.full(n, e, dtype=np.int64))
    ds = Dataset(
        np.vstack(feats), np.concatenate(labels), np.concatenate(envs),
        Task.CLASSIFICATION,
    )
    return ds, frozenset(range(d))


def generate_regression(cfg: RegGenConfig) -> tuple[Dataset, frozenset[int]]:
    """Draw the regression process; returns (dataset, stable column set)."""
    rng = np.random.default_rng(cfg.seed)
    n, d = cfg.n_per_env, cfg.d
    feats, labels, envs = [], [], []
    for e, sigma in enumerate(cfg.env_noise_stds):
        x1 = rng.standard_normal((n, d))
        y = x1.sum(axis=1) + rng.standard_normal(n) * math.sqrt(d)
        ne = rng.standard_normal((n, d)) * (sigma * math.sqrt(d))
        x2 = y[:, None] + ne
        feats.append(np.hstack([x1, x2]))
        labels.append(y)
        envs.append(np.full(n, e, dtype=np.int64))
    ds = Dataset(
        np.vstack(feats), np.concatenate(labels), np.concatenate(envs),
        Task.REGRESSION,
    )
    return ds, frozenset(range(d))


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _parse_cell(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCellError(row, column, text) from None
    if not math.isfinite(value):
        raise NonNumericCellError(row, column, text)
    return value


def load_csv(path, label_col: str, env_col: str, task: Task) -> Dataset:
    """Read a comma-separated, headered, all-numeric file into a Dataset.

    Environment values may be arbitrary strings; they are mapped to dense
    integer ids in order of first appearance. The label and environment
    columns are excluded from the feature matrix.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(f"{path}: file is empty") from None
        for name in (label_col, env_col):
            if name not in header:
                raise MissingColumnError(name)
        label_idx = header.index(label_col)
        env_idx = header.index(env_col)
        feat_cols = [
            (i, name) for i, name in enumerate(header) if i not in (label_idx, env_idx)
        ]
        if not feat_cols:
            raise EmptyFeatureSetError(f"{path}: no feature columns besides label/env")

        rows, labels, env_keys = [], [], []
        for r, record in enumerate(reader, start=1):
            if len(record) != len(header):
                raise NonNumericCellError(r, "<row>", ",".join(record))
            label = _parse_cell(record[label_idx], r, label_col)
            if task == Task.CLASSIFICATION and label not in (0.0, 1.0):
                raise InvalidLabelError(r, label)
            labels.append(label)
            env_keys.append(record[env_idx])
            rows.append([_parse_cell(record[i], r, name) for i, name in feat_cols])
    if not rows:
        raise EmptyFileError(f"{path}: no data rows")

    id_of: dict[str, int] = {}
    env_ids = np.empty(len(env_keys), dtype=np.int64)
    for i, key in enumerate(env_keys):
        env_ids[i] = id_of.setdefault(key, len(id_of))
    return Dataset(np.asarray(rows, dtype=np.float64), np.asarray(labels), env_ids, task)


def save_csv(ds: Dataset, path) -> None:
    """Mirror of load_csv: columns f0..f{p-1}, then label, then env.

    Floats are written with repr, which round-trips float64 exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(ds.p)] + ["label", "env"])
        for i in range(ds.n):
            writer.writerow(
                [repr(v) for v in ds.features[i]]
                + [repr(float(ds.labels[i])), str(int(ds.env_ids[i]))]
            )
