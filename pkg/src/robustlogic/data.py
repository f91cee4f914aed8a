"""CSV datasets, feature scales, seeded splits and classification metrics."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .model import FeatureSchema, ModelError

log = logging.getLogger(__name__)


class DataError(ModelError):
    pass


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    schema: FeatureSchema

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).reshape(-1, self.schema.n)
        y = np.asarray(self.y, dtype=int).reshape(-1)
        if len(X) != len(y):
            raise DataError("row and label counts differ")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return len(self.y)

    def take(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.schema)


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Read a header-first numeric CSV whose last column is ``label``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: missing header row") from None
        expected = list(schema.names) + ["label"]
        if header != expected:
            missing = [c for c in expected if c not in header]
            detail = f"missing columns {missing}" if missing else f"column order {header} != {expected}"
            raise DataError(f"{path}: {detail}")
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(expected):
                raise DataError(f"{path}:{lineno}: expected {len(expected)} cells, got {len(rec)}")
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric cell") from None
            for j, f in enumerate(schema.features):
                if f.is_integer and not float(vals[j]).is_integer():
                    raise DataError(f"{path}:{lineno}: integer feature {f.name} has value {rec[j]}")
            if vals[-1] not in (0.0, 1.0):
                raise DataError(f"{path}:{lineno}: label must be 0 or 1")
            rows.append(vals[:-1])
            labels.append(int(vals[-1]))
    return Dataset(np.array(rows, dtype=float).reshape(-1, schema.n), np.array(labels, dtype=int), schema)


def write_csv(path, data: Dataset) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(data.schema.names) + ["label"])
        for x, y in zip(data.X, data.y):
            w.writerow([_fmt(v) for v in x] + [int(y)])


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def feature_std(data: Dataset | np.ndarray) -> np.ndarray:
    """Population standard deviation per column; zero columns become 1."""
    X = data.X if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if len(X) < 2:
        raise DataError("feature_std needs at least two rows")
    sig = X.std(axis=0)
    zero = sig == 0
    if np.any(zero):
        log.warning("constant feature columns %s: using sigma = 1", np.nonzero(zero)[0].tolist())
        sig = np.where(zero, 1.0, sig)
    return sig


def split(data: Dataset, fractions=(0.7, 0.15, 0.15), seed: int = 0):
    """Shuffled (train, test, validation) split, deterministic in ``seed``."""
    fr = np.asarray(fractions, dtype=float)
    if fr.shape != (3,) or np.any(fr < 0) or not np.isclose(fr.sum(), 1.0):
        raise DataError(f"invalid split fractions {fractions}")
    n = len(data)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fr[0] * n))
    n_test = min(int(round(fr[1] * n)), n - n_train)
    a, b = perm[:n_train], perm[n_train:n_train + n_test]
    c = perm[n_train + n_test:]
    return data.take(a), data.take(b), data.take(c)


@dataclass(frozen=True)
class Metrics:
    tpr: float
    fpr: float
    accuracy: float
    auc: float | None
    f1: float

    def to_dict(self) -> dict:
        d = {"tpr": self.tpr, "fpr": self.fpr, "accuracy": self.accuracy, "f1": self.f1}
        if self.auc is not None:
            d["auc"] = self.auc
        return d


def auc(labels, scores) -> float | None:
    """Probability a random positive outranks a random negative (ties 0.5)."""
    y = np.asarray(labels).astype(int)
    s = np.asarray(scores, dtype=float)
    pos, neg = s[y == 1], s[y == 0]
    if len(pos) == 0 or len(neg) == 0:
        return None
    # mid-ranks handle ties
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s))
    ss = s[order]
    i = 0
    while i < len(ss):
        j = i
        while j + 1 < len(ss) and ss[j + 1] == ss[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1
        i = j + 1
    u = ranks[y == 1].sum() - len(pos) * (len(pos) + 1) / 2
    return float(u / (len(pos) * len(neg)))


def metrics(labels, scores) -> Metrics:
    y = np.asarray(labels).astype(int)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape:
        raise DataError("labels and scores differ in length")
    if len(y) == 0:
        raise DataError("no samples")
    pred = s >= 0
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    tn = int(np.sum(~pred & (y == 0)))
    tpr = tp / (tp + fn) if tp + fn else 0.0
    fpr = fp / (fp + tn) if fp + tn else 0.0
    acc = (tp + tn) / len(y)
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return Metrics(tpr, fpr, acc, auc(y, s), f1)
