"""Logic-ensemble classifier: schema, atoms, clauses and evaluation.

A logic ensemble is a list of clauses ``B_1 and ... and B_m -> R``. Each atom
``B`` has the form ``coeff * x[feature] < threshold``; the classifier score is
the sum of the activations ``R`` of all satisfied clauses.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

CONTINUOUS = "continuous"
INTEGER = "integer"
KINDS = (CONTINUOUS, INTEGER)
MONOTONE = ("none", "increasing", "decreasing")


class ModelError(ValueError):
    """Malformed model, schema or input vector."""


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str = CONTINUOUS
    lower_bound: float | None = None
    upper_bound: float | None = None
    low_cost: bool = False
    monotone: str = "none"
    group: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.monotone not in MONOTONE:
            raise ModelError(f"feature {self.name!r}: unknown monotone {self.monotone!r}")
        lo, hi = self.lower_bound, self.upper_bound
        if lo is not None and hi is not None and lo > hi:
            raise ModelError(f"feature {self.name!r}: lower_bound > upper_bound")

    @property
    def is_integer(self) -> bool:
        return self.kind == INTEGER

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.lower_bound is not None:
            d["lower_bound"] = self.lower_bound
        if self.upper_bound is not None:
            d["upper_bound"] = self.upper_bound
        if self.low_cost:
            d["low_cost"] = True
        if self.monotone != "none":
            d["monotone"] = self.monotone
        if self.group is not None:
            d["group"] = self.group
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Feature":
        if "name" not in d:
            raise ModelError(f"feature entry without name: {d!r}")
        return cls(
            name=str(d["name"]),
            kind=d.get("kind", CONTINUOUS),
            lower_bound=_opt_float(d.get("lower_bound")),
            upper_bound=_opt_float(d.get("upper_bound")),
            low_cost=bool(d.get("low_cost", False)),
            monotone=d.get("monotone", "none"),
            group=d.get("group"),
        )


def _opt_float(v):
    return None if v is None else float(v)


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ModelError("feature names must be unique")

    @property
    def n(self) -> int:
        return len(self.features)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index(self, name_or_index) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            i = int(name_or_index)
            if not 0 <= i < self.n:
                raise ModelError(f"feature index {i} out of range")
            return i
        for i, f in enumerate(self.features):
            if f.name == name_or_index:
                return i
        raise ModelError(f"unknown feature {name_or_index!r}")

    def groups(self) -> dict[str, tuple[int, ...]]:
        out: dict[str, list[int]] = {}
        for i, f in enumerate(self.features):
            if f.group is not None:
                out.setdefault(f.group, []).append(i)
        return {g: tuple(ix) for g, ix in out.items()}

    def low_cost_features(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.features) if f.low_cost)

    def to_dict(self) -> dict:
        return {"features": [f.to_dict() for f in self.features]}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        feats = d["features"] if isinstance(d, dict) else d
        return cls(tuple(Feature.from_dict(f) for f in feats))

    @classmethod
    def simple(cls, n: int, kind: str = CONTINUOUS, lower=None, upper=None) -> "FeatureSchema":
        return cls(tuple(Feature(f"x{i}", kind, lower, upper) for i in range(n)))


@dataclass(frozen=True)
class Atom:
    """``coeff * x[feature] < threshold``."""

    coeff: float
    feature: int
    threshold: float


@dataclass(frozen=True)
class Predicate:
    """Canonical atom ``x[feature] < eta``; ``positive=False`` means its negation."""

    feature: int
    eta: float
    positive: bool = True

    def holds(self, x) -> bool:
        t = x[self.feature] < self.eta
        return bool(t) if self.positive else not t


@dataclass(frozen=True)
class Clause:
    atoms: tuple[Atom, ...]
    activation: float

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))


def eval_atom(atom: Atom, x) -> bool:
    return bool(atom.coeff * x[atom.feature] < atom.threshold)


def _integer_threshold(coeff: float, threshold: float) -> int:
    """Smallest integer k with ``coeff * k >= threshold`` (coeff > 0), checked
    against floating-point evaluation so the integer predicate is exact."""
    k = math.ceil(threshold / coeff)
    while coeff * (k - 1) >= threshold:
        k -= 1
    while not coeff * k >= threshold:
        k += 1
    return k


def _integer_threshold_neg(coeff: float, threshold: float) -> int:
    """Smallest integer k with ``coeff * k < threshold`` (coeff < 0)."""
    k = math.floor(threshold / coeff) + 1
    while coeff * (k - 1) < threshold:
        k -= 1
    while not coeff * k < threshold:
        k += 1
    return k


def canonicalize_atom(atom: Atom, schema: FeatureSchema | None = None) -> Predicate | bool:
    """Rewrite an atom as a predicate ``x_j < eta`` (possibly negated).

    Negative coefficients give ``not (x_j < eta)``. On continuous features this
    reads ``x_j >= eta`` while the atom means ``x_j > eta``; the two differ only
    on the boundary point. Integer features are tightened exactly.
    """
    a, b, j = atom.coeff, atom.threshold, atom.feature
    if a == 0:
        return bool(0 < b)
    integer = schema is not None and schema.features[j].is_integer
    if a > 0:
        eta = float(_integer_threshold(a, b)) if integer else b / a
        return Predicate(j, eta, True)
    eta = float(_integer_threshold_neg(a, b)) if integer else b / a
    return Predicate(j, eta, False)


@dataclass(frozen=True)
class LogicEnsemble:
    schema: FeatureSchema
    clauses: tuple[Clause, ...] = ()
    round_boundaries: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(self.clauses))
        object.__setattr__(self, "round_boundaries", tuple(int(b) for b in self.round_boundaries))
        rb = self.round_boundaries
        if rb:
            if any(b2 <= b1 for b1, b2 in zip(rb, rb[1:])) or rb[0] <= 0 and len(self.clauses) > 0:
                raise ModelError("round_boundaries must be strictly increasing")
            if rb[-1] != len(self.clauses):
                raise ModelError("last round boundary must equal the clause count")
        elif self.clauses:
            object.__setattr__(self, "round_boundaries", (len(self.clauses),))
        n = self.schema.n
        for c in self.clauses:
            for a in c.atoms:
                if not 0 <= a.feature < n:
                    raise ModelError(f"atom references feature {a.feature} outside schema")

    def __len__(self) -> int:
        return len(self.clauses)

    @property
    def n_rounds(self) -> int:
        return len(self.round_boundaries)

    def round_ranges(self) -> list[tuple[int, int]]:
        starts = (0,) + self.round_boundaries[:-1]
        return list(zip(starts, self.round_boundaries))

    def round_of(self, clause_index: int) -> int:
        for r, (s, e) in enumerate(self.round_ranges()):
            if s <= clause_index < e:
                return r
        raise IndexError(clause_index)

    @property
    def activations(self) -> np.ndarray:
        return np.array([c.activation for c in self.clauses], dtype=float)

    def with_activations(self, R: Sequence[float]) -> "LogicEnsemble":
        if len(R) != len(self.clauses):
            raise ModelError("activation vector length mismatch")
        clauses = tuple(replace(c, activation=float(r)) for c, r in zip(self.clauses, R))
        return replace(self, clauses=clauses)

    def append_round(self, clauses: Iterable[Clause]) -> "LogicEnsemble":
        new = tuple(clauses)
        if not new:
            return self
        all_clauses = self.clauses + new
        return LogicEnsemble(self.schema, all_clauses, self.round_boundaries + (len(all_clauses),))

    def subset(self, start: int, end: int) -> "LogicEnsemble":
        """Sub-ensemble made of clauses ``start:end`` (one round boundary)."""
        return LogicEnsemble(self.schema, self.clauses[start:end], (end - start,) if end > start else ())

    # evaluation -------------------------------------------------------------

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.schema.n:
            raise ModelError(f"expected a vector of length {self.schema.n}, got shape {x.shape}")
        return x

    def active_mask(self, X) -> np.ndarray:
        """Boolean matrix (rows x clauses) of satisfied clause bodies."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.schema.n:
            raise ModelError(f"expected a matrix with {self.schema.n} columns, got shape {X.shape}")
        out = np.ones((X.shape[0], len(self.clauses)), dtype=bool)
        for k, c in enumerate(self.clauses):
            col = out[:, k]
            for a in c.atoms:
                col &= a.coeff * X[:, a.feature] < a.threshold
        return out

    def score_batch(self, X) -> np.ndarray:
        mask = self.active_mask(X)
        R = self.activations
        # clause-order summation keeps scores identical to `score`
        s = np.zeros(mask.shape[0])
        for k in range(len(self.clauses)):
            s = s + np.where(mask[:, k], R[k], 0.0)
        return s

    def to_dict(self) -> dict:
        names = self.schema.names
        return {
            "schema": self.schema.to_dict(),
            "clauses": [
                {
                    "atoms": [
                        {"feature": names[a.feature], "coeff": a.coeff, "threshold": a.threshold}
                        for a in c.atoms
                    ],
                    "activation": c.activation,
                }
                for c in self.clauses
            ],
            "round_boundaries": list(self.round_boundaries),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogicEnsemble":
        try:
            schema = FeatureSchema.from_dict(d["schema"])
            clauses = tuple(
                Clause(
                    tuple(
                        Atom(float(a["coeff"]), schema.index(a["feature"]), float(a["threshold"]))
                        for a in c["atoms"]
                    ),
                    float(c["activation"]),
                )
                for c in d["clauses"]
            )
            rb = tuple(d.get("round_boundaries", ()))
        except (KeyError, TypeError) as e:
            raise ModelError(f"malformed model document: {e}") from e
        return cls(schema, clauses, rb)


def score(model: LogicEnsemble, x) -> float:
    x = model._check_x(x)
    total = 0.0
    for c in model.clauses:
        if all(eval_atom(a, x) for a in c.atoms):
            total += c.activation
    return total


def active_clause_set(model: LogicEnsemble, x) -> frozenset[int]:
    x = model._check_x(x)
    return frozenset(
        k for k, c in enumerate(model.clauses) if all(eval_atom(a, x) for a in c.atoms)
    )


def predict_label(model: LogicEnsemble, x) -> int:
    return int(score(model, x) >= 0.0)


def sigmoid(z):
    """Numerically stable logistic function (scalar or array)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def predict_proba(model: LogicEnsemble, x) -> float:
    return float(sigmoid(score(model, x)))


def logit(delta: float) -> float:
    if not 0.0 < delta < 1.0:
        raise ModelError(f"delta must lie in (0, 1), got {delta}")
    return math.log(delta / (1.0 - delta))


def save_model(model: LogicEnsemble, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=1)
        fh.write("\n")


def load_model(path) -> LogicEnsemble:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ModelError(f"{path}: {e}") from e
    return LogicEnsemble.from_dict(doc)


def load_schema(path) -> FeatureSchema:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ModelError(f"{path}: {e}") from e
    return FeatureSchema.from_dict(doc)
