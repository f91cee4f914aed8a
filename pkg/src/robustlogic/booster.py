"""Second-order gradient boosting of axis-aligned trees, exported as clauses."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import Atom, Clause, FeatureSchema, LogicEnsemble, ModelError, sigmoid


@dataclass(frozen=True)
class BoostConfig:
    rounds: int = 4
    max_depth: int = 4
    reg_lambda: float = 1.0
    min_split_gain: float = 1e-6
    malicious_weight: float = 1.0
    feature_mask_per_round: tuple | None = None

    def __post_init__(self):
        if self.rounds < 1:
            raise ModelError("rounds must be >= 1")
        if self.max_depth < 0:
            raise ModelError("max_depth must be >= 0")
        if self.reg_lambda < 0:
            raise ModelError("reg_lambda must be >= 0")
        if self.feature_mask_per_round is not None:
            object.__setattr__(
                self, "feature_mask_per_round",
                tuple(None if m is None else tuple(m) for m in self.feature_mask_per_round),
            )

    def mask_for(self, round_index: int):
        masks = self.feature_mask_per_round
        if not masks:
            return None
        return masks[min(round_index, len(masks) - 1)]


@dataclass
class DecisionTree:
    """Flat binary tree. ``feature[i] < 0`` marks a leaf.

    The left child of a split holds ``x[feature] < threshold``.
    """

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def _new(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    @property
    def n_leaves(self) -> int:
        return sum(1 for f in self.feature if f < 0)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(len(X))
        for r, x in enumerate(X):
            i = 0
            while self.feature[i] >= 0:
                i = self.left[i] if x[self.feature[i]] < self.threshold[i] else self.right[i]
            out[r] = self.value[i]
        return out

    def depth(self, i: int = 0) -> int:
        if self.feature[i] < 0:
            return 0
        return 1 + max(self.depth(self.left[i]), self.depth(self.right[i]))


def compute_gradients(labels, scores, malicious_weight: float = 1.0):
    """Weighted logistic-loss gradient and hessian at the current scores."""
    y = np.asarray(labels, dtype=float)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape:
        raise ModelError("labels and scores must have equal length")
    w = np.where(y == 1, malicious_weight, 1.0)
    p = sigmoid(s)
    return w * (p - y), w * p * (1 - p)


def _leaf_value(G: float, H: float, lam: float) -> float:
    d = H + lam
    return -G / d if d > 0 else 0.0


def _score_part(G, H, lam):
    d = H + lam
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d > 0, G * G / np.where(d > 0, d, 1.0), 0.0)


def _candidates(values: np.ndarray, integer: bool) -> tuple[np.ndarray, np.ndarray]:
    """Distinct sorted values and the thresholds between consecutive ones."""
    uniq = np.unique(values)
    if len(uniq) < 2:
        return uniq, np.empty(0)
    mids = 0.5 * (uniq[:-1] + uniq[1:])
    if integer:
        mids = np.floor(mids) + 0.5
    return uniq, mids


def best_split(X, g, h, features: Sequence[int], schema: FeatureSchema | None, lam: float):
    """(gain, feature, threshold) of the best split, or None.

    Ties go to the lower feature index, then the lower threshold.
    """
    G, H = float(g.sum()), float(h.sum())
    parent = float(_score_part(np.array(G), np.array(H), lam))
    best = None
    for j in features:
        col = X[:, j]
        integer = schema is not None and schema.features[j].is_integer
        uniq, mids = _candidates(col, integer)
        if mids.size == 0:
            continue
        order = np.argsort(col, kind="stable")
        cs, gs, hs = col[order], np.cumsum(g[order]), np.cumsum(h[order])
        # rows strictly below each candidate threshold
        cut = np.searchsorted(cs, mids, side="left")
        GL, HL = gs[cut - 1], hs[cut - 1]
        gain = 0.5 * (_score_part(GL, HL, lam) + _score_part(G - GL, H - HL, lam) - parent)
        k = int(np.argmax(gain))
        if best is None or gain[k] > best[0]:
            best = (float(gain[k]), int(j), float(mids[k]))
    return best


def fit_tree(X, g, h, config: BoostConfig, schema: FeatureSchema | None = None, features=None) -> DecisionTree:
    X = np.asarray(X, dtype=float)
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ModelError("fit_tree needs a non-empty 2-D data matrix")
    feats = list(range(X.shape[1])) if features is None else sorted(features)
    tree = DecisionTree()
    lam = config.reg_lambda

    def grow(rows: np.ndarray, depth: int) -> int:
        node = tree._new()
        gr, hr = g[rows], h[rows]
        split = None
        if depth < config.max_depth and len(rows) > 1:
            split = best_split(X[rows], gr, hr, feats, schema, lam)
        if split is None or not split[0] > config.min_split_gain:
            tree.value[node] = _leaf_value(float(gr.sum()), float(hr.sum()), lam)
            return node
        _, j, thr = split
        mask = X[rows, j] < thr
        tree.feature[node] = j
        tree.threshold[node] = thr
        tree.left[node] = grow(rows[mask], depth + 1)
        tree.right[node] = grow(rows[~mask], depth + 1)
        return node

    grow(np.arange(len(X)), 0)
    return tree


def tree_to_clauses(tree: DecisionTree) -> list[Clause]:
    """One clause per root-to-leaf path, in left-first order."""
    out: list[Clause] = []

    def walk(i: int, path: tuple) -> None:
        j = tree.feature[i]
        if j < 0:
            out.append(Clause(path, float(tree.value[i])))
            return
        t = tree.threshold[i]
        walk(tree.left[i], path + (Atom(1.0, j, t),))
        walk(tree.right[i], path + (Atom(-1.0, j, -t),))

    walk(0, ())
    return out


def boost_round(model: LogicEnsemble, X, y, config: BoostConfig, round_index: int | None = None,
                scores=None) -> LogicEnsemble:
    """Fit one tree to the current gradients and append it as a new round."""
    X = np.asarray(X, dtype=float)
    ri = model.n_rounds if round_index is None else round_index
    s = model.score_batch(X) if scores is None else np.asarray(scores, dtype=float)
    g, h = compute_gradients(y, s, config.malicious_weight)
    mask = config.mask_for(ri)
    tree = fit_tree(X, g, h, config, model.schema, features=mask)
    return model.append_round(tree_to_clauses(tree))


def empty_model(schema: FeatureSchema) -> LogicEnsemble:
    return LogicEnsemble(schema, (), ())


def train_booster(X, y, schema: FeatureSchema, config: BoostConfig) -> LogicEnsemble:
    """Plain boosting for ``config.rounds`` rounds from a zero score."""
    model = empty_model(schema)
    for r in range(config.rounds):
        model = boost_round(model, X, y, config, r)
    return model


def weighted_logloss(y, scores, malicious_weight: float = 1.0) -> float:
    y = np.asarray(y, dtype=float)
    s = np.asarray(scores, dtype=float)
    w = np.where(y == 1, malicious_weight, 1.0)
    # log(1 + exp(-s)) for y=1, log(1 + exp(s)) for y=0
    z = np.where(y == 1, -s, s)
    return float(np.sum(w * np.logaddexp(0.0, z)) / max(len(y), 1))

