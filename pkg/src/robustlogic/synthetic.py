"""Small synthetic datasets for demos and end-to-end tests."""
from __future__ import annotations

import numpy as np

from .data import Dataset
from .model import CONTINUOUS, INTEGER, Feature, FeatureSchema


def monotone_2d(n: int = 2000, noise: float = 0.5, seed: int = 0) -> Dataset:
    """``y = 1`` iff ``x0 + noise > 5``; ``x1`` is irrelevant. Both in [0, 10]."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 10.0, size=(n, 2))
    y = (X[:, 0] + rng.normal(0.0, noise, n) > 5.0).astype(int)
    schema = FeatureSchema((
        Feature("x0", CONTINUOUS, 0.0, 10.0, monotone="increasing"),
        Feature("x1", CONTINUOUS, 0.0, 10.0),
    ))
    return Dataset(X, y, schema)


def cryptojacking_schema() -> FeatureSchema:
    return FeatureSchema((
        Feature("websocket", INTEGER, 0, 1, monotone="increasing"),
        Feature("wasm", INTEGER, 0, 1, monotone="increasing"),
        Feature("hash_function", INTEGER, 0, 1, low_cost=True, monotone="increasing"),
        Feature("webworkers", INTEGER, 0, 64, monotone="increasing"),
        Feature("messageloop_load", CONTINUOUS, 0.0, None, monotone="increasing"),
        Feature("postmessage_load", CONTINUOUS, 0.0, None, monotone="increasing"),
        Feature("parallel_functions", INTEGER, 0, 64, monotone="increasing"),
    ))


def cryptojacking_like(n: int = 2000, seed: int = 0) -> Dataset:
    """Seven mining-page style features; malicious pages use more of everything."""
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.5).astype(int)
    mal = y == 1

    def bern(p_mal, p_ben):
        return (rng.random(n) < np.where(mal, p_mal, p_ben)).astype(float)

    X = np.column_stack([
        bern(0.75, 0.25),
        bern(0.7, 0.1),
        bern(0.6, 0.15),
        np.minimum(rng.poisson(np.where(mal, 4.0, 1.0)), 64).astype(float),
        np.round(rng.lognormal(np.where(mal, 1.0, 0.0), 0.6), 3),
        np.round(rng.lognormal(np.where(mal, 0.8, 0.0), 0.6), 3),
        np.minimum(rng.poisson(np.where(mal, 3.0, 0.7)), 64).astype(float),
    ])
    return Dataset(X, y, cryptojacking_schema())
