"""Random and hand-built models shared by several test modules."""
from __future__ import annotations

import random

from robustlogic.model import CONTINUOUS, INTEGER, Atom, Clause, Feature, FeatureSchema, LogicEnsemble
from robustlogic.properties import (
    HighConfidence, MaxScoreDecrease, Monotonicity, Redundancy, SmallNeighborhood, Stability,
)

KINDS = ("mono", "stab", "hc", "msd", "red", "sn")


def rand_model(rng: random.Random, max_features: int = 3, max_clauses: int = 6):
    """Integer features on 0..5; returns (n, schema, model, raw clause triples)."""
    n = rng.randint(1, max_features)
    sch = FeatureSchema.simple(n, INTEGER, 0, 5)
    clauses = []
    for _ in range(rng.randint(0, max_clauses)):
        atoms = []
        for _ in range(rng.randint(0, 3)):
            a = rng.choice([1.0, -1.0, 2.0, -0.5, 0.0])
            atoms.append((a, rng.randrange(n), round(rng.uniform(-7, 7), 1)))
        clauses.append((atoms, round(rng.uniform(-4, 4), 2)))
    m = LogicEnsemble(sch, tuple(Clause(tuple(Atom(*a) for a in at), r) for at, r in clauses))
    return n, sch, m, clauses


def rand_prop(rng: random.Random, n: int, kind: str | None = None):
    """Returns (kind, oracle params, property object)."""
    k = kind or rng.choice(KINDS)
    if k == "mono":
        j = rng.randrange(n)
        inc = rng.random() < 0.5
        return k, {"feature": j, "increasing": inc}, Monotonicity((j,), "increasing" if inc else "decreasing")
    if k == "stab":
        fs = tuple(sorted(rng.sample(range(n), rng.randint(1, n))))
        c = round(rng.uniform(0, 4), 2)
        return k, {"features": fs, "c": c}, Stability(fs, c)
    if k in ("hc", "msd"):
        subs = tuple(tuple(sorted(rng.sample(range(n), rng.randint(1, n)))) for _ in range(rng.randint(1, 2)))
        d = rng.choice([0.6, 0.8, 0.9, 0.98])
        cls = HighConfidence if k == "hc" else MaxScoreDecrease
        return k, {"subsets": subs, "delta": d}, cls(subs, d)
    if k == "red":
        feats = list(range(n))
        rng.shuffle(feats)
        cut = rng.randint(1, n)
        groups = (tuple(feats[:cut]),) + ((tuple(feats[cut:]),) if cut < n else ())
        d = rng.choice([0.6, 0.9])
        return k, {"instantiations": (groups,), "delta": d}, Redundancy((groups,), d)
    sig = tuple(rng.choice([0.5, 1.0, 1.7, 2.3]) for _ in range(n))
    eps = rng.choice([0.5, 1.0, 1.3, 2.0])
    c = round(rng.uniform(0, 3), 2)
    return "sn", {"sigma": sig, "epsilon": eps, "c": c}, SmallNeighborhood(eps, c, sig)


def webworker_schema() -> FeatureSchema:
    return FeatureSchema((
        Feature("wasm", INTEGER, 0, 1, monotone="increasing"),
        Feature("webworkers", INTEGER, 0, 64, monotone="increasing"),
    ))


def webworker_model(r1: float = 0.52, r2: float = 0.3, r3: float = 0.9) -> LogicEnsemble:
    """Two-level tree over (wasm, webworkers) whose clause 1 outscores clause 2."""
    no_wasm, wasm = Atom(1.0, 0, 0.5), Atom(-1.0, 0, -0.5)
    return LogicEnsemble(webworker_schema(), (
        Clause((no_wasm, Atom(1.0, 1, 1.5)), -1.99),
        Clause((wasm, Atom(1.0, 1, 2.5)), r1),
        Clause((wasm, Atom(-1.0, 1, -2.5)), r2),
        Clause((no_wasm, Atom(-1.0, 1, -1.5)), r3),
    ))


def url_ratio_schema() -> FeatureSchema:
    return FeatureSchema((
        Feature("URLRatio", CONTINUOUS, 0.0, 1.0),
        Feature("followers", INTEGER, 0, None),
    ))


def url_ratio_model() -> LogicEnsemble:
    """URLRatio split then followers split; only clauses 1 and 3 differ by more than 1."""
    low, high = Atom(1.0, 0, 0.285), Atom(-1.0, 0, -0.285)
    few, many = Atom(1.0, 1, 1429.5), Atom(-1.0, 1, -1429.5)
    return LogicEnsemble(url_ratio_schema(), (
        Clause((low, few), -1.71),
        Clause((low, many), -0.91),
        Clause((high, few), -0.9),
        Clause((high, many), 0.4),
    ))
