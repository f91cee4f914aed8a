"""Global robustness property specifications and their JSON form."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, replace
from typing import Sequence, Union

from .model import FeatureSchema, ModelError, logit


class PropertyError(ModelError):
    pass


def _features(schema: FeatureSchema, names) -> tuple[int, ...]:
    return tuple(schema.index(n) for n in names)


@dataclass(frozen=True)
class Monotonicity:
    features: tuple[int, ...]
    direction: str = "increasing"

    kind = "monotonicity"

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if self.direction not in ("increasing", "decreasing"):
            raise PropertyError(f"unknown monotonicity direction {self.direction!r}")
        if not self.features:
            raise PropertyError("monotonicity needs at least one feature")


@dataclass(frozen=True)
class Stability:
    features: tuple[int, ...]
    c: float

    kind = "stability"

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if self.c < 0:
            raise PropertyError("stability constant must be >= 0")
        if not self.features:
            raise PropertyError("stability needs at least one feature")


@dataclass(frozen=True)
class HighConfidence:
    """Perturbing the features of any one subset never flips a confident
    malicious prediction (score with probability >= delta) to benign."""

    subsets: tuple[tuple[int, ...], ...]
    delta: float

    kind = "high_confidence"

    def __post_init__(self):
        object.__setattr__(self, "subsets", tuple(tuple(s) for s in self.subsets))
        _check_delta(self.delta)
        if not self.subsets:
            raise PropertyError("high confidence needs at least one feature subset")

    @property
    def threshold(self) -> float:
        return logit(self.delta)


@dataclass(frozen=True)
class MaxScoreDecrease:
    """Perturbing any one subset lowers the score by at most logit(delta).

    Stronger than ``HighConfidence`` with the same subsets and delta; it is the
    form the trainer enforces.
    """

    subsets: tuple[tuple[int, ...], ...]
    delta: float

    kind = "max_score_decrease"

    def __post_init__(self):
        object.__setattr__(self, "subsets", tuple(tuple(s) for s in self.subsets))
        _check_delta(self.delta)

    @property
    def threshold(self) -> float:
        return logit(self.delta)


@dataclass(frozen=True)
class Redundancy:
    """Each instantiation is a list of feature groups; evading a confident
    prediction must touch at least one feature of every group."""

    instantiations: tuple[tuple[tuple[int, ...], ...], ...]
    delta: float

    kind = "redundancy"

    def __post_init__(self):
        object.__setattr__(
            self, "instantiations", tuple(tuple(tuple(g) for g in inst) for inst in self.instantiations)
        )
        _check_delta(self.delta)
        if not self.instantiations or any(len(inst) < 1 for inst in self.instantiations):
            raise PropertyError("redundancy needs non-empty group lists")

    @property
    def threshold(self) -> float:
        return logit(self.delta)


@dataclass(frozen=True)
class SmallNeighborhood:
    """``max_j |x_j - x'_j| / sigma_j <= epsilon`` implies ``|F(x) - F(x')| <= c * epsilon``."""

    epsilon: float
    c: float
    sigma: tuple[float, ...] | None = None

    kind = "small_neighborhood"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise PropertyError("epsilon must be > 0")
        if self.c < 0:
            raise PropertyError("c must be >= 0")
        if self.sigma is not None:
            object.__setattr__(self, "sigma", tuple(float(s) for s in self.sigma))
            if any(s <= 0 for s in self.sigma):
                raise PropertyError("sigma entries must be > 0")

    @property
    def bound(self) -> float:
        return self.epsilon * self.c

    def radius(self, j: int) -> float:
        if self.sigma is None:
            raise PropertyError("small neighborhood property has no sigma bound yet")
        return self.sigma[j] * self.epsilon


PropertySpec = Union[Monotonicity, Stability, HighConfidence, MaxScoreDecrease, Redundancy, SmallNeighborhood]


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise PropertyError(f"delta must lie in (0, 1), got {delta}")


def bind_sigma(props: Sequence[PropertySpec], sigma) -> list[PropertySpec]:
    """Fill in missing per-feature standard deviations."""
    out = []
    for p in props:
        if isinstance(p, SmallNeighborhood) and p.sigma is None:
            p = replace(p, sigma=tuple(float(s) for s in sigma))
        out.append(p)
    return out


def check_against_schema(prop: PropertySpec, schema: FeatureSchema) -> None:
    n = schema.n

    def chk(ix):
        for i in ix:
            if not 0 <= i < n:
                raise PropertyError(f"property references feature index {i} outside schema")

    if isinstance(prop, (Monotonicity, Stability)):
        chk(prop.features)
    elif isinstance(prop, (HighConfidence, MaxScoreDecrease)):
        for s in prop.subsets:
            chk(s)
    elif isinstance(prop, Redundancy):
        for inst in prop.instantiations:
            for g in inst:
                chk(g)
    elif isinstance(prop, SmallNeighborhood) and prop.sigma is not None and len(prop.sigma) != n:
        raise PropertyError("sigma length does not match the schema")


def describe(prop: PropertySpec, schema: FeatureSchema | None = None) -> str:
    def nm(ix):
        return ",".join(schema.names[i] if schema else str(i) for i in ix)

    if isinstance(prop, Monotonicity):
        return f"monotonicity({prop.direction}: {nm(prop.features)})"
    if isinstance(prop, Stability):
        return f"stability({nm(prop.features)}; c={prop.c:g})"
    if isinstance(prop, HighConfidence):
        return f"high_confidence(delta={prop.delta:g}; {len(prop.subsets)} subsets)"
    if isinstance(prop, MaxScoreDecrease):
        return f"max_score_decrease(delta={prop.delta:g}; {len(prop.subsets)} subsets)"
    if isinstance(prop, Redundancy):
        return f"redundancy(delta={prop.delta:g}; {len(prop.instantiations)} instantiations)"
    if isinstance(prop, SmallNeighborhood):
        return f"small_neighborhood(eps={prop.epsilon:g}, c={prop.c:g})"
    return repr(prop)


# --------------------------------------------------------------------------
# JSON


def _resolve_group(schema: FeatureSchema, g) -> tuple[int, ...]:
    if isinstance(g, str):
        groups = schema.groups()
        if g in groups:
            return groups[g]
        return (schema.index(g),)
    return _features(schema, g)


def property_from_dict(d: dict, schema: FeatureSchema) -> PropertySpec:
    try:
        kind = d["type"]
    except (KeyError, TypeError):
        raise PropertyError(f"property entry without type: {d!r}") from None
    try:
        if kind == "monotonicity":
            if "features" in d:
                feats = _features(schema, d["features"])
            elif "feature" in d:
                feats = (schema.index(d["feature"]),)
            else:
                direction = d.get("direction", "increasing")
                feats = tuple(i for i, f in enumerate(schema.features) if f.monotone == direction)
            return Monotonicity(feats, d.get("direction", "increasing"))
        if kind == "stability":
            feats = _features(schema, d["features"]) if "features" in d else schema.low_cost_features()
            return Stability(feats, float(d["c"]))
        if kind in ("high_confidence", "max_score_decrease"):
            if "subsets" in d:
                subsets = tuple(_features(schema, s) for s in d["subsets"])
            else:
                subsets = tuple((i,) for i in schema.low_cost_features())
            cls = HighConfidence if kind == "high_confidence" else MaxScoreDecrease
            return cls(subsets, float(d["delta"]))
        if kind == "redundancy":
            if "instantiations" in d:
                insts = tuple(tuple(_resolve_group(schema, g) for g in inst) for inst in d["instantiations"])
            else:
                groups = [_resolve_group(schema, g) for g in d.get("groups", sorted(schema.groups()))]
                m = int(d.get("choose", len(groups)))
                insts = tuple(itertools.combinations(groups, m))
            return Redundancy(insts, float(d["delta"]))
        if kind == "small_neighborhood":
            sigma = d.get("sigma")
            if isinstance(sigma, dict):
                sigma = tuple(float(sigma[name]) for name in schema.names)
            return SmallNeighborhood(float(d["epsilon"]), float(d["c"]), sigma)
    except KeyError as e:
        raise PropertyError(f"property {kind!r} is missing field {e}") from None
    raise PropertyError(f"unknown property type {kind!r}")


def property_to_dict(p: PropertySpec, schema: FeatureSchema) -> dict:
    names = schema.names

    def nm(ix):
        return [names[i] for i in ix]

    if isinstance(p, Monotonicity):
        return {"type": p.kind, "features": nm(p.features), "direction": p.direction}
    if isinstance(p, Stability):
        return {"type": p.kind, "features": nm(p.features), "c": p.c}
    if isinstance(p, (HighConfidence, MaxScoreDecrease)):
        return {"type": p.kind, "subsets": [nm(s) for s in p.subsets], "delta": p.delta}
    if isinstance(p, Redundancy):
        return {"type": p.kind, "instantiations": [[nm(g) for g in inst] for inst in p.instantiations],
                "delta": p.delta}
    if isinstance(p, SmallNeighborhood):
        d = {"type": p.kind, "epsilon": p.epsilon, "c": p.c}
        if p.sigma is not None:
            d["sigma"] = dict(zip(names, p.sigma))
        return d
    raise PropertyError(f"cannot serialise {p!r}")


def load_properties(path, schema: FeatureSchema) -> list[PropertySpec]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise PropertyError(f"{path}: {e}") from e
    if isinstance(doc, dict):
        doc = doc.get("properties", [doc])
    props = [property_from_dict(d, schema) for d in doc]
    for p in props:
        check_against_schema(p, schema)
    return props
