"""0/1 ILP verification of global robustness properties for logic ensembles.

Every atom is canonicalised to a predicate ``x_j < eta``. Each distinct
predicate gets a binary variable per input copy (``x`` and ``x'``), each clause
a binary variable that is linked exactly to the conjunction of its literals.
A property is refuted by a feasible assignment of one of its violation
problems; if all are infeasible the property holds.
"""
from __future__ import annotations

import math
import time
from bisect import bisect_left
from dataclasses import dataclass, field, replace

import numpy as np

from .model import Atom, FeatureSchema, LogicEnsemble, Predicate, active_clause_set, canonicalize_atom, score
from .properties import (
    HighConfidence,
    MaxScoreDecrease,
    Monotonicity,
    PropertySpec,
    Redundancy,
    SmallNeighborhood,
    Stability,
    check_against_schema,
    describe,
)
from .solver import EPS_STRICT, EQ, GE, LE, IlpProblem, LinearConstraint, Status, solve_ilp_feasibility

DEFAULT_BACKEND = "highs"


class VerifierError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# predicate table


@dataclass
class PredicateTable:
    """Distinct predicates per feature, sorted by threshold.

    ``slots[j]`` lists the thresholds of feature ``j`` in increasing order;
    slot ids are global and contiguous per feature.
    """

    schema: FeatureSchema
    slots: list[list[float]]
    offset: list[int]

    @property
    def size(self) -> int:
        return self.offset[-1] + len(self.slots[-1]) if self.slots else 0

    def slot_id(self, j: int, eta: float) -> int:
        k = bisect_left(self.slots[j], eta)
        if k == len(self.slots[j]) or self.slots[j][k] != eta:
            raise KeyError((j, eta))
        return self.offset[j] + k

    def fold(self, j: int, eta: float):
        """Constant truth of ``x_j < eta`` implied by the declared bounds, or None."""
        f = self.schema.features[j]
        if f.lower_bound is not None and eta <= f.lower_bound:
            return False
        if f.upper_bound is not None and eta > f.upper_bound:
            return True
        return None

    def literal(self, pred) -> tuple | bool:
        """``(slot, positive)`` or a constant bool."""
        if isinstance(pred, bool):
            return pred
        const = self.fold(pred.feature, pred.eta)
        if const is not None:
            return const if pred.positive else not const
        return (self.slot_id(pred.feature, pred.eta), pred.positive)

    def threshold_literal(self, j: int, eta: float):
        return self.literal(Predicate(j, eta, True))


def collect_predicates(model: LogicEnsemble, schema: FeatureSchema | None = None,
                       extra: dict[int, list[float]] | None = None) -> PredicateTable:
    """Canonicalise, merge and constant-fold every atom of the model."""
    schema = schema or model.schema
    per = [set() for _ in range(schema.n)]
    probe = PredicateTable(schema, [[] for _ in range(schema.n)], [0] * schema.n)
    for c in model.clauses:
        for a in c.atoms:
            p = canonicalize_atom(a, schema)
            if isinstance(p, Predicate) and probe.fold(p.feature, p.eta) is None:
                per[p.feature].add(p.eta)
    for j, etas in (extra or {}).items():
        for eta in etas:
            if probe.fold(j, eta) is None:
                per[j].add(eta)
    slots = [sorted(s) for s in per]
    offset, acc = [], 0
    for s in slots:
        offset.append(acc)
        acc += len(s)
    return PredicateTable(schema, slots, offset)


# --------------------------------------------------------------------------
# encoding


@dataclass
class IlpEncoding:
    model: LogicEnsemble
    table: PredicateTable
    copies: int
    clause_literals: list  # per clause: None (never true) or list of (slot, positive)
    constraints: list[LinearConstraint] = field(default_factory=list)

    @property
    def n_slots(self) -> int:
        return self.table.size

    @property
    def n_clauses(self) -> int:
        return len(self.model.clauses)

    @property
    def copy_width(self) -> int:
        return self.n_slots + self.n_clauses

    @property
    def num_vars(self) -> int:
        return self.copies * self.copy_width

    def p(self, copy: int, slot: int) -> int:
        return copy * self.copy_width + slot

    def l(self, copy: int, k: int) -> int:
        return copy * self.copy_width + self.n_slots + k

    def lit_expr(self, copy: int, lit):
        """Linear form (terms, constant) of a literal."""
        if isinstance(lit, bool):
            return [], float(lit)
        slot, positive = lit
        v = self.p(copy, slot)
        return ([(v, 1.0)], 0.0) if positive else ([(v, -1.0)], 1.0)

    def score_terms(self, copy: int, sign: float = 1.0):
        R = self.model.activations
        return [(self.l(copy, k), sign * R[k]) for k in range(self.n_clauses) if R[k] != 0.0]

    def feature_slots(self, j: int) -> range:
        o = self.table.offset[j]
        return range(o, o + len(self.table.slots[j]))

    def new_problem(self) -> IlpProblem:
        n = self.num_vars
        return IlpProblem(n, list(self.constraints), binary=np.ones(n, dtype=bool))


def _add(cons: list, terms, const: float, relation: str, rhs: float) -> None:
    """Append ``terms + const (relation) rhs`` with the constant moved right."""
    merged: dict[int, float] = {}
    for v, c in terms:
        merged[v] = merged.get(v, 0.0) + c
    t = tuple((v, c) for v, c in merged.items() if c != 0.0)
    cons.append(LinearConstraint(t, relation, rhs - const))


def encode_model(model: LogicEnsemble, schema: FeatureSchema | None = None, copies: int = 2,
                 extra: dict[int, list[float]] | None = None, table: PredicateTable | None = None) -> IlpEncoding:
    """Predicate consistency and exact clause linking for each input copy."""
    schema = schema or model.schema
    table = table or collect_predicates(model, schema, extra)
    lits = []
    for c in model.clauses:
        body = []
        dead = False
        for a in c.atoms:
            lit = table.literal(canonicalize_atom(a, schema))
            if lit is True:
                continue
            if lit is False:
                dead = True
                break
            body.append(lit)
        lits.append(None if dead else body)
    enc = IlpEncoding(model, table, copies, lits)
    cons = enc.constraints
    for cp in range(copies):
        for j in range(schema.n):
            ids = list(enc.feature_slots(j))
            for a, b in zip(ids, ids[1:]):
                # x_j < eta_a implies x_j < eta_b
                _add(cons, [(enc.p(cp, a), 1.0), (enc.p(cp, b), -1.0)], 0.0, LE, 0.0)
        for k, body in enumerate(lits):
            lk = enc.l(cp, k)
            if body is None:
                _add(cons, [(lk, 1.0)], 0.0, LE, 0.0)
                continue
            if not body:
                _add(cons, [(lk, 1.0)], 0.0, GE, 1.0)
                continue
            sum_terms, sum_const = [], 0.0
            for lit in body:
                t, c0 = enc.lit_expr(cp, lit)
                _add(cons, [(lk, 1.0)] + [(v, -c) for v, c in t], -c0, LE, 0.0)
                sum_terms += t
                sum_const += c0
            m = len(body)
            _add(cons, [(lk, 1.0)] + [(v, -c) for v, c in sum_terms], -sum_const, GE, -(m - 1))
    return enc


# --------------------------------------------------------------------------
# violation problems


@dataclass
class Disjunct:
    problem: IlpProblem
    label: str
    feature: int | None = None
    subset: tuple[int, ...] | None = None
    free: tuple[int, ...] = ()


def _tie(enc: IlpEncoding, cons: list, j: int) -> None:
    for s in enc.feature_slots(j):
        _add(cons, [(enc.p(0, s), 1.0), (enc.p(1, s), -1.0)], 0.0, EQ, 0.0)


def _tie_except(enc: IlpEncoding, cons: list, free) -> None:
    free = set(free)
    for j in range(enc.table.schema.n):
        if j not in free:
            _tie(enc, cons, j)


def _make(enc: IlpEncoding, extra_cons: list, extra_vars: int = 0, continuous_extra: bool = False) -> IlpProblem:
    n = enc.num_vars + extra_vars
    binary = np.ones(n, dtype=bool)
    lower = np.zeros(n)
    upper = np.ones(n)
    if continuous_extra and extra_vars:
        binary[enc.num_vars:] = False
    return IlpProblem(n, list(enc.constraints) + extra_cons, binary=binary, lower=lower, upper=upper)


def band_thresholds(prop: SmallNeighborhood, table: PredicateTable) -> dict[int, list[float]]:
    """Neighbourhood-edge thresholds (``a`` variables) for every predicate.

    For a predicate ``x_j < eta`` and radius ``r = sigma_j * epsilon``:
    ``x_j < eta`` forces ``x'_j < eta + r``; ``x'_j >= eta`` forces
    ``x_j >= eta - r``. On integer features both edges are tightened.
    """
    schema = table.schema
    out: dict[int, list[float]] = {}
    for j, etas in enumerate(table.slots):
        r = prop.radius(j)
        integer = schema.features[j].is_integer
        vals = []
        for eta in etas:
            vals.append(_band_edges(eta, r, integer))
        out[j] = [v for pair in vals for v in pair]
    return out


def _band_edges(eta: float, r: float, integer: bool) -> tuple[float, float]:
    if integer:
        # x <= eta - 1 and x' <= x + r gives x' < floor(eta - 1 + r) + 1
        up = float(math.floor(eta - 1 + r + 1e-12) + 1)
        lo = float(math.ceil(eta - r - 1e-12))
        return lo, up
    return eta - r, eta + r


def encode_violation(enc: IlpEncoding, prop: PropertySpec, schema: FeatureSchema | None = None) -> list[Disjunct]:
    """One ILP per disjunct of the property's negation."""
    schema = schema or enc.table.schema
    check_against_schema(prop, schema)
    out: list[Disjunct] = []
    F0 = enc.score_terms(0)
    F1 = enc.score_terms(1)
    negF0 = enc.score_terms(0, -1.0)
    negF1 = enc.score_terms(1, -1.0)

    if isinstance(prop, Monotonicity):
        for j in prop.features:
            cons: list = []
            _tie_except(enc, cons, (j,))
            for s in enc.feature_slots(j):
                # x_j <= x'_j : x'_j < eta implies x_j < eta
                _add(cons, [(enc.p(1, s), 1.0), (enc.p(0, s), -1.0)], 0.0, LE, 0.0)
            if prop.direction == "increasing":
                _add(cons, F0 + negF1, 0.0, GE, EPS_STRICT)
            else:
                _add(cons, F1 + negF0, 0.0, GE, EPS_STRICT)
            out.append(Disjunct(_make(enc, cons), f"feature {schema.names[j]}", feature=j, free=(j,)))

    elif isinstance(prop, Stability):
        for j in prop.features:
            slots = list(enc.feature_slots(j))
            if not slots:
                continue
            cons = []
            _tie_except(enc, cons, (j,))
            base = enc.num_vars
            dsum = []
            for i, s in enumerate(slots):
                d, p0, p1 = base + i, enc.p(0, s), enc.p(1, s)
                _add(cons, [(d, 1.0), (p0, -1.0), (p1, -1.0)], 0.0, LE, 0.0)
                _add(cons, [(d, 1.0), (p0, 1.0), (p1, 1.0)], 0.0, LE, 2.0)
                dsum.append((d, 1.0))
            _add(cons, dsum, 0.0, GE, 1.0)
            # symmetric in (x, x'): one sign suffices
            _add(cons, F0 + negF1, 0.0, GE, prop.c + EPS_STRICT)
            prob = _make(enc, cons, extra_vars=len(slots), continuous_extra=True)
            out.append(Disjunct(prob, f"feature {schema.names[j]}", feature=j, free=(j,)))

    elif isinstance(prop, HighConfidence):
        L = prop.threshold
        for si, sub in enumerate(prop.subsets):
            cons = []
            _tie_except(enc, cons, sub)
            _add(cons, F0, 0.0, GE, L)
            _add(cons, F1, 0.0, LE, -EPS_STRICT)
            out.append(Disjunct(_make(enc, cons), f"subset {[schema.names[i] for i in sub]}", subset=sub, free=sub))

    elif isinstance(prop, MaxScoreDecrease):
        L = prop.threshold
        for sub in prop.subsets:
            cons = []
            _tie_except(enc, cons, sub)
            _add(cons, F0 + negF1, 0.0, GE, L + EPS_STRICT)
            out.append(Disjunct(_make(enc, cons), f"subset {[schema.names[i] for i in sub]}", subset=sub, free=sub))

    elif isinstance(prop, Redundancy):
        L = prop.threshold
        for inst in prop.instantiations:
            union = tuple(sorted({j for g in inst for j in g}))
            for g in inst:
                cons = []
                free = tuple(j for j in union if j not in set(g))
                _tie_except(enc, cons, free)
                _add(cons, F0, 0.0, GE, L)
                _add(cons, F1, 0.0, LE, -EPS_STRICT)
                label = f"groups {[[schema.names[i] for i in gg] for gg in inst]} untouched {[schema.names[i] for i in g]}"
                out.append(Disjunct(_make(enc, cons), label, subset=union, free=free))

    elif isinstance(prop, SmallNeighborhood):
        cons = []
        table = enc.table
        for j in range(schema.n):
            r = prop.radius(j)
            integer = schema.features[j].is_integer
            for eta in _original_thresholds(enc, j):
                s = table.slot_id(j, eta)
                lo, up = _band_edges(eta, r, integer)
                up_lit = table.threshold_literal(j, up)
                lo_lit = table.threshold_literal(j, lo)
                for a, b in ((0, 1), (1, 0)):
                    # x^a < eta  ->  x^b < eta + r
                    t, c0 = enc.lit_expr(b, up_lit)
                    _add(cons, [(enc.p(a, s), 1.0)] + [(v, -c) for v, c in t], -c0, LE, 0.0)
                    # x^a < eta - r  ->  x^b < eta
                    t, c0 = enc.lit_expr(a, lo_lit)
                    _add(cons, t + [(enc.p(b, s), -1.0)], c0, LE, 0.0)
        _add(cons, F0 + negF1, 0.0, GE, prop.bound + EPS_STRICT)
        out.append(Disjunct(_make(enc, cons), "neighbourhood", free=tuple(range(schema.n))))
    else:
        raise VerifierError(f"unsupported property {prop!r}")
    return out


def _original_thresholds(enc: IlpEncoding, j: int) -> list[float]:
    etas = set()
    for c in enc.model.clauses:
        for a in c.atoms:
            if a.feature != j:
                continue
            p = canonicalize_atom(a, enc.table.schema)
            if isinstance(p, Predicate) and enc.table.fold(j, p.eta) is None:
                etas.add(p.eta)
    return sorted(etas)


# --------------------------------------------------------------------------
# witnesses


@dataclass(frozen=True)
class Cell:
    """Values of one feature consistent with its predicate truths.

    ``lo`` is inclusive; ``hi`` is exclusive when ``hi_open`` else inclusive.
    """

    lo: float
    hi: float
    hi_open: bool
    integer: bool

    def int_range(self) -> tuple[float, float]:
        lo = math.ceil(self.lo) if math.isfinite(self.lo) else -math.inf
        if math.isfinite(self.hi):
            hi = (math.ceil(self.hi) - 1) if self.hi_open else math.floor(self.hi)
        else:
            hi = math.inf
        return lo, hi

    def empty(self) -> bool:
        if self.integer:
            lo, hi = self.int_range()
            return lo > hi
        return self.lo > self.hi or (self.hi_open and self.lo >= self.hi)

    def pick(self) -> float:
        if self.integer:
            lo, hi = self.int_range()
            if math.isfinite(lo) and math.isfinite(hi):
                return float(lo + (hi - lo) // 2)
            if math.isfinite(lo):
                return float(lo)
            if math.isfinite(hi):
                return float(hi)
            return 0.0
        if math.isfinite(self.lo) and math.isfinite(self.hi):
            return 0.5 * (self.lo + self.hi)
        if math.isfinite(self.lo):
            return self.lo + 1.0
        if math.isfinite(self.hi):
            return self.hi - 1.0
        return 0.0


def _cell(enc: IlpEncoding, assignment, copy: int, j: int) -> Cell:
    f = enc.table.schema.features[j]
    lo = -math.inf if f.lower_bound is None else f.lower_bound
    hi = math.inf if f.upper_bound is None else f.upper_bound
    hi_open = False
    seen_true = False
    for s, eta in zip(enc.feature_slots(j), enc.table.slots[j]):
        truth = assignment[enc.p(copy, s)] > 0.5
        if truth:
            if not seen_true:
                hi, hi_open = eta, True
            seen_true = True
        else:
            if seen_true:
                raise VerifierError("inconsistent predicate assignment")
            lo = max(lo, eta)
    cell = Cell(lo, hi, hi_open, f.is_integer)
    if cell.empty():
        raise VerifierError(f"empty interval for feature {f.name}")
    return cell


def _closest_pair(a: Cell, b: Cell, radius: float) -> tuple[float, float]:
    """Points of two cells at distance at most ``radius`` when possible."""
    if a == b:
        v = a.pick()
        return v, v
    if a.integer:
        alo, ahi = a.int_range()
        blo, bhi = b.int_range()
        if ahi < blo:
            return float(ahi), float(blo)
        if bhi < alo:
            return float(alo), float(bhi)
        v = float(max(alo, blo))
        return v, v
    if a.hi <= b.lo:
        gap = b.lo - a.hi
        s = max(radius - gap, 0.0)
        wa = a.hi - a.lo
        wb = b.hi - b.lo
        x = a.hi - min(s / 4, wa / 2)
        xp = b.lo + min(s / 4, wb / 2)
        return x, xp
    if b.hi <= a.lo:
        xp, x = _closest_pair(b, a, radius)
        return x, xp
    lo = max(a.lo, b.lo)
    hi = min(a.hi, b.hi)
    v = 0.5 * (lo + hi) if math.isfinite(lo) and math.isfinite(hi) else (lo + 1 if math.isfinite(lo) else hi - 1)
    return v, v


def reconstruct_witness(assignment, enc: IlpEncoding, schema: FeatureSchema | None = None,
                        prop: PropertySpec | None = None):
    """Concrete ``(x, x')`` inside the equivalence classes chosen by the solver."""
    schema = schema or enc.table.schema
    n = schema.n
    x = np.zeros(n)
    xp = np.zeros(n) if enc.copies > 1 else None
    for j in range(n):
        c0 = _cell(enc, assignment, 0, j)
        if enc.copies == 1:
            x[j] = c0.pick()
            continue
        c1 = _cell(enc, assignment, 1, j)
        if isinstance(prop, SmallNeighborhood):
            x[j], xp[j] = _closest_pair(c0, c1, prop.radius(j))
        elif c0 == c1:
            x[j] = xp[j] = c0.pick()
        else:
            x[j], xp[j] = c0.pick(), c1.pick()
    return x, xp


def concrete_violation(model: LogicEnsemble, prop: PropertySpec, x, xp) -> bool:
    """Re-check a witness pair directly against the property definition."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    fx, fxp = score(model, x), score(model, xp)
    diff = x != xp

    def only(free):
        mask = np.ones(len(x), dtype=bool)
        mask[list(free)] = False
        return not np.any(diff & mask)

    if isinstance(prop, Monotonicity):
        for j in prop.features:
            if only((j,)) and x[j] <= xp[j]:
                if prop.direction == "increasing" and fx > fxp:
                    return True
                if prop.direction == "decreasing" and fx < fxp:
                    return True
        return False
    if isinstance(prop, Stability):
        return any(only((j,)) for j in prop.features) and abs(fx - fxp) > prop.c
    if isinstance(prop, HighConfidence):
        return any(only(s) for s in prop.subsets) and fx >= prop.threshold and fxp < 0
    if isinstance(prop, MaxScoreDecrease):
        return any(only(s) for s in prop.subsets) and fx - fxp > prop.threshold
    if isinstance(prop, Redundancy):
        if not (fx >= prop.threshold and fxp < 0):
            return False
        for inst in prop.instantiations:
            union = {j for g in inst for j in g}
            if only(union) and any(not np.any(diff[list(g)]) for g in inst):
                return True
        return False
    if isinstance(prop, SmallNeighborhood):
        sig = np.asarray(prop.sigma, dtype=float)
        dist = float(np.max(np.abs(x - xp) / sig)) if len(x) else 0.0
        return dist <= prop.epsilon * (1 + 1e-12) and abs(fx - fxp) > prop.bound
    raise VerifierError(f"unsupported property {prop!r}")


# --------------------------------------------------------------------------
# verify


@dataclass
class Verdict:
    status: str  # "verified" | "counterexample" | "unknown"
    prop: PropertySpec
    x: np.ndarray | None = None
    x_prime: np.ndarray | None = None
    active_x: frozenset = frozenset()
    active_x_prime: frozenset = frozenset()
    score_x: float | None = None
    score_x_prime: float | None = None
    reason: str | None = None
    disjunct: str | None = None
    problems: int = 0
    nodes: int = 0
    seconds: float = 0.0

    @property
    def verified(self) -> bool:
        return self.status == "verified"

    @property
    def refuted(self) -> bool:
        return self.status == "counterexample"

    def to_dict(self, schema: FeatureSchema | None = None) -> dict:
        d = {
            "property": describe(self.prop, schema),
            "verdict": self.status,
            "problems": self.problems,
            "nodes": self.nodes,
            "seconds": round(self.seconds, 6),
        }
        if self.reason:
            d["reason"] = self.reason
        if self.status == "counterexample":
            d.update(
                disjunct=self.disjunct,
                x=[float(v) for v in self.x],
                x_prime=[float(v) for v in self.x_prime],
                active_x=sorted(self.active_x),
                active_x_prime=sorted(self.active_x_prime),
                score_x=self.score_x,
                score_x_prime=self.score_x_prime,
            )
        return d


def verify(model: LogicEnsemble, schema: FeatureSchema | None, prop: PropertySpec,
           timeout: float | None = 30.0, backend: str | None = None) -> Verdict:
    """Verified, Counterexample or Unknown for one property.

    ``timeout`` bounds each disjunct problem separately.
    """
    schema = schema or model.schema
    backend = backend or DEFAULT_BACKEND
    start = time.monotonic()
    extra = None
    table = None
    if isinstance(prop, SmallNeighborhood):
        base = collect_predicates(model, schema)
        extra = band_thresholds(prop, base)
    table = collect_predicates(model, schema, extra)
    enc = encode_model(model, schema, copies=2, table=table)
    disjuncts = encode_violation(enc, prop, schema)
    nodes = 0
    unknown_reason = None
    for i, dj in enumerate(disjuncts):
        res = solve_ilp_feasibility(dj.problem, timeout, backend=backend)
        nodes += res.nodes
        if res.status == Status.TIMEOUT:
            unknown_reason = unknown_reason or "timeout"
            continue
        if res.status != Status.FEASIBLE:
            continue
        x, xp = reconstruct_witness(res.x, enc, schema, prop)
        if not concrete_violation(model, prop, x, xp):
            unknown_reason = unknown_reason or "spurious-witness"
            continue
        return Verdict(
            "counterexample", prop, x, xp,
            active_clause_set(model, x), active_clause_set(model, xp),
            score(model, x), score(model, xp),
            disjunct=dj.label, problems=i + 1, nodes=nodes, seconds=time.monotonic() - start,
        )
    if unknown_reason:
        return Verdict("unknown", prop, reason=unknown_reason, problems=len(disjuncts), nodes=nodes,
                       seconds=time.monotonic() - start)
    return Verdict("verified", prop, problems=len(disjuncts), nodes=nodes, seconds=time.monotonic() - start)


# --------------------------------------------------------------------------
# evasion attack


@dataclass(frozen=True)
class AttackSpec:
    """Constraints on the attacker's instance.

    ``box`` maps a feature index to inclusive ``(low, high)`` bounds (None for
    an open side). ``fix`` lists ``(feature, eta, truth)``: the predicate
    ``x_feature < eta`` is forced to ``truth``.
    """

    box: dict = field(default_factory=dict)
    fix: tuple = ()
    require_misclassified: bool = True


@dataclass
class EvasionResult:
    status: str  # "found" | "none" | "unknown"
    x: np.ndarray | None = None
    score: float | None = None
    nodes: int = 0


def _boxed_schema(schema: FeatureSchema, box: dict) -> FeatureSchema:
    feats = list(schema.features)
    for key, (lo, hi) in box.items():
        j = schema.index(key)
        f = feats[j]
        new_lo = f.lower_bound if lo is None else (lo if f.lower_bound is None else max(lo, f.lower_bound))
        new_hi = f.upper_bound if hi is None else (hi if f.upper_bound is None else min(hi, f.upper_bound))
        if new_lo is not None and new_hi is not None and new_lo > new_hi:
            raise VerifierError(f"empty box for feature {f.name}")
        feats[j] = replace(f, lower_bound=new_lo, upper_bound=new_hi)
    return FeatureSchema(tuple(feats))


def find_evasion(model: LogicEnsemble, schema: FeatureSchema | None, attack: AttackSpec,
                 timeout: float | None = 30.0, backend: str | None = None) -> EvasionResult:
    """Search for a single instance inside the attack constraints that the
    model labels benign (or any instance when misclassification is not required)."""
    schema = schema or model.schema
    try:
        boxed = _boxed_schema(schema, attack.box)
    except VerifierError:
        return EvasionResult("none")
    fixed = []
    extra: dict[int, list[float]] = {}
    for feat, eta, truth in attack.fix:
        j = schema.index(feat)
        p = canonicalize_atom(_atom_for(j, eta), boxed)
        fixed.append((p, bool(truth)))
        if isinstance(p, Predicate):
            extra.setdefault(j, []).append(p.eta)
    table = collect_predicates(model, boxed, extra)
    enc = encode_model(model, boxed, copies=1, table=table)
    cons = list(enc.constraints)
    for p, truth in fixed:
        lit = table.literal(p)
        if isinstance(lit, bool):
            if lit != truth:
                return EvasionResult("none")
            continue
        t, c0 = enc.lit_expr(0, lit)
        _add(cons, t, c0, EQ, 1.0 if truth else 0.0)
    if attack.require_misclassified:
        _add(cons, enc.score_terms(0), 0.0, LE, -EPS_STRICT)
    n = enc.num_vars
    prob = IlpProblem(n, cons, binary=np.ones(n, dtype=bool))
    res = solve_ilp_feasibility(prob, timeout, backend=backend or DEFAULT_BACKEND)
    if res.status == Status.TIMEOUT:
        return EvasionResult("unknown", nodes=res.nodes)
    if res.status != Status.FEASIBLE:
        return EvasionResult("none", nodes=res.nodes)
    x, _ = reconstruct_witness(res.x, enc, boxed)
    s = score(model, x)
    if attack.require_misclassified and s >= 0:
        return EvasionResult("unknown", nodes=res.nodes)
    return EvasionResult("found", x, s, nodes=res.nodes)


def _atom_for(j: int, eta: float):
    return Atom(1.0, j, float(eta))
