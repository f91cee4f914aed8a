"""Booster-fixer training loop: counterexamples become linear constraints on
clause activations, and projected training enforces them."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .booster import BoostConfig, boost_round, empty_model
from .cln import ActivationConstraint, OptimizerState, SmoothConfig, reduce_constraints, train_epoch
from .data import auc
from .model import FeatureSchema, LogicEnsemble, ModelError
from .properties import (
    HighConfidence,
    MaxScoreDecrease,
    Monotonicity,
    PropertySpec,
    Redundancy,
    SmallNeighborhood,
    Stability,
    describe,
)
from .solver import EPS_STRICT, LE, LinearConstraint, Status, check_feasible
from .verifier import Verdict, verify


class TrainingFailure(RuntimeError):
    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class FixerConfig:
    timeout_base: float = 30.0
    timeout_growth: float = 2.0
    timeout_max: float = 960.0
    max_cegis_iters: int = 100
    property_boosting: bool = False
    round_property_masks: tuple | None = None
    backend: str | None = None
    smooth: SmoothConfig = field(default_factory=SmoothConfig)

    def __post_init__(self):
        if self.timeout_base <= 0:
            raise ModelError("timeout_base must be > 0")
        if self.timeout_growth <= 1:
            raise ModelError("timeout_growth must be > 1")
        if self.max_cegis_iters < 1:
            raise ModelError("max_cegis_iters must be >= 1")

    def properties_for(self, round_index: int, n_props: int) -> list[int]:
        masks = self.round_property_masks
        if not masks:
            return list(range(n_props))
        m = masks[min(round_index, len(masks) - 1)]
        return list(range(n_props)) if m is None else sorted(m)


@dataclass(frozen=True)
class LedgerEntry:
    constraint: ActivationConstraint
    prop: str
    iteration: int
    round: int
    x: tuple
    x_prime: tuple


@dataclass
class ConstraintLedger:
    entries: list[LedgerEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def constraints(self) -> list[ActivationConstraint]:
        return [e.constraint for e in self.entries]

    def add(self, constraints: Sequence[ActivationConstraint], prop: str, iteration: int, round_index: int,
            x, xp) -> None:
        for c in constraints:
            self.entries.append(LedgerEntry(c, prop, iteration, round_index, tuple(map(float, x)),
                                            tuple(map(float, xp))))

    def feasible(self, R, trainable=None, timeout: float | None = None) -> bool:
        """Whether some choice of the trainable activations meets every constraint."""
        R = np.asarray(R, dtype=float)
        tr = np.ones(len(R), dtype=bool) if trainable is None else np.asarray(trainable, dtype=bool)
        frozen_ok = all(
            c.rhs - sum(coef * R[k] for k, coef in c.terms) >= -1e-9
            for c in self.constraints if not any(tr[k] for k, _ in c.terms)
        )
        if not frozen_ok:
            return False
        red = reduce_constraints(self.constraints, R, tr)
        if not red:
            return True
        lin = [LinearConstraint(c.terms, LE, c.rhs) for c in red]
        res = check_feasible(lin, num_vars=int(tr.sum()), timeout=timeout)
        if res.status == Status.TIMEOUT:
            raise TrainingFailure("ledger feasibility check timed out")
        return res.feasible


def _difference(verdict: Verdict, offset: int = 0) -> dict[int, float]:
    """Coefficients of ``F_R(x) - F_R(x')`` over the clauses that differ."""
    diff: dict[int, float] = {}
    for k in verdict.active_x - verdict.active_x_prime:
        diff[k + offset] = 1.0
    for k in verdict.active_x_prime - verdict.active_x:
        diff[k + offset] = -1.0
    if not diff:
        raise TrainingFailure("counterexample with identical clause sets cannot violate a property")
    return diff


def gen_constraint(prop: PropertySpec, verdict: Verdict, offset: int = 0) -> list[ActivationConstraint]:
    """Halfspaces on ``R`` that rule out the counterexample's equivalence classes."""
    d = _difference(verdict, offset)
    pos = tuple(sorted(d.items()))
    neg = tuple((k, -c) for k, c in pos)
    if isinstance(prop, Monotonicity):
        return [ActivationConstraint(pos if prop.direction == "increasing" else neg, 0.0)]
    if isinstance(prop, Stability):
        return [ActivationConstraint(pos, prop.c), ActivationConstraint(neg, prop.c)]
    if isinstance(prop, (HighConfidence, Redundancy, MaxScoreDecrease)):
        return [ActivationConstraint(pos, prop.threshold - EPS_STRICT)]
    if isinstance(prop, SmallNeighborhood):
        return [ActivationConstraint(pos, prop.bound), ActivationConstraint(neg, prop.bound)]
    raise ModelError(f"no training constraint for {prop!r}")


def _benign_stays_benign(verdict: Verdict) -> list[ActivationConstraint]:
    """``F_R(x') >= eps``: the perturbed point keeps a malicious label."""
    return [ActivationConstraint(tuple((k, -1.0) for k in sorted(verdict.active_x_prime)), -EPS_STRICT)]


@dataclass(frozen=True)
class Target:
    """A property checked on clauses ``[start, end)`` (``end`` None = to the end)."""

    prop: PropertySpec
    start: int = 0
    end: int | None = None

    def view(self, model: LogicEnsemble) -> LogicEnsemble:
        if self.start == 0 and self.end is None:
            return model
        return model.subset(self.start, len(model) if self.end is None else self.end)


@dataclass
class FixResult:
    model: LogicEnsemble
    ok: bool
    epochs: int
    iterations: int
    message: str = ""
    verdicts: list = field(default_factory=list)
    timeout: float = 0.0


def fix(model: LogicEnsemble, targets: Sequence[Target], X, y, ledger: ConstraintLedger, cfg: FixerConfig,
        round_index: int = 0, trainable=None, state: OptimizerState | None = None,
        log: Callable[[dict], None] | None = None, timeout: float | None = None) -> FixResult:
    """Repair ``model`` until every target verifies, or report failure."""
    schema = model.schema
    timeout = cfg.timeout_base if timeout is None else timeout
    epochs = 0
    tr = None if trainable is None else np.asarray(trainable, dtype=bool)
    for it in range(cfg.max_cegis_iters):
        new = timeouts = 0
        pending = []
        for t in targets:
            view = t.view(model)
            v = verify(view, schema, t.prop, timeout=timeout, backend=cfg.backend)
            if log:
                rec = {"event": "verify", "round": round_index, "iteration": it, "property": describe(t.prop, schema),
                       "verdict": v.status, "ledger": len(ledger), "seconds": round(v.seconds, 4)}
                if v.reason:
                    rec["reason"] = v.reason
                log(rec)
            if v.verified:
                continue
            pending.append(v)
            if v.status == "unknown":
                timeouts += v.reason == "timeout"
                continue
            cons = gen_constraint(t.prop, v, t.start)
            if tr is not None and _dead(cons, tr) and isinstance(t.prop, (HighConfidence, Redundancy, MaxScoreDecrease)):
                cons = _benign_stays_benign(replace(v, active_x_prime=frozenset(k + t.start for k in v.active_x_prime)))
            ledger.add(cons, describe(t.prop, schema), it, round_index, v.x, v.x_prime)
            new += 1
        if not pending:
            return FixResult(model, True, epochs, it, verdicts=[], timeout=timeout)
        if new:
            if not ledger.feasible(model.activations, tr):
                return FixResult(model, False, epochs, it, "infeasible constraint ledger", pending, timeout)
        elif timeouts:
            if timeout >= cfg.timeout_max:
                return FixResult(model, False, epochs, it, "verifier timed out at the maximum timeout", pending, timeout)
            timeout = min(timeout * cfg.timeout_growth, cfg.timeout_max)
            if log:
                log({"event": "timeout", "round": round_index, "iteration": it, "timeout": timeout})
            continue
        model, state, rep = train_epoch(model, X, y, ledger.constraints, cfg.smooth, state, trainable=tr)
        epochs += 1
        if log:
            log({"event": "epoch", "round": round_index, "iteration": it, "loss": round(rep.loss, 6),
                 "ledger": len(ledger), "max_violation": rep.max_violation})
    return FixResult(model, False, epochs, cfg.max_cegis_iters, "CEGIS iteration limit reached", [], timeout)


def _dead(cons: Sequence[ActivationConstraint], trainable: np.ndarray) -> bool:
    return any(not any(trainable[k] for k, _ in c.terms) for c in cons)


# --------------------------------------------------------------------------
# outer loop


@dataclass
class Checkpoint:
    round: int
    model: LogicEnsemble
    verified: bool
    val_auc: float | None
    verdicts: list


@dataclass
class TrainResult:
    model: LogicEnsemble
    chosen_round: int
    checkpoints: list[Checkpoint]
    ledger: ConstraintLedger
    failures: list[dict]
    seconds: float


def _targets(props: Sequence[PropertySpec], idx: Sequence[int], model: LogicEnsemble, n_rounds: int,
             property_boosting: bool) -> list[Target]:
    out = []
    start = model.round_ranges()[-1][0] if model.n_rounds else 0
    for i in idx:
        p = props[i]
        if property_boosting and isinstance(p, Stability):
            out.append(Target(replace(p, c=p.c / n_rounds), start))
        elif property_boosting and isinstance(p, Monotonicity):
            out.append(Target(p, start))
        else:
            out.append(Target(p))
    return out


def train_full(X, y, schema: FeatureSchema, props: Sequence[PropertySpec], boost_cfg: BoostConfig,
               fixer_cfg: FixerConfig, X_val=None, y_val=None, log: Callable[[dict], None] | None = None,
               verify_timeout: float | None = None) -> TrainResult:
    """Boost one round at a time and fix the properties after each round.

    Returns the property-verified round checkpoint with the best validation AUC.
    """
    start = time.monotonic()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(X) == 0:
        raise TrainingFailure("empty training set")
    Xv, yv = (X, y) if X_val is None or len(X_val) == 0 else (np.asarray(X_val, float), np.asarray(y_val, int))
    props = list(props)
    model = empty_model(schema)
    ledger = ConstraintLedger()
    checkpoints: list[Checkpoint] = []
    failures: list[dict] = []
    timeout = fixer_cfg.timeout_base
    for b in range(boost_cfg.rounds):
        model = boost_round(model, X, y, boost_cfg, b)
        if log:
            log({"event": "boost", "round": b, "clauses": len(model)})
        if not props:
            checkpoints.append(Checkpoint(b, model, True, auc(yv, model.score_batch(Xv)), []))
            continue
        idx = fixer_cfg.properties_for(b, len(props))
        targets = _targets(props, idx, model, boost_cfg.rounds, fixer_cfg.property_boosting)
        trainable = None
        if fixer_cfg.property_boosting:
            trainable = np.zeros(len(model), dtype=bool)
            trainable[model.round_ranges()[-1][0]:] = True
        res = fix(model, targets, X, y, ledger, fixer_cfg, b, trainable=trainable, log=log, timeout=timeout)
        timeout = res.timeout
        if not res.ok:
            failures.append({"round": b, "reason": res.message, "ledger": len(ledger)})
            if log:
                log({"event": "failure", "round": b, "reason": res.message})
            break
        model = res.model
        verdicts = [verify(model, schema, p, timeout=verify_timeout or timeout, backend=fixer_cfg.backend)
                    for p in props]
        ok = all(v.verified for v in verdicts)
        val = auc(yv, model.score_batch(Xv))
        checkpoints.append(Checkpoint(b, model, ok, val, verdicts))
        if log:
            log({"event": "checkpoint", "round": b, "verified": ok, "val_auc": val,
                 "verdicts": [v.status for v in verdicts]})
    good = [c for c in checkpoints if c.verified]
    if not good:
        raise TrainingFailure("no boosting round produced a model satisfying every property",
                              {"failures": failures, "checkpoints": [(c.round, [v.status for v in c.verdicts])
                                                                     for c in checkpoints]})
    if not props:
        best = good[-1]
    else:
        best = max(good, key=lambda c: (-math.inf if c.val_auc is None else c.val_auc, -c.round))
    return TrainResult(best.model, best.round, checkpoints, ledger, failures, time.monotonic() - start)
