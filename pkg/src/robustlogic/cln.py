"""Differentiable relaxation of a logic ensemble and projected Adam training.

Atoms become ``sigmoid((beta - alpha * x_j - shift) / tau)``, clause bodies use
the product t-norm, and the score stays linear in the activations ``R``.
Constraints on ``R`` are kept by Euclidean projection after every step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Atom, Clause, LogicEnsemble, ModelError, sigmoid


class ProjectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class SmoothConfig:
    temperature: float = 1 / 500
    shift: float = 0.01
    learning_rate: float = 0.001
    lr_decay: float = 0.95
    batch_size: int = 1024
    malicious_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ModelError("temperature must be > 0")
        if self.batch_size < 1:
            raise ModelError("batch_size must be >= 1")


@dataclass(frozen=True)
class ActivationConstraint:
    """``sum(coeff * R[k]) <= rhs``."""

    terms: tuple[tuple[int, float], ...]
    rhs: float

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((int(k), float(c)) for k, c in self.terms))

    def lhs(self, R) -> float:
        return float(sum(c * R[k] for k, c in self.terms))

    def violation(self, R) -> float:
        return max(0.0, self.lhs(R) - self.rhs)


def constraint_matrix(constraints, n: int):
    A = np.zeros((len(constraints), n))
    b = np.zeros(len(constraints))
    for i, c in enumerate(constraints):
        for k, coef in c.terms:
            A[i, k] += coef
        b[i] = c.rhs
    return A, b


# --------------------------------------------------------------------------
# smooth parameters


@dataclass
class SmoothParams:
    """Padded ``[K, M]`` atom arrays plus the activation vector."""

    alpha: np.ndarray
    beta: np.ndarray
    feature: np.ndarray
    mask: np.ndarray
    R: np.ndarray

    @classmethod
    def from_model(cls, model: LogicEnsemble) -> "SmoothParams":
        K = len(model.clauses)
        M = max([len(c.atoms) for c in model.clauses] + [1])
        alpha = np.zeros((K, M))
        beta = np.zeros((K, M))
        feat = np.zeros((K, M), dtype=int)
        mask = np.zeros((K, M), dtype=bool)
        for k, c in enumerate(model.clauses):
            for m, a in enumerate(c.atoms):
                alpha[k, m], beta[k, m], feat[k, m], mask[k, m] = a.coeff, a.threshold, a.feature, True
        return cls(alpha, beta, feat, mask, model.activations.copy())

    def to_model(self, template: LogicEnsemble) -> LogicEnsemble:
        clauses = []
        for k, c in enumerate(template.clauses):
            atoms = tuple(
                Atom(float(self.alpha[k, m]), int(self.feature[k, m]), float(self.beta[k, m]))
                for m in range(len(c.atoms))
            )
            clauses.append(Clause(atoms, float(self.R[k])))
        return LogicEnsemble(template.schema, tuple(clauses), template.round_boundaries)

    @property
    def n_atoms(self) -> int:
        return int(self.mask.sum())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.alpha[self.mask], self.beta[self.mask], self.R])

    def set_flat(self, v: np.ndarray) -> None:
        na = self.n_atoms
        self.alpha[self.mask] = v[:na]
        self.beta[self.mask] = v[na:2 * na]
        self.R = np.array(v[2 * na:], dtype=float)

    def flat_grad(self, d_alpha, d_beta, d_R) -> np.ndarray:
        return np.concatenate([d_alpha[self.mask], d_beta[self.mask], d_R])

    def trainable_flat(self, clause_trainable: np.ndarray) -> np.ndarray:
        """Expand a per-clause trainable mask to the flat parameter layout."""
        per_atom = np.broadcast_to(clause_trainable[:, None], self.mask.shape)[self.mask]
        return np.concatenate([per_atom, per_atom, clause_trainable]).astype(bool)


def smooth_atom(alpha: float, beta: float, xj: float, cfg: SmoothConfig):
    """Value and partials (d/d alpha, d/d beta) of one smoothed atom."""
    v = float(sigmoid((beta - alpha * xj - cfg.shift) / cfg.temperature))
    d = v * (1 - v) / cfg.temperature
    return v, -xj * d, d


def _forward(params: SmoothParams, X: np.ndarray, cfg: SmoothConfig):
    xv = X[:, params.feature]  # [B, K, M]
    u = (params.beta[None] - params.alpha[None] * xv - cfg.shift) / cfg.temperature
    a = np.where(params.mask[None], sigmoid(u), 1.0)
    T = np.prod(a, axis=2)
    return xv, a, T


def _leave_one_out(a: np.ndarray) -> np.ndarray:
    """Product of every entry but one along the last axis, without division."""
    ones = np.ones(a.shape[:-1] + (1,))
    pre = np.cumprod(np.concatenate([ones, a[..., :-1]], axis=-1), axis=-1)
    suf = np.cumprod(np.concatenate([ones, a[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return pre * suf


def smooth_scores(params: SmoothParams, X, cfg: SmoothConfig) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _, _, T = _forward(params, X, cfg)
    return T @ params.R


def smooth_score(params: SmoothParams, x, cfg: SmoothConfig):
    """Smooth score of one input and its gradient (d_alpha, d_beta, d_R)."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    val, (da, db, dR) = _score_grad(params, X, np.ones(1), cfg)
    return float(val[0]), (da, db, dR)


def _score_grad(params: SmoothParams, X, upstream, cfg: SmoothConfig):
    """Scores and the gradient of ``sum(upstream * score)``."""
    xv, a, T = _forward(params, X, cfg)
    s = T @ params.R
    loo = _leave_one_out(a)
    # d score / d a_km = R_k * prod_{i != m} a_ki ; d a / d u = a(1-a) ; d u / d beta = 1/tau
    common = upstream[:, None, None] * params.R[None, :, None] * loo * a * (1 - a) / cfg.temperature
    common = np.where(params.mask[None], common, 0.0)
    d_beta = common.sum(axis=0)
    d_alpha = -(common * xv).sum(axis=0)
    d_R = upstream @ T
    return s, (d_alpha, d_beta, d_R)


def bce_loss(params: SmoothParams, X, y, cfg: SmoothConfig):
    """Mean weighted binary cross-entropy and its gradient (d_alpha, d_beta, d_R)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise ModelError("empty batch")
    w = np.where(y == 1, cfg.malicious_weight, 1.0)
    xv, a, T = _forward(params, X, cfg)
    s = T @ params.R
    z = np.where(y == 1, -s, s)
    loss = float(np.mean(w * np.logaddexp(0.0, z)))
    upstream = w * (sigmoid(s) - y) / len(y)
    _, grads = _score_grad(params, X, upstream, cfg)
    return loss, grads


# --------------------------------------------------------------------------
# optimiser


@dataclass
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    epoch: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int) -> "OptimizerState":
        return cls(np.zeros(size), np.zeros(size))


def adam_step(state: OptimizerState, params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    if params.shape != grad.shape or state.m.shape != grad.shape:
        raise ModelError("parameter, gradient and optimiser sizes differ")
    state.step += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    mhat = state.m / (1 - state.beta1 ** state.step)
    vhat = state.v / (1 - state.beta2 ** state.step)
    return params - lr * mhat / (np.sqrt(vhat) + state.eps)


# --------------------------------------------------------------------------
# projection


def _kkt_polish(R0, A, b, active, tol):
    """Exact projection if ``active`` is the optimal active set, else None."""
    act = np.asarray(active)
    for _ in range(len(act) + 1):
        if act.size == 0:
            R = R0.copy()
        else:
            Aa = A[act]
            lam = np.linalg.lstsq(Aa @ Aa.T, Aa @ R0 - b[act], rcond=None)[0]
            if np.any(lam < -1e-12):
                act = act[lam >= -1e-12]
                continue
            R = R0 - Aa.T @ lam
            if np.any(np.abs(Aa @ R - b[act]) > tol):
                return None
        if np.all(A @ R - b <= tol):
            return R
        return None
    return None


def project_R(R_hat, constraints, tol: float = 1e-9, max_iter: int = 10_000, A=None, b=None) -> np.ndarray:
    """Euclidean projection of ``R_hat`` onto ``{R : A R <= b}``.

    Dykstra's alternating projection identifies the active constraints; the
    result is then polished by solving the KKT system on that set, which is
    exact whenever the multipliers come out non-negative.
    """
    R0 = np.asarray(R_hat, dtype=float)
    if A is None:
        A, b = constraint_matrix(constraints, len(R0))
    if len(b) == 0 or np.all(A @ R0 - b <= tol):
        return R0.copy()
    norms = np.einsum("ij,ij->i", A, A)
    live = norms > 0
    if np.any(~live & (b < -tol)):
        raise ProjectionError("constraint 0 <= negative value is infeasible")
    x = R0.copy()
    incr = np.zeros_like(A)
    check = 1
    for it in range(1, max_iter + 1):
        prev = x.copy()
        for i in np.nonzero(live)[0]:
            y = x + incr[i]
            over = A[i] @ y - b[i]
            x = y - (over / norms[i]) * A[i] if over > 0 else y
            incr[i] = y - x
        settled = np.max(np.abs(x - prev)) <= tol
        if it == check or it == max_iter:
            check = max(check + 1, int(check * 1.5))
            lam = np.einsum("ij,ij->i", incr, A)
            for active in (np.nonzero(live & (np.abs(lam) > 1e-12))[0],
                           np.nonzero(live & (np.abs(A @ x - b) <= 1e-6 * (1 + np.abs(b))))[0]):
                R = _kkt_polish(R0, A, b, active, tol)
                if R is not None:
                    return R
            if settled and np.all(incr == 0):
                break
    if float(np.max(A @ x - b)) <= tol:
        return x
    raise ProjectionError(f"projection did not converge in {max_iter} sweeps")


def reduce_constraints(constraints, R, trainable) -> list[ActivationConstraint]:
    """Move frozen coordinates into the right-hand side.

    The result is indexed by position among the trainable clauses. Constraints
    with no trainable coefficient are dropped.
    """
    idx = {k: i for i, k in enumerate(np.nonzero(trainable)[0])}
    out = []
    for c in constraints:
        terms, rhs = [], c.rhs
        for k, coef in c.terms:
            if k in idx:
                terms.append((idx[k], coef))
            else:
                rhs -= coef * R[k]
        if terms:
            out.append(ActivationConstraint(tuple(terms), rhs))
    return out


# --------------------------------------------------------------------------
# training


@dataclass
class EpochReport:
    loss: float
    steps: int
    max_violation: float = 0.0
    violations: list = field(default_factory=list)


def batch_order(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).permutation(n)


def train_epoch(model: LogicEnsemble, X, y, constraints, cfg: SmoothConfig, state: OptimizerState | None = None,
                trainable=None, tol: float = 1e-9):
    """One projected-Adam epoch. Returns ``(model, state, report)``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    params = SmoothParams.from_model(model)
    K = len(model.clauses)
    clause_tr = np.ones(K, dtype=bool) if trainable is None else np.asarray(trainable, dtype=bool)
    flat_tr = params.trainable_flat(clause_tr)
    v = params.flat()
    if state is None or state.m.shape != v.shape:
        state = OptimizerState.zeros(v.size)
    lr = cfg.learning_rate * cfg.lr_decay ** state.epoch
    idx_tr = np.nonzero(clause_tr)[0]
    order = batch_order(len(X), cfg.seed)
    losses, steps, worst = [], 0, 0.0
    for start in range(0, len(order), cfg.batch_size):
        rows = order[start:start + cfg.batch_size]
        loss, grads = bce_loss(params, X[rows], y[rows], cfg)
        g = params.flat_grad(*grads)
        g[~flat_tr] = 0.0
        v = adam_step(state, v, g, lr)
        params.set_flat(v)
        if constraints:
            red = reduce_constraints(constraints, params.R, clause_tr)
            if red:
                sub = project_R(params.R[idx_tr], red, tol=tol)
                params.R[idx_tr] = sub
                v = params.flat()
            worst = max(worst, max(c.violation(params.R) for c in constraints))
        losses.append(loss)
        steps += 1
    state.epoch += 1
    return params.to_model(model), state, EpochReport(float(np.mean(losses)) if losses else 0.0, steps, worst)
