"""Linear programming and 0/1 integer feasibility.

``solve_lp`` is a dense two-phase tableau simplex (Dantzig pricing with a
Bland fallback once pivots stall). ``solve_ilp_feasibility`` runs depth-first
branch-and-bound over the LP relaxation. A HiGHS backend (through
``scipy.optimize.milp``) is available for large problems.

Strict inequalities are not representable: callers encode ``a < b`` as
``a <= b - EPS_STRICT``.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

FEAS_TOL = 1e-7
INT_TOL = 1e-6
PIV_TOL = 1e-9
EPS_STRICT = 1e-6

LE, GE, EQ = "<=", ">=", "=="
_RELATIONS = {LE: LE, GE: GE, EQ: EQ, "=": EQ, "≤": LE, "≥": GE}


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[tuple[int, float], ...]
    relation: str
    rhs: float

    def __post_init__(self):
        rel = _RELATIONS.get(self.relation)
        if rel is None:
            raise ValueError(f"unknown relation {self.relation!r}")
        object.__setattr__(self, "relation", rel)
        object.__setattr__(self, "terms", tuple((int(v), float(c)) for v, c in self.terms))
        if not all(math.isfinite(c) for _, c in self.terms) or not math.isfinite(self.rhs):
            raise ValueError("constraint coefficients must be finite")

    def lhs(self, x) -> float:
        return sum(c * x[v] for v, c in self.terms)

    def slack(self, x) -> float:
        """Non-negative when satisfied."""
        v = self.lhs(x)
        if self.relation == LE:
            return self.rhs - v
        if self.relation == GE:
            return v - self.rhs
        return -abs(v - self.rhs)


@dataclass
class IlpProblem:
    num_vars: int
    constraints: list[LinearConstraint] = field(default_factory=list)
    binary: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    objective: tuple[str, Sequence[tuple[int, float]]] | None = None

    def __post_init__(self):
        n = self.num_vars
        self.binary = np.zeros(n, dtype=bool) if self.binary is None else np.asarray(self.binary, dtype=bool)
        if self.lower is None:
            self.lower = np.where(self.binary, 0.0, -np.inf)
        if self.upper is None:
            self.upper = np.where(self.binary, 1.0, np.inf)
        self.lower = np.asarray(self.lower, dtype=float).copy()
        self.upper = np.asarray(self.upper, dtype=float).copy()
        if np.any(self.binary & ((self.lower < 0) | (self.upper > 1))):
            raise ValueError("binary variables must have bounds within [0, 1]")

    def add(self, terms, relation, rhs) -> None:
        self.constraints.append(LinearConstraint(tuple(terms), relation, float(rhs)))

    def max_violation(self, x) -> float:
        x = np.asarray(x, dtype=float)
        worst = 0.0
        for c in self.constraints:
            worst = max(worst, -c.slack(x))
        worst = max(worst, float(np.max(self.lower - x, initial=0.0)), float(np.max(x - self.upper, initial=0.0)))
        return worst

    def dense(self):
        """Return (A, row_lo, row_hi) with ``row_lo <= A x <= row_hi``."""
        m = len(self.constraints)
        A = np.zeros((m, self.num_vars))
        lo = np.full(m, -np.inf)
        hi = np.full(m, np.inf)
        for i, c in enumerate(self.constraints):
            for v, coef in c.terms:
                A[i, v] += coef
            if c.relation in (LE, EQ):
                hi[i] = c.rhs
            if c.relation in (GE, EQ):
                lo[i] = c.rhs
        return A, lo, hi


class Status(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    OPTIMAL = "optimal"
    UNBOUNDED = "unbounded"
    TIMEOUT = "timeout"


@dataclass
class SolveResult:
    status: Status
    x: np.ndarray | None = None
    value: float | None = None
    nodes: int = 0
    pivots: int = 0
    seconds: float = 0.0
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status in (Status.FEASIBLE, Status.OPTIMAL)


class _Timeout(Exception):
    pass


# --------------------------------------------------------------------------
# dense tableau simplex


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    nz = np.nonzero(np.abs(col) > 0.0)[0]
    if nz.size:
        T[nz] -= np.outer(col[nz], T[r])


def _run_simplex(T, basis, allowed, deadline, stats, max_iter=50_000):
    """Minimise the objective held in the last tableau row.

    Returns "optimal" or "unbounded". ``allowed`` masks columns that may enter.
    """
    m = T.shape[0] - 1
    degenerate_run = 0
    for _ in range(max_iter):
        if deadline is not None and stats["pivots"] % 64 == 0 and time.monotonic() > deadline:
            raise _Timeout
        z = T[-1, :-1]
        cand = np.nonzero((z < -PIV_TOL) & allowed)[0]
        if cand.size == 0:
            return "optimal"
        bland = degenerate_run > 25
        col = int(cand[0]) if bland else int(cand[np.argmin(z[cand])])
        a = T[:m, col]
        rows = np.nonzero(a > PIV_TOL)[0]
        if rows.size == 0:
            return "unbounded"
        ratios = T[rows, -1] / a[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12]
        row = int(ties[np.argmin(basis[ties])])
        degenerate_run = degenerate_run + 1 if best <= 1e-12 else 0
        _pivot(T, row, col)
        basis[row] = col
        stats["pivots"] += 1
    raise SolverError("simplex iteration limit reached")


def _standardize(problem: IlpProblem, lower, upper):
    """Map x = off + M y with y >= 0 and return rows over y.

    Fixed variables (lower == upper) are folded into the offset.
    """
    n = problem.num_vars
    cols = []  # (var, sign)
    off = np.zeros(n)
    extra_rows = []  # (col index, ub)
    for i in range(n):
        lo, hi = lower[i], upper[i]
        if lo > hi + FEAS_TOL:
            return None
        if math.isfinite(lo) and math.isfinite(hi) and hi - lo <= 0.0:
            off[i] = lo
            continue
        if math.isfinite(lo):
            off[i] = lo
            cols.append((i, 1.0))
            if math.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif math.isfinite(hi):
            off[i] = hi
            cols.append((i, -1.0))
        else:
            cols.append((i, 1.0))
            cols.append((i, -1.0))
    return off, cols, extra_rows


def _solve_dense(problem: IlpProblem, lower, upper, objective, deadline, stats):
    """Core two-phase solve with explicit bounds. objective: cost vector over x or None."""
    std = _standardize(problem, lower, upper)
    if std is None:
        return Status.INFEASIBLE, None, None
    off, cols, extra_rows = std
    ny = len(cols)
    A, rlo, rhi = problem.dense()
    M = np.zeros((problem.num_vars, ny))
    for j, (i, s) in enumerate(cols):
        M[i, j] = s
    Ay = A @ M
    base = A @ off
    rows, rels, rhs = [], [], []
    for i in range(A.shape[0]):
        if rlo[i] == rhi[i]:
            rows.append(Ay[i]); rels.append(EQ); rhs.append(rhi[i] - base[i])
            continue
        if math.isfinite(rhi[i]):
            rows.append(Ay[i]); rels.append(LE); rhs.append(rhi[i] - base[i])
        if math.isfinite(rlo[i]):
            rows.append(Ay[i]); rels.append(GE); rhs.append(rlo[i] - base[i])
    for j, ub in extra_rows:
        r = np.zeros(ny)
        r[j] = 1.0
        rows.append(r); rels.append(LE); rhs.append(ub)
    # drop rows with no structural coefficients after substitution
    keep_rows, keep_rels, keep_rhs = [], [], []
    for r, rel, b in zip(rows, rels, rhs):
        if not np.any(np.abs(r) > 0.0):
            ok = (rel == LE and b >= -FEAS_TOL) or (rel == GE and b <= FEAS_TOL) or (rel == EQ and abs(b) <= FEAS_TOL)
            if not ok:
                return Status.INFEASIBLE, None, None
            continue
        keep_rows.append(r); keep_rels.append(rel); keep_rhs.append(b)
    m = len(keep_rows)
    cost_y = np.zeros(ny)
    const_obj = 0.0
    if objective is not None:
        cost_y = objective @ M
        const_obj = float(objective @ off)
    if m == 0:
        if np.any(cost_y < -PIV_TOL):
            return Status.UNBOUNDED, None, None
        return Status.OPTIMAL, off.copy(), const_obj

    R = np.array(keep_rows)
    b = np.array(keep_rhs, dtype=float)
    rels = list(keep_rels)
    for i in range(m):
        if b[i] < 0:
            R[i] *= -1
            b[i] *= -1
            rels[i] = {LE: GE, GE: LE, EQ: EQ}[rels[i]]
    n_slack = sum(1 for r in rels if r != EQ)
    n_art = sum(1 for r in rels if r != LE)
    ncols = ny + n_slack + n_art
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :ny] = R
    T[:m, -1] = b
    basis = np.zeros(m, dtype=int)
    s_col, a_col = ny, ny + n_slack
    art_cols = []
    for i, rel in enumerate(rels):
        if rel == LE:
            T[i, s_col] = 1.0
            basis[i] = s_col
            s_col += 1
        else:
            if rel == GE:
                T[i, s_col] = -1.0
                s_col += 1
            T[i, a_col] = 1.0
            basis[i] = a_col
            art_cols.append(a_col)
            a_col += 1
    is_art = np.zeros(ncols, dtype=bool)
    is_art[art_cols] = True

    # phase 1
    if art_cols:
        T[-1, :] = 0.0
        T[-1, art_cols] = 1.0
        for i in range(m):
            if is_art[basis[i]]:
                T[-1] -= T[i]
        _run_simplex(T, basis, np.ones(ncols, dtype=bool), deadline, stats)
        if -T[-1, -1] > FEAS_TOL * max(1.0, float(np.max(np.abs(b)))):
            return Status.INFEASIBLE, None, None
        # drive remaining artificials out of the basis
        drop = []
        for i in range(m):
            if is_art[basis[i]]:
                nz = np.nonzero((np.abs(T[i, :ncols]) > PIV_TOL) & ~is_art)[0]
                if nz.size:
                    _pivot(T, i, int(nz[0]))
                    basis[i] = int(nz[0])
                else:
                    drop.append(i)
        if drop:
            keep = np.setdiff1d(np.arange(m), drop)
            T = np.vstack([T[keep], T[-1:]])
            basis = basis[keep]
            m = len(keep)
    allowed = ~is_art

    if objective is not None and np.any(cost_y != 0):
        T[-1, :] = 0.0
        T[-1, :ny] = cost_y
        for i in range(m):
            cb = T[-1, basis[i]]
            if cb != 0.0:
                T[-1] -= cb * T[i]
        outcome = _run_simplex(T, basis, allowed, deadline, stats)
        if outcome == "unbounded":
            return Status.UNBOUNDED, None, None

    y = np.zeros(ncols)
    y[basis] = T[:m, -1]
    y = np.maximum(y[:ny], 0.0)
    x = off + M @ y
    value = float(objective @ x) if objective is not None else None
    return Status.OPTIMAL, x, value


def _objective_vector(problem: IlpProblem):
    if problem.objective is None:
        return None, 1.0
    sense, terms = problem.objective
    c = np.zeros(problem.num_vars)
    for v, coef in terms:
        c[v] += coef
    sign = -1.0 if str(sense).lower().startswith("max") else 1.0
    return sign * c, sign


def solve_lp(problem: IlpProblem, timeout: float | None = None) -> SolveResult:
    """Solve the LP relaxation (integrality ignored)."""
    start = time.monotonic()
    deadline = None if timeout is None else start + timeout
    stats = {"pivots": 0}
    c, sign = _objective_vector(problem)
    try:
        status, x, value = _solve_dense(problem, problem.lower, problem.upper, c, deadline, stats)
    except _Timeout:
        return SolveResult(Status.TIMEOUT, pivots=stats["pivots"], seconds=time.monotonic() - start)
    except (SolverError, FloatingPointError, np.linalg.LinAlgError) as e:
        return SolveResult(Status.TIMEOUT, pivots=stats["pivots"], seconds=time.monotonic() - start, message=str(e))
    res = SolveResult(status, x, None, pivots=stats["pivots"], seconds=time.monotonic() - start)
    if status == Status.OPTIMAL:
        res.value = sign * value if value is not None else 0.0
    return res


def check_feasible(constraints: Sequence[LinearConstraint], num_vars: int | None = None,
                   lower=None, upper=None, timeout: float | None = None) -> SolveResult:
    """Phase-1 feasibility over continuous variables (free unless bounded)."""
    if num_vars is None:
        num_vars = 1 + max((v for c in constraints for v, _ in c.terms), default=-1)
    p = IlpProblem(num_vars, list(constraints), lower=lower, upper=upper)
    res = solve_lp(p, timeout)
    if res.status == Status.OPTIMAL:
        res.status = Status.FEASIBLE
    return res


# --------------------------------------------------------------------------
# branch and bound


def _bnb_native(problem: IlpProblem, timeout: float | None) -> SolveResult:
    start = time.monotonic()
    deadline = None if timeout is None else start + timeout
    stats = {"pivots": 0}
    binary = problem.binary
    stack = [(problem.lower.copy(), problem.upper.copy())]
    nodes = 0
    try:
        while stack:
            if deadline is not None and time.monotonic() > deadline:
                raise _Timeout
            lo, hi = stack.pop()
            nodes += 1
            status, x, _ = _solve_dense(problem, lo, hi, None, deadline, stats)
            if status != Status.OPTIMAL:
                continue
            frac = np.abs(x - np.round(x))
            cand = np.nonzero(binary & (frac > INT_TOL))[0]
            if cand.size == 0:
                xr = x.copy()
                xr[binary] = np.round(xr[binary])
                if problem.max_violation(xr) <= FEAS_TOL:
                    return SolveResult(Status.FEASIBLE, xr, nodes=nodes, pivots=stats["pivots"],
                                       seconds=time.monotonic() - start)
                # rounding broke a constraint: fix the binaries and re-check the rest
                lo2, hi2 = lo.copy(), hi.copy()
                lo2[binary] = xr[binary]
                hi2[binary] = xr[binary]
                st2, x2, _ = _solve_dense(problem, lo2, hi2, None, deadline, stats)
                if st2 == Status.OPTIMAL and problem.max_violation(x2) <= FEAS_TOL:
                    return SolveResult(Status.FEASIBLE, x2, nodes=nodes, pivots=stats["pivots"],
                                       seconds=time.monotonic() - start)
                # near-integral values hid the violation: keep branching on them
                cand = np.nonzero(binary & (frac > 0.0) & (lo != hi))[0]
                if cand.size == 0:
                    continue
            # most fractional, lowest id on ties
            dist = np.abs(x[cand] - 0.5)
            v = int(cand[np.argmin(dist)])
            lo1, hi1 = lo.copy(), hi.copy()
            lo1[v] = 1.0
            lo0, hi0 = lo.copy(), hi.copy()
            hi0[v] = 0.0
            stack.append((lo1, hi1))
            stack.append((lo0, hi0))
    except _Timeout:
        return SolveResult(Status.TIMEOUT, nodes=nodes, pivots=stats["pivots"], seconds=time.monotonic() - start)
    except (SolverError, np.linalg.LinAlgError) as e:
        return SolveResult(Status.TIMEOUT, nodes=nodes, pivots=stats["pivots"],
                           seconds=time.monotonic() - start, message=str(e))
    return SolveResult(Status.INFEASIBLE, nodes=nodes, pivots=stats["pivots"], seconds=time.monotonic() - start)


_HIGHS_CUTS = 25
_HIGHS_ROW_SCALE = 1e3


def _bnb_highs(problem: IlpProblem, timeout: float | None) -> SolveResult:
    from scipy.optimize import Bounds, LinearConstraint as SciConstraint, milp
    from scipy.sparse import csr_matrix

    start = time.monotonic()
    n = problem.num_vars
    if n == 0:
        ok = problem.max_violation(np.zeros(0)) <= FEAS_TOL
        return SolveResult(Status.FEASIBLE if ok else Status.INFEASIBLE, np.zeros(0) if ok else None)
    rows, cols, vals = [], [], []
    lo = np.empty(len(problem.constraints))
    hi = np.empty(len(problem.constraints))
    for i, c in enumerate(problem.constraints):
        # HiGHS accepts rows violated by up to ~1e-6, the size of the strict
        # margins; rows with fractional data are scaled so that cannot happen
        fractional = any(coef != round(coef) for _, coef in c.terms) or c.rhs != round(c.rhs)
        sc = _HIGHS_ROW_SCALE if fractional else 1.0
        for v, coef in c.terms:
            rows.append(i); cols.append(v); vals.append(coef * sc)
        lo[i] = c.rhs * sc if c.relation in (GE, EQ) else -np.inf
        hi[i] = c.rhs * sc if c.relation in (LE, EQ) else np.inf
    options = {"presolve": True}
    if timeout is not None:
        options["time_limit"] = max(float(timeout), 1e-3)
    cons = []
    if problem.constraints:
        A = csr_matrix((vals, (rows, cols)), shape=(len(problem.constraints), n))
        cons = [SciConstraint(A, lo, hi)]
    binary = problem.binary
    bounds = Bounds(problem.lower, problem.upper)
    integrality = binary.astype(int)
    for _ in range(_HIGHS_CUTS):
        res = milp(np.zeros(n), constraints=cons, integrality=integrality, bounds=bounds, options=options)
        elapsed = time.monotonic() - start
        if res.status != 0 or res.x is None:
            break
        x = np.asarray(res.x, dtype=float)
        x[binary] = np.round(x[binary])
        if problem.max_violation(x) <= FEAS_TOL:
            return SolveResult(Status.FEASIBLE, x, seconds=elapsed)
        if not np.all(binary):
            lo2, hi2 = problem.lower.copy(), problem.upper.copy()
            lo2[binary] = hi2[binary] = x[binary]
            st, x2, _ = _solve_dense(problem, lo2, hi2, None, None, {"pivots": 0})
            if st == Status.OPTIMAL and problem.max_violation(x2) <= FEAS_TOL:
                return SolveResult(Status.FEASIBLE, x2, seconds=time.monotonic() - start)
        # HiGHS accepted the point within its own tolerance; exclude this
        # binary pattern and ask again
        cut = np.where(x[binary] > 0.5, -1.0, 1.0)
        row = np.zeros(n)
        row[binary] = cut
        cons.append(SciConstraint(row[None, :], 1.0 - float(np.sum(x[binary] > 0.5)), np.inf))
        if timeout is not None:
            options["time_limit"] = max(float(timeout) - elapsed, 1e-3)
    else:
        return _bnb_native(problem, None if timeout is None else max(timeout - elapsed, 1e-3))
    if res.status == 2:
        return SolveResult(Status.INFEASIBLE, seconds=elapsed)
    if res.status == 1:
        return SolveResult(Status.TIMEOUT, seconds=elapsed, message=res.message)
    return SolveResult(Status.TIMEOUT, seconds=elapsed, message=f"highs status {res.status}: {res.message}")


BACKENDS = ("native", "highs")


def solve_ilp_feasibility(problem: IlpProblem, timeout: float | None = None,
                          backend: str = "native") -> SolveResult:
    """Decide whether a 0/1 integer point satisfies every constraint."""
    if backend == "native":
        return _bnb_native(problem, timeout)
    if backend == "highs":
        return _bnb_highs(problem, timeout)
    raise ValueError(f"unknown backend {backend!r}")
