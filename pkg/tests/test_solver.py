import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import enumerate_binary
from robustlogic.solver import (
    IlpProblem, LinearConstraint, Status, check_feasible, solve_ilp_feasibility, solve_lp,
)

BACKENDS = ("native", "highs")


def lp(n, rows, objective=None, lower=None):
    p = IlpProblem(n, lower=np.zeros(n) if lower is None else lower, objective=objective)
    for terms, rel, rhs in rows:
        p.add(terms, rel, rhs)
    return p


def test_lp_optimal():
    p = lp(2, [([(0, 1)], "<=", 1), ([(1, 1)], "<=", 1)], ("max", [(0, 1), (1, 1)]))
    r = solve_lp(p)
    assert r.status == Status.OPTIMAL
    assert r.value == pytest.approx(2)
    assert np.allclose(r.x, [1, 1])


def test_lp_infeasible():
    r = solve_lp(lp(1, [([(0, 1)], ">=", 2), ([(0, 1)], "<=", 1)]))
    assert r.status == Status.INFEASIBLE


def test_lp_unbounded():
    r = solve_lp(lp(1, [], ("max", [(0, 1)])))
    assert r.status == Status.UNBOUNDED


def test_lp_textbook_minimum():
    # min 2a + 3b  s.t. a + b >= 4, a + 3b >= 6, a, b >= 0  -> (3, 1), value 9
    p = lp(2, [([(0, 1), (1, 1)], ">=", 4), ([(0, 1), (1, 3)], ">=", 6)], ("min", [(0, 2), (1, 3)]))
    r = solve_lp(p)
    assert r.status == Status.OPTIMAL
    assert r.value == pytest.approx(9)
    assert np.allclose(r.x, [3, 1])


def test_lp_equality_and_free_variables():
    # free variables: x - y == -3, x + y == 1 -> x=-1, y=2
    p = IlpProblem(2, objective=("min", [(0, 0.0)]))
    p.add([(0, 1), (1, -1)], "==", -3)
    p.add([(0, 1), (1, 1)], "==", 1)
    r = solve_lp(p)
    assert r.status == Status.OPTIMAL
    assert np.allclose(r.x, [-1, 2])


def test_check_feasible_examples():
    le = lambda t, b: LinearConstraint(t, "<=", b)
    assert check_feasible([le([(0, 1), (1, -1)], 0)]).feasible
    assert not check_feasible([le([(0, 1), (1, -1)], 0), le([(1, 1), (0, -1)], -1)]).feasible
    assert check_feasible([le([(2, 1), (0, -1)], 1), le([(0, 1), (2, -1)], 1)]).feasible


@pytest.mark.parametrize("backend", BACKENDS)
def test_bnb_examples(backend):
    p = IlpProblem(2, binary=[True, True])
    p.add([(0, 1), (1, 1)], "==", 1)
    p.add([(0, 1), (1, -1)], "==", 1)
    r = solve_ilp_feasibility(p, backend=backend)
    assert r.status == Status.FEASIBLE and np.allclose(r.x, [1, 0])

    p = IlpProblem(2, binary=[True, True])
    p.add([(0, 1), (1, -1)], "<=", 0)
    p.add([(0, 1)], ">=", 1)
    p.add([(1, 1)], "<=", 0)
    assert solve_ilp_feasibility(p, backend=backend).status == Status.INFEASIBLE


@pytest.mark.parametrize("backend", BACKENDS)
def test_bnb_relaxation_feasible_but_integer_infeasible(backend):
    p = IlpProblem(2, binary=[True, True])
    p.add([(0, 2), (1, 2)], "==", 1)
    assert solve_lp(p).status == Status.OPTIMAL
    assert solve_ilp_feasibility(p, backend=backend).status == Status.INFEASIBLE


def test_bnb_unknown_backend():
    with pytest.raises(ValueError):
        solve_ilp_feasibility(IlpProblem(1, binary=[True]), backend="cplex")


def random_binary_problem(rng, n):
    rows = []
    for _ in range(rng.randint(1, 8)):
        coeffs = [rng.choice([0, 0, 1, -1, 2, -2, 3, 0.5]) for _ in range(n)]
        rel = rng.choice(["<=", ">=", "=="])
        rhs = rng.randint(-3, 4) + rng.choice([0, 0, 0.5])
        rows.append((coeffs, rel, rhs))
    p = IlpProblem(n, binary=np.ones(n, dtype=bool))
    for coeffs, rel, rhs in rows:
        p.add([(i, c) for i, c in enumerate(coeffs) if c], rel, rhs)
    return p, rows


@pytest.mark.parametrize("backend", BACKENDS)
def test_bnb_matches_enumeration_small(backend):
    rng = random.Random(11)
    for _ in range(120):
        n = rng.randint(1, 8)
        p, rows = random_binary_problem(rng, n)
        r = solve_ilp_feasibility(p, backend=backend)
        assert r.feasible == enumerate_binary(n, rows)
        if r.feasible:
            assert p.max_violation(r.x) <= 1e-6
            assert set(np.round(r.x, 9)) <= {0.0, 1.0}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_bnb_agrees_between_backends(seed):
    rng = random.Random(seed)
    p, rows = random_binary_problem(rng, rng.randint(1, 10))
    a = solve_ilp_feasibility(p, backend="native")
    b = solve_ilp_feasibility(p, backend="highs")
    assert a.feasible == b.feasible


def test_native_timeout_reports_timeout():
    n = 40
    p = IlpProblem(n, binary=np.ones(n, dtype=bool))
    p.add([(i, 2.0) for i in range(n)], "==", 41)
    assert solve_ilp_feasibility(p, timeout=1e-9, backend="native").status == Status.TIMEOUT
