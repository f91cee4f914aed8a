"""Acceptance criteria 1-9. Each test prints one pass/fail line."""
import random
import time

import numpy as np
import pytest

from acceptance_log import criterion
from fleet import KINDS, webworker_model, rand_model, rand_prop, url_ratio_model
from oracles import brute_force_violation, enumerate_binary, qp_active_set
from robustlogic.booster import BoostConfig, train_booster
from robustlogic.cln import ActivationConstraint, SmoothConfig, SmoothParams, bce_loss, project_R
from robustlogic.data import feature_std, metrics, split
from robustlogic.fixer import ConstraintLedger, FixerConfig, Target, fix, gen_constraint, train_full
from robustlogic.model import Atom, Clause, FeatureSchema, LogicEnsemble
from robustlogic.properties import (
    HighConfidence, MaxScoreDecrease, Monotonicity, SmallNeighborhood, Stability,
)
from robustlogic.solver import IlpProblem, Status, solve_ilp_feasibility, solve_lp
from robustlogic.synthetic import cryptojacking_like, monotone_2d
from robustlogic.verifier import verify


def test_criterion_1_verifier_matches_enumeration():
    with criterion(1, "verifier agrees with exhaustive (x, x') enumeration") as d:
        start = time.monotonic()
        for backend in ("highs", "native"):
            rng = random.Random(1)
            mismatches = 0
            for i in range(240):
                kind = KINDS[i % len(KINDS)]
                n, sch, m, raw = rand_model(rng)
                _, params, prop = rand_prop(rng, n, kind)
                expect = brute_force_violation(raw, n, range(6), kind, params)
                v = verify(m, sch, prop, backend=backend)
                if v.status == "unknown" or v.refuted != expect:
                    mismatches += 1
            assert mismatches == 0, f"{mismatches} mismatches on {backend}"
            d[backend] = "240/240"
        d["seconds"] = round(time.monotonic() - start, 1)
        assert time.monotonic() - start < 300


def webworker_data(n=300):
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.integers(0, 2, n), rng.integers(0, 8, n)]).astype(float)
    y = ((X[:, 0] == 1) & (X[:, 1] >= 2)).astype(int)
    return X, y


def test_criterion_2_webworker_and_url_ratio_examples():
    with criterion(2, "webworker monotonicity and URL-ratio stability examples") as d:
        m = webworker_model()
        mono = Monotonicity((1,))
        v = verify(m, None, mono)
        assert v.refuted
        # (wasm=1, ww=1) and (wasm=1, ww=3) activate exactly clauses {1} and {2}
        assert set(v.active_x) == set(np.nonzero(m.active_mask([[1, 1]])[0])[0])
        assert set(v.active_x_prime) == set(np.nonzero(m.active_mask([[1, 3]])[0])[0])
        assert gen_constraint(mono, v) == [ActivationConstraint(((1, 1.0), (2, -1.0)), 0.0)]
        X, y = webworker_data()
        res = fix(m, [Target(mono)], X, y, ConstraintLedger(), FixerConfig())
        assert res.ok and res.iterations <= 2
        assert verify(res.model, None, mono).verified
        d["cegis_iterations"] = res.iterations

        stab = Stability((0,), 1.0)
        v = verify(url_ratio_model(), None, stab)
        assert v.refuted and (set(v.active_x), set(v.active_x_prime)) == ({3}, {1})
        assert set(gen_constraint(stab, v)) == {ActivationConstraint(((1, -1.0), (3, 1.0)), 1.0),
                                                ActivationConstraint(((1, 1.0), (3, -1.0)), 1.0)}


def lemma_fleet():
    rng = random.Random(3)
    out = []
    for _ in range(40):
        n, sch, m, _ = rand_model(rng)
        subs = tuple(tuple(sorted(rng.sample(range(n), rng.randint(1, n)))) for _ in range(rng.randint(1, 2)))
        out.append((m, sch, subs))
    data = np.random.default_rng(3)
    for seed in range(8):
        X = data.integers(0, 6, (200, 3)).astype(float)
        y = (X.sum(axis=1) + data.normal(0, 1, 200) > 7).astype(int)
        sch = FeatureSchema.simple(3, "integer", 0, 5)
        m = train_booster(X, y, sch, BoostConfig(rounds=1 + seed % 3, max_depth=2 + seed % 2))
        out.append((m, sch, ((seed % 3,),)))
    return out


def test_criterion_3_lemma_max_decrease_implies_high_confidence():
    with criterion(3, "verified max-score-decrease implies verified high confidence") as d:
        fleet = lemma_fleet()
        checked = violations = 0
        for m, sch, subs in fleet:
            if verify(m, sch, MaxScoreDecrease(subs, 0.98)).verified:
                checked += 1
                if not verify(m, sch, HighConfidence(subs, 0.98)).verified:
                    violations += 1
        d.update(models=len(fleet), msd_verified=checked, violations=violations)
        assert len(fleet) >= 20 and checked >= 20 and violations == 0


def test_criterion_4_gradients():
    with criterion(4, "analytic smooth-model gradients match central differences") as d:
        rng = random.Random(4)
        worst = 0.0
        for _ in range(120):
            n = rng.randint(1, 3)
            clauses = []
            for _ in range(rng.randint(1, 5)):
                atoms = tuple(Atom(rng.choice([1.0, -1.0, 0.5, -2.0]), rng.randrange(n), rng.uniform(-2, 2))
                              for _ in range(rng.randint(0, 3)))
                clauses.append(Clause(atoms, rng.uniform(-2, 2)))
            p = SmoothParams.from_model(LogicEnsemble(FeatureSchema.simple(n), tuple(clauses)))
            cfg = SmoothConfig(temperature=rng.choice([0.25, 0.5, 1.0]), malicious_weight=rng.choice([0.2, 1.0]))
            X = np.array([[rng.uniform(-2, 2) for _ in range(n)] for _ in range(rng.randint(1, 10))])
            y = np.array([rng.randint(0, 1) for _ in range(len(X))])
            _, g = bce_loss(p, X, y, cfg)
            a = p.flat_grad(*g)
            v0 = p.flat().copy()
            num = np.zeros_like(v0)
            h = 1e-5
            for i in range(len(v0)):
                for s in (1, -1):
                    v = v0.copy()
                    v[i] += s * h
                    p.set_flat(v)
                    num[i] += s * bce_loss(p, X, y, cfg)[0]
            p.set_flat(v0)
            num /= 2 * h
            err = float(np.linalg.norm(a - num) / max(np.linalg.norm(a), np.linalg.norm(num), 1e-8))
            worst = max(worst, err)
        d["worst_relative_error"] = f"{worst:.1e}"
        assert worst < 1e-4


def test_criterion_5_projection():
    with criterion(5, "projection is feasible and matches the dense QP oracle") as d:
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(200):
            n = int(rng.integers(1, 6))
            m = int(rng.integers(1, 5))
            A = rng.choice([-1.0, 0.0, 1.0, 2.0], size=(m, n))
            b = A @ rng.normal(size=n) + rng.uniform(0, 1, m)
            R0 = rng.normal(0, 2, n)
            cons = [ActivationConstraint(tuple((k, A[i, k]) for k in range(n) if A[i, k]), b[i]) for i in range(m)]
            got = project_R(R0, cons)
            assert np.all(A @ got - b <= 1e-8)
            worst = max(worst, float(np.max(np.abs(got - qp_active_set(R0, A, b)))))
        d["cases"] = 200
        d["max_deviation"] = f"{worst:.1e}"
        assert worst <= 1e-6


@pytest.mark.slow
def test_criterion_6_monotone_synthetic():
    with criterion(6, "two-feature monotone training verifies with accuracy >= 0.90") as d:
        start = time.monotonic()
        data = monotone_2d(2000, seed=0)
        train, test, val = split(data, (0.7, 0.15, 0.15), seed=0)
        prop = Monotonicity((0,))
        res = train_full(train.X, train.y, data.schema, [prop], BoostConfig(rounds=4, max_depth=4), FixerConfig(),
                         val.X, val.y)
        acc = metrics(test.y, res.model.score_batch(test.X)).accuracy
        secs = time.monotonic() - start
        d.update(accuracy=round(acc, 3), seconds=round(secs, 1))
        assert verify(res.model, None, prop).verified
        assert acc >= 0.90 and secs < 600


@pytest.mark.slow
def test_criterion_7_combined_properties():
    with criterion(7, "combined cryptojacking-style properties verify within 10 points of the booster") as d:
        data = cryptojacking_like(2000, seed=0)
        train, test, _ = split(data, (0.7, 0.3, 0.0), seed=0)
        n = data.schema.n
        props = [
            Monotonicity(tuple(range(n))),
            Stability(tuple(range(n)), 0.1),
            HighConfidence(((data.schema.index("hash_function"),),), 0.98),
            SmallNeighborhood(0.2, 0.5, tuple(feature_std(train))),
        ]
        cfg = BoostConfig(rounds=4, max_depth=4)
        plain = train_booster(train.X, train.y, data.schema, cfg)
        res = train_full(train.X, train.y, data.schema, props, cfg, FixerConfig(property_boosting=True))
        statuses = [verify(res.model, None, p).status for p in props]
        base = metrics(test.y, plain.score_batch(test.X)).accuracy
        acc = metrics(test.y, res.model.score_batch(test.X)).accuracy
        d.update(booster_acc=round(base, 3), robust_acc=round(acc, 3), drop_points=round(100 * (base - acc), 1))
        assert statuses == ["verified"] * 4
        assert base - acc <= 0.10


def test_criterion_8_strength_monotonicity():
    with criterion(8, "verified at a strength implies verified at every weaker setting") as d:
        rng = random.Random(8)
        cs = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0]
        deltas = [0.6, 0.8, 0.9, 0.98, 0.999]
        violations = checks = 0
        for _ in range(60):
            n, sch, m, _ = rand_model(rng)
            feats = tuple(range(n))
            sig = tuple(rng.choice([0.5, 1.0, 2.0]) for _ in range(n))
            subs = ((rng.randrange(n),),)
            families = [
                [verify(m, sch, Stability(feats, c)).verified for c in cs],
                [verify(m, sch, SmallNeighborhood(1.0, c, sig)).verified for c in cs],
                [verify(m, sch, HighConfidence(subs, dl)).verified for dl in deltas],
            ]
            for seq in families:
                checks += 1
                # once verified, every later (weaker) setting must verify
                first = seq.index(True) if True in seq else len(seq)
                if not all(seq[first:]):
                    violations += 1
        d.update(families=checks, violations=violations)
        assert violations == 0


def test_criterion_9_ilp_engine():
    with criterion(9, "branch and bound agrees with enumeration; simplex textbook cases") as d:
        rng = random.Random(9)
        for backend in ("native", "highs"):
            for _ in range(500):
                n = rng.randint(1, 12)
                rows = []
                p = IlpProblem(n, binary=np.ones(n, dtype=bool))
                for _ in range(rng.randint(1, 8)):
                    coeffs = [rng.choice([0, 0, 1, -1, 2, -2, 3, 0.5]) for _ in range(n)]
                    rel = rng.choice(["<=", ">=", "=="])
                    rhs = rng.randint(-3, 4) + rng.choice([0, 0, 0.5])
                    rows.append((coeffs, rel, rhs))
                    p.add([(i, c) for i, c in enumerate(coeffs) if c], rel, rhs)
                r = solve_ilp_feasibility(p, backend=backend)
                assert r.feasible == enumerate_binary(n, rows), f"{backend} disagrees"
            d[backend] = "500/500"
        opt = IlpProblem(2, lower=np.zeros(2), objective=("max", [(0, 1), (1, 1)]))
        opt.add([(0, 1)], "<=", 1)
        opt.add([(1, 1)], "<=", 1)
        r = solve_lp(opt)
        assert r.status == Status.OPTIMAL and abs(r.value - 2) < 1e-9
        inf = IlpProblem(1, lower=np.zeros(1))
        inf.add([(0, 1)], ">=", 2)
        inf.add([(0, 1)], "<=", 1)
        assert solve_lp(inf).status == Status.INFEASIBLE
        unb = IlpProblem(1, lower=np.zeros(1), objective=("max", [(0, 1)]))
        assert solve_lp(unb).status == Status.UNBOUNDED
