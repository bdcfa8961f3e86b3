import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from invmilp.errors import ResourceLimitError, StructureError, UnsupportedError
from invmilp.milp import (
    LinConstraint,
    MilpProblem,
    Sense,
    Status,
    VarKind,
    VarSpec,
    brute_force_solve,
    check_feasible,
    solve_lp,
    solve_milp,
    solve_milp_highs,
)
from oracles import grid_optimum, lp_vertex_optimum, random_int_milp


def cont(lo=0.0, hi=math.inf):
    return VarSpec(lo, hi, VarKind.CONTINUOUS)


def test_lp_single_bound():
    p = MilpProblem((cont(),), (LinConstraint({0: 1.0}, "<=", 3.0),), {0: 1.0})
    sol = solve_lp(p)
    assert sol.status == Status.OPTIMAL
    assert sol.point[0] == pytest.approx(3.0)
    assert sol.objective_value == pytest.approx(3.0)


def test_lp_degenerate_face():
    p = MilpProblem((cont(), cont()), (LinConstraint({0: 1.0, 1: 1.0}, "<=", 1.0),), {0: 1.0, 1: 1.0})
    sol = solve_lp(p)
    assert sol.objective_value == pytest.approx(1.0)
    assert check_feasible(p, sol.point)


def test_lp_infeasible_and_unbounded():
    infeasible = MilpProblem((cont(),), (LinConstraint({0: 1.0}, "<=", -1.0),), {0: 1.0})
    assert solve_lp(infeasible).status == Status.INFEASIBLE
    unbounded = MilpProblem((cont(),), (), {0: 1.0})
    assert solve_lp(unbounded).status == Status.UNBOUNDED


def test_lp_free_and_negative_vars():
    # max -x - y with x free, y <= -2 (no lower bound), x >= y + 1
    p = MilpProblem(
        (cont(-math.inf), cont(-math.inf, -2.0)),
        (LinConstraint({0: 1.0, 1: -1.0}, ">=", 1.0),),
        {0: -1.0, 1: -1.0},
    )
    assert solve_lp(p).status == Status.UNBOUNDED
    q = MilpProblem(p.vars, p.constraints, {0: -1.0, 1: 1.0})
    sol = solve_lp(q)
    # x >= y + 1 so -x + y <= -1, attained on the whole edge
    assert sol.objective_value == pytest.approx(-1.0)


def test_lp_equality_rows_with_redundancy():
    rows = (
        LinConstraint({0: 1.0, 1: 1.0}, "==", 2.0),
        LinConstraint({0: 2.0, 1: 2.0}, "==", 4.0),
        LinConstraint({0: 1.0}, "<=", 1.5),
    )
    p = MilpProblem((cont(), cont()), rows, {0: 3.0, 1: 1.0})
    sol = solve_lp(p)
    assert sol.objective_value == pytest.approx(5.0)


def test_lp_matches_vertex_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(60):
        n, m = 5, 8
        A = rng.integers(-4, 6, size=(m, n)).astype(float)
        b = rng.integers(1, 15, size=m).astype(float)
        c = rng.integers(-5, 6, size=n).astype(float)
        lower, upper = np.zeros(n), np.full(n, 6.0)
        p = MilpProblem(
            tuple(cont(0.0, 6.0) for _ in range(n)),
            tuple(LinConstraint({j: A[i, j] for j in range(n)}, "<=", b[i]) for i in range(m)),
            {j: c[j] for j in range(n)},
        )
        expected = lp_vertex_optimum(A, b, c, lower, upper)
        sol = solve_lp(p)
        assert sol.status == Status.OPTIMAL
        assert sol.objective_value == pytest.approx(expected, abs=1e-6)


def test_milp_binary_example():
    p = MilpProblem(
        (VarSpec(kind=VarKind.BINARY), VarSpec(kind=VarKind.BINARY)),
        (LinConstraint({0: 1.0, 1: 1.0}, "<=", 2.0),),
        {0: 3.0, 1: 2.0},
    )
    sol = solve_milp(p)
    assert sol.objective_value == 5.0
    assert list(sol.point) == [1.0, 1.0]


def test_milp_floor_of_relaxation():
    p = MilpProblem((VarSpec(0, 10, VarKind.INTEGER),), (LinConstraint({0: 2.0}, "<=", 3.0),), {0: 1.0})
    sol = solve_milp(p)
    assert sol.objective_value == 1.0
    assert solve_lp(p).objective_value == pytest.approx(1.5)


def test_milp_matches_grid_oracle():
    rng = np.random.default_rng(5)
    for _ in range(300):
        p = random_int_milp(rng)
        ref = grid_optimum(p)
        sol = solve_milp(p)
        if ref is None:
            assert sol.status == Status.INFEASIBLE
            continue
        assert sol.status == Status.OPTIMAL
        assert sol.objective_value == ref[0]
        assert check_feasible(p, sol.point)
        assert solve_lp(p).objective_value >= sol.objective_value - 1e-9


def test_milp_agrees_with_highs_on_mixed_problems():
    rng = np.random.default_rng(8)
    for _ in range(40):
        n = 6
        kinds = [VarKind.INTEGER if j % 2 == 0 else VarKind.CONTINUOUS for j in range(n)]
        vars_ = tuple(VarSpec(0.0, 7.0, k) for k in kinds)
        cons = tuple(
            LinConstraint({j: float(rng.integers(-3, 6)) for j in range(n)}, "<=", float(rng.integers(5, 30)))
            for _ in range(5)
        )
        p = MilpProblem(vars_, cons, {j: float(rng.normal()) for j in range(n)})
        a, b = solve_milp(p), solve_milp_highs(p)
        assert a.status == b.status
        assert a.objective_value == pytest.approx(b.objective_value, abs=1e-6)


def test_milp_unbounded_vs_infeasible():
    # integer var, continuous unbounded direction
    p = MilpProblem((VarSpec(0, 3, VarKind.INTEGER), cont()), (LinConstraint({0: 1.0}, ">=", 1.0),), {1: 1.0})
    assert solve_milp(p).status == Status.UNBOUNDED
    q = MilpProblem(
        (VarSpec(0, 3, VarKind.INTEGER), cont()),
        (LinConstraint({0: 2.0}, "==", 3.0),),
        {1: 1.0},
    )
    assert solve_milp(q).status == Status.INFEASIBLE


def test_milp_node_limit_carries_incumbent():
    rng = np.random.default_rng(0)
    n = 12
    w = rng.integers(5, 40, size=n).astype(float)
    p = MilpProblem(
        tuple(VarSpec(kind=VarKind.BINARY) for _ in range(n)),
        (LinConstraint({j: w[j] for j in range(n)}, "<=", float(w.sum() / 2 + 0.5)),),
        {j: float(w[j] + rng.integers(0, 3)) for j in range(n)},
    )
    with pytest.raises(ResourceLimitError) as info:
        solve_milp(p, node_limit=3)
    assert info.value.incumbent is None or len(info.value.incumbent[0]) == n


def test_milp_deterministic():
    rng = np.random.default_rng(3)
    p = random_int_milp(rng, max_vars=3, max_cons=4)
    a, b = solve_milp(p), solve_milp(MilpProblem.loads(p.dumps()))
    assert a.status == b.status
    if a.is_optimal:
        assert a.point.tobytes() == b.point.tobytes()


def test_brute_force_lexicographic_tie():
    p = MilpProblem(
        (VarSpec(kind=VarKind.BINARY), VarSpec(kind=VarKind.BINARY)),
        (LinConstraint({0: 1.0, 1: 1.0}, "<=", 1.0),),
        {0: 1.0, 1: 1.0},
    )
    sol = brute_force_solve(p)
    assert sol.objective_value == 1.0
    assert list(sol.point) == [0.0, 1.0]


def test_brute_force_infeasible_and_errors():
    p = MilpProblem((VarSpec(kind=VarKind.BINARY),), (LinConstraint({0: 1.0}, "<=", -1.0),), {0: 1.0})
    assert brute_force_solve(p).status == Status.INFEASIBLE
    with pytest.raises(UnsupportedError):
        brute_force_solve(MilpProblem((cont(0, 1),), (), {0: 1.0}))
    big = MilpProblem(tuple(VarSpec(0, 99, VarKind.INTEGER) for _ in range(4)), (), {0: 1.0})
    with pytest.raises(ResourceLimitError):
        brute_force_solve(big)


def test_brute_force_matches_grid_oracle_with_ties():
    rng = np.random.default_rng(21)
    for _ in range(100):
        p = random_int_milp(rng)
        ref = grid_optimum(p)
        sol = brute_force_solve(p)
        if ref is None:
            assert sol.status == Status.INFEASIBLE
        else:
            # nested loops visit points lexicographically and keep the first maximum
            assert sol.objective_value == ref[0]
            assert tuple(int(v) for v in sol.point) == ref[1]


def test_check_feasible_tolerance_and_reports():
    p = MilpProblem((cont(),), (LinConstraint({0: 1.0}, "<=", 3.0),), {0: 1.0})
    assert check_feasible(p, [3.0])
    assert check_feasible(p, [3.0000002])
    rep = check_feasible(p, [3.1])
    assert not rep
    assert rep.violations[0].kind == "constraint"
    assert not check_feasible(MilpProblem((VarSpec(0, 4, VarKind.INTEGER),), (), {}), [1.5])
    with pytest.raises(StructureError):
        check_feasible(p, [1.0, 2.0])


def test_check_feasible_agrees_with_row_residuals():
    rng = np.random.default_rng(4)
    for _ in range(200):
        n, m = 4, 5
        A = rng.normal(size=(m, n))
        b = rng.normal(size=m)
        senses = [list(Sense)[int(k)] for k in rng.integers(3, size=m)]
        p = MilpProblem(
            tuple(cont(-10, 10) for _ in range(n)),
            tuple(LinConstraint({j: A[i, j] for j in range(n)}, senses[i], b[i]) for i in range(m)),
            {},
        )
        x = rng.normal(size=n)
        act = A @ x
        ok = True
        for i in range(m):
            tol = 1e-7 * max(1.0, abs(b[i]))
            if senses[i] == Sense.LE:
                ok &= act[i] <= b[i] + tol
            elif senses[i] == Sense.GE:
                ok &= act[i] >= b[i] - tol
            else:
                ok &= abs(act[i] - b[i]) <= tol
        assert bool(check_feasible(p, x)) == bool(ok)


def test_structural_errors():
    with pytest.raises(StructureError):
        MilpProblem((cont(),), (LinConstraint({3: 1.0}, "<=", 1.0),), {})
    with pytest.raises(StructureError):
        MilpProblem((cont(),), (), {2: 1.0})
    with pytest.raises((StructureError, ValueError)):
        VarSpec(0, math.inf, VarKind.INTEGER)
    with pytest.raises((StructureError, ValueError)):
        VarSpec(2.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_serialization_round_trip(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    vars_ = tuple(VarSpec(float(rng.normal()), float(rng.normal()) + 5.0) for _ in range(n)) + (
        VarSpec(-math.inf, math.inf),
        VarSpec(kind=VarKind.BINARY),
    )
    cons = tuple(
        LinConstraint({j: float(rng.normal()) for j in range(len(vars_))}, list(Sense)[int(rng.integers(3))], float(rng.normal()))
        for _ in range(3)
    )
    p = MilpProblem(vars_, cons, {0: float(rng.normal()) / 3.0}, name="rt")
    q = MilpProblem.loads(p.dumps())
    assert q.dumps() == p.dumps()
    d1, d2 = p.dense, q.dense
    for a, b in zip(
        (d1.A, d1.rhs, d1.c, d1.lower, d1.upper), (d2.A, d2.rhs, d2.c, d2.lower, d2.upper)
    ):
        assert a.tobytes() == b.tobytes()
