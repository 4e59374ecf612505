import pytest

from detourplan.milp import BINARY, CONTINUOUS, GE, INTEGER, LE, MilpInstance, ModelSpec, build
from detourplan.solver import (
    BACKENDS,
    ERROR,
    INFEASIBLE,
    OPTIMAL,
    BackendUnavailable,
    SolveLimits,
    solve,
    verify,
)

from toys import DIAMOND, instance


def _tiny(kind, lb=0.0, ub=None, rhs=3.0):
    inst = MilpInstance("tiny")
    x = inst.add_var("x", kind, lb, ub)
    inst.objective.append((x, 1.0))
    inst.add_row("floor", "test", {x: 1.0}, GE, rhs)
    return inst


@pytest.mark.parametrize("backend", sorted(BACKENDS))
def test_integer_floor(backend):
    if backend == "cbc":
        pytest.importorskip("pulp")
    res = solve(_tiny(INTEGER), backend=backend)
    assert res.status == OPTIMAL and res.objective == 3.0
    assert res.assignment(_tiny(INTEGER)) == {"x": 3.0}


@pytest.mark.parametrize("backend", sorted(BACKENDS))
def test_binary_above_one_infeasible(backend):
    if backend == "cbc":
        pytest.importorskip("pulp")
    res = solve(_tiny(BINARY, rhs=2.0), backend=backend)
    assert res.status == INFEASIBLE and res.values is None


def test_fractional_optimum_polished_and_verified():
    inst = MilpInstance("mix")
    x = inst.add_var("x", INTEGER, 0, 10)
    y = inst.add_var("y", CONTINUOUS, 0, None)
    inst.objective += [(x, 1.0), (y, 1.0)]
    inst.add_row("r1", "test", {x: 1.0, y: 1.0}, GE, 2.5)
    inst.add_row("r2", "test", {y: 1.0}, LE, 0.4, constant=0.1)
    res = solve(inst)
    assert res.optimal
    # y <= 0.3 forces x = 3, and y then drops to zero
    assert res.values == [3.0, 0.0] and res.objective == 3.0
    assert verify(inst, res.values) == []


def test_verify_flags_every_kind_of_violation():
    inst = MilpInstance("v")
    x = inst.add_var("x", BINARY)
    y = inst.add_var("y", CONTINUOUS, 0, 1)
    inst.add_row("cap", "test", {x: 1.0, y: 1.0}, LE, 1.0)
    assert verify(inst, [1.0, 0.0]) == []
    assert verify(inst, [1.0, 5e-7]) == []  # within tolerance
    found = verify(inst, [0.5, 1.5])
    assert any("not integral" in p for p in found)
    assert any("outside" in p for p in found)
    assert any(p.startswith("cap:") for p in found)


def test_unknown_backend():
    with pytest.raises(BackendUnavailable):
        solve(_tiny(INTEGER), backend="gurobi-free")


@pytest.mark.parametrize("name", ["bp111", "bp100", "ca", "e2e"])
def test_backends_agree_on_small_models(name):
    pytest.importorskip("pulp")
    links = DIAMOND + [("b", "c"), ("c", "t")]
    topo, routing, sc = instance(links, [("s", "t"), ("a", "c"), ("c", "s")], capacity=5.0)
    inst = build(sc, ModelSpec.named(name))
    a = solve(inst, SolveLimits(time_limit=60), backend="highs")
    b = solve(inst, SolveLimits(time_limit=60), backend="cbc")
    assert a.status == b.status
    if a.optimal:
        assert abs(a.objective - b.objective) < 1e-6
        assert verify(inst, a.values) == [] and verify(inst, b.values) == []


def test_lying_backend_is_downgraded(monkeypatch):
    import detourplan.solver as solver

    def liar(inst, limits, start=None):
        return OPTIMAL, 0.0, [1.0], "trust me"

    monkeypatch.setitem(solver.BACKENDS, "liar", liar)
    res = solve(_tiny(BINARY, rhs=2.0), backend="liar")
    assert res.status == ERROR
    assert any("floor" in v for v in res.violations)


def test_start_point_keeps_the_optimum():
    topo, routing, sc = instance(DIAMOND + [("b", "c"), ("c", "t")], [("s", "t"), ("c", "s")], capacity=5.0)
    full = build(sc, ModelSpec.named("bp111"))
    cold = solve(full)
    seeded = solve(build(sc, ModelSpec.named("bp100")), start=cold.assignment(full))
    assert seeded.optimal
    assert seeded.objective == solve(build(sc, ModelSpec.named("bp100"))).objective
    # unknown names are ignored, partial points are fine
    assert solve(full, start={"nope": 1.0, "y[0,a,t,a,b]": 1.0}).objective == cold.objective


def test_infeasible_claim_against_feasible_start_is_an_error(monkeypatch):
    import detourplan.solver as solver

    monkeypatch.setitem(solver.BACKENDS, "pessimist", lambda inst, limits, start=None: (INFEASIBLE, None, None, "no"))
    inst = _tiny(INTEGER)
    assert solve(inst, backend="pessimist").status == INFEASIBLE
    res = solve(inst, backend="pessimist", start={"x": 3.0})
    assert res.status == ERROR and "start point" in res.message
    assert solve(inst, backend="pessimist", start={"x": 1.0}).status == INFEASIBLE
