import dataclasses

import pytest

from detourplan.milp import ModelSpec, build
from detourplan.plans import extract_plan, make_route
from detourplan.scenarios import FailureEvent
from detourplan.sim import (
    DELIVER,
    DETECT_TAG_REVERSE,
    FORWARD_DETOUR,
    LINK,
    NODE,
    POP_TAG,
    REVERSE_HOP,
    STATE_TRANSITION,
    run_failure_scenario,
    validate_plan,
)
from detourplan.solver import solve
from detourplan.topology import nodes_to_arcs

from toys import DIAMOND, instance


def _plan(links, demands, name, **kw):
    topo, routing, sc = instance(links, demands, **kw)
    inst = build(sc, ModelSpec.named(name))
    return topo, routing, sc, extract_plan(sc, inst, solve(inst))


def _actions(pkt):
    return [(r["node"], r["action"]) for r in pkt.log]


def test_local_detour_needs_no_reverse_hop():
    topo, routing, sc, plan = _plan(DIAMOND, [("s", "t")], "bp100")
    f = FailureEvent("a", "t")
    assert plan.routes[(f, 0)].backward_hops == 0
    trace = run_failure_scenario(topo, routing, plan, f, LINK, 3)
    first = _actions(trace.packets[0])
    assert ("a", DETECT_TAG_REVERSE) in first and ("a", FORWARD_DETOUR) in first
    assert not any(a == REVERSE_HOP for _, a in first)
    assert trace.delivered() == (3, 3)


def test_one_hop_crankback_then_steady_detour():
    topo, routing, sc, plan = _plan(DIAMOND, [("s", "t")], "bp010")
    f = FailureEvent("a", "t")
    route = plan.routes[(f, 0)]
    assert route.reroute_node == "s" and route.backward_hops == 1
    trace = run_failure_scenario(topo, routing, plan, f, LINK, 4)
    first = _actions(trace.packets[0])
    assert [a for _, a in first].count(REVERSE_HOP) == 1
    assert first.index(("s", STATE_TRANSITION)) > first.index(("a", DETECT_TAG_REVERSE))
    for later in trace.packets[1:]:
        acts = [a for _, a in _actions(later)]
        assert REVERSE_HOP not in acts and STATE_TRANSITION not in acts
        assert acts[-1] == DELIVER
        assert _actions(later) == _actions(trace.packets[1])
    assert trace.transitions == [("s", 0)]


def test_pop_tag_on_rejoin():
    links = DIAMOND + [("t", "u"), ("b", "v"), ("v", "u")]
    topo, routing, sc, plan = _plan(links, [("s", "u")], "bp111")
    assert routing.nodes(0) == ["s", "a", "t", "u"]
    f = FailureEvent("s", "a")
    # pin the detour that rejoins the primary at t
    route = make_route(sc, f, 0, nodes_to_arcs(["s", "b", "t", "u"]))
    plan = dataclasses.replace(plan, routes={**plan.routes, (f, 0): route})
    trace = run_failure_scenario(topo, routing, plan, f, NODE, 1)
    acts = _actions(trace.packets[0])
    assert ("t", POP_TAG) in acts
    after = acts[acts.index(("t", POP_TAG)) + 1:]
    assert after[-1] == ("u", DELIVER)
    assert all(r["tag"] is None for r in trace.packets[0].log[-1:])


def test_corrupted_detour_gives_exactly_one_violation():
    topo, routing, sc, plan = _plan(DIAMOND, [("s", "t")], "bp010")
    f = FailureEvent("s", "a")
    good = plan.routes[(f, 0)]
    assert good.nodes == ["s", "b", "t"]
    bad = dataclasses.replace(good, path=tuple(nodes_to_arcs(["s", "b", "a", "t"])))
    broken = dataclasses.replace(plan, routes={**plan.routes, (f, 0): bad})
    report = validate_plan(topo, routing, broken, sc)
    assert len(report.avoidance_violations) == 1
    assert report.avoidance_violations[0].startswith("s,a node demand 0")
    assert not report.ok
    assert validate_plan(topo, routing, plan, sc).ok


def test_d2_demand_keeps_link_semantics_under_node_replay():
    topo, routing, sc, plan = _plan(DIAMOND, [("s", "t")], "bp100")
    f = FailureEvent("a", "t")
    assert 0 in sc.d2[f]
    trace = run_failure_scenario(topo, routing, plan, f, NODE, 2)
    # t itself is still reachable, the plan goes s-a-b-t
    assert trace.delivered() == (2, 2)
    assert _actions(trace.packets[-1])[-1] == ("t", DELIVER)


def test_node_replay_never_transits_failed_node():
    topo, routing, sc, plan = _plan(DIAMOND + [("t", "u"), ("b", "u")], [("s", "u"), ("u", "s")], "bp111")
    for f in sc.events:
        trace = run_failure_scenario(topo, routing, plan, f, NODE, 2)
        for p in trace.packets:
            if routing.by_id[p.demand].dst == f.m:
                continue
            assert f.m not in [r["node"] for r in p.log]


def test_traces_are_deterministic():
    topo, routing, sc, plan = _plan(DIAMOND + [("t", "u"), ("b", "u")], [("s", "u"), ("u", "s")], "bp111")
    a, b = [], []
    validate_plan(topo, routing, plan, sc, traces=a)
    validate_plan(topo, routing, plan, sc, traces=b)
    assert [t.jsonl() for t in a] == [t.jsonl() for t in b]


def test_argument_checks():
    topo, routing, sc, plan = _plan(DIAMOND, [("s", "t")], "bp100")
    with pytest.raises(ValueError):
        run_failure_scenario(topo, routing, plan, FailureEvent("a", "t"), "flood")
    with pytest.raises(ValueError):
        run_failure_scenario(topo, routing, plan, FailureEvent("a", "t"), LINK, 0)
    with pytest.raises(ValueError):
        run_failure_scenario(topo, routing, plan, FailureEvent("b", "t"), LINK, 1, sc)
