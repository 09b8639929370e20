import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frap.blocking import ArrivalEntry, BlockingCandidates, build_blocking_queues, request_counts
from frap.experiments import flow_bound, random_candidates
from frap.flownet import (ARRIVAL, SINK, SOURCE, FlowError, FlowNetwork, bound_bw, brute_force_bw,
                          build_network, hp_node, item_node, resource_node, sequential_bound,
                          solve_max_cost_max_flow)
from frap.rta import task_candidates

from conftest import TABLE3_RESPONSES as R, US


@pytest.fixture
def t2_candidates(table3):
    system, assignment = table3
    return task_candidates(system, assignment, "t2", R)


def edge_map(net):
    return {(e.tail, e.head): (e.capacity, e.cost) for e in net.edges}


def test_worked_example_network(t2_candidates):
    cands, nops = t2_candidates
    assert nops == {"t3": 2, "t4": 1}
    net = build_network(cands, nops)
    values = {item_node(k): v for k, v in cands.items.items()}
    assert set(net.item_nodes) == set(values)
    assert sorted(values.values()) == sorted([7 * US, 6 * US, 6 * US, 10 * US, 5 * US])
    edges = edge_map(net)
    assert edges[(SOURCE, ARRIVAL)] == (1, 0)
    for k, c in (("r1", 7), ("r2", 6), ("r3", 5)):
        assert edges[(ARRIVAL, resource_node(k))] == (1, c * US)
        assert edges[(resource_node(k), SINK)] == (1, 0)
    r3_targets = {h for (t, h) in edges if t == resource_node("r3")} - {SINK}
    assert {values[n] for n in r3_targets} == {10 * US, 5 * US}
    assert {h for (t, h) in edges if t == resource_node("r2")} == {SINK}
    assert edges[(SOURCE, hp_node("t3"))] == (2, 0)
    assert edges[(SOURCE, hp_node("t4"))] == (1, 0)
    for n in net.item_nodes:
        out = net.out_edges(n)
        assert [(e.head, e.capacity, e.cost) for e in out] == [(SINK, 1, 0)]


def test_worked_example_bounds(table3, t2_candidates):
    cands, nops = t2_candidates
    assert solve_max_cost_max_flow(build_network(cands, nops))[1] == 36 * US
    assert solve_max_cost_max_flow(build_network(cands, nops, compact=True))[1] == 36 * US
    assert brute_force_bw(cands, nops) == 36 * US
    assert sequential_bound(cands, nops, "B-first") == 34 * US
    assert sequential_bound(cands, nops, "W-first") == 33 * US
    system, assignment = table3
    t2 = system.task("t2")
    zetas, xis = request_counts(system, t2, R)
    queues = build_blocking_queues(system, t2, zetas, xis)
    assert bound_bw(system, assignment, t2, queues, R["t2"]) == 36 * US


def test_worked_example_flow_choice(t2_candidates):
    cands, nops = t2_candidates
    net = build_network(cands, nops)
    flow, cost = solve_max_cost_max_flow(net)
    used = {(e.tail, e.head) for e in net.edges if e.flow}
    # arrival via r1 with its remote item, t3 takes both r2 items, t4 the larger r3 item
    assert (ARRIVAL, resource_node("r1")) in used
    assert (resource_node("r1"), item_node(("r1", 3))) in used
    assert (hp_node("t3"), item_node(("r2", 2))) in used
    assert (hp_node("t3"), item_node(("r2", 3))) in used
    assert (hp_node("t4"), item_node(("r3", 2))) in used
    assert flow == 4


def test_empty_and_local_only():
    empty = BlockingCandidates()
    net = build_network(empty, {})
    assert net.nodes == [SOURCE, SINK] and net.edges == []
    assert solve_max_cost_max_flow(net) == (0, 0)
    assert brute_force_bw(empty, {}) == 0
    assert sequential_bound(empty, {}, "B-first") == sequential_bound(empty, {}, "W-first") == 0

    local = BlockingCandidates({}, {"r": ArrivalEntry("r", 9)}, {})
    net = build_network(local, {})
    assert sorted(edge_map(net)) == sorted([(SOURCE, ARRIVAL), (ARRIVAL, resource_node("r")),
                                            (resource_node("r"), SINK)])
    assert solve_max_cost_max_flow(net) == (1, 9)


def test_single_shared_item():
    # the item is reachable from the arrival path and from one preempting task
    key = ("r", 1)
    cands = BlockingCandidates({key: 10}, {"r": ArrivalEntry("r", 3, (key,))}, {"h": (key,)})
    nops = {"h": 1}
    assert brute_force_bw(cands, nops) == 13
    assert flow_bound(cands, nops) == 13
    net = build_network(cands, nops)
    solve_max_cost_max_flow(net)
    assert sum(e.flow for e in net.in_edges(item_node(key))) <= 1


def check_flow(net, flow_value, nops):
    inflow = {n: 0 for n in net.nodes}
    outflow = {n: 0 for n in net.nodes}
    for e in net.edges:
        assert 0 <= e.flow <= e.capacity
        outflow[e.tail] += e.flow
        inflow[e.head] += e.flow
    for n in net.nodes:
        if n not in (SOURCE, SINK):
            assert inflow[n] == outflow[n]
    assert outflow[SOURCE] == inflow[SINK] == flow_value
    assert flow_value <= 1 + sum(max(v, 0) for v in nops.values())
    for n in net.item_nodes:
        assert inflow[n] <= 1


def test_oracle_equivalence_and_dominance():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        cands, nops = random_candidates(rng, 12)
        want = brute_force_bw(cands, nops)
        net = build_network(cands, nops)
        flow, got = solve_max_cost_max_flow(net)
        assert got == want
        assert flow_bound(cands, nops, compact=True) == want
        check_flow(net, flow, nops)
        assert got >= sequential_bound(cands, nops, "B-first")
        assert got >= sequential_bound(cands, nops, "W-first")


@st.composite
def arbitrary_candidates(draw):
    # item lists need not follow resource boundaries here
    n = draw(st.integers(0, 9))
    keys = [("r", i + 1) for i in range(n)]
    items = {k: draw(st.integers(0, 30)) for k in keys}
    arrival = {}
    for r in draw(st.lists(st.sampled_from(["a", "b", "c"]), unique=True, max_size=3)):
        remote = tuple(k for k in keys if draw(st.booleans()))
        arrival[r] = ArrivalEntry(r, draw(st.integers(1, 30)), remote)
    additional, nops = {}, {}
    for h in range(draw(st.integers(0, 3))):
        chosen = tuple(k for k in keys if draw(st.booleans()))
        nops[f"h{h}"] = draw(st.integers(0, 3))
        if chosen:
            additional[f"h{h}"] = chosen
    return BlockingCandidates(items, arrival, additional), nops


@settings(max_examples=300, deadline=None)
@given(arbitrary_candidates())
def test_literal_network_matches_exhaustive_search(case):
    cands, nops = case
    assert flow_bound(cands, nops) == brute_force_bw(cands, nops)


def test_matches_networkx():
    rng = np.random.default_rng(7)
    for _ in range(200):
        cands, nops = random_candidates(rng, 12)
        if cands.empty:
            continue
        net = build_network(cands, nops)
        _, ours = solve_max_cost_max_flow(net)
        g = nx.DiGraph()
        for e in net.edges:
            g.add_edge(e.tail, e.head, capacity=e.capacity, weight=-e.cost)
        flow = nx.max_flow_min_cost(g, SOURCE, SINK)
        assert -nx.cost_of_flow(g, flow) == ours


def test_dump_parse_round_trip(t2_candidates):
    cands, nops = t2_candidates
    net = build_network(cands, nops)
    again = FlowNetwork.parse("# comment\n" + net.dump())
    assert edge_map(again) == edge_map(net)
    assert solve_max_cost_max_flow(again)[1] == 36 * US
    with pytest.raises(FlowError):
        FlowNetwork.parse("edge a b 1")


def test_malformed_networks():
    net = FlowNetwork()
    net.add_edge(SOURCE, "ghost", 1, 1)
    with pytest.raises(FlowError, match="unknown node"):
        solve_max_cost_max_flow(net)
    net = FlowNetwork()
    net.add_edge(SOURCE, SINK, -1, 0)
    with pytest.raises(FlowError, match="negative capacity"):
        solve_max_cost_max_flow(net)


def test_cost_lowering_augmentation_is_caught():
    # a negative edge cost would let an augmenting path lower the bound
    net = FlowNetwork.parse("edge src x 1 0\nedge x snk 1 -5\n")
    with pytest.raises(FlowError, match="lowered"):
        solve_max_cost_max_flow(net)


def test_brute_force_limit():
    keys = [("r", i) for i in range(20)]
    cands = BlockingCandidates({k: 1 for k in keys}, {}, {"h": tuple(keys)})
    with pytest.raises(ValueError, match="limit"):
        brute_force_bw(cands, {"h": 1})


def test_sequential_order_checked(t2_candidates):
    with pytest.raises(ValueError):
        sequential_bound(*t2_candidates, order="sideways")
