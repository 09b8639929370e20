"""Joint arrival + additional blocking bound as a maximum-cost maximum-flow problem.

The network has one unit of source capacity for the arrival-blocking effect and
``NoP`` units for every local higher-priority task whose preemptions force
re-requests. Each unaccounted blocking item drains into the sink through a
unit-capacity edge, so an item is charged at most once.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

from .blocking import BlockingCandidates, BlockingQueue, ItemKey, ceil_div, blocking_candidates
from .model import System, Task

SOURCE = "src"
SINK = "snk"
ARRIVAL = "B"

BRUTE_FORCE_LIMIT = 16


class FlowError(RuntimeError):
    """Malformed network, or a solver invariant broke while augmenting."""


def resource_node(resource: str) -> str:
    return f"r:{resource}"


def hp_node(task_id: str) -> str:
    return f"h:{task_id}"


def item_node(key: ItemKey) -> str:
    return f"q:{key[0]}:{key[1]}"


@dataclass
class Edge:
    tail: str
    head: str
    capacity: int
    cost: int
    flow: int = 0


@dataclass
class FlowNetwork:
    nodes: list[str] = field(default_factory=lambda: [SOURCE, SINK])
    edges: list[Edge] = field(default_factory=list)

    def __post_init__(self):
        self._known = set(self.nodes)

    def add_node(self, name: str) -> str:
        if name not in self._known:
            self._known.add(name)
            self.nodes.append(name)
        return name

    def add_edge(self, tail: str, head: str, capacity: int, cost: int) -> Edge:
        e = Edge(tail, head, capacity, cost)
        self.edges.append(e)
        return e

    def out_edges(self, node: str) -> list[Edge]:
        return [e for e in self.edges if e.tail == node]

    def in_edges(self, node: str) -> list[Edge]:
        return [e for e in self.edges if e.head == node]

    @property
    def hp_nodes(self) -> list[str]:
        return [n for n in self.nodes if n.startswith("h:")]

    @property
    def item_nodes(self) -> list[str]:
        return [n for n in self.nodes if n.startswith(("q:", "g:"))]

    def dump(self) -> str:
        return "".join(f"edge {e.tail} {e.head} {e.capacity} {e.cost}\n" for e in self.edges)

    @classmethod
    def parse(cls, text: str) -> "FlowNetwork":
        net = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 5 or parts[0] != "edge":
                raise FlowError(f"line {lineno}: expected 'edge FROM TO CAP COST'")
            _, tail, head, cap, cost = parts
            net.add_node(tail)
            net.add_node(head)
            net.add_edge(tail, head, int(cap), int(cost))
        return net


def group_node(resource: str, value: int) -> str:
    return f"g:{resource}:{value}"


def build_network(candidates: BlockingCandidates, nop_counts: Mapping[str, int],
                  compact: bool = False) -> FlowNetwork:
    """Build the blocking network for one task.

    The default gives every unaccounted item its own unit-capacity node. With
    ``compact``, each resource keeps only as many of its largest items as the
    effects reaching it can absorb, and equal-valued items of a resource merge
    into one node whose sink capacity is their count. Items of one resource
    share the same neighbours, so both reductions leave the optimum unchanged.
    """
    items = candidates.items
    net = FlowNetwork()
    if not compact:
        node_of = {key: item_node(key) for key in items}
        for key in items:
            net.add_node(node_of[key])
            net.add_edge(node_of[key], SINK, 1, 0)
    else:
        reach: dict[str, int] = {}
        for entry in candidates.arrival.values():
            if entry.remote:
                reach[entry.resource] = reach.get(entry.resource, 0) + 1
        for hid, keys in candidates.additional.items():
            for k in {key[0] for key in keys}:
                reach[k] = reach.get(k, 0) + max(nop_counts[hid], 0)
        by_resource: dict[str, list[ItemKey]] = {}
        for key in items:
            by_resource.setdefault(key[0], []).append(key)
        node_of = {}
        size: dict[str, int] = {}
        for k, keys in by_resource.items():
            ranked = sorted(keys, key=lambda key: (-items[key], key[1]))[:reach.get(k, 0)]
            for key in ranked:
                name = group_node(k, items[key])
                node_of[key] = name
                size[name] = size.get(name, 0) + 1
        for name, count in size.items():
            net.add_node(name)
            net.add_edge(name, SINK, count, 0)

    def link(tail: str, keys, limit: int):
        if not compact:
            for key in keys:
                net.add_edge(tail, node_of[key], 1, items[key])
            return
        fan: dict[str, int] = {}
        for key in keys:
            if key in node_of:
                fan[node_of[key]] = fan.get(node_of[key], 0) + 1
        for name, count in fan.items():
            net.add_edge(tail, name, min(count, limit), int(name.rsplit(":", 1)[1]))

    if candidates.arrival:
        net.add_node(ARRIVAL)
        net.add_edge(SOURCE, ARRIVAL, 1, 0)
        for k, entry in candidates.arrival.items():
            v = net.add_node(resource_node(k))
            net.add_edge(ARRIVAL, v, 1, entry.cs_len)
            net.add_edge(v, SINK, 1, 0)
            link(v, entry.remote, 1)

    for hid, keys in candidates.additional.items():
        nop = nop_counts[hid]
        if nop <= 0:
            continue
        v = net.add_node(hp_node(hid))
        net.add_edge(SOURCE, v, nop, 0)
        link(v, keys, nop)
    return net


def solve_max_cost_max_flow(net: FlowNetwork) -> tuple[int, int]:
    """Maximum flow of maximum total cost via successive shortest paths on negated costs.

    Each phase labels nodes with a label-correcting (queue-based Bellman-Ford)
    search, since residual edges carry negative costs, then saturates every
    shortest augmenting path at once (primal-dual). Edge flows are written back
    to ``net``.
    """
    index = {name: n for n, name in enumerate(net.nodes)}
    for e in net.edges:
        if e.tail not in index or e.head not in index:
            raise FlowError(f"edge {e.tail}->{e.head} references an unknown node")
        if e.capacity < 0:
            raise FlowError(f"edge {e.tail}->{e.head} has negative capacity")
    if SOURCE not in index or SINK not in index:
        raise FlowError("network lacks a source or sink")

    size = len(net.nodes)
    adj: list[list[int]] = [[] for _ in range(size)]
    to: list[int] = []
    cap: list[int] = []
    cost: list[int] = []
    for e in net.edges:
        u, v = index[e.tail], index[e.head]
        adj[u].append(len(to)); to.append(v); cap.append(e.capacity); cost.append(-e.cost)
        adj[v].append(len(to)); to.append(u); cap.append(0); cost.append(e.cost)

    src, snk = index[SOURCE], index[SINK]
    inf = float("inf")

    def label() -> list:
        dist = [inf] * size
        queued = [False] * size
        dist[src] = 0
        queue = deque([src])
        queued[src] = True
        while queue:
            u = queue.popleft()
            queued[u] = False
            du = dist[u]
            for a in adj[u]:
                if cap[a] > 0:
                    v = to[a]
                    if du + cost[a] < dist[v]:
                        dist[v] = du + cost[a]
                        if not queued[v]:
                            queued[v] = True
                            queue.append(v)
        return dist

    def levels(dist) -> list[int]:
        level = [-1] * size
        level[src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for a in adj[u]:
                v = to[a]
                if cap[a] > 0 and level[v] < 0 and dist[u] + cost[a] == dist[v]:
                    level[v] = level[u] + 1
                    queue.append(v)
        return level

    def push(u, limit, dist, level, ptr) -> int:
        if u == snk:
            return limit
        while ptr[u] < len(adj[u]):
            a = adj[u][ptr[u]]
            v = to[a]
            if cap[a] > 0 and level[v] == level[u] + 1 and dist[u] + cost[a] == dist[v]:
                sent = push(v, min(limit, cap[a]), dist, level, ptr)
                if sent:
                    cap[a] -= sent
                    cap[a ^ 1] += sent
                    return sent
            ptr[u] += 1
        return 0

    flow_value = total = 0
    while True:
        dist = label()
        if dist[snk] == inf:
            break
        gain = -dist[snk]
        if gain < 0:
            raise FlowError(f"augmenting path lowered the blocking bound by {-gain}\n{net.dump()}")
        while True:
            level = levels(dist)
            if level[snk] < 0:
                break
            ptr = [0] * size
            while sent := push(src, inf, dist, level, ptr):
                flow_value += sent
                total += sent * gain

    for n, e in enumerate(net.edges):
        e.flow = cap[2 * n + 1]
    return flow_value, total


def bound_from_candidates(candidates: BlockingCandidates, nop_counts: Mapping[str, int]) -> int:
    if candidates.empty:
        return 0
    return solve_max_cost_max_flow(build_network(candidates, nop_counts, compact=True))[1]


def nop_counts(system: System, task: Task, response: int) -> dict[str, int]:
    return {h.id: ceil_div(response, h.period) for h in system.lhp(task)}


def bound_bw(system: System, assignment: Mapping[tuple[str, str], int], task: Task,
             queues: Mapping[str, BlockingQueue], response: int) -> int:
    """Worst-case arrival plus additional blocking of ``task`` for the given response time."""
    cands = blocking_candidates(system, assignment, task, queues)
    return bound_from_candidates(cands, nop_counts(system, task, response))


# -- validation oracles ----------------------------------------------------

def _arrival_options(candidates: BlockingCandidates) -> list[tuple[int, ItemKey | None]]:
    options = []
    for entry in candidates.arrival.values():
        options.append((entry.cs_len, None))
        for key in entry.remote:
            options.append((entry.cs_len + candidates.items[key], key))
    return options


def brute_force_bw(candidates: BlockingCandidates, nop_counts: Mapping[str, int],
                   limit: int = BRUTE_FORCE_LIMIT) -> int:
    """Exhaustive search over every feasible choice of blocking items.

    Tries each arrival option (or none), then every way of handing the
    remaining items to preempting tasks within their preemption budgets.
    """
    referenced = set()
    for entry in candidates.arrival.values():
        referenced.update(entry.remote)
    for keys in candidates.additional.values():
        referenced.update(keys)
    keys = sorted(referenced)
    if len(keys) > limit:
        raise ValueError(f"{len(keys)} items exceed the brute-force limit of {limit}")

    hps = sorted(candidates.additional)
    eligible = {key: tuple(n for n, h in enumerate(hps) if key in candidates.additional[h])
                for key in keys}

    def best_additional(free: tuple[ItemKey, ...]) -> int:
        @lru_cache(maxsize=None)
        def search(pos: int, budget: tuple[int, ...]) -> int:
            if pos == len(free):
                return 0
            key = free[pos]
            best = search(pos + 1, budget)
            for n in eligible[key]:
                if budget[n] > 0:
                    spent = budget[:n] + (budget[n] - 1,) + budget[n + 1:]
                    best = max(best, candidates.items[key] + search(pos + 1, spent))
            return best
        return search(0, tuple(max(nop_counts[h], 0) for h in hps))

    best = best_additional(tuple(keys))
    for value, used in _arrival_options(candidates):
        free = tuple(k for k in keys if k != used)
        best = max(best, value + best_additional(free))
    return best


def _restrict(candidates: BlockingCandidates, drop: set[ItemKey], arrival: bool, additional: bool
              ) -> BlockingCandidates:
    items = {k: v for k, v in candidates.items.items() if k not in drop}
    arr = {}
    if arrival:
        for r, entry in candidates.arrival.items():
            arr[r] = type(entry)(entry.resource, entry.cs_len,
                                 tuple(k for k in entry.remote if k not in drop))
    add = {}
    if additional:
        for h, keys in candidates.additional.items():
            kept = tuple(k for k in keys if k not in drop)
            if kept:
                add[h] = kept
    return BlockingCandidates(items, arr, add)


def sequential_bound(candidates: BlockingCandidates, nop_counts: Mapping[str, int],
                     order: str = "B-first") -> int:
    """Bound one blocking effect greedily, then the other on what is left.

    Diagnostic only: this is how separate analyses would combine the two
    effects, and it can undershoot the joint bound.
    """
    if order not in ("B-first", "W-first"):
        raise ValueError(f"order must be 'B-first' or 'W-first', got {order!r}")

    def best_arrival(cands: BlockingCandidates) -> tuple[int, ItemKey | None]:
        # options are listed in resource order, then queue index; ties keep the first
        best: tuple[int, ItemKey | None] = (0, None)
        for value, key in _arrival_options(cands):
            if value > best[0]:
                best = (value, key)
        return best

    if order == "B-first":
        b, used = best_arrival(candidates)
        rest = _restrict(candidates, {used} if used else set(), arrival=False, additional=True)
        return b + bound_from_candidates(rest, nop_counts)

    w_only = _restrict(candidates, set(), arrival=False, additional=True)
    if w_only.empty:
        w, taken = 0, set()
    else:
        net = build_network(w_only, nop_counts)
        w = solve_max_cost_max_flow(net)[1]
        used = {e.head for e in net.edges if e.tail.startswith("h:") and e.flow}
        taken = {key for key in w_only.items if item_node(key) in used}
    b, _ = best_arrival(_restrict(candidates, taken, arrival=True, additional=False))
    return w + b
