"""Remote request counting, blocking queues and candidate blocking items.

A blocking queue for (task, resource) lists the worst-case remote blocking that
successive requests issued from the task's processor can suffer. Its first
``alpha - 1`` items are already charged as spin delay; the rest are the
unaccounted items that arrival blocking and re-request (additional) blocking
compete for. Every unaccounted item is identified by ``(resource, index)`` so
that it is charged at most once, no matter how many candidate lists hold it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .model import System, Task

ItemKey = tuple[str, int]  # (resource id, 1-based queue index)


def ceil_div(a: int, b: int) -> int:
    return (a + b - 1) // b


def zeta(system: System, task: Task, resource: str, response: int) -> int:
    """Requests for ``resource`` issued by the task and its local higher-priority tasks."""
    count = task.requests.get(resource, 0)
    for h in system.lhp(task):
        n = h.requests.get(resource, 0)
        if n:
            count += ceil_div(response, h.period) * n
    return count


def xi(system: System, task: Task, processor: int, resource: str, response: int,
       responses: Mapping[str, int]) -> int:
    """Requests for ``resource`` from a remote processor while the task is pending.

    Counts one extra (back-to-back) job per remote task via its response time.
    """
    if processor == task.processor:
        raise ValueError("xi is only defined for remote processors")
    return sum(ceil_div(response + responses[j.id], j.period) * n
               for j, n in system.demand[processor].get(resource, ()))


def request_counts(system: System, task: Task, responses: Mapping[str, int]
                   ) -> tuple[dict[str, int], dict[str, dict[int, int]]]:
    """All nonzero zeta and xi counts of ``task`` under the response-time map."""
    r_i = responses[task.id]
    zetas = dict(task.requests)
    for h in system.lhp(task):
        jobs = ceil_div(r_i, h.period)
        for k, n in h.requests.items():
            zetas[k] = zetas.get(k, 0) + jobs * n
    xis: dict[str, dict[int, int]] = {}
    for m, demand in enumerate(system.demand):
        if m == task.processor:
            continue
        for k, reqs in demand.items():
            count = 0
            for j, n in reqs:
                count += ceil_div(r_i + responses[j.id], j.period) * n
            xis.setdefault(k, {})[m] = count
    return zetas, xis


def request_queue(cs_len: int, count: int) -> list[int]:
    """Execution times of the requests one remote processor issues for a resource."""
    return [cs_len] * count


@dataclass(frozen=True)
class BlockingQueue:
    resource: str
    items: tuple[int, ...]
    alpha: int

    def __len__(self):
        return len(self.items)

    def __getitem__(self, n: int) -> int:
        """1-based access, matching the queue-index identity of items."""
        if not 1 <= n <= len(self.items):
            raise IndexError(n)
        return self.items[n - 1]

    def unaccounted(self) -> list[tuple[int, int]]:
        return [(n, self.items[n - 1]) for n in range(self.alpha, len(self.items) + 1)]


def blocking_queue(resource: str, cs_len: int, remote_counts: Mapping[int, int],
                   zeta_count: int) -> BlockingQueue:
    queues = [request_queue(cs_len, c) for c in remote_counts.values() if c > 0]
    length = max((len(q) for q in queues), default=0)
    items = [0] * length
    for q in queues:
        for n, value in enumerate(q):
            items[n] += value
    alpha = min(zeta_count, length) + 1
    return BlockingQueue(resource, tuple(items), alpha)


def build_blocking_queues(system: System, task: Task, zetas: Mapping[str, int],
                          xis: Mapping[str, Mapping[int, int]]) -> dict[str, BlockingQueue]:
    return {
        k: blocking_queue(k, system.cs_len(k), counts, zetas.get(k, 0))
        for k, counts in xis.items()
    }


def spin_delay_from_queues(queues: Mapping[str, BlockingQueue]) -> int:
    return sum(sum(q.items[:q.alpha - 1]) for q in queues.values())


# -- candidate blocking items ---------------------------------------------

def arrival_candidate_resources(system: System, assignment: Mapping[tuple[str, str], int],
                                task: Task) -> set[str]:
    """Resources whose access by a local lower-priority task can block the task's release."""
    out = set()
    for lo in system.llp(task):
        for k in lo.requests:
            if system.is_global(k):
                out.add(k)
            else:
                ceil = system.ceiling(k, task.processor)
                if ceil is not None and ceil >= task.priority:
                    out.add(k)
    return out


def propagates_remote_blocking(system: System, assignment: Mapping[tuple[str, str], int],
                               task: Task, resource: str) -> bool:
    """True if a lower-priority spinner of ``resource`` can hold off the task's release."""
    if not system.is_global(resource):
        return False
    return any(assignment[(lo.id, resource)] >= task.priority
               for lo in system.llp(task) if resource in lo.requests)


@dataclass(frozen=True)
class ArrivalEntry:
    """Arrival-blocking options from one resource: ``cs_len`` alone or plus a remote item."""
    resource: str
    cs_len: int
    remote: tuple[ItemKey, ...] = ()


@dataclass
class BlockingCandidates:
    items: dict[ItemKey, int] = field(default_factory=dict)
    arrival: dict[str, ArrivalEntry] = field(default_factory=dict)
    additional: dict[str, tuple[ItemKey, ...]] = field(default_factory=dict)

    def arrival_values(self, resource: str) -> list[int]:
        entry = self.arrival[resource]
        return [entry.cs_len] + [entry.cs_len + self.items[key] for key in entry.remote]

    def arrival_list(self) -> list[tuple[str, int]]:
        return [(k, v) for k in self.arrival for v in self.arrival_values(k)]

    def additional_values(self, hp_id: str) -> list[int]:
        return [self.items[key] for key in self.additional.get(hp_id, ())]

    @property
    def empty(self) -> bool:
        return not self.arrival and not self.additional


def _unaccounted_keys(queues: Mapping[str, BlockingQueue], resource: str) -> list[tuple[ItemKey, int]]:
    q = queues.get(resource)
    if q is None:
        return []
    return [((resource, n), v) for n, v in q.unaccounted()]


def arrival_candidates(system: System, assignment: Mapping[tuple[str, str], int], task: Task,
                       queues: Mapping[str, BlockingQueue]) -> dict[str, ArrivalEntry]:
    order = system.resource_order
    out = {}
    for k in sorted(arrival_candidate_resources(system, assignment, task), key=order.__getitem__):
        remote: tuple[ItemKey, ...] = ()
        if propagates_remote_blocking(system, assignment, task, k):
            remote = tuple(key for key, _ in _unaccounted_keys(queues, k))
        out[k] = ArrivalEntry(k, system.cs_len(k), remote)
    return out


def additional_candidate_resources(system: System, assignment: Mapping[tuple[str, str], int],
                                   task: Task, hp_task: Task) -> set[str]:
    """Resources whose spinning (by the task or its local higher-priority tasks) ``hp_task`` can preempt."""
    if hp_task.processor != task.processor or hp_task.priority <= task.priority:
        raise ValueError(f"{hp_task.id} is not a local higher-priority task of {task.id}")
    out = set()
    for x in [task, *system.lhp(task)]:
        for k in x.requests:
            if hp_task.priority > assignment[(x.id, k)]:
                out.add(k)
    return out


def additional_candidates(system: System, assignment: Mapping[tuple[str, str], int], task: Task,
                          queues: Mapping[str, BlockingQueue]) -> dict[str, tuple[ItemKey, ...]]:
    order = system.resource_order
    out = {}
    for h in system.lhp(task):
        resources = sorted(additional_candidate_resources(system, assignment, task, h),
                           key=order.__getitem__)
        keys = tuple(key for k in resources for key, _ in _unaccounted_keys(queues, k))
        if keys:
            out[h.id] = keys
    return out


def blocking_candidates(system: System, assignment: Mapping[tuple[str, str], int], task: Task,
                        queues: Mapping[str, BlockingQueue]) -> BlockingCandidates:
    arrival = arrival_candidates(system, assignment, task, queues)
    additional = additional_candidates(system, assignment, task, queues)
    resources = set(arrival)
    for h in system.lhp(task):
        resources |= additional_candidate_resources(system, assignment, task, h)
    items = {}
    for k in sorted(resources, key=system.resource_order.__getitem__):
        for key, value in _unaccounted_keys(queues, k):
            items[key] = value
    return BlockingCandidates(items, arrival, additional)
