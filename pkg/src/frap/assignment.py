"""Spin priority assignment, plus the MSRP and PWLP presets.

The search walks each processor from its highest-priority task down. When a
task looks overloaded, the spin priority of the lower-priority tasks on the
resource currently dominating its arrival blocking is dropped just below the
task's own priority, so that their spinning can no longer hold it off.

Overload is judged with request-rate approximations (requests per nanosecond,
kept as exact fractions) rather than the full analysis, which would need many
flow problems per step. ``mode="exact"`` swaps in the real analysis.
"""

from __future__ import annotations

import logging
from fractions import Fraction
from functools import cached_property
from typing import Mapping

from .blocking import arrival_candidate_resources, ceil_div, propagates_remote_blocking
from .model import SpinAssignment, System, Task

log = logging.getLogger(__name__)

PROTOCOLS = ("frap", "msrp", "pwlp")
PRESETS = ("frap-initial", "msrp", "pwlp")


class ApproxContext:
    """Request-rate figures of one system, shared across the whole search."""

    def __init__(self, system: System):
        self.system = system

    @cached_property
    def _remote_sums(self) -> list[dict[str, tuple[Fraction, int]]]:
        # per processor: resource -> (sum of N/T, sum of N)
        out = []
        for demand in self.system.demand:
            out.append({k: (sum((Fraction(n, t.period) for t, n in reqs), Fraction(0)),
                            sum(n for _, n in reqs))
                        for k, reqs in demand.items()})
        return out

    def rate(self, task: Task, resource: str) -> Fraction:
        return Fraction(task.requests.get(resource, 0), task.period)

    def local_rate(self, task: Task, resource: str) -> Fraction:
        """Request rate of ``resource`` by the task and its local higher-priority tasks."""
        return sum((self.rate(x, resource) for x in [task, *self.system.lhp(task)]), Fraction(0))

    def remote_rate(self, task: Task, processor: int, resource: str) -> Fraction:
        """Request rate from a remote processor, counting one back-to-back job per task."""
        per_t, count = self._remote_sums[processor].get(resource, (Fraction(0), 0))
        return per_t + Fraction(count, task.period)

    def remote_processors(self, task: Task, resource: str) -> list[int]:
        return [m for m, sums in enumerate(self._remote_sums)
                if m != task.processor and resource in sums]


def preset(system: System, protocol: str, ctx: ApproxContext | None = None) -> SpinAssignment:
    """Spin priorities for a named configuration.

    ``msrp`` spins non-preemptively, ``pwlp`` spins at base priority and
    ``frap-initial`` is the starting point of :func:`assign`.
    """
    protocol = protocol.lower()
    p_hat = system.max_priority
    if protocol == "msrp":
        return {(t.id, k): p_hat for t in system.tasks for k in t.requests}
    if protocol == "pwlp":
        return {(t.id, k): t.priority for t in system.tasks for k in t.requests}
    if protocol == "frap-initial":
        ctx = ctx or ApproxContext(system)
        return {(t.id, k): t.priority if local_requests_dominate(system, t, k, ctx) else p_hat
                for t in system.tasks for k in t.requests}
    raise ValueError(f"unknown preset {protocol!r}; expected one of {PRESETS}")


def local_requests_dominate(system: System, task: Task, resource: str,
                              ctx: ApproxContext | None = None) -> bool:
    """True if local requests out-pace every remote processor's requests for ``resource``.

    When they do, every remote request is already charged as spin delay and the
    task's own spin priority for the resource cannot change its blocking.
    """
    ctx = ctx or ApproxContext(system)
    local = ctx.local_rate(task, resource)
    return all(local >= ctx.remote_rate(task, m, resource)
               for m in ctx.remote_processors(task, resource))


def slack(system: System, task: Task) -> int:
    load = system.total_wcet(task) + sum(ceil_div(task.period, h.period) * system.total_wcet(h)
                                         for h in system.lhp(task))
    return max(0, task.deadline - load)


def preempting_tasks(system: System, assignment: Mapping[tuple[str, str], int], task: Task,
                     resource: str) -> list[Task]:
    """Local higher-priority tasks that can preempt someone spinning for ``resource``."""
    spinners = [x for x in [task, *system.lhp(task)] if resource in x.requests]
    if not spinners:
        return []
    lowest = min(assignment[(x.id, resource)] for x in spinners)
    return [h for h in system.lhp(task) if h.priority > lowest]


def _rerequest_rate(system, assignment, task, resource) -> Fraction:
    return sum((Fraction(1, h.period) for h in preempting_tasks(system, assignment, task, resource)),
               Fraction(0))


def arrival_rates(system: System, assignment: Mapping[tuple[str, str], int], task: Task,
                  ctx: ApproxContext) -> dict[str, Fraction]:
    """Approximate arrival-blocking rate of each resource that can block the task's release."""
    once = Fraction(1, task.period)
    out = {}
    for k in sorted(arrival_candidate_resources(system, assignment, task),
                    key=system.resource_order.__getitem__):
        rate = once
        if propagates_remote_blocking(system, assignment, task, k):
            local = ctx.local_rate(task, k)
            rerequests = _rerequest_rate(system, assignment, task, k)
            for m in ctx.remote_processors(task, k):
                left = max(Fraction(0), ctx.remote_rate(task, m, k) - local - rerequests)
                rate += min(once, left)
        out[k] = rate
    return out


def psi(system: System, assignment: Mapping[tuple[str, str], int], task: Task,
        ctx: ApproxContext | None = None) -> Fraction:
    """Approximate total blocking of one job of ``task`` (nanoseconds, exact fraction)."""
    ctx = ctx or ApproxContext(system)
    spin = additional = Fraction(0)
    resources = {k for x in [task, *system.lhp(task)] for k in x.requests}
    for k in resources:
        local = ctx.local_rate(task, k)
        remote = [ctx.remote_rate(task, m, k) for m in ctx.remote_processors(task, k)]
        if not remote:
            continue
        c = system.cs_len(k)
        spin += sum(min(local, r) for r in remote) * c
        rerequests = _rerequest_rate(system, assignment, task, k)
        if rerequests:
            additional += sum(min(rerequests, max(Fraction(0), r - local)) for r in remote) * c
    arrival = max((rate * system.cs_len(k) for k, rate in arrival_rates(system, assignment, task, ctx).items()),
                  default=Fraction(0))
    return (spin + additional + arrival) * task.period


def maxk_arrival(system: System, assignment: Mapping[tuple[str, str], int], task: Task,
                 ctx: ApproxContext | None = None) -> str | None:
    """Resource with the largest approximate arrival blocking; earliest-declared wins ties."""
    ctx = ctx or ApproxContext(system)
    best, best_value = None, None
    for k, rate in arrival_rates(system, assignment, task, ctx).items():
        value = rate * system.cs_len(k)
        if best_value is None or value > best_value:
            best, best_value = k, value
    return best


def assign(system: System, mode: str = "approx") -> SpinAssignment:
    """Search spin priorities that cut arrival blocking of tasks short on slack."""
    if mode not in ("approx", "exact"):
        raise ValueError(f"mode must be 'approx' or 'exact', got {mode!r}")
    ctx = ApproxContext(system)
    assignment = preset(system, "frap-initial", ctx)

    def overloaded(task: Task) -> bool:
        if mode == "approx":
            return psi(system, assignment, task, ctx) > slack(system, task)
        from .rta import analyze
        rec = analyze(system, assignment)[task.id]
        # an analysis stopped early by another task leaves a lower bound only
        return not (rec.converged and rec.schedulable)

    for tasks in system.by_processor:
        for task in tasks:
            lower = system.llp(task)
            targets = {k for lo in lower for k in lo.requests
                       if system.is_global(k) and assignment[(lo.id, k)] >= task.priority}
            while targets and overloaded(task):
                k = maxk_arrival(system, assignment, task, ctx)
                if k not in targets:
                    break
                for lo in lower:
                    if k in lo.requests:
                        assignment[(lo.id, k)] = min(assignment[(lo.id, k)], task.priority - 1)
                targets.discard(k)
                log.debug("task %s: lowered spin priority of %s below %d", task.id, k, task.priority)
    return assignment


def protocol_assignment(system: System, protocol: str, mode: str = "approx") -> SpinAssignment:
    protocol = protocol.lower()
    if protocol == "frap":
        return assign(system, mode)
    if protocol in ("msrp", "pwlp"):
        return preset(system, protocol)
    raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
