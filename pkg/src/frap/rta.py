"""Iterative response-time analysis under FIFO spin locks with flexible spin priorities.

Each task's response time is its total execution time plus spin delay, the
joint arrival/additional blocking bound from the flow network, and local
higher-priority interference. Remote back-to-back request counts couple all
tasks, so every round recomputes all tasks from the previous round's response
times until nothing changes or a deadline is missed.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Mapping

from .blocking import (BlockingCandidates, blocking_candidates, build_blocking_queues, ceil_div,
                       request_counts)
from .flownet import FlowNetwork, bound_from_candidates, build_network, nop_counts
from .model import System, Task

MAX_ROUNDS = 1000


class AnalysisError(RuntimeError):
    pass


@dataclass
class TaskRecord:
    task: str
    response: int
    spin_delay: int
    blocking: int  # arrival + additional blocking, bounded jointly
    interference: int
    schedulable: bool
    converged: bool


@dataclass
class AnalysisReport:
    records: dict[str, TaskRecord]
    iterations: int
    elapsed: float  # seconds
    schedulable: bool
    diverged: bool = False
    history: list[dict[str, int]] = field(default_factory=list)

    def __getitem__(self, task_id: str) -> TaskRecord:
        return self.records[task_id]

    def to_dict(self) -> dict:
        return {
            "schedulable": self.schedulable,
            "diverged": self.diverged,
            "iterations": self.iterations,
            "elapsed_ms": self.elapsed * 1e3,
            "tasks": [asdict(r) for r in self.records.values()],
        }


def nop(task: Task, hp_task: Task, response: int) -> int:
    """Jobs of ``hp_task`` that can preempt one job of ``task``."""
    return ceil_div(response, hp_task.period)


def spin_delay(system: System, task: Task, zetas: Mapping[str, int],
               xis: Mapping[str, Mapping[int, int]]) -> int:
    """Remote requests that can delay the task's (and its local higher-priority tasks') requests.

    Each remote processor contributes at most one blocking request per local request.
    """
    total = 0
    for k, per_proc in xis.items():
        z = zetas.get(k, 0)
        if not z:
            continue
        total += sum(min(z, x) for m, x in per_proc.items() if m != task.processor) * system.cs_len(k)
    return total


def interference(system: System, task: Task, response: int) -> int:
    return sum(ceil_div(response, h.period) * system.total_wcet(h) for h in system.lhp(task))


def _task_terms(system: System, assignment: Mapping[tuple[str, str], int], task: Task,
                responses: Mapping[str, int]) -> tuple[int, int, int]:
    r_i = responses[task.id]
    zetas, xis = request_counts(system, task, responses)
    e = spin_delay(system, task, zetas, xis)
    queues = build_blocking_queues(system, task, zetas, xis)
    cands = blocking_candidates(system, assignment, task, queues)
    bw = bound_from_candidates(cands, nop_counts(system, task, r_i))
    return e, bw, interference(system, task, r_i)


def task_candidates(system: System, assignment: Mapping[tuple[str, str], int], task: Task | str,
                    responses: Mapping[str, int]) -> tuple[BlockingCandidates, dict[str, int]]:
    """Candidate blocking items and preemption counts of one task at the given response times."""
    task = system.task(task) if isinstance(task, str) else task
    zetas, xis = request_counts(system, task, responses)
    queues = build_blocking_queues(system, task, zetas, xis)
    cands = blocking_candidates(system, assignment, task, queues)
    return cands, nop_counts(system, task, responses[task.id])


def task_network(system: System, assignment: Mapping[tuple[str, str], int], task: Task | str,
                 responses: Mapping[str, int]) -> FlowNetwork:
    cands, nops = task_candidates(system, assignment, task, responses)
    return build_network(cands, nops)


def analyze(system: System, assignment: Mapping[tuple[str, str], int], *,
            max_rounds: int = MAX_ROUNDS, stop_on_miss: bool = True,
            record_history: bool = False) -> AnalysisReport:
    """Bound the worst-case response time of every task.

    Starts from each task's total execution time and applies Jacobi rounds.
    Stops at a fixed point, at the first deadline miss (unless ``stop_on_miss``
    is off), or after ``max_rounds`` rounds, in which case the report is
    flagged as diverged and unschedulable.
    """
    start = time.perf_counter()
    tasks = system.tasks
    wcet = {t.id: system.total_wcet(t) for t in tasks}
    responses = dict(wcet)
    history = [dict(responses)] if record_history else []

    if any(wcet[t.id] > t.deadline for t in tasks):
        records = {t.id: TaskRecord(t.id, wcet[t.id], 0, 0, 0, wcet[t.id] <= t.deadline, False)
                   for t in tasks}
        return AnalysisReport(records, 0, time.perf_counter() - start, False, history=history)

    records: dict[str, TaskRecord] = {}
    for rounds in range(1, max_rounds + 1):
        terms = {}
        updated = {}
        for t in tasks:
            e, bw, i = _task_terms(system, assignment, t, responses)
            terms[t.id] = (e, bw, i)
            updated[t.id] = wcet[t.id] + e + bw + i
            if updated[t.id] < responses[t.id]:
                raise AnalysisError(f"response time of {t.id} decreased "
                                    f"from {responses[t.id]} to {updated[t.id]} in round {rounds}")
        if record_history:
            history.append(dict(updated))
        converged = updated == responses
        records = {
            t.id: TaskRecord(t.id, updated[t.id], *terms[t.id],
                             schedulable=updated[t.id] <= t.deadline, converged=converged)
            for t in tasks
        }
        missed = any(not r.schedulable for r in records.values())
        if converged or (missed and stop_on_miss):
            return AnalysisReport(records, rounds, time.perf_counter() - start,
                                  converged and not missed, history=history)
        responses = updated

    return AnalysisReport(records, max_rounds, time.perf_counter() - start, False,
                          diverged=True, history=history)


def schedulable(system: System, assignment: Mapping[tuple[str, str], int]) -> bool:
    return analyze(system, assignment).schedulable
