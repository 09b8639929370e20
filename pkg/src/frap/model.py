"""System model for partitioned fixed-priority multiprocessors with shared resources.

All time quantities are integer nanoseconds. Priorities are integers where a
larger value means a higher priority.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping

TIME_UNIT = "ns"

# (task id, resource id) -> spin priority
SpinAssignment = dict[tuple[str, str], int]


class SystemFormatError(ValueError):
    """Raised when a system file cannot be parsed into a System."""


@dataclass(frozen=True)
class Resource:
    id: str
    cs_len: int


@dataclass(frozen=True, eq=False)
class Task:
    id: str
    wcet: int  # pure WCET, no resource execution
    period: int
    deadline: int
    priority: int
    processor: int
    requests: Mapping[str, int] = field(default_factory=dict)

    @property
    def resources(self) -> frozenset[str]:
        return frozenset(self.requests)


@dataclass(frozen=True, eq=False)
class System:
    processors: int
    tasks: tuple[Task, ...]
    resources: tuple[Resource, ...]

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "resources", tuple(self.resources))

    # -- lookups ---------------------------------------------------------

    @cached_property
    def _task_by_id(self) -> dict[str, Task]:
        return {t.id: t for t in self.tasks}

    @cached_property
    def _resource_by_id(self) -> dict[str, Resource]:
        return {r.id: r for r in self.resources}

    @cached_property
    def resource_order(self) -> dict[str, int]:
        """Declaration index of every resource; used for deterministic tie-breaks."""
        return {r.id: n for n, r in enumerate(self.resources)}

    def task(self, task_id: str) -> Task:
        try:
            return self._task_by_id[task_id]
        except KeyError:
            raise KeyError(f"unknown task {task_id!r}") from None

    def resource(self, resource_id: str) -> Resource:
        try:
            return self._resource_by_id[resource_id]
        except KeyError:
            raise KeyError(f"unknown resource {resource_id!r}") from None

    def cs_len(self, resource_id: str) -> int:
        return self.resource(resource_id).cs_len

    @cached_property
    def by_processor(self) -> tuple[tuple[Task, ...], ...]:
        """Tasks on each processor, highest priority first."""
        buckets: list[list[Task]] = [[] for _ in range(self.processors)]
        for t in self.tasks:
            if 0 <= t.processor < self.processors:
                buckets[t.processor].append(t)
        return tuple(tuple(sorted(b, key=lambda t: -t.priority)) for b in buckets)

    @cached_property
    def max_priority(self) -> int:
        """The non-preemptive spin priority: the highest base priority in the system."""
        return max((t.priority for t in self.tasks), default=0)

    @cached_property
    def _requester_processors(self) -> dict[str, frozenset[int]]:
        procs: dict[str, set[int]] = {r.id: set() for r in self.resources}
        for t in self.tasks:
            for k in t.requests:
                procs.setdefault(k, set()).add(t.processor)
        return {k: frozenset(v) for k, v in procs.items()}

    @cached_property
    def demand(self) -> tuple[dict[str, list[tuple[Task, int]]], ...]:
        """Per processor: resource id -> [(requesting task, requests per release)]."""
        out: list[dict[str, list[tuple[Task, int]]]] = [{} for _ in range(self.processors)]
        for procs_tasks, bucket in zip(self.by_processor, out):
            for t in procs_tasks:
                for k, n in t.requests.items():
                    bucket.setdefault(k, []).append((t, n))
        return tuple(out)

    def is_global(self, resource_id: str) -> bool:
        return len(self._requester_processors.get(resource_id, ())) >= 2

    def requesters(self, resource_id: str) -> list[Task]:
        return [t for t in self.tasks if resource_id in t.requests]

    # -- derived task queries -------------------------------------------

    def lhp(self, task: Task | str) -> list[Task]:
        """Local tasks with a higher base priority."""
        t = self._resolve(task)
        return [h for h in self.by_processor[t.processor] if h.priority > t.priority]

    def llp(self, task: Task | str) -> list[Task]:
        """Local tasks with a lower base priority."""
        t = self._resolve(task)
        return [lo for lo in self.by_processor[t.processor] if lo.priority < t.priority]

    def ceiling(self, resource_id: str, processor: int) -> int | None:
        self.resource(resource_id)
        if not 0 <= processor < self.processors:
            raise KeyError(f"unknown processor {processor}")
        prios = [t.priority for t in self.by_processor[processor] if resource_id in t.requests]
        return max(prios) if prios else None

    def total_wcet(self, task: Task | str) -> int:
        """WCET including every resource access."""
        t = self._resolve(task)
        return t.wcet + sum(n * self.cs_len(k) for k, n in t.requests.items())

    def _resolve(self, task: Task | str) -> Task:
        if isinstance(task, Task):
            if self._task_by_id.get(task.id) is not task:
                raise KeyError(f"task {task.id!r} is not part of this system")
            return task
        return self.task(task)


def validate(system: System) -> list[str]:
    """Return a description of every model invariant the system breaks."""
    problems: list[str] = []
    if system.processors < 1:
        problems.append(f"processors: must be positive, got {system.processors}")

    seen_ids: set[str] = set()
    for t in system.tasks:
        if t.id in seen_ids:
            problems.append(f"task {t.id}: duplicate id")
        seen_ids.add(t.id)
    seen_res: set[str] = set()
    for r in system.resources:
        if r.id in seen_res:
            problems.append(f"resource {r.id}: duplicate id")
        seen_res.add(r.id)
        if r.cs_len <= 0:
            problems.append(f"resource {r.id}: cs_len must be > 0, got {r.cs_len}")

    for t in system.tasks:
        if not 0 <= t.processor < system.processors:
            problems.append(f"task {t.id}: processor {t.processor} outside [0, {system.processors})")
        if t.priority < 1:
            problems.append(f"task {t.id}: priority must be a positive integer, got {t.priority}")
        if t.wcet < 0:
            problems.append(f"task {t.id}: wcet must be >= 0, got {t.wcet}")
        if t.period <= 0:
            problems.append(f"task {t.id}: period must be > 0, got {t.period}")
        if t.deadline <= 0:
            problems.append(f"task {t.id}: deadline must be > 0, got {t.deadline}")
        if t.deadline > t.period:
            problems.append(f"task {t.id}: deadline {t.deadline} exceeds period {t.period}")
        for k, n in t.requests.items():
            if k not in seen_res:
                problems.append(f"task {t.id}: requests unknown resource {k}")
            if not isinstance(n, int) or n < 1:
                problems.append(f"task {t.id}: request count for {k} must be a positive integer, got {n}")

    # Priorities must be unique among tasks sharing a processor.
    by_key: dict[tuple[int, int], list[str]] = {}
    for t in system.tasks:
        by_key.setdefault((t.processor, t.priority), []).append(t.id)
    for (proc, prio), ids in sorted(by_key.items()):
        if len(ids) > 1:
            problems.append(f"priority {prio} on processor {proc}: shared by tasks {', '.join(ids)}")
    return problems


def validate_assignment(system: System, assignment: Mapping[tuple[str, str], int]) -> list[str]:
    """Check that spin priorities exist exactly for requested pairs and lie in [P_i, P_hat]."""
    problems = []
    p_hat = system.max_priority
    expected = {(t.id, k) for t in system.tasks for k in t.requests}
    for key in sorted(expected - set(assignment)):
        problems.append(f"spin priority missing for task {key[0]}, resource {key[1]}")
    for key in sorted(set(assignment) - expected):
        problems.append(f"spin priority given for unrequested pair task {key[0]}, resource {key[1]}")
    for (tid, k), p in sorted(assignment.items()):
        if (tid, k) not in expected:
            continue
        base = system.task(tid).priority
        if not base <= p <= p_hat:
            problems.append(f"task {tid}, resource {k}: spin priority {p} outside [{base}, {p_hat}]")
    return problems


# -- JSON format -----------------------------------------------------------

_TOP_KEYS = {"processors", "time_unit", "tasks", "resources", "spin_priorities"}
_TASK_KEYS = {"id", "wcet_pure", "period", "deadline", "priority", "processor", "requests"}
_RES_KEYS = {"id", "cs_len"}


def _check_keys(obj, allowed: set[str], required: set[str], where: str):
    if not isinstance(obj, dict):
        raise SystemFormatError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise SystemFormatError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise SystemFormatError(f"{where}: missing keys {sorted(missing)}")


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SystemFormatError(f"{where}: expected an integer, got {value!r}")
    return value


def system_from_dict(data: dict) -> tuple[System, SpinAssignment | None]:
    _check_keys(data, _TOP_KEYS, _TOP_KEYS - {"spin_priorities"}, "system")
    if data["time_unit"] != TIME_UNIT:
        raise SystemFormatError(f"time_unit must be {TIME_UNIT!r}, got {data['time_unit']!r}")
    resources = []
    for n, r in enumerate(data["resources"]):
        _check_keys(r, _RES_KEYS, _RES_KEYS, f"resources[{n}]")
        resources.append(Resource(str(r["id"]), _int(r["cs_len"], f"resources[{n}].cs_len")))
    tasks = []
    for n, t in enumerate(data["tasks"]):
        where = f"tasks[{n}]"
        _check_keys(t, _TASK_KEYS, _TASK_KEYS, where)
        if not isinstance(t["requests"], dict):
            raise SystemFormatError(f"{where}.requests: expected an object")
        tasks.append(Task(
            id=str(t["id"]),
            wcet=_int(t["wcet_pure"], f"{where}.wcet_pure"),
            period=_int(t["period"], f"{where}.period"),
            deadline=_int(t["deadline"], f"{where}.deadline"),
            priority=_int(t["priority"], f"{where}.priority"),
            processor=_int(t["processor"], f"{where}.processor"),
            requests={str(k): _int(v, f"{where}.requests.{k}") for k, v in t["requests"].items()},
        ))
    system = System(_int(data["processors"], "processors"), tuple(tasks), tuple(resources))

    assignment = None
    if "spin_priorities" in data:
        sp = data["spin_priorities"]
        if not isinstance(sp, dict):
            raise SystemFormatError("spin_priorities: expected an object")
        assignment = {}
        for tid, per_res in sp.items():
            if not isinstance(per_res, dict):
                raise SystemFormatError(f"spin_priorities.{tid}: expected an object")
            for k, p in per_res.items():
                assignment[(str(tid), str(k))] = _int(p, f"spin_priorities.{tid}.{k}")
    return system, assignment


def system_to_dict(system: System, assignment: Mapping[tuple[str, str], int] | None = None) -> dict:
    data = {
        "processors": system.processors,
        "time_unit": TIME_UNIT,
        "tasks": [
            {
                "id": t.id,
                "wcet_pure": t.wcet,
                "period": t.period,
                "deadline": t.deadline,
                "priority": t.priority,
                "processor": t.processor,
                "requests": dict(t.requests),
            }
            for t in system.tasks
        ],
        "resources": [{"id": r.id, "cs_len": r.cs_len} for r in system.resources],
    }
    if assignment is not None:
        data["spin_priorities"] = assignment_to_dict(assignment)
    return data


def assignment_to_dict(assignment: Mapping[tuple[str, str], int]) -> dict[str, dict[str, int]]:
    out: dict[str, dict[str, int]] = {}
    for (tid, k), p in assignment.items():
        out.setdefault(tid, {})[k] = p
    return out


def load_system(path: str | Path) -> tuple[System, SpinAssignment | None]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SystemFormatError(f"{path}: invalid JSON ({exc})") from exc
    return system_from_dict(data)


def dump_system(system: System, assignment: Mapping[tuple[str, str], int] | None = None,
                path: str | Path | None = None) -> str:
    text = json.dumps(system_to_dict(system, assignment), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text

