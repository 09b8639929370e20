"""Random system generation for schedulability experiments.

Periods are log-uniform over [1 ms, 1000 ms] with implicit deadlines,
utilisations come from UUniFast-Discard, priorities are deadline-monotonic and
tasks are partitioned worst-fit by utilisation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .model import Resource, System, Task

MS = 1_000_000
US = 1_000

PERIOD_RANGE = (1 * MS, 1000 * MS)
MAX_ACCESS_REDRAWS = 100
RNG_NAME = "numpy.random.PCG64"


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenConfig:
    processors: int = 12  # M
    tasks_per_proc: int = 5  # N
    accesses_max: int = 5  # A
    cs_range: tuple[int, int] = (1 * US, 100 * US)  # L, ns
    rsf: float = 0.4
    resource_count: int = 12  # K
    total_util_factor: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cs_range", tuple(self.cs_range))

    def check(self, strict: bool = False) -> list[str]:
        """Config problems; ``strict`` also enforces the experiment ranges."""
        problems = []
        lo, hi = self.cs_range
        if not 0 < lo <= hi:
            problems.append(f"cs_range must satisfy 0 < lo <= hi, got {self.cs_range}")
        if self.processors < 1 or self.tasks_per_proc < 1:
            problems.append("processors and tasks_per_proc must be positive")
        if self.accesses_max < 1:
            problems.append("accesses_max must be positive")
        if self.resource_count < 0:
            problems.append("resource_count must be >= 0")
        if not 0 <= self.rsf <= 1:
            problems.append("rsf must lie in [0, 1]")
        if strict:
            if not 2 <= self.processors <= 20:
                problems.append(f"processors {self.processors} outside [2, 20]")
            if not 1 <= self.tasks_per_proc <= 8:
                problems.append(f"tasks_per_proc {self.tasks_per_proc} outside [1, 8]")
            if not 1 <= self.accesses_max <= 30:
                problems.append(f"accesses_max {self.accesses_max} outside [1, 30]")
            if not 0.1 <= self.rsf <= 0.5:
                problems.append(f"rsf {self.rsf} outside [0.1, 0.5]")
        return problems

    def with_seed(self, seed: int) -> "GenConfig":
        return replace(self, seed=seed)


@dataclass
class GenReport:
    system: System
    retries: int  # UUniFast-Discard redraws
    discarded: int  # access-pattern redraws that overran a task's budget
    rng: str = RNG_NAME


def uunifast_discard(n: int, total_util: float, rng: np.random.Generator | int | None = None,
                     max_tries: int = 10_000) -> tuple[list[float], int]:
    """Draw ``n`` utilisations summing to ``total_util``, each in (0, 1).

    Returns the values and the number of discarded draws.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 < total_util <= n:
        raise ValueError(f"total_util must lie in (0, {n}], got {total_util}")
    rng = np.random.default_rng(rng)
    for attempt in range(max_tries):
        utils = []
        remaining = total_util
        for i in range(1, n):
            nxt = remaining * rng.random() ** (1.0 / (n - i))
            utils.append(remaining - nxt)
            remaining = nxt
        utils.append(remaining)
        if all(0 < u < 1 for u in utils) or (n == 1 and 0 < utils[0] <= 1):
            return utils, attempt
    raise GenerationError(f"UUniFast-Discard gave up after {max_tries} draws")


def log_uniform_periods(n: int, rng: np.random.Generator, lo: int = PERIOD_RANGE[0],
                        hi: int = PERIOD_RANGE[1]) -> list[int]:
    draws = np.exp(rng.uniform(math.log(lo), math.log(hi), size=n))
    return [int(round(p)) for p in draws]


def worst_fit(utils: list[float], processors: int) -> list[int]:
    """Processor index per task; heaviest tasks placed first onto the least-loaded processor."""
    load = [0.0] * processors
    placement = [0] * len(utils)
    for i in sorted(range(len(utils)), key=lambda i: (-utils[i], i)):
        m = min(range(processors), key=lambda m: (load[m], m))
        placement[i] = m
        load[m] += utils[i]
    return placement


def _draw_accesses(rng, resource_count: int, accesses_max: int) -> dict[int, int]:
    count = int(rng.integers(1, resource_count + 1))
    chosen = rng.choice(resource_count, size=count, replace=False)
    return {int(k): int(rng.integers(1, accesses_max + 1)) for k in sorted(chosen)}


def _fit_accesses(rng, budget: int, cs: list[int], cfg: GenConfig) -> tuple[dict[int, int], int]:
    """Access pattern whose resource time fits in ``budget``; returns it with the redraw count."""
    def need(acc):
        return sum(n * cs[k] for k, n in acc.items())

    acc = _draw_accesses(rng, cfg.resource_count, cfg.accesses_max)
    redraws = 0
    while need(acc) > budget and redraws < MAX_ACCESS_REDRAWS:
        acc = _draw_accesses(rng, cfg.resource_count, cfg.accesses_max)
        redraws += 1
    while need(acc) > budget and any(n > 1 for n in acc.values()):
        acc = {k: max(1, n // 2) for k, n in acc.items()}
    # still too long with single accesses: shed the longest resources
    while acc and need(acc) > budget:
        del acc[max(acc, key=lambda k: (cs[k], k))]
    return acc, redraws


def generate(config: GenConfig) -> GenReport:
    problems = config.check()
    if problems:
        raise ValueError("; ".join(problems))
    rng = np.random.default_rng(config.seed)
    m, n_per = config.processors, config.tasks_per_proc
    n = m * n_per

    periods = log_uniform_periods(n, rng)
    utils, retries = uunifast_discard(n, config.total_util_factor * m * n_per, rng)
    total = [max(1, int(round(u * t))) for u, t in zip(utils, periods)]

    # deadline-monotonic: shorter deadline -> larger priority value; ties by index
    order = sorted(range(n), key=lambda i: (-periods[i], -i))
    priority = {i: p for p, i in enumerate(order, start=1)}
    placement = worst_fit(utils, m)

    lo, hi = config.cs_range
    k_count = config.resource_count
    cs = [int(rng.integers(lo, hi + 1)) for _ in range(k_count)]
    users: set[int] = set()
    if k_count > 0:
        n_users = min(n, math.ceil(config.rsf * n))
        users = {int(i) for i in rng.choice(n, size=n_users, replace=False)}

    tasks = []
    discarded = 0
    for i in range(n):
        acc: dict[int, int] = {}
        if i in users:
            acc, redraws = _fit_accesses(rng, total[i], cs, config)
            discarded += redraws
        resource_time = sum(cnt * cs[k] for k, cnt in acc.items())
        tasks.append(Task(
            id=f"t{i + 1}",
            wcet=total[i] - resource_time,
            period=periods[i],
            deadline=periods[i],
            priority=priority[i],
            processor=placement[i],
            requests={f"r{k + 1}": cnt for k, cnt in acc.items()},
        ))
    resources = tuple(Resource(f"r{k + 1}", c) for k, c in enumerate(cs))
    return GenReport(System(m, tuple(tasks), resources), retries, discarded)


def config_to_dict(config: GenConfig) -> dict:
    return asdict(config)
