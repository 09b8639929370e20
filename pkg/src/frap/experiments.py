"""Parameter sweeps comparing protocols on paired random systems, and the flow-solver oracle check."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, TextIO

import numpy as np

from .assignment import PROTOCOLS, protocol_assignment
from .blocking import ArrivalEntry, BlockingCandidates
from .flownet import brute_force_bw, build_network, solve_max_cost_max_flow
from .rta import analyze
from .taskgen import US, GenConfig, generate

log = logging.getLogger(__name__)

CSV_HEADER = ["param", "value", "protocol", "total", "schedulable", "ratio", "mean_ms", "p95_ms"]

# sweep name -> GenConfig field
SWEEPS = {
    "N": "tasks_per_proc",
    "M": "processors",
    "A": "accesses_max",
    "L": "cs_range",
    "rsf": "rsf",
    "K": "resource_count",
}


@dataclass
class ExperimentSpec:
    vary: str
    values: list
    base: GenConfig = field(default_factory=GenConfig)
    systems: int = 200
    protocols: tuple[str, ...] = PROTOCOLS
    seed: int = 0
    mode: str = "approx"

    def check(self) -> list[str]:
        problems = []
        if self.vary not in SWEEPS:
            problems.append(f"vary must be one of {sorted(SWEEPS)}, got {self.vary!r}")
        if not self.values:
            problems.append("at least one sweep value is required")
        if self.systems < 1:
            problems.append("systems must be positive")
        unknown = [p for p in self.protocols if p not in PROTOCOLS]
        if unknown or not self.protocols:
            problems.append(f"protocols must be a nonempty subset of {PROTOCOLS}, got {list(self.protocols)}")
        if self.vary in SWEEPS:
            for v in self.values:
                try:
                    problems += [f"{self.vary}={v}: {p}" for p in self.config_for(v).check(strict=True)]
                except (TypeError, ValueError) as exc:
                    problems.append(f"{self.vary}={v}: {exc}")
        return problems

    def config_for(self, value) -> GenConfig:
        name = SWEEPS[self.vary]
        if name == "cs_range":
            return replace(self.base, cs_range=(self.base.cs_range[0], int(round(float(value) * US))))
        if name == "rsf":
            return replace(self.base, rsf=float(value))
        return replace(self.base, **{name: int(value)})


@dataclass
class ResultRow:
    param: str
    value: str
    protocol: str
    total: int
    schedulable: int
    ratio: float
    mean_ms: float
    p95_ms: float

    def as_list(self) -> list:
        return [self.param, self.value, self.protocol, self.total, self.schedulable,
                f"{self.ratio:.4f}", f"{self.mean_ms:.3f}", f"{self.p95_ms:.3f}"]


def system_seeds(seed: int, count: int) -> list[int]:
    """Per-system seeds, shared by every protocol and sweep value."""
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def evaluate(config: GenConfig, protocols: Iterable[str], mode: str = "approx"
             ) -> dict[str, tuple[bool, float]]:
    """Verdict and analyze() wall time (ms) of one generated system under each protocol."""
    system = generate(config).system
    out = {}
    for p in protocols:
        assignment = protocol_assignment(system, p, mode)
        start = time.perf_counter()
        report = analyze(system, assignment)
        out[p] = (report.schedulable, (time.perf_counter() - start) * 1e3)
    return out


def _evaluate_args(args):
    return evaluate(*args)


def summarize(param: str, value, protocol: str, results: list[tuple[bool, float]]) -> ResultRow:
    total = len(results)
    ok = sum(1 for verdict, _ in results if verdict)
    times = np.array([ms for _, ms in results], dtype=float)
    return ResultRow(param, str(value), protocol, total, ok, ok / total if total else 0.0,
                     float(times.mean()) if total else 0.0,
                     float(np.percentile(times, 95)) if total else 0.0)


def write_rows(rows: Iterable[ResultRow], stream: TextIO, header: bool = True):
    writer = csv.writer(stream, lineterminator="\n")
    if header:
        writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_list())
    stream.flush()


def run_experiment(spec: ExperimentSpec, workers: int = 1, out: TextIO | None = None,
                   progress: Callable[[str], None] | None = None) -> list[ResultRow]:
    """Run the sweep; rows of each finished point go to ``out`` as soon as they exist.

    On interrupt the rows finished so far stay written and KeyboardInterrupt is re-raised.
    """
    problems = spec.check()
    if problems:
        raise ValueError("; ".join(problems))
    seeds = system_seeds(spec.seed, spec.systems)
    rows: list[ResultRow] = []
    if out is not None:
        write_rows([], out)
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for value in spec.values:
            config = spec.config_for(value)
            jobs = [(config.with_seed(s), spec.protocols, spec.mode) for s in seeds]
            results = pool.map(_evaluate_args, jobs, chunksize=4) if pool else map(_evaluate_args, jobs)
            per_protocol: dict[str, list] = {p: [] for p in spec.protocols}
            for res in results:
                for p in spec.protocols:
                    per_protocol[p].append(res[p])
            point = [summarize(spec.vary, value, p, per_protocol[p]) for p in spec.protocols]
            rows += point
            if out is not None:
                write_rows(point, out, header=False)
            if progress:
                progress(", ".join(f"{r.protocol}={r.schedulable}/{r.total}" for r in point)
                         + f" at {spec.vary}={value}")
    except KeyboardInterrupt:
        log.warning("interrupted; %d rows written", len(rows))
        raise
    finally:
        if pool:
            pool.shutdown(cancel_futures=True)
    return rows


# -- flow solver oracle ----------------------------------------------------

def random_candidates(rng: np.random.Generator, max_items: int, max_hp: int = 4
                      ) -> tuple[BlockingCandidates, dict[str, int]]:
    """A random candidate structure shaped like the analysis output.

    Items are grouped by resource; arrival entries and each preempting task see
    whole resources, and some arrival entries are plain (no remote items).
    """
    n_res = int(rng.integers(1, 5))
    n_items = int(rng.integers(0, max_items + 1))
    owner = rng.integers(0, n_res, size=n_items)
    items = {}
    counter = [0] * n_res
    for r in owner:
        counter[r] += 1
        items[(f"r{r + 1}", counter[r])] = int(rng.integers(1, 20))
    by_res = {f"r{r + 1}": tuple(k for k in items if k[0] == f"r{r + 1}") for r in range(n_res)}

    arrival = {}
    for k, keys in by_res.items():
        if rng.random() < 0.6:
            remote = keys if rng.random() < 0.7 else ()
            arrival[k] = ArrivalEntry(k, int(rng.integers(1, 20)), remote)
    additional = {}
    nops = {}
    for h in range(int(rng.integers(0, max_hp + 1))):
        hid = f"h{h + 1}"
        chosen = [k for k in by_res if rng.random() < 0.5]
        nops[hid] = int(rng.integers(1, 4))
        keys = tuple(key for k in chosen for key in by_res[k])
        if keys:
            additional[hid] = keys
    used = {key for e in arrival.values() for key in e.remote}
    used |= {key for keys in additional.values() for key in keys}
    items = {k: v for k, v in items.items() if k in used or any(k[0] == r for r in arrival)}
    return BlockingCandidates(items, arrival, additional), nops


def flow_bound(candidates: BlockingCandidates, nops: dict[str, int], compact: bool = False) -> int:
    if candidates.empty:
        return 0
    return solve_max_cost_max_flow(build_network(candidates, nops, compact=compact))[1]


@dataclass
class OracleTally:
    checked: int
    equal: int
    counterexample: Path | None = None

    @property
    def ok(self) -> bool:
        return self.checked == self.equal


def oracle_check(count: int, max_items: int = 12, seed: int = 0,
                 solver: Callable[[BlockingCandidates, dict[str, int]], int] = flow_bound,
                 dump: Path | str | None = None) -> OracleTally:
    """Compare ``solver`` against exhaustive search on random structures.

    The first mismatching network is written to ``dump`` (if given).
    """
    rng = np.random.default_rng(seed)
    equal = 0
    written = None
    for n in range(count):
        cands, nops = random_candidates(rng, max_items)
        got, want = solver(cands, nops), brute_force_bw(cands, nops)
        if got == want:
            equal += 1
        elif written is None and dump is not None:
            written = Path(dump)
            net = build_network(cands, nops)
            written.write_text(f"# case {n}: solver {got}, exhaustive {want}\n" + net.dump())
            log.warning("counterexample at case %d written to %s", n, written)
    return OracleTally(count, equal, written)
