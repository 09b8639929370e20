from pathlib import Path

import pytest

from frap.model import Resource, System, Task, load_system

FIXTURES = Path(__file__).parent / "fixtures"
US = 1000

# response times of the worked-example system at its fixed point
TABLE3_RESPONSES = {"t1": 193000, "t2": 167000, "t3": 68000, "t4": 41000, "t5": 79000, "t6": 130000}


@pytest.fixture
def table3():
    return load_system(FIXTURES / "table3.json")


def build(tasks, resources=(), processors=None):
    """System from (id, C, T, P, proc, requests[, D]) tuples and (id, c) pairs."""
    built = []
    for spec in tasks:
        tid, c, t, p, proc, req = spec[:6]
        d = spec[6] if len(spec) > 6 else t
        built.append(Task(tid, c, t, d, p, proc, dict(req)))
    if processors is None:
        processors = max((t.processor for t in built), default=0) + 1
    return System(processors, tuple(built), tuple(Resource(k, c) for k, c in resources))
