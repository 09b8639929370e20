import csv
import io

import pytest

from frap.experiments import (CSV_HEADER, ExperimentSpec, flow_bound, oracle_check, run_experiment, system_seeds)
from frap.flownet import FlowNetwork, solve_max_cost_max_flow
from frap.taskgen import GenConfig

SMALL = GenConfig(processors=2, tasks_per_proc=2, resource_count=3, total_util_factor=0.05)


def read(text):
    return list(csv.reader(io.StringIO(text)))


def test_trivially_schedulable_point():
    spec = ExperimentSpec("rsf", [0.1], base=SMALL, systems=1)
    rows = run_experiment(spec)
    assert [r.protocol for r in rows] == ["frap", "msrp", "pwlp"]
    assert all(r.total == 1 and r.ratio == 1.0 for r in rows)


def test_csv_output_and_reproducibility():
    spec = ExperimentSpec("K", [2, 4], base=SMALL, systems=5, seed=9)
    out = io.StringIO()
    rows = run_experiment(spec, out=out)
    table = read(out.getvalue())
    assert table[0] == CSV_HEADER
    assert len(table) == 1 + 6
    assert [r[:3] for r in table[1:4]] == [["K", "2", p] for p in ("frap", "msrp", "pwlp")]
    again = run_experiment(spec)
    assert [(r.value, r.protocol, r.schedulable) for r in rows] == \
        [(r.value, r.protocol, r.schedulable) for r in again]


def test_worker_pool_matches_serial():
    spec = ExperimentSpec("N", [2], base=SMALL, systems=6, seed=1)
    serial = [(r.protocol, r.schedulable) for r in run_experiment(spec)]
    pooled = [(r.protocol, r.schedulable) for r in run_experiment(spec, workers=2)]
    assert serial == pooled


def test_sweep_values_map_to_config():
    spec = ExperimentSpec("L", [50], base=GenConfig())
    assert spec.config_for(50).cs_range == (1000, 50_000)
    assert ExperimentSpec("M", ["4"]).config_for("4").processors == 4
    assert ExperimentSpec("rsf", ["0.3"]).config_for("0.3").rsf == 0.3


@pytest.mark.parametrize("spec", [
    ExperimentSpec("rsf", []),
    ExperimentSpec("colour", [1]),
    ExperimentSpec("N", [99]),
    ExperimentSpec("N", [2], protocols=()),
    ExperimentSpec("N", [2], protocols=("hybrid",)),
    ExperimentSpec("N", ["x"]),
])
def test_bad_specs_rejected(spec):
    assert spec.check()
    with pytest.raises(ValueError):
        run_experiment(spec)


def test_seeds_are_shared_and_stable():
    assert system_seeds(3, 4) == system_seeds(3, 4)
    assert system_seeds(3, 4)[:2] == system_seeds(3, 2)
    assert len(set(system_seeds(3, 50))) == 50


def test_partial_rows_survive_interrupt(monkeypatch):
    import frap.experiments as ex

    calls = {"n": 0}
    real = ex.evaluate

    def flaky(config, protocols, mode="approx"):
        calls["n"] += 1
        if calls["n"] > 2:
            raise KeyboardInterrupt
        return real(config, protocols, mode)

    monkeypatch.setattr(ex, "evaluate", flaky)
    out = io.StringIO()
    with pytest.raises(KeyboardInterrupt):
        run_experiment(ExperimentSpec("K", [2, 3], base=SMALL, systems=2), out=out)
    table = read(out.getvalue())
    assert table[0] == CSV_HEADER and len(table) == 4


def test_oracle_check_counts():
    tally = oracle_check(1000, max_items=12, seed=0)
    assert tally.ok and tally.equal == 1000
    assert oracle_check(20, max_items=0).ok


def test_oracle_check_dumps_counterexample(tmp_path):
    def faulty(cands, nops):
        return flow_bound(cands, nops) + (1 if len(cands.items) > 2 else 0)

    path = tmp_path / "cx.net"
    tally = oracle_check(100, seed=1, solver=faulty, dump=path)
    assert not tally.ok and tally.counterexample == path
    net = FlowNetwork.parse(path.read_text())
    assert net.edges
    solve_max_cost_max_flow(net)
