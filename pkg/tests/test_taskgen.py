import numpy as np
import pytest

from frap.model import system_to_dict, validate
from frap.taskgen import (MS, PERIOD_RANGE, US, GenConfig, GenerationError, generate, log_uniform_periods,
                          uunifast_discard, worst_fit)


def test_uunifast_single():
    utils, _ = uunifast_discard(1, 0.7, 1)
    assert utils == [0.7]


def test_uunifast_sum_and_range():
    for seed in range(50):
        utils, _ = uunifast_discard(4, 0.4, seed)
        assert len(utils) == 4
        assert sum(utils) == pytest.approx(0.4, abs=1e-12)
        assert all(0 < u < 1 for u in utils)


def test_uunifast_discards_heavy_draws():
    rng = np.random.default_rng(3)
    utils, attempts = uunifast_discard(3, 2.5, rng)
    assert all(0 < u < 1 for u in utils) and attempts > 0
    with pytest.raises(ValueError):
        uunifast_discard(2, 3.0)
    with pytest.raises(GenerationError):
        uunifast_discard(3, 2.99, 0, max_tries=1)


def test_uunifast_marginal_means():
    rng = np.random.default_rng(11)
    draws = np.array([uunifast_discard(5, 1.0, rng)[0] for _ in range(10_000)])
    assert np.allclose(draws.mean(axis=0), 0.2, rtol=0.05)


def test_log_uniform_periods():
    rng = np.random.default_rng(0)
    periods = log_uniform_periods(20_000, rng)
    assert min(periods) >= PERIOD_RANGE[0] and max(periods) <= PERIOD_RANGE[1]
    # log-uniform: each decade gets about a third of the draws
    decades = np.histogram(np.log10(np.array(periods) / MS), bins=[0, 1, 2, 3])[0] / len(periods)
    assert np.allclose(decades, 1 / 3, atol=0.02)


def test_worst_fit_balances():
    utils = [0.5, 0.4, 0.3, 0.3, 0.2, 0.1]
    placement = worst_fit(utils, 3)
    load = [sum(u for u, m in zip(utils, placement) if m == p) for p in range(3)]
    assert placement[0] != placement[1] != placement[2]
    # no single move lowers the peak below the achieved peak minus the moved task
    peak = max(load)
    for i, u in enumerate(utils):
        for m in range(3):
            if m == placement[i]:
                continue
            moved = list(load)
            moved[placement[i]] -= u
            moved[m] += u
            assert max(moved) >= peak - u


def test_default_config():
    report = generate(GenConfig(seed=5))
    system = report.system
    assert validate(system) == []
    assert len(system.tasks) == 60 and system.processors == 12 and len(system.resources) == 12
    util = sum(system.total_wcet(t) / t.period for t in system.tasks)
    assert util == pytest.approx(6.0, abs=1e-3)
    users = [t for t in system.tasks if t.requests]
    assert len(users) <= 24
    for t in system.tasks:
        assert t.deadline == t.period
        assert PERIOD_RANGE[0] <= t.period <= PERIOD_RANGE[1]
        assert all(1 <= n <= 5 for n in t.requests.values())
    assert all(1 * US <= r.cs_len <= 100 * US for r in system.resources)
    assert report.rng.startswith("numpy")


def test_deadline_monotonic_priorities():
    system = generate(GenConfig(processors=3, tasks_per_proc=4, seed=1)).system
    ranked = sorted(system.tasks, key=lambda t: t.priority)
    assert [t.priority for t in ranked] == list(range(1, 13))
    assert all(a.deadline >= b.deadline for a, b in zip(ranked, ranked[1:]))


def test_resource_free_config():
    system = generate(GenConfig(processors=2, tasks_per_proc=1, resource_count=0)).system
    assert validate(system) == []
    assert len(system.tasks) == 2 and not any(t.requests for t in system.tasks)


def test_generation_is_deterministic():
    a = generate(GenConfig(seed=42)).system
    b = generate(GenConfig(seed=42)).system
    c = generate(GenConfig(seed=43)).system
    assert system_to_dict(a) == system_to_dict(b)
    assert system_to_dict(a) != system_to_dict(c)


def test_generated_systems_validate_across_settings():
    for seed, kw in enumerate([dict(accesses_max=30), dict(rsf=0.5, cs_range=(1 * US, 500 * US)),
                               dict(processors=20, tasks_per_proc=8), dict(processors=2, tasks_per_proc=1)]):
        system = generate(GenConfig(seed=seed, **kw)).system
        assert validate(system) == []
        assert all(t.wcet >= 0 for t in system.tasks)


def test_config_checks():
    assert GenConfig().check(strict=True) == []
    assert GenConfig(cs_range=(5, 1)).check()
    assert GenConfig(processors=30).check() == [] and GenConfig(processors=30).check(strict=True)
    with pytest.raises(ValueError):
        generate(GenConfig(rsf=2.0))
