import numpy as np
import pytest

from cheegerpack.grid import DomainMask, GridSpec
from cheegerpack.domains import square
from cheegerpack.pipeline import ConfigError, RunConfig, eps_level, init_random, run


def small(**kw):
    base = dict(m0=12, target_resolution=23, maxit=400, seed=3)
    base.update(kw)
    return RunConfig(**base)


def nonincreasing(trace):
    return all(b <= a for a, b in zip(trace, trace[1:]))


def test_grid_schedule():
    cfg = RunConfig().resolve()
    assert cfg.grid_sizes() == [20, 39, 77, 153, 305]
    per = RunConfig(periodic=True, domain={"type": "rectangle", "lower": [0, 0], "upper": [1, 1]}).resolve()
    assert per.grid_sizes() == [20, 40, 80, 160, 320]
    cube = RunConfig(domain={"type": "cube"}).resolve()
    assert cube.dim == 3 and cube.final_m() >= 100


def test_eps_and_p_schedules():
    cfg = RunConfig(eps_factor=1.0, coarse_eps_factor=2.0, final_eps_steps=3, p=50.0, p_start=2.0, stages=3, target_resolution=10).resolve()
    assert cfg.stage_eps_factor(0) == 2.0 and cfg.stage_eps_factor(2) == 1.0
    assert cfg.final_eps_factors() == pytest.approx([2.0, 2**0.5, 1.0])
    assert [cfg.stage_p(s) for s in range(3)] == pytest.approx([2.0, 10.0, 50.0])
    assert RunConfig().resolve().final_eps_factors() == [1.0]
    assert eps_level(GridSpec(2, 101, (1.0, 1.0)), 1.0) == pytest.approx(1 / 101)


@pytest.mark.parametrize(
    "data,key",
    [
        ({"alpha": 0.5}, "alpha"),
        ({"alpha": 0.66, "domain": {"type": "cube"}}, "alpha"),
        ({"bogus": 1}, "bogus"),
        ({"k": 0}, "k"),
        ({"k": "two"}, "k"),
        ({"p": 0.5}, "p"),
        ({"p": 5.0, "p_start": 6.0}, "p_start"),
        ({"eps_factor": 8.0}, "eps_factor"),
        ({"periodic": True}, "periodic"),
        ({"periodic": "yes"}, "periodic"),
        ({"stages": 2}, "stages"),
        ({"m0": 3}, "m0"),
        ({"domain": {"type": "blob"}}, "domain"),
        ({"domain": "square"}, "domain"),
        ({"objective": "area"}, "objective"),
        ({"dim": 3}, "dim"),
        ({"penalty_scale": 0.0}, "penalty_scale"),
    ],
)
def test_config_errors_name_the_key(data, key):
    with pytest.raises(ConfigError) as info:
        RunConfig.from_dict(data)
    assert info.value.key == key
    assert key in str(info.value)


def test_init_random_is_admissible():
    g = GridSpec(2, 15, (1.0, 1.0))
    mask = DomainMask.build(g, square())
    sys_ = init_random(g, mask, 4, 7)
    assert np.all(sys_.phases >= 0) and np.all(sys_.phases.sum(axis=0) <= 1 + 1e-15)
    assert np.all(sys_.phases[:, ~mask.inside] == 0)
    assert np.array_equal(init_random(g, mask, 4, 7).phases, sys_.phases)


def test_run_is_deterministic():
    a = run(small(k=2))
    b = run(small(k=2))
    assert np.array_equal(a.final_system.phases, b.final_system.phases)
    assert [s.report.value_trace for s in a.stages] == [s.report.value_trace for s in b.stages]
    c = run(small(k=2, seed=4))
    assert not np.array_equal(a.final_system.phases, c.final_system.phases)


def test_multiphase_run_invariants():
    # at this coarse width the nominal 1/eps coupling lets phases stack; a stronger one separates them
    res = run(small(k=3, p=2.0, target_resolution=45, penalty_scale=100.0))
    assert [s.m for s in res.stages] == [12, 23, 45]
    for st in res.stages:
        assert nonincreasing(st.report.value_trace)
    u = res.final_system.phases
    assert np.all(u >= 0) and np.all(u <= 1)
    assert np.all(u[:, ~res.final_system.mask.inside] == 0)
    sets = u > 0.5
    assert all(sets[i].any() for i in range(3))
    for i in range(3):
        for j in range(i + 1, 3):
            assert not np.any(sets[i] & sets[j])
    assert len(res.sharp.per_phase_h_alpha) == 3
    assert res.to_dict()["config"]["k"] == 3


def test_final_grid_continuation_records_each_width():
    res = run(small(coarse_eps_factor=2.0, final_eps_steps=3))
    assert [s.m for s in res.stages] == [12, 23, 23, 23]
    h = 1 / 22
    assert [s.eps for s in res.stages[1:]] == pytest.approx([2 * h, 2**0.5 * h, h])


def test_alpha_monotone_area():
    areas = [run(small(alpha=a, target_resolution=45)).sharp.per_phase_area[0] for a in (0.5001, 2.0)]
    assert areas[1] >= areas[0]


def test_log_perimeter_objective_runs_periodic():
    cfg = small(
        k=3,
        objective="log_perimeter",
        periodic=True,
        domain={"type": "rectangle", "lower": [0, 0], "upper": [1, 1]},
        target_resolution=24,
    )
    res = run(cfg)
    assert [s.m for s in res.stages] == [12, 24]
    assert np.isfinite(res.final_energy)
    for st in res.stages:
        assert nonincreasing(st.report.value_trace)
