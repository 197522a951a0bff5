import math

import numpy as np
import pytest

from infofit.datagen import ScheduleGenConfig, generate_dataset
from infofit.dynamics import CogParams, ToyConfig
from infofit.objectives import ObjectiveSpec
from infofit.optimize import (
    SpsaAborted,
    SpsaConfig,
    SweepSpec,
    factor_grid,
    fit_cog_params,
    from_search_space,
    run_sweep,
    spsa_minimize,
    to_search_space,
    toy_grid,
)


@pytest.fixture(scope="module")
def dataset():
    return generate_dataset(sched_cfg=ScheduleGenConfig(n_tasks=80), n_series=2, master_seed=1)


def quadratic(target):
    return lambda x: float(np.sum((np.asarray(x) - target) ** 2))


# ---------------------------------------------------------------- grids


def test_toy_grid_hits_zero_exactly():
    g = toy_grid(-1.0, 4.0, 0.01)
    assert g.size == 501
    assert 0.0 in g
    assert 2.0 in g
    assert g[0] == -1.0 and g[-1] == 4.0


def test_factor_grid_centre():
    g = factor_grid(0.3)
    assert g.size == 9
    assert g[4] == 0.3
    assert g[0] == pytest.approx(0.15) and g[-1] == pytest.approx(0.6)


# ---------------------------------------------------------------- sweeps


def test_sweep_single_point(dataset):
    spec = SweepSpec("k_w", [0.2], ObjectiveSpec("mi"), dataset.gen_params)
    curve = run_sweep(spec, dataset)
    assert curve.values.size == 1
    assert curve.argopt == 0.2


def test_sweep_parallel_equals_serial(dataset):
    spec = SweepSpec("k_r", factor_grid(0.3, n=5), ObjectiveSpec("mi"), dataset.gen_params)
    a = run_sweep(spec, dataset, workers=1)
    b = run_sweep(spec, dataset, workers=4)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.fc, b.fc)


def test_sweep_records_point_errors(dataset):
    spec = SweepSpec("rho", [0.5, 1.5], ObjectiveSpec("mi"), dataset.gen_params)
    curve = run_sweep(spec, dataset)
    assert math.isfinite(curve.values[0])
    assert math.isnan(curve.values[1])
    assert curve.errors[0] is None
    assert "rho" in curve.errors[1]
    assert curve.argopt == 0.5


def test_sweep_minimise_direction(dataset):
    spec = SweepSpec("k_w", [0.1, 0.2, 0.4], ObjectiveSpec("kl_prior"), dataset.gen_params)
    curve = run_sweep(spec, dataset)
    assert curve.direction == "minimize"
    assert curve.argopt == 0.2
    assert curve.value_at(0.2) == 0.0


def test_toy_sweep_small_grid():
    cfg = ToyConfig(t_grid=tuple(np.linspace(0, 10, 400)))
    spec = SweepSpec("lambda_hat", toy_grid(-1.0, 4.0, 0.5), base_params=cfg)
    curve = run_sweep(spec)
    assert curve.value_at(0.0) == 0.0
    assert curve.argopt == 2.0


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec("k_w", [0.2, 0.1])
    with pytest.raises(ValueError):
        SweepSpec("A0_init", [0.1])
    with pytest.raises(ValueError):
        SweepSpec("k_w", [0.1], base_params=ToyConfig())


def test_sweep_csv(dataset, tmp_path):
    spec = SweepSpec("k_w", [0.1, 0.2], ObjectiveSpec("mi"), dataset.gen_params)
    run_sweep(spec, dataset).write_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("# infofit")
    assert "generating_value=0.2" in lines[1]
    assert lines[2] == "param_value,objective_nats,fc,error_flag"
    assert len(lines) == 5


# ---------------------------------------------------------------- SPSA


def test_zero_iterations_returns_start():
    res = spsa_minimize(quadratic(1.0), None, [3.0, 4.0], SpsaConfig(iterations=0))
    np.testing.assert_array_equal(res.x_best, [3.0, 4.0])
    assert res.n_evals == 0


@pytest.mark.parametrize("iters", [1, 7, 50])
def test_two_evaluations_per_iteration(iters):
    count = [0]

    def f(x):
        count[0] += 1
        return float(np.sum(x**2))

    res = spsa_minimize(f, None, np.ones(3), SpsaConfig(iterations=iters))
    assert count[0] == 2 * iters
    assert res.n_evals == 2 * iters
    assert len(res.history) == iters


def test_constraint_does_not_add_objective_calls():
    count = [0]

    def f(x):
        count[0] += 1
        return float(x[0] ** 2)

    spsa_minimize(f, lambda x: float(x[0]), [1.0], SpsaConfig(iterations=10))
    assert count[0] == 20


def test_quadratic_oracle():
    target = np.array([1.0, -2.0, 3.0, -4.0, 5.0])
    cfg = SpsaConfig(a=0.5, iterations=2000, param_bounds=((-10.0, 10.0),) * 5)
    res = spsa_minimize(quadratic(target), None, np.zeros(5), cfg)
    assert np.linalg.norm(res.x_best - target) <= 1e-2


def test_penalty_fixture():
    cfg = SpsaConfig(a=0.1, iterations=500, penalty_weight=100.0)
    res = spsa_minimize(lambda x: float(x[0] ** 2), lambda x: float(x[0] - 1.0), [3.0], cfg)
    assert abs(res.x_best[0] - 1.0) <= 0.05
    assert res.feasible


def test_maximize_direction():
    res = spsa_minimize(lambda x: -float((x[0] - 2.0) ** 2), None, [0.0], SpsaConfig(a=0.5, iterations=300), "maximize")
    assert res.x_best[0] == pytest.approx(2.0, abs=0.05)
    assert res.best_value <= 0


def test_bounds_respected():
    seen = []

    def f(x):
        seen.append(x.copy())
        return float(np.sum((x - 5.0) ** 2))

    res = spsa_minimize(f, None, [0.0, 0.0], SpsaConfig(a=1.0, iterations=100, param_bounds=((-1, 1), (-1, 1))))
    pts = np.array(seen)
    assert pts.min() >= -1 and pts.max() <= 1
    assert np.all(np.abs(res.x_best) <= 1)


def test_start_outside_bounds():
    with pytest.raises(ValueError):
        spsa_minimize(quadratic(0.0), None, [2.0], SpsaConfig(param_bounds=((-1, 1),)))


def test_rademacher_perturbations():
    deltas = []

    def f(x):
        deltas.append(x.copy())
        return 0.0

    spsa_minimize(f, None, np.zeros(4), SpsaConfig(iterations=2000, c=1.0, gamma_gain=0.101))
    plus = np.array(deltas[0::2])
    signs = np.sign(plus)
    assert set(np.unique(signs)) == {-1.0, 1.0}
    assert np.abs(signs.mean(axis=0)).max() < 0.1


def test_seed_determinism():
    cfg = SpsaConfig(iterations=30, seed=4)
    a = spsa_minimize(quadratic(1.0), None, np.zeros(3), cfg)
    b = spsa_minimize(quadratic(1.0), None, np.zeros(3), cfg)
    c = spsa_minimize(quadratic(1.0), None, np.zeros(3), SpsaConfig(iterations=30, seed=5))
    np.testing.assert_array_equal(a.x_best, b.x_best)
    assert not np.array_equal(a.x_best, c.x_best)


def test_gain_sequences():
    cfg = SpsaConfig(a=0.2, c=0.1, iterations=100)
    ak, ck = cfg.gains(0)
    assert ak == pytest.approx(0.2 / 11**0.602)
    assert ck == pytest.approx(0.1)


def test_abort_keeps_history():
    def f(x):
        if f.calls >= 6:
            raise RuntimeError("boom")
        f.calls += 1
        return 0.0

    f.calls = 0
    with pytest.raises(SpsaAborted) as info:
        spsa_minimize(f, None, [0.0], SpsaConfig(iterations=10))
    assert len(info.value.history) == 3


@pytest.mark.parametrize("kwargs", [{"a": 0.0}, {"iterations": -1}, {"alpha_gain": 0.05}, {"penalty_weight": -1.0}])
def test_spsa_config_validation(kwargs):
    with pytest.raises(ValueError):
        SpsaConfig(**kwargs)


def test_history_csv(tmp_path):
    res = spsa_minimize(quadratic(0.0), lambda x: 1.0, [1.0, 1.0], SpsaConfig(iterations=3))
    res.write_csv(tmp_path / "h.csv", names=["u", "v"])
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[1] == "iteration,u,v,objective,fc,feasible"
    assert len(lines) == 5


# ---------------------------------------------------------------- fitting


def test_search_space_round_trip():
    names = CogParams.FIT_NAMES
    v = CogParams().vector(names)
    np.testing.assert_allclose(from_search_space(to_search_space(v, names), names), v)


def test_fit_never_worse_than_start(dataset):
    start = dataset.gen_params.with_param("k_w", 0.4).with_param("k_r", 0.6)
    spec = ObjectiveSpec("mi")
    best, res, start_val, best_val = fit_cog_params(
        dataset, start, spec, SpsaConfig(a=0.5, iterations=5), names=("k_w", "k_r")
    )
    assert res.n_evals == 10
    assert best_val.value >= start_val.value
    assert best.k_b == start.k_b


def test_fit_zero_iterations(dataset):
    start = dataset.gen_params.with_param("k_w", 0.4)
    best, res, start_val, best_val = fit_cog_params(dataset, start, cfg=SpsaConfig(iterations=0), names=("k_w",))
    assert best == start
    assert best_val.value == start_val.value


def test_default_kw_sweep_peaks_near_truth():
    data = generate_dataset()
    spec = SweepSpec("k_w", factor_grid(0.2), ObjectiveSpec("mi"), data.gen_params)
    curve = run_sweep(spec, data, workers=4)
    assert abs(curve.argopt - 0.2) <= 0.2 * 0.2
