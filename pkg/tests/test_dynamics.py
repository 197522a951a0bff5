import math

import numpy as np
import pytest
from scipy.optimize import brentq

from infofit.datagen import ScheduleGenConfig, sample_schedule
from infofit.dynamics import (
    CogParams,
    TaskSchedule,
    ToyConfig,
    clamp_count,
    cog_rhs,
    end_of_task_resource,
    integrate_schedule,
    observe,
    toy_candidate,
    toy_generate,
)
from infofit.errors import NonFiniteState, SingularTime


@pytest.fixture(scope="module")
def default_schedule():
    return sample_schedule(ScheduleGenConfig(n_tasks=100), seed=[7, 0])


# ---------------------------------------------------------------- toy family


def test_toy_zero_noise_y_equals_x():
    x, y, _ = toy_generate(ToyConfig())
    np.testing.assert_array_equal(x, y)


def test_toy_lambda_zero_is_constant():
    x, _, _ = toy_generate(ToyConfig(lambda_true=0.0))
    assert np.all(x == 1.0)


def test_toy_exponential_a_zero():
    _, _, z = toy_generate(ToyConfig(form="exponential", a=0.0))
    assert np.all(z == 1.0)


def test_toy_candidate_matches_generator():
    cfg = ToyConfig(lambda_true=1.3)
    x, _, _ = toy_generate(cfg)
    np.testing.assert_array_equal(toy_candidate(1.3, cfg.t), x)


def test_toy_candidate_values():
    assert toy_candidate(2.0, [0.5])[0] == pytest.approx(math.exp(-1.0))
    assert np.all(toy_candidate(0.0, np.linspace(0, 1, 5)) == 1.0)


def test_toy_noise_is_seeded():
    a = toy_generate(ToyConfig(noise_std=0.1, seed=3))[1]
    b = toy_generate(ToyConfig(noise_std=0.1, seed=3))[1]
    c = toy_generate(ToyConfig(noise_std=0.1, seed=4))[1]
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_observe_forms():
    y = np.array([0.0, 0.5])
    np.testing.assert_allclose(observe(y, "linear", 3.0), [0.0, 1.5])
    np.testing.assert_allclose(observe(y, "exponential", 2.0), [1.0, math.e])
    np.testing.assert_allclose(observe(y, "sinusoidal", math.pi), [0.0, 1.0])


@pytest.mark.parametrize("kwargs", [{"t_grid": (0.0,)}, {"t_grid": (1.0, 0.5)}, {"noise_std": -1.0}, {"form": "cubic"}])
def test_toy_config_validation(kwargs):
    with pytest.raises(ValueError):
        ToyConfig(**kwargs)


# ---------------------------------------------------------------- rhs


def test_rhs_hand_evaluation():
    p = CogParams(k_w=0.2, k_b=0.4, K_A=0.1, K_B=0.1, rho=0.5)
    dA, dB = cog_rhs(0.5, 0.5, 1.0, True, p)
    assert dA == pytest.approx(0.0, abs=1e-12)
    assert dB == pytest.approx(-0.4 * 0.5 * 0.5 / 0.6, abs=1e-12)


def test_rhs_off_task_consumes_only():
    p = CogParams()
    for A in (0.0, 0.2, 0.9):
        dA, _ = cog_rhs(A, 0.5, 3.0, False, p)
        assert dA == pytest.approx(-p.k_w * 3.0**-p.rho * A / (p.K_A + A))
        assert dA <= 0


def test_rhs_conversion_conserves():
    p = CogParams(k_w=0.0, k_r=0.0)
    dA, dB = cog_rhs(0.3, 0.7, 2.0, True, p)
    assert dA + dB == pytest.approx(0.0, abs=1e-15)


def test_rhs_singular_time():
    with pytest.raises(SingularTime):
        cog_rhs(0.5, 0.5, 0.0, True, CogParams())


# ---------------------------------------------------------------- params


@pytest.mark.parametrize(
    "kwargs",
    [{"k_w": -0.1}, {"K_A": 0.0}, {"B_max": 0.0}, {"rho": 1.0}, {"rho": -0.1}, {"A0_init": 1.5}, {"B0_init": 2.0}],
)
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        CogParams(**kwargs)


def test_params_t_start_singular():
    with pytest.raises(SingularTime):
        CogParams(t_start=0.0)


def test_with_param_rescales_secondary_store():
    p = CogParams().with_param("B_max", 2.0)
    assert p.B_max == 2.0
    assert p.B0_init == 2.0


def test_params_round_trip():
    p = CogParams(k_w=0.25)
    assert CogParams.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        CogParams.from_dict({"k_x": 1.0})


# ---------------------------------------------------------------- schedule


def test_schedule_drops_empty_trailing_off_phase():
    s = TaskSchedule.from_durations([2.5, 0.0])
    assert s.n_tasks == 1
    assert len(s.phases) == 1
    assert len(end_of_task_resource(CogParams(), s)) == 1


@pytest.mark.parametrize("durations", [[1.0, -1.0, 1.0], [0.0, 1.0], []])
def test_schedule_rejects_bad_durations(durations):
    with pytest.raises(ValueError):
        TaskSchedule.from_durations(durations)


def test_schedule_must_start_on():
    with pytest.raises(ValueError):
        TaskSchedule(np.array([False, True]), np.array([1.0, 2.0, 3.0]))


def test_schedule_task_times_round_trip(default_schedule):
    s = default_schedule
    rebuilt = TaskSchedule.from_task_times(s.task_begin, s.task_end, s.boundaries[-1])
    assert rebuilt == s


# ---------------------------------------------------------------- integrator


def test_conservation_without_consumption_or_recovery():
    p = CogParams(k_w=0.0, k_r=0.0)
    sched = TaskSchedule.from_durations([10.0, 5.0] * 7 + [10.0, 0.0])
    assert sched.boundaries[-1] - sched.t_start >= 100.0
    tr = integrate_schedule(p, sched)
    assert np.max(np.abs(tr.A + tr.B - (p.A0_init + p.B0_init))) <= 1e-8


def test_step_refinement(default_schedule):
    a1 = end_of_task_resource(CogParams(), default_schedule, 0.01)
    a2 = end_of_task_resource(CogParams(), default_schedule, 0.005)
    assert np.max(np.abs(a1 - a2)) <= 1e-7


def test_default_no_clamping(default_schedule):
    assert clamp_count(CogParams(), default_schedule) == 0
    assert integrate_schedule(CogParams(), default_schedule).clamp_events == 0


def test_off_task_monotone():
    p = CogParams(k_r=0.0, A0_init=0.8, B0_init=0.5)
    sched = TaskSchedule(np.array([True, False]), np.array([1.0, 1.0 + 1e-9, 40.0]))
    tr = integrate_schedule(p, sched)
    assert np.all(np.diff(tr.A[tr.times > 1.0 + 1e-9]) <= 0)


def _closed_form_A(p, t):
    # K_A ln A + A = const - k_w t^(1-rho)/(1-rho), with k_b = 0
    def lhs(A):
        return p.K_A * math.log(A) + A

    c = lhs(p.A0_init) + p.k_w * p.t_start ** (1 - p.rho) / (1 - p.rho)
    target = c - p.k_w * t ** (1 - p.rho) / (1 - p.rho)
    return brentq(lambda A: lhs(A) - target, 1e-300, 1.0, xtol=1e-16, rtol=1e-15)


def test_rk4_fourth_order():
    p = CogParams(k_b=0.0, k_w=1.0, A0_init=0.9, rho=0.5, t_start=0.2)
    t_end = 3.0
    sched = TaskSchedule.from_durations([t_end - p.t_start], p.t_start)
    exact = _closed_form_A(p, t_end)
    errs = [abs(end_of_task_resource(p, sched, h)[0] - exact) for h in (0.04, 0.02, 0.01)]
    for coarse, fine in zip(errs, errs[1:]):
        assert 16 / 4 <= coarse / fine <= 16 * 4


def test_boundaries_are_hit_exactly():
    sched = TaskSchedule.from_durations([0.123, 0.457, 0.789], 1.0)
    tr = integrate_schedule(CogParams(), sched)
    for b in sched.boundaries:
        assert np.any(tr.times == b)
    assert tr.a_end[0] == tr.A[np.nonzero(tr.times == sched.boundaries[1])[0][0]]


def test_non_finite_state_reports_phase():
    p = CogParams(k_w=math.inf)
    with pytest.raises(NonFiniteState) as info:
        end_of_task_resource(p, TaskSchedule.from_durations([1.0, 1.0]))
    assert info.value.phase_index == 0


def test_bad_step():
    with pytest.raises(ValueError):
        end_of_task_resource(CogParams(), TaskSchedule.from_durations([1.0]), 0.0)


def test_trajectory_csv(tmp_path):
    tr = integrate_schedule(CogParams(), TaskSchedule.from_durations([0.05, 0.05]))
    tr.write_csv(tmp_path / "traj.csv")
    lines = (tmp_path / "traj.csv").read_text().splitlines()
    assert lines[0].startswith("# infofit")
    assert lines[1] == "time,A,B"
    assert len(lines) == 2 + len(tr.times)
