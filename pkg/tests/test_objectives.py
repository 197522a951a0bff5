import math

import numpy as np
import pytest

from infofit.datagen import Dataset, ScheduleGenConfig, Series, generate_dataset
from infofit.dynamics import CogParams
from infofit.errors import LengthMismatch
from infofit.estimators import EstimatorConfig
from infofit.objectives import (
    ClassReference,
    ObjectiveSpec,
    constraint_fc,
    evaluate_objective,
    objective_kl_disjoint,
    objective_kl_prior,
    objective_mi,
)

CFG = EstimatorConfig()


@pytest.fixture(scope="module")
def dataset():
    return generate_dataset(sched_cfg=ScheduleGenConfig(n_tasks=150), n_series=3, master_seed=3)


def two_class(n, mu_c, mu_i, seed):
    rng = np.random.default_rng(seed)
    a = np.concatenate([rng.normal(mu_c, 1.0, n), rng.normal(mu_i, 1.0, n)])
    o = np.concatenate([np.ones(n, int), np.zeros(n, int)])
    return a, o


# ---------------------------------------------------------------- mi


def test_mi_independent():
    rng = np.random.default_rng(0)
    assert abs(objective_mi(rng.normal(size=3000), rng.integers(0, 2, 3000))) <= 0.05


def test_mi_median_label():
    a = np.random.default_rng(1).normal(size=4000)
    assert objective_mi(a, (a > np.median(a)).astype(int)) == pytest.approx(math.log(2), abs=0.07)


def test_mi_single_class_exact_zero():
    assert objective_mi(np.arange(50.0), np.ones(50, int)) == 0.0


def test_mi_label_swap_and_scale():
    a, o = two_class(500, 0.0, 1.0, 2)
    base = objective_mi(a, o)
    assert objective_mi(a, 1 - o) == pytest.approx(base, abs=1e-12)
    assert objective_mi(7.0 * a, o) == pytest.approx(base, abs=1e-9)


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        objective_mi(np.arange(10.0), np.ones(9))


# ---------------------------------------------------------------- kl_prior


def test_kl_prior_same_distribution():
    a, o = two_class(2000, 0.0, 3.0, 3)
    ref = ClassReference("gaussian", (0.0, 1.0), (3.0, 1.0))
    assert abs(objective_kl_prior(a, o, ref)) <= 0.1


def test_kl_prior_shift_oracle():
    a, o = two_class(4000, 1.0, 4.0, 4)
    ref = ClassReference("gaussian", (0.0, 1.0), (3.0, 1.0))
    assert objective_kl_prior(a, o, ref) == pytest.approx(1.0, abs=0.1)


def test_kl_prior_parametric_vs_samples():
    a, o = two_class(4000, 1.0, 4.0, 5)
    r, ro = two_class(4000, 0.0, 3.0, 6)
    gauss = objective_kl_prior(a, o, ClassReference("gaussian", (0.0, 1.0), (3.0, 1.0)))
    samples = objective_kl_prior(a, o, ClassReference.from_samples(r, ro, paired=False))
    assert gauss == pytest.approx(samples, abs=0.15)


def test_kl_prior_paired_self_is_zero():
    a, o = two_class(300, 0.0, 1.0, 7)
    assert objective_kl_prior(a, o, ClassReference.from_samples(a, o)) == 0.0


def test_kl_prior_empty_class_is_inf():
    a = np.arange(20.0)
    ref = ClassReference("gaussian", (0.0, 1.0), (0.0, 1.0))
    assert objective_kl_prior(a, np.ones(20, int), ref) == math.inf


def test_reference_kind_validated():
    with pytest.raises(ValueError):
        ClassReference("kde", None, None)


# ---------------------------------------------------------------- kl_disjoint


def test_kl_disjoint_identical_classes():
    a, o = two_class(2000, 0.0, 0.0, 8)
    assert abs(objective_kl_disjoint(a, o)) <= 0.1


def test_kl_disjoint_oracle():
    a, o = two_class(4000, 0.0, 1.0, 9)
    assert objective_kl_disjoint(a, o) == pytest.approx(1.0, abs=0.1)


def test_kl_disjoint_empty_class_is_zero():
    assert objective_kl_disjoint(np.arange(20.0), np.zeros(20, int)) == 0.0


# ---------------------------------------------------------------- constraint


def test_fc_arithmetic():
    a = np.array([0.21, 0.21, 0.20, 0.20])
    o = np.array([1, 1, 0, 0])
    assert constraint_fc(a, o) == pytest.approx(0.01)
    assert constraint_fc(a, 1 - o) == pytest.approx(-0.01)


def test_fc_empty_class_sentinel():
    assert constraint_fc(np.arange(5.0), np.ones(5)) == -math.inf


# ---------------------------------------------------------------- spec


def test_spec_directions():
    assert ObjectiveSpec("mi").direction == "maximize"
    assert ObjectiveSpec("kl_prior").direction == "minimize"
    assert ObjectiveSpec("kl_disjoint").direction == "maximize"
    with pytest.raises(ValueError):
        ObjectiveSpec("mi", direction="minimize")
    with pytest.raises(ValueError):
        ObjectiveSpec("entropy")


# ---------------------------------------------------------------- dataset level


def test_mi_positive_at_truth(dataset):
    v = evaluate_objective(ObjectiveSpec("mi"), dataset, dataset.gen_params)
    assert v.value > 0
    assert v.feasible
    assert v.n_correct + v.n_incorrect == dataset.n_tasks


def test_mi_fair_coin_outcomes(dataset):
    rng = np.random.default_rng(12)
    series = [Series(s.schedule, s.trajectory, rng.integers(0, 2, len(s.outcomes)), s.seed) for s in dataset.series]
    coin = Dataset(series, dataset.gen_params, dataset.outcome_model)
    assert abs(evaluate_objective(ObjectiveSpec("mi"), coin, dataset.gen_params).value) <= 0.02


def test_kl_prior_at_truth(dataset):
    assert evaluate_objective(ObjectiveSpec("kl_prior"), dataset, dataset.gen_params).value <= 0.05


def test_kl_prior_gaussian_reference_at_truth(dataset):
    spec = ObjectiveSpec("kl_prior", reference="gaussian")
    assert math.isfinite(evaluate_objective(spec, dataset, dataset.gen_params).value)


def test_series_order_invariance(dataset):
    rev = Dataset(dataset.series[::-1], dataset.gen_params, dataset.outcome_model)
    for kind in ("mi", "kl_prior", "kl_disjoint"):
        spec = ObjectiveSpec(kind)
        a = evaluate_objective(spec, dataset, dataset.gen_params)
        b = evaluate_objective(spec, rev, dataset.gen_params)
        assert a.value == b.value
        assert a.constraint_fc == pytest.approx(b.constraint_fc, abs=1e-15)


def test_unpooled_mode(dataset):
    v = evaluate_objective(ObjectiveSpec("mi", pool_series=False), dataset, dataset.gen_params)
    assert math.isfinite(v.value)


def test_value_serialisation(dataset):
    d = evaluate_objective(ObjectiveSpec("mi"), dataset, CogParams()).to_dict()
    assert set(d) == {"kind", "value_nats", "fc", "n_correct", "n_incorrect", "flags"}
