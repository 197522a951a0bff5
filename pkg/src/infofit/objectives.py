"""Information-theoretic objectives over a dataset and a candidate parameter set.

Three objectives pair the end-of-task resource with binary outcomes:

``mi``          mixed MI between outcome and resource (maximize)
``kl_prior``    divergence of fitted per-outcome resource distributions from
                reference distributions (minimize)
``kl_disjoint`` symmetrised divergence between the correct and incorrect
                resource distributions (maximize)

plus the ordering constraint ``fc = <A|correct> - <A|incorrect> >= 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datagen import Dataset
from .dynamics import CogParams, end_of_task_resource
from .estimators import EstimatorConfig, kl_knn, kl_to_gaussian, mi_mixed
from .errors import LengthMismatch

KINDS = ("mi", "kl_prior", "kl_disjoint")
DIRECTIONS = {"mi": "maximize", "kl_prior": "minimize", "kl_disjoint": "maximize"}
EMPTY_CLASS = "empty_class"


@dataclass(frozen=True)
class ClassReference:
    """Reference distributions of A given each outcome.

    ``kind="samples"``: ``correct``/``incorrect`` are sample arrays.
    ``kind="gaussian"``: they are ``(mu, sigma)`` pairs.
    ``paired=True`` marks samples that correspond one-to-one (same tasks,
    same order) with the fitted samples of that class.
    """

    kind: str
    correct: object
    incorrect: object
    paired: bool = False

    def __post_init__(self):
        if self.kind not in ("samples", "gaussian"):
            raise ValueError(f"reference kind must be 'samples' or 'gaussian', got {self.kind!r}")

    @classmethod
    def from_samples(cls, a_end, outcomes, gaussian=False, paired=True) -> "ClassReference":
        a = np.asarray(a_end, dtype=float)
        c = np.asarray(outcomes).astype(bool)
        if gaussian:
            return cls("gaussian", _gauss_fit(a[c]), _gauss_fit(a[~c]))
        return cls("samples", a[c], a[~c], paired=paired)


def _gauss_fit(x):
    return (float(np.mean(x)), float(np.std(x, ddof=1))) if len(x) > 1 else (math.nan, math.nan)


@dataclass(frozen=True)
class ObjectiveSpec:
    """What to compute. ``reference`` applies to ``kl_prior`` only: a
    :class:`ClassReference`, or ``"samples"`` / ``"gaussian"`` to derive it
    from the dataset's true resource values."""

    kind: str = "mi"
    direction: str | None = None
    estimator_cfg: EstimatorConfig = field(default_factory=EstimatorConfig)
    pool_series: bool = True
    reference: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"objective kind must be one of {KINDS}, got {self.kind!r}")
        expected = DIRECTIONS[self.kind]
        if self.direction is None:
            object.__setattr__(self, "direction", expected)
        elif self.direction != expected:
            raise ValueError(f"kind={self.kind} must be {expected}d, got {self.direction}")
        if self.kind == "kl_prior":
            if self.reference is None:
                object.__setattr__(self, "reference", "samples")
            if not isinstance(self.reference, ClassReference) and self.reference not in ("samples", "gaussian"):
                raise ValueError(f"unsupported reference {self.reference!r}")


@dataclass(frozen=True)
class ObjectiveValue:
    kind: str
    direction: str
    value: float
    constraint_fc: float
    n_correct: int
    n_incorrect: int
    flags: tuple = ()

    @property
    def feasible(self) -> bool:
        return bool(self.constraint_fc >= 0)

    def to_dict(self) -> dict:
        def num(v):
            return v if math.isfinite(v) else repr(v)

        return {
            "kind": self.kind,
            "value_nats": num(self.value),
            "fc": num(self.constraint_fc),
            "n_correct": self.n_correct,
            "n_incorrect": self.n_incorrect,
            "flags": list(self.flags),
        }


def _split(a_end, outcomes):
    a = np.asarray(a_end, dtype=float).ravel()
    o = np.asarray(outcomes).ravel()
    if a.shape != o.shape:
        raise LengthMismatch(f"{a.size} resource values but {o.size} outcomes")
    c = o.astype(bool)
    return a, o, c


def objective_mi(a_end, outcomes, cfg: EstimatorConfig = EstimatorConfig()) -> float:
    a, o, _ = _split(a_end, outcomes)
    return mi_mixed(a, o, cfg).value_nats


def _kl_to_reference(fitted, ref, cfg, paired):
    if isinstance(ref, tuple):
        mu, sigma = ref
        return kl_to_gaussian(fitted, mu, sigma, cfg).value_nats
    return kl_knn(fitted, ref, cfg, paired=paired).value_nats


def objective_kl_prior(a_end, outcomes, reference: ClassReference, cfg: EstimatorConfig = EstimatorConfig()) -> float:
    """Sum over outcome classes of D(fitted | class || reference | class).

    Returns ``+inf`` if either class is empty in the fit or the reference.
    """
    a, _, c = _split(a_end, outcomes)
    refs = (reference.correct, reference.incorrect)
    parts = (a[c], a[~c])
    for fitted, ref in zip(parts, refs):
        if len(fitted) <= cfg.k or (reference.kind == "samples" and len(ref) <= cfg.k):
            return math.inf
    if reference.kind == "gaussian":
        refs = tuple(tuple(r) for r in refs)
    return math.fsum(_kl_to_reference(f, r, cfg, reference.paired) for f, r in zip(parts, refs))


def objective_kl_disjoint(a_end, outcomes, cfg: EstimatorConfig = EstimatorConfig()) -> float:
    """D(A|correct || A|incorrect) + D(A|incorrect || A|correct); 0 if a class is empty."""
    a, _, c = _split(a_end, outcomes)
    good, bad = a[c], a[~c]
    if len(good) <= cfg.k or len(bad) <= cfg.k:
        return 0.0
    return kl_knn(good, bad, cfg).value_nats + kl_knn(bad, good, cfg).value_nats


def constraint_fc(a_end, outcomes) -> float:
    """Mean resource on correct tasks minus mean on incorrect ones; ``-inf`` if a class is empty."""
    a, _, c = _split(a_end, outcomes)
    if c.all() or not c.any():
        return -math.inf
    return math.fsum(a[c]) / c.sum() - math.fsum(a[~c]) / (~c).sum()


def _resolve_reference(spec: ObjectiveSpec, true_a, outcomes):
    if isinstance(spec.reference, ClassReference):
        return spec.reference
    return ClassReference.from_samples(true_a, outcomes, gaussian=spec.reference == "gaussian")


def _value(spec: ObjectiveSpec, a, o, true_a):
    cfg = spec.estimator_cfg
    if spec.kind == "mi":
        return objective_mi(a, o, cfg)
    if spec.kind == "kl_disjoint":
        return objective_kl_disjoint(a, o, cfg)
    return objective_kl_prior(a, o, _resolve_reference(spec, true_a, o), cfg)


def candidate_resources(data: Dataset, candidate: CogParams, step: float | None = None) -> list:
    """Re-integrate every series under ``candidate``; one ``a_end`` array per series."""
    step = data.step if step is None else step
    return [end_of_task_resource(candidate, s.schedule, step) for s in data.series]


def evaluate_resources(spec: ObjectiveSpec, data: Dataset, fitted: list) -> ObjectiveValue:
    """Objective for already integrated per-series resources."""
    outcomes = [np.asarray(s.outcomes) for s in data.series]
    truths = [s.a_end for s in data.series]
    a_all = np.concatenate(fitted)
    o_all = np.concatenate(outcomes)
    if spec.pool_series:
        value = _value(spec, a_all, o_all, np.concatenate(truths))
    else:
        value = float(np.mean([_value(spec, a, o, t) for a, o, t in zip(fitted, outcomes, truths)]))
    n_correct = int(o_all.astype(bool).sum())
    n_incorrect = int(o_all.size - n_correct)
    flags = (EMPTY_CLASS,) if min(n_correct, n_incorrect) == 0 else ()
    return ObjectiveValue(
        spec.kind, spec.direction, float(value), constraint_fc(a_all, o_all), n_correct, n_incorrect, flags
    )


def evaluate_objective(spec: ObjectiveSpec, data: Dataset, candidate: CogParams, step: float | None = None) -> ObjectiveValue:
    """Integrate the candidate over every schedule in ``data`` and score it."""
    return evaluate_resources(spec, data, candidate_resources(data, candidate, step))
