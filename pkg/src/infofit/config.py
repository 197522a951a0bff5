"""Experiment configuration documents (YAML or JSON, schema version 1).

Every section is optional; commands check for the sections they need.
Unknown keys anywhere raise :class:`~infofit.errors.ConfigError`.

Example::

    schema_version: 1
    seed: 0
    n_series: 5
    step: 0.01
    cog_params: {k_w: 0.2}
    schedule: {n_tasks: 300}
    outcome: calibrate            # or {alpha: 169, A_ref: 0.204}
    estimator: {k: 3}
    objective: {kind: mi}
    sweep: {params: [k_w, k_r], lo: 0.5, hi: 2.0, n_points: 9}
    toy: {cases: [{lambda_true: 2, a: 3}], forms: [linear]}
    spsa: {iterations: 40, a: 0.5}
    fit: {params: [k_w, k_r, B_max], start_factor: 2.0}
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np
import yaml

from .datagen import OutcomeModel, ScheduleGenConfig
from .dynamics import FORMS, CogParams, ToyConfig
from .errors import ConfigError
from .estimators import EstimatorConfig
from .objectives import ObjectiveSpec
from .optimize import SpsaConfig

SCHEMA_VERSION = 1


def _build(cls, data, where):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {unknown}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class SweepSection:
    params: tuple = ("k_w", "k_r", "k_b", "B_max", "rho")
    lo: float = 0.5
    hi: float = 2.0
    n_points: int = 9
    workers: int = 1

    def __post_init__(self):
        bad = [p for p in self.params if p not in CogParams.FIT_NAMES]
        if bad:
            raise ValueError(f"cannot sweep {bad}")
        if not 0 < self.lo < 1 < self.hi or self.n_points < 2:
            raise ValueError("need 0 < lo < 1 < hi and n_points >= 2")
        object.__setattr__(self, "params", tuple(self.params))


@dataclass(frozen=True)
class ToyCase:
    lambda_true: float
    a: float


@dataclass(frozen=True)
class ToySection:
    cases: tuple = (ToyCase(2.0, 3.0),)
    forms: tuple = FORMS
    t_min: float = 0.0
    t_max: float = 10.0
    n_samples: int = 1000
    noise_std: float = 0.0
    grid_start: float = -1.0
    grid_stop: float = 4.0
    grid_step: float = 0.01
    estimator: str = "lnc"
    seed: int = 0

    def __post_init__(self):
        cases = tuple(c if isinstance(c, ToyCase) else _build(ToyCase, c, "toy.cases[]") for c in self.cases)
        object.__setattr__(self, "cases", cases)
        bad = [f for f in self.forms if f not in FORMS]
        if bad:
            raise ValueError(f"unknown forms {bad}")
        object.__setattr__(self, "forms", tuple(self.forms))
        if self.estimator not in ("lnc", "ksg"):
            raise ValueError("toy estimator must be 'lnc' or 'ksg'")

    def configs(self):
        t = tuple(np.linspace(self.t_min, self.t_max, self.n_samples))
        for case in self.cases:
            for form in self.forms:
                yield ToyConfig(case.lambda_true, case.a, form, t, self.noise_std, self.seed)


@dataclass(frozen=True)
class FitSection:
    params: tuple = CogParams.FIT_NAMES
    start_factor: float = 2.0
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        bad = [p for p in self.params if p not in CogParams.FIT_NAMES]
        if bad:
            raise ValueError(f"cannot fit {bad}")
        object.__setattr__(self, "params", tuple(self.params))


@dataclass(frozen=True)
class ObjectiveSection:
    kind: str = "mi"
    pool_series: bool = True
    reference: str = "samples"


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    n_series: int = 5
    step: float = 0.01
    output_dir: str | None = None
    cog_params: CogParams = field(default_factory=CogParams)
    schedule: ScheduleGenConfig = field(default_factory=ScheduleGenConfig)
    outcome: object = "calibrate"
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    objective: ObjectiveSection = field(default_factory=ObjectiveSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    toy: ToySection = field(default_factory=ToySection)
    spsa: SpsaConfig = field(default_factory=lambda: SpsaConfig(a=0.5, iterations=40))
    fit: FitSection = field(default_factory=FitSection)
    raw: dict = field(default_factory=dict, repr=False)

    def objective_spec(self, kind: str | None = None) -> ObjectiveSpec:
        kind = kind or self.objective.kind
        ref = self.objective.reference if kind == "kl_prior" else None
        return ObjectiveSpec(kind, None, self.estimator, self.objective.pool_series, ref)

    def outcome_model(self):
        return self.outcome if isinstance(self.outcome, OutcomeModel) else "calibrate"


SECTIONS = {
    "cog_params": CogParams,
    "schedule": ScheduleGenConfig,
    "estimator": EstimatorConfig,
    "objective": ObjectiveSection,
    "sweep": SweepSection,
    "toy": ToySection,
    "spsa": SpsaConfig,
    "fit": FitSection,
}
SCALARS = {"schema_version", "seed", "n_series", "step", "output_dir", "outcome"}


def parse_config(doc: dict | None) -> RunConfig:
    doc = dict(doc or {})
    unknown = sorted(set(doc) - set(SECTIONS) - SCALARS)
    if unknown:
        raise ConfigError(f"unknown top-level field(s) {unknown}")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}; expected {SCHEMA_VERSION}")
    kwargs = {k: doc[k] for k in SCALARS & set(doc)}
    if "spsa" in doc:
        kwargs["spsa"] = _build(SpsaConfig, {"a": 0.5, "iterations": 40, **(doc["spsa"] or {})}, "spsa")
    for name, cls in SECTIONS.items():
        if name in doc and name != "spsa":
            kwargs[name] = _build(cls, doc[name], name)
    outcome = kwargs.get("outcome", "calibrate")
    if isinstance(outcome, dict):
        kwargs["outcome"] = _build(OutcomeModel, outcome, "outcome")
    elif outcome != "calibrate":
        raise ConfigError("outcome must be 'calibrate' or a mapping {alpha, A_ref}")
    for key, typ in (("seed", int), ("n_series", int)):
        if key in kwargs and (not isinstance(kwargs[key], int) or kwargs[key] < 0):
            raise ConfigError(f"{key} must be a non-negative integer")
    if "step" in kwargs and not (isinstance(kwargs["step"], (int, float)) and kwargs["step"] > 0):
        raise ConfigError("step must be a positive number")
    try:
        cfg = RunConfig(**kwargs, raw=doc)
        cfg.objective_spec()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(doc)
