"""Synthetic practice-test data: task schedules, resource trajectories, outcomes.

Seeding scheme (version 1): ``numpy.random.SeedSequence(master_seed).spawn``
gives one child per series; the first 32-bit word of each child's state is
that series' seed. A series seed ``s`` drives two PCG64 streams,
``default_rng([s, 0])`` for the schedule and ``default_rng([s, 1])`` for the
outcomes, so regenerating one series never touches another.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._csvio import config_hash, read_csv, write_csv
from .dynamics import CogParams, TaskSchedule, Trajectory, end_of_task_resource, integrate_schedule
from .errors import DegeneratePool

SEED_SCHEME = "numpy SeedSequence.spawn -> PCG64([seed, stream]); scheme 1"
SCHEMA_VERSION = 1
SERIES_COLUMNS = ["task_index", "t_end", "A_end_true", "outcome", "t_begin"]


@dataclass(frozen=True)
class ScheduleGenConfig:
    n_tasks: int = 300
    lambda_on: float = 0.25
    lambda_off: float = 0.25
    lambda_break: float = 1 / 40
    break_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n_tasks < 1 or self.break_every < 1:
            raise ValueError("n_tasks and break_every must be >= 1")
        if min(self.lambda_on, self.lambda_off, self.lambda_break) <= 0:
            raise ValueError("all rates must be > 0")


@dataclass(frozen=True)
class OutcomeModel:
    """Logistic success probability in the end-of-task resource."""

    alpha: float = 169.0
    A_ref: float = 0.204

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")

    def p_correct(self, a_end) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.alpha * (np.asarray(a_end, dtype=float) - self.A_ref)))


@dataclass(eq=False)
class Series:
    schedule: TaskSchedule
    trajectory: Trajectory
    outcomes: np.ndarray
    seed: int

    @property
    def a_end(self) -> np.ndarray:
        return self.trajectory.a_end


@dataclass(eq=False)
class Dataset:
    series: list
    gen_params: CogParams
    outcome_model: OutcomeModel
    schedule_config: ScheduleGenConfig = field(default_factory=ScheduleGenConfig)
    master_seed: int = 0
    step: float = 0.01
    calibrated: bool = True

    @property
    def seeds(self) -> list:
        return [s.seed for s in self.series]

    @property
    def n_tasks(self) -> int:
        return sum(len(s.outcomes) for s in self.series)

    def pooled(self):
        """Concatenated true ``a_end`` and outcomes across series."""
        a = np.concatenate([s.a_end for s in self.series])
        o = np.concatenate([s.outcomes for s in self.series])
        return a, o

    def success_rate(self) -> float:
        return float(self.pooled()[1].mean())

    def manifest(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "generator": {"name": "infofit", "version": __version__, "seed_scheme": SEED_SCHEME},
            "gen_params": self.gen_params.to_dict(),
            "schedule_config": asdict(self.schedule_config),
            "outcome_model": asdict(self.outcome_model),
            "outcome_calibrated": self.calibrated,
            "master_seed": self.master_seed,
            "series_seeds": self.seeds,
            "n_series": len(self.series),
            "step": self.step,
            "series_files": [f"series_{i:03d}.csv" for i in range(len(self.series))],
        }

    def save(self, out_dir) -> Path:
        """Write ``manifest.json`` plus one CSV per series."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        man = self.manifest()
        text = json.dumps(man, indent=2, sort_keys=True) + "\n"
        (out / "manifest.json").write_text(text)
        chash = {k: v for k, v in man.items() if k != "series_files"}
        for name, s in zip(man["series_files"], self.series):
            sched = s.schedule
            rows = zip(
                range(sched.n_tasks), sched.task_end, s.a_end, s.outcomes.astype(int), sched.task_begin
            )
            write_csv(out / name, SERIES_COLUMNS, rows, config=chash)
        return out

    @classmethod
    def load(cls, path) -> "Dataset":
        path = Path(path)
        man = json.loads((path / "manifest.json").read_text())
        if man.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported dataset schema {man.get('schema_version')}")
        series = []
        for name, seed in zip(man["series_files"], man["series_seeds"]):
            header, rows, _ = read_csv(path / name)
            cols = {h: [r[i] for r in rows] for i, h in enumerate(header)}
            t_begin = np.array(cols["t_begin"], dtype=float)
            t_end = np.array(cols["t_end"], dtype=float)
            sched = TaskSchedule.from_task_times(t_begin, t_end)
            a_end = np.array(cols["A_end_true"], dtype=float)
            traj = Trajectory(np.empty(0), np.empty(0), np.empty(0), a_end, t_end)
            series.append(Series(sched, traj, np.array(cols["outcome"], dtype=int), int(seed)))
        return cls(
            series=series,
            gen_params=CogParams.from_dict(man["gen_params"]),
            outcome_model=OutcomeModel(**man["outcome_model"]),
            schedule_config=ScheduleGenConfig(**man["schedule_config"]),
            master_seed=man["master_seed"],
            step=man["step"],
            calibrated=man["outcome_calibrated"],
        )


def sample_schedule(cfg: ScheduleGenConfig, seed=None, t_start: float = 1.0) -> TaskSchedule:
    """Alternating exponential on/off durations, with a long break after every
    ``break_every``-th task."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    on = rng.exponential(1.0 / cfg.lambda_on, cfg.n_tasks)
    off = rng.exponential(1.0 / cfg.lambda_off, cfg.n_tasks)
    brk = rng.exponential(1.0 / cfg.lambda_break, cfg.n_tasks)
    task_no = np.arange(1, cfg.n_tasks + 1)
    off = np.where(task_no % cfg.break_every == 0, brk, off)
    durations = np.empty(2 * cfg.n_tasks)
    durations[0::2] = on
    durations[1::2] = off
    # exponential draws can underflow to exactly 0
    durations = np.maximum(durations, 1e-12)
    return TaskSchedule.from_durations(durations, t_start)


def sample_outcomes(a_end, m: OutcomeModel, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    p = m.p_correct(a_end)
    return (rng.random(p.shape) < p).astype(int)


def calibrate_outcome_model(a_end_pool, p_high: float = 0.7, q_high: float = 0.8) -> OutcomeModel:
    """Centre the sigmoid on the pool median and set its steepness so that
    the ``q_high`` quantile of the pool succeeds with probability ``p_high``."""
    pool = np.asarray(a_end_pool, dtype=float)
    a_ref = float(np.median(pool))
    gap = float(np.quantile(pool, q_high)) - a_ref
    if not gap > 0:
        raise DegeneratePool("pool quantiles coincide; cannot calibrate")
    alpha = math.log(p_high / (1.0 - p_high)) / gap
    return OutcomeModel(alpha=alpha, A_ref=a_ref)


def series_seeds(master_seed: int, n_series: int) -> list:
    children = np.random.SeedSequence(master_seed).spawn(n_series)
    return [int(c.generate_state(1)[0]) for c in children]


def generate_dataset(
    cog: CogParams = CogParams(),
    sched_cfg: ScheduleGenConfig = ScheduleGenConfig(),
    n_series: int = 5,
    outcome="calibrate",
    master_seed: int = 0,
    step: float = 0.01,
    record: bool = False,
) -> Dataset:
    """Generate ``n_series`` independent series.

    ``outcome`` is an :class:`OutcomeModel` or ``"calibrate"``; in the latter
    case the model is fitted once to the pooled true ``a_end`` of all series.
    ``record=True`` keeps the full A/B trajectories (memory heavy).
    """
    seeds = series_seeds(master_seed, n_series)
    parts = []
    for s in seeds:
        sched = sample_schedule(sched_cfg, seed=[s, 0], t_start=cog.t_start)
        if record:
            traj = integrate_schedule(cog, sched, step)
        else:
            a_end = end_of_task_resource(cog, sched, step)
            traj = Trajectory(np.empty(0), np.empty(0), np.empty(0), a_end, sched.task_end.copy())
        parts.append((s, sched, traj))

    if isinstance(outcome, str):
        if outcome != "calibrate":
            raise ValueError(f"outcome must be an OutcomeModel or 'calibrate', got {outcome!r}")
        model = calibrate_outcome_model(np.concatenate([p[2].a_end for p in parts]))
        calibrated = True
    else:
        model = outcome
        calibrated = False

    series = [
        Series(sched, traj, sample_outcomes(traj.a_end, model, [s, 1]), s) for s, sched, traj in parts
    ]
    return Dataset(series, cog, model, sched_cfg, master_seed, step, calibrated)


def dataset_hash(ds: Dataset) -> str:
    return config_hash(ds.manifest())
