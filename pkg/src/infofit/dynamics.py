"""Model families: the exponential toy family and the cognitive depletion ODE.

The depletion model switches between on-task and off-task right-hand sides,
so it is integrated phase by phase with fixed-step RK4. Steps never cross a
phase boundary: the last step of each phase is shortened to land on it.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import ClassVar

import numba
import numpy as np

from ._csvio import write_csv
from .errors import NonFiniteState, SingularTime

FORMS = ("linear", "exponential", "sinusoidal")


# ---------------------------------------------------------------- toy family


@dataclass(frozen=True)
class ToyConfig:
    lambda_true: float = 2.0
    a: float = 3.0
    form: str = "linear"
    t_grid: tuple = field(default_factory=lambda: tuple(np.linspace(0.0, 10.0, 1000)))
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("t_grid must be strictly increasing with at least 2 points")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.form not in FORMS:
            raise ValueError(f"form must be one of {FORMS}, got {self.form!r}")
        object.__setattr__(self, "t_grid", tuple(float(v) for v in t))

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.t_grid)


def observe(y: np.ndarray, form: str, a: float) -> np.ndarray:
    if form == "linear":
        return a * y
    if form == "exponential":
        return np.exp(a * y)
    if form == "sinusoidal":
        return np.sin(a * y)
    raise ValueError(f"unknown form {form!r}")


def toy_generate(cfg: ToyConfig):
    """Return ``(x, y, z)``: decay, noisy hidden layer, observed layer."""
    t = cfg.t
    x = np.exp(-cfg.lambda_true * t)
    rng = np.random.default_rng(cfg.seed)
    y = x + rng.normal(0.0, cfg.noise_std, size=t.shape) if cfg.noise_std > 0 else x.copy()
    return x, y, observe(y, cfg.form, cfg.a)


def toy_candidate(lambda_hat: float, t_grid) -> np.ndarray:
    return np.exp(-lambda_hat * np.asarray(t_grid, dtype=float))


# ----------------------------------------------------------- depletion model


@dataclass(frozen=True)
class CogParams:
    """Rate constants and initial state of the depletion model.

    Rates carry units of 1/min**(1 - rho). ``t_start`` must be positive
    because the rates scale as 1/t**rho.
    """

    k_w: float = 0.2
    k_r: float = 0.3
    k_b: float = 0.4
    K_A: float = 0.1
    K_B: float = 0.1
    B_max: float = 1.0
    rho: float = 0.5
    A0_init: float = 0.3
    B0_init: float = 1.0
    t_start: float = 1.0

    RHO_LIMIT: ClassVar[float] = 1.0
    FIT_NAMES: ClassVar[tuple] = ("k_w", "k_r", "k_b", "K_A", "K_B", "B_max", "rho")
    POSITIVE: ClassVar[tuple] = ("k_w", "k_r", "k_b", "K_A", "K_B", "B_max")

    def __post_init__(self):
        for name in ("k_w", "k_r", "k_b"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("K_A", "K_B", "B_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 <= self.rho < self.RHO_LIMIT:
            raise ValueError(f"rho must lie in [0, {self.RHO_LIMIT})")
        if not 0 <= self.A0_init <= 1:
            raise ValueError("A0_init must lie in [0, 1]")
        if not 0 <= self.B0_init <= self.B_max:
            raise ValueError("B0_init must lie in [0, B_max]")
        if not self.t_start > 0:
            raise SingularTime(f"t_start must be > 0, got {self.t_start}")

    def with_param(self, name: str, value: float) -> "CogParams":
        """Copy with one parameter changed.

        Changing ``B_max`` rescales ``B0_init`` so the initial fill fraction
        of the secondary store is preserved.
        """
        if name == "B_max":
            return replace(self, B_max=value, B0_init=self.B0_init * value / self.B_max)
        return replace(self, **{name: value})

    def vector(self, names=FIT_NAMES) -> np.ndarray:
        return np.array([getattr(self, n) for n in names], dtype=float)

    def with_vector(self, values, names=FIT_NAMES) -> "CogParams":
        p = self
        for n, v in zip(names, values):
            p = p.with_param(n, float(v))
        return p

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CogParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown CogParams fields: {sorted(unknown)}")
        return cls(**d)

    def _array(self) -> np.ndarray:
        return np.array([self.k_w, self.k_r, self.k_b, self.K_A, self.K_B, self.B_max, self.rho])


@dataclass(frozen=True, eq=False)
class TaskSchedule:
    """Alternating on/off phases given by absolute boundary times.

    ``boundaries`` has one more entry than ``on``; phase i spans
    ``[boundaries[i], boundaries[i+1]]``.
    """

    on: np.ndarray
    boundaries: np.ndarray

    def __post_init__(self):
        on = np.asarray(self.on, dtype=bool)
        b = np.asarray(self.boundaries, dtype=float)
        if on.size == 0:
            raise ValueError("schedule has no phases")
        if b.size != on.size + 1:
            raise ValueError("need len(on) + 1 boundaries")
        if not on[0] or np.any(on[1:] == on[:-1]):
            raise ValueError("phases must alternate on/off starting with on")
        if np.any(np.diff(b) <= 0):
            raise ValueError("every phase duration must be > 0")
        object.__setattr__(self, "on", on)
        object.__setattr__(self, "boundaries", b)

    @classmethod
    def from_durations(cls, durations, t_start: float = 1.0) -> "TaskSchedule":
        """Build from phase durations, first phase on-task.

        A zero-length trailing off-phase is dropped.
        """
        d = np.asarray(durations, dtype=float)
        if d.size > 1 and d.size % 2 == 0 and d[-1] == 0:
            d = d[:-1]
        on = np.arange(d.size) % 2 == 0
        b = t_start + np.concatenate([[0.0], np.cumsum(d)])
        return cls(on, b)

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @property
    def n_tasks(self) -> int:
        return int(self.on.sum())

    @property
    def t_start(self) -> float:
        return float(self.boundaries[0])

    @property
    def task_begin(self) -> np.ndarray:
        return self.boundaries[:-1][self.on]

    @property
    def task_end(self) -> np.ndarray:
        return self.boundaries[1:][self.on]

    @property
    def phases(self) -> list:
        return [
            {"kind": "on" if o else "off", "duration": float(d)}
            for o, d in zip(self.on, self.durations)
        ]

    def __eq__(self, other):
        return (
            isinstance(other, TaskSchedule)
            and np.array_equal(self.on, other.on)
            and np.array_equal(self.boundaries, other.boundaries)
        )

    @classmethod
    def from_task_times(cls, t_begin, t_end, t_final=None) -> "TaskSchedule":
        """Rebuild from per-task start/end times (as stored in dataset CSVs)."""
        t_begin = np.asarray(t_begin, dtype=float)
        t_end = np.asarray(t_end, dtype=float)
        b = np.empty(2 * t_begin.size)
        b[0::2] = t_begin
        b[1::2] = t_end
        on = np.arange(b.size - 1) % 2 == 0
        if t_final is not None and t_final > b[-1]:
            b = np.append(b, t_final)
            on = np.append(on, False)
        return cls(on, b)


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    A: np.ndarray
    B: np.ndarray
    a_end: np.ndarray
    t_end: np.ndarray
    clamp_events: int = 0

    def write_csv(self, path, config=None):
        rows = zip(self.times.tolist(), self.A.tolist(), self.B.tolist())
        write_csv(path, ["time", "A", "B"], rows, config)

    def write_a_end_csv(self, path, config=None):
        rows = zip(range(len(self.a_end)), self.t_end.tolist(), self.a_end.tolist())
        write_csv(path, ["task_index", "t_end", "A_end"], rows, config)


def cog_rhs(A: float, B: float, t: float, on_task: bool, p: CogParams):
    """Time derivatives ``(dA, dB)`` of the depletion model."""
    if not t > 0:
        raise SingularTime(f"model is singular at t={t}")
    return _rhs(A, B, t, bool(on_task), *p._array())


@numba.njit(cache=True, nogil=True)
def _rhs(A, B, t, on, k_w, k_r, k_b, K_A, K_B, B_max, rho):
    scale = t ** (-rho)
    if on:
        w = k_b * scale * (1.0 - A) * B / (K_B + B)
        recover = 0.0
    else:
        w = 0.0
        recover = k_r * scale * (B_max - B)
    dA = w - k_w * scale * A / (K_A + A)
    dB = -w + recover
    return dA, dB


@numba.njit(cache=True, nogil=True)
def _phase_steps(t0, t1, step):
    n = math.ceil((t1 - t0) / step - 1e-9)
    return max(n, 1)


@numba.njit(cache=True, nogil=True)
def _integrate(bounds, on, prm, A0, B0, step, record, out_t, out_a, out_b, a_end):
    k_w, k_r, k_b, K_A, K_B, B_max, rho = prm[0], prm[1], prm[2], prm[3], prm[4], prm[5], prm[6]
    A = A0
    B = B0
    clamps = 0
    pos = 0
    task = 0
    if record:
        out_t[0] = bounds[0]
        out_a[0] = A
        out_b[0] = B
        pos = 1
    for i in range(on.size):
        t0 = bounds[i]
        t1 = bounds[i + 1]
        flag = on[i]
        n = _phase_steps(t0, t1, step)
        for j in range(n):
            t = t0 + j * step
            h = step if j < n - 1 else t1 - t
            a1, b1 = _rhs(A, B, t, flag, k_w, k_r, k_b, K_A, K_B, B_max, rho)
            a2, b2 = _rhs(A + 0.5 * h * a1, B + 0.5 * h * b1, t + 0.5 * h, flag,
                          k_w, k_r, k_b, K_A, K_B, B_max, rho)
            a3, b3 = _rhs(A + 0.5 * h * a2, B + 0.5 * h * b2, t + 0.5 * h, flag,
                          k_w, k_r, k_b, K_A, K_B, B_max, rho)
            a4, b4 = _rhs(A + h * a3, B + h * b3, t + h, flag,
                          k_w, k_r, k_b, K_A, K_B, B_max, rho)
            A = A + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            B = B + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            if not (np.isfinite(A) and np.isfinite(B)):
                return -1 - i, clamps
            if A < 0.0:
                A = 0.0
                clamps += 1
            elif A > 1.0:
                A = 1.0
                clamps += 1
            if B < 0.0:
                B = 0.0
                clamps += 1
            elif B > B_max:
                B = B_max
                clamps += 1
            if record:
                out_t[pos] = t1 if j == n - 1 else t + h
                out_a[pos] = A
                out_b[pos] = B
                pos += 1
        if flag:
            a_end[task] = A
            task += 1
    return 0, clamps


def _run(p: CogParams, sched: TaskSchedule, step: float, record: bool):
    if not step > 0:
        raise ValueError("step must be > 0")
    if sched.t_start <= 0:
        raise SingularTime(f"schedule starts at t={sched.t_start}")
    if record:
        n = sum(_phase_steps(a, b, step) for a, b in zip(sched.boundaries[:-1], sched.boundaries[1:]))
        out = [np.empty(n + 1) for _ in range(3)]
    else:
        out = [np.empty(0) for _ in range(3)]
    a_end = np.empty(sched.n_tasks)
    status, clamps = _integrate(
        sched.boundaries, sched.on, p._array(), float(p.A0_init), float(p.B0_init),
        float(step), record, out[0], out[1], out[2], a_end,
    )
    if status != 0:
        phase = -status - 1
        raise NonFiniteState(f"state diverged in phase {phase}", phase_index=phase)
    return out, a_end, clamps


def integrate_schedule(p: CogParams, sched: TaskSchedule, step: float = 0.01) -> Trajectory:
    """Integrate the depletion model over a schedule, recording every step."""
    (t, A, B), a_end, clamps = _run(p, sched, step, True)
    return Trajectory(t, A, B, a_end, sched.task_end.copy(), clamps)


def end_of_task_resource(p: CogParams, sched: TaskSchedule, step: float = 0.01) -> np.ndarray:
    """A at the end of each task, without storing the trajectory."""
    return _run(p, sched, step, False)[1]


def clamp_count(p: CogParams, sched: TaskSchedule, step: float = 0.01) -> int:
    return _run(p, sched, step, False)[2]
