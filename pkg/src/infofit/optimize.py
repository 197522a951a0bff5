"""One-at-a-time parameter sweeps and penalised SPSA."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ._csvio import write_csv
from .datagen import Dataset
from .dynamics import CogParams, ToyConfig, toy_candidate, toy_generate
from .estimators import EstimatorConfig, mi_ksg, mi_lnc
from .errors import InfoFitError
from .objectives import ObjectiveSpec, evaluate_objective

logger = logging.getLogger(__name__)

TOY_PARAM = "lambda_hat"


def toy_grid(start=-1.0, stop=4.0, step=0.01) -> np.ndarray:
    """Inclusive grid rounded to the step's decimals, so 0 is hit exactly."""
    n = int(round((stop - start) / step))
    decimals = max(0, -int(math.floor(math.log10(step))) + 2)
    return np.round(start + step * np.arange(n + 1), decimals)


def factor_grid(center: float, lo=0.5, hi=2.0, n=9) -> np.ndarray:
    """Geometric grid of ``n`` points from ``lo*center`` to ``hi*center``.

    With ``lo * hi == 1`` and odd ``n`` the middle point is ``center`` itself.
    """
    f = np.geomspace(lo, hi, n)
    if n % 2 == 1 and math.isclose(lo * hi, 1.0):
        f[n // 2] = 1.0
    return center * f


@dataclass(frozen=True)
class SweepSpec:
    param_name: str
    grid: tuple
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    base_params: object = field(default_factory=CogParams)
    toy_estimator: str = "lnc"

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float).ravel()
        if g.size == 0 or np.any(np.diff(g) <= 0):
            raise ValueError("sweep grid must be non-empty and strictly increasing")
        object.__setattr__(self, "grid", tuple(float(v) for v in g))
        if isinstance(self.base_params, ToyConfig):
            if self.param_name != TOY_PARAM:
                raise ValueError(f"toy sweeps vary {TOY_PARAM!r}")
            if self.toy_estimator not in ("lnc", "ksg"):
                raise ValueError("toy_estimator must be 'lnc' or 'ksg'")
        elif self.param_name not in CogParams.FIT_NAMES:
            raise ValueError(f"cannot sweep {self.param_name!r}")

    @property
    def direction(self) -> str:
        return "maximize" if isinstance(self.base_params, ToyConfig) else self.objective.direction

    @property
    def true_value(self) -> float:
        if isinstance(self.base_params, ToyConfig):
            return self.base_params.lambda_true
        return float(getattr(self.base_params, self.param_name))


@dataclass
class SweepCurve:
    param_name: str
    direction: str
    grid: np.ndarray
    values: np.ndarray
    fc: np.ndarray
    errors: list
    true_value: float = math.nan
    kind: str = "mi"

    @property
    def argopt(self) -> float:
        """Grid location of the best finite value (nan if none)."""
        v = np.where(np.isfinite(self.values), self.values, np.nan)
        if np.all(np.isnan(v)):
            return math.nan
        i = np.nanargmax(v) if self.direction == "maximize" else np.nanargmin(v)
        return float(self.grid[i])

    def value_at(self, x: float) -> float:
        i = int(np.argmin(np.abs(self.grid - x)))
        return float(self.values[i])

    def write_csv(self, path, config=None):
        rows = (
            (g, v, f, e or "")
            for g, v, f, e in zip(self.grid, self.values.tolist(), self.fc.tolist(), self.errors)
        )
        meta = [f"param={self.param_name} kind={self.kind} direction={self.direction} generating_value={self.true_value!r}"]
        write_csv(path, ["param_value", "objective_nats", "fc", "error_flag"], rows, config, meta)


def _toy_point(spec: SweepSpec, z, lam):
    cfg = spec.objective.estimator_cfg
    est = mi_lnc if spec.toy_estimator == "lnc" else mi_ksg
    return est(z, toy_candidate(lam, spec.base_params.t), cfg).value_nats, math.nan


def _cog_point(spec: SweepSpec, data, step, value):
    cand = spec.base_params.with_param(spec.param_name, value)
    ov = evaluate_objective(spec.objective, data, cand, step)
    return ov.value, ov.constraint_fc


def run_sweep(spec: SweepSpec, data: Dataset | None = None, step: float | None = None, workers: int = 1) -> SweepCurve:
    """Evaluate the objective at every grid point, others held at ``base_params``.

    A failing point is stored as NaN with its error message and does not
    abort the sweep. Results do not depend on ``workers``.
    """
    if isinstance(spec.base_params, ToyConfig):
        _, _, z = toy_generate(spec.base_params)

        def point(x):
            return _toy_point(spec, z, x)

        kind = "mi"
    else:
        if data is None:
            raise ValueError("cognitive sweeps need a dataset")

        def point(x):
            return _cog_point(spec, data, step, x)

        kind = spec.objective.kind

    def safe(x):
        try:
            v, f = point(x)
            return v, f, None
        except (InfoFitError, ValueError, ArithmeticError) as exc:
            return math.nan, math.nan, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(safe, spec.grid))
    else:
        results = [safe(x) for x in spec.grid]
    values, fc, errors = zip(*results)
    return SweepCurve(
        spec.param_name, spec.direction, np.array(spec.grid), np.array(values, dtype=float),
        np.array(fc, dtype=float), list(errors), spec.true_value, kind,
    )


# --------------------------------------------------------------------- SPSA


@dataclass(frozen=True)
class SpsaConfig:
    a: float = 0.1
    c: float = 0.05
    A_stab: float | None = None
    alpha_gain: float = 0.602
    gamma_gain: float = 0.101
    iterations: int = 100
    penalty_weight: float = 10.0
    seed: int = 0
    param_bounds: tuple | None = None

    def __post_init__(self):
        if not (self.a > 0 and self.c > 0):
            raise ValueError("SPSA gains a and c must be > 0")
        if not 0 < self.gamma_gain < self.alpha_gain <= 1:
            raise ValueError("need 0 < gamma_gain < alpha_gain <= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.penalty_weight < 0:
            raise ValueError("penalty_weight must be >= 0")

    @property
    def stability(self) -> float:
        return 0.1 * self.iterations if self.A_stab is None else self.A_stab

    def gains(self, k: int):
        ak = self.a / (self.stability + k + 1) ** self.alpha_gain
        ck = self.c / (k + 1) ** self.gamma_gain
        return ak, ck


@dataclass
class SpsaResult:
    x_best: np.ndarray
    history: list
    n_evals: int
    best_value: float = math.nan
    best_fc: float = math.nan

    @property
    def feasible(self) -> bool:
        return self.best_fc >= 0 or math.isnan(self.best_fc)

    def write_csv(self, path, names=None, config=None):
        d = len(self.x_best)
        names = list(names) if names is not None else [f"x{i}" for i in range(d)]
        rows = (
            [h["iteration"], *h["x"], h["objective"], h["fc"], h["feasible"]] for h in self.history
        )
        write_csv(path, ["iteration", *names, "objective", "fc", "feasible"], rows, config)


class SpsaAborted(InfoFitError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


def spsa_minimize(objective, constraint, x0, cfg: SpsaConfig = SpsaConfig(), direction: str = "minimize") -> SpsaResult:
    """Simultaneous-perturbation stochastic approximation.

    Each iteration makes exactly two ``objective`` calls, at
    ``theta +/- c_k * delta`` with Rademacher ``delta``. The minimised loss
    is the direction-normalised objective plus
    ``penalty_weight * max(0, -fc)**2`` when ``constraint`` is given.

    Iterate k is scored by the mean of its two perturbed evaluations (the
    iterate itself is never evaluated). The best iterate is the feasible one
    with the lowest unpenalised score, or the least violating one if none
    is feasible.
    """
    sign = {"minimize": 1.0, "maximize": -1.0}[direction]
    theta = np.array(x0, dtype=float)
    d = theta.size
    if cfg.param_bounds is not None:
        bounds = np.asarray(cfg.param_bounds, dtype=float).reshape(d, 2)
        lo, hi = bounds[:, 0], bounds[:, 1]
        if np.any(theta < lo) or np.any(theta > hi):
            raise ValueError("x0 lies outside param_bounds")
    else:
        lo = np.full(d, -np.inf)
        hi = np.full(d, np.inf)
    rng = np.random.default_rng(cfg.seed)

    history = []
    n_evals = 0

    def loss(x):
        nonlocal n_evals
        n_evals += 1
        v = sign * float(objective(x))
        f = float(constraint(x)) if constraint is not None else math.nan
        pen = cfg.penalty_weight * max(0.0, -f) ** 2 if constraint is not None else 0.0
        return v, f, v + pen

    for k in range(cfg.iterations):
        ak, ck = cfg.gains(k)
        delta = rng.integers(0, 2, size=d) * 2.0 - 1.0
        plus = np.clip(theta + ck * delta, lo, hi)
        minus = np.clip(theta - ck * delta, lo, hi)
        try:
            vp, fp, lp = loss(plus)
            vm, fm, lm = loss(minus)
        except Exception as exc:
            raise SpsaAborted(f"evaluation failed at iteration {k}: {exc}", history) from exc
        fc = 0.5 * (fp + fm)
        history.append({
            "iteration": k,
            "x": theta.copy(),
            "objective": sign * 0.5 * (vp + vm),
            "score": 0.5 * (vp + vm),
            "fc": fc,
            "feasible": bool(constraint is None or fc >= 0),
        })
        ghat = (lp - lm) / (2.0 * ck * delta)
        theta = np.clip(theta - ak * ghat, lo, hi)
        if not np.all(np.isfinite(theta)):
            raise SpsaAborted(f"iterate became non-finite at iteration {k}", history)

    if not history:
        return SpsaResult(np.array(x0, dtype=float), history, n_evals)
    feasible = [h for h in history if h["feasible"]]
    if feasible:
        best = min(feasible, key=lambda h: h["score"])
    else:
        best = max(history, key=lambda h: h["fc"])
    return SpsaResult(best["x"].copy(), history, n_evals, best["objective"], best["fc"])


# ------------------------------------------------------- fitting CogParams


def to_search_space(values, names) -> np.ndarray:
    return np.array([math.log(v) if n in CogParams.POSITIVE else v for n, v in zip(names, values)])


def from_search_space(u, names) -> np.ndarray:
    return np.array([math.exp(x) if n in CogParams.POSITIVE else x for n, x in zip(names, u)])


DEFAULT_BOUNDS = {"rho": (0.0, 0.95)}


def fit_cog_params(
    data: Dataset,
    start: CogParams,
    spec: ObjectiveSpec = ObjectiveSpec(),
    cfg: SpsaConfig = SpsaConfig(),
    names=CogParams.FIT_NAMES,
    bounds: dict | None = None,
    step: float | None = None,
):
    """Fit ``names`` jointly with SPSA under the ``fc >= 0`` penalty.

    Positive parameters are searched in log space. ``bounds`` maps a name to
    ``(lo, hi)`` in natural units; positive parameters default to
    ``[start/10, start*10]``. Returns ``(params, SpsaResult, start_value,
    best_value)`` where the two values are direct evaluations; the start is
    kept if SPSA's best iterate does not beat it.
    """
    names = tuple(names)
    bounds = dict(bounds or {})
    nat_bounds = []
    for n in names:
        v = getattr(start, n)
        nat_bounds.append(bounds.get(n, DEFAULT_BOUNDS.get(n, (v / 10.0, v * 10.0))))
    u_bounds = tuple(
        (math.log(lo), math.log(hi)) if n in CogParams.POSITIVE else (lo, hi)
        for n, (lo, hi) in zip(names, nat_bounds)
    )
    cfg = replace(cfg, param_bounds=u_bounds)
    cache = {}

    def evaluate(u):
        key = tuple(np.round(u, 12))
        if key not in cache:
            cand = start.with_vector(from_search_space(u, names), names)
            cache[key] = evaluate_objective(spec, data, cand, step)
        return cache[key]

    u0 = to_search_space(start.vector(names), names)
    result = spsa_minimize(
        lambda u: evaluate(u).value, lambda u: evaluate(u).constraint_fc, u0, cfg, spec.direction
    )
    start_val = evaluate_objective(spec, data, start, step)
    best = start.with_vector(from_search_space(result.x_best, names), names)
    best_val = evaluate_objective(spec, data, best, step)
    sign = 1.0 if spec.direction == "maximize" else -1.0
    better = sign * best_val.value >= sign * start_val.value
    if not (better and (best_val.feasible or not start_val.feasible)):
        logger.info("SPSA best iterate did not improve on the start; keeping the start")
        best, best_val = start, start_val
    return best, result, start_val, best_val
