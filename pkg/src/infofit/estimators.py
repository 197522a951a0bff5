"""k-nearest-neighbour estimators of entropy, mutual information and KL divergence.

All estimators work in the max-norm (Chebyshev) metric and report nats
internally. Neighbour search is exact (``scipy.spatial.cKDTree``).

Ties are broken with a tiny seeded jitter. The noise assigned to a point
depends only on its rank in a lexicographic sort of the data, so the result
of every estimator is invariant to the order in which samples are given.
Averages are accumulated with :func:`math.fsum` for the same reason.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .errors import DimensionMismatch, LengthMismatch, NonPositiveSigma, TooFewSamples

LN2 = math.log(2.0)

DEGENERATE = "degenerate_input"
SINGLE_CLASS = "single_class"
SMALL_CLASS = "small_class"
LNC_FALLBACK = "lnc_fallback"
COINCIDENT = "coincident_samples_excluded"


@dataclass(frozen=True)
class EstimatorConfig:
    """Settings shared by all estimators.

    ``jitter_scale`` is relative: the noise added to a coordinate is
    uniform on ``[0, jitter_scale * range)`` of that coordinate.
    """

    k: int = 3
    lnc_alpha: float = 0.25
    jitter_scale: float = 1e-10
    units: str = "nats"
    seed: int = 0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if not 0.0 < self.lnc_alpha <= 1.0:
            raise ValueError(f"lnc_alpha must lie in (0, 1], got {self.lnc_alpha}")
        if not 0.0 < self.jitter_scale <= 1e-8:
            raise ValueError(f"jitter_scale must lie in (0, 1e-8], got {self.jitter_scale}")
        if self.units not in ("nats", "bits"):
            raise ValueError(f"units must be 'nats' or 'bits', got {self.units!r}")


@dataclass(frozen=True)
class Estimate:
    """An estimator result. ``value_nats`` is what gets reported; ``raw_nats``
    keeps the unclamped number for MI estimators."""

    value_nats: float
    k: int
    n: int
    flags: tuple = ()
    raw_nats: float | None = None
    units: str = field(default="nats", compare=False)

    @property
    def value(self) -> float:
        return self.value_nats / LN2 if self.units == "bits" else self.value_nats

    @property
    def value_bits(self) -> float:
        return self.value_nats / LN2

    def __float__(self):
        return float(self.value)

    def to_dict(self) -> dict:
        return {"value_nats": self.value_nats, "k": self.k, "n": self.n, "flags": list(self.flags)}


def as_points(a) -> np.ndarray:
    """Coerce a sample array to an (n, d) float matrix and validate it."""
    pts = np.asarray(a, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
        raise ValueError(f"expected an (n, d) sample matrix, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("samples contain non-finite values")
    return pts


def is_degenerate(pts: np.ndarray) -> bool:
    """True when every row is identical."""
    return bool(np.all(pts == pts[0]))


def jitter(pts: np.ndarray, cfg: EstimatorConfig, key: np.ndarray | None = None) -> np.ndarray:
    """Add rank-assigned uniform noise to break ties.

    The i-th smallest row of ``key`` (lexicographically) receives the i-th
    noise draw, so permuting rows permutes the output identically. Rows with
    identical keys are interchangeable, which keeps this well defined.
    """
    key = pts if key is None else key
    order = np.lexsort(key.T[::-1])
    scale = np.ptp(pts, axis=0)
    fallback = np.maximum(np.abs(pts).max(axis=0), 1.0)
    scale = np.where(scale > 0, scale, fallback) * cfg.jitter_scale
    rng = np.random.default_rng(cfg.seed)
    noise = rng.random(pts.shape) * scale
    out = pts.copy()
    out[order] += noise
    return out


def _mean(values) -> float:
    values = np.asarray(values, dtype=float).ravel()
    return math.fsum(values) / len(values)


def _kth_distance(tree: cKDTree, pts: np.ndarray, k: int):
    """Distance from each point to its k-th neighbour, excluding itself."""
    dist, idx = tree.query(pts, k=k + 1, p=np.inf)
    return dist[:, k], idx


def _count_within(pts: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Number of points strictly closer than ``radii`` (self included)."""
    tree = cKDTree(pts)
    r = np.nextafter(radii, 0.0)
    return np.asarray(tree.query_ball_point(pts, r, p=np.inf, return_length=True), dtype=float)


def _check_k(n: int, k: int):
    if n <= k:
        raise TooFewSamples(f"need more than k={k} samples, got {n}")


def _kl_entropy_nats(pts: np.ndarray, k: int) -> float:
    n, d = pts.shape
    eps, _ = _kth_distance(cKDTree(pts), pts, k)
    return float(digamma(n) - digamma(k)) + d * _mean(np.log(2.0 * eps))


def entropy_knn(s, cfg: EstimatorConfig = EstimatorConfig()) -> Estimate:
    """Kozachenko-Leonenko differential entropy.

    Returns ``-inf`` flagged ``degenerate_input`` when all samples coincide.
    """
    pts = as_points(s)
    n, _ = pts.shape
    _check_k(n, cfg.k)
    if is_degenerate(pts):
        return Estimate(-math.inf, cfg.k, n, (DEGENERATE,), units=cfg.units)
    h = _kl_entropy_nats(jitter(pts, cfg), cfg.k)
    return Estimate(h, cfg.k, n, raw_nats=h, units=cfg.units)


def _pair(x, y, k):
    xp, yp = as_points(x), as_points(y)
    if xp.shape[0] != yp.shape[0]:
        raise LengthMismatch(f"x has {xp.shape[0]} samples, y has {yp.shape[0]}")
    _check_k(xp.shape[0], k)
    return xp, yp


def _ksg_parts(xp, yp, cfg):
    joint = jitter(np.hstack([xp, yp]), cfg)
    dx = xp.shape[1]
    jx, jy = joint[:, :dx], joint[:, dx:]
    tree = cKDTree(joint)
    eps, idx = _kth_distance(tree, joint, cfg.k)
    n = joint.shape[0]
    nx = _count_within(jx, eps)
    ny = _count_within(jy, eps)
    raw = float(digamma(cfg.k) + digamma(n)) - _mean(digamma(nx)) - _mean(digamma(ny))
    return raw, joint, idx


def mi_ksg(x, y, cfg: EstimatorConfig = EstimatorConfig()) -> Estimate:
    """Kraskov-Stoegbauer-Grassberger estimator (algorithm 1).

    The reported value is clamped at zero; ``raw_nats`` holds the
    unclamped estimate. A constant ``x`` or ``y`` gives exactly 0.
    """
    xp, yp = _pair(x, y, cfg.k)
    n = xp.shape[0]
    if is_degenerate(xp) or is_degenerate(yp):
        return Estimate(0.0, cfg.k, n, (DEGENERATE,), raw_nats=0.0, units=cfg.units)
    raw, _, _ = _ksg_parts(xp, yp, cfg)
    return Estimate(max(raw, 0.0), cfg.k, n, raw_nats=raw, units=cfg.units)


def lnc_correction(joint: np.ndarray, idx: np.ndarray, k: int, alpha: float) -> float:
    """Local non-uniformity correction term (always >= 0).

    For each point, the max-norm box spanned by its k neighbours is compared
    with the box aligned to the principal axes of the same neighbourhood.
    Where the log-volume ratio falls below ``log(alpha)`` the neighbourhood is
    treated as locally non-uniform and the log ratio is subtracted.
    """
    n = joint.shape[0]
    nb = joint[idx] - joint[:, None, :]
    cov = np.einsum("nki,nkj->nij", nb, nb) / k
    _, vecs = np.linalg.eigh(cov)
    rotated = np.einsum("nki,nij->nkj", nb, vecs)
    with np.errstate(divide="ignore"):
        log_rect = np.log(np.abs(rotated).max(axis=1)).sum(axis=1)
        log_box = np.log(np.abs(nb).max(axis=1)).sum(axis=1)
    ok = np.isfinite(log_rect) & np.isfinite(log_box)
    mask = ok & (log_rect < log_box + math.log(alpha))
    return math.fsum((log_box - log_rect)[mask]) / n


def mi_lnc(x, y, cfg: EstimatorConfig = EstimatorConfig()) -> Estimate:
    """KSG with local non-uniformity correction.

    Needs ``k >= d + 1`` (d = joint dimension) for the local principal axes;
    with fewer neighbours it falls back to plain KSG and sets ``lnc_fallback``.
    """
    xp, yp = _pair(x, y, cfg.k)
    n = xp.shape[0]
    if is_degenerate(xp) or is_degenerate(yp):
        return Estimate(0.0, cfg.k, n, (DEGENERATE,), raw_nats=0.0, units=cfg.units)
    raw, joint, idx = _ksg_parts(xp, yp, cfg)
    flags = ()
    if cfg.k < joint.shape[1] + 1:
        flags = (LNC_FALLBACK,)
    else:
        raw += lnc_correction(joint, idx, cfg.k, cfg.lnc_alpha)
    return Estimate(max(raw, 0.0), cfg.k, n, flags, raw_nats=raw, units=cfg.units)


def mi_mixed(values, labels, cfg: EstimatorConfig = EstimatorConfig()) -> Estimate:
    """MI between continuous ``values`` and discrete ``labels``.

    Computed as H(values) - sum_c p(c) H(values | label=c) with
    :func:`entropy_knn`. Classes with ``k`` or fewer members get zero weight
    in the conditional term and raise the ``small_class`` flag.
    """
    pts = as_points(values)
    labels = np.asarray(labels).ravel()
    n = pts.shape[0]
    if labels.shape[0] != n:
        raise LengthMismatch(f"{n} values but {labels.shape[0]} labels")
    _check_k(n, cfg.k)
    classes, counts = np.unique(labels, return_counts=True)
    if counts.max() <= cfg.k:
        raise TooFewSamples(f"no label class has more than k={cfg.k} members")
    if len(classes) == 1:
        return Estimate(0.0, cfg.k, n, (SINGLE_CLASS,), raw_nats=0.0, units=cfg.units)
    if is_degenerate(pts):
        return Estimate(0.0, cfg.k, n, (DEGENERATE,), raw_nats=0.0, units=cfg.units)

    _, codes = np.unique(labels, return_inverse=True)
    key = np.hstack([pts, codes[:, None].astype(float)])
    jp = jitter(pts, cfg, key=key)
    flags = []
    h_cond = []
    for code, count in enumerate(counts):
        if count <= cfg.k:
            if SMALL_CLASS not in flags:
                flags.append(SMALL_CLASS)
            continue
        h_cond.append(count / n * _kl_entropy_nats(jp[codes == code], cfg.k))
    raw = _kl_entropy_nats(jp, cfg.k) - math.fsum(h_cond)
    return Estimate(max(raw, 0.0), cfg.k, n, tuple(flags), raw_nats=raw, units=cfg.units)


def kl_knn(p, q, cfg: EstimatorConfig = EstimatorConfig(), paired: bool = False) -> Estimate:
    """Nearest-neighbour estimate of D(P || Q) from samples.

    ``paired=True`` declares that ``p[i]`` and ``q[i]`` are two versions of
    the same observation; ``q[i]`` is then left out when searching ``q`` for
    the neighbours of ``p[i]``. Without pairing, a ``q`` sample that
    coincides exactly with ``p[i]`` is treated the same way.
    """
    pp, qp = as_points(p), as_points(q)
    n, d = pp.shape
    m = qp.shape[0]
    if qp.shape[1] != d:
        raise DimensionMismatch(f"p has dimension {d}, q has {qp.shape[1]}")
    _check_k(n, cfg.k)
    if paired and m != n:
        raise LengthMismatch("paired samples must have equal length")
    if m < cfg.k + (1 if paired else 0):
        raise TooFewSamples(f"q needs at least k={cfg.k} samples, got {m}")

    pj = jitter(pp, cfg)
    qj = jitter(qp, cfg)
    rho, _ = _kth_distance(cKDTree(pj), pj, cfg.k)
    qtree = cKDTree(qj)
    flags = ()
    if paired:
        dist, idx = qtree.query(pj, k=cfg.k + 1, p=np.inf)
        dist, idx = dist.reshape(n, -1), idx.reshape(n, -1)
        own = idx == np.arange(n)[:, None]
        # drop the partner if it is among the k+1 nearest, else drop the farthest
        keep = ~own
        keep[~own.any(axis=1), -1] = False
        nu = dist[keep].reshape(n, cfg.k)[:, -1]
        m_eff = m - 1
    else:
        kk = min(cfg.k + 1, m)
        dist = qtree.query(pj, k=kk, p=np.inf)[0].reshape(n, -1)
        hit = dist[:, 0] == 0.0
        nu = dist[:, cfg.k - 1].copy()
        if hit.any():
            if kk <= cfg.k:
                raise TooFewSamples("not enough q samples after excluding coincident points")
            nu[hit] = dist[hit, cfg.k]
            flags = (COINCIDENT,)
        m_eff = m
    value = d * _mean(np.log(nu / rho)) + math.log(m_eff / (n - 1))
    return Estimate(value, cfg.k, n, flags, raw_nats=value, units=cfg.units)


def kl_to_gaussian(p, mu: float, sigma: float, cfg: EstimatorConfig = EstimatorConfig()) -> Estimate:
    """D(P || N(mu, sigma^2)) for one-dimensional samples.

    Uses the kNN entropy of P and the exact Gaussian log density for the
    cross-entropy term.
    """
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    pts = as_points(p)
    if pts.shape[1] != 1:
        raise DimensionMismatch("kl_to_gaussian needs one-dimensional samples")
    h = entropy_knn(pts, cfg)
    if not math.isfinite(h.value_nats):
        return Estimate(math.inf, cfg.k, pts.shape[0], h.flags, raw_nats=math.inf, units=cfg.units)
    z = (pts[:, 0] - mu) / sigma
    log_pdf = -0.5 * z**2 - math.log(sigma) - 0.5 * math.log(2 * math.pi)
    value = -h.value_nats - _mean(log_pdf)
    return Estimate(value, cfg.k, pts.shape[0], h.flags, raw_nats=value, units=cfg.units)
