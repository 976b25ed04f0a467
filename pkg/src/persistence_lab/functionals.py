"""Path functionals: the signed homogeneous functional, local time at zero,
its inverse, first passage times and the time-changed process xi.

Every array helper works along the last axis so that the same code runs on a
single path or on a ``(n_paths, n_steps + 1)`` block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .stable import PathGrid, StableParams

__all__ = [
    "FunctionalParams",
    "FunctionalSeries",
    "PassageTime",
    "LocalTimeCurve",
    "XiValue",
    "default_pv_epsilon",
    "default_bandwidth",
    "homogeneous_functional",
    "first_passage",
    "running_sup",
    "local_time_zero",
    "inverse_local_time",
    "xi_process",
    "integrand",
    "cumulative",
    "first_index_above",
    "local_time_values",
    "zero_visits",
]


@dataclass(frozen=True)
class FunctionalParams:
    """Homogeneity ``beta`` of A_t = int_0^t |Z_s|^beta sgn(Z_s) ds.

    ``pv_epsilon`` is the principal-value truncation radius.  ``None`` selects
    the grid-tied default ``(dt * kappa)**(1/alpha)``; ``0`` disables
    truncation, which is only legal when the integral converges absolutely
    (beta > -1).
    """

    beta: float
    pv_epsilon: float | None = None

    def __post_init__(self):
        if self.pv_epsilon is not None and self.pv_epsilon < 0:
            raise DomainError(f"pv_epsilon must be >= 0, got {self.pv_epsilon}")
        if self.pv_epsilon == 0 and self.beta <= -1:
            raise DomainError(
                f"beta={self.beta} <= -1 needs a principal value: pv_epsilon must be positive"
            )

    def check(self, alpha: float) -> None:
        if not self.beta > -(alpha + 1.0) / 2.0:
            raise DomainError(
                f"beta must exceed -(alpha+1)/2 = {-(alpha + 1.0) / 2.0:g}, got {self.beta}"
            )

    def delta(self, alpha: float) -> float:
        """Index (alpha-1)/(alpha+beta) of the symmetric stable process xi."""
        self.check(alpha)
        return (alpha - 1.0) / (alpha + self.beta)

    def hurst(self, alpha: float) -> float:
        """Self-similarity index 1 + beta/alpha of A."""
        return 1.0 + self.beta / alpha

    def epsilon_for(self, params: StableParams, dt: float) -> float:
        if self.pv_epsilon is not None:
            return float(self.pv_epsilon)
        return default_pv_epsilon(params, dt)


@dataclass(frozen=True)
class FunctionalSeries:
    horizon: float
    n_steps: int
    x_values: np.ndarray = field(repr=False)
    pv_epsilon: float = 0.0

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class PassageTime:
    """First grid time above ``level``, bracketed by the preceding grid time."""

    status: str  # "crossed" or "censored"
    t_lower: float
    t_upper: float
    horizon: float
    index: int = -1

    @property
    def crossed(self) -> bool:
        return self.status == "crossed"


@dataclass(frozen=True)
class LocalTimeCurve:
    bandwidth: float
    horizon: float
    n_steps: int
    l_values: np.ndarray = field(repr=False)

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps


@dataclass(frozen=True)
class XiValue:
    """xi_t = A at inverse local time tau_t, and its positive/negative parts."""

    tau: float
    xi: float
    xi_plus: float
    xi_minus: float
    index: int = -1

    @property
    def censored(self) -> bool:
        return not math.isfinite(self.tau)


def default_pv_epsilon(params: StableParams, dt: float) -> float:
    return (dt * params.kappa) ** (1.0 / params.alpha)


def default_bandwidth(params: StableParams, dt: float) -> float:
    return 2.0 * (dt * params.kappa) ** (1.0 / params.alpha)


# ---------------------------------------------------------------- array core


def integrand(z: np.ndarray, beta: float, eps: float, pos_weight: float = 1.0) -> np.ndarray:
    """g(z) = |z|^beta sgn(z) 1{|z| > eps}; zero at z = 0 whatever beta.

    ``pos_weight`` rescales the positive side (used for negative controls).
    """
    z = np.asarray(z, dtype=float)
    az = np.abs(z)
    keep = az > eps
    out = np.zeros_like(az)
    if beta == 1.0:
        np.copyto(out, z, where=keep)
    elif beta == 0.0:
        np.copyto(out, np.sign(z), where=keep)
    else:
        np.power(az, beta, out=out, where=keep)
        out *= np.sign(z)
    if pos_weight != 1.0:
        out[z > 0] *= pos_weight
    return out


def cumulative(increments: np.ndarray) -> np.ndarray:
    """Running sums with a leading zero along the last axis."""
    shape = increments.shape[:-1] + (increments.shape[-1] + 1,)
    out = np.zeros(shape)
    np.cumsum(increments, axis=-1, out=out[..., 1:])
    return out


def first_index_above(x: np.ndarray, level: float, strict: bool = True) -> np.ndarray:
    """First index along the last axis with x > level (or >=); -1 if none."""
    hit = x > level if strict else x >= level
    idx = np.argmax(hit, axis=-1)
    found = np.take_along_axis(hit, np.expand_dims(idx, -1), axis=-1)[..., 0]
    return np.where(found, idx, -1)


def local_time_values(values: np.ndarray, dt: float, bandwidth: float) -> np.ndarray:
    """Box-kernel occupation density at 0: (2h)^-1 dt #{k < j : |Z_k| < h}."""
    inside = np.abs(values[..., :-1]) < bandwidth
    counts = np.zeros(values.shape, dtype=np.int64)
    np.cumsum(inside, axis=-1, out=counts[..., 1:])
    return counts * (dt / (2.0 * bandwidth))


def zero_visits(values: np.ndarray, bandwidth: float, jump_cut: float) -> np.ndarray:
    """Boolean mask of grid indices at which the path is taken to sit at 0.

    Index k is a visit when |Z_k| < bandwidth, or when the path changes sign
    between k-1 and k through a step no larger than ``jump_cut`` (a passage
    that is too small to be a jump across the origin).
    """
    visits = np.abs(values) < bandwidth
    prev, nxt = values[..., :-1], values[..., 1:]
    crossing = (np.sign(prev) * np.sign(nxt) < 0) & (np.abs(nxt - prev) <= jump_cut)
    visits[..., 1:] |= crossing
    return visits


# ------------------------------------------------------------ single-path API


def homogeneous_functional(path: PathGrid, fparams: FunctionalParams) -> FunctionalSeries:
    """Left-endpoint Riemann sum of g(Z_s) = |Z_s|^beta sgn(Z_s) 1{|Z_s| > eps}."""
    fparams.check(path.params.alpha)
    eps = fparams.epsilon_for(path.params, path.dt)
    if eps == 0 and fparams.beta <= -1:
        raise DomainError("divergent integral: beta <= -1 requires pv_epsilon > 0")
    x = cumulative(integrand(path.values[:-1], fparams.beta, eps) * path.dt)
    return FunctionalSeries(path.horizon, path.n_steps, x, eps)


def first_passage(series: FunctionalSeries, level: float) -> PassageTime:
    if not level > 0:
        raise DomainError(f"level must be positive, got {level}")
    j = int(first_index_above(series.x_values, level))
    if j < 0:
        return PassageTime("censored", series.horizon, math.inf, series.horizon)
    return PassageTime("crossed", (j - 1) * series.dt, j * series.dt, series.horizon, j)


def running_sup(series: FunctionalSeries) -> float:
    return float(np.max(series.x_values))


def local_time_zero(path: PathGrid, bandwidth: float | None = None) -> LocalTimeCurve:
    if bandwidth is None:
        bandwidth = default_bandwidth(path.params, path.dt)
    if not bandwidth > 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth}")
    return LocalTimeCurve(
        float(bandwidth), path.horizon, path.n_steps, local_time_values(path.values, path.dt, bandwidth)
    )


def inverse_local_time(curve: LocalTimeCurve, level: float) -> float:
    """First grid time with local time above ``level``; ``inf`` when censored."""
    if level < 0:
        raise DomainError(f"level must be >= 0, got {level}")
    j = int(first_index_above(curve.l_values, level))
    return math.inf if j < 0 else j * curve.dt


def xi_process(path: PathGrid, fparams: FunctionalParams, curve: LocalTimeCurve, t: float) -> XiValue:
    """Evaluate A, A+ and A- at the inverse local time tau_t."""
    fparams.check(path.params.alpha)
    j = int(first_index_above(curve.l_values, t))
    if j < 0:
        return XiValue(math.inf, math.nan, math.nan, math.nan)
    eps = fparams.epsilon_for(path.params, path.dt)
    z = path.values[:j]
    g = integrand(z, fparams.beta, eps) * path.dt
    plus = float(np.sum(np.where(z > 0, g, 0.0)))
    minus = float(-np.sum(np.where(z < 0, g, 0.0)))
    return XiValue(j * path.dt, plus - minus, plus, minus, j)
