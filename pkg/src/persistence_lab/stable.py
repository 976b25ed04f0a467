"""Strictly alpha-stable laws, exact increment sampling and discretized paths.

The characteristic exponent is

    Psi(lam) = kappa |lam|^alpha (1 - i chi sgn(lam) tan(pi alpha / 2)),

so ``E[exp(i lam Z_1)] = exp(-Psi(lam))``.  Samples are drawn with the
Chambers-Mallows-Stuck construction in the S1 parameterization, which has the
same exponent once ``sigma**alpha = kappa`` and ``b = chi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "StableParams",
    "RngStream",
    "PathGrid",
    "positivity_parameter",
    "levy_exponent",
    "sample_stable",
    "simulate_path",
    "simulate_paths",
    "draw_increments",
]


@dataclass(frozen=True)
class StableParams:
    """Law of a strictly alpha-stable process with index in (1, 2]."""

    alpha: float
    kappa: float = 1.0
    chi: float = 0.0

    def __post_init__(self):
        if not (1.0 < self.alpha <= 2.0):
            raise DomainError(f"alpha must lie in (1, 2], got {self.alpha}")
        if not (self.kappa > 0.0 and math.isfinite(self.kappa)):
            raise DomainError(f"kappa must be a finite positive number, got {self.kappa}")
        if not (-1.0 <= self.chi <= 1.0):
            raise DomainError(f"chi must lie in [-1, 1], got {self.chi}")

    @property
    def rho(self) -> float:
        return positivity_parameter(self)

    @property
    def gamma(self) -> float:
        """Index of the inverse local time subordinator, (alpha - 1) / alpha."""
        return (self.alpha - 1.0) / self.alpha

    @property
    def is_gaussian(self) -> bool:
        return self.alpha == 2.0

    @property
    def spectrally_positive(self) -> bool:
        """True when the process has no negative jumps."""
        return self.alpha == 2.0 or self.chi == 1.0

    @property
    def scale(self) -> float:
        """S1 scale sigma with sigma**alpha = kappa."""
        return self.kappa ** (1.0 / self.alpha)

    def tan_term(self) -> float:
        # tan(pi) evaluates to -1.2e-16; the Gaussian branch must be exactly 0.
        if self.alpha == 2.0:
            return 0.0
        return math.tan(math.pi * self.alpha / 2.0)

    def mirrored(self) -> "StableParams":
        """Law of -Z."""
        return StableParams(self.alpha, self.kappa, -self.chi)


@dataclass(frozen=True)
class RngStream:
    """Reproducible uniform stream keyed by ``(seed, stream_id)``.

    Streams are derived with :class:`numpy.random.SeedSequence` spawn keys, so
    a path's draws depend only on its own key and never on how paths are
    distributed over workers.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not (0 <= int(value) < 2**64):
                raise DomainError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class PathGrid:
    """A path sampled exactly at times ``j * horizon / n_steps``."""

    params: StableParams
    horizon: float
    n_steps: int
    values: np.ndarray = field(repr=False)

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def negated(self) -> "PathGrid":
        return PathGrid(self.params.mirrored(), self.horizon, self.n_steps, -self.values)

    def subsample(self, factor: int) -> "PathGrid":
        """Same path observed on a grid ``factor`` times coarser."""
        if self.n_steps % factor:
            raise DomainError(f"n_steps={self.n_steps} is not divisible by {factor}")
        return PathGrid(self.params, self.horizon, self.n_steps // factor, self.values[::factor])


def positivity_parameter(params: StableParams) -> float:
    """rho = P[Z_t > 0] = 1/2 + arctan(chi tan(pi alpha/2)) / (pi alpha)."""
    if params.alpha == 2.0:
        return 0.5
    return 0.5 + math.atan(params.chi * params.tan_term()) / (math.pi * params.alpha)


def levy_exponent(params: StableParams, lam):
    """Characteristic exponent Psi(lam); accepts scalars or arrays."""
    lam = np.asarray(lam, dtype=float)
    modulus = params.kappa * np.abs(lam) ** params.alpha
    out = modulus * (1.0 - 1j * params.chi * np.sign(lam) * params.tan_term())
    return out[()] if out.ndim == 0 else out


def _standard_draws(params: StableParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """Unit-scale draws (kappa = 1) consuming the stream in a fixed order."""
    if params.alpha == 2.0:
        return math.sqrt(2.0) * rng.standard_normal(n)
    u = rng.random(n)
    w = rng.standard_exponential(n)
    return _cms_transform(params, u, w)


def _cms_transform(params: StableParams, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    a = params.alpha
    t = params.chi * params.tan_term()
    shift = math.atan(t) / a
    stretch = (1.0 + t * t) ** (1.0 / (2.0 * a))
    v = math.pi * (u - 0.5)
    av = a * (v + shift)
    return (
        stretch
        * np.sin(av)
        / np.cos(v) ** (1.0 / a)
        * (np.cos(v - av) / w) ** ((1.0 - a) / a)
    )


def sample_stable(params: StableParams, n: int, stream: RngStream) -> np.ndarray:
    """``n`` i.i.d. copies of Z_1."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return params.scale * _standard_draws(params, stream.generator(), n)


def simulate_path(params: StableParams, horizon: float, n_steps: int, stream: RngStream) -> PathGrid:
    """Exact-in-law path at grid times; increments are dt^(1/alpha) Z_1."""
    values = simulate_paths(params, horizon, n_steps, stream.seed, stream.stream_id, stream.stream_id + 1)
    return PathGrid(params, float(horizon), int(n_steps), values[0])


def simulate_paths(
    params: StableParams, horizon: float, n_steps: int, seed: int, start: int, stop: int
) -> np.ndarray:
    """Rows ``start..stop-1`` of the path ensemble keyed by ``seed``.

    Row ``i`` uses stream ``(seed, i)`` and is the same path as
    ``simulate_path(params, horizon, n_steps, RngStream(seed, i)).values``.
    """
    if not horizon > 0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    if n_steps < 1:
        raise DomainError(f"n_steps must be >= 1, got {n_steps}")
    dt = horizon / n_steps
    gens = [RngStream(seed, i).generator() for i in range(start, stop)]
    out = np.zeros((stop - start, n_steps + 1))
    out[:, 1:] = draw_increments(params, gens, n_steps, dt)
    np.cumsum(out[:, 1:], axis=1, out=out[:, 1:])
    return out


def draw_increments(params: StableParams, gens: list, n_steps: int, dt: float) -> np.ndarray:
    """Next ``n_steps`` increments from each generator, one row per generator.

    Calling this repeatedly on the same generators continues the same paths,
    which is how runs are extended past their horizon.
    """
    out = np.empty((len(gens), n_steps))
    if params.alpha == 2.0:
        for row, rng in enumerate(gens):
            out[row] = rng.standard_normal(n_steps)
        out *= math.sqrt(2.0) * params.scale * math.sqrt(dt)
        return out
    w = np.empty_like(out)
    for row, rng in enumerate(gens):
        out[row] = rng.random(n_steps)
        w[row] = rng.standard_exponential(n_steps)
    out = _cms_transform(params, out, w)
    out *= params.scale * dt ** (1.0 / params.alpha)
    return out
