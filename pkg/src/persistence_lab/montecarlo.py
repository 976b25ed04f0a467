"""Monte Carlo survival curves, power-law tail fits and the local-time pipeline.

Paths are processed in fixed-size chunks of consecutive path indices; path
``i`` always draws from stream ``(seed, i)``.  Per-path outcomes are gathered
in index order, so results do not depend on the number of worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError, NumericError
from .functionals import (
    FunctionalParams,
    cumulative,
    default_bandwidth,
    first_index_above,
    integrand,
    zero_visits,
)
from .parallel import chunk_size_for, map_chunks
from .stable import StableParams, simulate_paths

__all__ = [
    "MonteCarloConfig",
    "TailEstimate",
    "PassageSample",
    "ExcursionSample",
    "CharFn",
    "KappaXiEstimate",
    "MomentProbe",
    "run_passages",
    "run_excursions",
    "survival_curve",
    "estimate_survival",
    "fit_exponent",
    "theoretical_theta",
    "empirical_charfn",
    "estimate_kappa_xi",
    "estimate_zt_tail",
    "zt_tail_from_sample",
    "moment_probe",
    "log_grid",
    "kappa_xi_from_samples",
    "zt_cap",
    "zt_bound_holds",
    "zt_moment_probe",
    "estimate_lower_tail",
]

MAX_FAILED_FRACTION = 1e-3
MIN_SURVIVORS = 30
TRANSIENT_STEPS = 10


def log_grid(lo: float, hi: float, per_decade: int = 8) -> np.ndarray:
    n = max(2, int(round(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)


@dataclass(frozen=True)
class MonteCarloConfig:
    """One simulation campaign; ``fparams=None`` means first passage of Z itself."""

    params: StableParams
    fparams: FunctionalParams | None = None
    level: float = 1.0
    n_paths: int = 10_000
    n_steps: int = 4096
    horizon: float = 400.0
    seed: int = 0
    t_grid: tuple[float, ...] | None = None
    bandwidth: float | None = None
    threads: int | None = 1

    def __post_init__(self):
        if not self.level > 0:
            raise DomainError(f"level must be positive, got {self.level}")
        if self.n_paths < 100:
            raise DomainError(f"n_paths must be >= 100, got {self.n_paths}")
        if self.n_steps < 2:
            raise DomainError(f"n_steps must be >= 2, got {self.n_steps}")
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if self.fparams is not None:
            self.fparams.check(self.params.alpha)
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise DomainError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.t_grid is not None:
            grid = np.asarray(self.t_grid, dtype=float)
            if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
                raise DomainError("t_grid must be a strictly increasing sequence of positive times")
            if grid[-1] > self.horizon * (1 + 1e-12):
                raise DomainError(f"t_grid extends beyond the horizon {self.horizon}")
            object.__setattr__(self, "t_grid", tuple(float(t) for t in grid))

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def grid(self) -> np.ndarray:
        if self.t_grid is not None:
            return np.asarray(self.t_grid)
        return log_grid(self.dt, self.horizon)

    def resolved_bandwidth(self) -> float:
        if self.bandwidth is not None:
            return self.bandwidth
        return default_bandwidth(self.params, self.dt)

    def echo(self) -> dict:
        """JSON-ready description; the thread count is deliberately absent."""
        p = self.params
        out = {
            "alpha": p.alpha,
            "kappa": p.kappa,
            "chi": p.chi,
            "beta": None if self.fparams is None else self.fparams.beta,
            "pv_epsilon": None if self.fparams is None else self.fparams.pv_epsilon,
            "level": self.level,
            "n_paths": self.n_paths,
            "n_steps": self.n_steps,
            "horizon": self.horizon,
            "seed": self.seed,
            "bandwidth": self.bandwidth,
        }
        if self.t_grid is not None:
            out["t_grid"] = list(self.t_grid)
        return out


# ---------------------------------------------------------------- survival


@dataclass(frozen=True)
class TailEstimate:
    """Empirical survival curve P[T > t] with an optional power-law fit."""

    t_grid: np.ndarray
    survivors: np.ndarray
    n_paths: int
    min_fit_t: float = 0.0
    max_fit_t: float = math.inf
    theta_hat: float = math.nan
    theta_stderr: float = math.nan
    intercept: float = math.nan
    fit_window: tuple[int, int] | None = None
    window_rule: str = ""
    resolution_check: str | None = None
    coarse: "TailEstimate | None" = field(default=None, repr=False)

    @property
    def survival(self) -> np.ndarray:
        return self.survivors / self.n_paths

    @property
    def stderr(self) -> np.ndarray:
        p = self.survival
        return np.sqrt(p * (1.0 - p) / self.n_paths)

    @property
    def fitted(self) -> bool:
        return math.isfinite(self.theta_hat)

    def fit_summary(self) -> dict:
        i, j = self.fit_window if self.fit_window else (None, None)
        out = {
            "theta_hat": self.theta_hat,
            "theta_stderr": self.theta_stderr,
            "intercept": self.intercept,
            "fit_window": None if i is None else [int(i), int(j)],
            "fit_t_range": None if i is None else [float(self.t_grid[i]), float(self.t_grid[j])],
            "window_rule": self.window_rule,
            "resolution_check": self.resolution_check,
        }
        if self.coarse is not None and self.coarse.fitted:
            out["coarse_theta_hat"] = self.coarse.theta_hat
            out["coarse_theta_stderr"] = self.coarse.theta_stderr
        return out


def survival_curve(times: np.ndarray, t_grid: np.ndarray, n_paths: int | None = None, **kw) -> TailEstimate:
    """Counts of ``times > t`` on ``t_grid``; ``inf`` marks censored paths."""
    times = np.sort(np.asarray(times, dtype=float))
    t_grid = np.asarray(t_grid, dtype=float)
    n = times.size if n_paths is None else n_paths
    survivors = n - np.searchsorted(times, t_grid, side="right")
    return TailEstimate(t_grid, survivors.astype(np.int64), int(n), **kw)


@dataclass
class PassageSample:
    """Per-path first-passage outcomes, in path-index order."""

    dt: float
    times: np.ndarray
    coarse_times: np.ndarray
    z_at_passage: np.ndarray
    n_failed: int

    @property
    def n_valid(self) -> int:
        return int(np.sum(~np.isnan(self.times)))


def _series(values: np.ndarray, config: MonteCarloConfig, dt: float) -> np.ndarray:
    if config.fparams is None:
        return values
    eps = config.fparams.epsilon_for(config.params, dt)
    return cumulative(integrand(values[..., :-1], config.fparams.beta, eps) * dt)


def _passage_chunk(config: MonteCarloConfig, start: int, stop: int):
    dt = config.dt
    values = simulate_paths(config.params, config.horizon, config.n_steps, config.seed, start, stop)
    failed = ~np.all(np.isfinite(values), axis=1)
    idx = first_index_above(_series(values, config, dt), config.level)
    coarse = values[:, ::2]
    cidx = first_index_above(_series(coarse, config, 2 * dt), config.level)
    rows = np.arange(stop - start)
    times = np.where(idx >= 0, idx * dt, math.inf)
    ctimes = np.where(cidx >= 0, cidx * 2 * dt, math.inf)
    # For a functional, the step that carried A over the level used Z at its
    # left end, which is therefore the positive value Z held at the crossing.
    zidx = idx if config.fparams is None else idx - 1
    z = np.where(idx >= 0, values[rows, np.maximum(zidx, 0)], math.nan)
    times[failed] = math.nan
    ctimes[failed] = math.nan
    z[failed] = math.nan
    return times, ctimes, z, int(failed.sum())


def run_passages(config: MonteCarloConfig) -> PassageSample:
    """First grid passage above ``config.level`` at n_steps and n_steps / 2."""
    if config.n_steps % 2:
        raise DomainError("n_steps must be even for the two-resolution check")
    parts = map_chunks(
        lambda a, b: _passage_chunk(config, a, b),
        config.n_paths,
        chunk_size_for(config.n_steps),
        config.threads,
    )
    n_failed = sum(p[3] for p in parts)
    if n_failed > MAX_FAILED_FRACTION * config.n_paths:
        raise NumericError(
            f"{n_failed} of {config.n_paths} paths produced non-finite values",
            {"n_failed": n_failed},
        )
    return PassageSample(
        config.dt,
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
        n_failed,
    )


def _curves_from_sample(sample: PassageSample, t_grid: np.ndarray) -> TailEstimate:
    ok = ~np.isnan(sample.times)
    coarse = survival_curve(sample.coarse_times[ok], t_grid, min_fit_t=TRANSIENT_STEPS * 2 * sample.dt)
    return survival_curve(
        sample.times[ok], t_grid, min_fit_t=TRANSIENT_STEPS * sample.dt, coarse=coarse
    )


def estimate_survival(config: MonteCarloConfig, sample: PassageSample | None = None) -> TailEstimate:
    """Survival curve P[T > t] (unfitted) with its half-resolution twin attached."""
    if sample is None:
        sample = run_passages(config)
    return _curves_from_sample(sample, config.grid())


# --------------------------------------------------------------------- fit


def _wls(x, y, var):
    w = 1.0 / var
    X = np.column_stack([np.ones_like(x), x])
    xtwx = X.T @ (w[:, None] * X)
    coef = np.linalg.solve(xtwx, X.T @ (w * y))
    return coef, np.linalg.inv(xtwx), X, w


def _nested_cov(p: np.ndarray, n: int) -> np.ndarray:
    """Delta-method covariance of log survival at increasing times.

    cov(log p_i, log p_j) = (1 - p_i) / (n p_i) for t_i <= t_j, because the
    events {T > t} are nested.
    """
    v = (1.0 - p) / (n * p)
    k = np.arange(p.size)
    return v[np.minimum.outer(k, k)]


def fit_exponent(estimate: TailEstimate) -> TailEstimate:
    """Weighted log-log fit of the survival curve over a stability window.

    Points below ``min_fit_t`` (transient), above ``max_fit_t``, or with fewer
    than 30 survivors are excluded.  Among the remaining contiguous points the
    widest window is chosen whose consecutive two-point slopes all lie within
    two pooled standard errors of the window's fitted slope; ties go to the
    latest window.  If no window qualifies, all usable points are used and
    ``window_rule`` says so.  The slope's standard error is a sandwich
    estimate under the nested-event covariance.
    """
    t = estimate.t_grid
    surv = estimate.survivors
    n = estimate.n_paths
    usable = (
        (t > 0)
        & (t >= estimate.min_fit_t)
        & (t <= estimate.max_fit_t)
        & (surv >= MIN_SURVIVORS)
        & (surv < n)
    )
    run = _longest_run(usable)
    if run is None or run[1] - run[0] + 1 < 3:
        raise InsufficientDataError("fewer than 3 usable survival points", partial=estimate)
    lo, hi = run
    x = np.log(t[lo : hi + 1])
    p = surv[lo : hi + 1] / n
    y = np.log(p)
    var = (1.0 - p) / (n * p)
    m = x.size

    dx = np.diff(x)
    local = np.diff(y) / dx
    q = p[1:] / p[:-1]
    n_prev = surv[lo:hi].astype(float)
    local_se = np.sqrt((1.0 - q + 1.0 / n_prev) / (q * n_prev)) / dx

    chosen, rule = None, "fallback"
    for width in range(m, 2, -1):
        for a in range(m - width, -1, -1):
            b = a + width
            coef, cov, _, _ = _wls(x[a:b], y[a:b], var[a:b])
            slope_se = math.sqrt(cov[1, 1])
            dev = np.abs(local[a : b - 1] - coef[1])
            if np.all(dev <= 2.0 * np.sqrt(local_se[a : b - 1] ** 2 + slope_se**2)):
                chosen, rule = (a, b), "stable"
                break
        if chosen:
            break
    if chosen is None:
        chosen = (0, m)
    return _fit_on(estimate, lo + chosen[0], lo + chosen[1] - 1, rule)


def _fit_on(estimate: TailEstimate, i: int, j: int, rule: str) -> TailEstimate:
    t = estimate.t_grid[i : j + 1]
    p = estimate.survivors[i : j + 1] / estimate.n_paths
    if np.any(p <= 0) or np.any(p >= 1):
        raise InsufficientDataError("fit window contains degenerate survival values", partial=estimate)
    x, y = np.log(t), np.log(p)
    var = (1.0 - p) / (estimate.n_paths * p)
    coef, bread, X, w = _wls(x, y, var)
    meat = (X * w[:, None]).T @ _nested_cov(p, estimate.n_paths) @ (X * w[:, None])
    cov = bread @ meat @ bread
    fitted = replace(
        estimate,
        theta_hat=float(-coef[1]),
        theta_stderr=float(math.sqrt(max(cov[1, 1], 0.0))),
        intercept=float(coef[0]),
        fit_window=(int(i), int(j)),
        window_rule=rule,
    )
    coarse = estimate.coarse
    if coarse is not None:
        try:
            coarse = _fit_on(replace(coarse, coarse=None), i, j, rule)
        except InsufficientDataError:
            coarse = None
        if coarse is None:
            fitted = replace(fitted, resolution_check="failed", coarse=estimate.coarse)
        else:
            agree = abs(coarse.theta_hat - fitted.theta_hat) <= fitted.theta_stderr + coarse.theta_stderr
            fitted = replace(fitted, coarse=coarse, resolution_check="passed" if agree else "failed")
    return fitted


def _longest_run(mask: np.ndarray):
    best, start = None, None
    for k, flag in enumerate(list(mask) + [False]):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            if best is None or k - start > best[1] - best[0] + 1:
                best = (start, k - 1)
            start = None
    return best


def theoretical_theta(params: StableParams, fparams: FunctionalParams | None, kind: str) -> float | None:
    """Known persistence exponent, or ``None`` where it is an open problem."""
    if kind == "process":
        return params.rho
    if kind != "functional":
        raise DomainError(f"kind must be 'process' or 'functional', got {kind!r}")
    if fparams is not None:
        fparams.check(params.alpha)
    if params.spectrally_positive:
        return (params.alpha - 1.0) / (2.0 * params.alpha)
    return None


# ------------------------------------------------------- characteristic fns


@dataclass(frozen=True)
class CharFn:
    lam: np.ndarray
    values: np.ndarray
    stderr_re: np.ndarray
    stderr_im: np.ndarray


def empirical_charfn(samples: np.ndarray, lambda_grid: Sequence[float]) -> CharFn:
    """Sample mean of exp(i lam X) with jackknife standard errors."""
    x = np.asarray(samples, dtype=float)
    if x.size < 1000:
        raise InsufficientDataError(f"need at least 1000 samples, got {x.size}")
    lam = np.asarray(lambda_grid, dtype=float)
    n = x.size
    values, se_re, se_im = [], [], []
    for l in lam:
        e = np.exp(1j * l * x)
        loo = (e.sum() - e) / (n - 1)
        values.append(e.mean())
        se_re.append(math.sqrt((n - 1) / n * np.sum((loo.real - loo.real.mean()) ** 2)))
        se_im.append(math.sqrt((n - 1) / n * np.sum((loo.imag - loo.imag.mean()) ** 2)))
    return CharFn(lam, np.array(values), np.array(se_re), np.array(se_im))


# ------------------------------------------------------- local-time pipeline


@dataclass
class ExcursionSample:
    """Per-path local-time outcomes, in path-index order.

    Times are grid times; ``inf`` marks an event not reached by the end of
    the (possibly extended) simulation.  ``theta_end`` is the first zero visit
    at which A >= level (tau at Theta) and ``theta_start`` the visit before it
    (tau at Theta-).  ``mixed_excursions`` / ``signed_excursions`` count
    excursions, observed before tau, that carried both signs of Z.
    """

    dt: float
    horizon: float
    max_horizon: float
    xi_level: float
    level: float
    tau: np.ndarray
    xi: np.ndarray
    xi_plus: np.ndarray
    xi_minus: np.ndarray
    passage: np.ndarray
    theta_start: np.ndarray
    theta_end: np.ndarray
    n_failed: int
    mixed_excursions: int = 0
    signed_excursions: int = 0

    @property
    def n_paths(self) -> int:
        return int(self.tau.size)

    @property
    def xi_censored_fraction(self) -> float:
        return float(np.mean(~np.isfinite(self.tau)))

    @property
    def theta_censored_fraction(self) -> float:
        return float(np.mean(~np.isfinite(self.theta_end)))

    def xi_values(self) -> np.ndarray:
        return self.xi[np.isfinite(self.tau)]


def _first_new(found: np.ndarray, hit_idx: np.ndarray) -> np.ndarray:
    return (found < 0) & (hit_idx >= 0)


def _excursion_chunk(config: MonteCarloConfig, opts: dict, start: int, stop: int):
    from .stable import RngStream, draw_increments

    p = config.params
    n, dt = config.n_steps, config.dt
    h = config.resolved_bandwidth()
    jump_cut = opts["jump_cut"]
    beta = config.fparams.beta
    eps = config.fparams.epsilon_for(p, dt)
    lt_unit = dt / (2.0 * h)
    rows = stop - start
    gens = [RngStream(config.seed, i).generator() for i in range(start, stop)]

    z0 = np.zeros(rows)
    a0, ap0, am0 = np.zeros(rows), np.zeros(rows), np.zeros(rows)
    lc0 = np.zeros(rows, dtype=np.int64)
    last_visit = np.zeros(rows, dtype=np.int64)
    tau = np.full(rows, -1, dtype=np.int64)
    T = np.full(rows, -1, dtype=np.int64)
    th_end = np.full(rows, -1, dtype=np.int64)
    th_start = np.full(rows, -1, dtype=np.int64)
    xi, xp, xm = (np.full(rows, math.nan) for _ in range(3))
    failed = np.zeros(rows, dtype=bool)
    mixed = signed = 0
    active = np.arange(rows)

    for block in range(opts["max_blocks"]):
        if active.size == 0:
            break
        off = block * n
        z = np.empty((active.size, n + 1))
        z[:, 0] = z0[active]
        z[:, 1:] = draw_increments(p, [gens[r] for r in active], n, dt)
        np.cumsum(z, axis=1, out=z)
        bad = ~np.all(np.isfinite(z), axis=1)
        if bad.any():
            failed[active[bad]] = True
            z[bad] = 0.0

        left = z[:, :-1]
        g = integrand(left, beta, eps, opts["pos_weight"]) * dt
        A = a0[active, None] + cumulative(g)
        AP = ap0[active, None] + cumulative(np.where(left > 0, g, 0.0))
        AM = am0[active, None] - cumulative(np.where(left < 0, g, 0.0))
        LC = lc0[active, None] + cumulative(np.abs(left) < h).astype(np.int64)
        del g, left

        r = np.arange(active.size)
        j = first_index_above(LC * lt_unit, opts["xi_level"])
        new = _first_new(tau[active], j)
        jj = np.maximum(j, 0)
        xi[active[new]] = A[r, jj][new]
        xp[active[new]] = AP[r, jj][new]
        xm[active[new]] = AM[r, jj][new]
        tau[active[new]] = off + j[new]

        j = first_index_above(A, config.level)
        new = _first_new(T[active], j)
        T[active[new]] = off + j[new]

        visits = zero_visits(z, h, jump_cut)
        visits[:, 0] = block == 0  # column 0 was handled by the previous block
        cols = np.arange(n + 1)
        lastv = np.maximum.accumulate(np.where(visits, cols, -1), axis=1)
        j = first_index_above(np.where(visits, A, -np.inf), config.level, strict=False)
        new = _first_new(th_end[active], j)
        if new.any():
            jn = j[new]
            prev = lastv[r[new], np.maximum(jn - 1, 0)]
            prev = np.where((jn >= 1) & (prev >= 0), off + prev, last_visit[active[new]])
            th_start[active[new]] = prev
            th_end[active[new]] = off + jn
        has = lastv[:, -1] >= 0
        last_visit[active[has]] = off + lastv[has, -1]

        if block == 0 and opts["mixing"]:
            m, s = _mixing_counts(z, visits, np.where(tau[active] >= 0, tau[active], n + 1))
            mixed += m
            signed += s

        z0[active], a0[active], ap0[active], am0[active] = z[:, -1], A[:, -1], AP[:, -1], AM[:, -1]
        lc0[active] = LC[:, -1]
        del z, A, AP, AM, LC, visits, lastv

        done = tau[active] >= 0
        if opts["until"] == "theta":
            done &= th_end[active] >= 0
        done |= failed[active]
        active = active[~done]

    def to_time(idx):
        return np.where(idx >= 0, idx * dt, math.inf)

    out = [to_time(tau), xi, xp, xm, to_time(T), to_time(th_start), to_time(th_end)]
    for arr in out:
        arr[failed] = math.nan
    return out, int(failed.sum()), mixed, signed


def _mixing_counts(z: np.ndarray, visits: np.ndarray, limit: np.ndarray) -> tuple[int, int]:
    """Count excursions before ``limit`` with nonzero values of both signs."""
    n1 = z.shape[1]
    ids = np.cumsum(visits, axis=1) + (np.arange(z.shape[0]) * (n1 + 1))[:, None]
    keep = (np.arange(n1)[None, :] < limit[:, None]) & ~visits
    ids = ids[keep]
    vals = z[keep]
    size = int(z.shape[0] * (n1 + 1) + 1)
    pos = np.bincount(ids, weights=vals > 0, minlength=size)
    neg = np.bincount(ids, weights=vals < 0, minlength=size)
    signed = int(np.sum((pos > 0) | (neg > 0)))
    return int(np.sum((pos > 0) & (neg > 0))), signed


def run_excursions(
    config: MonteCarloConfig,
    xi_level: float = 1.0,
    until: str = "xi",
    max_blocks: int = 1,
    jump_cut: float | None = None,
    pos_weight: float = 1.0,
    mixing: bool = False,
) -> ExcursionSample:
    """Local-time bookkeeping of the functional along each path.

    Each path is simulated in blocks of ``n_steps`` steps of size ``dt``.
    A path keeps being extended, up to ``max_blocks`` blocks, until its
    inverse local time at ``xi_level`` is reached (``until="xi"``), or until
    Theta is also observed (``until="theta"``).  Extension reuses the path's
    own stream, so the first block is the path ``simulate_paths`` returns.

    ``jump_cut`` (default 4 bandwidths) is the largest step across 0 still
    counted as a visit; ``pos_weight`` rescales the integrand on Z > 0 and
    exists for negative controls.
    """
    if config.fparams is None:
        raise DomainError("the local-time pipeline needs fparams")
    if until not in ("xi", "theta"):
        raise DomainError(f"until must be 'xi' or 'theta', got {until!r}")
    if max_blocks < 1:
        raise DomainError(f"max_blocks must be >= 1, got {max_blocks}")
    if not xi_level > 0:
        raise DomainError(f"xi_level must be positive, got {xi_level}")
    h = config.resolved_bandwidth()
    opts = {
        "jump_cut": 4.0 * h if jump_cut is None else float(jump_cut),
        "pos_weight": float(pos_weight),
        "max_blocks": int(max_blocks),
        "until": until,
        "mixing": mixing,
        "xi_level": float(xi_level),
    }
    parts = map_chunks(
        lambda a, b: _excursion_chunk(config, opts, a, b),
        config.n_paths,
        max(8, chunk_size_for(config.n_steps) // 2),
        config.threads,
    )
    n_failed = sum(part[1] for part in parts)
    if n_failed > MAX_FAILED_FRACTION * config.n_paths:
        raise NumericError(
            f"{n_failed} of {config.n_paths} paths produced non-finite values", {"n_failed": n_failed}
        )
    cols = [np.concatenate([part[0][k] for part in parts]) for k in range(7)]
    return ExcursionSample(
        config.dt,
        config.horizon,
        config.horizon * max_blocks,
        float(xi_level),
        config.level,
        *cols,
        n_failed=n_failed,
        mixed_excursions=sum(part[2] for part in parts),
        signed_excursions=sum(part[3] for part in parts),
    )


# ---------------------------------------------------------------- kappa_xi


@dataclass(frozen=True)
class KappaXiEstimate:
    """Empirical scale of xi_1 from -log|phi(lam)| = kappa_xi |lam|^delta."""

    kappa_xi: float
    stderr: float
    delta_hat: float
    delta_stderr: float
    delta: float
    lam: np.ndarray
    n_samples: int
    censored_fraction: float
    validity: str = "statistical"


def _scale_fit(x: np.ndarray, lam: np.ndarray, delta: float) -> tuple[float, float]:
    mod = np.abs(np.exp(1j * np.outer(lam, x)).mean(axis=1))
    y = -np.log(np.clip(mod, 1e-300, None))
    kappa = float(np.mean(y / lam**delta))
    slope = float(np.polyfit(np.log(lam), np.log(np.clip(y, 1e-300, None)), 1)[0])
    return kappa, slope


def kappa_xi_from_samples(
    samples: np.ndarray, delta: float, censored_fraction: float = 0.0, n_groups: int = 20
) -> KappaXiEstimate:
    """Fit kappa_xi (delta fixed) and a free exponent, with grouped-jackknife errors.

    The lambda grid spans |phi| from about 0.9 down to 0.1 under the law
    suggested by the sample's median absolute value.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 1000:
        raise InsufficientDataError(f"need at least 1000 samples, got {x.size}")
    med = float(np.median(np.abs(x)))
    if not med > 0:
        raise InsufficientDataError("xi sample is degenerate at 0")
    lam = np.geomspace(0.1, 2.0, 8) / med
    k_all, d_all = _scale_fit(x, lam, delta)
    groups = np.array_split(np.arange(x.size), n_groups)
    ks, ds = [], []
    for g in groups:
        mask = np.ones(x.size, dtype=bool)
        mask[g] = False
        k, d = _scale_fit(x[mask], lam, delta)
        ks.append(k)
        ds.append(d)
    factor = (n_groups - 1) / n_groups
    k_se = math.sqrt(factor * np.sum((np.array(ks) - np.mean(ks)) ** 2))
    d_se = math.sqrt(factor * np.sum((np.array(ds) - np.mean(ds)) ** 2))
    return KappaXiEstimate(k_all, k_se, d_all, d_se, delta, lam, int(x.size), censored_fraction)


def estimate_kappa_xi(config: MonteCarloConfig, max_blocks: int = 64, sample: ExcursionSample | None = None) -> KappaXiEstimate:
    """Statistical value of kappa_xi for parameters where no closed form exists."""
    p = config.params
    if not (p.chi in (-1.0, 0.0, 1.0) or p.is_gaussian):
        raise DomainError("kappa_xi estimation needs a spectrally one-sided or symmetric law")
    if sample is None:
        sample = run_excursions(config, xi_level=1.0, max_blocks=max_blocks)
    cens = sample.xi_censored_fraction
    if cens > 0.2:
        raise InsufficientDataError(f"{cens:.1%} of tau_1 values are censored", partial=sample)
    return kappa_xi_from_samples(sample.xi_values(), config.fparams.delta(p.alpha), cens)


# --------------------------------------------------------------- Z_T tail


def zt_cap(config: MonteCarloConfig) -> float:
    """Largest u at which crossings before the horizon still sample P[Z_T > u]."""
    return (config.horizon * config.params.kappa) ** (1.0 / config.params.alpha) / 4.0


def zt_tail_from_sample(sample: PassageSample, config: MonteCarloConfig) -> TailEstimate:
    """Fitted tail of Z read at the upper end of each crossing bracket."""
    z = sample.z_at_passage[np.isfinite(sample.times)]
    if z.size < 1000:
        raise InsufficientDataError(f"only {z.size} crossed paths, need 1000")
    z = np.sort(z)
    lo = max(float(np.quantile(z, 0.25)), 1e-12)
    cap = zt_cap(config)
    if not cap > lo:
        raise InsufficientDataError("u cap falls below the bulk of Z_T; lengthen the horizon")
    grid = log_grid(lo, cap, per_decade=8)
    est = survival_curve(z, grid, z.size, min_fit_t=float(np.median(z)))
    return fit_exponent(est)


def estimate_zt_tail(config: MonteCarloConfig, sample: PassageSample | None = None) -> TailEstimate:
    p = config.params
    if not p.spectrally_positive:
        raise DomainError("the Z_T tail check needs a spectrally positive law")
    if config.fparams is None or config.fparams.beta < 0:
        raise DomainError("the Z_T tail check needs a functional with beta >= 0")
    if sample is None:
        sample = run_passages(config)
    return zt_tail_from_sample(sample, config)


def zt_bound_holds(estimate: TailEstimate, params: StableParams, tol: float = 0.05) -> bool:
    """Fitted exponent is no smaller than (alpha-1)/2 - tol."""
    return estimate.theta_hat >= (params.alpha - 1.0) / 2.0 - tol


# ------------------------------------------------------------ moment probe


@dataclass(frozen=True)
class MomentProbe:
    """Growth of E[min(X, M)^k] along a log grid of truncation levels M.

    ``slope`` is the log-log slope of the increments of the truncated moment;
    a slope above ``-tol`` means the moment keeps growing (diverges).
    """

    k: float
    truncations: np.ndarray
    moments: np.ndarray
    slope: float
    stderr: float
    tol: float
    verdict: str  # diverges | stabilizes | inconclusive


def _growth_slope(x: np.ndarray, k: float, m_grid: np.ndarray) -> tuple[np.ndarray, float]:
    mom = np.array([np.mean(np.minimum(x, m) ** k) for m in m_grid])
    inc = np.diff(mom)
    if np.any(inc <= 0):
        return mom, math.nan
    slope = np.polyfit(np.log(m_grid[1:]), np.log(inc), 1)[0]
    return mom, float(slope)


def moment_probe(
    samples: np.ndarray,
    k: float,
    m_lo: float,
    m_hi: float,
    tol: float = 0.05,
    n_groups: int = 20,
) -> MomentProbe:
    """Does E[X^k] diverge?  Decided from how truncated moments grow.

    ``samples`` may hold ``inf`` for censored values as long as ``m_hi`` does
    not exceed the censoring time: min(X, M) is then still exact.
    """
    if not 0 < m_lo < m_hi:
        raise DomainError("need 0 < m_lo < m_hi")
    x = np.asarray(samples, dtype=float)
    x = x[~np.isnan(x)]
    m_grid = log_grid(m_lo, m_hi, per_decade=6)
    mom, slope = _growth_slope(x, k, m_grid)
    groups = np.array_split(np.arange(x.size), n_groups)
    reps = []
    for g in groups:
        mask = np.ones(x.size, dtype=bool)
        mask[g] = False
        reps.append(_growth_slope(x[mask], k, m_grid)[1])
    reps = np.array(reps)
    if not math.isfinite(slope) or np.any(~np.isfinite(reps)):
        return MomentProbe(k, m_grid, mom, math.nan, math.nan, tol, "inconclusive")
    se = math.sqrt((n_groups - 1) / n_groups * np.sum((reps - reps.mean()) ** 2))
    if slope - 2 * se > -tol:
        verdict = "diverges"
    elif slope + 2 * se < -tol:
        verdict = "stabilizes"
    else:
        verdict = "inconclusive"
    return MomentProbe(k, m_grid, mom, slope, se, tol, verdict)


def zt_moment_probe(config: MonteCarloConfig, k: float, sample: PassageSample | None = None, span: float = 10.0) -> MomentProbe:
    """Moment probe of Z_T over truncations [cap / span, cap].

    Paths that never cross count as +inf, which is exact for min(Z_T, M) up
    to the cap.  The run needs a long horizon so the window reaches the
    power-law regime (local exponents settle a decade below the cap).
    """
    if config.fparams is None:
        raise DomainError("the Z_T moment probe needs a functional (beta)")
    if sample is None:
        sample = run_passages(config)
    z = np.where(np.isfinite(sample.times), sample.z_at_passage, math.inf)
    cap = zt_cap(config)
    return moment_probe(z, k, cap / span, cap)


# -------------------------------------------------------------- lower tail


def _sup_chunk(config: MonteCarloConfig, start: int, stop: int) -> np.ndarray:
    values = simulate_paths(config.params, config.horizon, config.n_steps, config.seed, start, stop)
    return _series(values, config, config.dt).max(axis=-1)


def estimate_lower_tail(config: MonteCarloConfig, eps_min: float = 1e-4) -> TailEstimate:
    """P[sup_{[0, horizon]} A < eps] as a fitted survival curve in x = 1/eps.

    ``theta_hat`` estimates the lower-tail exponent.  Only the small-ball
    side matters, so the curve runs from eps = 1 down to ``eps_min``.
    """
    if config.fparams is None:
        raise DomainError("the lower-tail probe needs a functional (beta)")
    sups = np.concatenate(
        map_chunks(lambda a, b: _sup_chunk(config, a, b), config.n_paths, chunk_size_for(config.n_steps), config.threads)
    )
    inv = np.full(sups.shape, math.inf)
    pos = sups > 0
    inv[pos] = 1.0 / sups[pos]
    grid = log_grid(1.0, 1.0 / eps_min)
    return fit_exponent(survival_curve(inv, grid, config.n_paths))
