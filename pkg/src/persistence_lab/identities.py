"""Statistical checks of distributional identities and pathwise inequalities.

Every check returns an :class:`IdentityReport`.  Checks that combine several
criteria report a normalized statistic (each criterion divided by its own
threshold, then the maximum) against a threshold of 1; the raw components are
kept in ``details``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import DomainError
from .functionals import FunctionalParams, integrand
from .montecarlo import (
    MonteCarloConfig,
    empirical_charfn,
    fit_exponent,
    run_excursions,
    survival_curve,
)
from .parallel import chunk_size_for, map_chunks
from .specfun import theorem_a_constant
from .stable import RngStream, StableParams, draw_increments, sample_stable

__all__ = [
    "IdentityReport",
    "ks_critical_value",
    "ks_two_sample",
    "check_symmetry_lemma",
    "check_bingham_supremum",
    "check_fgb",
    "fgb_config",
    "check_kp_inequality",
    "check_positivity_a1",
    "check_xi_split_symmetry",
    "check_tauberian_tail",
    "CHECKS",
]

KS_LEVEL = 0.01
MAX_CENSORED = 0.2


@dataclass(frozen=True)
class IdentityReport:
    name: str
    statistic: float
    threshold: float
    verdict: str  # pass | fail | inconclusive
    n_samples: int
    config: dict
    exploratory: bool = False
    details: dict = field(default_factory=dict)

    @classmethod
    def judge(cls, name, statistic, threshold, n_samples, config, **kw) -> "IdentityReport":
        verdict = "pass" if statistic <= threshold else "fail"
        return cls(name, float(statistic), float(threshold), verdict, int(n_samples), config, **kw)

    @classmethod
    def inconclusive(cls, name, reason, n_samples, config, **kw) -> "IdentityReport":
        details = dict(kw.pop("details", {}), reason=reason)
        return cls(name, math.nan, math.nan, "inconclusive", int(n_samples), config, details=details, **kw)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ----------------------------------------------------------------------- KS


def _exact_tail(n1: int, n2: int, h: int) -> float | None:
    try:
        from scipy.stats._stats_py import _attempt_exact_2kssamp
    except ImportError:  # pragma: no cover - depends on scipy internals
        return None
    g = math.gcd(n1, n2)
    lcm = (n1 // g) * n2
    ok, _, prob = _attempt_exact_2kssamp(n1, n2, g, h / lcm, "two-sided")
    return float(prob) if ok and math.isfinite(prob) else None


def ks_critical_value(n1: int, n2: int, level: float = KS_LEVEL) -> float:
    """Smallest attainable D with P[D_{n1,n2} >= D] <= level under H0.

    Uses the exact two-sample null distribution; falls back to the
    asymptotic Kolmogorov quantile if scipy cannot evaluate it.
    """
    g = math.gcd(n1, n2)
    lcm = (n1 // g) * n2
    lo, hi = 1, lcm
    if _exact_tail(n1, n2, hi) is None:
        ne = n1 * n2 / (n1 + n2)
        return float(stats.kstwobign.isf(level) / math.sqrt(ne))
    while lo < hi:
        mid = (lo + hi) // 2
        if _exact_tail(n1, n2, mid) <= level:
            hi = mid
        else:
            lo = mid + 1
    return lo / lcm


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """(statistic, exact 1% critical value)."""
    d = float(stats.ks_2samp(a, b, method="asymp").statistic)
    return d, ks_critical_value(len(a), len(b))


def _halves(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint halves so that the two KS samples are independent."""
    m = x.size // 2
    return x[:m], x[m : 2 * m]


# ------------------------------------------------------------------ helpers


def _echo(config: MonteCarloConfig, **extra) -> dict:
    out = config.echo()
    out.update(extra)
    return out


def _need_fparams(config: MonteCarloConfig) -> FunctionalParams:
    if config.fparams is None:
        raise DomainError("this check needs fparams (beta)")
    return config.fparams


# --------------------------------------------------------------- symmetry


def check_symmetry_lemma(
    config: MonteCarloConfig, max_blocks: int = 1, shift: float = 0.0
) -> IdentityReport:
    """(tau_1, xi_1) and (tau_1, -xi_1) share a law.

    Marginal: exact two-sample KS between xi_1 on one half of the paths and
    -xi_1 on the other.  Joint: the bounded odd probe
    E[u(tau_1) sgn(xi_1) min(|xi_1|, 1)], u(t) = t / (t + median tau_1),
    must be within 3 jackknife stderr of 0.  Paths whose tau_1 lies beyond
    the simulated time are dropped; conditioning on tau_1 keeps the symmetry.
    ``shift`` is added to xi_1 for negative controls.
    """
    _need_fparams(config)
    name = "symmetry_lemma"
    echo = _echo(config, max_blocks=max_blocks, shift=shift)
    sample = run_excursions(config, xi_level=1.0, max_blocks=max_blocks)
    cens = sample.xi_censored_fraction
    ok = np.isfinite(sample.tau)
    tau, xi = sample.tau[ok], sample.xi[ok] + shift
    if cens > MAX_CENSORED:
        return IdentityReport.inconclusive(name, f"{cens:.1%} of tau_1 censored", xi.size, echo)
    a, b = _halves(xi)
    d, crit = ks_two_sample(a, -b)
    u = tau / (tau + np.median(tau))
    probe = u * np.sign(xi) * np.minimum(np.abs(xi), 1.0)
    mean = float(probe.mean())
    se = float(probe.std(ddof=1) / math.sqrt(probe.size))  # jackknife se of a mean
    stat = max(d / crit, abs(mean) / (3.0 * se))
    details = {"ks": d, "ks_critical": crit, "probe": mean, "probe_stderr": se, "censored_fraction": cens}
    return IdentityReport.judge(name, stat, 1.0, xi.size, echo, details=details)


# ---------------------------------------------------------------- Bingham


def _bingham_chunk(params, n_steps, seed, x_grid, exact_bridge, start, stop):
    dt = 1.0 / n_steps
    gens = [RngStream(seed, i).generator() for i in range(start, stop)]
    z = np.zeros((stop - start, n_steps + 1))
    z[:, 1:] = draw_increments(params, gens, n_steps, dt)
    np.cumsum(z, axis=1, out=z)
    if exact_bridge:
        # Maximum of the Brownian bridge across each step, sampled exactly.
        var = 2.0 * params.kappa * dt
        u = np.stack([g.random(n_steps) for g in gens])
        a, b = z[:, :-1], z[:, 1:]
        peak = 0.5 * (a + b + np.sqrt((b - a) ** 2 - 2.0 * var * np.log(u)))
        sup = peak.max(axis=1)
        return (sup[:, None] >= x_grid[None, :]).sum(axis=0), None
    fine = z.max(axis=1)
    coarse = z[:, ::4].max(axis=1)
    return (fine[:, None] >= x_grid).sum(axis=0), (coarse[:, None] >= x_grid).sum(axis=0), fine, coarse


def check_bingham_supremum(
    params: StableParams,
    n_increments: int = 1_000_000,
    n_paths: int = 100_000,
    n_steps: int | None = None,
    seed: int = 0,
    x_grid=None,
    threads: int | None = 1,
) -> IdentityReport:
    """P[S_1 >= x] = alpha P[Z_1 >= x] for x > 0, S_1 the supremum on [0, 1].

    At alpha = 2 (default 64 steps) each path's supremum is sampled exactly from the Brownian
    bridge maxima between grid points.  For spectrally negative laws the grid
    supremum converges at rate n^(-1/alpha) (default 1024 steps); the estimate is Richardson
    extrapolated from the fine grid and a 4x coarser subgrid of the same path,
    with the stderr taken from the per-path combined indicator.
    Statistic: max over x of |deviation| / pooled stderr, threshold 3.
    """
    if not (params.is_gaussian or params.chi == -1.0):
        raise DomainError("the supremum identity needs alpha = 2 or chi = -1")
    a = params.alpha
    if n_steps is None:
        n_steps = 64 if params.is_gaussian else 1024
    if x_grid is None:
        x_grid = (0.5, 1.0, 2.0) if params.is_gaussian else (0.25, 0.5, 1.0, 2.0)
    x_grid = np.asarray(x_grid, dtype=float)
    if np.any(x_grid <= 0):
        raise DomainError("x_grid must be positive")
    echo = {
        "alpha": a, "kappa": params.kappa, "chi": params.chi, "n_increments": n_increments,
        "n_paths": n_paths, "n_steps": n_steps, "seed": seed, "x_grid": list(x_grid),
    }
    # Single increments use streams offset past the path streams.
    z1 = sample_stable(params, n_increments, RngStream(seed, 2**63))
    pz = (z1[:, None] >= x_grid).mean(axis=0)
    var_z = a * a * pz * (1 - pz) / n_increments

    parts = map_chunks(
        lambda s, e: _bingham_chunk(params, n_steps, seed, x_grid, params.is_gaussian, s, e),
        n_paths,
        chunk_size_for(n_steps),
        threads,
    )
    if params.is_gaussian:
        ps = sum(p[0] for p in parts) / n_paths
        var_s = ps * (1 - ps) / n_paths
    else:
        r = 4.0 ** (-1.0 / a)
        fine = np.concatenate([p[2] for p in parts])
        coarse = np.concatenate([p[3] for p in parts])
        y = ((fine[:, None] >= x_grid) - r * (coarse[:, None] >= x_grid)) / (1.0 - r)
        ps = y.mean(axis=0)
        var_s = y.var(axis=0, ddof=1) / n_paths
    dev = ps - a * pz
    se = np.sqrt(var_s + var_z)
    z_scores = np.abs(dev) / se
    details = {
        "x": list(x_grid), "p_sup": list(ps), "alpha_p_z": list(a * pz), "deviation": list(dev),
        "pooled_stderr": list(se), "total_mass_alpha_rho": a * params.rho,
    }
    return IdentityReport.judge("bingham_supremum", float(z_scores.max()), 3.0, n_paths, echo, details=details)


# -------------------------------------------------------------------- FGB


FGB_LAMBDAS = (0.25, 0.5, 1.0, 2.0)
# Horizon at kappa = 1 that keeps censored tau_1 to a few percent within
# FGB_BLOCKS horizons; tau_1 scales like kappa^(1/(alpha-1)).
FGB_REF_HORIZON = {True: 32.0, False: 256.0}
FGB_BLOCKS = 128
# PV radius as a fraction of the grid scale (dt kappa)^(1/alpha).
FGB_EPS_FACTOR = 0.5


def fgb_config(
    params: StableParams, n_paths: int, n_steps: int = 16384, seed: int = 0, threads: int | None = 1, horizon: float | None = None
) -> MonteCarloConfig:
    """Default beta = -1 run for :func:`check_fgb`."""
    if horizon is None:
        horizon = FGB_REF_HORIZON[params.is_gaussian] * params.kappa ** (1.0 / (params.alpha - 1.0))
    eps = FGB_EPS_FACTOR * (horizon / n_steps * params.kappa) ** (1.0 / params.alpha)
    return MonteCarloConfig(
        params, FunctionalParams(-1.0, eps), n_paths=n_paths, n_steps=n_steps, horizon=horizon, seed=seed, threads=threads
    )



def check_fgb(
    config: MonteCarloConfig, threshold: float | None = None, max_blocks: int = FGB_BLOCKS, lambdas=FGB_LAMBDAS
) -> IdentityReport:
    """E[exp(i lam xi_1)] = exp(-pi |lam|) for beta = -1.

    Statistic: max |Re phi_hat - exp(-pi|lam|)| over ``lambdas`` (threshold
    0.05 at alpha = 2, 0.08 otherwise), combined with the requirement that
    imaginary parts lie within 3 stderr of 0.
    """
    fp = _need_fparams(config)
    if fp.beta != -1.0:
        raise DomainError("the FGB identity needs beta = -1")
    if threshold is None:
        threshold = 0.05 if config.params.is_gaussian else 0.08
    name = "fgb"
    echo = _echo(config, max_blocks=max_blocks, threshold=threshold)
    sample = run_excursions(config, xi_level=1.0, max_blocks=max_blocks)
    cens = sample.xi_censored_fraction
    xi = sample.xi_values()
    if cens > MAX_CENSORED:
        return IdentityReport.inconclusive(name, f"{cens:.1%} of tau_1 censored", xi.size, echo)
    cf = empirical_charfn(xi, lambdas)
    target = np.exp(-math.pi * np.abs(cf.lam))
    dev = np.abs(cf.values.real - target)
    # At lam = 0 both the imaginary part and its stderr are exactly 0.
    im = np.abs(cf.values.imag)
    imag_z = np.divide(im, cf.stderr_im, out=np.where(im > 0, np.inf, 0.0), where=cf.stderr_im > 0)
    stat = max(dev.max() / threshold, imag_z.max() / 3.0)
    details = {
        "lambda": list(cf.lam), "re": list(cf.values.real), "im": list(cf.values.imag),
        "target": list(target), "max_deviation": float(dev.max()), "im_stderr": list(cf.stderr_im),
        "censored_fraction": cens,
    }
    return IdentityReport.judge(name, stat, 1.0, xi.size, echo, details=details)


# ---------------------------------------------------------- key inequality


def check_kp_inequality(config: MonteCarloConfig, threshold: float = 1e-3) -> IdentityReport:
    """T >= tau_(Theta-) - 2 dt on every path where Theta is observed.

    Without negative jumps the inequality holds almost surely; for other laws
    the check still runs but is tagged exploratory (its verdict is reported
    and never counted as a failure).
    """
    fp = _need_fparams(config)
    p = config.params
    exploratory = not (p.spectrally_positive and fp.beta >= 0)
    name = "kp_inequality"
    echo = _echo(config)
    sample = run_excursions(config)
    seen = np.isfinite(sample.theta_end)
    cens = 1.0 - float(seen.mean())
    if cens > 0.5:
        return IdentityReport.inconclusive(name, f"{cens:.1%} of paths never reach Theta", int(seen.sum()), echo, exploratory=exploratory)
    T = sample.passage[seen]
    start = sample.theta_start[seen]
    violations = int(np.sum(T < start - 2.0 * sample.dt))
    frac = violations / T.size
    details = {"violations": violations, "observed": int(T.size), "censored_fraction": cens}
    return IdentityReport.judge(name, frac, threshold, T.size, echo, exploratory=exploratory, details=details)


# ------------------------------------------------------------- positivity


def _a1_chunk(config, start, stop):
    from .stable import simulate_paths

    z = simulate_paths(config.params, config.horizon, config.n_steps, config.seed, start, stop)
    eps = config.fparams.epsilon_for(config.params, config.dt)
    a = np.sum(integrand(z[:, :-1], config.fparams.beta, eps), axis=1) * config.dt
    return int(np.sum(a > 0))


def check_positivity_a1(config: MonteCarloConfig) -> IdentityReport:
    """P[A_t > 0] = rho for beta = 1 (any t, by self-similarity; t = horizon)."""
    fp = _need_fparams(config)
    if fp.beta != 1.0:
        raise DomainError("the positivity identity needs beta = 1")
    positives = sum(
        map_chunks(lambda a, b: _a1_chunk(config, a, b), config.n_paths, chunk_size_for(config.n_steps), config.threads)
    )
    n = config.n_paths
    rho = config.params.rho
    p_hat = positives / n
    details = {"p_hat": p_hat, "rho": rho, "positives": positives}
    return IdentityReport.judge(
        "positivity_a1", abs(p_hat - rho), 3.0 * math.sqrt(rho * (1 - rho) / n), n, _echo(config), details=details
    )


# ---------------------------------------------------------- xi+ and xi-


def check_xi_split_symmetry(
    config: MonteCarloConfig, max_blocks: int = 1, pos_weight: float = 1.0
) -> IdentityReport:
    """xi+_1 and xi-_1 share a law (finite-variation regime beta > -1).

    Exact two-sample KS between xi+ on one half of the paths and xi- on the
    other.  The fraction of excursions carrying both signs (simultaneous
    jumps of xi+ and xi-) is reported as a diagnostic.
    """
    fp = _need_fparams(config)
    if not fp.beta > -1.0:
        raise DomainError("the split symmetry needs beta > -1")
    name = "xi_split_symmetry"
    echo = _echo(config, max_blocks=max_blocks, pos_weight=pos_weight)
    sample = run_excursions(config, xi_level=1.0, max_blocks=max_blocks, pos_weight=pos_weight, mixing=True)
    cens = sample.xi_censored_fraction
    ok = np.isfinite(sample.tau)
    if cens > MAX_CENSORED:
        return IdentityReport.inconclusive(name, f"{cens:.1%} of tau_1 censored", int(ok.sum()), echo)
    a, _ = _halves(sample.xi_plus[ok])
    _, b = _halves(sample.xi_minus[ok])
    d, crit = ks_two_sample(a, b)
    mixed = sample.mixed_excursions / max(sample.signed_excursions, 1)
    details = {"ks_critical": crit, "mixed_excursion_fraction": mixed, "censored_fraction": cens}
    return IdentityReport.judge(name, d, crit, int(ok.sum()), echo, details=details)


# -------------------------------------------------------------- Tauberian


def check_tauberian_tail(config: MonteCarloConfig, tol: float = 0.05, prefactor_tol: float = 0.25) -> IdentityReport:
    """P[tau_Theta(1) > t] ~ C t^(-gamma/2).

    The fitted exponent must be within ``tol`` of gamma/2.  Where the constant
    is explicit (alpha = 2 or beta = -1), the mean of t^(gamma/2) P[. > t]
    over the fit window must also be within ``prefactor_tol`` of it.
    """
    fp = _need_fparams(config)
    p = config.params
    if not p.spectrally_positive:
        raise DomainError("the Tauberian tail check needs chi = +1 or alpha = 2")
    name = "tauberian_tail"
    echo = _echo(config)
    sample = run_excursions(config)
    times = sample.theta_end
    ok = ~np.isnan(times)
    grid = config.grid()
    est = survival_curve(times[ok], grid, int(ok.sum()), min_fit_t=10 * config.dt)
    try:
        est = fit_exponent(est)
    except Exception as exc:  # InsufficientDataError
        return IdentityReport.inconclusive(name, str(exc), int(ok.sum()), echo)
    target = p.gamma / 2.0
    components = {"exponent": abs(est.theta_hat - target) / tol}
    details = {"theta_hat": est.theta_hat, "theta_stderr": est.theta_stderr, "target": target, **est.fit_summary()}
    const = theorem_a_constant(p, fp)
    if const.validity != "unknown":
        i, j = est.fit_window
        pref = float(np.mean(est.survival[i : j + 1] * est.t_grid[i : j + 1] ** target))
        rel = abs(pref - const.closed_form) / const.closed_form
        components["prefactor"] = rel / prefactor_tol
        details.update(prefactor=pref, constant=const.closed_form, prefactor_rel_error=rel)
    details["components"] = components
    return IdentityReport.judge(name, max(components.values()), 1.0, int(ok.sum()), echo, details=details)


CHECKS = {
    "symmetry": check_symmetry_lemma,
    "bingham": check_bingham_supremum,
    "fgb": check_fgb,
    "kp": check_kp_inequality,
    "positivity": check_positivity_a1,
    "split": check_xi_split_symmetry,
    "tauberian": check_tauberian_tail,
}
