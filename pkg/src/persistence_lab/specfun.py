"""Closed-form constants with independent quadrature twins, and stable densities.

Each constant that has both a closed form and an integral definition is
reported as a :class:`ConstantReport` so the two routes can be compared.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericError
from .functionals import FunctionalParams
from .stable import StableParams, levy_exponent

__all__ = [
    "ConstantReport",
    "gamma_fn",
    "kappa_tau_closed",
    "kappa_tau_quadrature",
    "kappa_tau_report",
    "kappa_xi_brownian",
    "fgb_charfn",
    "oscillating_integral_closed",
    "oscillating_integral_numeric",
    "theorem_a_constant",
    "goldman_constant",
    "stable_pdf",
    "constant_reports",
    "CROSS_CHECK_RTOL",
]

# Tolerances a cross-checked row must meet.
CROSS_CHECK_RTOL = {"kappa_tau": 1e-8, "oscillating_integral": 1e-6, "theorem_a_K": 1e-6}


@dataclass(frozen=True)
class ConstantReport:
    name: str
    closed_form: float
    quadrature: float | None = None
    rel_error: float | None = None
    validity: str = "closed-form-only"  # exact | cross-checked | closed-form-only | unknown
    inputs: dict = field(default_factory=dict)

    def with_quadrature(self, value: float) -> "ConstantReport":
        value = float(value)
        rel = abs(self.closed_form - value) / abs(self.closed_form)
        return ConstantReport(self.name, self.closed_form, value, rel, "cross-checked", self.inputs)

    def passes(self) -> bool:
        if self.validity != "cross-checked":
            return True
        return self.rel_error <= CROSS_CHECK_RTOL.get(self.name, 1e-8)

    def to_dict(self) -> dict:
        return asdict(self)


def gamma_fn(z: float) -> float:
    """Euler's Gamma on the real line, excluding the poles 0, -1, -2, ..."""
    if z <= 0 and float(z).is_integer():
        raise DomainError(f"Gamma has a pole at {z}")
    return math.gamma(z)


# ------------------------------------------------------------------ kappa_tau


def kappa_tau_closed(params: StableParams) -> ConstantReport:
    """Scaling parameter -log E[exp(-tau_1)] of the inverse local time."""
    a, k, chi = params.alpha, params.kappa, params.chi
    inputs = {"alpha": a, "kappa": k, "chi": chi}
    if a == 2.0 or chi == 0.0:
        value = a * k ** (1 / a) * math.sin(math.pi / a)
    elif abs(chi) == 1.0:
        value = a * k ** (1 / a) / math.sin((a - 1) * math.pi / 2) ** (1 / a)
    else:
        value = _kappa_tau_mu_formula(params)
    return ConstantReport("kappa_tau", value, inputs=inputs)


def _kappa_tau_mu_formula(params: StableParams) -> float:
    a, k = params.alpha, params.kappa
    t = abs(params.chi * params.tan_term())
    base = a * k ** (1 / a) * math.sin(math.pi / a)
    if t < 1e-8:
        # Even in chi, so the chi = 0 value is off by O(t^2) here.
        return base
    mu = 1.0 / math.hypot(1.0, t)
    # |rho - 1/2| and sqrt(1 - mu^2) = t mu, written without cancellation.
    r = math.atan(t) / (math.pi * a)
    num = base * mu ** (-1 / a) * t * mu
    return num / (math.sin(math.pi * (a - 1) * r) + mu * math.sin(math.pi * r))


def kappa_tau_quadrature(params: StableParams) -> float:
    """2 pi / int_R Re(1 / (1 + Psi(lam))) d lam, by adaptive quadrature.

    The integrand is even in lam.  Beyond the natural cutoff c = kappa^(-1/alpha)
    the substitution lam = c w^(-1/(alpha-1)) maps the O(lam^-alpha) tail onto
    a bounded integrand on (0, 1].
    """
    a = params.alpha
    c = params.kappa ** (-1.0 / a)

    def f(lam):
        return (1.0 / (1.0 + levy_exponent(params, lam))).real

    p = 1.0 / (a - 1.0)

    def tail(w):
        if w == 0.0:
            # f(lam) lam^a / c^a -> mu^2 = 1 / (1 + chi^2 tan^2) as lam -> inf
            t = params.chi * params.tan_term()
            return c * p / (1.0 + t * t)
        lam = c * w ** (-p)
        return f(lam) * c * p * w ** (-p - 1.0)

    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=400)
    head, e1 = integrate.quad(f, 0.0, c, **opts)
    rest, e2 = integrate.quad(tail, 0.0, 1.0, **opts)
    if e1 + e2 > 1e-10:
        raise NumericError("kappa_tau quadrature did not converge", {"abserr": e1 + e2, "params": params})
    return 2.0 * math.pi / (2.0 * (head + rest))


def kappa_tau_report(params: StableParams) -> ConstantReport:
    return kappa_tau_closed(params).with_quadrature(kappa_tau_quadrature(params))


# ------------------------------------------------------------------ kappa_xi


def kappa_xi_brownian(kappa: float, delta: float) -> float:
    """Scaling parameter of xi in the Brownian case alpha = 2."""
    if not 0.0 < delta < 2.0:
        raise DomainError(f"delta must lie in (0, 2), got {delta}")
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    ratio = delta**delta / math.gamma(delta)
    return (
        math.pi
        * (2 * kappa) ** (1 / delta - 1)
        * 2**delta
        / (2 * delta * math.sin(math.pi * delta / 2))
        * ratio**2
    )


def fgb_charfn(t: float, lam) -> float:
    """E[exp(i lam xi_t)] for beta = -1: exp(-t pi |lam|)."""
    return np.exp(-t * math.pi * np.abs(lam))


# ------------------------------------------------------- oscillating integral


def oscillating_integral_closed(delta: float) -> float:
    if not 0.0 < delta < 2.0:
        raise DomainError(f"delta must lie in (0, 2), got {delta}")
    return 2.0 / (delta * math.gamma(delta / 2))


def _sine_tail(p: float, c: float, terms: int = 12) -> float:
    """int_c^inf x^-p sin x dx from the integration-by-parts series.

    J(p) = i e^{ic} c^{-p} sum_k (-i)^k (p)_k c^{-k}; the series is asymptotic
    and converges quickly once c is a few hundred.
    """
    total, term = 0j, 1.0 + 0j
    for k in range(terms):
        total += term
        term *= -1j * (p + k) / c
    return (1j * np.exp(1j * c) * c ** (-p) * total).imag


def _sine_moment(s: float, cut: float) -> float:
    """int_0^inf x^(s-1) sin x dx for -1 < s < 1, numerically."""
    # x^(s-1) sin x = x^s * (sin x / x): algebraic weight handles the origin.
    def f(x):
        return math.sin(x) / x if x > 0 else 1.0

    with warnings.catch_warnings():
        # QAWS reports roundoff at this tolerance even when the result is good.
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        head, err = integrate.quad(f, 0.0, cut, weight="alg", wvar=(s, 0.0), limit=2000, epsabs=1e-13, epsrel=1e-12)
    if err > 1e-9:
        raise NumericError("sine moment quadrature did not converge", {"abserr": err, "s": s})
    return head + _sine_tail(1.0 - s, cut)


def oscillating_integral_numeric(delta: float, cut: float = 256 * math.pi) -> float:
    """Real form of the oscillating integral after integration by parts.

    I = cos(d pi/4)/pi int x^(-1-d/2) sin x dx + 2 sin(d pi/4)/(pi d) int x^(-d/2) sin x dx
    """
    if not 0.0 < delta < 2.0:
        raise DomainError(f"delta must lie in (0, 2), got {delta}")
    first = _sine_moment(-delta / 2, cut)
    second = _sine_moment(1 - delta / 2, cut)
    q = delta * math.pi / 4
    return math.cos(q) / math.pi * first + 2 * math.sin(q) / (math.pi * delta) * second


# ----------------------------------------------------------- composed constants


def _theorem_a_value(kappa_tau, kappa_xi, delta, gamma_idx, osc):
    return math.sqrt(kappa_tau / kappa_xi) * osc / math.gamma(1 - gamma_idx / 2)


def theorem_a_constant(params: StableParams, fparams: FunctionalParams) -> ConstantReport:
    """Constant K in P[T > t] <= K t^-(alpha-1)/(2 alpha).

    Only available when kappa_xi is known: alpha = 2 or beta = -1.  Otherwise
    the report carries validity ``unknown`` and a NaN value.
    """
    delta = fparams.delta(params.alpha)
    gamma_idx = params.gamma
    inputs = {"alpha": params.alpha, "kappa": params.kappa, "chi": params.chi, "beta": fparams.beta}
    if params.alpha == 2.0:
        kxi = kappa_xi_brownian(params.kappa, delta)
    elif fparams.beta == -1.0:
        kxi = math.pi
    else:
        return ConstantReport("theorem_a_K", math.nan, validity="unknown", inputs=inputs)
    inputs["kappa_xi"] = kxi
    closed = _theorem_a_value(
        kappa_tau_closed(params).closed_form, kxi, delta, gamma_idx, oscillating_integral_closed(delta)
    )
    quad = _theorem_a_value(
        kappa_tau_quadrature(params), kxi, delta, gamma_idx, oscillating_integral_numeric(delta)
    )
    return ConstantReport("theorem_a_K", closed, inputs=inputs).with_quadrature(quad)


def goldman_constant() -> float:
    """Limit of t^(1/4) P[T > t] for integrated standard Brownian motion."""
    return 3 ** (4 / 3) * math.gamma(2 / 3) / (math.pi * 2 ** (13 / 12) * math.gamma(3 / 4))


# -------------------------------------------------------------- stable density


def stable_pdf(params: StableParams, x: float) -> float:
    """Density of Z_1 by Fourier inversion.

    p(x) = pi^-1 int_0^C exp(-kappa l^a) cos(kappa l^a chi tan(pi a/2) - l x) dl,
    with C chosen so that exp(-kappa C^a) < 1e-12.
    """
    a, k = params.alpha, params.kappa
    skew = k * params.chi * params.tan_term()
    cutoff = (-math.log(1e-13) / k) ** (1 / a)

    def f(lam):
        la = lam**a
        return math.exp(-k * la) * math.cos(skew * la - lam * x)

    n_osc = int(abs(x) * cutoff / math.pi) + 1
    points = np.linspace(0.0, cutoff, min(n_osc, 200) + 1)[1:-1]
    value, err = integrate.quad(f, 0.0, cutoff, points=points if points.size else None, limit=4000, epsabs=1e-12, epsrel=1e-12)
    if err > 1e-8:
        raise NumericError("stable_pdf quadrature did not converge", {"abserr": err, "x": x})
    return max(value / math.pi, 0.0)


# --------------------------------------------------------------------- tables


def constant_reports(params: StableParams, fparams: FunctionalParams | None = None) -> list[ConstantReport]:
    """All constants available for one parameter point."""
    rows = [kappa_tau_report(params)]
    if fparams is not None:
        delta = fparams.delta(params.alpha)
        osc = ConstantReport(
            "oscillating_integral", oscillating_integral_closed(delta), inputs={"delta": delta}
        ).with_quadrature(oscillating_integral_numeric(delta))
        rows.append(osc)
        if params.alpha == 2.0:
            rows.append(
                ConstantReport(
                    "kappa_xi",
                    kappa_xi_brownian(params.kappa, delta),
                    inputs={"kappa": params.kappa, "delta": delta},
                )
            )
        elif fparams.beta == -1.0:
            rows.append(ConstantReport("kappa_xi", math.pi, validity="exact", inputs={"beta": -1.0}))
        else:
            rows.append(ConstantReport("kappa_xi", math.nan, validity="unknown", inputs={"delta": delta}))
        rows.append(theorem_a_constant(params, fparams))
    return rows
