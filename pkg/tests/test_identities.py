import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from persistence_lab.errors import DomainError
from persistence_lab.functionals import FunctionalParams
from persistence_lab.identities import (
    IdentityReport,
    _bingham_chunk,
    _exact_tail,
    check_bingham_supremum,
    check_fgb,
    check_kp_inequality,
    check_positivity_a1,
    check_symmetry_lemma,
    check_tauberian_tail,
    check_xi_split_symmetry,
    fgb_config,
    ks_critical_value,
    ks_two_sample,
)
from persistence_lab.montecarlo import MonteCarloConfig
from persistence_lab.specfun import stable_pdf
from persistence_lab.stable import StableParams

BM = StableParams(2.0, 0.5)
SPOS = StableParams(1.5, 1.0, 1.0)
SYM = StableParams(1.5, 1.0, 0.0)


def excursion_config(params, beta=1.0, n_paths=3000):
    return MonteCarloConfig(params, FunctionalParams(beta), n_paths=n_paths, n_steps=4096, horizon=64.0)


# ------------------------------------------------------------------ report


@given(st.floats(0, 10), st.floats(0.01, 10))
def test_verdict_matches_threshold(stat, thr):
    rep = IdentityReport.judge("x", stat, thr, 100, {})
    assert rep.passed == (stat <= thr)


def test_report_json_safe():
    rep = IdentityReport.inconclusive("x", "why", 10, {"a": np.float64(1.0)})
    d = rep.to_dict()
    json.dumps(d, allow_nan=False)
    assert d["verdict"] == "inconclusive" and d["statistic"] is None
    assert d["details"]["reason"] == "why"


# ---------------------------------------------------------------------- KS


@pytest.mark.parametrize("n1,n2", [(50, 50), (200, 300), (1000, 1000)])
def test_ks_critical_is_exact_one_percent(n1, n2):
    crit = ks_critical_value(n1, n2)
    # Null tail at the critical value is below 1%, one lattice step lower is above.
    lcm = n1 * n2 // math.gcd(n1, n2)
    h = round(crit * lcm)
    assert _exact_tail(n1, n2, h) <= 0.01 < _exact_tail(n1, n2, h - 1)


def test_ks_critical_near_asymptotic():
    crit = ks_critical_value(5000, 5000)
    asym = stats.kstwobign.isf(0.01) / math.sqrt(2500)
    assert crit == pytest.approx(asym, rel=0.02)


def test_ks_rejects_at_one_percent(rng):
    rejections = sum(
        ks_two_sample(rng.standard_normal(300), rng.standard_normal(300))[0] >= ks_critical_value(300, 300)
        for _ in range(400)
    )
    assert rejections <= 12  # Binomial(400, <= 0.01) rarely exceeds 12


# ---------------------------------------------------------------- symmetry


def test_symmetry_symmetric_law():
    assert check_symmetry_lemma(excursion_config(SYM, 0.5), max_blocks=16).passed


def test_symmetry_spectrally_positive():
    rep = check_symmetry_lemma(excursion_config(SPOS), max_blocks=16)
    assert rep.passed
    assert rep.details["ks"] < rep.details["ks_critical"]


def test_symmetry_negative_control():
    rep = check_symmetry_lemma(excursion_config(SPOS), max_blocks=16, shift=0.2)
    assert rep.verdict == "fail"


def test_symmetry_censoring_is_inconclusive():
    c = MonteCarloConfig(SPOS, FunctionalParams(1.0), n_paths=200, n_steps=64, horizon=0.01)
    assert check_symmetry_lemma(c).verdict == "inconclusive"


# ----------------------------------------------------------------- Bingham


def test_bingham_brownian():
    rep = check_bingham_supremum(BM, n_increments=200_000, n_paths=20_000)
    assert rep.passed
    exact = 2 * stats.norm.sf(np.array([0.5, 1.0, 2.0]))
    assert np.allclose(rep.details["p_sup"], exact, atol=4 * np.array(rep.details["pooled_stderr"]))


def test_bingham_spectrally_negative():
    p = StableParams(1.5, 1.0, -1.0)
    rep = check_bingham_supremum(p, n_increments=200_000, n_paths=20_000)
    assert rep.passed
    assert rep.details["total_mass_alpha_rho"] == pytest.approx(1.0, abs=1e-14)


def test_bingham_grid_refinement_moves_sup_up():
    p = StableParams(1.5, 1.0, -1.0)
    x = np.array([0.25, 0.5, 1.0])
    _, _, fine, coarse = _bingham_chunk(p, 1024, 3, x, False, 0, 4000)
    assert np.all(coarse <= fine)
    target = 1.5 * stable_tail(p, x)
    gap_fine = np.abs(np.mean(fine[:, None] >= x, axis=0) - target)
    gap_coarse = np.abs(np.mean(coarse[:, None] >= x, axis=0) - target)
    assert np.all(gap_fine < gap_coarse)


def stable_tail(p, x):
    return np.array([integrate.quad(lambda u: stable_pdf(p, u), xi, np.inf)[0] for xi in x])


def test_bingham_domain():
    with pytest.raises(DomainError):
        check_bingham_supremum(SPOS)
    with pytest.raises(DomainError):
        check_bingham_supremum(BM, x_grid=(0.0, 1.0))


# --------------------------------------------------------------------- FGB


def test_fgb_lambda_zero_is_exact():
    rep = check_fgb(fgb_config(BM, 1100, n_steps=2048), lambdas=(0.0, 1.0))
    assert rep.details["re"][0] == 1.0 and rep.details["im"][0] == 0.0


def test_fgb_brownian():
    rep = check_fgb(fgb_config(BM, 4000))
    assert rep.passed
    assert rep.details["max_deviation"] <= 0.05


def test_fgb_needs_beta_minus_one():
    with pytest.raises(DomainError):
        check_fgb(MonteCarloConfig(BM, FunctionalParams(1.0)))


# ---------------------------------------------------------------------- KP


@pytest.mark.parametrize("params", [BM, SPOS])
def test_kp_holds_without_negative_jumps(params):
    rep = check_kp_inequality(MonteCarloConfig(params, FunctionalParams(1.0), n_paths=2000, n_steps=4096, horizon=400.0))
    assert rep.passed and not rep.exploratory
    assert rep.details["violations"] == 0


def test_kp_negative_jumps_is_exploratory():
    c = MonteCarloConfig(StableParams(1.5, 1.0, -1.0), FunctionalParams(1.0), n_paths=2000, n_steps=4096, horizon=400.0)
    rep = check_kp_inequality(c)
    assert rep.exploratory
    assert rep.statistic > 0.01  # violated often, as expected with negative jumps


# -------------------------------------------------------------- positivity


@pytest.mark.parametrize("params", [StableParams(2.0, 1.0), SPOS, StableParams(1.5, 1.0, -0.5)])
def test_positivity(params):
    c = MonteCarloConfig(params, FunctionalParams(1.0), n_paths=20_000, n_steps=256, horizon=1.0)
    rep = check_positivity_a1(c)
    assert rep.passed
    assert rep.details["rho"] == params.rho


def test_positivity_needs_beta_one():
    with pytest.raises(DomainError):
        check_positivity_a1(MonteCarloConfig(BM, FunctionalParams(0.5)))


# ------------------------------------------------------------------- split


@pytest.mark.parametrize("params", [SYM, SPOS])
def test_split_symmetry(params):
    rep = check_xi_split_symmetry(excursion_config(params), max_blocks=16)
    assert rep.passed
    assert 0 <= rep.details["mixed_excursion_fraction"] <= 1


def test_split_negative_control():
    rep = check_xi_split_symmetry(excursion_config(SPOS), max_blocks=16, pos_weight=2.0)
    assert rep.verdict == "fail"


def test_split_needs_finite_variation():
    with pytest.raises(DomainError):
        check_xi_split_symmetry(MonteCarloConfig(BM, FunctionalParams(-1.0, 0.01)))


# --------------------------------------------------------------- Tauberian


def test_tauberian_brownian():
    rep = check_tauberian_tail(MonteCarloConfig(BM, FunctionalParams(1.0), n_paths=8000, n_steps=4096, horizon=400.0))
    assert rep.passed
    assert rep.details["theta_hat"] == pytest.approx(0.25, abs=0.05)
    assert rep.details["prefactor_rel_error"] <= 0.25


def test_tauberian_spectrally_positive():
    rep = check_tauberian_tail(MonteCarloConfig(SPOS, FunctionalParams(1.0), n_paths=8000, n_steps=4096, horizon=400.0))
    assert rep.passed
    assert "prefactor" not in rep.details["components"]


def test_tauberian_fgb_prefactor():
    # The beta = -1 prefactor only settles once the PV radius is well below the grid scale.
    c = MonteCarloConfig(BM, FunctionalParams(-1.0, 0.028), n_paths=8000, n_steps=16384, horizon=100.0)
    rep = check_tauberian_tail(c)
    assert rep.passed
    assert rep.details["prefactor_rel_error"] <= 0.25


def test_tauberian_domain():
    with pytest.raises(DomainError):
        check_tauberian_tail(MonteCarloConfig(SYM, FunctionalParams(1.0)))


# ------------------------------------------------------------- determinism


def test_checks_are_deterministic():
    c = excursion_config(SPOS, n_paths=300)
    a = check_symmetry_lemma(c, max_blocks=4).to_dict()
    b = check_symmetry_lemma(MonteCarloConfig(**{**c.__dict__, "threads": 2}), max_blocks=4).to_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
