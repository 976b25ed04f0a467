import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from persistence_lab.errors import DomainError
from persistence_lab.identities import ks_two_sample
from persistence_lab.stable import (
    PathGrid,
    RngStream,
    StableParams,
    levy_exponent,
    positivity_parameter,
    sample_stable,
    simulate_path,
    simulate_paths,
)

alphas = st.floats(min_value=1.01, max_value=2.0)
chis = st.floats(min_value=-1.0, max_value=1.0)
kappas = st.floats(min_value=0.05, max_value=20.0)


@pytest.mark.parametrize("alpha,kappa,chi", [(1.0, 1, 0), (2.01, 1, 0), (1.5, 0, 0), (1.5, -1, 0), (1.5, 1, 1.01), (1.5, math.inf, 0)])
def test_params_domain(alpha, kappa, chi):
    with pytest.raises(DomainError):
        StableParams(alpha, kappa, chi)


def test_alpha_error_names_range():
    with pytest.raises(DomainError, match=r"\(1, 2\]"):
        StableParams(0.9)


@pytest.mark.parametrize(
    "alpha,chi,rho",
    [(2.0, 0.7, 0.5), (1.5, -1.0, 2 / 3), (1.5, 1.0, 1 / 3), (1.5, 0.0, 0.5)],
)
def test_positivity_examples(alpha, chi, rho):
    assert positivity_parameter(StableParams(alpha, 1.0, chi)) == pytest.approx(rho, abs=1e-15)


@given(alphas, chis)
def test_rho_odd_in_chi(alpha, chi):
    r1 = positivity_parameter(StableParams(alpha, 1.0, chi))
    r2 = positivity_parameter(StableParams(alpha, 1.0, -chi))
    assert r1 + r2 == pytest.approx(1.0, abs=1e-15)


@given(alphas, chis)
def test_rho_range(alpha, chi):
    r = positivity_parameter(StableParams(alpha, 1.0, chi))
    lo, hi = sorted((1 - 1 / alpha, 1 / alpha))
    assert lo - 1e-15 <= r <= hi + 1e-15


@given(st.floats(min_value=1.01, max_value=1.99))
def test_rho_one_sided(alpha):
    assert StableParams(alpha, 1.0, 1.0).rho == pytest.approx(1 - 1 / alpha, abs=1e-14)
    assert StableParams(alpha, 1.0, -1.0).rho == pytest.approx(1 / alpha, abs=1e-14)


def test_gaussian_has_no_skew():
    for chi in (-1.0, 0.3, 1.0):
        p = StableParams(2.0, 1.0, chi)
        assert p.tan_term() == 0.0
        assert p.rho == 0.5


def test_levy_exponent_examples():
    assert levy_exponent(StableParams(2.0, 0.5), 2.0) == 2 + 0j
    assert levy_exponent(StableParams(1.5, 1.0, 0.3), 0.0) == 0
    assert levy_exponent(StableParams(1.5, 1.0, 1.0), 1.0) == pytest.approx(1 + 1j, abs=1e-15)


@given(alphas, kappas, chis, st.floats(min_value=-50, max_value=50))
def test_levy_exponent_symmetries(alpha, kappa, chi, lam):
    p = StableParams(alpha, kappa, chi)
    a, b = levy_exponent(p, lam), levy_exponent(p, -lam)
    assert a.real >= 0
    assert a.real == b.real
    assert a.imag == -b.imag


def test_levy_exponent_vectorized():
    p = StableParams(1.5, 2.0, -0.5)
    lam = np.linspace(-3, 3, 7)
    assert np.allclose(levy_exponent(p, lam), [levy_exponent(p, x) for x in lam])


def test_gaussian_moments():
    x = sample_stable(StableParams(2.0, 0.5), 200_000, RngStream(3))
    n = x.size
    assert abs(x.mean()) < 3 / math.sqrt(n)
    assert x.var() == pytest.approx(1.0, abs=4 * math.sqrt(2 / n))


@pytest.mark.parametrize("chi,rho", [(0.0, 0.5), (-1.0, 2 / 3), (1.0, 1 / 3), (0.4, None)])
def test_sign_probability(chi, rho):
    p = StableParams(1.5, 1.0, chi)
    rho = p.rho if rho is None else rho
    x = sample_stable(p, 100_000, RngStream(5, 1))
    assert abs(np.mean(x > 0) - rho) < 3 * math.sqrt(rho * (1 - rho) / x.size)


@pytest.mark.parametrize("alpha,kappa,chi", [(1.5, 1.0, 1.0), (1.2, 0.5, -0.5), (1.8, 2.0, 0.3), (2.0, 0.5, 0.0)])
def test_characteristic_function(alpha, kappa, chi):
    p = StableParams(alpha, kappa, chi)
    n = 1_000_000
    x = sample_stable(p, n, RngStream(11, 2))
    for lam in (0.5, 1.0, 2.0):
        emp = np.exp(1j * lam * x).mean()
        assert abs(emp - np.exp(-levy_exponent(p, lam))) < 4 / math.sqrt(n)


def test_negation_flips_skewness():
    p = StableParams(1.5, 1.0, 0.8)
    a = -sample_stable(p, 100_000, RngStream(1, 0))
    b = sample_stable(p.mirrored(), 100_000, RngStream(1, 1))
    d, crit = ks_two_sample(a, b)
    assert d < crit


def test_chi_one_has_no_negative_jumps():
    # Large increments of a chi = +1 path are positive; the mirror image is negative.
    z = np.diff(simulate_paths(StableParams(1.5, 1.0, 1.0), 1.0, 4096, 0, 0, 50), axis=1).ravel()
    scale = np.median(np.abs(z))
    assert np.sum(z > 50 * scale) > 100
    assert np.sum(z < -50 * scale) == 0


def test_stream_determinism():
    p = StableParams(1.3, 1.0, -0.2)
    a = sample_stable(p, 1000, RngStream(42, 7))
    b = sample_stable(p, 1000, RngStream(42, 7))
    c = sample_stable(p, 1000, RngStream(42, 8))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_streams_uncorrelated():
    a = RngStream(9, 0).generator().random(100_000)
    b = RngStream(9, 1).generator().random(100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(a.size)


@pytest.mark.parametrize("seed,stream", [(-1, 0), (0, 2**64)])
def test_stream_domain(seed, stream):
    with pytest.raises(DomainError):
        RngStream(seed, stream)


def test_single_step_path():
    p = StableParams(1.5, 1.0, 0.5)
    path = simulate_path(p, 1.0, 1, RngStream(4, 3))
    assert path.values.shape == (2,)
    assert path.values[0] == 0.0
    assert path.values[1] == sample_stable(p, 1, RngStream(4, 3))[0]


def test_batch_rows_match_single_paths():
    p = StableParams(1.7, 0.5, -1.0)
    block = simulate_paths(p, 3.0, 64, 5, 10, 14)
    for row, i in enumerate(range(10, 14)):
        assert np.array_equal(block[row], simulate_path(p, 3.0, 64, RngStream(5, i)).values)


def test_increments_have_step_law():
    p = StableParams(1.5, 2.0, 0.5)
    dt = 0.25
    z = simulate_paths(p, 64 * dt, 64, 1, 0, 2000)
    assert np.all(z[:, 0] == 0.0)
    inc = np.diff(z, axis=1).ravel()[:100_000]
    ref = dt ** (1 / 1.5) * sample_stable(p, 100_000, RngStream(77))
    d, crit = ks_two_sample(inc, ref)
    assert d < crit


def test_self_similarity_of_marginals():
    p = StableParams(1.5, 1.0, 1.0)
    k = 4.0
    z = simulate_paths(p, 4.0, 16, 2, 0, 20_000)
    a = z[:10_000, 16]  # time 4
    b = z[10_000:, 4] * k ** (1 / 1.5)  # time 1, rescaled
    d, crit = ks_two_sample(a, b)
    assert d < crit


def test_grid_supremum_approaches_reflection_from_below():
    p = StableParams(2.0, 0.5)
    target = 2 * (1 - stats.norm.cdf(1.0))
    z = simulate_paths(p, 1.0, 1024, 6, 0, 40_000)
    probs = [np.mean(z[:, ::f].max(axis=1) >= 1.0) for f in (16, 4, 1)]
    assert probs[0] <= probs[1] <= probs[2] < target
    assert target - probs[2] < 0.03


def test_pathgrid_helpers():
    p = StableParams(1.5, 1.0, 0.5)
    path = simulate_path(p, 2.0, 8, RngStream(0))
    assert path.dt == 0.25
    assert np.allclose(path.times, np.arange(9) * 0.25)
    neg = path.negated()
    assert neg.params.chi == -0.5 and np.array_equal(neg.values, -path.values)
    sub = path.subsample(4)
    assert sub.n_steps == 2 and np.array_equal(sub.values, path.values[::4])
    with pytest.raises(DomainError):
        path.subsample(3)
    assert isinstance(sub, PathGrid)
