import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from topheavy import InputError
from topheavy.gaussian_model import (
    GaussianEnsemble, bivariate_tail, bounds_table, gaussian_tail, gordon_lower, gordon_upper,
    joint_tail, joint_tail_upper, marginal_tail_bounds, sample_gaussian, spectral_factor,
    u2_exact_pairwise, u2_lower, union_probability_mc,
)

Z_GRID = (0.1, 0.5, 1, 2, 3, 5)


def test_marginal_examples():
    b = marginal_tail_bounds(0.0, 1.0, 2.0)
    # phi(2)*2/5, erfc(2/sqrt2)/2, phi(2)/2
    phi2 = math.exp(-2) / math.sqrt(2 * math.pi)
    assert b.lower == pytest.approx(0.4 * phi2, abs=1e-15)
    assert b.upper == pytest.approx(0.5 * phi2, abs=1e-15)
    assert (round(b.lower, 5), round(b.exact, 5), round(b.upper, 5)) == (0.0216, 0.02275, 0.027)
    b1 = marginal_tail_bounds(0.0, 2.0, 2.0)
    assert (round(b1.lower, 5), round(b1.exact, 5), round(b1.upper, 5)) == (0.12099, 0.15866, 0.24197)
    shifted = marginal_tail_bounds(3.0, 2.0, 5.0)
    assert (shifted.lower, shifted.exact, shifted.upper) == (b1.lower, b1.exact, b1.upper)
    with pytest.raises(InputError):
        marginal_tail_bounds(2.0, 1.0, 2.0)


def test_tail_matches_scipy():
    z = np.linspace(0.05, 8, 50)
    assert np.allclose(gaussian_tail(z), stats.norm.sf(z), rtol=1e-13, atol=0)


def test_bracketing_grid():
    for row in bounds_table(Z_GRID):
        assert row.lower <= row.exact <= row.upper


def test_joint_tail_examples():
    assert joint_tail_upper(0, 0, 1, 1, 0.0, 2) == pytest.approx(math.exp(-4))
    assert joint_tail_upper(0, 0, 1, 1, 1.0, 2) == pytest.approx(math.exp(-2))
    assert joint_tail_upper(0.3, -0.2, 1.5, 0.7, 0.4, 2.5) == joint_tail_upper(-0.2, 0.3, 0.7, 1.5, 0.4, 2.5)
    q = stats.norm.sf(2)
    assert q * q <= math.exp(-4) and q <= math.exp(-2)


def test_joint_tail_negative_discriminant_is_flagged():
    jt = joint_tail(0, 0, 1, 1, -0.5, 2)
    assert jt.floored and jt.discriminant < 0
    assert jt.lambda1 == pytest.approx(1.0)
    assert jt.lambda1_eigen == pytest.approx(1.5)
    assert jt.bound >= bivariate_tail(2, 2, -0.5)


def test_closed_form_against_eigenvalue():
    # the closed form carries rho where the eigenvalue has rho^2; the two meet
    # at rho in {0, 1} and the closed form is the larger one in between
    for s1, s2 in [(1, 1), (1.3, 0.4), (0.5, 1.5)]:
        for rho in (0.0, 1.0):
            jt = joint_tail(0, 0, s1, s2, rho, 5)
            assert jt.lambda1 == pytest.approx(jt.lambda1_eigen, rel=1e-12)
        for rho in np.linspace(0.05, 0.95, 10):
            jt = joint_tail(0, 0, s1, s2, rho, 5)
            assert not jt.floored and jt.lambda1 >= jt.lambda1_eigen - 1e-12


def test_chernoff_dominance_grid():
    for rho in (-0.5, 0, 0.5, 0.9):
        for z in (1, 2, 3):
            assert joint_tail_upper(0, 0, 1, 1, rho, z) >= bivariate_tail(z, z, rho)


def test_joint_tail_nondecreasing_in_rho():
    for s1, s2 in [(1, 1), (1, 2), (0.3, 1.7)]:
        vals = [joint_tail_upper(0, 0, s1, s2, r, 3) for r in np.linspace(-1, 1, 41)]
        assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


def test_bivariate_special_cases():
    q = stats.norm.sf
    assert bivariate_tail(1.2, 0.7, 0.0) == pytest.approx(q(1.2) * q(0.7), abs=1e-10)
    assert bivariate_tail(1.5, 1.5, 1.0) == pytest.approx(q(1.5), abs=1e-15)
    # cross-check against scipy's bivariate normal cdf
    for z1, z2, r in [(1, 1, 0.5), (0.5, 2, -0.3), (2, 2.5, 0.9)]:
        ref = stats.multivariate_normal(cov=[[1, r], [r, 1]]).cdf([-z1, -z2])
        assert bivariate_tail(z1, z2, r) == pytest.approx(ref, abs=1e-6)


def test_bivariate_against_monte_carlo():
    L = spectral_factor(np.array([[1, 0.5], [0.5, 1]]))
    hits = n = 0
    for block in sample_gaussian(np.zeros(2), L, 10_000_000, seed=5):
        hits += int(np.count_nonzero((block > 1).all(axis=1)))
        n += len(block)
    p = hits / n
    se = math.sqrt(p * (1 - p) / n)
    assert abs(bivariate_tail(1, 1, 0.5) - p) <= 3 * se


def test_u2_lower_examples():
    ens1 = GaussianEnsemble([0.0], [1.0], None, 2.0)
    assert u2_lower(ens1, [0]) == pytest.approx(gordon_lower(2.0))
    assert round(u2_lower(ens1, [0]), 5) == 0.0216
    ens = GaussianEnsemble([0.0, 0.0], [1.0, 1.0], None, 2.0)
    lo = u2_lower(ens, [0, 1])
    assert lo == pytest.approx(2 * gordon_lower(2.0) - math.exp(-4))
    assert round(lo, 5) == 0.02488
    q = stats.norm.sf(2)
    exact = u2_exact_pairwise(ens, [0, 1])
    assert exact == pytest.approx(2 * q - q * q, abs=1e-10)
    assert round(exact, 5) == 0.04498 and lo <= exact
    assert u2_lower(ens, []) == 0.0


def test_first_term_monotone_in_mu_and_sigma():
    # with z >= 1 the Gordon lower tail grows as z shrinks
    t = 10.0
    mus = np.linspace(0, 5, 20)
    vals = [u2_lower(GaussianEnsemble([m], [2.0], None, t), [0]) for m in mus]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    sig = np.linspace(1.0, 4.0, 20)
    vals = [u2_lower(GaussianEnsemble([2.0], [s], None, t), [0]) for s in sig]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@st.composite
def ensembles(draw):
    n = draw(st.integers(1, 6))
    sigma = np.array(draw(st.lists(st.floats(0.3, 3.0), min_size=n, max_size=n)))
    z = np.array(draw(st.lists(st.floats(0.5, 3.0), min_size=n, max_size=n)))
    B = np.array(draw(st.lists(st.floats(-1, 1), min_size=n * n, max_size=n * n))).reshape(n, n)
    C = B @ B.T + 0.05 * np.eye(n)
    d = np.sqrt(np.diag(C))
    rho = C / np.outer(d, d)
    np.fill_diagonal(rho, 1.0)
    t = 5.0
    return GaussianEnsemble(t - z * sigma, sigma, rho, t)


@settings(max_examples=100, deadline=None)
@given(ensembles())
def test_theorem6(ens):
    S = list(range(ens.n))
    assert u2_lower(ens, S) <= u2_exact_pairwise(ens, S) + 1e-9


def test_psd_handling():
    with pytest.raises(InputError):
        spectral_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))
    L = spectral_factor(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert np.allclose(L @ L.T, [[1, 1], [1, 1]])
    with pytest.raises(InputError):
        GaussianEnsemble([0, 0], [1, 1], [[1, 0.2], [0.3, 1]], 1.0)


def test_mc_examples():
    ens = GaussianEnsemble([0.0, 0.5], [1.0, 1.5], None, 2.0)
    p, se = union_probability_mc(ens, [0], samples=200_000, seed=1)
    assert abs(p - stats.norm.sf(2)) <= 4 * se
    p2, se2 = union_probability_mc(ens, [0, 1], samples=200_000, seed=1)
    ref = 1 - (1 - stats.norm.sf(2)) * (1 - stats.norm.sf(1.0))
    assert abs(p2 - ref) <= 4 * se2
    twin = GaussianEnsemble([0.0, 0.0], [1.0, 1.0], [[1, 1], [1, 1]], 2.0)
    a = union_probability_mc(twin, [0, 1], samples=50_000, seed=3)
    b = union_probability_mc(GaussianEnsemble([0.0], [1.0], None, 2.0), [0], samples=50_000, seed=3)
    # the same event twice: statistically the single-event estimate
    assert abs(a[0] - b[0]) <= 4 * math.hypot(a[1], b[1])
    with pytest.raises(InputError):
        union_probability_mc(ens, [0], samples=100)


def test_mc_seed_and_chunking():
    ens = GaussianEnsemble([0.0, 0.2, -0.1], [1, 1, 1], None, 1.0)
    a = union_probability_mc(ens, [0, 1, 2], samples=40_000, seed=9, chunk=40_000)
    b = union_probability_mc(ens, [0, 1, 2], samples=40_000, seed=9, chunk=40_000)
    assert a == b


def test_mc_standard_error_halves():
    ens = GaussianEnsemble([0.0], [1.0], None, 1.0)
    _, se1 = union_probability_mc(ens, [0], samples=100_000, seed=2)
    _, se4 = union_probability_mc(ens, [0], samples=400_000, seed=2)
    assert se4 == pytest.approx(se1 / 2, rel=0.05)


def test_ensemble_json_roundtrip():
    ens = GaussianEnsemble([0.0, 0.5], [1.0, 1.5], [[1, 0.3], [0.3, 1]], 2.0)
    back = GaussianEnsemble.from_json(ens.to_json())
    assert np.array_equal(back.rho, ens.rho) and back.t == ens.t
