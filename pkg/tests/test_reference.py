import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import kolmogorov

from ewenskit.errors import DomainError
from ewenskit.reference import (
    TestReport,
    brownian_marginal_cdf,
    chi_square_gof,
    gem_batch,
    gem_sticks,
    kolmogorov_sf,
    ks_test,
    pd_largest_batch,
    sample_pd,
)
from ewenskit.samplers import ewens_batch


def test_pd_conservation_and_order():
    rng = np.random.default_rng(1)
    for theta in (0.3, 1.0, 4.0):
        for _ in range(50):
            s = sample_pd(theta, rng)
            assert np.all(np.diff(s.components) <= 0) and np.all(s.components > 0)
            assert s.components.sum() + s.tail_bound == pytest.approx(1.0, abs=1e-12)
            assert s.tail_bound < 1e-12


def test_stick_count_theta_one():
    # log of the remainder is a sum of Exp(1) steps at theta = 1, so the
    # stopping count has mean close to log(1/tol) + 1, not log2(1/tol)
    rng = np.random.default_rng(2)
    lengths = [len(gem_sticks(1.0, rng)[0]) for _ in range(2000)]
    assert abs(np.mean(lengths) - (math.log(1e12) + 1)) < 0.5


def test_gem_batch_conservation():
    sticks, rest = gem_batch(0.8, 500, np.random.default_rng(3))
    assert np.allclose(sticks.sum(axis=1) + rest, 1.0)
    assert np.all(rest < 1e-12)


def test_expected_largest_component():
    x = pd_largest_batch(1.0, 1_000_000, np.random.default_rng(4))
    assert abs(x.mean() - 0.6243) < 0.001


def test_largest_batch_matches_scalar_law():
    rng = np.random.default_rng(5)
    scalar = [sample_pd(2.0, rng).largest for _ in range(5000)]
    assert ks_test(scalar, pd_largest_batch(2.0, 20_000, rng)).p_value > 1e-3


def test_brownian_examples():
    assert brownian_marginal_cdf(1, 0) == 0.5
    assert brownian_marginal_cdf(0.25, 0.5) == pytest.approx(0.8413, abs=1e-4)
    assert brownian_marginal_cdf(0.5, 0, "cubic") == 0.5
    assert brownian_marginal_cdf(0.5, 1, "cubic") == pytest.approx(brownian_marginal_cdf(0.125, 1))
    assert brownian_marginal_cdf(0, -0.1) == 0.0 and brownian_marginal_cdf(0, 0) == 1.0
    with pytest.raises(DomainError):
        brownian_marginal_cdf(0.5, 0, "log")


@given(st.floats(0.01, 1), st.floats(-5, 5), st.floats(0, 3))
def test_brownian_monotone(t, x, h):
    assert brownian_marginal_cdf(t, x) <= brownian_marginal_cdf(t, x + h)


def test_ks_examples():
    a = np.random.default_rng(6).normal(size=300)
    rep = ks_test(a, a)
    assert rep.statistic == 0 and rep.p_value == 1
    ecdf = lambda x: np.searchsorted(np.sort(a), x, side="right") / len(a)  # noqa: E731
    assert ks_test(a, ecdf).statistic <= 1 / len(a) + 1e-15
    with pytest.raises(DomainError):
        ks_test([], a)
    with pytest.raises(DomainError):
        ks_test(a, [])


def test_ks_normal_calibration():
    from statistics import NormalDist

    x = np.random.default_rng(7).normal(size=10_000)
    assert ks_test(x, NormalDist().cdf).p_value > 1e-3


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.lists(st.floats(-10, 10), min_size=1, max_size=30))
def test_ks_symmetric(a, b):
    assert ks_test(a, b).statistic == ks_test(b, a).statistic


@pytest.mark.parametrize("lam", [0.3, 0.6, 1.0, 1.36, 2.0])
def test_kolmogorov_series(lam):
    assert kolmogorov_sf(lam) == pytest.approx(kolmogorov(lam), abs=1e-12)


def test_chi_square_examples():
    assert chi_square_gof([10, 30, 60], [0.1, 0.3, 0.6]).statistic == 0
    assert chi_square_gof([5000, 5000], [0.5, 0.5]).statistic == 0
    with pytest.raises(DomainError):
        chi_square_gof([0, 0], [0.5, 0.5])
    with pytest.raises(DomainError):
        chi_square_gof([3, 4], [0.5, 0.6])
    with pytest.raises(DomainError):
        chi_square_gof([3, 1], [0.999, 0.001])


def test_chi_square_pools_small_bins():
    rep = chi_square_gof([50, 30, 15, 3, 2], [0.5, 0.3, 0.15, 0.03, 0.02])
    assert rep.dof == 3  # bins 2 and 3 merge into one of expectation 5


def test_chi_square_ewens_three():
    b = ewens_batch(1.0, 3, 1_000_000, 12)
    lg = b.largest()
    counts = [np.sum(lg == 1), np.sum(lg == 2), np.sum(lg == 3)]
    assert chi_square_gof(counts, [1 / 6, 1 / 2, 1 / 3]).p_value > 1e-3


def test_report_round_trip():
    rep = chi_square_gof([40, 60], [0.5, 0.5])
    back = TestReport.from_json(rep.to_json())
    assert back == rep and back.verdict == rep.verdict
    assert 0 <= rep.p_value <= 1
