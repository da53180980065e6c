from fractions import Fraction

import numpy as np
import pytest

from ewenskit.checks import THETAS, example_weights
from ewenskit.core import Partition
from ewenskit.errors import CapacityError, DomainError, OracleMismatchError
from ewenskit.measures import Constant, IndicatorSmallParts, Macdonald, MeasureSpec
from ewenskit.oracle import (
    ExactPmfTable,
    alpha_discrepancy_all,
    alpha_discrepancy_exact,
    discrepancy_bound,
    enumerate_partitions,
    ewens_table,
    exact_eta_ratio,
    exact_expectation,
    exact_feller_pushforward,
    exact_istar_pmf,
    istar_formula,
    total_variation,
    weighted_table,
)
from ewenskit.statistics import batch_alpha

P = Partition.from_parts


def test_enumeration_counts():
    assert len(list(enumerate_partitions(3))) == 3
    assert len(list(enumerate_partitions(5))) == 7
    assert len(list(enumerate_partitions(10))) == 42
    parts = list(enumerate_partitions(12))
    assert len(set(parts)) == len(parts) and all(p.n == 12 for p in parts)
    with pytest.raises(CapacityError):
        enumerate_partitions(61)


def test_pushforward_examples():
    tab = exact_feller_pushforward(1, 3, exact=True).as_dict()
    assert tab == {P([3]): Fraction(1, 3), P([2, 1]): Fraction(1, 2), P([1, 1, 1]): Fraction(1, 6)}
    assert exact_feller_pushforward(1.0, 1).as_dict() == {P([1]): 1.0}
    tab2 = exact_feller_pushforward(2, 2, exact=True).as_dict()
    assert tab2 == {P([1, 1]): Fraction(2, 3), P([2]): Fraction(1, 3)}
    with pytest.raises(CapacityError):
        exact_feller_pushforward(1.0, 21)


@pytest.mark.parametrize("theta", THETAS)
def test_pushforward_equals_ewens(theta):
    for n in (2, 7, 12):
        assert total_variation(exact_feller_pushforward(theta, n), ewens_table(theta, n)) < 1e-10


def test_rational_pushforward_is_exact():
    th = Fraction(1, 2)
    assert exact_feller_pushforward(th, 9, exact=True).as_dict() == ewens_table(th, 9, exact=True).as_dict()
    assert exact_feller_pushforward(th, 9, exact=True).total() == 1


def test_tables_sum_to_one():
    for w in example_weights():
        tab = weighted_table(MeasureSpec(1.3, w), 12)
        assert abs(tab.total() - 1) < 1e-12
        assert len(tab.entries) == 77


def test_csv_round_trip():
    exact = ewens_table(Fraction(3, 2), 6, exact=True)
    assert ExactPmfTable.from_csv(exact.to_csv()) == exact
    approx = weighted_table(MeasureSpec(0.7, Macdonald(0.6, 0.3)), 6)
    assert ExactPmfTable.from_csv(approx.to_csv()) == approx
    assert "1/6" in ewens_table(1, 3, exact=True).to_csv()


def test_expectation_examples():
    nparts = lambda p: p.num_parts  # noqa: E731
    assert exact_expectation(MeasureSpec(1.0), nparts, 3) == pytest.approx(11 / 6)
    for w in example_weights():
        assert exact_expectation(MeasureSpec(0.5, w), lambda p: 1, 9) == pytest.approx(1.0)
    ind = MeasureSpec(1.0, IndicatorSmallParts((1,), ">", 0))
    assert exact_expectation(ind, lambda p: p.count(1), 2) == 2
    a1 = batch_alpha(1)
    a1.batch = True
    assert exact_expectation(MeasureSpec(1.0), a1, 10) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        exact_expectation(MeasureSpec(1.0, IndicatorSmallParts((1,), ">", 9)), nparts, 3)


def test_istar_examples():
    _, formula = exact_istar_pmf(1.0, 3)
    assert formula == pytest.approx([1 / 3] * 3)
    assert exact_istar_pmf(1.0, 2)[0] == pytest.approx([0.5, 0.5])
    for theta in (0.4, 3.0):
        assert istar_formula(theta, 8)[0] == pytest.approx(theta / (theta + 7))


@pytest.mark.parametrize("theta", THETAS)
def test_istar_agrees(theta):
    for n in (1, 5, 14):
        a, b = exact_istar_pmf(theta, n)
        assert np.max(np.abs(a - b)) < 1e-12
        assert b.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("theta", THETAS)
def test_discrepancy_below_bound(theta):
    rows = alpha_discrepancy_all(theta, 12)
    assert np.all(rows[:, 2] <= rows[:, 3])
    exact, bound = alpha_discrepancy_exact(theta, 12, 7, 3)
    assert exact <= bound


def test_discrepancy_domain():
    with pytest.raises(DomainError):
        alpha_discrepancy_exact(1.0, 5, 5, 5)
    with pytest.raises(DomainError):
        alpha_discrepancy_exact(1.0, 5, 2, 3)
    assert discrepancy_bound(1.0, 10, 2) == pytest.approx(3 / 9)


def test_eta_ratio_examples():
    assert exact_eta_ratio(MeasureSpec(1.0), 8) == pytest.approx((1.0, 1.0))
    assert exact_eta_ratio(MeasureSpec(1.0, IndicatorSmallParts((1,), ">", 0)), 2) == pytest.approx((0.5, 0.5))
    a, b = exact_eta_ratio(MeasureSpec(1.0, Macdonald(0.6, 0.3)), 10)
    assert abs(a - b) <= 1e-10 * max(a, b)


@pytest.mark.parametrize("theta", THETAS)
def test_eta_ratio_every_weight(theta):
    for w in example_weights():
        a, b = exact_eta_ratio(MeasureSpec(theta, w), 13)
        assert abs(a - b) <= 1e-10 * max(abs(a), abs(b))


def test_eta_ratio_mismatch_raises(monkeypatch):
    import ewenskit.oracle as oracle

    monkeypatch.setattr(oracle, "normalizer_enumerate", lambda m, n: 7.0)
    with pytest.raises(OracleMismatchError):
        oracle.exact_eta_ratio(MeasureSpec(1.0, Constant()), 4)
