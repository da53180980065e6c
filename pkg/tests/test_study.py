import pytest

from ewenskit.checks import SUITES, CheckResult, run_suite
from ewenskit.errors import DomainError
from ewenskit.measures import Constant, IndicatorSmallParts, Macdonald, MeasureSpec, ProductForm
from ewenskit.study import RoutingError, exact_mean_parts, exact_var_parts, route, run_study


@pytest.mark.parametrize("weight,n,expected", [
    (Constant(), 10, "feller"),
    (Constant(), 10**6, "feller"),
    (Macdonald(0.6, 0.3), 12, "enumerated"),
    (Macdonald(0.6, 0.3), 46, "sequential"),
    (Macdonald(0.6, 0.3), 10_000, "sequential"),
    (Macdonald(0.6, 0.3), 10_001, "importance"),
    (IndicatorSmallParts((1,), ">", 0), 45, "enumerated"),
    (IndicatorSmallParts((1,), ">", 0), 46, "importance"),
    (ProductForm(((1.0, 2.0),)), 100, "importance"),
])
def test_routing_table(weight, n, expected):
    assert route(weight, n) == expected


def test_routing_overrides():
    assert route(Constant(), 10, "crp") == "crp"
    assert route(Macdonald(0.6, 0.3), 12, "sequential") == "sequential"
    for weight, n, name in [(Macdonald(0.6, 0.3), 10, "paintbox"), (IndicatorSmallParts((1,), ">", 0), 5, "sequential"),
                            (Constant(), 46, "enumerated"), (Constant(), 5, "mcmc")]:
        with pytest.raises(RoutingError):
            route(weight, n, name)


def test_exact_part_moments():
    assert exact_mean_parts(1.0, 3) == pytest.approx(11 / 6)
    assert exact_var_parts(1.0, 1) == 0.0


def test_study_grid_validation():
    with pytest.raises(DomainError):
        run_study(1.0, [100, 100], 10, 0)
    with pytest.raises(DomainError):
        run_study(1.0, [1, 10], 10, 0)


def test_study_rows_are_reproducible():
    a = run_study(1.0, [50, 200], 300, 5, Macdonald(0.6, 0.3))
    b = run_study(1.0, [50, 200], 300, 5, Macdonald(0.6, 0.3), workers=3)
    assert a == b
    assert {r.measure for r in a} == {"ewens_paintbox", "ewens", "macdonald"}


def test_fast_suites_run():
    for name in ("coupling", "sensitivity", "bounds"):
        results = run_suite(name, fast=True)
        assert results and all(isinstance(r, CheckResult) and r.passed for r in results)
    assert set(SUITES) == {"coupling", "normalizers", "samplers", "sensitivity", "bounds", "limits"}
    with pytest.raises(KeyError):
        run_suite("everything")
