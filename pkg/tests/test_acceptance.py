"""Acceptance criteria 1-13 at full size.

Each test records one PASS/FAIL line, collected again in the
"acceptance criteria" section of the pytest terminal summary.
"""

import time

import pytest

from ewenskit import checks
from ewenskit.checks import CheckResult
from ewenskit.cli import main

pytestmark = pytest.mark.acceptance


def _within(result: CheckResult, seconds: float) -> CheckResult:
    if result.seconds >= seconds:
        result.passed = False
        result.detail += f"; runtime {result.seconds:.1f}s over the {seconds:.0f}s budget"
    return result


def _merge(name: str, parts: list[CheckResult]) -> CheckResult:
    return CheckResult(name, all(p.passed for p in parts), "; ".join(p.line() for p in parts),
                       seconds=sum(p.seconds for p in parts))


def test_criterion_01_coupling_exactness(record_criterion):
    res = _within(checks.coupling_tv(n_max=14), 30)
    record_criterion(1, res)
    assert res.passed, res.detail


def test_criterion_02_normalization(record_criterion):
    res = _merge("normalization", [checks.ewens_normalization(40), checks.weighted_normalization(25)])
    record_criterion(2, res)
    assert res.passed, res.detail


def test_criterion_03_normalizer_recursion(record_criterion):
    res = checks.normalizer_agreement(25)
    record_criterion(3, res)
    assert res.passed, res.detail


def test_criterion_04_sampler_agreement(record_criterion):
    res = _within(checks.sampler_chi_square(n=8, theta=1.5, N=1_000_000), 120)
    record_criterion(4, res)
    assert res.passed, res.detail


def test_criterion_05_importance_sampling(record_criterion):
    res = checks.importance_coverage(n=12, theta=1.0, N=100_000, seeds=20, need=19)
    record_criterion(5, res)
    assert res.passed, res.detail


def test_criterion_06_sensitivity_bounds(record_criterion):
    res = checks.sensitivity_bounds(14)
    record_criterion(6, res)
    assert res.passed, res.detail


def test_criterion_07_discrepancy_and_final_gap(record_criterion):
    res = checks.discrepancy_and_istar(14)
    record_criterion(7, res)
    assert res.passed, res.detail


def test_criterion_08_lcs_weight_bounds(record_criterion):
    res = checks.lcs_weight_bounds()
    record_criterion(8, res)
    assert res.passed, res.detail


def test_criterion_09_clt_moments(record_criterion):
    res = _within(checks.clt_moments(n=10_000, N=10_000, theta=1.0), 60)
    record_criterion(9, res)
    assert res.passed, res.detail


def test_criterion_10_pd_trend(record_criterion):
    res = checks.pd_trend((100, 1000, 10_000), N=10_000, theta=1.0, final_tol=0.06)
    record_criterion(10, res)
    assert res.passed, res.detail


def test_criterion_11_erdos_turan_trend(record_criterion):
    # the group order is the lcm of the parts
    res = checks.erdos_turan_trend("lcm", (100, 1000, 10_000), theta=1.0, rel_tol=0.25)
    record_criterion(11, res)
    assert res.passed, res.detail


def test_criterion_12_universality(record_criterion):
    res = checks.universality_trend((100, 1000, 10_000), N=10_000, theta=1.0, final_tol=0.05)
    record_criterion(12, res)
    assert res.passed, res.detail


def _cli_bytes(tmp_path, argv: list[str], tag: str) -> bytes:
    out = tmp_path / f"{tag}.out"
    rc = main(argv + ["--out", str(out)])
    assert rc in (0, 1), f"{argv} exited {rc}"
    return out.read_bytes()


CLI_COMMANDS = {
    "sample_ewens": (["sample", "--theta", "1", "--n", "100", "--N", "3000", "--seed", "7"], True),
    "sample_crp": (["sample", "--theta", "2", "--n", "60", "--N", "5000", "--seed", "7", "--sampler", "crp"], True),
    "sample_paintbox": (["sample", "--theta", "1", "--n", "200", "--N", "5000", "--seed", "7",
                         "--sampler", "paintbox"], True),
    "sample_enumerated": (["sample", "--weight", "{mac}", "--n", "12", "--N", "5000", "--seed", "1"], True),
    "sample_sequential": (["sample", "--weight", "{mac}", "--n", "300", "--N", "5000", "--seed", "1"], True),
    "sample_estimate": (["sample", "--weight", "{par}", "--n", "100", "--N", "20000", "--seed", "1",
                         "--estimate", "log_lcm"], True),
    "exact_pmf": (["exact", "pmf", "--theta", "3/2", "--n", "10", "--rational"], False),
    "exact_weighted": (["exact", "pmf", "--weight", "{mac}", "--n", "10"], False),
    "exact_pushforward": (["exact", "pushforward", "--theta", "1", "--n", "10"], False),
    "exact_istar": (["exact", "istar", "--theta", "0.5", "--n", "12"], False),
    "exact_expectation": (["exact", "expectation", "--weight", "{mac}", "--n", "15", "--stat", "log_lcm"], False),
    "verify": (["verify", "sensitivity", "--fast", "--format", "jsonl"], False),
    "study": (["study", "--theta", "1", "--n-grid", "100,1000", "--N", "2000", "--seed", "3",
               "--weight", "{mac}", "--format", "jsonl"], True),
}


def test_criterion_13_cli_determinism(record_criterion, tmp_path):
    import json

    from ewenskit.measures import Macdonald, ParityCycles

    mac = tmp_path / "mac.json"
    mac.write_text(json.dumps(Macdonald(0.6, 0.3).to_dict()))
    par = tmp_path / "par.json"
    par.write_text(json.dumps(ParityCycles(even=True).to_dict()))
    start = time.perf_counter()
    mismatched = []
    for name, (argv, parallel) in CLI_COMMANDS.items():
        argv = [a.format(mac=mac, par=par) for a in argv]
        first = _cli_bytes(tmp_path, argv, f"{name}_a")
        again = _cli_bytes(tmp_path, argv, f"{name}_b")
        outputs = [first, again]
        if parallel:
            outputs.append(_cli_bytes(tmp_path, argv + ["--workers", "4"], f"{name}_w4"))
            outputs.append(_cli_bytes(tmp_path, argv + ["--workers", "1"], f"{name}_w1"))
        if not first or any(o != first for o in outputs):
            mismatched.append(name)
    res = CheckResult("cli_determinism", not mismatched,
                      f"{len(CLI_COMMANDS) - len(mismatched)}/{len(CLI_COMMANDS)} commands byte-identical"
                      + (f"; differing: {', '.join(mismatched)}" if mismatched else ""),
                      seconds=time.perf_counter() - start)
    record_criterion(13, res)
    assert res.passed, res.detail
