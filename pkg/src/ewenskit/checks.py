"""Verification suites.

Each check is a function returning a ``CheckResult``; suites group them.
The acceptance tests call the same functions with the full parameters.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import all_feller_strings, feller_counts_matrix
from .measures import (
    Constant,
    IndicatorSmallParts,
    LcsSpec,
    Macdonald,
    MeasureSpec,
    Multiplicative,
    ParityCycles,
    ProductForm,
    envelope_weights,
    ewens_pmf,
    lcs_to_weights,
    lcs_bound_sequences,
    normalizer_enumerate,
    normalizer_recursive,
)
from .oracle import (
    alpha_discrepancy_all,
    enumerate_partitions,
    ewens_table,
    exact_expectation,
    exact_feller_pushforward,
    exact_istar_pmf,
    total_variation,
    weighted_table,
)
from .reference import chi_square_gof, ks_test
from .samplers import (
    RngStream,
    ewens_batch,
    importance_estimate,
    lcs_conditioned_batch,
    multiplicative_sequential_batch,
)
from .statistics import (
    batch_log_lcm,
    batch_log_product,
    batch_num_parts,
    prefix_sensitivity_matrix,
    standardized_count,
)
from .study import ewens_coupled_study, exact_mean_parts, exact_var_parts, sample_measure

THETAS = (0.5, 1.0, 2.0)
# absorbs round-off in sums of logarithms compared against d log n
LOG_SLACK = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "passed": self.passed, "detail": self.detail,
                           "metrics": self.metrics}, sort_keys=True)


def timed(fn: Callable[..., CheckResult]) -> Callable[..., CheckResult]:
    def wrapper(*args, **kwargs):
        t = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def example_weights() -> list:
    """One instance of every weight family, for sweeps."""
    rng = np.random.default_rng(20240611)
    lcs = LcsSpec.poisson(1.0, 25, perturb=lambda i: 0.5 / i**2)
    return [
        Constant(2.5),
        Multiplicative(tuple(rng.uniform(0.2, 2.0, 25))),
        Macdonald(0.6, 0.3),
        lcs_to_weights(lcs),
        IndicatorSmallParts((1,), ">", 0),
        IndicatorSmallParts((1, 1), "<=", 2),
        ParityCycles(even=False),
    ]


# -- coupling ---------------------------------------------------------------


@timed
def coupling_tv(n_max: int = 14, thetas=THETAS, tol: float = 1e-10) -> CheckResult:
    worst, where = 0.0, None
    for theta in thetas:
        for n in range(1, n_max + 1):
            tv = total_variation(exact_feller_pushforward(theta, n), ewens_table(theta, n))
            if tv >= worst:
                worst, where = tv, (theta, n)
    return CheckResult("coupling_tv", worst < tol, f"max TV {worst:.3e} at (theta, n)={where}, need < {tol:g}",
                       {"max_tv": worst})


# -- normalizers ------------------------------------------------------------


@timed
def ewens_normalization(n_max: int = 40, thetas=THETAS, tol: float = 1e-12) -> CheckResult:
    worst = 0.0
    for theta in thetas:
        for n in range(1, n_max + 1):
            s = math.fsum(ewens_pmf(theta, p) for p in enumerate_partitions(n))
            worst = max(worst, abs(s - 1))
    return CheckResult("ewens_normalization", worst <= tol, f"max |sum - 1| = {worst:.3e} for n <= {n_max}",
                       {"max_err": worst})


@timed
def weighted_normalization(n_max: int = 25, thetas=THETAS, tol: float = 1e-12) -> CheckResult:
    worst = 0.0
    for w in example_weights():
        for theta in thetas:
            for n in range(1, n_max + 1):
                t = weighted_table(MeasureSpec(theta, w), n)
                worst = max(worst, abs(t.total() - 1))
    return CheckResult("weighted_normalization", worst <= tol,
                       f"max |sum - 1| = {worst:.3e} over all weight families, n <= {n_max}", {"max_err": worst})


@timed
def normalizer_agreement(n_max: int = 25, thetas=THETAS, tol: float = 1e-10) -> CheckResult:
    worst = 0.0
    for w in (Macdonald(0.6, 0.3), Constant()):
        for theta in thetas:
            table = normalizer_recursive(theta, w, n_max)
            for n in range(1, n_max + 1):
                enum = normalizer_enumerate(MeasureSpec(theta, w), n)
                worst = max(worst, abs(table[n] - enum) / abs(enum))
    return CheckResult("normalizer_agreement", worst < tol, f"max relative error {worst:.3e}, need < {tol:g}",
                       {"max_rel_err": worst})


# -- samplers ---------------------------------------------------------------


@timed
def sampler_chi_square(n: int = 8, theta: float = 1.5, N: int = 1_000_000, seed: int = 2024,
                       alpha: float = 1e-3) -> CheckResult:
    table = ewens_table(theta, n)
    index = {p: k for k, (p, _) in enumerate(table.entries)}
    probs = np.array([pr for _, pr in table.entries])
    draws = {
        "feller": lambda s: ewens_batch(theta, n, N, s, "feller"),
        "crp": lambda s: ewens_batch(theta, n, N, s, "crp"),
        "sequential": lambda s: multiplicative_sequential_batch(theta, Constant(), n, N, s),
        "lcs_conditioned": lambda s: lcs_conditioned_batch(LcsSpec.poisson(theta, n), n, N, s),
    }
    pvals = {}
    for k, (name, fn) in enumerate(draws.items()):
        b = fn(RngStream(seed, k))
        counts = np.zeros(len(probs))
        for p in b:
            counts[index[p]] += 1
        pvals[name] = chi_square_gof(counts, probs).p_value
    ok = all(p > alpha for p in pvals.values())
    detail = ", ".join(f"{k} p={v:.3g}" for k, v in pvals.items())
    return CheckResult("sampler_chi_square", ok, detail + f" (need > {alpha:g})", pvals)


@timed
def importance_coverage(n: int = 12, theta: float = 1.0, N: int = 100_000, seeds: int = 20,
                        need: int = 19) -> CheckResult:
    m = MeasureSpec(theta, Macdonald(0.6, 0.3))
    exact = exact_expectation(m, lambda p: p.num_parts, n)
    hits = 0
    for s in range(seeds):
        est = importance_estimate(m, n, batch_num_parts, N, RngStream(s, 77))
        hits += abs(est.value - exact) < 3 * est.std_error
    return CheckResult("importance_coverage", hits >= need, f"{hits}/{seeds} seeds within 3 SE of {exact:.6f}",
                       {"hits": hits, "exact": exact})


# -- sensitivity ------------------------------------------------------------


@timed
def sensitivity_bounds(n_max: int = 14) -> CheckResult:
    violations = 0
    worst = {"ordered": 0.0, "count": 0.0, "lcm": 0.0, "product": 0.0}
    for n in range(1, n_max + 1):
        bits = all_feller_strings(n)
        logn = math.log(n)
        for d in range(n + 1):
            ordered = prefix_sensitivity_matrix("ordered_scaled_L1norm", bits, d) * n
            count = prefix_sensitivity_matrix("count_path_sup", bits, d)
            lcm = prefix_sensitivity_matrix("loglcm_path_sup", bits, d, mode="lcm")
            prod = prefix_sensitivity_matrix("loglcm_path_sup", bits, d, mode="product")
            violations += int(np.sum(ordered > 2 * d)) + int(np.sum(count > d))
            violations += int(np.sum(lcm > d * logn + LOG_SLACK)) + int(np.sum(prod > d * logn + LOG_SLACK))
            if d:
                worst["ordered"] = max(worst["ordered"], float(ordered.max()) / (2 * d))
                worst["count"] = max(worst["count"], float(count.max()) / d)
                if n > 1:
                    worst["lcm"] = max(worst["lcm"], float(lcm.max()) / (d * logn))
                    worst["product"] = max(worst["product"], float(prod.max()) / (d * logn))
    ratios = ", ".join(f"{k} {v:.3f}" for k, v in worst.items())
    return CheckResult("sensitivity_bounds", violations == 0,
                       f"{violations} violations for n <= {n_max}; max value/bound: {ratios}",
                       {"violations": violations, **worst})


@timed
def feller_count_identity(n_max: int = 14) -> CheckResult:
    """Number of parts equals the number of ones in the string."""
    bad = 0
    for n in range(1, n_max + 1):
        bits = all_feller_strings(n)
        bad += int(np.sum(feller_counts_matrix(bits).sum(axis=1) != bits.sum(axis=1)))
    return CheckResult("feller_count_identity", bad == 0, f"{bad} mismatches for n <= {n_max}")


# -- proof-level bounds -----------------------------------------------------


@timed
def discrepancy_and_istar(n_max: int = 14, thetas=THETAS, tol: float = 1e-12) -> CheckResult:
    violations = 0
    worst_ratio = 0.0
    worst_istar = 0.0
    for theta in thetas:
        for n in range(1, n_max + 1):
            a, b = exact_istar_pmf(theta, n)
            worst_istar = max(worst_istar, float(np.max(np.abs(a - b))))
            if n >= 2:
                rows = alpha_discrepancy_all(theta, n)
                violations += int(np.sum(rows[:, 2] > rows[:, 3]))
                worst_ratio = max(worst_ratio, float(np.max(rows[:, 2] / rows[:, 3])))
    ok = violations == 0 and worst_istar <= tol
    return CheckResult("discrepancy_and_istar", ok,
                       f"{violations} bound violations (max exact/bound {worst_ratio:.3f}); "
                       f"max i* pmf gap {worst_istar:.2e}", {"violations": violations, "istar_gap": worst_istar})


def lcs_bound_specs() -> list[tuple[str, LcsSpec]]:
    out = []
    for theta in THETAS:
        out.append((f"poisson theta={theta}", LcsSpec.poisson(theta, 30)))
        out.append((f"perturbed theta={theta}", LcsSpec.poisson(theta, 30, perturb=lambda i: 0.8 / i)))
        out.append((f"perturbed2 theta={theta}", LcsSpec.poisson(theta, 30, perturb=lambda i: -0.5 / (i + 1) ** 2)))
    return out


def lcs_bound_violations(spec: LcsSpec, tol: float = 1e-12) -> list[str]:
    """Failures of the moment and envelope bounds for ``lcs_to_weights(spec)`` under the rebuilt ``(e', c')``."""
    theta = spec.theta
    zeta = lcs_to_weights(spec)
    e, c = lcs_bound_sequences(spec, zeta)
    env = envelope_weights(theta, e, c)
    lo, hi = env.grids(spec.n, spec.lmax)
    table = zeta.table[:, :spec.lmax + 1]
    bad = []
    if np.any(table[:, 0] != 1):
        bad.append("zeta_i(0) != 1")
    if np.any(np.abs(table[:, 1] - 1) > e / theta + tol):
        bad.append("|zeta_i(1) - 1| > e_i / theta")
    for i in range(1, spec.n + 1):
        for l in range(2, spec.lmax + 1):
            if table[i - 1, l] > env.plus(i, l) * (1 + tol) + tol:
                bad.append(f"upper bound at (i={i}, l={l})")
    if np.any(lo > table + tol) or np.any(table > hi * (1 + tol) + tol):
        bad.append("envelope ordering")
    return bad


@timed
def lcs_weight_bounds() -> CheckResult:
    failures = {name: lcs_bound_violations(spec) for name, spec in lcs_bound_specs()}
    failures = {k: v for k, v in failures.items() if v}
    detail = "all specs satisfy the bounds" if not failures else "; ".join(f"{k}: {v[:3]}" for k, v in failures.items())
    return CheckResult("lcs_weight_bounds", not failures, detail, {"failing_specs": len(failures)})


# -- limit theorems ---------------------------------------------------------


@timed
def clt_moments(n: int = 10_000, N: int = 10_000, theta: float = 1.0, seed: int = 9) -> CheckResult:
    b = ewens_batch(theta, n, N, RngStream(seed, 0))
    nu = b.num_parts().astype(float)
    mean = math.fsum(nu) / N
    var = math.fsum((nu - mean) ** 2) / (N - 1)
    se = math.sqrt(var / N)
    mu, v = exact_mean_parts(theta, n), exact_var_parts(theta, n)
    ok_mean = abs(mean - mu) < 3 * se
    ok_var = abs(var - v) / v < 0.05
    return CheckResult("clt_moments", ok_mean and ok_var,
                       f"mean {mean:.4f} vs {mu:.4f} ({abs(mean - mu) / se:.2f} SE); "
                       f"variance {var:.4f} vs {v:.4f} ({100 * abs(var - v) / v:.2f}%)",
                       {"mean": mean, "exact_mean": mu, "var": var, "exact_var": v})


@timed
def pd_trend(ns=(100, 1000, 10_000), N: int = 10_000, theta: float = 1.0, seed: int = 11,
             final_tol: float = 0.06) -> CheckResult:
    rows = ewens_coupled_study(theta, ns, N, seed)
    ks = [r.value for r in rows if r.quantity == "ks_L1_vs_pd_coupled"]
    dec = all(b < a for a, b in zip(ks, ks[1:]))
    return CheckResult("pd_trend", dec and ks[-1] < final_tol,
                       "KS " + ", ".join(f"{v:.4f}" for v in ks) + f" (strictly decreasing, last < {final_tol})",
                       {"ks": ks})


@timed
def erdos_turan_trend(mode: str, ns=(100, 1000, 10_000), N: int = 2_000_000, theta: float = 1.0,
                      seed: int = 13, rel_tol: float = 0.25, workers: int = 4) -> CheckResult:
    stat = batch_log_lcm if mode == "lcm" else batch_log_product
    ratios = []
    for k, n in enumerate(ns):
        b = ewens_batch(theta, n, N, RngStream(seed, k), workers=workers)
        vals = stat(b)
        ratios.append(math.fsum(vals) / N / (theta * math.log(n) ** 2 / 2))
    inc = all(b > a for a, b in zip(ratios, ratios[1:]))
    close = abs(ratios[-1] - 1) <= rel_tol
    return CheckResult(f"erdos_turan_{mode}", inc and close,
                       "ratios " + ", ".join(f"{r:.4f}" for r in ratios) + f" (increasing, last within {rel_tol:.0%} of 1)",
                       {"ratios": ratios})


@timed
def universality_trend(ns=(100, 1000, 10_000), N: int = 10_000, theta: float = 1.0, seed: int = 17,
                       final_tol: float = 0.05) -> CheckResult:
    ks = []
    for k, n in enumerate(ns):
        ew, _ = sample_measure(MeasureSpec(theta), n, N, RngStream(seed, 2 * k))
        mac, _ = sample_measure(MeasureSpec(theta, Macdonald(0.6, 0.3)), n, N, RngStream(seed, 2 * k + 1))
        ks.append(ks_test(standardized_count(ew, theta), standardized_count(mac, theta)).statistic)
    noninc = all(b <= a for a, b in zip(ks, ks[1:]))
    return CheckResult("universality_trend", noninc and ks[-1] < final_tol,
                       "KS " + ", ".join(f"{v:.4f}" for v in ks) + f" (nonincreasing, last < {final_tol})",
                       {"ks": ks})


SUITES: dict[str, Callable[[bool], list[Callable[[], CheckResult]]]] = {
    "coupling": lambda fast: [lambda: coupling_tv(12 if fast else 14), lambda: feller_count_identity(12 if fast else 14)],
    "normalizers": lambda fast: [
        lambda: ewens_normalization(30 if fast else 40),
        lambda: weighted_normalization(18 if fast else 25),
        lambda: normalizer_agreement(),
    ],
    "samplers": lambda fast: [
        lambda: sampler_chi_square(N=100_000 if fast else 1_000_000),
        lambda: importance_coverage(N=10_000 if fast else 100_000),
    ],
    "sensitivity": lambda fast: [lambda: sensitivity_bounds(12 if fast else 14)],
    "bounds": lambda fast: [lambda: discrepancy_and_istar(12 if fast else 14), lcs_weight_bounds],
    "limits": lambda fast: [
        lambda: clt_moments(N=2_000 if fast else 10_000),
        lambda: pd_trend(N=2_000 if fast else 10_000),
        lambda: erdos_turan_trend("lcm", N=100_000 if fast else 2_000_000),
        lambda: erdos_turan_trend("product", N=100_000 if fast else 2_000_000),
        lambda: universality_trend(N=2_000 if fast else 10_000),
    ],
}


def run_suite(name: str, fast: bool = False) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(name)
    return [check() for check in SUITES[name](fast)]
