"""Sampler routing and convergence studies over a grid of ``n``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import PartitionBatch
from .errors import DomainError
from .measures import ENUMERATION_CAP, Constant, MeasureSpec, Weight
from .reference import ks_test, pd_largest_batch
from .samplers import (
    EWENS_METHODS,
    RngStream,
    ewens_batch,
    exact_enumerated_batch,
    multiplicative_sequential_batch,
    paintbox_batch,
)
from .statistics import batch_log_lcm, batch_log_product, standardized_count

SEQUENTIAL_CAP = 10_000
SAMPLERS = EWENS_METHODS + ("enumerated", "sequential")


class RoutingError(DomainError):
    """No exact sampler serves this (weight, n) pair."""


def route(weight: Weight, n: int, override: str | None = None) -> str:
    """Pick a sampler name; ``"importance"`` means estimates only.

    Constant weights go to ``feller``.  Multiplicative weights go to
    ``enumerated`` up to the enumeration cap and ``sequential`` up to
    ``SEQUENTIAL_CAP``.  Other weights are enumerated up to the cap and
    importance-only beyond it.
    """
    if override is not None:
        if override not in SAMPLERS:
            raise RoutingError(f"unknown sampler {override!r}; choose from {SAMPLERS}")
        if override in EWENS_METHODS and not isinstance(weight, Constant):
            raise RoutingError(f"{override} samples the Ewens measure only")
        if override == "sequential" and not weight.is_multiplicative:
            raise RoutingError(f"{weight.kind} weights are not multiplicative")
        if override == "enumerated" and n > ENUMERATION_CAP:
            raise RoutingError(f"n={n} exceeds the enumeration cap {ENUMERATION_CAP}")
        return override
    if isinstance(weight, Constant):
        return "feller"
    if n <= ENUMERATION_CAP:
        return "enumerated"
    if weight.is_multiplicative and n <= SEQUENTIAL_CAP:
        return "sequential"
    return "importance"


def draw(m: MeasureSpec, n: int, N: int, rng, sampler: str, workers: int = 1) -> PartitionBatch:
    if sampler in EWENS_METHODS:
        return ewens_batch(m.theta, n, N, rng, sampler, workers)
    if sampler == "enumerated":
        return exact_enumerated_batch(m, n, N, rng, workers=workers)
    if sampler == "sequential":
        return multiplicative_sequential_batch(m.theta, m.weight, n, N, rng, workers=workers)
    raise RoutingError(f"n={n}: {m.weight.kind} weights have no exact sampler here; use importance estimates")


def sample_measure(m: MeasureSpec, n: int, N: int, rng, override: str | None = None,
                   workers: int = 1) -> tuple[PartitionBatch, str]:
    sampler = route(m.weight, n, override)
    return draw(m, n, N, rng, sampler, workers), sampler


def exact_mean_parts(theta: float, n: int) -> float:
    return math.fsum(theta / (theta + i - 1) for i in range(1, n + 1))


def exact_var_parts(theta: float, n: int) -> float:
    p = [theta / (theta + i - 1) for i in range(1, n + 1)]
    return math.fsum(x * (1 - x) for x in p)


def _mean_var(x: np.ndarray) -> tuple[float, float]:
    mean = math.fsum(x) / len(x)
    var = math.fsum((x - mean) ** 2) / (len(x) - 1) if len(x) > 1 else 0.0
    return mean, var


@dataclass(frozen=True)
class StudyRow:
    n: int
    measure: str
    quantity: str
    value: float

    FIELDS = ("n", "measure", "quantity", "value")

    def as_list(self) -> list:
        return [self.n, self.measure, self.quantity, float(self.value)]


def ewens_coupled_study(theta: float, ns: Sequence[int], N: int, seed: int) -> list[StudyRow]:
    """Largest scaled part against the PD(theta) largest component.

    Partitions for every ``n`` come from balls dropped into one shared set of
    GEM sticks whose largest stick is the reference sample, so the KS
    distance isolates the finite-``n`` error from sampling noise.
    """
    batches, pd_max = paintbox_batch(theta, ns, N, RngStream(seed, 1_000_000))
    rows = []
    for n, b in zip(ns, batches):
        l1 = b.largest() / n
        mean, var = _mean_var(l1)
        rows += [
            StudyRow(n, "ewens_paintbox", "L1_scaled_mean", mean),
            StudyRow(n, "ewens_paintbox", "L1_scaled_var", var),
            StudyRow(n, "ewens_paintbox", "ks_L1_vs_pd_coupled", ks_test(l1, pd_max).statistic),
        ]
    return rows


def measure_study(m: MeasureSpec, ns: Sequence[int], N: int, seed: int, label: str,
                  workers: int = 1, override: str | None = None, stream_base: int = 0,
                  reference: dict[int, np.ndarray] | None = None) -> tuple[list[StudyRow], dict[int, np.ndarray]]:
    """Per-``n`` summaries for one measure.

    Returns the rows and the standardized part counts per ``n``; passing the
    latter back in as ``reference`` adds a KS distance against it.
    """
    theta = m.theta
    rows: list[StudyRow] = []
    std: dict[int, np.ndarray] = {}
    for k, n in enumerate(ns):
        b, sampler = sample_measure(m, n, N, RngStream(seed, stream_base + k), override, workers)
        nu = b.num_parts().astype(float)
        nu_mean, nu_var = _mean_var(nu)
        z = standardized_count(b, theta)
        std[n] = z
        scale = theta * math.log(n) ** 2 / 2
        l1 = b.largest() / n
        lcm_mean, _ = _mean_var(batch_log_lcm(b))
        prod_mean, _ = _mean_var(batch_log_product(b))
        pd_ref = pd_largest_batch(theta, N, RngStream(seed, stream_base + 500_000 + k).generator())
        rows += [
            StudyRow(n, label, "sampler:" + sampler, 1.0),
            StudyRow(n, label, "L1_scaled_mean", _mean_var(l1)[0]),
            StudyRow(n, label, "ks_L1_vs_pd", ks_test(l1, pd_ref).statistic),
            StudyRow(n, label, "nu_mean", nu_mean),
            StudyRow(n, label, "nu_var", nu_var),
            StudyRow(n, label, "nu_std_mean", _mean_var(z)[0]),
            StudyRow(n, label, "nu_std_var", _mean_var(z)[1]),
            StudyRow(n, label, "logO_lcm_mean", lcm_mean),
            StudyRow(n, label, "logO_lcm_ratio", lcm_mean / scale),
            StudyRow(n, label, "logO_product_mean", prod_mean),
            StudyRow(n, label, "logO_product_ratio", prod_mean / scale),
        ]
        if reference is not None and n in reference:
            rows.append(StudyRow(n, label, "ks_nu_std_vs_ewens", ks_test(z, reference[n]).statistic))
    return rows, std


def run_study(theta: float, ns: Sequence[int], N: int, seed: int, weight: Weight | None = None,
              workers: int = 1, override: str | None = None) -> list[StudyRow]:
    """Long-format study rows for Ewens and, optionally, one weighted measure."""
    ns = [int(n) for n in ns]
    if any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 2:
        raise DomainError("the n-grid must be strictly increasing and start at 2 or more")
    rows = ewens_coupled_study(theta, ns, N, seed)
    ew_rows, ew_std = measure_study(MeasureSpec(theta), ns, N, seed, "ewens", workers)
    rows += ew_rows
    for n in ns:
        rows.append(StudyRow(n, "ewens", "nu_exact_mean", exact_mean_parts(theta, n)))
        rows.append(StudyRow(n, "ewens", "nu_exact_var", exact_var_parts(theta, n)))
    if weight is not None and not (isinstance(weight, Constant)):
        w_rows, _ = measure_study(MeasureSpec(theta, weight), ns, N, seed, weight.kind, workers,
                                  override, stream_base=len(ns), reference=ew_std)
        rows += w_rows
    return rows
