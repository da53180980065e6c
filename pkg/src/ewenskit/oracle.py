"""Exact small-n computations by brute force over partitions and bit strings.

Everything here is finite and exhaustive.  String sums group the
``2**(n-1)`` Feller strings with a leading one (the first bit is 1 with
probability 1) and either accumulate floats in full precision or, for
rational ``theta`` with ``exact=True``, integer numerators over the common
denominator ``prod_j (a + b (j - 1))`` where ``theta = a / b``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Sequence, Union

import numpy as np

from .core import Partition, PartitionBatch, all_feller_strings, feller_counts_matrix, partitions_of
from .errors import CapacityError, DomainError, OracleMismatchError
from .measures import (
    Constant,
    MeasureSpec,
    ewens_pmf,
    log_ewens_terms_batch,
    normalizer_enumerate,
    partition_table,
    rising_factorial,
)

PARTITION_CAP = 60
STRING_CAP = 20
RATIO_TOLERANCE = 1e-10

Prob = Union[float, Fraction]


def _check_strings(n: int) -> None:
    if not 1 <= n <= STRING_CAP:
        raise CapacityError(f"n={n} outside 1..{STRING_CAP} for exhaustive string sums")


def enumerate_partitions(n: int) -> Iterator[Partition]:
    """All partitions of ``n``, from ``(n)`` down to ``(1, ..., 1)``."""
    if n > PARTITION_CAP:
        raise CapacityError(f"n={n} exceeds the partition cap {PARTITION_CAP}")
    return partitions_of(n)


@dataclass(frozen=True)
class ExactPmfTable:
    n: int
    entries: tuple[tuple[Partition, Prob], ...]
    theta: float
    digest: str = Constant().digest()

    def total(self) -> Prob:
        vals = [p for _, p in self.entries]
        if all(isinstance(v, Fraction) for v in vals):
            return sum(vals, Fraction(0))
        return math.fsum(float(v) for v in vals)

    def as_dict(self) -> dict[Partition, Prob]:
        return dict(self.entries)

    def to_csv(self, rational: bool | None = None) -> str:
        """CSV with columns ``partition,probability``.

        Probabilities are written as ``a/b`` when rational (the default for
        ``Fraction`` entries) and as round-trip decimals otherwise.
        """
        buf = io.StringIO()
        buf.write(f"# n={self.n},theta={self.theta!r},weight={self.digest}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["partition", "probability"])
        for part, prob in self.entries:
            as_rational = isinstance(prob, Fraction) if rational is None else rational
            text = str(Fraction(prob)) if as_rational else repr(float(prob))
            w.writerow([str(part), text])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ExactPmfTable":
        lines = text.splitlines()
        meta = dict(kv.split("=", 1) for kv in lines[0].lstrip("# ").split(","))
        entries = []
        for part, prob in csv.reader(lines[2:]):
            value: Prob = Fraction(prob) if "/" in prob or prob.isdigit() else float(prob)
            entries.append((Partition.parse(part), value))
        return cls(int(meta["n"]), tuple(entries), float(meta["theta"]), meta["weight"])


def total_variation(a: ExactPmfTable, b: ExactPmfTable) -> float:
    da, db = a.as_dict(), b.as_dict()
    keys = set(da) | set(db)
    return 0.5 * math.fsum(abs(float(da.get(k, 0)) - float(db.get(k, 0))) for k in keys)


def ewens_table(theta, n: int, exact: bool = False) -> ExactPmfTable:
    """``ewens_pmf`` over every partition of ``n``."""
    entries = tuple((p, ewens_pmf(theta, p, exact=exact)) for p in enumerate_partitions(n))
    return ExactPmfTable(n, entries, float(theta))


def weighted_table(m: MeasureSpec, n: int) -> ExactPmfTable:
    parts, counts = _table(n)
    eta = m.weight.on_counts(counts)
    mass = eta * np.exp(log_ewens_terms_batch(float(m.theta), counts))
    Z = math.fsum(mass)
    if not Z > 0:
        raise DomainError("normalizer vanishes; the weighted measure is undefined")
    return ExactPmfTable(n, tuple(zip(parts, (float(x) / Z for x in mass))), float(m.theta), m.weight.digest())


def _table(n: int):
    if n > PARTITION_CAP:
        raise CapacityError(f"n={n} exceeds the partition cap {PARTITION_CAP}")
    return partition_table(n)


def _string_masses(theta, n: int, exact: bool) -> tuple[np.ndarray, list | np.ndarray]:
    """All strings with a leading one and their probabilities."""
    bits = all_feller_strings(n)
    if exact:
        th = Fraction(theta)
        a, b = th.numerator, th.denominator
        denom = 1
        for j in range(2, n + 1):
            denom *= a + b * (j - 1)
        num = np.ones(len(bits), dtype=object)
        for j in range(2, n + 1):
            num = num * np.where(bits[:, j - 1], a, b * (j - 1)).astype(object)
        return bits, [Fraction(int(x), denom) for x in num]
    theta = float(theta)
    j = np.arange(1, n + 1)
    p = theta / (theta + j - 1)
    with np.errstate(divide="ignore"):
        logm = np.where(bits, np.log(p), np.log1p(-p))
    logm[:, 0] = 0.0  # xi_1 = 1 surely
    return bits, np.exp(logm.sum(axis=1))


def _group(values: Sequence[Prob], keys: np.ndarray, n_keys: int, exact: bool) -> list[Prob]:
    if exact:
        out: list[Prob] = [Fraction(0)] * n_keys
        for k, v in zip(keys.tolist(), values):
            out[k] += v
        return out
    buckets: list[list[float]] = [[] for _ in range(n_keys)]
    for k, v in zip(keys.tolist(), values):
        buckets[k].append(v)
    return [math.fsum(bk) for bk in buckets]


def exact_feller_pushforward(theta, n: int, exact: bool = False) -> ExactPmfTable:
    """Law of the Feller image, summed over all strings with a leading one."""
    _check_strings(n)
    if not theta > 0:
        raise DomainError("theta must be positive")
    bits, mass = _string_masses(theta, n, exact)
    counts = feller_counts_matrix(bits)
    uniq, inv = np.unique(counts, axis=0, return_inverse=True)
    probs = _group(list(mass), inv.reshape(-1), len(uniq), exact)
    entries = [(Partition.from_counts(row[1:].tolist(), n), pr) for row, pr in zip(uniq, probs)]
    # same order as enumerate_partitions
    order = {p: r for r, p in enumerate(_table(n)[0])}
    entries.sort(key=lambda e: order[e[0]])
    return ExactPmfTable(n, tuple(entries), float(theta))


def exact_expectation(m: MeasureSpec, f: Callable, n: int) -> float:
    """``E[f]`` under the weighted measure.

    ``f`` maps a ``Partition`` to a number, or a ``PartitionBatch`` to an
    array when it carries ``batch = True``.
    """
    parts, counts = _table(n)
    eta = m.weight.on_counts(counts)
    mass = eta * np.exp(log_ewens_terms_batch(float(m.theta), counts))
    Z = math.fsum(mass)
    if not Z > 0:
        raise DomainError("normalizer vanishes; the weighted measure is undefined")
    if getattr(f, "batch", False):
        vals = np.asarray(f(PartitionBatch.from_partitions(parts)), dtype=float)
    else:
        vals = np.array([float(f(p)) for p in parts])
    return math.fsum(vals * mass) / Z


def istar_formula(theta: float, n: int) -> np.ndarray:
    """``P[i* = k]`` for ``k = 1..n`` from the closed product form."""
    out = np.empty(n)
    for k in range(1, n + 1):
        prod = theta / (theta + n - k)
        for j in range(n - k + 2, n + 1):
            prod *= (j - 1) / (theta + j - 1)
        out[k - 1] = prod
    return out


def exact_istar_pmf(theta: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``(exhaustive, formula)`` laws of the final gap size, index ``k - 1``."""
    _check_strings(n)
    bits, mass = _string_masses(theta, n, False)
    last = n - 1 - np.argmax(bits[:, ::-1], axis=1)
    k = n - last
    exhaustive = np.array(_group(list(mass), k - 1, n, False))
    return exhaustive, istar_formula(float(theta), n)


def discrepancy_bound(theta: float, d: int, i: int) -> float:
    return (2 * theta + theta**2) / (d - i + theta)


def alpha_discrepancy_exact(theta: float, n: int, d: int, i: int) -> tuple[float, float]:
    """``(P[alpha_i(n) != alpha_i(d)], bound)``.

    ``alpha(d)`` is the Feller image of the first ``d`` bits.
    """
    _check_strings(n)
    if not 1 <= i <= d < n:
        raise DomainError(f"need 1 <= i <= d < n, got i={i}, d={d}, n={n}")
    bits, mass = _string_masses(theta, n, False)
    full = feller_counts_matrix(bits)[:, i]
    prefix = feller_counts_matrix(bits[:, :d])[:, i]
    return math.fsum(mass[full != prefix]), discrepancy_bound(theta, d, i)


def alpha_discrepancy_all(theta: float, n: int) -> np.ndarray:
    """Rows ``(d, i, exact, bound)`` for every valid pair at this ``n``."""
    _check_strings(n)
    bits, mass = _string_masses(theta, n, False)
    full = feller_counts_matrix(bits)
    rows = []
    for d in range(1, n):
        prefix = feller_counts_matrix(bits[:, :d])
        for i in range(1, d + 1):
            rows.append((d, i, math.fsum(mass[full[:, i] != prefix[:, i]]), discrepancy_bound(theta, d, i)))
    return np.array(rows)


def exact_eta_ratio(m: MeasureSpec, n: int, rtol: float = RATIO_TOLERANCE) -> tuple[float, float]:
    """``E_F[eta(alpha(n))]`` by string summation and ``Z^eta / Z`` by enumeration.

    Raises ``OracleMismatchError`` when they differ by more than ``rtol``.
    """
    _check_strings(n)
    bits, mass = _string_masses(m.theta, n, False)
    eta = m.weight.on_counts(feller_counts_matrix(bits))
    by_strings = math.fsum(eta * mass)
    z_ewens = float(rising_factorial(float(m.theta), n)) / math.factorial(n)
    by_enum = normalizer_enumerate(m, n) / z_ewens
    scale = max(abs(by_strings), abs(by_enum))
    if abs(by_strings - by_enum) > rtol * scale:
        raise OracleMismatchError(f"string sum {by_strings!r} vs enumeration {by_enum!r}")
    return by_strings, by_enum


__all__ = [
    "PARTITION_CAP",
    "STRING_CAP",
    "ExactPmfTable",
    "alpha_discrepancy_all",
    "alpha_discrepancy_exact",
    "discrepancy_bound",
    "enumerate_partitions",
    "ewens_table",
    "exact_eta_ratio",
    "exact_expectation",
    "exact_feller_pushforward",
    "exact_istar_pmf",
    "istar_formula",
    "total_variation",
    "weighted_table",
]
