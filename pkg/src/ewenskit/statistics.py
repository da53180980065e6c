"""Partition functionals: ordered parts, small-part counts, log-lcm paths.

Paths are indexed by ``t`` in ``[0, 1]`` and read the parts of size at
most ``floor(n**t)``, with ``floor(n**0) = 1``.  Each functional has a scalar
form on ``Partition`` and a row-wise form on counts matrices or batches for
exhaustive and Monte Carlo use.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .core import FellerBits, Partition, PartitionBatch, feller_counts_matrix, force_prefix_ones
from .errors import DomainError

DEFAULT_GRID_POINTS = 101
SENSITIVITY_STATS = ("ordered_scaled_L1norm", "count_path_sup", "loglcm_path_sup")


def default_grid(points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def grid_cutoffs(n: int, grid: Sequence[float]) -> np.ndarray:
    """``floor(n**t)`` for each ``t``; a hair of slack absorbs round-off at exact powers."""
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < 0) or np.any(grid > 1):
        raise DomainError("grid must lie in [0, 1]")
    m = np.floor(np.exp(grid * math.log(n)) * (1 + 1e-12)).astype(np.int64)
    return np.clip(m, 1, n)


@lru_cache(maxsize=8)
def smallest_prime_factors(n: int) -> np.ndarray:
    spf = np.zeros(max(n, 1) + 1, dtype=np.int64)
    for p in range(2, n + 1):
        if spf[p] == 0:
            spf[p::p][spf[p::p] == 0] = p
    spf.flags.writeable = False
    return spf


@lru_cache(maxsize=8)
def prime_powers(n: int) -> tuple[tuple[int, int], ...]:
    """``(q, p)`` for every prime power ``q = p**a <= n``."""
    spf = smallest_prime_factors(n)
    out = []
    for p in range(2, n + 1):
        if spf[p] == p:
            q = p
            while q <= n:
                out.append((q, p))
                q *= p
    return tuple(out)


def _factor(m: int, spf: np.ndarray) -> dict[int, int]:
    out: dict[int, int] = {}
    while m > 1:
        p = int(spf[m])
        out[p] = out.get(p, 0) + 1
        m //= p
    return out


def log_lcm(sizes: Sequence[int]) -> float:
    """``log lcm(sizes)`` from maximal prime exponents; the empty lcm is 1."""
    sizes = [int(s) for s in sizes]
    if not sizes:
        return 0.0
    spf = smallest_prime_factors(max(sizes))
    best: dict[int, int] = {}
    for s in set(sizes):
        for p, a in _factor(s, spf).items():
            if a > best.get(p, 0):
                best[p] = a
    return math.fsum(a * math.log(p) for p, a in best.items())


@dataclass(frozen=True)
class OrderedParts:
    parts: tuple[int, ...]
    n: int

    @property
    def scaled(self) -> np.ndarray:
        return np.asarray(self.parts, dtype=float) / self.n


def ordered_parts(p: Partition) -> OrderedParts:
    return OrderedParts(tuple(p.parts()), p.n)


@dataclass(frozen=True, eq=False)
class StatPath:
    grid: np.ndarray
    values: np.ndarray
    n: int
    kind: str = "raw"
    stat: str = "count"
    theta: float = 1.0
    mode: str = ""

    def __post_init__(self):
        if len(self.grid) != len(self.values):
            raise DomainError("grid and values differ in length")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# n={self.n},theta={self.theta!r},kind={self.kind},stat={self.stat},mode={self.mode}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value"])
        for t, v in zip(self.grid, self.values):
            w.writerow([repr(float(t)), repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "StatPath":
        lines = text.splitlines()
        meta = dict(kv.split("=", 1) for kv in lines[0].lstrip("# ").split(","))
        rows = list(csv.reader(lines[2:]))
        grid = np.array([float(r[0]) for r in rows])
        values = np.array([float(r[1]) for r in rows])
        return cls(grid, values, int(meta["n"]), meta["kind"], meta["stat"], float(meta["theta"]), meta["mode"])

    def __eq__(self, other):
        return (isinstance(other, StatPath) and self.n == other.n and self.kind == other.kind
                and self.stat == other.stat and self.mode == other.mode and self.theta == other.theta
                and np.array_equal(self.grid, other.grid) and np.array_equal(self.values, other.values))


def count_path(p: Partition, grid: Sequence[float] | None = None, normalize: bool = False,
               theta: float = 1.0) -> StatPath:
    """``nu_{n,t}``, the number of parts of size at most ``n**t``.

    Normalized: ``(nu - theta t log n) / sqrt(theta log n)``.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    n = p.n
    if normalize and n < 2:
        raise DomainError("normalization needs n >= 2")
    cum = np.cumsum(np.asarray(p.counts))
    values = cum[grid_cutoffs(n, grid) - 1].astype(float)
    if normalize:
        ln = math.log(n)
        values = (values - theta * grid * ln) / math.sqrt(theta * ln)
    return StatPath(grid, values, n, "normalized" if normalize else "raw", "count", theta)


def loglcm_path(p: Partition, grid: Sequence[float] | None = None, mode: str = "lcm",
                normalize: bool = False, theta: float = 1.0) -> StatPath:
    """``log O_{n,t}`` for the lcm (or product) of parts of size at most ``n**t``.

    Normalized: ``(log O - theta t^2 (log n)^2 / 2) / sqrt(theta (log n)^3 / 3)``.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    n = p.n
    if normalize and n < 2:
        raise DomainError("normalization needs n >= 2")
    sizes = [s for s, _ in p.items]
    if mode == "product":
        steps = np.cumsum([a * math.log(s) for s, a in p.items])
    elif mode == "lcm":
        spf = smallest_prime_factors(n)
        best: dict[int, int] = {}
        acc = 0.0
        steps = []
        for s in sizes:
            for q, a in _factor(s, spf).items():
                if a > best.get(q, 0):
                    acc += (a - best.get(q, 0)) * math.log(q)
                    best[q] = a
            steps.append(acc)
        steps = np.asarray(steps)
    else:
        raise DomainError(f"unknown mode {mode!r}")
    cut = grid_cutoffs(n, grid)
    idx = np.searchsorted(np.asarray(sizes), cut, side="right")
    values = np.where(idx > 0, np.concatenate([[0.0], steps])[idx], 0.0)
    if normalize:
        ln = math.log(n)
        values = (values - theta * grid**2 * ln**2 / 2) / math.sqrt(theta * ln**3 / 3)
    return StatPath(grid, values, n, "normalized" if normalize else "raw", "loglcm", theta, mode)


# -- row-wise forms ---------------------------------------------------------


def ordered_parts_matrix(counts: np.ndarray) -> np.ndarray:
    """Parts in nonincreasing order, zero padded to width ``n``.

    The ``k``-th largest part is the number of sizes ``i`` whose tail count
    ``sum_{j >= i} alpha_j`` is at least ``k``.
    """
    counts = np.asarray(counts)
    n = counts.shape[1] - 1
    tail = np.cumsum(counts[:, :0:-1], axis=1)[:, ::-1]
    k = np.arange(1, n + 1)
    return (tail[:, :, None] >= k[None, None, :]).sum(axis=1)


def count_paths_matrix(counts: np.ndarray, cutoffs: np.ndarray) -> np.ndarray:
    cum = np.cumsum(counts, axis=1)
    return cum[:, cutoffs]


def loglcm_paths_matrix(counts: np.ndarray, cutoffs: np.ndarray, mode: str = "lcm") -> np.ndarray:
    counts = np.asarray(counts)
    n = counts.shape[1] - 1
    i = np.arange(n + 1)
    if mode == "product":
        logs = np.log(np.maximum(i, 1))
        return np.cumsum(counts * logs, axis=1)[:, cutoffs]
    if mode != "lcm":
        raise DomainError(f"unknown mode {mode!r}")
    present = counts > 0
    out = np.zeros(counts.shape, dtype=float)
    for q, p in prime_powers(n):
        hit = present & (i % q == 0)[None, :]
        out += math.log(p) * np.maximum.accumulate(hit, axis=1)
    return out[:, cutoffs]


def prefix_sensitivity_matrix(stat: str, bits: np.ndarray, d: int, grid: Sequence[float] | None = None,
                              mode: str = "lcm") -> np.ndarray:
    """``prefix_sensitivity`` for every row of a ``(S, n)`` bit matrix."""
    bits = np.asarray(bits, dtype=bool)
    n = bits.shape[1]
    if not 0 <= d <= n:
        raise DomainError(f"prefix length {d} outside 0..{n}")
    forced = bits.copy()
    forced[:, :d] = True
    a = feller_counts_matrix(bits)
    b = feller_counts_matrix(forced)
    if stat == "ordered_scaled_L1norm":
        return np.abs(ordered_parts_matrix(a) - ordered_parts_matrix(b)).sum(axis=1) / n
    cut = grid_cutoffs(n, default_grid() if grid is None else grid)
    if stat == "count_path_sup":
        return np.abs(count_paths_matrix(a, cut) - count_paths_matrix(b, cut)).max(axis=1).astype(float)
    if stat == "loglcm_path_sup":
        return np.abs(loglcm_paths_matrix(a, cut, mode) - loglcm_paths_matrix(b, cut, mode)).max(axis=1)
    raise DomainError(f"unknown statistic {stat!r}")


def prefix_sensitivity(stat: str, bits: FellerBits, d: int, grid: Sequence[float] | None = None,
                       mode: str = "lcm") -> float:
    """Distance between a functional of ``bits`` and of ``bits`` with its first ``d`` entries set to 1."""
    force_prefix_ones(bits, d)  # range check
    row = np.asarray(bits.bits, dtype=bool)[None, :]
    return float(prefix_sensitivity_matrix(stat, row, d, grid, mode)[0])


# -- batch statistics at t = 1 ----------------------------------------------


def batch_log_lcm(b: PartitionBatch) -> np.ndarray:
    rows, sizes, _ = b.triples()
    spf = smallest_prime_factors(b.n)
    # repeated division by the smallest prime factor gives (row, p, a) triples
    r_all, p_all, a_all = [], [], []
    cur = sizes.copy()
    live = cur > 1
    r, cur = rows[live], cur[live]
    while len(cur):
        p = spf[cur]
        a = np.zeros(len(cur), dtype=np.int64)
        while True:
            div = cur % p == 0
            if not div.any():
                break
            a += div
            cur = np.where(div, cur // p, cur)
        r_all.append(r)
        p_all.append(p)
        a_all.append(a)
        live = cur > 1
        r, cur = r[live], cur[live]
    if not r_all:
        return np.zeros(len(b))
    r = np.concatenate(r_all)
    p = np.concatenate(p_all)
    a = np.concatenate(a_all)
    key = r * (b.n + 1) + p
    order = np.lexsort((a, key))
    key, a = key[order], a[order]
    last = np.ones(len(key), dtype=bool)
    last[:-1] = key[1:] != key[:-1]
    # sorted by exponent inside each key, so the last entry is the max
    key, a = key[last], a[last]
    return np.bincount(key // (b.n + 1), weights=a * np.log(key % (b.n + 1)), minlength=len(b))


def batch_log_product(b: PartitionBatch) -> np.ndarray:
    return np.bincount(b.row_index(), weights=np.log(b.sizes), minlength=len(b))


def batch_num_parts(b: PartitionBatch) -> np.ndarray:
    return b.num_parts().astype(float)


def batch_largest_scaled(b: PartitionBatch) -> np.ndarray:
    return b.largest() / b.n


def batch_alpha(i: int) -> Callable[[PartitionBatch], np.ndarray]:
    def f(b: PartitionBatch) -> np.ndarray:
        return np.bincount(b.row_index(), weights=(b.sizes == i).astype(float), minlength=len(b))

    f.__name__ = f"alpha_{i}"
    return f


def standardized_count(b: PartitionBatch, theta: float) -> np.ndarray:
    ln = math.log(b.n)
    return (b.num_parts() - theta * ln) / math.sqrt(theta * ln)


STATISTICS: dict[str, Callable[[PartitionBatch], np.ndarray]] = {
    "num_parts": batch_num_parts,
    "largest_scaled": batch_largest_scaled,
    "log_lcm": batch_log_lcm,
    "log_product": batch_log_product,
    "alpha_1": batch_alpha(1),
    "alpha_2": batch_alpha(2),
}


def statistic(name: str) -> Callable[[PartitionBatch], np.ndarray]:
    try:
        return STATISTICS[name]
    except KeyError:
        raise DomainError(f"unknown statistic {name!r}; choose from {sorted(STATISTICS)}") from None
