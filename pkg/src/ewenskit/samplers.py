"""Random generation of partitions and importance-sampling estimates.

Every sampler has a batch form returning a ``PartitionBatch`` and a
single-draw wrapper returning a ``Partition``.  Reproducibility is organised
around ``RngStream``: a (seed, stream index) pair mapped to an independent
Philox generator.  Large requests are cut into fixed-size blocks, block ``b``
drawing from child stream ``b``, so output never depends on how many
workers produced it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.special import gammaln

from .core import FellerBits, Partition, PartitionBatch
from .errors import ConditioningError, DomainError, EstimateUndefinedError
from .measures import (
    ENUMERATION_CAP,
    LcsSpec,
    MeasureSpec,
    NormalizerTable,
    log_ewens_terms_batch,
    normalizer_recursive,
    partition_table,
)
from .reference import gem_batch

BLOCK_SIZE = 4096
EWENS_METHODS = ("feller", "crp", "paintbox")


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, block: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index, block))
        return np.random.Generator(np.random.Philox(ss))


RngLike = Union[np.random.Generator, RngStream, int]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()


def draw_blocks(fn: Callable[[int, np.random.Generator], PartitionBatch], size: int,
                rng: RngLike, workers: int = 1, block: int = BLOCK_SIZE) -> PartitionBatch:
    """Run ``fn(count, generator)`` over fixed blocks and concatenate in block order.

    A plain ``Generator`` is used directly in one call.  For a seed or an
    ``RngStream`` the request is split into blocks of ``block`` draws, block
    ``b`` using child stream ``b``; the result is the same for any
    ``workers``.
    """
    if isinstance(rng, np.random.Generator):
        return fn(size, rng)
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    counts = [min(block, size - start) for start in range(0, size, block)]

    def run(b: int) -> PartitionBatch:
        return fn(counts[b], stream.child(b))

    if workers > 1 and len(counts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(counts))))
    else:
        parts = [run(b) for b in range(len(counts))]
    return PartitionBatch.concat(parts)


def _ragged(n: int, rows: np.ndarray, sizes: np.ndarray, size: int) -> PartitionBatch:
    order = np.argsort(rows, kind="stable")
    per_row = np.bincount(rows, minlength=size)
    offsets = np.concatenate([[0], np.cumsum(per_row)]).astype(np.int64)
    return PartitionBatch(n, sizes[order].astype(np.int64), offsets)


# -- Feller ------------------------------------------------------------------


def feller_bits_batch(theta: float, n: int, size: int, rng: RngLike) -> np.ndarray:
    """``(size, n)`` independent bits, ``xi_j ~ Bernoulli(theta / (theta + j - 1))``."""
    if not theta > 0:
        raise DomainError("theta must be positive")
    gen = as_generator(rng)
    j = np.arange(1, n + 1)
    return gen.random((size, n)) < theta / (theta + j - 1)


def sample_feller_bits(theta: float, n: int, rng: RngLike) -> FellerBits:
    return FellerBits.of(feller_bits_batch(theta, n, 1, rng)[0].astype(int))


def _feller_skip_batch(theta: float, n: int, size: int, gen: np.random.Generator) -> PartitionBatch:
    # Positions of the ones in a Feller string, jumping from one to the next.
    # With a one at j, P[no one in j+1..k] = exp(g(k) - g(j)),
    # g(k) = log Gamma(k) - log Gamma(theta + k), which is decreasing in k.
    k = np.arange(1, n + 1, dtype=float)
    neg_g = gammaln(theta + k) - gammaln(k)
    rows_out = [np.arange(size)]
    pos_out = [np.ones(size, dtype=np.int64)]
    cur = np.ones(size, dtype=np.int64)
    live = np.arange(size)
    while len(live):
        u = gen.random(len(live))
        with np.errstate(divide="ignore"):
            target = neg_g[cur[live] - 1] - np.log(u)
        nxt = np.searchsorted(neg_g, target, side="right") + 1
        keep = nxt <= n
        live = live[keep]
        cur[live] = nxt[keep]
        rows_out.append(live)
        pos_out.append(nxt[keep])
    rows = np.concatenate(rows_out)
    pos = np.concatenate(pos_out)
    order = np.lexsort((pos, rows))
    rows, pos = rows[order], pos[order]
    nxt = np.empty_like(pos)
    nxt[:-1] = pos[1:]
    last = np.ones(len(pos), dtype=bool)
    last[:-1] = rows[1:] != rows[:-1]
    nxt[last] = n + 1
    return _ragged(n, rows, nxt - pos, size)


def _crp_batch(theta: float, n: int, size: int, gen: np.random.Generator) -> PartitionBatch:
    # Table sizes only; width grows with the largest table count seen.
    tables = np.zeros((size, 4), dtype=np.int64)
    tables[:, 0] = 1
    ntab = np.ones(size, dtype=np.int64)
    for k in range(1, n):
        u = gen.random(size) * (theta + k)
        new = u >= k
        join = np.flatnonzero(~new)
        if len(join):
            cs = np.cumsum(tables[join], axis=1)
            pick = np.argmax(cs > u[join, None], axis=1)
            tables[join, pick] += 1
        opened = np.flatnonzero(new)
        if len(opened):
            if ntab[opened].max() >= tables.shape[1]:
                tables = np.concatenate([tables, np.zeros_like(tables)], axis=1)
            tables[opened, ntab[opened]] = 1
            ntab[opened] += 1
    rows, cols = np.nonzero(tables)
    return _ragged(n, rows, tables[rows, cols], size)


def _paintbox_counts(n: int, sticks: np.ndarray, rest: np.ndarray, theta: float,
                     gen: np.random.Generator) -> np.ndarray:
    pvals = np.concatenate([sticks, rest[:, None]], axis=1)
    pvals /= pvals.sum(axis=1, keepdims=True)
    counts = gen.multinomial(n, pvals)
    spill = np.flatnonzero(counts[:, -1])
    extra = []
    for r in spill:
        # balls in the unbroken remainder see a fresh, rescaled GEM
        m = int(counts[r, -1])
        sub, sub_rest = gem_batch(theta, 1, gen)
        extra.append((r, _paintbox_counts(m, sub, sub_rest, theta, gen)[0]))
    counts = counts[:, :-1]
    if extra:
        width = counts.shape[1]
        counts = np.pad(counts, ((0, 0), (0, max(len(e) for _, e in extra))))
        for r, e in extra:
            counts[r, width:width + len(e)] = e
    return counts


def paintbox_batch(theta: float, ns, size: int, rng: RngLike) -> tuple[list[PartitionBatch], np.ndarray]:
    """Ewens partitions of each ``n`` in ``ns`` from shared Poisson-Dirichlet frequencies.

    Row ``r`` of every returned batch is obtained by dropping ``n`` uniform
    balls into the same GEM(theta) sticks; the block sizes form an exact
    Ewens(theta) partition of ``n``.  The second return value is the largest
    stick of each row, an exact PD(theta) largest component coupled to the
    partitions.
    """
    gen = as_generator(rng)
    sticks, rest = gem_batch(theta, size, gen)
    out = []
    for n in ns:
        counts = _paintbox_counts(int(n), sticks, rest, theta, gen)
        rows, cols = np.nonzero(counts)
        out.append(_ragged(int(n), rows, counts[rows, cols], size))
    return out, np.maximum(sticks.max(axis=1), rest)


def ewens_batch(theta: float, n: int, size: int, rng: RngLike, method: str = "feller",
                workers: int = 1) -> PartitionBatch:
    """``size`` exact Ewens(theta) partitions of ``n``.

    ``feller`` walks the ones of the Feller string (cost proportional to the
    number of parts); ``crp`` seats customers one at a time; ``paintbox``
    drops balls into GEM sticks.
    """
    if not theta > 0:
        raise DomainError("theta must be positive")
    if n < 1:
        raise DomainError("n must be positive")
    if method == "feller":
        fn = lambda k, g: _feller_skip_batch(theta, n, k, g)  # noqa: E731
    elif method == "crp":
        fn = lambda k, g: _crp_batch(theta, n, k, g)  # noqa: E731
    elif method == "paintbox":
        fn = lambda k, g: paintbox_batch(theta, [n], k, g)[0][0]  # noqa: E731
    else:
        raise DomainError(f"unknown Ewens sampler {method!r}")
    return draw_blocks(fn, size, rng, workers)


def sample_ewens(theta: float, n: int, rng: RngLike, method: str = "feller") -> Partition:
    return ewens_batch(theta, n, 1, as_generator(rng), method)[0]


# -- weighted measures ------------------------------------------------------


def exact_pmf_vector(m: MeasureSpec, n: int, cap: int = ENUMERATION_CAP) -> tuple[tuple[Partition, ...], np.ndarray, np.ndarray]:
    """``(partitions, counts, probabilities)`` for every partition of ``n``."""
    from .errors import CapacityError

    if n > cap:
        raise CapacityError(f"n={n} exceeds the enumeration cap {cap}")
    parts, counts = partition_table(n)
    mass = m.weight.on_counts(counts) * np.exp(log_ewens_terms_batch(float(m.theta), counts))
    Z = math.fsum(mass)
    if not Z > 0:
        raise DomainError("every partition has zero weight")
    return parts, counts, mass / Z


def exact_enumerated_batch(m: MeasureSpec, n: int, size: int, rng: RngLike,
                           cap: int = ENUMERATION_CAP, workers: int = 1) -> PartitionBatch:
    _, counts, probs = exact_pmf_vector(m, n, cap)
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]

    def fn(k, g):
        idx = np.searchsorted(cdf, g.random(k), side="right")
        return PartitionBatch.from_counts_matrix(counts[np.minimum(idx, len(cdf) - 1)])

    return draw_blocks(fn, size, rng, workers)


def sample_exact_enumerated(m: MeasureSpec, n: int, rng: RngLike, cap: int = ENUMERATION_CAP) -> Partition:
    return exact_enumerated_batch(m, n, 1, as_generator(rng), cap)[0]


def multiplicative_sequential_batch(theta: float, zeta, n: int, size: int, rng: RngLike,
                                    table: NormalizerTable | None = None,
                                    workers: int = 1) -> PartitionBatch:
    """Multiplicative-weight partitions, one part at a time.

    With ``m`` left to place, the next part has size ``k`` with probability
    ``theta zeta_k h_{m-k} / (m h_m)``.
    """
    if table is None:
        table = normalizer_recursive(theta, zeta, n)
    if table.N < n:
        raise DomainError(f"normalizer table stops at {table.N} < n={n}")
    h = np.asarray(table.values)
    tz = table.theta * np.asarray(table.zetas)
    if not h[n] > 0:
        raise DomainError("h_n = 0: the measure is undefined")

    def fn(count, gen):
        rem = np.full(count, n, dtype=np.int64)
        rows_out, sizes_out = [], []
        live = np.arange(count)
        while len(live):
            u = gen.random(len(live))
            ms, inv = np.unique(rem[live], return_inverse=True)
            pick = np.empty(len(live), dtype=np.int64)
            for j, m in enumerate(ms):
                sel = np.flatnonzero(inv == j)
                cdf = np.cumsum(tz[1:m + 1] * h[m - 1::-1])
                k = np.searchsorted(cdf, u[sel] * cdf[-1], side="right") + 1
                pick[sel] = np.minimum(k, m)
            rows_out.append(live)
            sizes_out.append(pick)
            rem[live] -= pick
            live = live[rem[live] > 0]
        return _ragged(n, np.concatenate(rows_out), np.concatenate(sizes_out), count)

    return draw_blocks(fn, size, rng, workers)


def sample_multiplicative_sequential(theta: float, zeta, n: int, rng: RngLike,
                                     table: NormalizerTable | None = None) -> Partition:
    return multiplicative_sequential_batch(theta, zeta, n, 1, as_generator(rng), table)[0]


def lcs_forward_table(spec: LcsSpec, n: int) -> np.ndarray:
    """``T[i, s] = P[sum_{j<=i} j Y_j = s]`` for ``i, s <= n``, supports cut at ``floor(n/j)``."""
    if spec.n < n:
        raise DomainError(f"spec defines Y_i only up to i={spec.n} < n={n}")
    T = np.zeros((n + 1, n + 1))
    T[0, 0] = 1.0
    for i in range(1, n + 1):
        for l in range(n // i + 1):
            p = spec.prob(i, l)
            if p:
                T[i, i * l:] += p * T[i - 1, :n + 1 - i * l]
    return T


def lcs_conditioned_batch(spec: LcsSpec, n: int, size: int, rng: RngLike, workers: int = 1) -> PartitionBatch:
    """Exact draws of ``(Y_1..Y_n)`` given ``sum i Y_i = n``, by backward sampling."""
    T = lcs_forward_table(spec, n)
    if not T[n, n] > 0:
        raise ConditioningError("P[sum i Y_i = n] = 0")

    def fn(count, gen):
        rem = np.full(count, n, dtype=np.int64)
        counts = np.zeros((count, n + 1), dtype=np.int64)
        for i in range(n, 0, -1):
            ls = np.arange(n // i + 1)
            py = np.array([spec.prob(i, l) for l in ls])
            idx = rem[:, None] - i * ls[None, :]
            w = py[None, :] * np.where(idx >= 0, T[i - 1][np.clip(idx, 0, None)], 0.0)
            cdf = np.cumsum(w, axis=1)
            u = gen.random(count) * cdf[:, -1]
            pick = np.argmax(cdf > u[:, None], axis=1)
            counts[:, i] = pick
            rem -= i * pick
        return PartitionBatch.from_counts_matrix(counts)

    return draw_blocks(fn, size, rng, workers)


def sample_lcs_conditioned(spec: LcsSpec, n: int, rng: RngLike) -> Partition:
    return lcs_conditioned_batch(spec, n, 1, as_generator(rng))[0]


# -- importance sampling -----------------------------------------------------


@dataclass(frozen=True)
class WeightedEstimate:
    value: float
    std_error: float
    ess: float
    n_samples: int


def importance_estimate(m: MeasureSpec, n: int, f: Callable[[PartitionBatch], np.ndarray], N: int,
                        rng: RngLike, method: str = "feller", workers: int = 1) -> WeightedEstimate:
    """Self-normalized estimate of ``E[f]`` under ``m`` from Ewens(theta) proposals.

    ``f`` maps a ``PartitionBatch`` to one value per row.  Weights are
    rescaled by their maximum before summation (so constant weights become
    exactly 1) and all sums are correctly rounded, which makes the result
    independent of worker count.
    """
    if N < 2:
        raise DomainError("need at least two samples")
    batch = ewens_batch(m.theta, n, N, rng, method, workers)
    w = m.weight.batch(batch)
    top = w.max()
    if not top > 0:
        raise EstimateUndefinedError(f"all {N} importance weights are zero", N, int(np.sum(w == 0)))
    w = w / top
    vals = np.asarray(f(batch), dtype=float)
    sw = math.fsum(w)
    est = math.fsum(w * vals) / sw
    var = math.fsum((w * (vals - est)) ** 2) / sw**2
    ess = sw**2 / math.fsum(w * w)
    return WeightedEstimate(est, math.sqrt(var), min(ess, float(N)), N)


def stream_mean(values: np.ndarray) -> float:
    """Correctly rounded mean; the reference accumulation for estimators."""
    return math.fsum(values) / len(values)
