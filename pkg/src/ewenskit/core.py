"""Partitions, Feller bit strings and the Feller coupling map.

A partition of ``n`` is stored by its cycle type: ``counts[i-1]`` is the
number of parts of size ``i``.  Internally only the nonzero multiplicities
are kept, so a partition of ``10**7`` with a dozen parts is cheap; the dense
``counts`` view is built on demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "Partition",
    "FellerBits",
    "TruncatedCounts",
    "feller_map",
    "feller_truncate",
    "feller_tilde",
    "final_gap_size",
    "force_prefix_ones",
    "feller_counts_matrix",
    "all_feller_strings",
    "partitions_of",
    "PartitionBatch",
]


def _sparse_from_dense(counts: Sequence[int]) -> tuple[tuple[int, int], ...]:
    items = []
    for i, a in enumerate(counts, start=1):
        a = int(a)
        if a < 0:
            raise DomainError(f"negative count {a} at index {i}")
        if a:
            items.append((i, a))
    return tuple(items)


@dataclass(frozen=True)
class Partition:
    """An integer partition of ``n`` in multiplicity form.

    ``items`` holds ``(size, multiplicity)`` pairs sorted by size with
    positive multiplicities only; this is also the canonical form used for
    equality, hashing and serialization.
    """

    n: int
    items: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("partition of a non-positive integer")
        total = 0
        last = 0
        for size, mult in self.items:
            if size <= last or mult <= 0:
                raise DomainError(f"non-canonical items {self.items!r}")
            last = size
            total += size * mult
        if total != self.n:
            raise DomainError(f"sum of parts is {total}, expected {self.n}")

    @classmethod
    def from_counts(cls, counts: Sequence[int], n: int | None = None) -> "Partition":
        """Build from a dense count vector ``(alpha_1, ..., alpha_m)``."""
        items = _sparse_from_dense(counts)
        if n is None:
            n = sum(i * a for i, a in items)
        return cls(n, items)

    @classmethod
    def from_parts(cls, parts: Iterable[int]) -> "Partition":
        mult: dict[int, int] = {}
        for p in parts:
            p = int(p)
            if p < 1:
                raise DomainError(f"part size {p} < 1")
            mult[p] = mult.get(p, 0) + 1
        items = tuple(sorted(mult.items()))
        return cls(sum(s * m for s, m in items), items)

    def count(self, i: int) -> int:
        for size, mult in self.items:
            if size == i:
                return mult
            if size > i:
                break
        return 0

    @property
    def counts(self) -> tuple[int, ...]:
        dense = [0] * self.n
        for size, mult in self.items:
            dense[size - 1] = mult
        return tuple(dense)

    @property
    def num_parts(self) -> int:
        return sum(m for _, m in self.items)

    def parts(self) -> list[int]:
        """Part sizes in nonincreasing order."""
        out: list[int] = []
        for size, mult in reversed(self.items):
            out.extend([size] * mult)
        return out

    def __str__(self) -> str:
        body = ",".join(f"{s}:{m}" for s, m in self.items)
        return f"n={self.n};counts={body}"

    @classmethod
    def parse(cls, text: str) -> "Partition":
        """Inverse of ``str``: ``"n=9;counts=1:2,3:1,4:1"``."""
        try:
            head, body = text.strip().split(";")
            key, n_text = head.split("=")
            ckey, pairs = body.split("=", 1)
            if key != "n" or ckey != "counts":
                raise ValueError
            items = []
            for pair in filter(None, pairs.split(",")):
                s, m = pair.split(":")
                items.append((int(s), int(m)))
        except ValueError:
            raise DomainError(f"cannot parse partition {text!r}") from None
        return cls(int(n_text), tuple(items))


@dataclass(frozen=True)
class TruncatedCounts:
    """Counts ``alpha_1..alpha_m`` of a partition of ``k``, possibly ``k < n``."""

    m: int
    counts: tuple[int, ...]
    k: int

    def __post_init__(self):
        if len(self.counts) != self.m:
            raise DomainError("counts length differs from m")
        if sum(i * a for i, a in enumerate(self.counts, start=1)) != self.k:
            raise DomainError("k does not match the counts")

    @property
    def items(self) -> tuple[tuple[int, int], ...]:
        return _sparse_from_dense(self.counts)

    def count(self, i: int) -> int:
        return self.counts[i - 1] if 1 <= i <= self.m else 0

    @property
    def num_parts(self) -> int:
        return sum(self.counts)

    def as_partition(self) -> Partition:
        if self.k < 1:
            raise DomainError("empty truncated counts are not a partition")
        return Partition(self.k, self.items)


@dataclass(frozen=True)
class FellerBits:
    """A finite 0/1 string ``xi_1 .. xi_n``."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if not self.bits:
            raise DomainError("empty bit string")
        if any(b not in (0, 1) for b in self.bits):
            raise DomainError("bits must be 0 or 1")

    @classmethod
    def of(cls, bits: Iterable[int]) -> "FellerBits":
        return cls(tuple(int(b) for b in bits))

    @property
    def n(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(map(str, self.bits))

    @classmethod
    def parse(cls, text: str) -> "FellerBits":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise DomainError(f"cannot parse bit string {text!r}")
        return cls(tuple(int(c) for c in text))


def _gap_counts(bits: Sequence[int], closing: int) -> list[int]:
    """Gap counts in ``bits + (closing,)``; entry ``i-1`` counts gaps of length ``i-1``."""
    n = len(bits)
    counts = [0] * n
    ext = list(bits) + [closing]
    last = None
    for pos, b in enumerate(ext):
        if b:
            if last is not None:
                counts[pos - last - 1] += 1
            last = pos
    return counts


def feller_map(bits: FellerBits) -> Partition | TruncatedCounts:
    """Image of ``bits`` under the Feller coupling.

    Parts are the distances between consecutive ones of
    ``(xi_1, ..., xi_n, 1)``.  When ``xi_1 = 0`` the leading zeros belong to
    no part, the counts sum to ``k < n`` and a ``TruncatedCounts`` with
    ``m = n`` is returned instead of a ``Partition``.
    """
    counts = _gap_counts(bits.bits, 1)
    if bits.bits[0] == 1:
        return Partition.from_counts(counts, bits.n)
    k = sum(i * a for i, a in enumerate(counts, start=1))
    return TruncatedCounts(bits.n, tuple(counts), k)


def feller_truncate(bits: FellerBits, m: int) -> TruncatedCounts:
    if not 1 <= m <= bits.n:
        raise DomainError(f"truncation level {m} outside 1..{bits.n}")
    counts = _gap_counts(bits.bits, 1)[:m]
    k = sum(i * a for i, a in enumerate(counts, start=1))
    return TruncatedCounts(m, tuple(counts), k)


def feller_tilde(bits: FellerBits) -> TruncatedCounts:
    """Gap counts of ``(xi_1, ..., xi_n, 0)``: the final, unclosed gap is dropped."""
    counts = _gap_counts(bits.bits, 0)
    k = sum(i * a for i, a in enumerate(counts, start=1))
    return TruncatedCounts(bits.n, tuple(counts), k)


def final_gap_size(bits: FellerBits) -> int:
    for pos in range(bits.n - 1, -1, -1):
        if bits.bits[pos]:
            return bits.n - pos
    raise DomainError("all-zero string has no final gap")


def force_prefix_ones(bits: FellerBits, d: int) -> FellerBits:
    if not 0 <= d <= bits.n:
        raise DomainError(f"prefix length {d} outside 0..{bits.n}")
    return FellerBits((1,) * d + bits.bits[d:])


# -- vectorized helpers -----------------------------------------------------


def feller_counts_matrix(bits: np.ndarray) -> np.ndarray:
    """Feller images of many strings at once.

    ``bits`` has shape ``(S, n)``.  Returns an ``(S, n + 1)`` integer array
    whose column ``i`` is ``alpha_i``; column 0 is always zero.  Rows with a
    leading zero get the partial counts, exactly as ``feller_map``.
    """
    bits = np.asarray(bits, dtype=bool)
    S, n = bits.shape
    ext = np.concatenate([bits, np.ones((S, 1), dtype=bool)], axis=1)
    pos = np.where(ext, np.arange(n + 1), n + 1)
    # nxt[:, j] = first position > j holding a one
    nxt = np.minimum.accumulate(pos[:, ::-1], axis=1)[:, ::-1]
    nxt = np.concatenate([nxt[:, 1:], np.full((S, 1), n + 1)], axis=1)
    rows, cols = np.nonzero(bits)
    sizes = nxt[rows, cols] - cols
    flat = rows * (n + 1) + sizes
    return np.bincount(flat, minlength=S * (n + 1)).reshape(S, n + 1)


def all_feller_strings(n: int, leading_one: bool = True) -> np.ndarray:
    """Every 0/1 string of length ``n`` as a bool array, in binary order.

    With ``leading_one`` only the ``2**(n-1)`` strings with ``xi_1 = 1`` are
    produced.
    """
    free = n - 1 if leading_one else n
    codes = np.arange(2**free, dtype=np.int64)
    shifts = np.arange(free - 1, -1, -1, dtype=np.int64)
    body = ((codes[:, None] >> shifts) & 1).astype(bool)
    if leading_one:
        body = np.concatenate([np.ones((len(codes), 1), dtype=bool), body], axis=1)
    return body


def iter_items(counts_row: np.ndarray) -> Iterator[tuple[int, int]]:
    for i in np.flatnonzero(counts_row):
        yield int(i), int(counts_row[i])


def partitions_of(n: int) -> Iterator[Partition]:
    """All partitions of ``n``, in reverse lexicographic order of their parts.

    Starts at ``(n)`` and ends at ``(1, ..., 1)``.
    """
    if n < 1:
        raise DomainError("n must be positive")
    # parts kept nonincreasing; standard "decrement the last part > 1" step
    a = [n]
    while True:
        yield Partition.from_parts(a)
        while a and a[-1] == 1:
            a.pop()
        if not a:
            return
        ones = n - sum(a) + 1
        a[-1] -= 1
        v = a[-1]
        ones_left = ones
        while ones_left > v:
            a.append(v)
            ones_left -= v
        if ones_left:
            a.append(ones_left)


@dataclass(frozen=True, eq=False)
class PartitionBatch:
    """Many partitions of the same ``n`` in ragged form.

    Row ``r`` owns ``sizes[offsets[r]:offsets[r+1]]`` (in no particular
    order).  Samplers return batches so that statistics can be evaluated
    with array operations instead of Python loops.
    """

    n: int
    sizes: np.ndarray
    offsets: np.ndarray

    def __len__(self) -> int:
        return len(self.offsets) - 1

    def __getitem__(self, r: int) -> Partition:
        return Partition.from_parts(self.sizes[self.offsets[r]:self.offsets[r + 1]])

    def __iter__(self) -> Iterator[Partition]:
        for r in range(len(self)):
            yield self[r]

    @classmethod
    def from_partitions(cls, parts: Sequence[Partition]) -> "PartitionBatch":
        if not parts:
            raise DomainError("empty batch")
        n = parts[0].n
        sizes: list[int] = []
        offsets = [0]
        for p in parts:
            if p.n != n:
                raise DomainError("mixed n in batch")
            sizes.extend(p.parts())
            offsets.append(len(sizes))
        return cls(n, np.asarray(sizes, dtype=np.int64), np.asarray(offsets, dtype=np.int64))

    @classmethod
    def from_counts_matrix(cls, counts: np.ndarray) -> "PartitionBatch":
        """Inverse of ``counts_matrix``; column ``i`` holds ``alpha_i``."""
        counts = np.asarray(counts, dtype=np.int64)
        n = counts.shape[1] - 1
        rows, sizes = np.nonzero(counts)
        reps = counts[rows, sizes]
        flat = np.repeat(sizes, reps)
        per_row = np.bincount(rows, weights=reps, minlength=counts.shape[0]).astype(np.int64)
        offsets = np.concatenate([[0], np.cumsum(per_row)])
        return cls(n, flat.astype(np.int64), offsets)

    @classmethod
    def concat(cls, batches: Sequence["PartitionBatch"]) -> "PartitionBatch":
        n = batches[0].n
        sizes = np.concatenate([b.sizes for b in batches])
        offs = [np.zeros(1, dtype=np.int64)]
        base = 0
        for b in batches:
            offs.append(b.offsets[1:] + base)
            base += b.offsets[-1]
        return cls(n, sizes, np.concatenate(offs))

    def row_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self)), np.diff(self.offsets))

    def num_parts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def largest(self) -> np.ndarray:
        return np.maximum.reduceat(self.sizes, self.offsets[:-1])

    def triples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(row, size, multiplicity)`` for every nonzero count."""
        key = self.row_index() * (self.n + 1) + self.sizes
        uniq, mult = np.unique(key, return_counts=True)
        return uniq // (self.n + 1), uniq % (self.n + 1), mult

    def counts_matrix(self, max_size: int | None = None) -> np.ndarray:
        """Dense ``(N, max_size + 1)`` counts; sizes above ``max_size`` are dropped."""
        width = self.n if max_size is None else max_size
        keep = self.sizes <= width
        rows = self.row_index()[keep]
        flat = rows * (width + 1) + self.sizes[keep]
        return np.bincount(flat, minlength=len(self) * (width + 1)).reshape(len(self), width + 1)
