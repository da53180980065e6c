"""Ewens and weighted measures on partitions.

Normalization convention: with ``Z_n^theta = theta^(n) / n!`` the Ewens
probability of ``alpha`` is ``w(alpha) / Z_n^theta`` where

    w(alpha) = prod_i theta^alpha_i / (i^alpha_i alpha_i!)

and a weighted measure has probability ``eta(alpha) w(alpha) / Z`` with
``Z = sum_alpha eta(alpha) w(alpha)``.  The free constant multiple of the
Radon-Nikodym weight is fixed by ``eta(empty partition) = 1``.
"""

from __future__ import annotations

import hashlib
import json
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import gammaln

from .core import Partition, PartitionBatch, TruncatedCounts, partitions_of
from .errors import CapacityError, DomainError

ENUMERATION_CAP = 45
LOG_SPACE_ABOVE = 1000

Counts = Union[Partition, TruncatedCounts]


# -- Ewens ------------------------------------------------------------------


def log_rising_factorial(theta: float, n: int) -> float:
    if n < 0:
        raise DomainError("n must be nonnegative")
    return float(gammaln(theta + n) - gammaln(theta))


def rising_factorial(theta, n: int):
    """``theta (theta + 1) ... (theta + n - 1)``; the empty product is 1.

    Exact for ``int``/``Fraction`` input.  For float input above ``n = 1000``
    the value is formed in log space (and may overflow to ``inf``).
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    if isinstance(theta, (int, Fraction)) and not isinstance(theta, bool):
        out = Fraction(1)
        for j in range(n):
            out *= theta + j
        return out
    if n > LOG_SPACE_ABOVE:
        lr = log_rising_factorial(theta, n)
        return math.exp(lr) if lr < 709 else math.inf
    out = 1.0
    for j in range(n):
        out *= theta + j
    return out


def log_ewens_term(theta: float, p: Counts) -> float:
    """``log w(alpha)`` for the counts of ``p``."""
    lt = math.log(theta)
    return sum(a * (lt - math.log(i)) - math.lgamma(a + 1) for i, a in p.items)


def ewens_term(theta, p: Counts):
    if isinstance(theta, (int, Fraction)) and not isinstance(theta, bool):
        out = Fraction(1)
        for i, a in p.items:
            out *= Fraction(theta) ** a / (Fraction(i) ** a * math.factorial(a))
        return out
    theta = float(theta)
    if p.items and max(a for _, a in p.items) <= 150:
        out = 1.0
        for i, a in p.items:
            out *= (theta / i) ** a / math.factorial(a)
        if 0.0 < out < math.inf:
            return out
    return math.exp(log_ewens_term(theta, p))


def ewens_pmf(theta, p: Partition, exact: bool = False):
    """Ewens probability of ``p``.

    ``exact=True`` with a rational ``theta`` returns a ``Fraction``.
    """
    if theta <= 0:
        raise DomainError("theta must be positive")
    n = p.n
    if exact:
        theta = Fraction(theta)
        return math.factorial(n) / rising_factorial(theta, n) * ewens_term(theta, p)
    theta = float(theta)
    if n > LOG_SPACE_ABOVE:
        return math.exp(math.lgamma(n + 1) - log_rising_factorial(theta, n) + log_ewens_term(theta, p))
    ratio = 1.0
    for j in range(1, n + 1):
        ratio *= j / (theta + j - 1)
    return ratio * ewens_term(theta, p)


def log_ewens_terms_batch(theta: float, counts: np.ndarray) -> np.ndarray:
    """Row-wise ``log w(alpha)`` for an ``(S, n + 1)`` counts matrix."""
    counts = np.asarray(counts)
    i = np.arange(counts.shape[1], dtype=float)
    i[0] = 1.0
    per = counts * (math.log(theta) - np.log(i)) - gammaln(counts + 1)
    return per[:, 1:].sum(axis=1)


# -- weights ----------------------------------------------------------------


class Weight:
    """A Radon-Nikodym weight ``eta`` on partitions (any scalar multiple)."""

    kind = "abstract"

    def __call__(self, p: Counts) -> float:
        raise NotImplementedError

    def batch(self, b: PartitionBatch) -> np.ndarray:
        return np.array([self(p) for p in b], dtype=float)

    def on_counts(self, counts: np.ndarray) -> np.ndarray:
        """Weights for the rows of an ``(S, n + 1)`` counts matrix."""
        return self.batch(PartitionBatch.from_counts_matrix(counts))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    @property
    def is_multiplicative(self) -> bool:
        return False


@dataclass(frozen=True)
class Constant(Weight):
    value: float = 1.0
    kind = "constant"

    def __post_init__(self):
        if not self.value > 0:
            raise DomainError("constant weight must be positive")

    def __call__(self, p):
        return float(self.value)

    def batch(self, b):
        return np.full(len(b), float(self.value))

    def on_counts(self, counts):
        return np.full(len(counts), float(self.value))

    def to_dict(self):
        return {"type": "constant", "value": self.value}

    @property
    def is_multiplicative(self):
        return self.value == 1.0

    def zeta_array(self, n: int) -> np.ndarray:
        return np.ones(n + 1)


class _MultiplicativeBase(Weight):
    def zeta(self, i: int) -> float:
        raise NotImplementedError

    def zeta_array(self, n: int) -> np.ndarray:
        """``zeta_0 .. zeta_n`` with a placeholder 1 at index 0."""
        out = np.ones(n + 1)
        out[1:] = [self.zeta(i) for i in range(1, n + 1)]
        return out

    def __call__(self, p):
        out = 1.0
        for i, a in p.items:
            out *= self.zeta(i) ** a
        return out

    def batch(self, b):
        z = self.zeta_array(b.n)
        with np.errstate(divide="ignore"):
            lz = np.log(z)
        rows, sizes, mult = b.triples()
        terms = mult * lz[sizes]
        # zero zeta with zero multiplicity never appears in triples
        tot = np.bincount(rows, weights=terms, minlength=len(b))
        tot[np.isnan(tot)] = -np.inf
        return np.exp(tot)

    def on_counts(self, counts):
        counts = np.asarray(counts)
        z = self.zeta_array(counts.shape[1] - 1)
        return np.prod(np.power(z[None, :], counts), axis=1)

    @property
    def is_multiplicative(self):
        return True


@dataclass(frozen=True)
class Multiplicative(_MultiplicativeBase):
    """``eta(alpha) = prod_i zeta_i^alpha_i``; ``zeta_i = 1`` beyond the table."""

    zetas: tuple[float, ...]
    kind = "multiplicative"

    def __post_init__(self):
        if any(z < 0 for z in self.zetas):
            raise DomainError("multiplicative weights must be nonnegative")

    @classmethod
    def from_function(cls, f: Callable[[int], float], n: int) -> "Multiplicative":
        return cls(tuple(float(f(i)) for i in range(1, n + 1)))

    def zeta(self, i):
        return self.zetas[i - 1] if i <= len(self.zetas) else 1.0

    def to_dict(self):
        return {"type": "multiplicative", "zeta": list(self.zetas)}


@dataclass(frozen=True)
class Macdonald(_MultiplicativeBase):
    """``zeta_i = (1 - q^i) / (1 - t^i)``."""

    q: float
    t: float
    kind = "macdonald"

    def __post_init__(self):
        if not (0 < self.q < 1 and 0 < self.t < 1):
            raise DomainError("Macdonald parameters must lie in (0, 1)")

    def zeta(self, i):
        return (1 - self.q**i) / (1 - self.t**i)

    def zeta_array(self, n):
        i = np.arange(n + 1, dtype=float)
        out = np.ones(n + 1)
        out[1:] = -np.expm1(i[1:] * math.log(self.q)) / -np.expm1(i[1:] * math.log(self.t))
        return out

    def as_multiplicative(self, n: int) -> Multiplicative:
        return Multiplicative(tuple(self.zeta_array(n)[1:]))

    def to_dict(self):
        return {"type": "macdonald", "q": self.q, "t": self.t}


@dataclass(frozen=True, eq=False)
class ProductForm(Weight):
    """``eta(alpha) = prod_i zeta_i(alpha_i)`` from a dense table.

    ``table[i-1, l]`` is ``zeta_i(l)``; entries outside the table are 1.
    """

    table: np.ndarray
    kind = "product"

    def __post_init__(self):
        tab = np.asarray(self.table, dtype=float)
        if tab.ndim != 2:
            raise DomainError("product-form table must be two-dimensional")
        if np.any(tab < 0):
            raise DomainError("product-form weights must be nonnegative")
        if tab.shape[1] and not np.allclose(tab[:, 0], 1.0, rtol=0, atol=1e-15):
            raise DomainError("zeta_i(0) must equal 1")
        tab = tab.copy()
        tab.flags.writeable = False
        object.__setattr__(self, "table", tab)

    @classmethod
    def from_function(cls, f: Callable[[int, int], float], imax: int, lmax: int) -> "ProductForm":
        return cls(np.array([[f(i, l) for l in range(lmax + 1)] for i in range(1, imax + 1)]))

    def zeta(self, i: int, l: int) -> float:
        if i <= self.table.shape[0] and l < self.table.shape[1]:
            return float(self.table[i - 1, l])
        return 1.0

    def __call__(self, p):
        out = 1.0
        for i, a in p.items:
            out *= self.zeta(i, a)
        return out

    def batch(self, b):
        rows, sizes, mult = b.triples()
        imax, width = self.table.shape
        inside = (sizes <= imax) & (mult < width)
        vals = np.ones(len(rows))
        vals[inside] = self.table[sizes[inside] - 1, mult[inside]]
        out = np.ones(len(b))
        np.multiply.at(out, rows, vals)
        return out

    def to_dict(self):
        return {"type": "product", "table": self.table.tolist()}

    def __eq__(self, other):
        return isinstance(other, ProductForm) and np.array_equal(self.table, other.table)

    def __hash__(self):
        return hash(self.table.tobytes())


_OPS = {
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
}


@dataclass(frozen=True)
class IndicatorSmallParts(Weight):
    """Indicator of ``sum_{i<=M} coeffs[i-1] * alpha_i  <op>  rhs``.

    ``IndicatorSmallParts((1,), ">", 0)`` keeps partitions with a 1-part
    (permutations with a fixed point); ``((1, 1), ">", 0)`` keeps those
    whose square has a fixed point.
    """

    coeffs: tuple[float, ...]
    op: str = ">"
    rhs: float = 0.0
    kind = "indicator"

    def __post_init__(self):
        if self.op not in _OPS:
            raise DomainError(f"unknown comparison {self.op!r}")
        if not self.coeffs:
            raise DomainError("indicator needs at least one coefficient")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "rhs", float(self.rhs))

    def _test(self, value):
        return _OPS[self.op](value, self.rhs)

    def __call__(self, p):
        value = sum(c * p.count(i) for i, c in enumerate(self.coeffs, start=1))
        return 1.0 if self._test(value) else 0.0

    def batch(self, b):
        small = b.counts_matrix(len(self.coeffs))[:, 1:]
        value = small @ np.asarray(self.coeffs, dtype=float)
        return self._test(value).astype(float)

    def to_dict(self):
        return {"type": "indicator", "coeffs": list(self.coeffs), "op": self.op, "rhs": self.rhs}


@dataclass(frozen=True)
class ParityCycles(Weight):
    """Indicator that the number of parts is even (or odd)."""

    even: bool = True
    kind = "parity"

    def __call__(self, p):
        return 1.0 if (p.num_parts % 2 == 0) == self.even else 0.0

    def batch(self, b):
        return ((b.num_parts() % 2 == 0) == self.even).astype(float)

    def to_dict(self):
        return {"type": "parity", "even": self.even}


def weight_from_dict(doc: dict) -> Weight:
    """Inverse of ``Weight.to_dict``; the ``type`` key selects the variant."""
    if not isinstance(doc, dict):
        raise DomainError("a weight spec must be a JSON object")
    kind = doc.get("type")
    try:
        if kind == "constant":
            return Constant(float(doc.get("value", 1.0)))
        if kind == "multiplicative":
            return Multiplicative(tuple(float(z) for z in doc["zeta"]))
        if kind == "macdonald":
            return Macdonald(float(doc["q"]), float(doc["t"]))
        if kind == "product":
            return ProductForm(np.asarray(doc["table"], dtype=float))
        if kind == "indicator":
            return IndicatorSmallParts(tuple(float(c) for c in doc["coeffs"]), doc.get("op", ">"),
                                       float(doc.get("rhs", 0.0)))
        if kind == "parity":
            return ParityCycles(bool(doc.get("even", True)))
    except KeyError as exc:
        raise DomainError(f"{kind} weight spec is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"malformed {kind} weight spec: {exc}") from None
    raise DomainError(f"unknown weight type {kind!r}")


def weight_eval(w: Weight, p: Counts) -> float:
    return w(p)


@dataclass(frozen=True)
class MeasureSpec:
    theta: float
    weight: Weight = field(default_factory=Constant)

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError("theta must be positive")


def weighted_pmf(m: MeasureSpec, p: Partition, Z: float) -> float:
    if not Z > 0:
        raise DomainError("normalizer must be positive; the measure is undefined")
    return m.weight(p) * ewens_term(float(m.theta), p) / Z


@lru_cache(maxsize=64)
def partition_table(n: int) -> tuple[tuple[Partition, ...], np.ndarray]:
    """All partitions of ``n`` with their ``(p(n), n + 1)`` counts matrix."""
    parts = tuple(partitions_of(n))
    counts = np.zeros((len(parts), n + 1), dtype=np.int64)
    for r, p in enumerate(parts):
        for i, a in p.items:
            counts[r, i] = a
    counts.flags.writeable = False
    return parts, counts


def normalizer_enumerate(m: MeasureSpec, n: int, cap: int = ENUMERATION_CAP) -> float:
    """``sum_alpha eta(alpha) w(alpha)`` by brute-force enumeration."""
    if n > cap:
        raise CapacityError(f"n={n} exceeds the enumeration cap {cap}")
    _, counts = partition_table(n)
    eta = m.weight.on_counts(counts)
    logw = log_ewens_terms_batch(float(m.theta), counts)
    return math.fsum(eta * np.exp(logw))


@dataclass(frozen=True, eq=False)
class NormalizerTable:
    """``h_0 .. h_N`` with ``h_n = sum_{alpha in P_n} prod (theta zeta_i)^alpha_i / (i^alpha_i alpha_i!)``."""

    theta: float
    values: np.ndarray
    zetas: np.ndarray

    def __getitem__(self, n: int) -> float:
        return float(self.values[n])

    @property
    def N(self) -> int:
        return len(self.values) - 1


def _zeta_vector(zeta, N: int) -> np.ndarray:
    if isinstance(zeta, Weight):
        if not zeta.is_multiplicative:
            raise DomainError(f"{zeta.kind} weights are not multiplicative")
        return zeta.zeta_array(N)
    arr = np.ones(N + 1)
    if callable(zeta):
        arr[1:] = [zeta(i) for i in range(1, N + 1)]
    else:
        vals = np.asarray(zeta, dtype=float)
        k = min(len(vals), N)
        arr[1:k + 1] = vals[:k]
    return arr


def normalizer_recursive(theta: float, zeta, N: int) -> NormalizerTable:
    """Table of ``h_n`` from ``n h_n = sum_{k=1}^n theta zeta_k h_{n-k}``, ``h_0 = 1``."""
    if not theta > 0:
        raise DomainError("theta must be positive")
    z = _zeta_vector(zeta, N)
    if np.any(z[1:] < 0):
        raise DomainError("zeta must be nonnegative")
    tz = theta * z
    h = np.zeros(N + 1)
    h[0] = 1.0
    for n in range(1, N + 1):
        # reversed dot: sum_k tz[k] h[n-k]
        h[n] = np.dot(tz[1:n + 1], h[n - 1::-1]) / n
    h.flags.writeable = False
    return NormalizerTable(float(theta), h, z)


# -- logarithmic combinatorial structures ----------------------------------


@dataclass(frozen=True, eq=False)
class LcsSpec:
    """Independent ``Y_i`` (pmfs over ``l = 0, 1, ...``) with envelope sequences.

    ``pmfs[i-1]`` is the pmf of ``Y_i``, ``e[i-1]`` is ``e_i`` and ``c[l]`` is
    ``c_l``.
    """

    theta: float
    pmfs: tuple[np.ndarray, ...]
    e: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError("theta must be positive")
        if len(self.e) < len(self.pmfs):
            raise DomainError("need one e_i per Y_i")
        for i, pmf in enumerate(self.pmfs, start=1):
            if abs(pmf.sum() - 1) > 1e-12 or np.any(pmf < 0):
                raise DomainError(f"Y_{i} is not a probability vector")

    @property
    def n(self) -> int:
        return len(self.pmfs)

    @property
    def lmax(self) -> int:
        return max(len(p) for p in self.pmfs) - 1

    def prob(self, i: int, l: int) -> float:
        pmf = self.pmfs[i - 1]
        return float(pmf[l]) if l < len(pmf) else 0.0

    @classmethod
    def poisson(cls, theta: float, n: int, perturb: Callable[[int], float] | None = None,
                c: Sequence[float] | None = None) -> "LcsSpec":
        """``Y_i ~ Poisson(theta (1 + perturb(i)) / i)`` truncated at ``floor(n / i)``.

        ``c`` defaults to ``1 / l!``; each ``e_i`` is the smallest value for
        which the uniform logarithmic condition holds on the stored pmf.
        """
        pmfs = []
        for i in range(1, n + 1):
            lam = theta / i * (1 + (perturb(i) if perturb else 0.0))
            l = np.arange(n // i + 1)
            logp = l * math.log(lam) - lam - gammaln(l + 1)
            pmf = np.exp(logp - logp.max())
            pmfs.append(pmf / pmf.sum())
        lmax = n
        if c is None:
            c = np.exp(-gammaln(np.arange(lmax + 1) + 1))
        c = np.asarray(c, dtype=float).copy()
        c[0], c[1] = 0.0, 1.0
        e = np.array([minimal_e(theta, i, pmf, c) for i, pmf in enumerate(pmfs, start=1)])
        return cls(theta, tuple(pmfs), e, c)

    def ulc_violations(self, tol: float = 1e-12) -> list[tuple[int, int]]:
        """``(i, l)`` pairs where the uniform logarithmic condition fails."""
        bad = []
        for i in range(1, self.n + 1):
            if abs(i * self.prob(i, 1) - self.theta) > self.e[i - 1] + tol:
                bad.append((i, 1))
            for l in range(2, len(self.pmfs[i - 1])):
                cl = self.c[l] if l < len(self.c) else 0.0
                if i * self.prob(i, l) > self.e[i - 1] * cl + tol:
                    bad.append((i, l))
        return bad


def minimal_e(theta: float, i: int, pmf: np.ndarray, c: np.ndarray) -> float:
    e = abs(i * (pmf[1] if len(pmf) > 1 else 0.0) - theta)
    for l in range(2, len(pmf)):
        if pmf[l] > 0:
            if l >= len(c) or c[l] <= 0:
                raise DomainError(f"c_{l} must be positive where P[Y_{i}={l}] > 0")
            e = max(e, i * pmf[l] / c[l])
    return float(e)


def lcs_to_weights(spec: LcsSpec) -> ProductForm:
    """``zeta_i(l) = P[Y_i = l] (i / theta)^l l! / P[Y_i = 0]``."""
    theta = spec.theta
    width = spec.lmax + 1
    table = np.ones((spec.n, width))
    for i, pmf in enumerate(spec.pmfs, start=1):
        p0 = pmf[0]
        if p0 <= 0:
            raise DomainError(f"P[Y_{i} = 0] = 0")
        l = np.arange(len(pmf))
        with np.errstate(divide="ignore"):
            logz = np.log(pmf) + l * math.log(i / theta) + gammaln(l + 1) - math.log(p0)
        table[i - 1, :len(pmf)] = np.exp(logz)
        table[i - 1, len(pmf):] = 0.0
        table[i - 1, 0] = 1.0
    return ProductForm(table)


def lcs_bound_sequences(spec: LcsSpec, zeta: ProductForm | None = None) -> tuple[np.ndarray, np.ndarray]:
    """The rebuilt envelope sequences ``(e', c')``.

    ``e'_i = max(e_i / p_i, theta |zeta_i(1) - 1|, 1 / i)``;
    ``c'_0 = 0``, ``c'_1 = 1``, ``c'_2 = max(c_2, sup_i (theta^2 + theta e'_i) / (2 i e'_i))``,
    then ``c'_l = max(c_l, theta c'_{l-1})`` for ``3 <= l <= 2 theta`` and
    ``max(c_l, c'_{l-1} / 2)`` beyond.
    """
    theta = spec.theta
    if zeta is None:
        zeta = lcs_to_weights(spec)
    i = np.arange(1, spec.n + 1)
    p0 = np.array([pmf[0] for pmf in spec.pmfs])
    z1 = np.array([zeta.zeta(k, 1) for k in i])
    e_prime = np.maximum.reduce([spec.e[:spec.n] / p0, theta * np.abs(z1 - 1), 1.0 / i])
    L = max(spec.lmax, 2)
    c = np.zeros(L + 1)
    c[:min(len(spec.c), L + 1)] = spec.c[:L + 1]
    cp = np.zeros(L + 1)
    cp[1] = 1.0
    cp[2] = max(c[2], float(np.max((theta**2 + theta * e_prime) / (2 * i * e_prime))))
    for l in range(3, L + 1):
        prev = theta * cp[l - 1] if l <= 2 * theta else cp[l - 1] / 2
        cp[l] = max(c[l], prev)
    return e_prime, cp


@dataclass(frozen=True, eq=False)
class EnvelopeWeights:
    """Upper and lower product-form envelopes around weights built from an LCS."""

    theta: float
    e: np.ndarray
    c: np.ndarray

    def plus(self, i: int, l: int) -> float:
        if l <= 1:
            return 1.0 + (self.e[i - 1] * self.c[l] / self.theta if l == 1 else 0.0)
        cl = self.c[l] if l < len(self.c) else 0.0
        # i^(l-1) l! e_i c_l / theta^l, in log space
        if cl == 0 or self.e[i - 1] == 0:
            return 0.0
        return math.exp((l - 1) * math.log(i) + math.lgamma(l + 1) + math.log(self.e[i - 1])
                        + math.log(cl) - l * math.log(self.theta))

    def minus(self, i: int, l: int) -> float:
        if l == 0:
            return 1.0
        if l == 1:
            return max(1.0 - self.e[i - 1] / self.theta, 0.0)
        return 0.0

    def grids(self, imax: int, lmax: int) -> tuple[np.ndarray, np.ndarray]:
        """``(zeta_minus, zeta_plus)`` tabulated on ``1..imax`` x ``0..lmax``."""
        lo = np.array([[self.minus(i, l) for l in range(lmax + 1)] for i in range(1, imax + 1)])
        hi = np.array([[self.plus(i, l) for l in range(lmax + 1)] for i in range(1, imax + 1)])
        return lo, hi


def envelope_weights(theta: float, e: Sequence[float], c: Sequence[float]) -> EnvelopeWeights:
    c = np.array(c, dtype=float)
    if len(c) < 2:
        c = np.concatenate([c, np.zeros(2 - len(c))])
    c[0], c[1] = 0.0, 1.0
    return EnvelopeWeights(float(theta), np.asarray(e, dtype=float), c)
