"""Reference limit laws and the goodness-of-fit tests used against them."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

from .errors import DomainError

SIGNIFICANCE = 1e-3
KOLMOGOROV_TERMS = 100

_STD_NORMAL = NormalDist()


@dataclass(frozen=True, eq=False)
class PdSample:
    """Sorted Poisson-Dirichlet components plus the unbroken remainder."""

    components: np.ndarray
    tail_bound: float

    @property
    def largest(self) -> float:
        return float(self.components[0]) if len(self.components) else self.tail_bound


def gem_sticks(theta: float, rng: np.random.Generator, tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """GEM(theta) stick lengths in breaking order, until the remainder drops below ``tol``."""
    if not theta > 0 or not tol > 0:
        raise DomainError("theta and tol must be positive")
    sticks = []
    rest = 1.0
    while rest >= tol:
        v = rng.beta(1.0, theta)
        sticks.append(rest * v)
        rest *= 1.0 - v
    return np.asarray(sticks), rest


def sample_pd(theta: float, rng: np.random.Generator, tol: float = 1e-12) -> PdSample:
    sticks, rest = gem_sticks(theta, rng, tol)
    return PdSample(np.sort(sticks)[::-1], rest)


def gem_batch(theta: float, size: int, rng: np.random.Generator,
              tol: float = 1e-12, chunk: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized GEM draws.

    Returns ``(sticks, rest)`` where ``sticks`` has shape ``(size, K)``
    (zero-padded for rows that finished early) and ``rest`` is the
    unbroken remainder of each row, below ``tol``.
    """
    if not theta > 0 or not tol > 0:
        raise DomainError("theta and tol must be positive")
    blocks = []
    rest = np.ones(size)
    while np.any(rest >= tol):
        v = rng.beta(1.0, theta, size=(size, chunk))
        after = np.cumprod(1.0 - v, axis=1) * rest[:, None]
        before = np.concatenate([rest[:, None], after[:, :-1]], axis=1)
        # a row stops breaking once its remainder is below tol
        active = before >= tol
        blocks.append(np.where(active, before * v, 0.0))
        rest = np.where(active.any(axis=1), np.where(active, after, np.inf).min(axis=1), rest)
    return np.concatenate(blocks, axis=1), rest


def pd_largest_batch(theta: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Largest PD(theta) component, stopping each row once the remainder cannot beat it."""
    best = np.zeros(size)
    rest = np.ones(size)
    live = np.ones(size, dtype=bool)
    while live.any():
        idx = np.flatnonzero(live)
        v = rng.beta(1.0, theta, size=len(idx))
        piece = rest[idx] * v
        best[idx] = np.maximum(best[idx], piece)
        rest[idx] = rest[idx] - piece
        live[idx] = rest[idx] > best[idx]
    return best


def brownian_marginal_cdf(t: float, x: float, time_change: str = "identity") -> float:
    """``P[W_s <= x]`` with ``s = t`` or ``s = t**3``; at ``t = 0`` a step at 0."""
    if not 0 <= t <= 1:
        raise DomainError("t must lie in [0, 1]")
    if time_change == "identity":
        s = t
    elif time_change == "cubic":
        s = t**3
    else:
        raise DomainError(f"unknown time change {time_change!r}")
    if s == 0:
        return 1.0 if x >= 0 else 0.0
    return _STD_NORMAL.cdf(x / math.sqrt(s))


@dataclass(frozen=True)
class TestReport:
    statistic: float
    p_value: float
    n_a: int
    n_b: int
    test: str = "ks"
    alpha: float = SIGNIFICANCE
    dof: int = 0

    __test__ = False  # not a pytest class

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha

    @property
    def verdict(self) -> str:
        return "reject" if self.reject else "accept"

    def to_json(self) -> str:
        doc = asdict(self)
        doc["verdict"] = self.verdict
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TestReport":
        doc = json.loads(text)
        doc.pop("verdict", None)
        return cls(**doc)


def kolmogorov_sf(lam: float, terms: int = KOLMOGOROV_TERMS) -> float:
    """``P[K > lam]`` for the Kolmogorov distribution, by its alternating series."""
    if lam <= 0:
        return 1.0
    k = np.arange(1, terms + 1)
    s = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k**2 * lam**2))
    return float(min(max(s, 0.0), 1.0))


def ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample sup distance between empirical cdfs."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def ks_test(sample_a: Sequence[float], other: Sequence[float] | Callable[[float], float]) -> TestReport:
    """Kolmogorov-Smirnov test against a second sample or a cdf.

    A callable ``other`` gives the one-sample test with ``n_b = 0``.
    """
    a = np.sort(np.asarray(sample_a, dtype=float))
    if len(a) == 0:
        raise DomainError("empty sample")
    if callable(other):
        n = len(a)
        cdf = np.array([other(x) for x in a])
        upper = np.arange(1, n + 1) / n - cdf
        lower = cdf - np.arange(n) / n
        d = float(max(upper.max(), lower.max()))
        en = n
        n_b = 0
    else:
        b = np.asarray(other, dtype=float)
        if len(b) == 0:
            raise DomainError("empty sample")
        d = ks_statistic(a, b)
        en = len(a) * len(b) / (len(a) + len(b))
        n_b = len(b)
    p = kolmogorov_sf(math.sqrt(en) * d) if d > 0 else 1.0
    return TestReport(d, p, len(a), n_b, "ks")


def chi_square_gof(counts: Sequence[float], expected_probs: Sequence[float], min_expected: float = 5.0) -> TestReport:
    """Pearson goodness of fit, pooling bins whose expected count is below ``min_expected``.

    Small bins are merged in order of increasing expectation until every
    pooled bin reaches the threshold.
    """
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise DomainError("no observations")
    if abs(probs.sum() - 1) > 1e-9:
        raise DomainError("expected probabilities must sum to 1")
    expected = probs * total
    order = np.argsort(expected, kind="stable")
    obs_bins: list[float] = []
    exp_bins: list[float] = []
    acc_o = acc_e = 0.0
    for j in order:
        acc_o += counts[j]
        acc_e += expected[j]
        if acc_e >= min_expected:
            obs_bins.append(acc_o)
            exp_bins.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if exp_bins:
            obs_bins[-1] += acc_o
            exp_bins[-1] += acc_e
        else:
            obs_bins.append(acc_o)
            exp_bins.append(acc_e)
    if len(exp_bins) < 2:
        raise DomainError("all mass falls in one bin after pooling")
    o = np.asarray(obs_bins)
    e = np.asarray(exp_bins)
    stat = float(np.sum((o - e) ** 2 / e))
    p = float(sps.chi2.sf(stat, len(e) - 1))
    return TestReport(stat, p, int(total), 0, "chi2", dof=len(e) - 1)
