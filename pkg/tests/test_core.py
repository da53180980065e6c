import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import bit_strings, partitions
from ewenskit.core import (
    FellerBits,
    Partition,
    PartitionBatch,
    TruncatedCounts,
    all_feller_strings,
    feller_counts_matrix,
    feller_map,
    feller_tilde,
    feller_truncate,
    final_gap_size,
    force_prefix_ones,
    partitions_of,
)
from ewenskit.errors import DomainError

B = FellerBits.of


@pytest.mark.parametrize("bits, counts", [
    ((1, 0, 1), {1: 1, 2: 1}),
    ((1, 1, 1), {1: 3}),
    ((1, 0, 0), {3: 1}),
])
def test_feller_map_examples(bits, counts):
    p = feller_map(B(bits))
    assert isinstance(p, Partition)
    assert dict(p.items) == counts


def test_feller_map_leading_zero_is_flagged():
    out = feller_map(B((0, 1, 0)))
    assert isinstance(out, TruncatedCounts)
    assert out.k == 2 and out.m == 3


@pytest.mark.parametrize("bits, m, counts, k", [
    ((1, 0, 1), 1, (1,), 1),
    ((1, 1, 1), 2, (3, 0), 3),
    ((1, 0, 0), 2, (0, 0), 0),
])
def test_feller_truncate_examples(bits, m, counts, k):
    t = feller_truncate(B(bits), m)
    assert t.counts == counts and t.k == k


@pytest.mark.parametrize("m", [0, 4])
def test_feller_truncate_range(m):
    with pytest.raises(DomainError):
        feller_truncate(B((1, 0, 1)), m)


@pytest.mark.parametrize("bits, counts", [
    ((1, 0, 1), (0, 1, 0)),
    ((1, 1, 1), (2, 0, 0)),
    ((1, 0, 0), (0, 0, 0)),
])
def test_feller_tilde_examples(bits, counts):
    assert feller_tilde(B(bits)).counts == counts


@pytest.mark.parametrize("bits, k", [((1, 0, 1), 1), ((1, 0, 0), 3), ((1, 1, 1), 1)])
def test_final_gap_examples(bits, k):
    assert final_gap_size(B(bits)) == k


def test_final_gap_all_zero():
    with pytest.raises(DomainError):
        final_gap_size(B((0, 0)))


@pytest.mark.parametrize("bits, d, out", [
    ((0, 0, 1), 2, (1, 1, 1)),
    ((1, 0, 1), 0, (1, 0, 1)),
    ((1, 0, 0, 1), 3, (1, 1, 1, 1)),
])
def test_force_prefix_examples(bits, d, out):
    assert force_prefix_ones(B(bits), d).bits == out


def test_force_prefix_too_long():
    with pytest.raises(DomainError):
        force_prefix_ones(B((1, 0)), 3)


def test_canonical_text():
    p = Partition.from_counts((2, 0, 1, 1))
    assert str(p) == "n=9;counts=1:2,3:1,4:1"
    assert Partition.parse(str(p)) == p
    assert str(B((1, 0, 1))) == "101"
    assert FellerBits.parse("101") == B((1, 0, 1))


@pytest.mark.parametrize("text", ["n=3;counts=1:1", "garbage", "n=3;counts=0:3", "n=2;counts=1:1,1:1"])
def test_parse_rejects_bad_text(text):
    with pytest.raises(DomainError):
        Partition.parse(text)


def test_partition_invariant():
    with pytest.raises(DomainError):
        Partition(5, ((1, 2), (2, 2)))
    with pytest.raises(DomainError):
        FellerBits((1, 2))


def test_dense_and_sparse_agree():
    p = Partition.from_parts([4, 3, 1, 1])
    assert p == Partition.from_counts(p.counts)
    assert p.counts == (2, 0, 1, 1, 0, 0, 0, 0, 0)
    assert p.count(1) == 2 and p.count(2) == 0 and p.count(50) == 0
    assert p.parts() == [4, 3, 1, 1] and p.num_parts == 4


# classical partition numbers p(1..30)
PARTITION_NUMBERS = [1, 2, 3, 5, 7, 11, 15, 22, 30, 42, 56, 77, 101, 135, 176, 231, 297, 385, 490, 627,
                     792, 1002, 1255, 1575, 1958, 2436, 3010, 3718, 4565, 5604]


def test_partition_counts_classical():
    for n, expected in enumerate(PARTITION_NUMBERS, start=1):
        ps = list(partitions_of(n))
        assert len(ps) == expected
        assert len(set(ps)) == expected


def test_exhaustive_feller_invariants():
    for n in range(1, 15):
        bits = all_feller_strings(n)
        counts = feller_counts_matrix(bits)
        assert np.all(counts @ np.arange(n + 1) == n)
        for row, c in zip(bits, counts):
            fb = B(tuple(int(x) for x in row))
            k = final_gap_size(fb)
            expected = list(c[1:])
            expected[k - 1] -= 1
            assert list(feller_tilde(fb).counts) == expected
            assert feller_truncate(fb, n).counts == tuple(c[1:])


def test_matrix_matches_scalar_on_all_strings():
    for n in range(1, 9):
        bits = all_feller_strings(n, leading_one=False)
        mat = feller_counts_matrix(bits)
        for row, c in zip(bits, mat):
            out = feller_map(B(tuple(int(x) for x in row)))
            assert tuple(c[1:]) == tuple(out.counts)


@given(bit_strings(max_n=20))
def test_tilde_differs_at_final_gap(fb):
    a = feller_map(fb).counts
    t = feller_tilde(fb).counts
    k = final_gap_size(fb)
    assert [x - y for x, y in zip(a, t)] == [int(i == k) for i in range(1, fb.n + 1)]


@given(bit_strings(max_n=20, leading_one=False), st.data())
def test_force_prefix_idempotent(fb, data):
    d = data.draw(st.integers(0, fb.n))
    once = force_prefix_ones(fb, d)
    assert force_prefix_ones(once, d) == once


@given(partitions())
def test_text_round_trip(p):
    assert Partition.parse(str(p)) == p
    assert Partition.from_counts(p.counts) == p
    assert sum(p.parts()) == p.n


@given(st.lists(partitions(max_n=15), min_size=1, max_size=6))
def test_batch_round_trip(ps):
    n = max(p.n for p in ps)
    ps = [Partition.from_parts(p.parts() + [1] * (n - p.n)) for p in ps]
    b = PartitionBatch.from_partitions(ps)
    assert list(b) == ps
    again = PartitionBatch.from_counts_matrix(b.counts_matrix())
    assert list(again) == ps
    assert list(b.num_parts()) == [p.num_parts for p in ps]
    assert list(b.largest()) == [max(p.parts()) for p in ps]
    both = PartitionBatch.concat([b, again])
    assert list(both) == ps + ps
