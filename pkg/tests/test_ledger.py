"""Seeded bit sources and interval-union bit accounting."""

import pytest
from hypothesis import given
import hypothesis.strategies as st

from fiberlab import BitStream, LedgerEntry, SourceLedger, uncovered_bits


def test_stream_is_deterministic():
    a = BitStream(12345, "demo")
    b = BitStream(12345, "demo")
    bits_a, _ = a.take(97, component="x")
    bits_b, _ = b.take(97, component="x")
    assert bits_a == bits_b


def test_distinct_seeds_disagree():
    bits_a, _ = BitStream(1, "demo").take(64)
    bits_b, _ = BitStream(2, "demo").take(64)
    assert bits_a != bits_b


def test_take_zero_bits():
    stream = BitStream(7, "demo")
    bits, entry = stream.take(0, component="nothing")
    assert len(bits) == 0
    assert entry.nbits == 0
    assert stream.consumed == 0


def test_entries_advance_offsets():
    stream = BitStream(3, "s")
    _, e1 = stream.take(10, component="a")
    _, e2 = stream.take(5, component="b")
    assert (e1.offset, e1.nbits) == (0, 10)
    assert (e2.offset, e2.nbits) == (10, 5)
    assert stream.consumed == 15


@given(st.integers(0, 2 ** 31), st.integers(1, 256), st.integers(1, 256))
def test_take_concatenation_consistency(seed, n1, n2):
    """Two takes concatenate to what one big take would have produced."""
    s1 = BitStream(seed, "s")
    p1, _ = s1.take(n1)
    p2, _ = s1.take(n2)
    s2 = BitStream(seed, "s")
    whole, _ = s2.take(n1 + n2)
    assert p1 + p2 == whole


def test_total_bits_unions_overlaps():
    e1 = LedgerEntry("a", "s", 0, 10)
    e2 = LedgerEntry("b", "s", 5, 10)   # overlaps e1 by 5 bits
    e3 = LedgerEntry("c", "other", 0, 4)
    assert SourceLedger((e1, e2, e3)).total_bits() == 15 + 4


def test_prefix_entry():
    entry = LedgerEntry("label", "s", 32, 16)
    head = entry.prefix(6)
    assert (head.offset, head.nbits) == (32, 6)
    assert SourceLedger((head,)).total_bits() == 6


def test_uncovered_bits_basic():
    payload = SourceLedger((LedgerEntry("x", "s", 0, 32),))
    side = SourceLedger((LedgerEntry("z", "s", 0, 12),))
    assert uncovered_bits(payload, side) == 20
    assert uncovered_bits(payload, payload) == 0
    assert uncovered_bits(payload, SourceLedger(())) == 32


def test_uncovered_bits_respects_stream_names():
    payload = SourceLedger((LedgerEntry("x", "s1", 0, 8),))
    side = SourceLedger((LedgerEntry("z", "s2", 0, 8),))
    # same offsets, different stream: nothing is covered
    assert uncovered_bits(payload, side) == 8


@given(
    st.lists(st.tuples(st.integers(0, 64), st.integers(1, 32)), max_size=6),
    st.lists(st.tuples(st.integers(0, 64), st.integers(1, 32)), max_size=6),
)
def test_uncovered_matches_set_arithmetic(payload_spans, side_spans):
    payload = SourceLedger(
        tuple(LedgerEntry(f"p{i}", "s", o, n) for i, (o, n) in enumerate(payload_spans))
    )
    side = SourceLedger(
        tuple(LedgerEntry(f"q{i}", "s", o, n) for i, (o, n) in enumerate(side_spans))
    )
    pbits = set()
    for o, n in payload_spans:
        pbits |= set(range(o, o + n))
    sbits = set()
    for o, n in side_spans:
        sbits |= set(range(o, o + n))
    assert uncovered_bits(payload, side) == len(pbits - sbits)
    assert payload.total_bits() == len(pbits)


def test_merge_concatenates():
    a = SourceLedger((LedgerEntry("a", "s", 0, 4),))
    b = SourceLedger((LedgerEntry("b", "s", 4, 4),))
    assert a.merge(b).total_bits() == 8


def test_peek_does_not_consume():
    stream = BitStream(11, "s")
    first, _ = stream.take(24)
    again = stream.peek_range(0, 24)
    assert first == again
    assert stream.consumed == 24
