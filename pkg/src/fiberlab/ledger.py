"""Seeded bit sources and generation ledgers.

A BitStream is a counter-mode SHA-256 generator: stable across platforms
and runs, so every experiment is replayable from its seed.  Each draw is
recorded as a LedgerEntry naming the stream and the half-open bit range
consumed.  Conditional description lengths reduce to interval arithmetic
over these ranges.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

from .dyadic import Bitstring
from .errors import MissingLedger


@dataclass(frozen=True)
class LedgerEntry:
    """One recorded draw: bits [offset, offset + nbits) of a named stream."""

    name: str
    stream: str
    offset: int
    nbits: int

    def prefix(self, nbits: int, name: str | None = None) -> "LedgerEntry":
        if nbits > self.nbits:
            raise ValueError("prefix longer than the recorded draw")
        return LedgerEntry(name or self.name, self.stream, self.offset, nbits)


@dataclass(frozen=True)
class SourceLedger:
    entries: tuple[LedgerEntry, ...] = ()

    @classmethod
    def of(cls, entries: Iterable[LedgerEntry]) -> "SourceLedger":
        return cls(tuple(entries))

    def total_bits(self) -> int:
        return _union_size(self.entries)

    def merge(self, other: "SourceLedger") -> "SourceLedger":
        return SourceLedger(self.entries + other.entries)


def _intervals(entries: Sequence[LedgerEntry]) -> dict[str, list[tuple[int, int]]]:
    by_stream: dict[str, list[tuple[int, int]]] = {}
    for e in entries:
        if e.nbits > 0:
            by_stream.setdefault(e.stream, []).append((e.offset, e.offset + e.nbits))
    for stream, spans in by_stream.items():
        spans.sort()
        merged = [spans[0]]
        for a, b in spans[1:]:
            if a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        by_stream[stream] = merged
    return by_stream


def _union_size(entries: Sequence[LedgerEntry]) -> int:
    return sum(b - a for spans in _intervals(entries).values() for a, b in spans)


def uncovered_bits(payload: SourceLedger, side: SourceLedger) -> int:
    """Bits recorded for payload that do not appear in side's ledger."""
    pay = _intervals(payload.entries)
    cov = _intervals(side.entries)
    total = 0
    for stream, spans in pay.items():
        blockers = cov.get(stream, [])
        for a, b in spans:
            cur = a
            for ca, cb in blockers:
                if cb <= cur:
                    continue
                if ca >= b:
                    break
                if ca > cur:
                    total += ca - cur
                cur = max(cur, cb)
                if cur >= b:
                    break
            if cur < b:
                total += b - cur
    return total


class BitStream:
    """Deterministic bit generator; every draw is ledgered by bit offset."""

    BLOCK_BITS = 256

    def __init__(self, seed, name: str = "main"):
        self.stream_id = f"{name}#{seed}"
        self._key = hashlib.sha256(f"fiberlab|{name}|{seed}".encode()).digest()
        self._consumed = 0

    def _block(self, index: int) -> int:
        h = hashlib.sha256(self._key + index.to_bytes(8, "big")).digest()
        return int.from_bytes(h, "big")

    def _bits_at(self, offset: int, nbits: int) -> int:
        """Value of bits [offset, offset + nbits), independent of cursor."""
        value = 0
        taken = 0
        while taken < nbits:
            block_idx, inner = divmod(offset + taken, self.BLOCK_BITS)
            chunk = min(nbits - taken, self.BLOCK_BITS - inner)
            block = self._block(block_idx)
            piece = (block >> (self.BLOCK_BITS - inner - chunk)) & ((1 << chunk) - 1)
            value = (value << chunk) | piece
            taken += chunk
        return value

    def take(self, nbits: int, component: str = "") -> tuple[Bitstring, LedgerEntry]:
        if nbits < 0:
            raise ValueError("cannot draw a negative number of bits")
        value = self._bits_at(self._consumed, nbits)
        entry = LedgerEntry(component or self.stream_id, self.stream_id,
                            self._consumed, nbits)
        self._consumed += nbits
        return Bitstring(value, nbits), entry

    def peek_range(self, offset: int, nbits: int) -> Bitstring:
        return Bitstring(self._bits_at(offset, nbits), nbits)

    @property
    def consumed(self) -> int:
        return self._consumed


def require_ledger(ledger: SourceLedger | None) -> SourceLedger:
    if ledger is None:
        raise MissingLedger("exact bookkeeping requires a generation ledger")
    return ledger
