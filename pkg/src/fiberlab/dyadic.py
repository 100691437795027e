"""Finite-precision dyadic encodings.

Scalars are stored as integer mantissas at a power-of-two scale: the
scalar (m, r) denotes m * 2**-r.  Truncation is floor-based in every
direction, so coarsening a fine truncation always reproduces the coarse
one (nesting).  Fixed-width coordinate codes and the self-delimiting
pair code below are the only two payload formats used elsewhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

from .errors import MalformedHeader, OutOfBox, PrecisionOverflow

# Public truncation precisions are capped here; working grids inside the
# inversion machine may run finer (up to PREC_MAX) so that r + c_minus
# stays representable for every built-in model at r = R_MAX.
R_MAX = 48
PREC_MAX = 60
_MANT_LIMIT = 1 << 62

Real = Union[int, float, Fraction]


def _to_fraction(x: Real) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x)  # floats convert exactly


def _check_precision(r: int, cap: int = PREC_MAX) -> None:
    if not isinstance(r, int) or r < 0:
        raise ValueError(f"precision must be a non-negative integer, got {r!r}")
    if r > cap:
        raise PrecisionOverflow(f"precision {r} exceeds cap {cap}")


def _check_mantissa(m: int) -> None:
    if abs(m) >= _MANT_LIMIT:
        raise PrecisionOverflow(f"mantissa {m} exceeds the 64-bit contract")


@dataclass(frozen=True)
class DyadicScalar:
    """Value mantissa * 2**-precision."""

    mantissa: int
    precision: int

    def __post_init__(self) -> None:
        _check_precision(self.precision)
        _check_mantissa(self.mantissa)

    def as_fraction(self) -> Fraction:
        return Fraction(self.mantissa, 1 << self.precision)

    def as_float(self) -> float:
        return self.mantissa / (1 << self.precision)

    def coarsen(self, r: int) -> "DyadicScalar":
        """Floor-truncate to a coarser precision r <= precision."""
        if r > self.precision:
            raise ValueError("coarsen target must not exceed current precision")
        return DyadicScalar(self.mantissa >> (self.precision - r), r)

    def at_precision(self, r: int) -> "DyadicScalar":
        """Re-express at precision r >= precision (exact)."""
        if r < self.precision:
            raise ValueError("at_precision target below current precision")
        return DyadicScalar(self.mantissa << (r - self.precision), r)


@dataclass(frozen=True)
class DyadicVector:
    mantissas: tuple[int, ...]
    precision: int

    def __post_init__(self) -> None:
        _check_precision(self.precision)
        object.__setattr__(self, "mantissas", tuple(int(m) for m in self.mantissas))
        for m in self.mantissas:
            _check_mantissa(m)

    @property
    def dim(self) -> int:
        return len(self.mantissas)

    def as_fractions(self) -> tuple[Fraction, ...]:
        d = 1 << self.precision
        return tuple(Fraction(m, d) for m in self.mantissas)

    def as_floats(self) -> tuple[float, ...]:
        d = float(1 << self.precision)
        return tuple(m / d for m in self.mantissas)

    def coarsen(self, r: int) -> "DyadicVector":
        if r > self.precision:
            raise ValueError("coarsen target must not exceed current precision")
        shift = self.precision - r
        return DyadicVector(tuple(m >> shift for m in self.mantissas), r)

    def at_precision(self, r: int) -> "DyadicVector":
        if r < self.precision:
            raise ValueError("at_precision target below current precision")
        shift = r - self.precision
        return DyadicVector(tuple(m << shift for m in self.mantissas), r)

    def scalar(self, i: int) -> DyadicScalar:
        return DyadicScalar(self.mantissas[i], self.precision)

    def serialize(self) -> dict:
        return {"r": self.precision, "mantissas": list(self.mantissas)}

    @classmethod
    def deserialize(cls, obj: dict) -> "DyadicVector":
        return cls(tuple(obj["mantissas"]), obj["r"])


def truncate(xs: Sequence[Real], r: int) -> DyadicVector:
    """Floor-truncate a real vector: floor(x_i * 2**r) * 2**-r componentwise."""
    _check_precision(r, R_MAX)
    scale = 1 << r
    ms = []
    for x in xs:
        if isinstance(x, float):
            if not math.isfinite(x):
                raise ValueError("cannot truncate a non-finite value")
            m = math.floor(x * scale)  # scaling by 2**r is exact in binary fp
        else:
            m = math.floor(_to_fraction(x) * scale)
        _check_mantissa(m)
        ms.append(m)
    return DyadicVector(tuple(ms), r)


def truncate_scalar(x: Real, r: int) -> DyadicScalar:
    return truncate((x,), r).scalar(0)


def refine_consistency(xs: Sequence[Real], r: int, r2: int) -> bool:
    """True iff the r-truncation equals the coarsening of the r2-truncation."""
    if r2 < r:
        raise ValueError("need r2 >= r")
    return truncate(xs, r2).coarsen(r) == truncate(xs, r)


class Bitstring:
    """Immutable bit sequence backed by an int (bit 0 is the first bit)."""

    __slots__ = ("_value", "_length")

    def __init__(self, value: int = 0, length: int = 0):
        if length < 0 or value < 0 or value >> length:
            raise ValueError("value does not fit the declared length")
        self._value = value
        self._length = length

    @classmethod
    def from_str(cls, s: str) -> "Bitstring":
        if s and set(s) - {"0", "1"}:
            raise ValueError("bitstring literals may contain only 0 and 1")
        return cls(int(s, 2) if s else 0, len(s))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "Bitstring":
        v, n = 0, 0
        for b in bits:
            v = (v << 1) | (b & 1)
            n += 1
        return cls(v, n)

    @classmethod
    def from_int(cls, value: int, width: int) -> "Bitstring":
        if value < 0 or (width < (value.bit_length())):
            raise ValueError("integer does not fit the requested width")
        return cls(value, width)

    @property
    def value(self) -> int:
        return self._value

    def __len__(self) -> int:
        return self._length

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Bitstring)
            and self._length == other._length
            and self._value == other._value
        )

    def __hash__(self) -> int:
        return hash((self._value, self._length))

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            start, stop, step = idx.indices(self._length)
            if step != 1:
                raise ValueError("bitstring slices must be contiguous")
            if stop <= start:
                return Bitstring()
            width = stop - start
            piece = (self._value >> (self._length - stop)) & ((1 << width) - 1)
            return Bitstring(piece, width)
        if idx < 0:
            idx += self._length
        if not 0 <= idx < self._length:
            raise IndexError("bit index out of range")
        return (self._value >> (self._length - 1 - idx)) & 1

    def __add__(self, other: "Bitstring") -> "Bitstring":
        return Bitstring(
            (self._value << other._length) | other._value,
            self._length + other._length,
        )

    def __iter__(self):
        for i in range(self._length):
            yield self[i]

    def to01(self) -> str:
        return format(self._value, f"0{self._length}b") if self._length else ""

    def __repr__(self) -> str:
        return f"Bitstring('{self.to01()}')"

    def serialize(self) -> dict:
        pad = (-self._length) % 4
        digits = (self._length + 3) // 4
        hexed = format(self._value << pad, f"0{digits}X") if digits else ""
        return {"len": self._length, "hex": hexed}

    @classmethod
    def deserialize(cls, obj: dict) -> "Bitstring":
        n = obj["len"]
        digits = (n + 3) // 4
        raw = int(obj["hex"], 16) if obj["hex"] else 0
        return cls(raw >> ((-n) % 4), n) if digits else cls()


EMPTY_BITS = Bitstring()


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with dyadic rational corners."""

    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        lo = tuple(_to_fraction(v) for v in self.lo)
        hi = tuple(_to_fraction(v) for v in self.hi)
        if len(lo) != len(hi):
            raise ValueError("corner dimension mismatch")
        for a, b in zip(lo, hi):
            if b < a:
                raise ValueError("box upper corner below lower corner")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unit(cls, dim: int) -> "Box":
        return cls((Fraction(0),) * dim, (Fraction(1),) * dim)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def widths(self) -> tuple[Fraction, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    def corner_mantissas(self, r: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Corners scaled by 2**r; corners must be dyadic at precision <= r."""
        scale = 1 << r
        los, his = [], []
        for a, b in zip(self.lo, self.hi):
            fa, fb = a * scale, b * scale
            if fa.denominator != 1 or fb.denominator != 1:
                raise ValueError(f"box corner not dyadic at precision {r}")
            los.append(int(fa))
            his.append(int(fb))
        return tuple(los), tuple(his)

    def contains(self, v: DyadicVector) -> bool:
        return all(
            a <= x <= b for a, b, x in zip(self.lo, self.hi, v.as_fractions())
        )

    def lo_floats(self) -> tuple[float, ...]:
        return tuple(float(a) for a in self.lo)

    def hi_floats(self) -> tuple[float, ...]:
        return tuple(float(b) for b in self.hi)


def _coord_width(lo_m: int, hi_m: int) -> int:
    # exactly ceil(log2(count)) bits for count = hi_m - lo_m + 1 grid values
    count = hi_m - lo_m + 1
    return (count - 1).bit_length()


def encode_fixed(v: DyadicVector, box: Box) -> Bitstring:
    """Per-component offset mantissas at fixed width determined by the box."""
    if box.dim != v.dim:
        raise ValueError("box dimension mismatch")
    lo_m, hi_m = box.corner_mantissas(v.precision)
    out = Bitstring()
    for m, a, b in zip(v.mantissas, lo_m, hi_m):
        if not a <= m <= b:
            raise OutOfBox(f"mantissa {m} outside [{a}, {b}] at r={v.precision}")
        width = _coord_width(a, b)
        if width >= 64:
            raise PrecisionOverflow("fixed-width component exceeds 64 bits")
        out = out + Bitstring(m - a, width)
    return out


def decode_fixed(bits: Bitstring, box: Box, r: int, d: int) -> DyadicVector:
    if box.dim != d:
        raise ValueError("box dimension mismatch")
    lo_m, hi_m = box.corner_mantissas(r)
    ms, pos = [], 0
    for a, b in zip(lo_m, hi_m):
        width = _coord_width(a, b)
        if pos + width > len(bits):
            raise MalformedHeader("fixed-width payload shorter than declared box")
        ms.append(a + bits[pos : pos + width].value)
        pos += width
    if pos != len(bits):
        raise MalformedHeader("fixed-width payload longer than declared box")
    v = DyadicVector(tuple(ms), r)
    if not box.contains(v):
        raise OutOfBox("decoded vector escapes the box")
    return v


def _length_header(n: int) -> Bitstring:
    """Self-delimiting code for a length: each binary digit is carried with
    a continuation flag, so the header costs 2*ceil(log2(n+1)) bits for
    n >= 1 and 2 bits for n = 0."""
    digits = format(n, "b")
    pairs = []
    for i, d in enumerate(digits):
        pairs.append("1" if i < len(digits) - 1 else "0")
        pairs.append(d)
    return Bitstring.from_str("".join(pairs))


def encode_pair(p: Bitstring, q: Bitstring) -> Bitstring:
    return _length_header(len(p)) + p + q


def decode_pair(bits: Bitstring) -> tuple[Bitstring, Bitstring]:
    digits = []
    pos = 0
    while True:
        if pos + 2 > len(bits):
            raise MalformedHeader("length header runs past end of input")
        cont, d = bits[pos], bits[pos + 1]
        digits.append(d)
        pos += 2
        if not cont:
            break
    if len(digits) > 1 and digits[0] == 0:
        raise MalformedHeader("non-canonical length header")
    n = 0
    for d in digits:
        n = (n << 1) | d
    if pos + n > len(bits):
        raise MalformedHeader("declared first-component length exceeds input")
    return bits[pos : pos + n], bits[pos + n :]


def header_length(p_len: int) -> int:
    """Bit cost of the pair-code header for a first component of p_len bits."""
    return 2 * max(1, p_len.bit_length())
