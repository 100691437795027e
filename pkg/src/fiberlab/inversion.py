"""Composition and grid-inversion programs with exact bit accounting.

compose() evaluates psi on dyadic inputs, truncates, and prices the
forward program (length header, label payload, fiber payload, precision
parameter).  invert_enumerate() scans the fine parameter grid in
lexicographic order for points whose truncated image sits within the
acceptance radius of the observation, then disambiguates among the
candidate coarse cells inside a fixed pointer ball around the first
match.  Truncation is lossy, so distinct cells can be consistent with
one observation; the returned pointer index (charged at a constant
width) is what closes that gap.  Callers that know the generating
parameters may pass them as advice, which reproduces the protocol where
the pointer is hardwired rather than searched for; without advice the
strictest reproduction test is applied and AmbiguousCandidates is
raised when it still leaves more than one cell.

All accept/reject decisions are integer comparisons on fixed-point
mantissas, never float equality, so results are reproducible bit for
bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .dyadic import (
    PREC_MAX,
    R_MAX,
    Bitstring,
    DyadicScalar,
    DyadicVector,
    _coord_width,
    decode_fixed,
    decode_pair,
    encode_fixed,
    encode_pair,
    header_length,
)
from .errors import (
    AmbiguousCandidates,
    EnumerationBudgetExceeded,
    InsufficientData,
    NoMatch,
    PrecisionOverflow,
)
from .fibering import FiberingModel, eval_psi
from .ledger import LedgerEntry

__all__ = [
    "GridConstants",
    "constants_for",
    "BitBudget",
    "ComposeResult",
    "compose",
    "decode_program",
    "InversionResult",
    "invert_enumerate",
    "invert_fast",
    "OverheadFit",
    "overhead_fit",
]


def _min_power_exponent(q: Fraction) -> int:
    """Smallest integer c with 4**c >= q, by exact rational comparison."""
    if q <= 0:
        raise ValueError("argument must be positive")
    c = 0
    while Fraction(4) ** c < q:
        c += 1
    while Fraction(4) ** (c - 1) >= q:
        c -= 1
    return c


@dataclass(frozen=True)
class GridConstants:
    """Scale offsets, pointer-ball size, and working precision.

    c_plus = ceil(log2(L2*sqrt(n))) bounds the precision an image
    coordinate gains over the parameters; c_minus = ceil(log2(4*L2*
    sqrt(n)/L1)) + 1 is the extra precision of the search grid; the
    pointer ball holds M = (2*ceil(3/L1)+1)**n coarse cells.  All are
    computed by exact rational comparisons (no float log2).
    """

    lip_lower: Fraction
    lip_upper: Fraction
    dim: int
    r: int
    c_plus: int
    c_minus: int
    ball_halfwidth: int
    M: int
    s: int

    @property
    def pointer_bits(self) -> int:
        return (self.M - 1).bit_length() if self.M > 1 else 0


def constants_for(fib: FiberingModel, r: int) -> GridConstants:
    l1, l2 = Fraction(fib.lip_lower), Fraction(fib.lip_upper)
    if l1 <= 0 or l2 <= 0:
        raise ValueError("declared bounds must be positive")
    n = fib.ambient_dim
    c_plus = max(0, _min_power_exponent(l2 * l2 * n))
    c_minus = max(0, _min_power_exponent(Fraction(16) * (l2 / l1) ** 2 * n) + 1)
    s = r + c_minus
    # The public precision cap is R_MAX; the working grid may exceed it
    # by the fixed model-dependent offset, up to the internal cap.
    if r > R_MAX or s > PREC_MAX:
        raise PrecisionOverflow(
            f"inversion at r={r} needs working precision {s} "
            f"(caps: r ≤ {R_MAX}, working ≤ {PREC_MAX})"
        )
    halfwidth = math.ceil(Fraction(3) / l1)
    M = (2 * halfwidth + 1) ** n
    return GridConstants(l1, l2, n, r, c_plus, c_minus, halfwidth, M, s)


@dataclass(frozen=True)
class BitBudget:
    """Exact bit account of one program.

    pair_header = 2*ceil(log2(payload_z+1)) prices the self-delimiting
    label payload; r_param = ceil(log2 r) prices transmitting r;
    pointer is 0 for composition and the fixed pointer width for
    inversion.
    """

    payload_z: int
    payload_u: int
    pair_header: int
    r_param: int
    pointer: int = 0

    @property
    def overhead(self) -> int:
        return self.pair_header + self.r_param + self.pointer

    @property
    def total(self) -> int:
        return self.payload_z + self.payload_u + self.overhead


def _r_param_bits(r: int) -> int:
    return (r - 1).bit_length()


@dataclass(frozen=True)
class ComposeResult:
    r: int
    label: DyadicVector
    fiber: DyadicScalar
    x: tuple[float, ...]
    x_trunc: DyadicVector
    program: Bitstring
    budget: BitBudget
    deps: tuple[LedgerEntry, ...] = ()


def compose(fib: FiberingModel, z: DyadicVector, u: DyadicScalar, r: int) -> ComposeResult:
    """Evaluate psi(z, u), truncate at r, and price the forward program."""
    if z.precision != r or u.precision != r:
        raise ValueError("compose expects label and fiber at the stated precision")
    gc = constants_for(fib, r)
    x = eval_psi(fib, z, u)
    # evaluate at r + c_plus, then floor down to r; floors nest, so this
    # equals flooring at r directly, but keep the two-step form honest
    fine = tuple(int(math.floor(v * (1 << (r + gc.c_plus)))) for v in x)
    x_trunc = DyadicVector(tuple(m >> gc.c_plus for m in fine), r)
    z_bits = encode_fixed(z, fib.label_box)
    u_bits = encode_fixed(DyadicVector((u.mantissa,), r), fib.fiber_box)
    program = encode_pair(z_bits, u_bits)
    budget = BitBudget(
        payload_z=len(z_bits),
        payload_u=len(u_bits),
        pair_header=header_length(len(z_bits)),
        r_param=_r_param_bits(r),
        pointer=0,
    )
    deps = fib.generation_deps(z.as_floats(), r) if fib.generation_deps else ()
    return ComposeResult(r, z, DyadicScalar(u.mantissa, r), x, x_trunc, program, budget, deps)


def decode_program(fib: FiberingModel, program: Bitstring, r: int) -> tuple[DyadicVector, DyadicScalar]:
    z_bits, rest = decode_pair(program)
    z = decode_fixed(z_bits, fib.label_box, r, fib.label_dim)
    u_vec = decode_fixed(rest, fib.fiber_box, r, 1)
    return z, DyadicScalar(u_vec.mantissas[0], r)


@dataclass(frozen=True)
class InversionResult:
    r: int
    s: int
    z_trunc: DyadicVector
    u_trunc: DyadicScalar
    first_match: tuple[DyadicVector, DyadicScalar]
    pointer_index: int
    cells_scanned: int
    budget: BitBudget
    strategy: str  # "advice" | "strict"
    candidates: tuple[tuple[DyadicVector, DyadicScalar], ...]

    @property
    def pointer_payload(self) -> Bitstring:
        return Bitstring.from_int(self.pointer_index, self.budget.pointer)


# --------------------------------------------------------------- fine search


def _acceptance_threshold(shift: int) -> int:
    # squared Euclidean radius (2 * 2**-r)**2 in units of 4**-s
    return 4 ** (shift + 1)


def _grid_axes(fib: FiberingModel, s: int) -> tuple[list, int, int]:
    lo_m, hi_m = fib.label_box.corner_mantissas(s)
    (ulo,), (uhi,) = fib.fiber_box.corner_mantissas(s)
    return [range(a, b + 1) for a, b in zip(lo_m, hi_m)], ulo, uhi


def _windowed_label_values(fib: FiberingModel, s: int, xf, tol: float):
    """Label mantissa arrays restricted by the model's analytic window
    (a conservative superset of all labels whose fiber can pass the
    acceptance test), or the full grid when no window is available."""
    scale = float(1 << s)
    lo_m, hi_m = fib.label_box.corner_mantissas(s)
    if fib.label_window is not None and len(lo_m) == 1:
        windows = fib.label_window(tuple(xf), tol)
        a = min(w[0] for w in windows)
        b = max(w[1] for w in windows)
        # widen by the float rounding of the O(1) window endpoints,
        # which spans real grid steps once s outruns the mantissa
        guard = 2 + (1 << max(0, s - 49))
        glo = max(lo_m[0], int(math.floor(a * scale)) - guard)
        ghi = min(hi_m[0], int(math.ceil(b * scale)) + guard)
        if glo > ghi:
            return [np.empty(0, dtype=np.int64)]
        return [np.arange(glo, ghi + 1, dtype=np.int64)]
    return [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo_m, hi_m)]


def _candidate_mesh(axes: list, max_cells: int) -> np.ndarray:
    total = 1
    for ax in axes:
        total *= len(ax)
    if total > max_cells:
        raise EnumerationBudgetExceeded(
            f"fine label grid has {total} points, budget {max_cells}"
        )
    if len(axes) == 1:
        return axes[0][:, None]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.reshape(-1) for m in mesh])


def _match_tolerance(fib: FiberingModel, r: int, s: int) -> float:
    # real-distance relaxation implied by the integer predicate: the
    # s-truncation moves each coordinate by < 2**-s, plus an absolute
    # pad for float64 evaluation noise (the pad dominates only once
    # 2**-r itself approaches float granularity)
    return 2.0 * 2.0 ** -r + (math.sqrt(fib.ambient_dim) + 4.0) * 2.0 ** -s + 2.0 ** -46


_UNINFORMATIVE_SLOPE = 2.0 ** -20


def _label_u_window(fib, labels: np.ndarray, s: int, xf: np.ndarray, tol: float):
    """Per-label u-mantissa windows covering every possible acceptor.

    An acceptor within real distance tol of xf is within tol in every
    coordinate, so u lies in the intersection over coordinates k of
    (v_k - tol)/phi_k .. (v_k + tol)/phi_k (orientation fixed by the
    sign of phi_k; near-flat coordinates constrain nothing and are
    skipped). Each bound is a single quotient of O(1) quantities, so
    its float error is linear in eps and absorbed by the tol pad plus
    the two-step widening; there is no cancellation-sensitive term.
    """
    scale = float(1 << s)
    Z = labels.astype(float) / scale
    A = fib.basepoint_rows(Z)
    PHI = fib.direction_rows(Z)
    V = xf[None, :] - A
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = (V - tol) / PHI
        hi = (V + tol) / PHI
    flip = PHI < 0.0
    lo, hi = np.where(flip, hi, lo), np.where(flip, lo, hi)
    informative = np.abs(PHI) > _UNINFORMATIVE_SLOPE
    (ulo,), (uhi,) = fib.fiber_box.corner_mantissas(s)
    box_lo, box_hi = ulo / scale - 1.0, uhi / scale + 1.0
    lo = np.where(informative, np.clip(lo, box_lo, box_hi), box_lo)
    hi = np.where(informative, np.clip(hi, box_lo, box_hi), box_hi)
    u_lo = np.max(lo, axis=1)
    u_hi = np.min(hi, axis=1)
    u_a = np.maximum(np.ceil(u_lo * scale).astype(np.int64) - 2, ulo)
    u_b = np.minimum(np.floor(u_hi * scale).astype(np.int64) + 2, uhi)
    keep = u_b >= u_a
    return A, PHI, u_a, u_b, keep


def _matches_vectorized(fib, x_trunc, r, s, max_cells):
    """All fine-grid acceptors in lexicographic order, plus cells scanned.

    The defining evaluation is float64: mantissa = floor(a*2**s + u*phi)
    with u the integer fiber mantissa, identical in the enumerated path.
    """
    shift = s - r
    scale = float(1 << s)
    xf = np.asarray(x_trunc.as_floats())
    tol = _match_tolerance(fib, r, s)
    axes = _windowed_label_values(fib, s, xf, tol)
    if any(len(ax) == 0 for ax in axes):
        raise NoMatch("no fine grid point passes the acceptance test")
    labels = _candidate_mesh(axes, max_cells)
    A, PHI, u_a, u_b, keep = _label_u_window(fib, labels, s, xf, tol)
    keep &= u_b >= u_a
    if not np.any(keep):
        raise NoMatch("no fine grid point passes the acceptance test")
    labels, A, PHI = labels[keep], A[keep], PHI[keep]
    u_a, u_b = u_a[keep], u_b[keep]
    counts = u_b - u_a + 1
    rows = np.repeat(np.arange(len(labels)), counts)
    offsets = np.arange(int(counts.sum())) - np.repeat(
        np.concatenate([[0], np.cumsum(counts)[:-1]]), counts
    )
    u_m = np.repeat(u_a, counts) + offsets
    mant = np.floor(A[rows] * scale + u_m.astype(float)[:, None] * PHI[rows]).astype(np.int64)
    target = np.asarray([m << shift for m in x_trunc.mantissas], dtype=np.int64)
    d2 = np.sum((mant - target[None, :]) ** 2, axis=1)
    ok = d2 <= _acceptance_threshold(shift)
    if not np.any(ok):
        raise NoMatch("no fine grid point passes the acceptance test")
    return labels[rows[ok]], u_m[ok], int(len(u_m))


def _matches_enumerated(fib, x_trunc, r, s, max_cells):
    """Lexicographic per-label scan with the same accept predicate.

    Labels outside the analytic window, and fiber values outside the
    per-label convexity window, cannot contain acceptors (both windows
    over-cover the acceptance radius), so skipping them leaves the match
    list, and in particular the first match, unchanged.
    """
    shift = s - r
    scale = float(1 << s)
    xf = np.asarray(x_trunc.as_floats())
    tol = _match_tolerance(fib, r, s)
    axes = _windowed_label_values(fib, s, xf, tol)
    if any(len(ax) == 0 for ax in axes):
        raise NoMatch("no fine grid point passes the acceptance test")
    labels = _candidate_mesh(axes, max_cells)
    A, PHI, u_a, u_b, keep = _label_u_window(fib, labels, s, xf, tol)
    A_scaled = A * scale
    target = np.asarray([m << shift for m in x_trunc.mantissas], dtype=np.int64)
    threshold = _acceptance_threshold(shift)
    lab_hits: list[np.ndarray] = []
    u_hits: list[np.ndarray] = []
    scanned = 0
    arange, floor, nonzero = np.arange, np.floor, np.nonzero
    for i in np.nonzero(keep & (u_b >= u_a))[0]:
        u_all = arange(u_a[i], u_b[i] + 1, dtype=np.int64)
        scanned += len(u_all)
        mant = floor(A_scaled[i] + u_all.astype(float)[:, None] * PHI[i]).astype(np.int64)
        d2 = np.sum((mant - target) ** 2, axis=1)
        hits = nonzero(d2 <= threshold)[0]
        if len(hits):
            lab_hits.append(np.broadcast_to(labels[i], (len(hits), labels.shape[1])))
            u_hits.append(u_all[hits])
    if not u_hits:
        raise NoMatch("no fine grid point passes the acceptance test")
    return np.concatenate(lab_hits), np.concatenate(u_hits), scanned


# ------------------------------------------------------------ cell pointers


def _distinct_cells(lab_arr, u_arr, shift: int) -> list[tuple[tuple[int, ...], int]]:
    """Coarse r-cells hit by the match list, first-occurrence order.

    Arithmetic right shift floors negatives the same way Python's >> does,
    so this is the exact coarsening of each fine-grid acceptor.
    """
    coarse = np.concatenate([lab_arr >> shift, (u_arr >> shift)[:, None]], axis=1)
    _, first_idx = np.unique(coarse, axis=0, return_index=True)
    cells = []
    for i in sorted(first_idx):
        row = coarse[i]
        cells.append((tuple(int(v) for v in row[:-1]), int(row[-1])))
    return cells


def _ball_offset_index(anchor, cell, halfwidth: int) -> Optional[int]:
    width = 2 * halfwidth + 1
    idx = 0
    for a, t in zip(anchor[0] + (anchor[1],), cell[0] + (cell[1],)):
        d = t - a
        if abs(d) > halfwidth:
            return None
        idx = idx * width + (d + halfwidth)
    return idx


def _strict_consistent(fib, cell, x_trunc, r) -> bool:
    """Does the cell's own r-grid corner reproduce the observed truncation?"""
    lab, um = cell
    fscale = float(1 << r)
    Z = np.asarray([[m / fscale for m in lab]])
    p = fib.basepoint_rows(Z)[0] + (um / fscale) * fib.direction_rows(Z)[0]
    return tuple(int(math.floor(v * fscale)) for v in p) == x_trunc.mantissas


def _payload_budget(fib: FiberingModel, r: int, pointer: int) -> BitBudget:
    lo_m, hi_m = fib.label_box.corner_mantissas(r)
    payload_z = sum(_coord_width(a, b) for a, b in zip(lo_m, hi_m))
    (ulo,), (uhi,) = fib.fiber_box.corner_mantissas(r)
    payload_u = _coord_width(ulo, uhi)
    return BitBudget(
        payload_z=payload_z,
        payload_u=payload_u,
        pair_header=header_length(payload_z),
        r_param=_r_param_bits(r),
        pointer=pointer,
    )


def _finish_inversion(fib, x_trunc, r, gc, matches, scanned, truth):
    shift = gc.s - r
    lab_arr, u_arr = matches
    cells = _distinct_cells(lab_arr, u_arr, shift)
    anchor = cells[0]
    seen = set(cells)
    in_ball = [
        c for c in cells
        if _ball_offset_index(anchor, c, gc.ball_halfwidth) is not None
    ]
    in_ball.sort()
    budget = _payload_budget(fib, r, gc.pointer_bits)
    first = (
        DyadicVector(tuple(int(v) for v in lab_arr[0]), gc.s),
        DyadicScalar(int(u_arr[0]), gc.s),
    )

    def result(cell, strategy):
        idx = _ball_offset_index(anchor, cell, gc.ball_halfwidth)
        if idx is None:
            raise NoMatch(
                "selected cell falls outside the pointer ball; declared "
                "lower bound too optimistic for this model"
            )
        return InversionResult(
            r, gc.s, DyadicVector(cell[0], r), DyadicScalar(cell[1], r),
            first, idx, scanned, budget, strategy,
            tuple(
                (DyadicVector(c[0], r), DyadicScalar(c[1], r)) for c in in_ball
            ),
        )

    if truth is not None:
        z_t, u_t = truth
        if z_t.precision != r or u_t.precision != r:
            raise ValueError("advice must be given at the inversion precision")
        cell = (z_t.mantissas, u_t.mantissa)
        if cell not in seen:
            raise NoMatch("advice cell contains no accepted fine grid point")
        return result(cell, "advice")

    strict = [c for c in in_ball if _strict_consistent(fib, c, x_trunc, r)]
    if not strict:
        raise NoMatch("no candidate cell reproduces the observed truncation")
    if len(strict) > 1:
        raise AmbiguousCandidates(
            f"{len(strict)} candidate cells reproduce the truncation",
            candidates=tuple(
                (DyadicVector(c[0], r), DyadicScalar(c[1], r)) for c in strict
            ),
        )
    return result(strict[0], "strict")


def invert_enumerate(
    fib: FiberingModel,
    x_trunc: DyadicVector,
    r: int,
    truth: Optional[tuple[DyadicVector, DyadicScalar]] = None,
    max_cells: int = 100_000_000,
) -> InversionResult:
    """Grid inversion by lexicographic enumeration (labels first, fiber
    coordinate fastest), halting logic expressed as first-in-order over
    the complete accept set."""
    gc = constants_for(fib, r)
    lab, u, scanned = _matches_enumerated(fib, x_trunc, r, gc.s, max_cells)
    return _finish_inversion(fib, x_trunc, r, gc, (lab, u), scanned, truth)


def invert_fast(
    fib: FiberingModel,
    x_trunc: DyadicVector,
    r: int,
    truth: Optional[tuple[DyadicVector, DyadicScalar]] = None,
    max_cells: int = 100_000_000,
) -> InversionResult:
    """Vectorized inversion; agrees with invert_enumerate exactly (the
    per-label u windows provably cover every acceptor, and the accept
    predicate is the same integer comparison)."""
    gc = constants_for(fib, r)
    lab, u, scanned = _matches_vectorized(fib, x_trunc, r, gc.s, max_cells)
    return _finish_inversion(fib, x_trunc, r, gc, (lab, u), scanned, truth)


@dataclass(frozen=True)
class OverheadFit:
    slope: float
    intercept: float
    max_residual: float


def overhead_fit(budgets: Sequence[BitBudget], rs: Sequence[int]) -> OverheadFit:
    """Least-squares fit of non-payload bits against log2 r."""
    if len(budgets) != len(rs):
        raise ValueError("one budget per precision required")
    if len(set(rs)) < 4:
        raise InsufficientData("need at least 4 distinct precisions")
    xs = np.log2(np.asarray(rs, dtype=float))
    ys = np.asarray([b.overhead for b in budgets], dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    return OverheadFit(float(slope), float(intercept), float(np.max(np.abs(resid))))
