"""Fibered-set models psi(z, u) = a(z) + u * phi(z).

A FiberingModel is a parametrized family of line fibers over a box of
labels z, with declared bi-Lipschitz constants for the joint map.  A
FiberFamily is a finite union of explicit fibers (crossing pairs) or of
charts (stitched atlases); its label sets are tagged by member index,
since two charts may hand the same point labels that are numerically
equal but not canonically identified.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .dyadic import Box, Bitstring, DyadicScalar, DyadicVector, truncate
from .errors import (
    CoverageGap,
    EnumerationBudgetExceeded,
    OutOfBox,
    UnsupportedDimension,
)
from .ledger import BitStream, LedgerEntry, SourceLedger

R_ENUM = 12
DEFAULT_CELL_BUDGET = 100_000_000
_IRREGULAR_PIECES = 8
_IRREGULAR_COORD_BITS = 48


@dataclass(frozen=True)
class BasepointSpec:
    """Regularity of the basepoint map: lipschitz(L) or irregular(seed)."""

    kind: str
    lip: Fraction | None = None
    seed: int | None = None

    @classmethod
    def parse(cls, text: str) -> "BasepointSpec":
        kind, _, arg = text.partition(":")
        if kind == "lipschitz":
            lip = Fraction(arg or "1/2")
            if lip <= 0:
                raise ValueError("lipschitz coefficient must be positive")
            return cls("lipschitz", lip=lip)
        if kind == "irregular":
            return cls("irregular", seed=int(arg or "0"))
        raise ValueError(f"unknown basepoint kind {kind!r}")


@dataclass(frozen=True, eq=False)
class FiberingModel:
    name: str
    label_dim: int
    ambient_dim: int
    label_box: Box
    fiber_box: Box
    ambient_box: Box
    lip_lower: Fraction
    lip_upper: Fraction
    identifiable: bool
    basepoint_rows: Callable[[np.ndarray], np.ndarray]
    direction_rows: Callable[[np.ndarray], np.ndarray]
    # conservative label window containing every fiber passing within tol
    # of x; None means no analytic inverse is available
    label_window: Optional[Callable[[Sequence[float], float], list[tuple[float, float]]]] = None
    # construction-randomness the point x = psi(z, u) depends on, as ledger
    # entries at the requested precision (irregular basepoint tables)
    generation_deps: Optional[Callable[[Sequence[float], int], tuple[LedgerEntry, ...]]] = None
    metadata: dict = field(default_factory=dict)

    def basepoint(self, z: Sequence[float]) -> tuple[float, ...]:
        return tuple(self.basepoint_rows(np.asarray([z], dtype=float))[0])

    def direction(self, z: Sequence[float]) -> tuple[float, ...]:
        return tuple(self.direction_rows(np.asarray([z], dtype=float))[0])


def _as_label_floats(z, dim: int) -> tuple[float, ...]:
    if isinstance(z, DyadicVector):
        zz = z.as_floats()
    elif isinstance(z, DyadicScalar):
        zz = (z.as_float(),)
    else:
        zz = tuple(float(v) for v in z)
    if len(zz) != dim:
        raise ValueError(f"label has dimension {len(zz)}, expected {dim}")
    return zz


def _as_fiber_float(u) -> float:
    if isinstance(u, DyadicScalar):
        return u.as_float()
    if isinstance(u, DyadicVector):
        if u.dim != 1:
            raise ValueError("fiber coordinate must be one-dimensional")
        return u.as_floats()[0]
    return float(u)


def eval_psi(fib: FiberingModel, z, u) -> tuple[float, ...]:
    """psi(z, u) = a(z) + u * phi(z), with box preconditions enforced."""
    zz = _as_label_floats(z, fib.label_dim)
    uu = _as_fiber_float(u)
    for v, lo, hi in zip(zz, fib.label_box.lo_floats(), fib.label_box.hi_floats()):
        if not lo <= v <= hi:
            raise OutOfBox(f"label coordinate {v} outside [{lo}, {hi}]")
    ulo, uhi = fib.fiber_box.lo_floats()[0], fib.fiber_box.hi_floats()[0]
    if not ulo <= uu <= uhi:
        raise OutOfBox(f"fiber coordinate {uu} outside [{ulo}, {uhi}]")
    Z = np.asarray([zz], dtype=float)
    row = fib.basepoint_rows(Z)[0] + uu * fib.direction_rows(Z)[0]
    return tuple(float(v) for v in row)


def psi_rows(fib: FiberingModel, Z: np.ndarray, U: np.ndarray) -> np.ndarray:
    return fib.basepoint_rows(Z) + U[:, None] * fib.direction_rows(Z)


def _circle_rows(thetas: np.ndarray) -> np.ndarray:
    return np.column_stack([np.cos(thetas), np.sin(thetas)])


def _sphere_rows(Z: np.ndarray) -> np.ndarray:
    th, ph = Z[:, 0], Z[:, 1]
    cph = np.cos(ph)
    return np.column_stack([cph * np.cos(th), cph * np.sin(th), np.sin(ph)])


def make_identity() -> FiberingModel:
    """Axis-aligned fibering: a(z) = (z, 0), phi = (0, 1), psi(z, u) = (z, u)."""

    def base(Z: np.ndarray) -> np.ndarray:
        return np.column_stack([Z[:, 0], np.zeros(len(Z))])

    def direc(Z: np.ndarray) -> np.ndarray:
        return np.column_stack([np.zeros(len(Z)), np.ones(len(Z))])

    return FiberingModel(
        name="identity",
        label_dim=1,
        ambient_dim=2,
        label_box=Box.unit(1),
        fiber_box=Box.unit(1),
        ambient_box=Box.unit(2),
        lip_lower=Fraction(1),
        lip_upper=Fraction(1),
        identifiable=True,
        basepoint_rows=base,
        direction_rows=direc,
        label_window=lambda x, tol: [(x[0] - tol, x[0] + tol)],
        metadata={"kind": "identity"},
    )


def make_axis_chart(lo, hi) -> FiberingModel:
    """Identity-style chart over a label subinterval: vertical unit fibers
    above z in [lo, hi]. The building block for stitched atlases."""
    lo_f, hi_f = Fraction(lo), Fraction(hi)
    if not 0 <= lo_f < hi_f <= 1:
        raise ValueError("chart interval must satisfy 0 <= lo < hi <= 1")

    def base(Z: np.ndarray) -> np.ndarray:
        return np.column_stack([Z[:, 0], np.zeros(len(Z))])

    def direc(Z: np.ndarray) -> np.ndarray:
        return np.column_stack([np.zeros(len(Z)), np.ones(len(Z))])

    return FiberingModel(
        name=f"chart[{lo_f},{hi_f}]",
        label_dim=1,
        ambient_dim=2,
        label_box=Box((lo_f,), (hi_f,)),
        fiber_box=Box.unit(1),
        ambient_box=Box.unit(2),
        lip_lower=Fraction(1),
        lip_upper=Fraction(1),
        identifiable=True,
        basepoint_rows=base,
        direction_rows=direc,
        label_window=lambda x, tol: [(x[0] - tol, x[0] + tol)],
        metadata={"kind": "axis-chart", "lo": str(lo_f), "hi": str(hi_f)},
    )


def _draw_basepoint_table(seed: int, pieces: int, dim: int) -> tuple[np.ndarray, str]:
    stream = BitStream(seed, name="basepoint")
    table = np.empty((pieces, dim))
    for j in range(pieces):
        for k in range(dim):
            bits, _ = stream.take(_IRREGULAR_COORD_BITS, component=f"a{j}.{k}")
            # values in [0, 1/4): exact dyadic rationals, exact in float64
            table[j, k] = bits.value / (1 << (_IRREGULAR_COORD_BITS + 2))
    return table, stream.stream_id


def _piece_index(theta: float) -> int:
    return min(_IRREGULAR_PIECES - 1, max(0, int(math.floor(theta * _IRREGULAR_PIECES))))


def make_kakeya_linear(n: int, basepoint: BasepointSpec | str) -> FiberingModel:
    """Directional fibering over a chart of the unit sphere.

    Fibers are radial segments x = a(e) + t * e for t in [0, 1].  With a
    lipschitz(L) basepoint, a(e) = L * e, so points sit at radius L + t;
    the declared bi-Lipschitz constants are conservative rationals valid
    on the whole chart.  With an irregular(seed) basepoint, a is constant
    on each of 8 chart pieces with seeded values, which deliberately
    breaks injectivity (all fibers of a piece meet at t = 0).
    """
    if n not in (2, 3):
        raise UnsupportedDimension(f"ambient dimension {n} not supported")
    spec = BasepointSpec.parse(basepoint) if isinstance(basepoint, str) else basepoint
    rows = _circle_rows if n == 2 else _sphere_rows

    def direc(Z: np.ndarray) -> np.ndarray:
        return rows(np.asarray(Z, dtype=float)) if n == 3 else _circle_rows(Z[:, 0])

    if spec.kind == "lipschitz":
        lip = spec.lip
        lipf = float(lip)

        def base(Z: np.ndarray) -> np.ndarray:
            return lipf * direc(Z)

        window = None
        if n == 2:
            def window(x: Sequence[float], tol: float) -> list[tuple[float, float]]:
                rho = math.hypot(x[0], x[1])
                if rho <= tol:
                    return [(0.0, 1.0)]
                half = math.asin(min(1.0, tol / rho))
                theta = math.atan2(x[1], x[0])
                return [(theta - half, theta + half)]

        lo_frac = Fraction(27, 32) if n == 2 else Fraction(3, 8)
        extent = int(math.ceil(float(lip + 1)))
        return FiberingModel(
            name=f"kakeya{n}d-lipschitz",
            label_dim=n - 1,
            ambient_dim=n,
            label_box=Box.unit(n - 1),
            fiber_box=Box.unit(1),
            ambient_box=Box((-extent,) * n, (extent,) * n),
            lip_lower=lo_frac * min(Fraction(1), lip),
            lip_upper=lip + 1,
            identifiable=True,
            basepoint_rows=base,
            direction_rows=direc,
            label_window=window,
            metadata={"kind": f"kakeya{n}d", "basepoint": f"lipschitz:{lip}"},
        )

    table, stream_id = _draw_basepoint_table(spec.seed, _IRREGULAR_PIECES, n)

    def base_irregular(Z: np.ndarray) -> np.ndarray:
        idx = np.clip(
            np.floor(np.asarray(Z)[:, 0] * _IRREGULAR_PIECES).astype(int),
            0,
            _IRREGULAR_PIECES - 1,
        )
        return table[idx]

    def deps(z: Sequence[float], r: int) -> tuple[LedgerEntry, ...]:
        j = _piece_index(z[0])
        nbits = min(r, _IRREGULAR_COORD_BITS)
        return tuple(
            LedgerEntry(
                f"a{j}.{k}",
                stream_id,
                (j * n + k) * _IRREGULAR_COORD_BITS,
                nbits,
            )
            for k in range(n)
        )

    return FiberingModel(
        name=f"kakeya{n}d-irregular",
        label_dim=n - 1,
        ambient_dim=n,
        label_box=Box.unit(n - 1),
        fiber_box=Box.unit(1),
        ambient_box=Box((-2,) * n, (2,) * n),
        lip_lower=Fraction(1, 64),  # nominal: the model is built to fail these
        lip_upper=Fraction(2),
        identifiable=False,
        basepoint_rows=base_irregular,
        direction_rows=direc,
        generation_deps=deps,
        metadata={"kind": f"kakeya{n}d", "basepoint": f"irregular:{spec.seed}"},
    )


@dataclass(frozen=True)
class FamilyMember:
    """A single explicit fiber: the segment a + u * direction, u in u_box."""

    label_value: Fraction
    base: tuple[Fraction, ...]
    direction: tuple[int, ...]
    u_box: Box

    def point(self, u: float) -> tuple[float, ...]:
        return tuple(float(a) + u * d for a, d in zip(self.base, self.direction))

    def distance(self, x: Sequence[float]) -> float:
        ulo = self.u_box.lo_floats()[0]
        uhi = self.u_box.hi_floats()[0]
        t = sum((xi - float(a)) * d for xi, a, d in zip(x, self.base, self.direction))
        t = min(max(t, ulo), uhi)
        p = self.point(t)
        return math.sqrt(sum((xi - pi) ** 2 for xi, pi in zip(x, p)))


@dataclass(frozen=True, eq=False)
class FiberFamily:
    name: str
    kind: str  # "crossing" | "stitched"
    ambient_dim: int
    members: tuple[FamilyMember, ...] = ()
    charts: tuple[FiberingModel, ...] = ()
    overlaps: tuple[tuple[int, int, tuple[Fraction, Fraction]], ...] = ()
    metadata: dict = field(default_factory=dict)


def make_crossing_2d(c, c2) -> FiberFamily:
    """Two crossing fibers: horizontal {(t, c)} labeled by its height c,
    vertical {(c2, s)} labeled by its abscissa c2; they meet at (c2, c)."""
    cf, c2f = Fraction(c), Fraction(c2)
    for v in (cf, c2f):
        if not 0 <= v <= 1:
            raise OutOfBox("crossing coordinates must lie in the unit square")
    horizontal = FamilyMember(cf, (Fraction(0), cf), (1, 0), Box.unit(1))
    vertical = FamilyMember(c2f, (c2f, Fraction(0)), (0, 1), Box.unit(1))
    return FiberFamily(
        name="crossing2d",
        kind="crossing",
        ambient_dim=2,
        members=(horizontal, vertical),
        metadata={"kind": "crossing", "c": str(cf), "c2": str(c2f)},
    )


def crossing_point(fam: FiberFamily) -> tuple[Fraction, Fraction]:
    h, v = fam.members
    return (v.label_value, h.label_value)


def make_parallel_2d(heights: Sequence) -> FiberFamily:
    """Disjoint horizontal unit segments, one per height: the simplest
    family in which every point lies on at most one member."""
    hs = tuple(Fraction(h) for h in heights)
    if len(set(hs)) != len(hs):
        raise ValueError("heights must be distinct")
    if any(not 0 <= h <= 1 for h in hs):
        raise OutOfBox("heights must lie in the unit interval")
    members = tuple(
        FamilyMember(h, (Fraction(0), h), (1, 0), Box.unit(1)) for h in hs
    )
    return FiberFamily(
        name="parallel2d",
        kind="parallel",
        ambient_dim=2,
        members=members,
        metadata={"kind": "parallel", "heights": [str(h) for h in hs]},
    )


def make_stitched(
    charts: Sequence[FiberingModel],
    overlaps: Sequence[tuple[int, int, tuple]] | None = None,
    region: tuple | None = None,
) -> FiberFamily:
    """Stitch 1-D-label charts into one family; label sets are chart-tagged.

    Raises CoverageGap unless the chart label intervals cover the target
    region (default: their convex hull).
    """
    charts = tuple(charts)
    if not charts:
        raise ValueError("need at least one chart")
    if any(ch.label_dim != 1 for ch in charts):
        raise ValueError("stitched charts must have one-dimensional labels")
    dims = {ch.ambient_dim for ch in charts}
    if len(dims) != 1:
        raise ValueError("charts must share an ambient dimension")

    spans = [(ch.label_box.lo[0], ch.label_box.hi[0]) for ch in charts]
    if region is None:
        region = (min(a for a, _ in spans), max(b for _, b in spans))
    reg_lo, reg_hi = Fraction(region[0]), Fraction(region[1])
    cover = reg_lo
    for a, b in sorted(spans):
        if a > cover:
            raise CoverageGap(f"charts leave [{cover}, {a}] uncovered")
        cover = max(cover, b)
    if cover < reg_hi:
        raise CoverageGap(f"charts leave [{cover}, {reg_hi}] uncovered")

    computed = []
    for i in range(len(charts)):
        for j in range(i + 1, len(charts)):
            lo = max(spans[i][0], spans[j][0])
            hi = min(spans[i][1], spans[j][1])
            if lo < hi:
                computed.append((i, j, (lo, hi)))
    computed_t = tuple(computed)
    if overlaps is not None:
        declared = tuple(
            (i, j, (Fraction(a), Fraction(b))) for i, j, (a, b) in overlaps
        )
        if set(declared) != set(computed_t):
            raise ValueError("declared overlaps disagree with chart intersections")
    return FiberFamily(
        name="stitched",
        kind="stitched",
        ambient_dim=charts[0].ambient_dim,
        charts=charts,
        overlaps=computed_t,
        metadata={"kind": "stitched", "charts": len(charts)},
    )


def _axis_grid_mantissas(box: Box, r: int) -> list[np.ndarray]:
    lo_m, hi_m = box.corner_mantissas(r)
    return [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo_m, hi_m)]


def _label_grid(box: Box, r: int, max_cells: int) -> tuple[np.ndarray, int]:
    axes = _axis_grid_mantissas(box, r)
    total = 1
    for ax in axes:
        total *= len(ax)
    if total > max_cells:
        raise EnumerationBudgetExceeded(
            f"label grid has {total} cells, budget is {max_cells}"
        )
    if len(axes) == 1:
        return axes[0][:, None], total
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.reshape(-1) for m in mesh]), total


def _model_min_fiber_distance(
    fib: FiberingModel, label_mantissas: np.ndarray, r_grid: int, x: np.ndarray
) -> np.ndarray:
    """Min distance from x to each label's fiber over the u-grid at r_grid.

    The squared distance is convex in u along a line fiber, so the grid
    minimum sits at one of the two grid values bracketing the continuous
    minimizer; checking those two equals brute force over the u-grid.
    """
    scale = float(1 << r_grid)
    Z = label_mantissas.astype(float) / scale
    A = fib.basepoint_rows(Z)
    PHI = fib.direction_rows(Z)
    V = x[None, :] - A
    tstar = np.einsum("ij,ij->i", V, PHI) / np.einsum("ij,ij->i", PHI, PHI)
    ulo_m, uhi_m = fib.fiber_box.corner_mantissas(r_grid)
    best = np.full(len(Z), np.inf)
    t_m = np.floor(tstar * scale)
    for cand in (t_m, t_m + 1.0):
        cm = np.clip(cand, ulo_m[0], uhi_m[0])
        P = A + (cm / scale)[:, None] * PHI
        d = np.sqrt(np.sum((x[None, :] - P) ** 2, axis=1))
        best = np.minimum(best, d)
    return best


def admissible_labels(
    fam,
    x: DyadicVector,
    r: int,
    radius: float | None = None,
    max_cells: int = DEFAULT_CELL_BUDGET,
) -> tuple[tuple[int, DyadicVector], ...]:
    """Label grid points at precision r whose fiber passes within the
    acceptance radius (default 2 * 2**-r) of x, tagged by member/chart."""
    tol = (2.0 * 2.0 ** -r) if radius is None else float(radius)
    xf = np.asarray(x.as_floats(), dtype=float)

    if isinstance(fam, FiberingModel):
        if r > R_ENUM:
            raise EnumerationBudgetExceeded(
                f"label enumeration at r={r} exceeds R_ENUM={R_ENUM}"
            )
        grid, _ = _label_grid(fam.label_box, r, max_cells)
        dist = _model_min_fiber_distance(fam, grid, r, xf)
        hits = np.nonzero(dist <= tol)[0]
        return tuple(
            (0, DyadicVector(tuple(int(m) for m in grid[i]), r)) for i in hits
        )

    out: list[tuple[int, DyadicVector]] = []
    if fam.members:
        for idx, member in enumerate(fam.members):
            if member.distance(xf) <= tol:
                out.append((idx, truncate((member.label_value,), r)))
        return tuple(out)
    for idx, chart in enumerate(fam.charts):
        for _, vec in admissible_labels(chart, x, r, radius=tol, max_cells=max_cells):
            out.append((idx, vec))
    return tuple(out)


def containing_labels(
    fam,
    x: DyadicVector,
    r: int,
    extra: int = 10,
    max_cells: int = DEFAULT_CELL_BUDGET,
) -> tuple[tuple[int, DyadicVector], ...]:
    """Label cells at scale 2**-r certified to contain a parameter whose
    fiber meets x, up to the sub-grid certification threshold.

    Uses a label sub-grid at precision r + extra; a fiber that actually
    passes through x is then caught at distance <= (L2*sqrt(n)+1)*2**-(r+extra).
    """
    if isinstance(fam, FiberingModel):
        s = r + extra
        eps = (float(fam.lip_upper) * math.sqrt(fam.ambient_dim) + 1.0) * 2.0 ** -s
        xf = tuple(x.as_floats())
        if fam.label_window is not None:
            windows = fam.label_window(xf, 4.0 * eps)
            lo_m = [max(int(math.floor(a * (1 << s))), fam.label_box.corner_mantissas(s)[0][k])
                    for k, (a, _) in enumerate(windows)]
            hi_m = [min(int(math.ceil(b * (1 << s))), fam.label_box.corner_mantissas(s)[1][k])
                    for k, (_, b) in enumerate(windows)]
            axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo_m, hi_m)]
            if any(len(ax) == 0 for ax in axes):
                return ()
            if len(axes) == 1:
                grid = axes[0][:, None]
            else:
                mesh = np.meshgrid(*axes, indexing="ij")
                grid = np.column_stack([m.reshape(-1) for m in mesh])
        else:
            grid, _ = _label_grid(fam.label_box, s, max_cells)
        dist = _model_min_fiber_distance(fam, grid, s, np.asarray(xf))
        hits = grid[dist <= eps] >> (s - r)
        cells = sorted({tuple(int(m) for m in row) for row in hits})
        return tuple((0, DyadicVector(cell, r)) for cell in cells)

    if fam.members:
        eps = 4.0 * 2.0 ** -(r + extra)
        xf = tuple(x.as_floats())
        return tuple(
            (idx, truncate((member.label_value,), r))
            for idx, member in enumerate(fam.members)
            if member.distance(xf) <= eps
        )
    out: list[tuple[int, DyadicVector]] = []
    for idx, chart in enumerate(fam.charts):
        for _, vec in containing_labels(chart, x, r, extra=extra, max_cells=max_cells):
            out.append((idx, vec))
    return tuple(out)


def bilipschitz_ratios(fib: FiberingModel, seed: int, npairs: int) -> np.ndarray:
    """Sampled |psi(p1)-psi(p2)| / |p1-p2| ratios over the parameter box."""
    stream = BitStream(seed, name="ratio-pairs")
    dim = fib.label_dim + 1
    vals = np.empty((2 * npairs, dim))
    for i in range(2 * npairs):
        for k in range(dim):
            bits, _ = stream.take(32)
            vals[i, k] = bits.value / 2.0 ** 32
    lo = np.array(fib.label_box.lo_floats() + fib.fiber_box.lo_floats())
    hi = np.array(fib.label_box.hi_floats() + fib.fiber_box.hi_floats())
    pts = lo + vals * (hi - lo)
    P = psi_rows(fib, pts[:, : fib.label_dim], pts[:, -1])
    d_param = np.sqrt(np.sum((pts[:npairs] - pts[npairs:]) ** 2, axis=1))
    d_image = np.sqrt(np.sum((P[:npairs] - P[npairs:]) ** 2, axis=1))
    keep = d_param > 0
    return d_image[keep] / d_param[keep]


@dataclass(frozen=True)
class GarblingSpec:
    """Total post-processing map on label bitstrings."""

    kind: str  # "identity" | "bit-drop" | "coordinate-projection" | "constant"
    drop: int = 0
    indices: tuple[int, ...] = ()
    blocks: int = 1

    @classmethod
    def parse(cls, text: str) -> "GarblingSpec":
        kind, _, arg = text.partition(":")
        if kind == "identity":
            return cls("identity")
        if kind == "bit-drop":
            return cls("bit-drop", drop=int(arg))
        if kind == "constant":
            return cls("constant")
        if kind == "coordinate-projection":
            keep, _, nblocks = arg.partition("/")
            idx = tuple(int(v) for v in keep.split(",") if v != "")
            return cls("coordinate-projection", indices=idx, blocks=int(nblocks or "1"))
        raise ValueError(f"unknown garbling kind {text!r}")

    def label(self) -> str:
        if self.kind == "bit-drop":
            return f"bit-drop:{self.drop}"
        if self.kind == "coordinate-projection":
            return f"coordinate-projection:{','.join(map(str, self.indices))}/{self.blocks}"
        return self.kind


def _block_bounds(total: int, blocks: int) -> list[tuple[int, int]]:
    base, rem = divmod(total, blocks)
    bounds = []
    pos = 0
    for i in range(blocks):
        width = base + (1 if i < rem else 0)
        bounds.append((pos, pos + width))
        pos += width
    return bounds


def apply_garbling(g: GarblingSpec, label_bits: Bitstring) -> Bitstring:
    if g.kind == "identity":
        return label_bits
    if g.kind == "constant":
        return Bitstring()
    if g.kind == "bit-drop":
        keep = max(0, len(label_bits) - g.drop)
        return label_bits[:keep]
    if g.kind == "coordinate-projection":
        bounds = _block_bounds(len(label_bits), g.blocks)
        out = Bitstring()
        for i in sorted(set(g.indices)):
            if 0 <= i < g.blocks:
                a, b = bounds[i]
                out = out + label_bits[a:b]
        return out
    raise ValueError(f"unknown garbling kind {g.kind!r}")


def _slice_entries(entries: Sequence[LedgerEntry], a: int, b: int) -> list[LedgerEntry]:
    """Entries covering payload bit positions [a, b); entries are assumed to
    be listed in payload order with their lengths summing to the payload."""
    out = []
    pos = 0
    for e in entries:
        lo, hi = pos, pos + e.nbits
        pos = hi
        cut_lo, cut_hi = max(a, lo), min(b, hi)
        if cut_lo < cut_hi:
            out.append(
                LedgerEntry(e.name, e.stream, e.offset + (cut_lo - lo), cut_hi - cut_lo)
            )
    return out


def garble_ledger(g: GarblingSpec, ledger: SourceLedger) -> SourceLedger:
    """Mirror of apply_garbling on the payload's generation ledger."""
    total = sum(e.nbits for e in ledger.entries)
    if g.kind == "identity":
        return ledger
    if g.kind == "constant":
        return SourceLedger()
    if g.kind == "bit-drop":
        keep = max(0, total - g.drop)
        return SourceLedger(tuple(_slice_entries(ledger.entries, 0, keep)))
    if g.kind == "coordinate-projection":
        bounds = _block_bounds(total, g.blocks)
        kept: list[LedgerEntry] = []
        for i in sorted(set(g.indices)):
            if 0 <= i < g.blocks:
                a, b = bounds[i]
                kept.extend(_slice_entries(ledger.entries, a, b))
        return SourceLedger(tuple(kept))
    raise ValueError(f"unknown garbling kind {g.kind!r}")
