"""Headline experiments over fibered families.

ambiguity_gain measures how much the cheapest admissible label saves on
a point's description; on a crossing family with fresh coordinates the
saving grows linearly in the precision (each crossing point sits on two
fibers whose labels are independent r-bit draws), while on a family with
unambiguous membership the saving is the constant cost of naming the
member.  robust_minimax evaluates candidate label assignments against a
shared sample set and reports the min-of-sup matrix reduction.
dpi_check verifies that post-processing the side information never
lowers a conditional cost beyond the logarithmic slack that headers and
catalog charges are allowed to absorb.  covering_entropy is a plain
box-count, and schematic_curves tabulates the closed-form code-length
curves used for plotting.

All tolerance policy lives in allowance(): slope 4 on log2 r plus a
flat 32, shared by every logarithmic-slack claim in the suite.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .complexity import (
    EstimatorHandle,
    fit_line,
    k_cond_est,
    k_est,
    sample_crossing,
    sample_point,
)
from .dyadic import Bitstring, DyadicVector, truncate
from .errors import CoverageGap, InsufficientData
from .fibering import (
    R_ENUM,
    FamilyMember,
    FiberFamily,
    FiberingModel,
    GarblingSpec,
    apply_garbling,
    garble_ledger,
    psi_rows,
)
from .ledger import BitStream, SourceLedger

ALLOWANCE_SLOPE = 4.0
ALLOWANCE_CONST = 32.0

__all__ = [
    "ALLOWANCE_SLOPE",
    "ALLOWANCE_CONST",
    "allowance",
    "AmbiguitySample",
    "crossing_ambiguity_sample",
    "family_ambiguity_sample",
    "AmbiguityRow",
    "AmbiguityReport",
    "ambiguity_gain",
    "chain_rule_floor",
    "MinimaxReport",
    "robust_minimax",
    "DpiRow",
    "DpiReport",
    "dpi_check",
    "covering_entropy",
    "covering_profile",
    "dense_image",
    "SchematicRow",
    "SchematicTable",
    "schematic_curves",
]


def allowance(r: int, slope: float = ALLOWANCE_SLOPE, const: float = ALLOWANCE_CONST) -> float:
    """Logarithmic slack granted to every header-and-catalog argument."""
    if r < 1:
        raise ValueError("precision must be at least 1")
    return slope * math.log2(r) + const


def _map_jobs(fn: Callable, jobs: list, workers: int) -> list:
    """Apply fn over independent cells; result order matches jobs."""
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


# ----------------------------------------------------------- sample objects


@dataclass(frozen=True)
class AmbiguitySample:
    """One observed point with, for each family member, the side data a
    decoder would hold if told "the point lies on this member's fiber".

    member_ledgers charge only provenance: the drawn member's name entry
    for the member that actually generated the point, nothing for the
    others.  A non-generating member can still be admissible (overlaps,
    crossings); its conditional is then not reduced below the full cost,
    which keeps the minimum honest without inventing shared bits.
    """

    index: int
    r: int
    family: FiberFamily
    x_trunc: DyadicVector
    joint_payload: Bitstring
    joint_ledger: SourceLedger
    member_payloads: tuple[Bitstring, ...]
    member_ledgers: tuple[SourceLedger, ...]
    admissible: tuple[bool, ...]


def _admissible_members(members: Sequence[FamilyMember], xf, r: int) -> tuple[bool, ...]:
    tol = 2.0 * 2.0 ** -r * (1.0 + 1e-9)
    return tuple(m.distance(xf) <= tol for m in members)


def crossing_ambiguity_sample(seed: int, r: int, index: int = 0) -> AmbiguitySample:
    """Fresh crossing family; the observed point is the crossing itself,
    so both line labels (each an independent r-bit draw) are admissible."""
    cs = sample_crossing(seed, r)
    xf = cs.x_trunc.as_floats()
    return AmbiguitySample(
        index=index,
        r=r,
        family=cs.family,
        x_trunc=cs.x_trunc,
        joint_payload=cs.joint_payload,
        joint_ledger=cs.joint_ledger,
        member_payloads=(cs.c_bits, cs.c2_bits),
        member_ledgers=(cs.member_ledger(0), cs.member_ledger(1)),
        admissible=_admissible_members(cs.family.members, xf, r),
    )


def _require_unit_u(member: FamilyMember) -> None:
    if member.u_box.lo[0] != 0 or member.u_box.hi[0] != 1:
        raise ValueError("family sampling assumes unit fiber boxes")


def family_ambiguity_sample(
    fam: FiberFamily,
    seed: int,
    r: int,
    index: int = 0,
    degenerate_fiber: bool = False,
) -> AmbiguitySample:
    """Draw a member name and a fiber position on a fixed family.

    The label payload is the member's name, so its cost is constant in
    r; with degenerate_fiber the fiber coordinate is pinned to zero and
    the name is the point's only random source.  Name draws use value
    mod member-count (the slight bias is irrelevant here).
    """
    members = fam.members
    m = len(members)
    source = BitStream(seed, name="family")
    name_width = (m - 1).bit_length()
    if name_width:
        idx_bits, idx_entry = source.take(name_width, component="member")
        chosen = idx_bits.value % m
    else:
        idx_bits, idx_entry = Bitstring(), None
        chosen = 0
    member = members[chosen]
    _require_unit_u(member)
    entries = [idx_entry] if idx_entry is not None else []
    if degenerate_fiber:
        u_bits = Bitstring()
        u = 0.0
    else:
        u_bits, u_entry = source.take(r, component="u")
        entries.append(u_entry)
        u = u_bits.value / float(1 << r)
    x = member.point(u)
    x_trunc = truncate(x, r)
    payloads = []
    ledgers = []
    for i in range(m):
        payloads.append(Bitstring.from_int(i, max(1, name_width)))
        own = (idx_entry,) if (i == chosen and idx_entry is not None) else ()
        ledgers.append(SourceLedger(own))
    return AmbiguitySample(
        index=index,
        r=r,
        family=fam,
        x_trunc=x_trunc,
        joint_payload=idx_bits + u_bits,
        joint_ledger=SourceLedger(tuple(entries)),
        member_payloads=tuple(payloads),
        member_ledgers=tuple(ledgers),
        admissible=_admissible_members(members, x_trunc.as_floats(), r),
    )


# ------------------------------------------------------------ ambiguity gain


@dataclass(frozen=True)
class AmbiguityRow:
    """conds holds one slot per family member, None where inadmissible;
    gamma = k_x - min over the admissible conditionals."""

    sample: int
    r: int
    k_x: int
    conds: tuple[Optional[int], ...]
    gamma: int

    @property
    def min_cond(self) -> int:
        return min(c for c in self.conds if c is not None)


@dataclass(frozen=True)
class AmbiguityReport:
    family_kind: str
    members: int
    rows: tuple[AmbiguityRow, ...]
    gamma_slope: float
    gamma_intercept: float
    gamma_max_residual: float


def _ambiguity_row(s: AmbiguitySample, est: EstimatorHandle) -> AmbiguityRow:
    k_x = k_est(est, s.joint_payload, s.joint_ledger)
    conds: list[Optional[int]] = []
    for adm, pay, led in zip(s.admissible, s.member_payloads, s.member_ledgers):
        if not adm:
            conds.append(None)
            continue
        conds.append(
            k_cond_est(est, s.joint_payload, s.joint_ledger, side_payload=pay, side_ledger=led)
        )
    if all(c is None for c in conds):
        raise CoverageGap(f"sample {s.index} lies on no member fiber")
    gamma = k_x - min(c for c in conds if c is not None)
    return AmbiguityRow(s.index, s.r, k_x, tuple(conds), gamma)


def ambiguity_gain(
    fam: FiberFamily,
    est: EstimatorHandle,
    seed: int,
    n_samples: int,
    rs: Sequence[int],
    degenerate_fiber: bool = False,
    workers: int = 1,
) -> AmbiguityReport:
    """Per sample and precision, the saving of the cheapest admissible
    label over no label at all, with a line fit of that saving vs r.

    Crossing families are redrawn per sample (their labels are the
    random line offsets); any other family is kept fixed and sampled by
    member name plus fiber position.
    """
    rs = sorted(set(int(r) for r in rs))
    if len(rs) < 2:
        raise InsufficientData("gamma fit needs at least 2 distinct precisions")
    if n_samples < 1:
        raise InsufficientData("need at least one sample")
    jobs = [(i, r) for i in range(n_samples) for r in rs]

    def build(job):
        i, r = job
        if fam.kind == "crossing":
            s = crossing_ambiguity_sample(seed + i, r, index=i)
        else:
            s = family_ambiguity_sample(
                fam, seed + i, r, index=i, degenerate_fiber=degenerate_fiber
            )
        return _ambiguity_row(s, est)

    rows = _map_jobs(build, jobs, workers)
    slope, intercept, resid = fit_line(
        [float(w.r) for w in rows], [float(w.gamma) for w in rows]
    )
    return AmbiguityReport(fam.kind, len(fam.members), tuple(rows), slope, intercept, resid)


def chain_rule_floor(
    est: EstimatorHandle,
    sample: AmbiguitySample,
    member: int,
    slope: float = ALLOWANCE_SLOPE,
    const: float = ALLOWANCE_CONST,
) -> float:
    """Lower bound k_x - k_z - allowance(r) that no conditional cost may
    undercut; callers assert measured conditionals sit above it."""
    if est.approximate:
        raise ValueError("the chain-rule floor is defined for the exact estimator")
    k_x = k_est(est, sample.joint_payload, sample.joint_ledger)
    k_z = k_est(est, sample.member_payloads[member], sample.member_ledgers[member])
    return k_x - k_z - allowance(sample.r, slope, const)


# ------------------------------------------------------------ robust minimax


@dataclass(frozen=True)
class MinimaxReport:
    """matrix[c][s] is candidate c's conditional cost on sample s; value
    is the min over candidates of the per-candidate worst case."""

    candidates: tuple[str, ...]
    r: int
    matrix: tuple[tuple[int, ...], ...]
    sups: tuple[int, ...]
    value: int
    argmin: str


def _candidate_cond(cand: str, s: AmbiguitySample, est: EstimatorHandle) -> int:
    if cand == "full":
        return k_cond_est(
            est, s.joint_payload, s.joint_ledger,
            side_payload=s.joint_payload, side_ledger=s.joint_ledger,
        )
    if cand == "adaptive":
        best: Optional[int] = None
        for adm, pay, led in zip(s.admissible, s.member_payloads, s.member_ledgers):
            if not adm:
                continue
            c = k_cond_est(
                est, s.joint_payload, s.joint_ledger, side_payload=pay, side_ledger=led
            )
            best = c if best is None else min(best, c)
        if best is None:
            raise CoverageGap(f"sample {s.index} lies on no member fiber")
        return best
    if cand.startswith("member:"):
        i = int(cand.split(":", 1)[1])
        if not 0 <= i < len(s.admissible):
            raise ValueError(f"candidate {cand!r} names a missing member")
        if not s.admissible[i]:
            raise CoverageGap(f"assignment {cand!r} does not cover sample {s.index}")
        return k_cond_est(
            est, s.joint_payload, s.joint_ledger,
            side_payload=s.member_payloads[i], side_ledger=s.member_ledgers[i],
        )
    raise ValueError(f"unknown candidate assignment {cand!r}")


def robust_minimax(
    candidates: Sequence[str],
    est: EstimatorHandle,
    samples: Sequence[AmbiguitySample],
    workers: int = 1,
) -> MinimaxReport:
    """Full candidate-by-sample conditional matrix, reduced to the
    worst case per candidate and the best candidate overall.

    Candidates: "member:<i>" (always use member i's label; raises
    CoverageGap off-fiber), "adaptive" (cheapest admissible label per
    sample), "full" (side information is the point itself).
    """
    if not candidates:
        raise InsufficientData("need at least one candidate assignment")
    if not samples:
        raise InsufficientData("need at least one sample")
    prec = {s.r for s in samples}
    if len(prec) != 1:
        raise ValueError("minimax samples must share one precision")
    jobs = [(c, s) for c in candidates for s in samples]
    conds = _map_jobs(lambda j: _candidate_cond(j[0], j[1], est), jobs, workers)
    m = len(samples)
    matrix = tuple(
        tuple(conds[i * m : (i + 1) * m]) for i in range(len(candidates))
    )
    sups = tuple(max(row) for row in matrix)
    value = min(sups)
    return MinimaxReport(
        tuple(candidates), prec.pop(), matrix, sups, value,
        candidates[sups.index(value)],
    )


# ------------------------------------------------------- garbling DPI check


@dataclass(frozen=True)
class DpiRow:
    sample: int
    cond_plain: int
    cond_garbled: int

    @property
    def change(self) -> int:
        return self.cond_garbled - self.cond_plain


@dataclass(frozen=True)
class DpiReport:
    garbling: str
    r: int
    rows: tuple[DpiRow, ...]
    violation_count: int
    max_decrease_bits: int

    def __iter__(self):
        # allows: violations, worst = dpi_check(...)
        return iter((self.violation_count, self.max_decrease_bits))


def dpi_check(
    fib: FiberingModel,
    g: GarblingSpec,
    est: EstimatorHandle,
    seed: int,
    n_samples: int,
    r: int,
    workers: int = 1,
) -> DpiReport:
    """Conditional cost of the point given its label, before and after
    garbling the label.  A violation is a garbled conditional below the
    plain one by more than allowance(r); max_decrease_bits is the worst
    observed drop (0 when garbling never helps, as it must not)."""
    allow = allowance(r)

    def one(i: int) -> DpiRow:
        pt = sample_point(fib, BitStream(seed + i, name="dpi"), r)
        plain = k_cond_est(
            est, pt.payload, pt.point_ledger,
            side_payload=pt.label_payload, side_ledger=pt.label_ledger,
        )
        garbled = k_cond_est(
            est, pt.payload, pt.point_ledger,
            side_payload=apply_garbling(g, pt.label_payload),
            side_ledger=garble_ledger(g, pt.label_ledger),
        )
        return DpiRow(i, plain, garbled)

    rows = _map_jobs(one, list(range(n_samples)), workers)
    violations = sum(1 for w in rows if w.cond_garbled < w.cond_plain - allow)
    worst = max(0, max(w.cond_plain - w.cond_garbled for w in rows))
    return DpiReport(g.label(), r, tuple(rows), violations, worst)


# ---------------------------------------------------------- covering entropy


def covering_entropy(points, k: int) -> float:
    """log2 of the number of dyadic cells at scale 2**-k that the point
    set occupies (a box-count stand-in for metric entropy)."""
    if not 0 <= k <= R_ENUM:
        raise ValueError(f"box-count scale must lie in [0, {R_ENUM}]")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("need a nonempty (count, dim) array of points")
    cells = np.unique(np.floor(pts * float(1 << k)).astype(np.int64), axis=0)
    return float(np.log2(cells.shape[0]))


def covering_profile(points, ks: Sequence[int]) -> tuple[tuple[int, float], ...]:
    return tuple((int(k), covering_entropy(points, int(k))) for k in ks)


def dense_image(fib: FiberingModel, grid_bits: int) -> np.ndarray:
    """Image of the model map over midpoint parameter grids with
    2**grid_bits ticks per axis, as rows for box counting."""
    if grid_bits < 1:
        raise ValueError("grid_bits must be positive")
    m = 1 << grid_bits
    if m ** (fib.label_dim + 1) > 4_000_000:
        raise ValueError("dense image grid too large")
    ticks = (np.arange(m, dtype=float) + 0.5) / m
    mesh = np.meshgrid(*([ticks] * (fib.label_dim + 1)), indexing="ij")
    cols = np.column_stack([g.reshape(-1) for g in mesh])
    return psi_rows(fib, cols[:, : fib.label_dim], cols[:, fib.label_dim])


# ---------------------------------------------------------- schematic curves


@dataclass(frozen=True)
class SchematicRow:
    r: int
    benchmark: float
    l_reg: float
    l_adapt_mild: float
    l_adapt_substantial: float


@dataclass(frozen=True)
class SchematicTable:
    n: int
    c: float
    rate: float
    rows: tuple[SchematicRow, ...]


def _linear_rate(gammas: Sequence[str]) -> float:
    saw_sqrt = False
    rate: Optional[float] = None
    for g in gammas:
        kind, _, arg = str(g).partition(":")
        if kind == "sqrt":
            saw_sqrt = True
        elif kind == "linear":
            try:
                rate = float(arg or "0.2")
            except ValueError:
                raise ValueError(f"bad linear gain rate {arg!r}") from None
        else:
            raise ValueError(f"unknown gain shape {g!r}")
    if not saw_sqrt or rate is None:
        raise ValueError("gain shapes must include 'sqrt' and 'linear:<rate>'")
    return rate


def schematic_curves(
    n: int,
    c: float,
    gammas: Sequence[str] = ("sqrt", "linear:0.2"),
    r_range: Sequence[int] = range(1, 51),
) -> SchematicTable:
    """Closed-form code-length curves against the n*r benchmark:
    regular coding pays n*r + c*log2(1+r); adaptive coding saves either
    sqrt(r) (mild) or rate*r (substantial)."""
    rs = [int(r) for r in r_range]
    if not rs:
        raise ValueError("r_range must be nonempty")
    rate = _linear_rate(gammas)
    rows = tuple(
        SchematicRow(
            r,
            float(n * r),
            n * r + c * math.log2(1 + r),
            n * r - math.sqrt(r),
            n * r - rate * r,
        )
        for r in rs
    )
    return SchematicTable(int(n), float(c), rate, rows)
