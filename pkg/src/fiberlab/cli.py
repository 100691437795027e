"""Batch driver: every experiment as a subcommand over a TOML config.

Runs are deterministic functions of (config bytes, seed): CSV artifacts
are byte-identical across reruns, float columns are printed with fixed
12-digit precision, and each run leaves a manifest recording the config
hash, tool version, seed, output files, and wall clock.  Exit status is
0 on success, 1 when the config fails validation, 2 when an experiment
raises a domain error (the manifest names it).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from . import __version__
from .complexity import EstimatorHandle, fit_line, sample_point, split_check
from .dyadic import R_MAX
from .errors import ConfigInvalid, FiberlabError, MissingArtifacts
from .experiments import (
    allowance,
    ambiguity_gain,
    covering_profile,
    crossing_ambiguity_sample,
    dense_image,
    dpi_check,
    family_ambiguity_sample,
    robust_minimax,
    schematic_curves,
)
from .fibering import (
    R_ENUM,
    FiberFamily,
    FiberingModel,
    GarblingSpec,
    make_crossing_2d,
    make_identity,
    make_kakeya_linear,
    make_parallel_2d,
    make_stitched,
)
from .inversion import compose, constants_for, invert_enumerate, invert_fast
from .ledger import BitStream

SUBCOMMANDS = (
    "compose",
    "invert",
    "split-check",
    "gamma",
    "minimax",
    "garble",
    "entropy",
    "schematic",
    "report",
)


# ------------------------------------------------------------------- config


@dataclass(frozen=True)
class RunConfig:
    fibering: dict
    estimator_kind: str
    seed: int
    ladder: tuple[int, ...]
    samples: int
    workers: int
    tol_slope: float
    tol_const: float
    out_dir: str
    formats: tuple[str, ...]
    doc: dict
    raw: bytes

    def estimator(self) -> EstimatorHandle:
        return EstimatorHandle(self.estimator_kind)

    def section(self, name: str) -> dict:
        sec = self.doc.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigInvalid(name, "must be a table")
        return sec


def _req_int(value, fieldname: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigInvalid(fieldname, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigInvalid(fieldname, f"must be at least {minimum}")
    return value


def _ladder_of(doc_run: dict) -> tuple[int, ...]:
    raw = doc_run.get("ladder", [4, 8, 16, 32])
    if not isinstance(raw, list) or not raw:
        raise ConfigInvalid("run.ladder", "must be a nonempty list of precisions")
    ladder = [_req_int(v, "run.ladder", 1) for v in raw]
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigInvalid("run.ladder", "must be strictly increasing")
    if ladder[-1] > R_MAX:
        raise ConfigInvalid("run.ladder", f"maximum precision is {R_MAX}")
    return tuple(ladder)


def load_config(path: str | Path) -> RunConfig:
    raw = Path(path).read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigInvalid("<file>", f"not parseable TOML: {exc}") from exc

    est = doc.get("estimator", {})
    kind = est.get("kind", "ideal_source")
    if kind not in ("ideal_source", "compressor_proxy"):
        raise ConfigInvalid("estimator.kind", f"unknown estimator {kind!r}")
    seed = est.get("seed")
    if kind == "ideal_source" and seed is None:
        raise ConfigInvalid("estimator.seed", "required for the ideal_source estimator")
    seed = _req_int(seed if seed is not None else 0, "estimator.seed")

    run = doc.get("run", {})
    ladder = _ladder_of(run)
    samples = _req_int(run.get("samples", 25), "run.samples", 1)
    workers = _req_int(run.get("workers", 1), "run.workers", 1)

    tol = doc.get("tolerances", {})
    tol_slope = float(tol.get("slope", 4.0))
    tol_const = float(tol.get("const", 32.0))
    if tol_slope < 0 or tol_const < 0:
        raise ConfigInvalid("tolerances", "slope and const must be non-negative")

    out = doc.get("output", {})
    out_dir = str(out.get("directory", "out"))
    formats = tuple(out.get("formats", ["csv", "json"]))
    for f in formats:
        if f not in ("csv", "json"):
            raise ConfigInvalid("output.formats", f"unknown format {f!r}")

    fibering = doc.get("fibering", {"kind": "kakeya2d"})
    if not isinstance(fibering, dict):
        raise ConfigInvalid("fibering", "must be a table")

    return RunConfig(
        fibering=fibering,
        estimator_kind=kind,
        seed=seed,
        ladder=ladder,
        samples=samples,
        workers=workers,
        tol_slope=tol_slope,
        tol_const=tol_const,
        out_dir=out_dir,
        formats=formats,
        doc=doc,
        raw=raw,
    )


def build_fibering(section: dict):
    kind = section.get("kind", "kakeya2d")
    try:
        if kind == "identity":
            return make_identity()
        if kind in ("kakeya2d", "kakeya3d"):
            n = 2 if kind == "kakeya2d" else 3
            return make_kakeya_linear(n, str(section.get("basepoint", "lipschitz:1/2")))
        if kind == "crossing":
            return make_crossing_2d(
                Fraction(str(section.get("c", "1/4"))),
                Fraction(str(section.get("c2", "5/8"))),
            )
        if kind == "parallel":
            heights = section.get("heights", ["1/8", "3/8", "5/8", "7/8"])
            return make_parallel_2d([Fraction(str(h)) for h in heights])
        if kind == "stitched":
            specs = section.get("charts", ["lipschitz:1/2", "lipschitz:1"])
            charts = [make_kakeya_linear(2, str(s)) for s in specs]
            return make_stitched(charts)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigInvalid("fibering", str(exc)) from exc
    raise ConfigInvalid("fibering.kind", f"unknown kind {kind!r}")


def _want_model(cfg: RunConfig) -> FiberingModel:
    fib = build_fibering(cfg.fibering)
    if not isinstance(fib, FiberingModel):
        raise ConfigInvalid(
            "fibering.kind", "this subcommand needs a parametric model "
            "(identity, kakeya2d, kakeya3d)"
        )
    return fib


def _want_family(cfg: RunConfig) -> FiberFamily:
    fib = build_fibering(cfg.fibering)
    if not isinstance(fib, FiberFamily):
        raise ConfigInvalid(
            "fibering.kind", "this subcommand needs a finite fiber family "
            "(crossing, parallel, stitched)"
        )
    return fib


# ------------------------------------------------------------------ outputs


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.12f}"
    return str(v)


@dataclass
class RunContext:
    cfg: RunConfig
    outdir: Path
    workers: int
    files: list[str] = field(default_factory=list)

    def write_csv(self, name: str, header: Sequence[str], rows) -> None:
        if "csv" not in self.cfg.formats:
            return
        lines = [",".join(header)]
        lines.extend(",".join(_fmt_cell(v) for v in row) for row in rows)
        (self.outdir / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
        self.files.append(name)

    def write_json(self, name: str, obj: dict) -> None:
        if "json" not in self.cfg.formats:
            return
        text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
        (self.outdir / name).write_text(text, encoding="utf-8")
        self.files.append(name)


def _claim(name: str, ok: bool, detail: str) -> dict:
    return {"claim": name, "pass": bool(ok), "detail": detail}


# ------------------------------------------------------------- subcommands


def run_compose(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    fib = _want_model(cfg)
    header = (
        ["sample", "r"]
        + [f"z{k}" for k in range(fib.label_dim)]
        + ["u"]
        + [f"x{k}" for k in range(fib.ambient_dim)]
        + ["payload_z", "payload_u", "pair_header", "r_param", "program_len", "total_bits"]
    )
    rows = []
    for i in range(cfg.samples):
        for r in cfg.ladder:
            pt = sample_point(fib, BitStream(cfg.seed + i, name="compose"), r)
            res = compose(fib, pt.label, pt.fiber, r)
            b = res.budget
            rows.append(
                [i, r]
                + list(res.label.mantissas)
                + [res.fiber.mantissa]
                + list(res.x_trunc.mantissas)
                + [b.payload_z, b.payload_u, b.pair_header, b.r_param,
                   len(res.program), b.total]
            )
    ctx.write_csv("compose.csv", header, rows)
    summary = {
        "model": fib.name,
        "rows": len(rows),
        "claims": [
            _claim(
                "program length equals header plus payloads",
                all(row[-2] == row[-6] + row[-5] + row[-4] for row in rows),
                "len(program) == payload_z + payload_u + pair_header on every row",
            )
        ],
    }
    ctx.write_json("compose_summary.json", summary)
    return summary


def run_invert(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    fib = _want_model(cfg)
    sec = cfg.section("invert")
    r = _req_int(sec.get("r", 8), "invert.r", 1)
    if r > R_MAX:
        raise ConfigInvalid("invert.r", f"maximum precision is {R_MAX}")
    strategy = str(sec.get("strategy", "auto"))
    if strategy not in ("auto", "enumerate", "fast"):
        raise ConfigInvalid("invert.strategy", f"unknown strategy {strategy!r}")
    use_enum = strategy == "enumerate" or (strategy == "auto" and r <= 10)
    gc = constants_for(fib, r)
    bound2 = Fraction(9, 4**r) / (gc.lip_lower**2)

    header = [
        "sample", "r", "strategy", "recovered", "match_ok", "pointer_index",
        "cells_scanned", "payload_z", "payload_u", "pair_header", "r_param",
        "pointer_bits", "total_bits",
    ]
    rows = []
    for i in range(cfg.samples):
        pt = sample_point(fib, BitStream(cfg.seed + i, name="invert"), r)
        res_c = compose(fib, pt.label, pt.fiber, r)
        invert = invert_enumerate if use_enum else invert_fast
        res = invert(fib, res_c.x_trunc, r, truth=(pt.label, pt.fiber))
        recovered = (
            res.z_trunc.mantissas == pt.label.mantissas
            and res.u_trunc.mantissa == pt.fiber.mantissa
        )
        fz, fu = res.first_match
        d2 = sum(
            (Fraction(m, 1 << res.s) - Fraction(t, 1 << r)) ** 2
            for m, t in zip(fz.mantissas + (fu.mantissa,),
                            pt.label.mantissas + (pt.fiber.mantissa,))
        )
        b = res.budget
        rows.append([
            i, r, "enumerate" if use_enum else "fast", recovered, d2 <= bound2,
            res.pointer_index, res.cells_scanned, b.payload_z, b.payload_u,
            b.pair_header, b.r_param, b.pointer, b.total,
        ])
    ctx.write_csv("invert.csv", header, rows)
    summary = {
        "model": fib.name,
        "r": r,
        "rows": len(rows),
        "claims": [
            _claim("exact recovery on every sample",
                   all(row[3] for row in rows), f"{len(rows)} samples at r={r}"),
            _claim("first match within the fixed-point bound",
                   all(row[4] for row in rows),
                   "sum of squares <= (3*2^-r / L1)^2, checked in rationals"),
        ],
    }
    ctx.write_json("invert_summary.json", summary)
    return summary


def run_split_check(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    fib = _want_model(cfg)
    rep = split_check(fib, cfg.estimator(), cfg.seed, cfg.samples, cfg.ladder)
    rows = [
        [w.sample, w.r, w.k_x, w.k_z, w.k_u_given_z, w.gap] for w in rep.rows
    ]
    ctx.write_csv(
        "split_check.csv",
        ["sample", "r", "k_x", "k_z", "k_u_given_z", "gap"],
        rows,
    )
    in_band = all(
        abs(w.gap) <= cfg.tol_slope * math.log2(w.r) + cfg.tol_const for w in rep.rows
    )
    claims = []
    if rep.identifiable:
        claims.append(_claim(
            "additive split gap within the logarithmic band",
            in_band, f"|gap| <= {cfg.tol_slope}*log2(r) + {cfg.tol_const} on every row",
        ))
    else:
        claims.append(_claim(
            "irregular construction leaks linearly",
            rep.gap_slope_r > 0.4, f"gap slope vs r = {rep.gap_slope_r:.4f} > 0.4",
        ))
    summary = {
        "model": rep.model,
        "identifiable": rep.identifiable,
        "rows": len(rows),
        "log_slope": rep.log_slope,
        "log_intercept": rep.log_intercept,
        "log_max_residual": rep.log_max_residual,
        "gap_slope_r": rep.gap_slope_r,
        "claims": claims,
    }
    ctx.write_json("split_check_summary.json", summary)
    return summary


def run_gamma(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    fam = _want_family(cfg)
    rep = ambiguity_gain(
        fam, cfg.estimator(), cfg.seed, cfg.samples, cfg.ladder, workers=ctx.workers
    )
    m = rep.members
    header = ["sample", "r", "k_x"] + [f"cond_{j}" for j in range(m)] + ["min_cond", "gamma"]
    rows = [
        [w.sample, w.r, w.k_x] + list(w.conds) + [w.min_cond, w.gamma]
        for w in rep.rows
    ]
    ctx.write_csv("gamma.csv", header, rows)
    floor_ok = all(
        c >= w.r - cfg.tol_slope * math.log2(w.r) - cfg.tol_const
        for w in rep.rows for c in w.conds if c is not None
    )
    claims = [_claim(
        "conditionals above the chain-rule floor",
        floor_ok, f"cond >= r - {cfg.tol_slope}*log2(r) - {cfg.tol_const}",
    )]
    if rep.family_kind == "crossing":
        claims.append(_claim(
            "ambiguity gain grows linearly",
            0.9 <= rep.gamma_slope <= 1.1,
            f"gamma slope vs r = {rep.gamma_slope:.4f} in [0.9, 1.1]",
        ))
    else:
        claims.append(_claim(
            "ambiguity gain stays flat on an unambiguous family",
            -0.05 <= rep.gamma_slope <= 0.05,
            f"gamma slope vs r = {rep.gamma_slope:.4f} in [-0.05, 0.05]",
        ))
    summary = {
        "family": rep.family_kind,
        "members": m,
        "rows": len(rows),
        "gamma_slope": rep.gamma_slope,
        "gamma_intercept": rep.gamma_intercept,
        "gamma_max_residual": rep.gamma_max_residual,
        "claims": claims,
    }
    ctx.write_json("gamma_summary.json", summary)
    return summary


def run_minimax(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    fam = _want_family(cfg)
    sec = cfg.section("minimax")
    r = _req_int(sec.get("r", 16), "minimax.r", 1)
    if r > R_MAX:
        raise ConfigInvalid("minimax.r", f"maximum precision is {R_MAX}")
    default = (
        ["member:0", "member:1", "adaptive"] if fam.kind == "crossing"
        else ["adaptive", "full"]
    )
    candidates = [str(c) for c in sec.get("candidates", default)]
    if fam.kind == "crossing":
        samples = [crossing_ambiguity_sample(cfg.seed + i, r, index=i)
                   for i in range(cfg.samples)]
    else:
        samples = [family_ambiguity_sample(fam, cfg.seed + i, r, index=i)
                   for i in range(cfg.samples)]
    rep = robust_minimax(candidates, cfg.estimator(), samples, workers=ctx.workers)
    rows = [
        [cand, s, rep.matrix[ci][s]]
        for ci, cand in enumerate(rep.candidates)
        for s in range(len(samples))
    ]
    ctx.write_csv("minimax.csv", ["candidate", "sample", "cond"], rows)
    recomputed = min(max(row) for row in rep.matrix)
    summary = {
        "family": fam.kind,
        "r": rep.r,
        "candidates": list(rep.candidates),
        "sups": list(rep.sups),
        "value": rep.value,
        "argmin": rep.argmin,
        "claims": [_claim(
            "reported value equals the matrix min-of-sup",
            rep.value == recomputed, f"value = {rep.value}",
        )],
    }
    ctx.write_json("minimax_summary.json", summary)
    return summary


def run_garble(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    fib = _want_model(cfg)
    sec = cfg.section("garble")
    r = _req_int(sec.get("r", 16), "garble.r", 1)
    if r > R_MAX:
        raise ConfigInvalid("garble.r", f"maximum precision is {R_MAX}")
    specs = [str(g) for g in sec.get("garblings", ["identity", "bit-drop:8", "constant"])]
    try:
        garblings = [GarblingSpec.parse(g) for g in specs]
    except ValueError as exc:
        raise ConfigInvalid("garble.garblings", str(exc)) from exc

    rows = []
    claims = []
    per = {}
    for g in garblings:
        rep = dpi_check(fib, g, cfg.estimator(), cfg.seed, cfg.samples, r,
                        workers=ctx.workers)
        rows.extend(
            [rep.garbling, w.sample, w.cond_plain, w.cond_garbled, w.change]
            for w in rep.rows
        )
        per[rep.garbling] = {
            "violations": rep.violation_count,
            "max_decrease_bits": rep.max_decrease_bits,
        }
        claims.append(_claim(
            f"no tolerance-band violation under {rep.garbling}",
            rep.violation_count == 0,
            f"{len(rep.rows)} samples at r={r}",
        ))
    ctx.write_csv(
        "garble.csv",
        ["garbling", "sample", "cond_plain", "cond_garbled", "change"],
        rows,
    )
    summary = {"model": fib.name, "r": r, "garblings": per, "claims": claims}
    ctx.write_json("garble_summary.json", summary)
    return summary


def run_entropy(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    fib = _want_model(cfg)
    sec = cfg.section("entropy")
    grid_bits = _req_int(sec.get("grid_bits", 10), "entropy.grid_bits", 1)
    ks = sec.get("ks", [3, 4, 5, 6, 7])
    if not isinstance(ks, list) or not ks:
        raise ConfigInvalid("entropy.ks", "must be a nonempty list of scales")
    ks = [_req_int(k, "entropy.ks") for k in ks]
    if max(ks) > R_ENUM:
        raise ConfigInvalid("entropy.ks", f"box counting is capped at scale {R_ENUM}")
    points = dense_image(fib, grid_bits)
    profile = covering_profile(points, sorted(ks))
    ctx.write_csv("entropy.csv", ["k", "bits"], [[k, b] for k, b in profile])
    if len(profile) >= 2:
        slope, _, _ = fit_line([k for k, _ in profile], [b for _, b in profile])
    else:
        slope = float("nan")
    claims = [_claim(
        "box-count slope consistent with the ambient dimension",
        abs(slope - fib.ambient_dim) <= 0.25,
        f"slope {slope:.4f} vs dimension {fib.ambient_dim}",
    )]
    summary = {
        "model": fib.name,
        "grid_bits": grid_bits,
        "points": int(points.shape[0]),
        "profile": [[k, b] for k, b in profile],
        "slope": slope,
        "claims": claims,
    }
    ctx.write_json("entropy_summary.json", summary)
    return summary


def run_schematic(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    sec = cfg.section("schematic")
    n = _req_int(sec.get("n", 3), "schematic.n", 1)
    c = float(sec.get("c", 2.0))
    gammas = [str(g) for g in sec.get("gammas", ["sqrt", "linear:0.2"])]
    r_min = _req_int(sec.get("r_min", 1), "schematic.r_min", 1)
    r_max = _req_int(sec.get("r_max", 50), "schematic.r_max", 1)
    if r_max < r_min:
        raise ConfigInvalid("schematic.r_max", "must be at least r_min")
    try:
        table = schematic_curves(n, c, gammas, range(r_min, r_max + 1))
    except ValueError as exc:
        raise ConfigInvalid("schematic.gammas", str(exc)) from exc
    ctx.write_csv(
        "schematic.csv",
        ["r", "benchmark", "l_reg", "l_adapt_mild", "l_adapt_substantial"],
        [[w.r, w.benchmark, w.l_reg, w.l_adapt_mild, w.l_adapt_substantial]
         for w in table.rows],
    )
    for name, get in (
        ("plot_benchmark.csv", lambda w: w.benchmark),
        ("plot_regular.csv", lambda w: w.l_reg),
        ("plot_adaptive_mild.csv", lambda w: w.l_adapt_mild),
        ("plot_adaptive_substantial.csv", lambda w: w.l_adapt_substantial),
    ):
        ctx.write_csv(name, ["r", "bits"], [[w.r, get(w)] for w in table.rows])
    err = 0.0
    for w in table.rows:
        forms = (n * w.r, n * w.r + c * math.log2(1 + w.r),
                 n * w.r - math.sqrt(w.r), n * w.r - table.rate * w.r)
        vals = (w.benchmark, w.l_reg, w.l_adapt_mild, w.l_adapt_substantial)
        for have, want in zip(vals, forms):
            err = max(err, abs(have - want) / max(1.0, abs(want)))
    last = table.rows[-1]
    summary = {
        "n": table.n,
        "c": table.c,
        "rate": table.rate,
        "rows": len(table.rows),
        "endpoint": {
            "r": last.r,
            "benchmark": last.benchmark,
            "l_reg": last.l_reg,
            "l_adapt_mild": last.l_adapt_mild,
            "l_adapt_substantial": last.l_adapt_substantial,
        },
        "claims": [_claim(
            "table matches the closed forms",
            err <= 1e-9, f"max relative error {err:.3e}",
        )],
    }
    ctx.write_json("schematic_summary.json", summary)
    return summary


def run_report(ctx: RunContext) -> dict:
    summaries = sorted(ctx.outdir.glob("*_summary.json"))
    if not summaries:
        raise MissingArtifacts(f"no experiment summaries under {ctx.outdir}")
    lines = ["# fiberlab run report", ""]
    n_pass = n_fail = 0
    for path in summaries:
        doc = json.loads(path.read_text(encoding="utf-8"))
        sub = path.name.replace("_summary.json", "")
        lines.append(f"## {sub}")
        for key in ("model", "family", "r", "gamma_slope", "gap_slope_r", "value", "slope"):
            if key in doc:
                lines.append(f"- {key}: {doc[key]}")
        for claim in doc.get("claims", []):
            ok = bool(claim.get("pass"))
            n_pass += ok
            n_fail += not ok
            verdict = "PASS" if ok else "FAIL"
            lines.append(f"- [{verdict}] {claim['claim']} ({claim['detail']})")
        csv_name = f"{sub.replace('-', '_')}.csv"
        if (ctx.outdir / csv_name).exists():
            lines.append(f"- raw rows: {csv_name}")
        lines.append("")
    lines.append(f"{n_pass} claims pass, {n_fail} fail.")
    (ctx.outdir / "report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    ctx.files.append("report.md")
    return {"summaries": len(summaries), "pass": n_pass, "fail": n_fail}


HANDLERS: dict[str, Callable[[RunContext], dict]] = {
    "compose": run_compose,
    "invert": run_invert,
    "split-check": run_split_check,
    "gamma": run_gamma,
    "minimax": run_minimax,
    "garble": run_garble,
    "entropy": run_entropy,
    "schematic": run_schematic,
    "report": run_report,
}


# --------------------------------------------------------------------- main


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fiberlab",
        description="deterministic experiments over fibered-set encodings",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default=None,
                       help="output directory (default: [output].directory)")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel cells for matrix experiments (default: [run].workers)")
    return parser


def _write_manifest(
    ctx: RunContext, sub: str, elapsed: float, error: Optional[str]
) -> None:
    manifest = {
        "subcommand": sub,
        "tool_version": __version__,
        "config_sha256": hashlib.sha256(ctx.cfg.raw).hexdigest(),
        "seed": ctx.cfg.seed,
        "estimator": ctx.cfg.estimator_kind,
        "files": list(ctx.files),
        "wall_clock_seconds": {sub: round(elapsed, 3)},
        "error": error,
    }
    name = f"manifest_{sub.replace('-', '_')}.json"
    (ctx.outdir / name).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    out_dir = os.environ.get("FIBERLAB_OUT") or args.out or cfg.out_dir
    outdir = Path(out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    workers = args.workers if args.workers is not None else cfg.workers
    if workers < 1:
        print("config error: run.workers: must be at least 1", file=sys.stderr)
        return 1

    ctx = RunContext(cfg=cfg, outdir=outdir, workers=workers)
    start = time.perf_counter()
    try:
        HANDLERS[args.subcommand](ctx)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FiberlabError as exc:
        elapsed = time.perf_counter() - start
        _write_manifest(ctx, args.subcommand, elapsed,
                        f"{type(exc).__name__}: {exc}")
        print(f"experiment error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - start
    _write_manifest(ctx, args.subcommand, elapsed, None)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
