"""Command-line front end.

Exit codes: 0 success (for ``verify``: all cases pass), 1 runtime error or
failed verification, 2 usage error.  Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Sequence

from . import expr
from . import nevanlinna as nv
from .family import BoundMember, FamilyError, FamilySpec, IndexSchedule, parse_family, parse_value, union
from .fixpoint import repelling_sweep
from .marty import MartyParams
from .orbit import SolverParams, backward_orbit, coverage_distance, exceptional_probe
from .raster import GridSpec, classify_grid, compare, emit, raster_union, write_atomic
from .verify import Suite

log = logging.getLogger("julialike")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Flag parsing helpers


def _complex(text: str) -> complex:
    """``1+1i``, ``2j``, ``-0.5`` or any z-free expression like ``0.5*i``."""
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        pass
    try:
        return parse_value(text)
    except (FamilyError, expr.ExprError) as exc:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from exc


def _window(text: str) -> tuple[float, float, float, float]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad window {text!r}") from exc
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("window is re_min,re_max,im_min,im_max")
    return vals  # type: ignore[return-value]


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"size must look like 256x256, got {text!r}") from exc
    return w, h


def _read_family(text: str | None, path: str | None, what: str = "--family") -> FamilySpec:
    if (text is None) == (path is None):
        raise UsageError(f"give exactly one of {what} or {what}-file")
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read family file: {exc}") from exc
    try:
        return parse_family(text.replace("\\n", "\n"))
    except (FamilyError, expr.ExprError, ValueError) as exc:
        raise UsageError(f"family: {exc}") from exc


def _schedule(args, F: FamilySpec) -> IndexSchedule:
    if args.schedule == "full":
        return IndexSchedule.full(F, args.n_max)
    return IndexSchedule.geometric(F, args.n_max)


def _params(args) -> MartyParams:
    try:
        return MartyParams(
            probe_radius=args.probe_radius,
            probe_count=args.probe_count,
            julia_threshold=args.tau,
            escape_radius=args.r_esc,
            tail_fraction=args.tail_fraction,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _grid(args) -> GridSpec:
    try:
        return GridSpec(*args.window, *args.size)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _threads(args) -> int | None:
    return None if args.threads == 0 else args.threads


def _member(F: FamilySpec, spec: str | None, piece: int) -> BoundMember:
    if not 0 <= piece < len(F.pieces):
        raise UsageError(f"piece {piece} out of range (family has {len(F.pieces)})")
    p = F.pieces[piece]
    values: dict[str, str] = {}
    for item in filter(None, (spec or "").split(",")):
        if "=" not in item:
            raise UsageError(f"member assignments look like k=2, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    indices, params = {}, {}
    for r in p.index_vars:
        if r.name not in values:
            raise UsageError(f"missing value for index {r.name!r}")
        try:
            indices[r.name] = int(values.pop(r.name))
        except ValueError as exc:
            raise UsageError(f"index {r.name!r} needs an integer") from exc
    for name, _ in p.param_vars:
        if name not in values:
            raise UsageError(f"missing value for parameter {name!r}")
        try:
            params[name] = _complex(values.pop(name))
        except argparse.ArgumentTypeError as exc:
            raise UsageError(str(exc)) from exc
    if values:
        raise UsageError(f"unknown variables: {', '.join(values)}")
    return BoundMember(piece, p, indices, params)


def _write(path: str | None, data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        write_atomic(path, data)


def _format_for(path: str | None, explicit: str | None) -> str:
    if explicit:
        return explicit
    ext = os.path.splitext(path or "")[1].lower().lstrip(".")
    return ext if ext in ("pgm", "csv", "json") else "json"


def _print_json(data: dict) -> None:
    print(json.dumps(data, indent=2))


# ---------------------------------------------------------------------------
# Subcommands


def cmd_parse(args) -> int:
    try:
        node = expr.parse_expression(args.expression, {"z", *args.var, *args.index}, set(args.index))
    except (expr.ExprError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    print(expr.format(node))
    print(repr(node))
    return 0


def cmd_eval(args) -> int:
    F = _read_family(args.family, args.family_file)
    m = _member(F, args.member, args.piece)
    try:
        jet = m.jet(complex(args.at))
    except expr.EvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _print_json(
        {
            "member": m.id,
            "z": [args.at.real, args.at.imag],
            "value": [jet.value.real, jet.value.imag],
            "derivative": [jet.dz.real, jet.dz.imag],
        }
    )
    return 0


def cmd_classify(args) -> int:
    F = _read_family(args.family, args.family_file)
    A = classify_grid(F, _schedule(args, F), _grid(args), _params(args), _threads(args))
    _write(args.out, emit(A, _format_for(args.out, args.format)))
    print(json.dumps(A.histogram()), file=sys.stderr)
    return 0


def cmd_union_check(args) -> int:
    F1 = _read_family(args.family, args.family_file)
    F2 = _read_family(args.family2, args.family2_file, "--family2")
    try:
        U = union(F1, F2)
    except FamilyError as exc:
        raise UsageError(str(exc)) from exc
    grid, params, threads = _grid(args), _params(args), _threads(args)
    A1 = classify_grid(F1, _schedule(args, F1), grid, params, threads)
    A2 = classify_grid(F2, _schedule(args, F2), grid, params, threads)
    AU = classify_grid(U, _schedule(args, U), grid, params, threads)
    merged = raster_union(A1, A2)
    diff = compare(merged, AU)
    violations = int((merged.mask() & ~AU.mask()).sum())
    report = {
        "symmetric_difference_count": diff.symmetric_difference_count,
        "symmetric_difference_fraction": diff.symmetric_difference_count / merged.labels.size,
        "hausdorff_julia_cells": diff.hausdorff_julia,
        "subset_violations": violations,
        "confusion": [{"merged": a, "union": b, "count": n} for (a, b), n in diff.confusion.items()],
    }
    _write(args.out, (json.dumps(report, indent=2) + "\n").encode())
    return 0


def _solver(args) -> SolverParams:
    return SolverParams(window=args.solver_window or args.window, grid=args.newton_grid)


def _reference_raster(args, F: FamilySpec):
    """Raster whose Julia mask coverage is measured against."""
    if args.julia_family or args.julia_family_file:
        R = _read_family(args.julia_family, args.julia_family_file, "--julia-family")
    else:
        R = F
    return classify_grid(R, _schedule(args, R), _grid(args), _params(args), _threads(args))


def cmd_orbit(args) -> int:
    F = _read_family(args.family, args.family_file)
    orbit = backward_orbit(F, args.target, _schedule(args, F), _solver(args))
    for w in orbit.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _write(args.out, orbit.to_csv())
    summary = {"points": len(orbit.points), "complete": orbit.complete}
    if not args.no_coverage:
        summary["coverage_cells"] = coverage_distance(orbit, _reference_raster(args, F))
    print(json.dumps(summary), file=sys.stderr)
    return 0


def cmd_except(args) -> int:
    F = _read_family(args.family, args.family_file)
    targets = args.targets or [0j]
    try:
        rep = exceptional_probe(F, targets, _schedule(args, F), _solver(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _write(args.out, rep.to_json())
    return 0


def cmd_fixpoints(args) -> int:
    F = _read_family(args.family, args.family_file)
    rep = repelling_sweep(F, _schedule(args, F), _reference_raster(args, F))
    for w in rep.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _write(args.out, rep.to_csv())
    if args.summary:
        write_atomic(args.summary, rep.to_json())
    else:
        sys.stderr.write(rep.to_json().decode())
    return 0


def cmd_nevanlinna(args) -> int:
    F = _read_family(args.family, args.family_file)
    m = _member(F, args.member, args.piece)
    try:
        rs = nv.RadiusSchedule.log_spaced(args.r_min, args.r_max, args.per_decade)
        rep = nv.nevanlinna_report(m, args.a, rs)
    except nv.NotEntire as exc:
        raise UsageError(str(exc)) from exc
    for w in rep.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _write(args.out, rep.to_csv())
    if args.summary:
        write_atomic(args.summary, rep.to_json())
    else:
        sys.stderr.write(rep.to_json().decode())
    return 0


def cmd_verify(args) -> int:
    suite = Suite(threads=_threads(args), seed=args.seed)
    report = suite.run(args.case or None, echo=print)
    print(f"{sum(c.passed for c in report.cases)}/{len(report.cases)} cases pass")
    if args.out:
        write_atomic(args.out, report.to_json())
    return report.exit_code


# ---------------------------------------------------------------------------


def _add_family(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", help="family text; pieces separated by newlines (or a literal \\n)")
    p.add_argument("--family-file", help="file holding the family text")


def _add_raster(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=_window, default=(-2.0, 2.0, -2.0, 2.0), help="re_min,re_max,im_min,im_max")
    p.add_argument("--size", type=_size, default=(256, 256), help="WxH cells")
    p.add_argument("--n-max", type=int, default=None, help="cap on scheduled index values")
    p.add_argument("--schedule", choices=("geometric", "full"), default="geometric")
    p.add_argument("--tau", type=float, default=MartyParams.julia_threshold, help="JuliaLike score threshold")
    p.add_argument("--r-esc", type=float, default=MartyParams.escape_radius, help="escape radius")
    p.add_argument("--probe-radius", type=float, default=None, help="default: half a cell")
    p.add_argument("--probe-count", type=int, default=MartyParams.probe_count)
    p.add_argument("--tail-fraction", type=float, default=MartyParams.tail_fraction)
    p.add_argument("--threads", type=int, default=1, help="worker threads; 0 means one per CPU")


def _add_solver(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver-window", type=_window, default=None, help="Newton start window (default: --window)")
    p.add_argument("--newton-grid", type=int, default=SolverParams.grid, help="Newton starts per axis")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="julialike", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized steps (results are deterministic)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="print the canonical form and AST of an expression")
    p.add_argument("expression")
    p.add_argument("--var", action="append", default=[], help="declare an extra variable")
    p.add_argument("--index", action="append", default=[], help="declare an integer index variable")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="value and derivative of one member")
    _add_family(p)
    p.add_argument("--member", help="assignments such as k=2 or n=3,a=0.5+0.5i")
    p.add_argument("--piece", type=int, default=0)
    p.add_argument("--at", type=_complex, required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("classify", help="classification raster")
    _add_family(p)
    _add_raster(p)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("pgm", "csv", "json"), help="default: from --out extension")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("union-check", help="compare the merged rasters of two families with the union's raster")
    _add_family(p)
    p.add_argument("--family2")
    p.add_argument("--family2-file")
    _add_raster(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_union_check)

    for name, fn, helptext in (
        ("orbit", cmd_orbit, "backward orbit of a target (CSV) and its coverage of the Julia mask"),
        ("fixpoints", cmd_fixpoints, "repelling fixed points of compositions P o Q (CSV) and coverage"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_family(p)
        _add_raster(p)
        p.add_argument("--julia-family", help="family classified for the coverage raster (default: --family)")
        p.add_argument("--julia-family-file")
        p.add_argument("--out")
        p.set_defaults(func=fn)
        if name == "orbit":
            _add_solver(p)
            p.add_argument("--target", type=_complex, default=1 + 0j)
            p.add_argument("--no-coverage", action="store_true")
        else:
            p.add_argument("--summary", help="path for the JSON coverage report (default stderr)")

    p = sub.add_parser("except", help="exceptional-set probe over growing schedule prefixes")
    _add_family(p)
    _add_raster(p)
    _add_solver(p)
    p.add_argument("--targets", type=_complex, nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_except)

    p = sub.add_parser("nevanlinna", help="Nevanlinna table (CSV) and defect summary for one member")
    _add_family(p)
    p.add_argument("--member")
    p.add_argument("--piece", type=int, default=0)
    p.add_argument("--a", type=_complex, default=0j)
    p.add_argument("--r-min", type=float, default=1.0)
    p.add_argument("--r-max", type=float, default=1e4)
    p.add_argument("--per-decade", type=int, default=9)
    p.add_argument("--out")
    p.add_argument("--summary", help="path for the JSON summary (default stderr)")
    p.set_defaults(func=cmd_nevanlinna)

    p = sub.add_parser("verify", help="run the built-in acceptance suite")
    p.add_argument("--case", action="append", help="run only the named case (repeatable)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; 0 means one per CPU")
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_verify)
    return ap


# options whose values may start with "-" (windows, complex numbers)
_SIGNED_VALUE_OPTIONS = {"--window", "--solver-window", "--at", "--a", "--target"}


def _glue_signed_values(argv: list[str]) -> list[str]:
    """Rewrite ``--window -2,2,-2,2`` as ``--window=-2,2,-2,2`` so argparse accepts it."""
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _SIGNED_VALUE_OPTIONS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(_glue_signed_values(argv))  # exits with 2 on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - exit-code contract
        if args.verbose:
            raise
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
