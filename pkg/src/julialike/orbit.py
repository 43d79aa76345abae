"""Backward orbits, exceptional-set probes and orbit-closure coverage."""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import polyroots
from .family import BoundMember, FamilySpec, IndexSchedule, enumerate_members
from .raster import ClassificationRaster

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8


class IdenticallyAttained(ValueError):
    """The member is constant and equal to the target: every point is a preimage."""


@dataclass(frozen=True)
class SolverParams:
    window: tuple[float, float, float, float] = (-2.0, 2.0, -2.0, 2.0)
    grid: int = 16  # Newton starts per axis
    newton_iter: int = 100
    newton_tol: float = 1e-13
    dk_tol: float = 1e-12
    dk_iter: int = 500


def residual_bound(target: complex) -> float:
    return RESIDUAL_TOL * (1 + abs(target))


def preimages(m: BoundMember, target: complex, params: SolverParams = SolverParams()) -> list[complex]:
    """Solutions of m(w) = target.

    Complete (with multiplicity) when the member is syntactically a
    polynomial; otherwise the deduplicated limits of a Newton multistart
    over ``params.window``, which is only a partial set.
    """
    coeffs = m.polynomial()
    if coeffs is not None:
        c = coeffs.copy()
        c[0] -= target
        c = polyroots.trim(c)
        if len(c) == 1:
            if c[0] == 0:
                raise IdenticallyAttained(f"{m.id} is identically {target}: infinite preimage set")
            return []
        roots = polyroots.durand_kerner(c, params.dk_tol, params.dk_iter)
        return [complex(r) for r in roots]
    return _newton_multistart(m, target, params)


def _newton_multistart(m: BoundMember, target: complex, params: SolverParams) -> list[complex]:
    re_min, re_max, im_min, im_max = params.window
    xs = np.linspace(re_min, re_max, params.grid)
    ys = np.linspace(im_min, im_max, params.grid)
    z = (xs[None, :] + 1j * ys[:, None]).ravel()
    active = np.ones(z.shape, dtype=bool)
    for _ in range(params.newton_iter):
        jet = m.jet(z)
        with np.errstate(all="ignore"):
            step = (jet.value - target) / jet.dz
        step = np.where(active, step, 0)
        z = z - step
        active &= np.isfinite(z) & (np.abs(z) < 1e8)
        if not np.any(active & (np.abs(step) > params.newton_tol * (1 + np.abs(z)))):
            break
    z = z[active]
    if len(z) == 0:
        return []
    res = np.abs(m(z) - target)
    z = z[np.isfinite(res) & (res <= residual_bound(target))]
    return polyroots.dedup(z)


@dataclass(frozen=True)
class OrbitPoint:
    w: complex
    member: str
    residual: float


@dataclass
class OrbitSet:
    target: complex
    points: list[OrbitPoint]
    schedule: IndexSchedule
    complete: bool  # False when some member was solved by Newton multistart
    warnings: list[str] = field(default_factory=list)

    def locations(self) -> np.ndarray:
        return np.array([p.w for p in self.points], dtype=complex)

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["re", "im", "member", "residual"])
        for p in self.points:
            writer.writerow(["%.17g" % p.w.real, "%.17g" % p.w.imag, p.member, "%.17g" % p.residual])
        return buf.getvalue().encode("utf-8")


def backward_orbit(
    F: FamilySpec,
    target: complex,
    schedule: IndexSchedule,
    params: SolverParams = SolverParams(),
    members: list[BoundMember] | None = None,
) -> OrbitSet:
    """Union of member preimages of ``target``, deduplicated and clipped to the domain."""
    if members is None:
        members = enumerate_members(F, schedule)
    found: list[OrbitPoint] = []
    warnings: list[str] = []
    complete = True
    for m in members:
        if m.polynomial() is None:
            complete = False
        try:
            ws = preimages(m, target, params)
        except (IdenticallyAttained, polyroots.NoConvergence) as exc:
            warnings.append(f"{m.id}: {exc}")
            complete = False
            continue
        if not ws:
            continue
        arr = np.asarray(ws, dtype=complex)
        res = np.abs(m(arr) - target)
        ok = np.isfinite(res) & (res <= residual_bound(target)) & F.contains(arr)
        if np.any(~np.isfinite(res) | (res > residual_bound(target))):
            warnings.append(f"{m.id}: dropped {int(np.sum(res > residual_bound(target)))} unconverged roots")
            complete = False
        found.extend(OrbitPoint(complex(w), m.id, float(r)) for w, r in zip(arr[ok], res[ok]))
    points = _dedup_points(found)
    return OrbitSet(complex(target), points, schedule, complete, warnings)


def _dedup_points(points: list[OrbitPoint]) -> list[OrbitPoint]:
    if not points:
        return []
    locs = np.array([p.w for p in points])
    keep = []
    taken = np.zeros(len(points), dtype=bool)
    for i, p in enumerate(points):
        if taken[i]:
            continue
        taken |= np.abs(locs - p.w) <= polyroots.DEDUP_RADIUS
        keep.append(p)
    return keep


class Verdict(str, enum.Enum):
    FINITE_CANDIDATE = "FiniteCandidate"
    GROWING = "Growing"


@dataclass(frozen=True)
class ExceptionalEntry:
    target: complex
    prefix_counts: list[int]
    verdict: Verdict
    complete: bool


@dataclass
class ExceptionalReport:
    entries: list[ExceptionalEntry]

    def candidates(self) -> list[complex]:
        return [e.target for e in self.entries if e.verdict is Verdict.FINITE_CANDIDATE]

    def to_json(self) -> bytes:
        data = {
            "entries": [
                {
                    "target": [e.target.real, e.target.imag],
                    "prefix_counts": e.prefix_counts,
                    "verdict": e.verdict.value,
                    "complete": e.complete,
                }
                for e in self.entries
            ],
            "finite_candidates": len(self.candidates()),
        }
        return (json.dumps(data, indent=2) + "\n").encode("utf-8")


def schedule_prefixes(schedule: IndexSchedule) -> list[IndexSchedule]:
    """Nested prefixes of the schedule, one per position of its longest list."""
    n = len(schedule)
    return [schedule.prefix(k / n) for k in range(1, n + 1)]


def exceptional_probe(
    F: FamilySpec,
    targets: list[complex],
    schedule: IndexSchedule,
    params: SolverParams = SolverParams(),
) -> ExceptionalReport:
    """Orbit sizes over growing schedule prefixes; stable last two counts mark a candidate."""
    prefixes = schedule_prefixes(schedule)
    if len(prefixes) < 2:
        raise ValueError("exceptional probing needs a schedule with at least two values")
    member_lists = [enumerate_members(F, p) for p in prefixes]
    entries = []
    for t in targets:
        counts = []
        complete = True
        for members, prefix in zip(member_lists, prefixes):
            orbit = backward_orbit(F, t, prefix, params, members)
            counts.append(len(orbit.points))
            complete = complete and orbit.complete
        verdict = Verdict.FINITE_CANDIDATE if counts[-1] == counts[-2] else Verdict.GROWING
        entries.append(ExceptionalEntry(complex(t), counts, verdict, complete))
    return ExceptionalReport(entries)


def coverage_distance(points, A: ClassificationRaster) -> float:
    """Largest distance from a JuliaLike cell center to the nearest point, in cell widths.

    0 for an empty Julia mask, -1 when the point set is empty but the mask is not.
    """
    if isinstance(points, OrbitSet):
        points = points.locations()
    julia = A.mask()
    if not julia.any():
        return 0.0
    pts = np.asarray(points, dtype=complex)
    if len(pts) == 0:
        return -1.0
    centers = A.grid.centers()[julia]
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    d, _ = tree.query(np.column_stack([centers.real, centers.imag]))
    return float(d.max() / A.grid.cell_width)
