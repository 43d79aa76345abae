"""Built-in verification suite: worked examples reproduced as raster and point-set checks."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from . import nevanlinna as nv
from .family import FamilySpec, IndexSchedule, enumerate_members, intersect, parse_family, union
from .fixpoint import FixedPointClass, composition_fixed_points, fixed_residual, repelling_sweep
from .marty import Label, MartyParams
from .orbit import SolverParams, backward_orbit, coverage_distance, exceptional_probe, residual_bound
from .raster import ClassificationRaster, GridSpec, classify_grid, compare, component_purity, raster_union

SUITE_VERSION = 1

UNIT_CIRCLE = "z^n ; index n=1..64"
SIN_LINE = "sin(k*z) ; index k=1..64"
CLOSED_DISK = "n*(z-a) ; index n=1..64 ; param a in disk(0,1)"
SCALED = "domain disk(0,1)\nn*z ; index n=1..256"
F_PAIR = "n*z ; index n=1..64\nn*(z-1) ; index n=1..64"
G_PAIR = "n*(z-1) ; index n=1..64\nexp(n*z) ; index n=1..64"
POWERS_32 = "z^n ; index n=1..32"
POWERS_2_8 = "z^n ; index n=2..8"


@dataclass
class CaseResult:
    name: str
    passed: bool
    measured: float
    tolerance: str
    detail: str = ""

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def line(self) -> str:
        text = f"{self.status.upper():4}  {self.name:22} measured={self.measured:.6g}  tolerance: {self.tolerance}"
        return text + (f"  ({self.detail})" if self.detail else "")


@dataclass
class VerifyReport:
    cases: list[CaseResult]
    seed: int = 0
    version: int = SUITE_VERSION

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.cases)

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    def table(self) -> str:
        return "\n".join(c.line() for c in self.cases)

    def to_json(self) -> bytes:
        data = {
            "version": self.version,
            "seed": self.seed,
            "passed": self.ok,
            "cases": [
                {
                    "name": c.name,
                    "status": c.status,
                    "measured": c.measured,
                    "tolerance": c.tolerance,
                    "detail": c.detail,
                }
                for c in self.cases
            ],
        }
        return (json.dumps(data, indent=2) + "\n").encode("utf-8")


def _grid(lim: float = 2.0, size: int = 256) -> GridSpec:
    return GridSpec(-lim, lim, -lim, lim, size, size)


class Suite:
    """The acceptance cases.  Rasters shared between cases are computed once."""

    def __init__(self, threads: int | None = 1, params: MartyParams = MartyParams(), seed: int = 0):
        self.threads = threads
        self.params = params
        self.seed = seed
        self._cache: dict[str, tuple[ClassificationRaster, float]] = {}
        self.orbit_residuals: list[tuple[str, float, float]] = []  # (case, worst residual, bound)

    def classify(self, key: str, F: FamilySpec, grid: GridSpec | None = None) -> ClassificationRaster:
        if key not in self._cache:
            t0 = time.process_time()
            A = classify_grid(F, IndexSchedule.geometric(F), grid or _grid(), self.params, self.threads)
            self._cache[key] = (A, time.process_time() - t0)
        return self._cache[key][0]

    def cpu_seconds(self, key: str) -> float:
        return self._cache[key][1]

    # -- cases ---------------------------------------------------------------

    def unit_circle(self) -> CaseResult:
        A = self.classify("powers", parse_family(UNIT_CIRCLE))
        h = A.grid.cell_width
        haus = hausdorff_to_curve(A, _circle_points(4096)) / h
        c = A.grid.centers()
        fatou = A.mask(Label.FATOU_BOUNDED) | A.mask(Label.FATOU_ESCAPING)
        inside_bad = int(np.count_nonzero(fatou & (np.abs(c) < 1) & ~A.mask(Label.FATOU_BOUNDED)))
        outside_bad = int(np.count_nonzero(fatou & (np.abs(c) > 1) & ~A.mask(Label.FATOU_ESCAPING)))
        mixed = len(component_purity(A).mixed)
        secs = self.cpu_seconds("powers")
        ok = haus <= 3 and inside_bad == 0 and outside_bad == 0 and mixed == 0 and secs <= 30
        return CaseResult(
            "unit-circle",
            ok,
            haus,
            "Hausdorff <= 3 cells; pure components; <= 30 s",
            f"inside non-bounded={inside_bad}, outside non-escaping={outside_bad}, mixed={mixed}, cpu={secs:.1f}s",
        )

    def closed_disk(self) -> CaseResult:
        A = self.classify("disk", parse_family(CLOSED_DISK))
        disk = np.abs(A.grid.centers()) <= 1
        frac = float(np.count_nonzero(A.mask() ^ disk)) / disk.size
        secs = self.cpu_seconds("disk")
        return CaseResult(
            "closed-disk",
            frac <= 0.03 and secs <= 300,
            frac,
            "symmetric difference <= 3% of cells; <= 300 s",
            f"cpu={secs:.1f}s, sampled members={A.metadata['sampled_members']}",
        )

    def sin_real_line(self) -> CaseResult:
        A = self.classify("sin", parse_family(SIN_LINE))
        h = A.grid.cell_height
        julia = A.mask()
        im = np.broadcast_to(A.grid.im()[:, None], julia.shape)
        far = float(np.abs(im[julia]).max() / h) if julia.any() else 0.0
        axis_rows = np.abs(A.grid.im()) <= h / 2 + 1e-12
        axis_missing = int(np.count_nonzero(~julia[axis_rows]))
        return CaseResult(
            "sin-real-line",
            far <= 3 and axis_missing == 0,
            far,
            "Julia cells within 3 cells of the axis; every axis cell Julia",
            f"axis cells not Julia={axis_missing}",
        )

    def union_theorem(self) -> CaseResult:
        F1, F2 = parse_family(SIN_LINE), parse_family(UNIT_CIRCLE)
        A1 = self.classify("sin", F1)
        A2 = self.classify("powers", F2)
        U = self.classify("sin+powers", union(F1, F2))
        merged = raster_union(A1, A2)
        diff = compare(merged, U)
        frac = diff.symmetric_difference_count / merged.labels.size
        violations = int(np.count_nonzero(merged.mask() & ~U.mask()))
        return CaseResult(
            "union-theorem",
            frac <= 0.02 and violations == 0,
            frac,
            "Julia symmetric difference <= 2% of cells; 0 subset violations",
            f"subset violations={violations}",
        )

    def singleton(self) -> CaseResult:
        F = parse_family(SCALED)
        A = self.classify("scaled", F, _grid(1.0))
        h = A.grid.cell_width
        c = A.grid.centers()[A.mask()]
        far = float(np.abs(c).max()) if len(c) else 0.0
        bound = 1 / math.sqrt(128 * self.params.julia_threshold) + 2 * h
        return CaseResult(
            "singleton-julia",
            far <= bound,
            far / h,
            f"Julia cells within 1/sqrt(128*tau) + 2 cells = {bound / h:.3g} cells of 0",
            f"Julia cells={len(c)}",
        )

    def intersection(self) -> CaseResult:
        F, G = parse_family(F_PAIR), parse_family(G_PAIR)
        AF = self.classify("F-pair", F)
        AG = self.classify("G-pair", G)
        AI = self.classify("F-cap-G", intersect(F, G))
        h = AI.grid.cell_width
        c = AI.grid.centers()
        far = float(np.abs(c[AI.mask()] - 1).max() / h) if AI.mask().any() else math.inf
        both = AF.mask() & AG.mask()
        near0 = bool(np.any(both & (np.abs(c) <= 2 * h)))
        near1 = bool(np.any(both & (np.abs(c - 1) <= 2 * h)))
        return CaseResult(
            "intersection",
            far <= 2 and near0 and near1,
            far,
            "Julia of intersection within 2 cells of 1; both masks meet near 0 and 1",
            f"joint Julia near 0={near0}, near 1={near1}",
        )

    def orbit_closure(self) -> CaseResult:
        A = self.classify("powers", parse_family(UNIT_CIRCLE))
        F = parse_family(POWERS_32)
        orbit = backward_orbit(F, 1.0, IndexSchedule.full(F))
        self._record_residuals("orbit-closure", orbit)
        cov = coverage_distance(orbit, A)
        return CaseResult(
            "orbit-closure", 0 <= cov <= 3, cov, "coverage <= 3 cells", f"orbit points={len(orbit.points)}"
        )

    def exceptional(self) -> CaseResult:
        F = parse_family(SCALED)
        targets = [0, 0.5, 0.5j, -0.3]
        rep = exceptional_probe(F, targets, IndexSchedule.geometric(F, 64))
        cands = rep.candidates()
        return CaseResult(
            "exceptional-count",
            len(cands) == 1 and cands[0] == 0,
            len(cands),
            "exactly one FiniteCandidate, at 0",
            "; ".join(f"{e.target:g}:{e.verdict.value}{e.prefix_counts}" for e in rep.entries),
        )

    def repelling_density(self) -> CaseResult:
        A = self.classify("powers", parse_family(UNIT_CIRCLE))
        F = parse_family(POWERS_2_8)
        sched = IndexSchedule.full(F)
        members = enumerate_members(F, sched)
        worst_loc = worst_mult = worst_res = 0.0
        for P in members:
            for Q in members:
                nm = P.indices["n"] * Q.indices["n"]
                for rec in composition_fixed_points(P, Q):
                    worst_res = max(worst_res, fixed_residual(P, Q, rec))
                    if abs(rec.location) > 1e-6:
                        worst_loc = max(worst_loc, abs(abs(rec.location) - 1))
                        worst_mult = max(worst_mult, abs(abs(rec.multiplier) - nm))
        rep = repelling_sweep(F, sched, A)
        ok = worst_loc <= 1e-8 and worst_mult <= 1e-6 and worst_res <= 1e-8 and 0 <= rep.coverage <= 3
        return CaseResult(
            "repelling-density",
            ok,
            rep.coverage,
            "| |z|-1 | <= 1e-8; | |mult|-nm | <= 1e-6; coverage <= 3 cells",
            f"max | |z|-1 |={worst_loc:.2g}, max | |mult|-nm |={worst_mult:.2g}, repelling={len(rep.repelling)}",
        )

    def nevanlinna_values(self) -> CaseResult:
        def member(text):
            return enumerate_members(parse_family(text), IndexSchedule({}))[0]

        T = nv.characteristic(member("exp(z)"), 10.0)
        t_err = abs(T / (10 / math.pi) - 1)
        cube = nv.nevanlinna_report(member("z^3"), 0)
        theta_err = max(abs((1 - row.ratio_theta) - 2 / 3) for row in cube.rows if row.r > 1)
        delta = nv.defects(member("(z-5)*exp(z)"), 0)[0]
        quad = member("z*(z-2)")
        n_err = 0.0
        for r in nv.RadiusSchedule.log_spaced().radii:
            exact = nv.counting(quad, 0, r, method="roots")[0]
            arg = nv.counting(quad, 0, r, method="argument")[0]
            n_err = max(n_err, abs(exact - arg))
        ok = t_err <= 1e-3 and theta_err <= 1e-9 and delta >= 0.99 and n_err <= 1e-6
        return CaseResult(
            "nevanlinna-golden",
            ok,
            delta,
            "T(10,e^z) within 0.1% of 10/pi; theta(0,z^3)=2/3 +- 1e-9; delta(0,(z-5)e^z) >= 0.99; N paths agree 1e-6",
            f"T rel err={t_err:.2g}, theta err={theta_err:.2g}, N diff={n_err:.2g}",
        )

    def preimage_residuals(self) -> CaseResult:
        if not any(name == "orbit-closure" for name, _, _ in self.orbit_residuals):
            F = parse_family(POWERS_32)
            self._record_residuals("orbit-closure", backward_orbit(F, 1.0, IndexSchedule.full(F)))
        F = parse_family("(z-n)*exp(z) ; index n=1..8")
        orbit = backward_orbit(F, 0.0, IndexSchedule.full(F), SolverParams(window=(-2, 10, -6, 6)))
        self._record_residuals("transcendental", orbit)
        worst = max(res / bound for _, res, bound in self.orbit_residuals)
        return CaseResult(
            "preimage-residuals",
            worst <= 1,
            worst,
            "every orbit point |f(w)-t| <= 1e-8 (1+|t|)",
            f"runs={len(self.orbit_residuals)}",
        )

    def _record_residuals(self, name, orbit) -> None:
        worst = max((p.residual for p in orbit.points), default=0.0)
        self.orbit_residuals.append((name, worst, residual_bound(orbit.target)))

    def cases(self) -> list[tuple[str, Callable[[], CaseResult]]]:
        return [
            ("unit-circle", self.unit_circle),
            ("closed-disk", self.closed_disk),
            ("sin-real-line", self.sin_real_line),
            ("union-theorem", self.union_theorem),
            ("singleton-julia", self.singleton),
            ("intersection", self.intersection),
            ("orbit-closure", self.orbit_closure),
            ("exceptional-count", self.exceptional),
            ("repelling-density", self.repelling_density),
            ("nevanlinna-golden", self.nevanlinna_values),
            ("preimage-residuals", self.preimage_residuals),
        ]

    def run(self, only: list[str] | None = None, echo: Callable[[str], None] | None = None) -> VerifyReport:
        results = []
        for name, fn in self.cases():
            if only and name not in only:
                continue
            res = fn()
            if echo:
                echo(res.line())
            results.append(res)
        return VerifyReport(results, self.seed)


def _circle_points(count: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(count) / count)


def hausdorff_to_curve(A: ClassificationRaster, curve: np.ndarray) -> float:
    """Hausdorff distance between Julia cell centers and a densely sampled curve (absolute units)."""
    pts = A.grid.centers()[A.mask()]
    if len(pts) == 0:
        return math.inf
    tp = cKDTree(np.column_stack([pts.real, pts.imag]))
    tc = cKDTree(np.column_stack([curve.real, curve.imag]))
    d1, _ = tc.query(np.column_stack([pts.real, pts.imag]))
    d2, _ = tp.query(np.column_stack([curve.real, curve.imag]))
    return float(max(d1.max(), d2.max()))
