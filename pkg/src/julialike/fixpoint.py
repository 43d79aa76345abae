"""Fixed points of compositions P∘Q of polynomial members and their multipliers."""

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
from .marty import Label
from .raster import ClassificationRaster

log = logging.getLogger(__name__)

INDIFFERENT_BAND = 1e-9
SIMPLE_TOL = 1e-8
FIXED_RESIDUAL_TOL = 1e-8


class NotPolynomial(ValueError):
    pass


class IdentityComposition(ValueError):
    pass


class FixedPointClass(str, enum.Enum):
    REPELLING = "Repelling"
    ATTRACTING = "Attracting"
    INDIFFERENT = "Indifferent"


def classify_multiplier(lam: complex) -> FixedPointClass:
    r = abs(lam)
    if abs(r - 1) <= INDIFFERENT_BAND:
        return FixedPointClass.INDIFFERENT
    return FixedPointClass.REPELLING if r > 1 else FixedPointClass.ATTRACTING


@dataclass(frozen=True)
class FixedPointRecord:
    location: complex
    multiplier: complex
    classification: FixedPointClass
    P: str
    Q: str


@dataclass(frozen=True)
class SimpleRootCertificate:
    member: str
    target: complex
    distinct_count: int
    simple_count: int  # distinct roots with |m'| > 1e-8 and separation > 1e-8
    min_separation: float  # inf for fewer than two roots
    min_derivative: float  # inf for no roots

    @property
    def at_least_three(self) -> bool:
        return self.simple_count >= 3


def _coeffs(m: BoundMember) -> np.ndarray:
    c = m.polynomial()
    if c is None:
        raise NotPolynomial(f"{m.id} is not a polynomial")
    return c


def simple_root_check(m: BoundMember, w0: complex) -> SimpleRootCertificate:
    """Root structure of m - w0: how many distinct simple roots it has."""
    c = _coeffs(m).copy()
    c[0] -= w0
    clusters = polyroots.root_clusters(c)
    locs = np.array([z for z, _ in clusters], dtype=complex)
    if len(locs) >= 2:
        d = np.abs(locs[:, None] - locs[None, :])
        np.fill_diagonal(d, np.inf)
        nearest = d.min(axis=1)
        min_sep = float(nearest.min())
    else:
        nearest = np.full(len(locs), np.inf)
        min_sep = float("inf")
    deriv = np.abs(m.jet(locs).dz) if len(locs) else np.zeros(0)
    simple = (deriv > SIMPLE_TOL) & (nearest > SIMPLE_TOL) & np.array([k == 1 for _, k in clusters], dtype=bool)
    return SimpleRootCertificate(
        m.id,
        complex(w0),
        len(clusters),
        int(simple.sum()),
        min_sep,
        float(deriv.min()) if len(deriv) else float("inf"),
    )


def composition_fixed_points(P: BoundMember, Q: BoundMember) -> list[FixedPointRecord]:
    """All fixed points of P∘Q with multipliers P'(Q(z))·Q'(z)."""
    c = polyroots.compose(_coeffs(P), _coeffs(Q))
    c = np.pad(c, (0, max(0, 2 - len(c))))
    c[1] -= 1
    c = polyroots.trim(c)
    if len(c) == 1:
        if c[0] == 0:
            raise IdentityComposition(f"{P.id}∘{Q.id} is the identity: every point fixed")
        return []
    roots = polyroots.durand_kerner(c)
    records = []
    for z, _ in polyroots.cluster_multiplicities(roots, rel_radius=polyroots.DEDUP_RADIUS):
        q = Q.jet(z)
        p = P.jet(q.value)
        lam = complex(p.dz * q.dz)
        records.append(FixedPointRecord(complex(z), lam, classify_multiplier(lam), P.id, Q.id))
    return records


def fixed_residual(P: BoundMember, Q: BoundMember, rec: FixedPointRecord) -> float:
    return abs(P(Q(rec.location)) - rec.location)


@dataclass
class RepellingReport:
    repelling: list[FixedPointRecord]
    coverage: float  # cell widths; 0 for empty Julia mask, -1 for no repelling points
    pairs: int
    hypothesis_checked: int
    hypothesis_satisfied: int
    warnings: list[str] = field(default_factory=list)

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["re", "im", "mult_re", "mult_im", "class", "P", "Q"])
        for r in self.repelling:
            writer.writerow(
                [
                    "%.17g" % r.location.real,
                    "%.17g" % r.location.imag,
                    "%.17g" % r.multiplier.real,
                    "%.17g" % r.multiplier.imag,
                    r.classification.value,
                    r.P,
                    r.Q,
                ]
            )
        return buf.getvalue().encode("utf-8")

    def to_json(self) -> bytes:
        data = {
            "coverage_cells": self.coverage,
            "repelling_points": len(self.repelling),
            "pairs": self.pairs,
            "hypothesis": {"checked": self.hypothesis_checked, "satisfied": self.hypothesis_satisfied},
            "warnings": self.warnings,
        }
        return (json.dumps(data, indent=2) + "\n").encode("utf-8")


def repelling_sweep(
    F: FamilySpec,
    schedule: IndexSchedule,
    A: ClassificationRaster,
    audit_cells: int = 16,
) -> RepellingReport:
    """Repelling fixed points of all P∘Q and their distance to the Julia estimate.

    The hypothesis audit checks, at up to ``audit_cells`` Julia cell centers
    w0, whether some member P0 makes P0 - w0 have three distinct simple roots.
    """
    warnings = []
    polys = []
    for m in enumerate_members(F, schedule):
        if m.polynomial() is None:
            warnings.append(f"{m.id}: not a polynomial, skipped")
        else:
            polys.append(m)
    repelling: list[FixedPointRecord] = []
    pairs = 0
    for P in polys:
        for Q in polys:
            pairs += 1
            try:
                recs = composition_fixed_points(P, Q)
            except IdentityComposition as exc:
                warnings.append(str(exc))
                continue
            repelling.extend(r for r in recs if r.classification is FixedPointClass.REPELLING)
    locs = np.array([r.location for r in repelling], dtype=complex)
    if len(locs):
        keep = polyroots.dedup(locs)
        index = {complex(z): i for i, z in enumerate(locs)}
        repelling = [repelling[index[z]] for z in keep]

    julia = A.mask(Label.JULIA_LIKE)
    if not julia.any():
        coverage = 0.0
    elif not repelling:
        coverage = -1.0
    else:
        pts = np.array([r.location for r in repelling])
        centers = A.grid.centers()[julia]
        tree = cKDTree(np.column_stack([pts.real, pts.imag]))
        d, _ = tree.query(np.column_stack([centers.real, centers.imag]))
        coverage = float(d.max() / A.grid.cell_width)

    checked = satisfied = 0
    if julia.any() and polys:
        centers = A.grid.centers()[julia]
        pick = np.linspace(0, len(centers) - 1, min(audit_cells, len(centers))).round().astype(int)
        for w0 in centers[pick]:
            checked += 1
            if any(simple_root_check(P, w0).at_least_three for P in polys):
                satisfied += 1
    return RepellingReport(repelling, coverage, pairs, checked, satisfied, warnings)
