"""Normality scores from spherical derivatives (Marty's criterion)."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .family import BoundMember, FamilySpec, IndexSchedule, enumerate_members, tail_mask

# Probe radius used when no raster cell size is available: half a cell of the
# default 256x256 grid on [-2, 2]^2.
DEFAULT_PROBE_RADIUS = 4 / 256 / 2


class Label(enum.IntEnum):
    JULIA_LIKE = 0
    FATOU_BOUNDED = 1
    FATOU_ESCAPING = 2
    UNDETERMINED = 3

    @property
    def title(self) -> str:
        return _TITLES[self]


_TITLES = {
    Label.JULIA_LIKE: "JuliaLike",
    Label.FATOU_BOUNDED: "FatouBounded",
    Label.FATOU_ESCAPING: "FatouEscaping",
    Label.UNDETERMINED: "Undetermined",
}


@dataclass(frozen=True)
class MartyParams:
    probe_radius: float | None = None  # None: half a raster cell
    probe_count: int = 4
    julia_threshold: float = 20.0
    escape_radius: float = 100.0
    tail_fraction: float = 0.5
    tail_start: int | None = None  # fixes the tail cutoff index when set

    def __post_init__(self):
        if self.probe_radius is not None and self.probe_radius <= 0:
            raise ValueError("probe_radius must be positive")
        if self.probe_count < 1:
            raise ValueError("probe_count must be >= 1")
        if self.julia_threshold <= 0 or self.escape_radius <= 0:
            raise ValueError("thresholds must be positive")
        if not 0 < self.tail_fraction <= 1:
            raise ValueError("tail_fraction must lie in (0, 1]")

    def with_probe_radius(self, rho: float) -> "MartyParams":
        if self.probe_radius is not None:
            return self
        return MartyParams(**{**asdict(self), "probe_radius": rho})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PointClassification:
    label: Label
    score: float
    witness: str | None


def spherical_derivative(m: BoundMember, z) -> float:
    """|f'(z)| / (1 + |f(z)|^2)."""
    jet = m.jet(np.array([z], dtype=complex))  # array path: overflow gives inf, not an error
    return float(_spherical(jet.value, jet.dz)[0])


def _spherical(value: np.ndarray, dz: np.ndarray) -> np.ndarray:
    a = np.abs(value)
    d = np.abs(dz)
    with np.errstate(all="ignore"):
        s = d / (1 + a * a)
        # f -> infinity: the spherical derivative tends to 0 as long as f'/f^2 does
        big = a > 1e150
        if big.any():
            s = np.where(big, (d / a) / a, s)
        s = np.where(np.isinf(a), 0.0, s)
    return s


@dataclass
class ScoreField:
    """Per-point reductions over the tail members."""

    score: np.ndarray
    witness: np.ndarray  # index into the member list, -1 if none
    max_abs: np.ndarray  # max over evaluable tail members of |f(z0)|
    skipped: np.ndarray  # number of tail members skipped at the point
    n_tail: int


def score_points(members: Sequence[BoundMember], tail: np.ndarray, z0: np.ndarray, params: MartyParams) -> ScoreField:
    """Tail-member Marty scores at every point of the 1-d array ``z0``."""
    rho = params.probe_radius
    if rho is None:
        raise ValueError("probe_radius must be resolved before scoring")
    z0 = np.asarray(z0, dtype=complex)
    offsets = rho * np.exp(2j * np.pi * np.arange(params.probe_count) / params.probe_count)
    probes = [z0] + [z0 + off for off in offsets]

    score = np.zeros(z0.shape)
    witness = np.full(z0.shape, -1, dtype=np.int64)
    max_abs = np.zeros(z0.shape)
    skipped = np.zeros(z0.shape, dtype=np.int64)
    indices = np.flatnonzero(tail)
    for k in indices:
        m = members[k]
        best = np.zeros(z0.shape)
        failed = np.zeros(z0.shape, dtype=bool)
        center_abs = None
        for j, w in enumerate(probes):
            jet = m.jet(w)
            value = np.asarray(jet.value)
            if value.shape != z0.shape:
                value = np.broadcast_to(value, z0.shape)
            s = _spherical(value, np.broadcast_to(jet.dz, z0.shape))
            bad = np.isnan(s) | np.isnan(value.real) | np.isnan(value.imag)
            failed |= bad
            np.fmax(best, s, out=best)
            if j == 0:
                center_abs = np.abs(value)
        best[failed] = 0.0
        skipped += failed
        better = best > score
        score = np.where(better, best, score)
        witness = np.where(better, k, witness)
        ok_abs = np.where(failed, 0.0, center_abs)
        np.fmax(max_abs, ok_abs, out=max_abs)
        # record the first evaluable member as witness even when all scores are 0
        witness = np.where((witness < 0) & ~failed, k, witness)
    return ScoreField(score, witness, max_abs, skipped, len(indices))


def label_points(field: ScoreField, params: MartyParams) -> np.ndarray:
    tau = params.julia_threshold
    labels = np.full(field.score.shape, Label.UNDETERMINED, dtype=np.uint8)
    labels[field.score <= tau / 10] = Label.FATOU_BOUNDED
    labels[field.max_abs >= params.escape_radius] = Label.FATOU_ESCAPING
    labels[field.score >= tau] = Label.JULIA_LIKE
    if field.n_tail:
        labels[2 * field.skipped > field.n_tail] = Label.UNDETERMINED
    else:
        labels[:] = Label.UNDETERMINED
    return labels


def classify_point(
    F: FamilySpec,
    schedule: IndexSchedule,
    z0: complex,
    params: MartyParams = MartyParams(),
    members: Sequence[BoundMember] | None = None,
) -> PointClassification:
    """Label ``z0`` from the tail members' spherical derivatives.

    JuliaLike if the score reaches the threshold; FatouEscaping if some tail
    member is already beyond the escape radius at ``z0``; FatouBounded if
    the score is below a tenth of the threshold; Undetermined otherwise.
    """
    if F.domain is not None and not F.domain.contains(z0):
        raise ValueError(f"{z0} lies outside the family's domain")
    params = params.with_probe_radius(DEFAULT_PROBE_RADIUS)
    if members is None:
        members = enumerate_members(F, schedule)
    tail = tail_mask(members, schedule, params.tail_fraction, params.tail_start)
    field = score_points(members, tail, np.array([z0], dtype=complex), params)
    label = Label(int(label_points(field, params)[0]))
    w = int(field.witness[0])
    return PointClassification(label, float(field.score[0]), members[w].id if w >= 0 else None)
