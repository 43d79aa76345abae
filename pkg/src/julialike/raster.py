"""Grid sweeps of the point classifier, raster algebra and file output."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .family import FamilySpec, IndexSchedule, enumerate_members, tail_mask
from .marty import Label, MartyParams, PointClassification, label_points, score_points

PGM_LEVELS = {
    Label.JULIA_LIKE: 0,
    Label.UNDETERMINED: 128,
    Label.FATOU_ESCAPING: 200,
    Label.FATOU_BOUNDED: 255,
}

ROWS_PER_TASK = 16


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("window must satisfy re_min < re_max and im_min < im_max")
        if self.width < 2 or self.height < 2:
            raise ValueError("grid needs at least 2x2 cells")

    @property
    def cell_width(self) -> float:
        return (self.re_max - self.re_min) / self.width

    @property
    def cell_height(self) -> float:
        return (self.im_max - self.im_min) / self.height

    @property
    def window(self) -> tuple[float, float, float, float]:
        return (self.re_min, self.re_max, self.im_min, self.im_max)

    def re(self) -> np.ndarray:
        return self.re_min + (np.arange(self.width) + 0.5) * self.cell_width

    def im(self) -> np.ndarray:
        # row 0 is the top of the window
        return self.im_max - (np.arange(self.height) + 0.5) * self.cell_height

    def centers(self) -> np.ndarray:
        return self.re()[None, :] + 1j * self.im()[:, None]

    def to_dict(self) -> dict:
        return {"window": list(self.window), "width": self.width, "height": self.height}


@dataclass
class ClassificationRaster:
    grid: GridSpec
    labels: np.ndarray  # (height, width) uint8 Label codes
    scores: np.ndarray
    witness: np.ndarray  # member index, -1 for none
    member_ids: list[str]
    metadata: dict = field(default_factory=dict)

    def cell(self, row: int, col: int) -> PointClassification:
        w = int(self.witness[row, col])
        return PointClassification(
            Label(int(self.labels[row, col])), float(self.scores[row, col]), self.member_ids[w] if w >= 0 else None
        )

    def mask(self, label: Label = Label.JULIA_LIKE) -> np.ndarray:
        return self.labels == label

    def histogram(self) -> dict[str, int]:
        return {lab.title: int(np.count_nonzero(self.labels == lab)) for lab in Label}


def classify_grid(
    F: FamilySpec,
    schedule: IndexSchedule,
    grid: GridSpec,
    params: MartyParams = MartyParams(),
    threads: int | None = 1,
) -> ClassificationRaster:
    """Classify every cell center; cells outside the domain are Undetermined.

    Rows are processed in blocks, possibly concurrently; results are placed
    by cell index so the output does not depend on ``threads``.
    """
    t0 = time.perf_counter()
    params = params.with_probe_radius(min(grid.cell_width, grid.cell_height) / 2)
    members = enumerate_members(F, schedule)
    tail = tail_mask(members, schedule, params.tail_fraction, params.tail_start)
    centers = grid.centers()
    inside = F.contains(centers)

    labels = np.full((grid.height, grid.width), Label.UNDETERMINED, dtype=np.uint8)
    scores = np.zeros((grid.height, grid.width))
    witness = np.full((grid.height, grid.width), -1, dtype=np.int64)

    def task(r0: int) -> None:
        rows = slice(r0, min(r0 + ROWS_PER_TASK, grid.height))
        sel = inside[rows]
        if not sel.any():
            return
        field_ = score_points(members, tail, centers[rows][sel], params)
        block_labels = labels[rows]
        block_labels[sel] = label_points(field_, params)
        scores[rows][sel] = field_.score
        witness[rows][sel] = field_.witness

    starts = range(0, grid.height, ROWS_PER_TASK)
    if threads is None or threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(task, starts))
    else:
        for r0 in starts:
            task(r0)

    metadata = {
        "family": F.describe(),
        "schedule": schedule.to_dict(),
        "params": params.to_dict(),
        "sampled_members": len(members),
        "tail_members": int(tail.sum()),
        "elapsed_seconds": time.perf_counter() - t0,
    }
    return ClassificationRaster(grid, labels, scores, witness, [m.id for m in members], metadata)


def _check_grids(A: ClassificationRaster, B: ClassificationRaster) -> None:
    if A.grid != B.grid:
        raise GridMismatch("rasters have different grids")


def raster_union(A: ClassificationRaster, B: ClassificationRaster) -> ClassificationRaster:
    """Cell-wise merge mirroring the classification of the union family.

    JuliaLike wins; then FatouEscaping if either side escapes (some member
    sequence of the union tends to infinity); FatouBounded only when both
    are bounded; Undetermined otherwise.  Scores combine by max.
    """
    _check_grids(A, B)
    a, b = A.labels, B.labels
    labels = np.full(a.shape, Label.UNDETERMINED, dtype=np.uint8)
    labels[(a == Label.FATOU_BOUNDED) & (b == Label.FATOU_BOUNDED)] = Label.FATOU_BOUNDED
    labels[(a == Label.FATOU_ESCAPING) | (b == Label.FATOU_ESCAPING)] = Label.FATOU_ESCAPING
    labels[(a == Label.JULIA_LIKE) | (b == Label.JULIA_LIKE)] = Label.JULIA_LIKE
    scores = np.maximum(A.scores, B.scores)
    offset = len(A.member_ids)
    witness = np.where(
        A.scores >= B.scores, A.witness, np.where(B.witness >= 0, B.witness + offset, -1)
    )
    metadata = {"union_of": [A.metadata.get("family"), B.metadata.get("family")]}
    return ClassificationRaster(A.grid, labels, scores, witness, A.member_ids + B.member_ids, metadata)


@dataclass(frozen=True)
class RasterDiff:
    symmetric_difference_count: int
    hausdorff_julia: float  # cell widths; -1 when exactly one mask is empty
    confusion: dict[tuple[str, str], int]


def hausdorff_masks(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> float:
    """Hausdorff distance between the cell-center sets of two masks, in cell widths."""
    if not a.any() and not b.any():
        return 0.0
    if not a.any() or not b.any():
        return -1.0
    sampling = (grid.cell_height / grid.cell_width, 1.0)
    d_to_b = ndimage.distance_transform_edt(~b, sampling=sampling)
    d_to_a = ndimage.distance_transform_edt(~a, sampling=sampling)
    return float(max(d_to_b[a].max(), d_to_a[b].max()))


def compare(A: ClassificationRaster, B: ClassificationRaster) -> RasterDiff:
    _check_grids(A, B)
    ja, jb = A.mask(), B.mask()
    confusion = {}
    for la in Label:
        for lb in Label:
            n = int(np.count_nonzero((A.labels == la) & (B.labels == lb)))
            if n:
                confusion[(la.title, lb.title)] = n
    return RasterDiff(int(np.count_nonzero(ja ^ jb)), hausdorff_masks(ja, jb, A.grid), confusion)


@dataclass(frozen=True)
class Component:
    size: int
    bounded: int
    escaping: int

    @property
    def escaping_fraction(self) -> float:
        return self.escaping / self.size

    @property
    def purity(self) -> float:
        return max(self.bounded, self.escaping) / self.size

    @property
    def kind(self) -> str:
        if self.escaping == self.size:
            return Label.FATOU_ESCAPING.title
        if self.bounded == self.size:
            return Label.FATOU_BOUNDED.title
        return "Mixed"


@dataclass(frozen=True)
class PurityReport:
    components: list[Component]

    @property
    def mixed(self) -> list[Component]:
        return [c for c in self.components if c.purity < 1]

    def to_dict(self) -> dict:
        return {
            "components": [
                {"size": c.size, "bounded": c.bounded, "escaping": c.escaping, "purity": c.purity, "kind": c.kind}
                for c in self.components
            ],
            "mixed": len(self.mixed),
        }


_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def component_purity(A: ClassificationRaster) -> PurityReport:
    """4-connected components of the Fatou-labelled cells, largest first."""
    fatou = (A.labels == Label.FATOU_BOUNDED) | (A.labels == Label.FATOU_ESCAPING)
    comp, n = ndimage.label(fatou, structure=_FOUR_CONNECTED)
    if n == 0:
        return PurityReport([])
    ids = comp[fatou]
    size = np.bincount(ids, minlength=n + 1)[1:]
    esc = np.bincount(ids, weights=(A.labels[fatou] == Label.FATOU_ESCAPING), minlength=n + 1)[1:]
    comps = [Component(int(s), int(s - e), int(e)) for s, e in zip(size, esc)]
    comps.sort(key=lambda c: -c.size)
    return PurityReport(comps)


# ---------------------------------------------------------------------------
# Output


def to_pgm(A: ClassificationRaster) -> bytes:
    lut = np.zeros(256, dtype=np.uint8)
    for lab, level in PGM_LEVELS.items():
        lut[int(lab)] = level
    header = f"P5\n{A.grid.width} {A.grid.height}\n255\n".encode("ascii")
    return header + lut[A.labels].tobytes()


def to_csv(A: ClassificationRaster) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["re", "im", "label", "score", "witness"])
    re, im = A.grid.re(), A.grid.im()
    for r in range(A.grid.height):
        for c in range(A.grid.width):
            w = int(A.witness[r, c])
            writer.writerow(
                [
                    "%.17g" % re[c],
                    "%.17g" % im[r],
                    Label(int(A.labels[r, c])).title,
                    "%.17g" % A.scores[r, c],
                    A.member_ids[w] if w >= 0 else "",
                ]
            )
    return buf.getvalue().encode("utf-8")


def report(A: ClassificationRaster) -> dict:
    meta = A.metadata
    return {
        "grid": A.grid.to_dict(),
        "family": meta.get("family"),
        "schedule": meta.get("schedule"),
        "params": meta.get("params"),
        "histogram": A.histogram(),
        "timing": {"elapsed_seconds": meta.get("elapsed_seconds")},
        "sampled_members": meta.get("sampled_members"),
        "tail_members": meta.get("tail_members"),
    }


def to_json(A: ClassificationRaster) -> bytes:
    return (json.dumps(report(A), indent=2) + "\n").encode("utf-8")


def emit(A: ClassificationRaster, fmt: str) -> bytes:
    writers = {"pgm": to_pgm, "csv": to_csv, "json": to_json}
    if fmt not in writers:
        raise ValueError(f"unknown format {fmt!r}")
    return writers[fmt](A)


def write_atomic(path: str | os.PathLike, data: bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
