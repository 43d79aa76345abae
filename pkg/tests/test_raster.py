import json
import os

import numpy as np
import pytest

from julialike.family import IndexSchedule, parse_family
from julialike.marty import Label, MartyParams
from julialike.raster import (
    ClassificationRaster,
    GridSpec,
    classify_grid,
    compare,
    component_purity,
    emit,
    hausdorff_masks,
    raster_union,
    to_pgm,
    write_atomic,
)

GRID = GridSpec(-2, 2, -2, 2, 256, 256)


def classify(text, grid=GRID, threads=1, params=MartyParams()):
    F = parse_family(text)
    return classify_grid(F, IndexSchedule.geometric(F), grid, params, threads)


@pytest.fixture(scope="module")
def powers():
    return classify("z^n ; index n=1..64")


@pytest.fixture(scope="module")
def sines():
    return classify("sin(k*z) ; index k=1..64")


def const_raster(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    h, w = labels.shape
    grid = GridSpec(-1, 1, -1, 1, w, h)
    return ClassificationRaster(grid, labels, np.zeros(labels.shape), np.full(labels.shape, -1), [])


def test_grid_geometry():
    g = GridSpec(-2, 2, -1, 1, 4, 2)
    assert g.re().tolist() == [-1.5, -0.5, 0.5, 1.5]
    assert g.im().tolist() == [0.5, -0.5]  # row 0 on top
    with pytest.raises(ValueError):
        GridSpec(1, 0, 0, 1, 4, 4)


def test_pgm_golden_bytes():
    A = const_raster([[Label.FATOU_BOUNDED] * 2] * 2)
    assert to_pgm(A) == b"P5\n2 2\n255\n" + b"\xff" * 4
    labels = np.full((2, 3), Label.FATOU_BOUNDED, dtype=np.uint8)
    labels[1, 2] = Label.JULIA_LIKE
    labels[0, 1] = Label.FATOU_ESCAPING
    labels[1, 0] = Label.UNDETERMINED
    assert to_pgm(const_raster(labels)) == b"P5\n3 2\n255\n" + bytes([255, 200, 255, 128, 255, 0])


def test_constant_family_is_bounded():
    A = classify("0*z+1", GridSpec(-1, 1, -1, 1, 16, 16))
    assert A.histogram()["FatouBounded"] == 256


def test_parallel_equals_serial():
    grid = GridSpec(-2, 2, -2, 2, 96, 80)
    text = "n*(z-a) ; index n=1..64 ; param a in disk(0,1,3,4)\nsin(n*z) ; index n=1..64"
    a = classify(text, grid, threads=1)
    b = classify(text, grid, threads=4)
    for fmt in ("pgm", "csv"):
        assert emit(a, fmt) == emit(b, fmt)


def test_determinism(powers):
    again = classify("z^n ; index n=1..64")
    assert to_pgm(again) == to_pgm(powers)


def test_compare_self(powers):
    d = compare(powers, powers)
    assert (d.symmetric_difference_count, d.hausdorff_julia) == (0, 0.0)


def test_hausdorff_rules():
    g = GridSpec(-2, 2, -2, 2, 64, 64)
    c = g.centers()
    ring = np.abs(np.abs(c) - 1) < g.cell_width / 2
    assert hausdorff_masks(ring, np.roll(ring, 1, axis=1), g) == 1.0
    one = np.zeros_like(ring)
    one[32, 32] = True
    assert hausdorff_masks(one, np.zeros_like(ring), g) == -1.0
    assert hausdorff_masks(np.zeros_like(ring), np.zeros_like(ring), g) == 0.0


def test_union_rules(powers):
    same = raster_union(powers, powers)
    assert np.array_equal(same.labels, powers.labels)
    J, B, E, U = Label.JULIA_LIKE, Label.FATOU_BOUNDED, Label.FATOU_ESCAPING, Label.UNDETERMINED
    a = const_raster([[J, B, B], [U, U, E]])
    b = const_raster([[B, B, E], [B, J, U]])
    assert raster_union(a, b).labels.tolist() == [[J, B, E], [U, J, E]]


def test_union_subset_exact(powers, sines):
    U = classify("sin(k*z) ; index k=1..64\nz^n ; index n=1..64")
    merged = raster_union(sines, powers)
    assert not np.any(merged.mask() & ~U.mask())


def test_components_of_powers(powers):
    rep = component_purity(powers)
    assert [c.kind for c in rep.components] == ["FatouEscaping", "FatouBounded"]
    assert rep.mixed == []


def test_components_of_sines(sines):
    rep = component_purity(sines)
    assert [c.kind for c in rep.components] == ["FatouEscaping", "FatouEscaping"]


def test_all_bounded_single_component():
    rep = component_purity(const_raster(np.full((5, 5), Label.FATOU_BOUNDED)))
    assert len(rep.components) == 1 and rep.components[0].purity == 1


def test_json_report(powers):
    data = json.loads(emit(powers, "json"))
    assert list(data)[:6] == ["grid", "family", "schedule", "params", "histogram", "timing"]
    assert data["schedule"]["n_max"] == 64
    assert data["params"]["probe_radius"] == pytest.approx(4 / 256 / 2)
    assert sum(data["histogram"].values()) == 256 * 256


def test_domain_clip_marks_outside_undetermined():
    A = classify("domain disk(0,1)\nn*z ; index n=1..256", GridSpec(-2, 2, -2, 2, 32, 32))
    outside = np.abs(A.grid.centers()) >= 1
    assert np.all(A.labels[outside] == Label.UNDETERMINED)
    assert np.all(A.scores[outside] == 0)


def test_write_atomic(tmp_path):
    path = tmp_path / "out.bin"
    write_atomic(path, b"abc")
    write_atomic(path, b"xyz")
    assert path.read_bytes() == b"xyz"
    assert os.listdir(tmp_path) == ["out.bin"]
