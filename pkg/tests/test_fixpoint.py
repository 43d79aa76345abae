import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from julialike.family import IndexSchedule, enumerate_members, parse_family
from julialike.fixpoint import (
    FixedPointClass,
    IdentityComposition,
    NotPolynomial,
    classify_multiplier,
    composition_fixed_points,
    fixed_residual,
    repelling_sweep,
    simple_root_check,
)
from julialike.marty import Label
from julialike.raster import ClassificationRaster, GridSpec


def member(text, **idx):
    return enumerate_members(parse_family(text), IndexSchedule({k: (v,) for k, v in idx.items()}))[0]


def power(n):
    return member("z^n ; index n=1..64", n=n)


def test_simple_root_certificates():
    cert = simple_root_check(power(4), np.exp(0.7j))
    assert (cert.distinct_count, cert.simple_count, cert.at_least_three) == (4, 4, True)
    cert = simple_root_check(power(2), 0)
    assert (cert.distinct_count, cert.simple_count, cert.at_least_three) == (1, 0, False)
    cert = simple_root_check(member("z^3-3*z"), 0)
    assert (cert.distinct_count, cert.simple_count) == (3, 3)


def test_square_composed_with_square():
    recs = composition_fixed_points(power(2), power(2))
    assert len(recs) == 4
    by_class = {}
    for r in recs:
        by_class.setdefault(r.classification, []).append(r)
        assert r.multiplier == pytest.approx(4 * r.location**3, abs=1e-12)
    assert len(by_class[FixedPointClass.ATTRACTING]) == 1
    assert abs(by_class[FixedPointClass.ATTRACTING][0].location) < 1e-12
    assert len(by_class[FixedPointClass.REPELLING]) == 3


def test_affine_pair():
    recs = composition_fixed_points(member("2*z"), member("3*z"))
    assert len(recs) == 1
    assert recs[0].location == pytest.approx(0)
    assert recs[0].multiplier == pytest.approx(6)
    assert recs[0].classification is FixedPointClass.REPELLING


def test_identity_and_constant_compositions():
    with pytest.raises(IdentityComposition):
        composition_fixed_points(power(1), power(1))
    with pytest.raises(IdentityComposition):
        composition_fixed_points(member("z+1"), member("z-1"))
    assert composition_fixed_points(member("z+1"), member("z-2")) == []
    (rec,) = composition_fixed_points(member("2*z"), member("z+1"))
    assert rec.location == pytest.approx(-2)
    with pytest.raises(NotPolynomial):
        composition_fixed_points(member("exp(z)"), power(2))


@settings(max_examples=60)
@given(st.integers(1, 8), st.integers(1, 8))
def test_power_pairs_closed_form(n, m):
    if n * m == 1:
        return
    P, Q = power(n), power(m)
    recs = composition_fixed_points(P, Q)
    # oracle: 0 and the (nm-1)-th roots of unity, multiplier nm z^(nm-1)
    assert len(recs) == n * m
    for r in recs:
        assert fixed_residual(P, Q, r) <= 1e-8
        if abs(r.location) > 1e-6:
            assert abs(abs(r.location) - 1) <= 1e-8
            assert abs(abs(r.multiplier) - n * m) <= 1e-6
            assert r.classification is FixedPointClass.REPELLING
        assert r.classification is classify_multiplier(r.multiplier)


@settings(max_examples=40)
@given(
    st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False), min_size=2, max_size=4),
    st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False), min_size=2, max_size=3),
)
def test_fixed_point_count_is_degree(pc, qc):
    def poly_member(c):
        text = "+".join(f"({x.real!r}+{x.imag!r}*i)*z^{k}" for k, x in enumerate(c))
        return member(text)

    if abs(pc[-1]) < 0.1 or abs(qc[-1]) < 0.1:
        return
    P, Q = poly_member(pc), poly_member(qc)
    recs = composition_fixed_points(P, Q)
    degree = (len(pc) - 1) * (len(qc) - 1)
    # with multiplicity collapsed only below the dedup radius
    assert len(recs) <= degree
    assert all(fixed_residual(P, Q, r) <= 1e-8 * max(1, abs(r.location)) ** degree for r in recs)


def test_multiplier_band():
    assert classify_multiplier(1 + 5e-10) is FixedPointClass.INDIFFERENT
    assert classify_multiplier(1.01j) is FixedPointClass.REPELLING
    assert classify_multiplier(0.5) is FixedPointClass.ATTRACTING


def raster(mask, grid):
    labels = np.where(mask, Label.JULIA_LIKE, Label.FATOU_BOUNDED).astype(np.uint8)
    return ClassificationRaster(grid, labels, np.zeros(mask.shape), np.full(mask.shape, -1), [])


def test_sweep_sentinels_and_audit():
    g = GridSpec(-2, 2, -2, 2, 64, 64)
    ring = np.abs(np.abs(g.centers()) - 1) < g.cell_width / 2
    F = parse_family("z^n ; index n=2..4")
    rep = repelling_sweep(F, IndexSchedule.full(F), raster(ring, g))
    assert rep.pairs == 9
    # oracle: the repelling points are the (nm-1)-th roots of unity for n, m in 2..4
    pts = np.concatenate([np.exp(2j * np.pi * np.arange(k) / k) for k in {n * m - 1 for n in (2, 3, 4) for m in (2, 3, 4)}])
    centers = g.centers()[ring]
    oracle = np.abs(centers[:, None] - pts[None, :]).min(axis=1).max() / g.cell_width
    assert rep.coverage == pytest.approx(oracle)
    assert rep.hypothesis_checked > 0 and rep.hypothesis_satisfied == rep.hypothesis_checked
    empty = repelling_sweep(F, IndexSchedule.full(F), raster(np.zeros_like(ring), g))
    assert empty.coverage == 0
    F = parse_family("0.5*z")
    assert repelling_sweep(F, IndexSchedule({}), raster(ring, g)).coverage == -1
