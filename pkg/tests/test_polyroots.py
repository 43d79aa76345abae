import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from julialike import polyroots


def test_roots_of_unity():
    roots = polyroots.durand_kerner(np.array([-1, 0, 0, 0, 0, 1], dtype=complex))
    expected = np.exp(2j * np.pi * np.arange(5) / 5)
    for e in expected:
        assert np.min(np.abs(roots - e)) < 1e-12


def test_zero_roots_split_off():
    roots = polyroots.durand_kerner(np.array([0, 0, -2, 1], dtype=complex))  # z^2 (z - 2)
    assert sorted(roots, key=abs) == pytest.approx([0, 0, 2])


def test_compose_matches_evaluation():
    p = np.array([1, 0, 2], dtype=complex)  # 1 + 2z^2
    q = np.array([0, 3, 1j], dtype=complex)
    z = 0.3 - 0.7j
    assert polyroots.polyval(polyroots.compose(p, q), z) == pytest.approx(
        polyroots.polyval(p, polyroots.polyval(q, z))
    )


@settings(max_examples=200)
@given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), min_size=1, max_size=8))
def test_recovers_generated_roots(roots):
    roots = np.array(roots)
    # keep roots well separated so the inverse problem is well conditioned
    d = np.abs(roots[:, None] - roots[None, :]) + np.eye(len(roots))
    if d.min() < 0.05:
        return
    c = np.poly(roots)[::-1]
    found = polyroots.durand_kerner(c)
    assert len(found) == len(roots)
    for r in roots:
        assert np.min(np.abs(found - r)) < 1e-8


def test_cluster_multiplicities():
    c = np.poly([1, 1, 1, -2])[::-1].astype(complex)
    clusters = polyroots.cluster_multiplicities(polyroots.durand_kerner(c))
    counts = sorted((round(z.real), k) for z, k in clusters)
    assert counts == [(-2, 1), (1, 3)]


def test_root_clusters_restore_accuracy():
    c = np.poly([1, 1, 1, -2])[::-1].astype(complex)
    clusters = sorted(polyroots.root_clusters(c), key=lambda p: p[0].real)
    assert [k for _, k in clusters] == [1, 3]
    assert abs(clusters[1][0] - 1) < 1e-12
