import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from julialike.family import IndexSchedule, enumerate_members, parse_family, tail_mask
from julialike.marty import Label, MartyParams, classify_point, score_points, spherical_derivative

P = MartyParams(probe_radius=4 / 256 / 2)


def member(text, **idx):
    F = parse_family(text)
    return enumerate_members(F, IndexSchedule({k: (v,) for k, v in idx.items()}))[0]


def test_spherical_derivative_examples():
    assert spherical_derivative(member("n*z ; index n=1..9", n=7), 0) == pytest.approx(7)
    assert spherical_derivative(member("z^n ; index n=1..10", n=10), 1j) == pytest.approx(5)
    assert spherical_derivative(member("3+0*z"), 0.4) == 0


def test_spherical_derivative_survives_overflow():
    m = member("exp(n*z) ; index n=1..1000", n=1000)
    assert spherical_derivative(m, 5.0) == 0.0


def test_scaled_family_at_origin_is_julia():
    F = parse_family("domain disk(0,1)\nn*z ; index n=1..256")
    res = classify_point(F, IndexSchedule.geometric(F), 0j, P)
    assert res.label is Label.JULIA_LIKE
    assert res.score == pytest.approx(256)
    assert res.witness == "p0[n=256]"


def test_powers_escape_outside_circle():
    F = parse_family("z^n ; index n=1..64")
    s = IndexSchedule.geometric(F)
    assert classify_point(F, s, 2, P).label is Label.FATOU_ESCAPING
    assert classify_point(F, s, 0.3, P).label is Label.FATOU_BOUNDED
    for angle in np.linspace(0, 2 * np.pi, 17):
        z0 = 1.1 * np.exp(1j * angle)
        assert classify_point(F, s, z0, P).label is Label.FATOU_ESCAPING


def test_sin_on_real_axis_is_julia():
    F = parse_family("sin(k*z) ; index k=1..64")
    assert classify_point(F, IndexSchedule.geometric(F), 1.0, P).label is Label.JULIA_LIKE


def test_outside_domain():
    F = parse_family("domain disk(0,1)\nn*z ; index n=1..4")
    with pytest.raises(ValueError):
        classify_point(F, IndexSchedule.geometric(F), 2, P)


@settings(max_examples=300)
@given(st.complex_numbers(max_magnitude=0.9, allow_nan=False, allow_infinity=False))
def test_scaled_family_closed_form(z0):
    """Score of {nz} equals max over tail n and probes of n / (1 + n^2 |w|^2)."""
    F = parse_family("domain disk(0,1)\nn*z ; index n=1..256")
    s = IndexSchedule.geometric(F)
    res = classify_point(F, s, z0, P)
    probes = [z0] + [z0 + P.probe_radius * np.exp(2j * np.pi * k / 4) for k in range(4)]
    oracle = max(n / (1 + n * n * abs(w) ** 2) for n in (128, 256) for w in probes)
    assert res.score == pytest.approx(oracle, rel=1e-12)
    assert (res.label is Label.JULIA_LIKE) == (oracle >= P.julia_threshold)
    if res.label is Label.JULIA_LIKE:
        assert abs(z0) <= 1 / math.sqrt(128 * P.julia_threshold) + P.probe_radius


@settings(max_examples=100)
@given(
    st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
    st.integers(2, 6),
)
def test_score_monotone_under_schedule_extension(z0, extra):
    F = parse_family("z^n ; index n=1..256\nsin(n*z) ; index n=1..256")
    short = IndexSchedule({"n": tuple(range(1, 9))})
    longer = IndexSchedule({"n": tuple(range(1, 9 + extra))})
    params = MartyParams(probe_radius=0.01, tail_start=4)
    scores = []
    for s in (short, longer):
        ms = enumerate_members(F, s)
        field = score_points(ms, tail_mask(ms, s, params.tail_fraction, params.tail_start), np.array([z0]), params)
        scores.append(field.score[0])
    assert scores[1] >= scores[0]


def test_labels_deterministic():
    F = parse_family("n*(z-a) ; index n=1..64 ; param a in disk(0,1,3,4)")
    s = IndexSchedule.geometric(F)
    a = classify_point(F, s, 0.3 + 0.9j, P)
    b = classify_point(F, s, 0.3 + 0.9j, P)
    assert a == b


def test_skipped_members_make_point_undetermined():
    F = parse_family("1/(z-n) ; index n=1..4")
    p = MartyParams(probe_radius=1e-3, probe_count=1)
    # the only tail member has a pole at the centre: more than half the tail is skipped
    res = classify_point(F, IndexSchedule({"n": (2,)}), 2.0, p)
    assert res.label is Label.UNDETERMINED
    # one of two tail members skipped is not a majority
    res = classify_point(F, IndexSchedule({"n": (2, 4)}), 2.0, p)
    assert res.label is not Label.UNDETERMINED
