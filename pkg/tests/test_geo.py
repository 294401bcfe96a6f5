import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from blindtrace.errors import EncodingError, ParameterError
from blindtrace.field import DEFAULT_FIELD, Field
from blindtrace.geo import (
    Cell,
    GeoPoint,
    GridConfig,
    ProximityThreshold,
    decode_cell,
    ellipsoid_distance_m,
    encode_cell,
    expand,
    expand_point,
    latitude_from_arc,
    meridian_arc_km,
    quantize,
    row_longitude_scale,
    scaling_constants,
    time_slot,
)
from oracles import covered, offset_point, random_pairs


def test_scaling_constants_equator_and_pole():
    c_lat, c_lon = scaling_constants(0)
    assert c_lat == pytest.approx(110.56724, abs=1e-5)
    assert c_lon == pytest.approx(111.32070, abs=1e-5)
    c_lat, c_lon = scaling_constants(90)
    assert c_lat == pytest.approx(111.69934, abs=1e-5)
    assert abs(c_lon) <= 1e-9


def test_scaling_constants_range():
    with pytest.raises(ParameterError):
        scaling_constants(90.5)


@given(st.floats(-85, 85))
def test_meridian_arc_inverts(lat):
    assert latitude_from_arc(meridian_arc_km(lat)) == pytest.approx(lat, abs=1e-10)


def test_meridian_arc_derivative_is_c_lat():
    for lat in (0.0, 30.0, 60.0):
        h = 1e-4
        slope = (meridian_arc_km(lat + h) - meridian_arc_km(lat - h)) / (2 * h)
        assert slope == pytest.approx(scaling_constants(lat)[0], rel=1e-8)


def test_quantize_vectors():
    assert quantize(GeoPoint(0.0001, 0.0, 0.0)) == Cell(0, 1, 0)
    assert quantize(GeoPoint(0.0, 0.0, 0.0)) == Cell(0, 0, 0)
    assert quantize(GeoPoint(-0.00001, -0.00001, 0.0)) == Cell(-1, -1, 0)


def test_slot_boundaries():
    cfg = GridConfig(epoch=1000.0)
    assert time_slot(1000.0 + 1199, cfg) == 0
    assert time_slot(1000.0 + 1200, cfg) == 1
    with pytest.raises(ParameterError):
        time_slot(999.0, cfg)


def test_quantize_rejects_polar_and_bad_points():
    with pytest.raises(ParameterError):
        quantize(GeoPoint(86.0, 0.0))
    with pytest.raises(ParameterError):
        GeoPoint(91.0, 0.0)
    with pytest.raises(ParameterError):
        GeoPoint(0.0, 180.0)


def test_expand_canonical_order():
    cells = expand(Cell(0, 0, 5))
    assert len(cells) == 27 and len(set(cells)) == 27
    assert cells[0] == Cell(-1, -1, 4) and cells[-1] == Cell(1, 1, 6)
    assert cells[13] == Cell(0, 0, 5)
    degenerate = GridConfig(spatial_radius=0, window_slots=0)
    assert expand(Cell(3, 4, 5), degenerate) == [Cell(3, 4, 5)]


def test_expand_point_same_shape_as_expand():
    p = GeoPoint(47.3, 8.5, 3600.0)
    cells = expand_point(p)
    home = quantize(p)
    assert len(cells) == 27 and len(set(cells)) == 27
    assert cells[13] == home
    # the home row agrees with index-space expansion
    assert [c for c in cells if c.iy == home.iy] == [c for c in expand(home) if c.iy == home.iy]


def test_row_scale_never_narrower_than_true_width():
    for iy in (0, 5, 1_000_000, -1_000_000, -1):
        lo, hi = iy * 7.0, (iy + 1) * 7.0
        widest = max(abs(latitude_from_arc(lo / 1000)), abs(latitude_from_arc(hi / 1000)))
        assert row_longitude_scale(iy, 7.0) <= scaling_constants(widest)[1]


def test_encode_vectors():
    assert encode_cell(Cell(0, 0, 9)) == 2**23 + 2**23 * 2**24 == 140737496743936
    assert encode_cell(Cell(-(2**23), -(2**23), 0)) == 0
    with pytest.raises(EncodingError):
        encode_cell(Cell(2**23, 0, 0))
    with pytest.raises(EncodingError):
        encode_cell(Cell(0, 0, 0), Field(7))


def test_encode_injective_random():
    gen = np.random.default_rng(3)
    ix = gen.integers(-(2**23), 2**23, 100_000)
    iy = gen.integers(-(2**23), 2**23, 100_000)
    cells = set(zip(ix.tolist(), iy.tolist()))
    labels = {encode_cell(Cell(a, b, 0), DEFAULT_FIELD) for a, b in cells}
    assert len(labels) == len(cells)


@given(st.integers(-(2**23), 2**23 - 1), st.integers(-(2**23), 2**23 - 1))
def test_decode_inverts_encode(ix, iy):
    assert decode_cell(encode_cell(Cell(ix, iy, 0)), 0) == Cell(ix, iy, 0)


def test_distance_vectors():
    a = GeoPoint(0.0, 0.0)
    assert ellipsoid_distance_m(a, a) == 0
    assert ellipsoid_distance_m(a, GeoPoint(0.0001, 0.0)) == pytest.approx(11.0567, abs=1e-3)
    assert ProximityThreshold(7.0).within(a, offset_point(a, 3, 4))
    assert not ProximityThreshold(7.0).within(a, offset_point(a, 30, 40))


def test_coverage_sample():
    gen = np.random.default_rng(11)
    assert all(covered(a, b) for a, b in random_pairs(gen, 10_000, 7.0))


def test_coverage_at_high_latitude():
    gen = np.random.default_rng(12)
    assert all(covered(a, b) for a, b in random_pairs(gen, 5_000, 7.0, max_lat=84.0))


def test_separation_sample():
    gen = np.random.default_rng(13)
    for a, _ in random_pairs(gen, 2_000, 0.0):
        theta = gen.uniform(0, 2 * math.pi)
        far = offset_point(a, 100 * math.sin(theta), 100 * math.cos(theta))
        assert quantize(far) not in expand_point(a)


@pytest.mark.parametrize("east", [0.0, 5.0, -5.0])
def test_receiver_near_equator_and_meridian(east):
    a = GeoPoint(0.00002, 0.00001, 0.0)
    assert covered(a, offset_point(a, east, 0.0))
