import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symabs.errors import NonFiniteError
from symabs.lattice import Quantizer


def test_spacing_formula():
    q = Quantizer(n=2, eta=0.18)
    assert q.spacing == pytest.approx(2 * 0.18 / np.sqrt(2))
    assert q.cell_half_width == pytest.approx(0.18 / np.sqrt(2))


def test_quantize_known_point():
    # spacing 2*0.18/sqrt(2) ~ 0.25456; (0.3, -0.1) rounds to k = (1, 0)
    q = Quantizer(n=2, eta=0.18)
    p = q.quantize(np.array([0.3, -0.1]))
    assert p.indices == (1, 0)
    assert p.coordinates[0] == pytest.approx(0.2545584412, abs=1e-9)
    assert p.coordinates[1] == 0.0
    assert np.linalg.norm(np.array([0.3, -0.1]) - p.coords) == pytest.approx(0.1098, abs=1e-4)
    assert np.linalg.norm(np.array([0.3, -0.1]) - p.coords) <= 0.18


def test_idempotent_on_lattice_points():
    q = Quantizer(n=3, eta=0.4)
    p = q.point_from_indices((2, -5, 7))
    assert q.quantize(p.coords) == p


def test_tie_rounds_half_away_from_zero():
    q = Quantizer(n=1, eta=0.5)  # spacing 1.0
    assert q.quantize(np.array([0.5])).indices == (1,)
    assert q.quantize(np.array([-0.5])).indices == (-1,)
    assert q.quantize(np.array([1.5])).indices == (2,)
    assert q.quantize(np.array([0.49999999])).indices == (0,)


def test_quantize_rejects_nonfinite():
    q = Quantizer(n=2, eta=0.1)
    with pytest.raises(NonFiniteError):
        q.quantize(np.array([np.nan, 0.0]))


def test_coordinates_reconstructible_from_indices():
    q = Quantizer(n=2, eta=0.3)
    p = q.point_from_indices((123, -456))
    assert np.allclose(p.coords, np.array([123, -456]) * q.spacing, rtol=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    st.integers(min_value=1, max_value=3),
    st.floats(min_value=0.01, max_value=2.0, allow_nan=False),
    st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=3, max_size=3),
)
def test_quantization_error_bounds(n, eta, xs):
    q = Quantizer(n=n, eta=eta)
    x = np.array(xs[:n])
    p = q.quantize(x)
    assert np.all(np.abs(x - p.coords) <= eta / np.sqrt(n) + 1e-12)
    assert np.linalg.norm(x - p.coords) <= eta + 1e-12


@settings(max_examples=100, deadline=None)
@given(
    st.floats(min_value=0.05, max_value=1.0, allow_nan=False),
    st.lists(st.floats(min_value=-8, max_value=8, allow_nan=False), min_size=2, max_size=2),
)
def test_quantize_idempotent(eta, xs):
    q = Quantizer(n=2, eta=eta)
    p = q.quantize(np.array(xs))
    assert q.quantize(p.coords) == p


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(min_value=-5, max_value=5, allow_nan=False), min_size=2, max_size=2),
    st.integers(min_value=0, max_value=1),
)
def test_translation_by_one_spacing_shifts_one_index(xs, axis):
    q = Quantizer(n=2, eta=0.25)
    x = np.array(xs)
    base = q.indices_of(x)
    shifted = x.copy()
    shifted[axis] += q.spacing
    moved = q.indices_of(shifted)
    expect = base.copy()
    expect[axis] += 1
    assert np.array_equal(moved, expect)


class TestCellGeometry:
    def test_origin_cell(self):
        q = Quantizer(n=2, eta=0.18)
        cell = q.cell_of(q.point_from_indices((0, 0)))
        h = 0.18 / np.sqrt(2)
        assert cell.lo == pytest.approx((-h, -h))
        assert cell.hi == pytest.approx((h, h))
        assert h == pytest.approx(0.1273, abs=1e-4)

    def test_center_roundtrip(self):
        q = Quantizer(n=2, eta=0.3)
        p = q.point_from_indices((4, -2))
        assert q.quantize(q.cell_of(p).center) == p

    def test_adjacent_cells_share_a_face(self):
        q = Quantizer(n=2, eta=0.3)
        a = q.cell_of(q.point_from_indices((0, 0)))
        b = q.cell_of(q.point_from_indices((1, 0)))
        assert a.hi[0] == pytest.approx(b.lo[0])
        assert a.lo[1] == b.lo[1] and a.hi[1] == b.hi[1]


class TestNeighbors:
    def test_planar_origin(self):
        q = Quantizer(n=2, eta=0.1)
        ks = [p.indices for p in q.neighbors(q.point_from_indices((0, 0)))]
        assert ks == [(-1, 0), (1, 0), (0, -1), (0, 1)]

    def test_line(self):
        q = Quantizer(n=1, eta=0.1)
        assert len(q.neighbors(q.point_from_indices((5,)))) == 2

    def test_symmetric_relation(self):
        q = Quantizer(n=3, eta=0.2)
        p = q.point_from_indices((1, 2, 3))
        for nb in q.neighbors(p):
            assert p in q.neighbors(nb)
