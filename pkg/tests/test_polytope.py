import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lmpcast.errors import EmptyRegionError
from lmpcast.polytope import (Polytope, chebyshev_center, facet_center, interior_radius,
                              normalize_rows, reduce_halfspaces, region_anchor, vertices,
                              vertices_bruteforce)


def box(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    k = lo.size
    return Polytope(np.vstack([np.eye(k), -np.eye(k)]), np.concatenate([hi, -lo]))


def test_chebyshev_center_of_box():
    poly = box([0, 0], [4, 2])
    c, r = chebyshev_center(*normalize_rows(poly.C, poly.e)[:2])
    assert r == pytest.approx(1.0)
    assert c[1] == pytest.approx(1.0)


def test_reduce_drops_redundant_rows():
    poly = box([0, 0], [1, 1])
    C = np.vstack([poly.C, [[1.0, 1.0]], [[2.0, 0.0]]])
    e = np.concatenate([poly.e, [5.0], [2.0]])
    red = reduce_halfspaces(Polytope(C, e))
    assert red.minimal and not red.empty
    assert red.C.shape[0] == 4


def test_reduce_flags_empty():
    C = np.array([[1.0], [-1.0]])
    e = np.array([0.0, -1.0])
    assert reduce_halfspaces(Polytope(C, e)).empty


def test_zero_row_with_negative_offset_is_infeasible():
    _, _, bad = normalize_rows(np.array([[0.0, 0.0]]), np.array([-1.0]))
    assert bad


def test_anchor_is_vertex_mean():
    pt, fallback = region_anchor(box([0, 0], [2, 4]))
    assert not fallback
    np.testing.assert_allclose(pt, [1, 2], atol=1e-9)


def test_anchor_fallback_above_budget():
    pt, fallback = region_anchor(box(np.zeros(3), np.ones(3)), dim_budget=2)
    assert fallback
    np.testing.assert_allclose(pt, 0.5, atol=1e-9)


def test_anchor_empty_raises():
    with pytest.raises(EmptyRegionError):
        region_anchor(Polytope(np.array([[1.0], [-1.0]]), np.array([0.0, -1.0])))


def test_facet_center_on_box_face():
    poly = box([0, 0], [2, 2])
    c, r = facet_center(poly, 0, radius_cap=10.0)
    np.testing.assert_allclose(c, [2, 1], atol=1e-9)
    assert r == pytest.approx(1.0)


def test_flat_polytope_has_zero_radius():
    C = np.array([[1.0, 0], [-1.0, 0], [0, 1.0], [0, -1.0]])
    e = np.array([1.0, -1.0, 1.0, 0.0])
    assert interior_radius(Polytope(C, e)) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_vertices_agree_with_bruteforce(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 4))
    C = rng.normal(size=(6, k))
    e = rng.uniform(0.5, 2.0, 6)
    poly = Polytope(np.vstack([C, np.eye(k), -np.eye(k)]),
                    np.concatenate([e, np.full(2 * k, 3.0)]))
    a = vertices(poly)
    b = vertices_bruteforce(poly)
    assert len(a) == len(b)
    key = lambda v: tuple(np.round(v, 6))
    assert sorted(map(key, a)) == sorted(map(key, b))
    assert poly.contains_many(a, 1e-7).all()
