import numpy as np
import pytest

from lmpcast import build_mpp, make_snapshot, random_case, wind_case
from lmpcast.dcrg import DcrgCache, dcrg_simulate, direct_simulate


def _stream(p, n, seed, spread=4.0):
    rng = np.random.default_rng(seed)
    mid = 0.5 * (p.box_lo + p.box_hi)
    return mid + rng.normal(scale=(p.box_hi - p.box_lo) / spread, size=(n, p.n_params))


def test_three_bus_stream(tri_mpp):
    thetas = np.linspace(0, 220, 221)[:, None]
    fast = dcrg_simulate(tri_mpp, thetas)
    slow = direct_simulate(tri_mpp, thetas)
    np.testing.assert_array_equal(fast.lmp, slow.lmp)
    np.testing.assert_array_equal(fast.congestion, slow.congestion)
    st = fast.cache.stats()
    assert st["distinct_regions"] == 3
    assert st["opf_solves"] == 3
    assert st["infeasible"] == slow.cache.infeasible
    assert st["cache_hits"] + st["opf_solves"] + st["infeasible"] == st["samples"]


@pytest.mark.parametrize("quadratic", [False, True])
def test_random_case_stream_identical(quadratic):
    p = build_mpp(make_snapshot(random_case(4, n_buses=5, n_params=3, quadratic=quadratic)))
    thetas = _stream(p, 1500, 0)
    fast = dcrg_simulate(p, thetas)
    slow = direct_simulate(p, thetas)
    np.testing.assert_array_equal(np.isnan(fast.lmp), np.isnan(slow.lmp))
    ok = ~np.isnan(slow.lmp[:, 0])
    np.testing.assert_array_equal(fast.lmp[ok], slow.lmp[ok])
    assert fast.cache.solves == fast.cache.distinct_regions
    assert fast.cache.redundant_solves == 0


def test_cache_reuse_across_calls(tri_mpp):
    cache = DcrgCache(tri_mpp)
    dcrg_simulate(tri_mpp, [[100.0], [150.0]], cache)
    dcrg_simulate(tri_mpp, [[110.0], [160.0]], cache)
    assert cache.solves == 2 and cache.hits == 2


def test_cache_bound_to_problem(tri_mpp):
    other = build_mpp(make_snapshot(random_case(0, n_buses=4, n_params=1)))
    with pytest.raises(ValueError):
        dcrg_simulate(other, [[1.0]], DcrgCache(tri_mpp))


@pytest.mark.slow
def test_wind_case_concentration():
    p = build_mpp(make_snapshot(wind_case()))
    rng = np.random.default_rng(1)
    thetas = rng.normal(20.0, 8.0, size=(3000, p.n_params))
    res = dcrg_simulate(p, thetas)
    counts = np.bincount(res.region_ids[res.region_ids > 0])
    top = np.sort(counts)[::-1]
    assert res.cache.solves <= 0.01 * len(thetas)
    assert top[:3].sum() >= 0.99 * (res.region_ids > 0).sum()
