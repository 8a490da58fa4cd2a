import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from lmpcast import build_mpp, enumerate_regions, make_snapshot, random_case, three_bus
from lmpcast.forecast import (ForecastDistribution, ForecastEntry, forecast_lmp_density_quadratic,
                              forecast_regions, forecast_with_contingencies, mix_forecasts,
                              point_mass)
from lmpcast.network import apply_contingency
from lmpcast.stochastic import ConditionalLaw

BOUNDS = {(10.0, 10.0, 10.0): (0, 130), (15.0, 15.0, 15.0): (130, 170),
          (10.0, 20.0, 15.0): (170, 200)}


def closed_form(mean, sd):
    return {lab: norm.cdf(hi, mean, sd) - norm.cdf(lo, mean, sd)
            for lab, (lo, hi) in BOUNDS.items()}


def law1(mean, var, T=1):
    return ConditionalLaw(np.array([mean]), np.array([[var]]), T)


@pytest.mark.parametrize("method", ["is", "mc"])
@pytest.mark.parametrize("mean,var", [(150.0, 100.0), (128.0, 25.0), (185.0, 9.0)])
def test_region_mass_matches_gaussian_intervals(tri_store, method, mean, var):
    dist = forecast_regions(tri_store, law1(mean, var), 20000, seed=1, method=method)
    got = dist.outcome_probabilities("lmp")
    for lab, p in closed_form(mean, np.sqrt(var)).items():
        assert got[lab] == pytest.approx(p, abs=0.01)
    for e in dist.entries:
        assert e.std_error >= 0


def test_is_tail_region_stable(tri_store):
    """A region far in the tail still gets a small, finite estimate."""
    dist = forecast_regions(tri_store, law1(60.0, 100.0), 5000, seed=0)
    p = dist.outcome_probabilities("lmp")[(10.0, 20.0, 15.0)]
    assert 0.0 <= p < 1e-6


def test_mass_accounting(tri_store):
    dist = forecast_regions(tri_store, law1(195.0, 100.0), 5000, seed=2)
    assert dist.total_mass <= 1.0 + 1e-12
    assert dist.uncovered_mc > 0.2
    assert dist.eps_mass == pytest.approx(1.0 - dist.total_mass)
    boxed = forecast_regions(tri_store, law1(195.0, 100.0), 5000, seed=2, clip_to_box=True)
    assert boxed.uncovered_mc == 0.0
    assert boxed.total_mass == pytest.approx(1.0, abs=0.02)


def test_seeded_forecast_reproducible(tri_store):
    a = forecast_regions(tri_store, law1(150.0, 100.0), 3000, seed=5)
    b = forecast_regions(tri_store, law1(150.0, 100.0), 3000, seed=5)
    assert a.to_json() == b.to_json()


def test_degenerate_law_falls_back_to_mc(tri_store):
    dist = forecast_regions(tri_store, law1(150.0, 0.0, T=0), 100, seed=0)
    assert dist.metadata["method"] == "mc"
    assert dist.outcome_probabilities("lmp")[(15.0, 15.0, 15.0)] == 1.0


def test_bad_inputs(tri_store):
    with pytest.raises(ValueError):
        forecast_regions(tri_store, ConditionalLaw(np.zeros(2), np.eye(2), 1))
    with pytest.raises(ValueError):
        forecast_regions(tri_store, law1(150.0, 1.0), 0)
    with pytest.raises(ValueError):
        forecast_regions(tri_store, law1(150.0, 1.0), 10, method="bogus")


def test_point_mass(tri_store):
    dist = point_mass(tri_store, [180.0])
    probs = dist.outcome_probabilities("lmp")
    assert probs[(10.0, 20.0, 15.0)] == 1.0
    assert dist.total_mass == 1.0


def test_duplicate_entries_rejected():
    e = ForecastEntry(0, 1, 0.5, 0.0)
    with pytest.raises(ValueError):
        ForecastDistribution([e, e], 1)


@pytest.fixture(scope="module")
def outage_stores():
    case = three_bus(outage_probability=0.1)
    cm = case.contingencies
    stores = {k: enumerate_regions(build_mpp(make_snapshot(apply_contingency(case, cm, k))),
                                   config=k)
              for k in range(cm.n_configs)}
    return cm, stores


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 0.5))
def test_mixture_is_weighted_sum(outage_stores, p1):
    _, stores = outage_stores
    law = law1(160.0, 50.0)
    parts = {k: forecast_regions(s, law, 500, seed=k, config=k) for k, s in stores.items()}
    probs = np.array([1 - p1, p1])
    mix = mix_forecasts(parts, probs)
    for k, dist in parts.items():
        for e in dist.entries:
            assert mix.entry(k, e.region).probability == probs[k] * e.probability
    assert mix.total_mass == pytest.approx(sum(probs[k] * d.total_mass for k, d in parts.items()))


def test_observed_configuration_short_circuits(outage_stores):
    cm, stores = outage_stores
    law = law1(160.0, 50.0)
    obs = forecast_with_contingencies(stores, cm, law, observed=1, n_samples=5000)
    assert {e.config for e in obs.entries} == {1}
    assert obs.total_mass == pytest.approx(1.0, abs=0.02)
    with pytest.raises(ValueError):
        forecast_with_contingencies(stores, cm, law, observed=5)
    full = forecast_with_contingencies(stores, cm, law, n_samples=500)
    assert {e.config for e in full.entries} == {0, 1}


def test_quadratic_price_mixture():
    snap = make_snapshot(random_case(1, n_buses=5, n_params=3, quadratic=True))
    p = build_mpp(snap)
    store = enumerate_regions(p, seed=1)
    mid = 0.5 * (p.box_lo + p.box_hi)
    law = ConditionalLaw(mid, np.diag(((p.box_hi - p.box_lo) / 8) ** 2), 1)
    mix = forecast_lmp_density_quadratic(store, law, 20000, seed=0, clip_to_box=True)
    assert all(e.component_mean is not None for e in mix.distribution.entries)
    draws = mix.sample(20000, seed=3, store=store, law=law)
    draws = draws[np.isfinite(draws[:, 0])]
    xs = np.quantile(draws[:, 0], [0.1, 0.5, 0.9])
    np.testing.assert_allclose(mix.marginal_cdf(0, xs), [0.1, 0.5, 0.9], atol=0.03)
    dens = mix.marginal_pdf(0, np.linspace(draws[:, 0].min() - 1, draws[:, 0].max() + 1, 20))
    assert np.all(dens >= 0)


def test_quadratic_mixture_needs_affine_store(tri_store):
    with pytest.raises(ValueError):
        forecast_lmp_density_quadratic(tri_store, law1(150.0, 1.0), 10)
