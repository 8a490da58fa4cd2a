"""End-to-end acceptance criteria, one test each.

Every test prints a single ``CRITERION n: PASS|FAIL`` line (also gathered in
the terminal summary) and then asserts, so a failure is reported honestly.
"""
import time

import numpy as np
from scipy.stats import norm

from lmpcast import (build_mpp, enumerate_regions, make_snapshot, random_case, three_bus,
                     wind_case)
from lmpcast.dcrg import dcrg_simulate, direct_simulate
from lmpcast.errors import InfeasibleError
from lmpcast.evaluation import brier_score, reliability_diagram, run_trajectory_experiment
from lmpcast.forecast import _config_seed, forecast_regions, forecast_with_contingencies
from lmpcast.network import apply_contingency
from lmpcast.opf import extract_lmp, solve_mpp
from lmpcast.stochastic import ConditionalLaw, ScenarioModel, conditional_law, sample_paths
from oracles import highs_dispatch, interior_points, shared_facet_points

RESULTS: list[str] = []


def report(n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS.append(line)
    print(line)


def ramp_model(kind="rw", sigma=1.0, phi=None):
    return ScenarioModel(kind, 110.0 + 2.0 * np.arange(41), sigma, phi=phi)


def interval(region):
    C, e = region.poly.C[:, 0], region.poly.e
    return -e[C < 0].max(), e[C > 0].min()


def test_criterion_1_table1():
    start = time.perf_counter()
    p = build_mpp(make_snapshot(three_bus()))
    store = enumerate_regions(p)
    elapsed = time.perf_counter() - start
    table = {(10.0, 10.0, 10.0): (0, 0, 0), (15.0, 15.0, 15.0): (0, 0, 0),
             (10.0, 20.0, 15.0): (1, 0, 0)}
    got = {tuple(np.round(r.lmp, 9)): tuple(r.congestion) for r in store}
    edges = sorted({round(float(x), 9) for r in store for x in interval(r)})
    # brute-force sweep: price changes between consecutive 0.1 MW grid points
    snap = make_snapshot(three_bus())
    grid = np.round(np.arange(0.1, 200.0, 0.1), 10)
    prices = np.array([highs_dispatch(snap, [d])[2] for d in grid])
    jumps = np.flatnonzero(np.abs(np.diff(prices, axis=0)).max(axis=1) > 1e-6)
    sweep = [float(0.5 * (grid[j] + grid[j + 1])) for j in jumps]
    inner = edges[1:-1]
    bounds_ok = len(sweep) == len(inner) and all(abs(a - b) <= 0.1 for a, b in zip(sweep, inner))
    ok = len(store) == 3 and got == table and bounds_ok and elapsed < 5
    report(1, ok, f"{len(store)} regions, boundaries {inner} vs sweep "
                  f"{[round(x, 2) for x in sweep]}, enumerate {elapsed:.2f} s")
    assert ok


def test_criterion_2_oracle_equivalence():
    start = time.perf_counter()
    worst, checked = 0.0, 0
    for seed in range(3):
        snap = make_snapshot(random_case(seed, n_buses=5, n_params=3))
        p = build_mpp(snap)
        store = enumerate_regions(p, seed=seed)
        rng = np.random.default_rng(100 + seed)
        feasible = 0
        while feasible < 1000:
            theta = rng.uniform(p.box_lo, p.box_hi)
            try:
                sol = solve_mpp(p, theta)
            except InfeasibleError:
                continue
            feasible += 1
            strict = store.membership(theta[None, :], tol=-1e-6)[0]
            if strict.sum() != 1:
                continue              # boundary sample
            region = store.get(int(np.flatnonzero(strict)[0]) + 1)
            worst = max(worst, np.abs(region.price_at(theta) - extract_lmp(sol, snap.S)).max())
            checked += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and checked >= 2900 and elapsed < 120
    report(2, ok, f"{checked} interior samples, max |dLMP| {worst:.2e}, {elapsed:.1f} s")
    assert ok


def test_criterion_3_dcrg():
    start = time.perf_counter()
    p = build_mpp(make_snapshot(wind_case()))
    assert p.n_params == 12
    thetas = np.random.default_rng(2024).normal(20.0, 8.0, size=(10_000, 12))
    fast = dcrg_simulate(p, thetas)
    slow = direct_simulate(p, thetas)
    elapsed = time.perf_counter() - start
    same = np.array_equal(fast.lmp, slow.lmp, equal_nan=True)
    st = fast.cache.stats()
    counts = np.sort(np.bincount(fast.region_ids)[1:])[::-1]
    top3 = counts[:3].sum() / max(1, counts.sum())
    ok = (same and st["opf_solves"] == st["distinct_regions"]
          and st["opf_solves"] <= 0.01 * len(thetas) and elapsed < 600)
    report(3, ok, f"identical={same}, solves {st['opf_solves']} = regions "
                  f"{st['distinct_regions']}, ratio {st['opf_solves'] / len(thetas):.4f}, "
                  f"top-3 mass {top3:.3f}, {elapsed:.1f} s")
    assert ok


def test_criterion_4_brier():
    start = time.perf_counter()
    extremes = brier_score([[1, 0, 0]], [0]) == 0.0 and brier_score([[0, 0, 1]], [0]) == 2.0
    store = enumerate_regions(build_mpp(make_snapshot(three_bus())))
    rep = run_trajectory_experiment({0: store}, ramp_model(), horizon=3, n_reps=200, seed=0)
    elapsed = time.perf_counter() - start
    mb = rep.mean_brier()
    peaks = rep.peak_times("AlgP", 2, separation=5)
    near = all(any(abs(pk - want) <= 2 for pk in peaks) for want in (10, 30))
    ok = (extremes and mb["AlgP"] < mb["AlgD"] and mb["AlgP"] <= mb["AlgC"] and near
          and elapsed < 600)
    report(4, ok, f"BS P {mb['AlgP']:.4f} C {mb['AlgC']:.4f} D {mb['AlgD']:.4f}, "
                  f"peaks {peaks}, {elapsed:.1f} s")
    assert ok


def test_criterion_5_importance_sampling():
    start = time.perf_counter()
    store = enumerate_regions(build_mpp(make_snapshot(three_bus())))
    law = ConditionalLaw(np.array([150.0]), np.array([[100.0]]), 1)
    is_ = forecast_regions(store, law, 100_000, seed=1, method="is")
    mc = forecast_regions(store, law, 100_000, seed=2, method="mc")
    worst_cf = worst_z = 0.0
    for r in store:
        lo, hi = interval(r)
        exact = norm.cdf(hi, 150, 10) - norm.cdf(lo, 150, 10)
        a, b = is_.entry(0, r.id), mc.entry(0, r.id)
        worst_cf = max(worst_cf, abs(a.probability - exact))
        se = np.hypot(a.std_error, b.std_error)
        worst_z = max(worst_z, abs(a.probability - b.probability) / se)
    elapsed = time.perf_counter() - start
    ok = worst_cf <= 1e-3 and worst_z <= 3 and elapsed < 60
    report(5, ok, f"max |f - closed form| {worst_cf:.2e}, max IS-MC z {worst_z:.2f}, "
                  f"{elapsed:.1f} s")
    assert ok


def _moment_z(x, law):
    n = x.shape[0]
    z_mean = np.abs(x.mean(axis=0) - law.mean) / np.sqrt(np.diag(law.cov) / n)
    d = np.diag(law.cov)
    cov_se = np.sqrt((np.outer(d, d) + law.cov ** 2) / n)
    z_cov = np.abs(np.cov(x.T) - law.cov) / cov_se
    return max(z_mean.max(), z_cov.max())


def test_criterion_6_conditional_moments():
    start = time.perf_counter()
    sig = np.array([[1.0, 0.3], [0.3, 0.5]])
    traj = np.column_stack([110.0 + 2.0 * np.arange(21), 40.0 - np.arange(21.0)])
    worst = {}
    for kind, phi in (("rw", None), ("ar1", [0.9, 0.6])):
        m = ScenarioModel(kind, traj, sig, phi=phi)
        theta0 = traj[0] + np.array([5.0, -3.0])
        paths = sample_paths(m, 100_000, seed=11, theta0=theta0)
        worst[kind] = max(_moment_z(paths[:, T], conditional_law(m, theta0, 0, T))
                          for T in (1, 4, 10))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 3 and elapsed < 60
    report(6, ok, f"max z random walk {worst['rw']:.2f}, AR1 {worst['ar1']:.2f}, "
                  f"{elapsed:.1f} s")
    assert ok


def test_criterion_7_quadratic_affinity():
    start = time.perf_counter()
    snap = make_snapshot(random_case(1, n_buses=5, n_params=3, quadratic=True))
    p = build_mpp(snap)
    store = enumerate_regions(p, seed=1)
    rng = np.random.default_rng(7)
    worst_price = 0.0
    for r in store:
        for theta in interior_points(r.poly, 20, rng):
            direct = extract_lmp(solve_mpp(p, theta), snap.S)
            worst_price = max(worst_price, np.abs(r.U @ theta + r.v - direct).max())
    pts = shared_facet_points(store, p, rng, 100)
    worst_x = max(np.abs(a.optimizer_at(q) - b.optimizer_at(q)).max() for a, b, q in pts)
    elapsed = time.perf_counter() - start
    ok = len(store) >= 2 and worst_price <= 1e-6 and worst_x <= 1e-6 and elapsed < 120
    report(7, ok, f"{len(store)} regions, max |dLMP| {worst_price:.2e}, "
                  f"facet gap {worst_x:.2e} over {len(pts)} points, {elapsed:.1f} s")
    assert ok


def test_criterion_8_contingency_mixture():
    start = time.perf_counter()
    law = ConditionalLaw(np.array([165.0]), np.array([[40.0]]), 3)
    mean_bs, worst = {}, 0.0
    for p_out in (0.01, 0.1):
        case = three_bus(outage_probability=p_out)
        cm = case.contingencies
        stores = {k: enumerate_regions(build_mpp(make_snapshot(apply_contingency(case, cm, k))),
                                       config=k)
                  for k in range(cm.n_configs)}
        mix = forecast_with_contingencies(stores, cm, law, n_samples=5000, seed=3)
        for k, pk in enumerate(cm.probabilities):
            part = forecast_regions(stores[k], law, 5000, _config_seed(3, k), config=k)
            for e in part.entries:
                worst = max(worst, abs(mix.entry(k, e.region).probability - pk * e.probability))
        rep = run_trajectory_experiment(stores, ramp_model(), horizon=3, n_reps=100, seed=0,
                                        contingencies=cm)
        mean_bs[p_out] = rep.mean_brier()["AlgP"]
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and mean_bs[0.01] < mean_bs[0.1] and elapsed < 300
    report(8, ok, f"mixture gap {worst:.1e}, BS p=0.01 {mean_bs[0.01]:.4f} < "
                  f"p=0.1 {mean_bs[0.1]:.4f}, {elapsed:.1f} s")
    assert ok


def test_criterion_9_reliability():
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    probs = rng.uniform(0, 1, 100_000)
    outcomes = rng.uniform(0, 1, probs.size) < probs
    tab = reliability_diagram(probs, outcomes, n_bins=10)
    occ = tab.occupied
    gap_center = np.abs(tab.observed[occ] - tab.centers[occ]).max()
    gap_mean = np.abs(tab.observed[occ] - tab.mean_forecast[occ]).max()
    elapsed = time.perf_counter() - start
    ok = max(gap_center, gap_mean) < 0.02 and tab.counts.sum() == probs.size and elapsed < 60
    report(9, ok, f"max gap to diagonal {gap_mean:.4f} (to bin center {gap_center:.4f}), "
                  f"{elapsed:.2f} s")
    assert ok
