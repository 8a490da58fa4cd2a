"""Command-line entry point.

Every command reads a JSON case (and scenario where needed), runs
single-threaded by default, and writes JSON/CSV outputs atomically; if a
command fails, files it already wrote are removed. Exit codes: 0 success,
1 usage or input error, 2 infeasible or empty result, 3 numerical failure.
"""
from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from .dcrg import DcrgCache, dcrg_simulate, direct_simulate
from .errors import LmpcastError
from .evaluation import run_trajectory_experiment, summarize_marginals
from .explore import enumerate_regions
from .forecast import (ForecastDistribution, ForecastEntry, forecast_regions, mix_forecasts,
                       point_mass, _config_seed)
from .mpp import build_mpp
from .network import GridCase, apply_contingency, load_case, snapshot_at
from .opf import extract_congestion, extract_lmp, solve_dcopf
from .regions import RegionStore
from .stochastic import ScenarioModel, conditional_law, load_scenario

_written: list[Path] = []


def _write(path: str | Path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
    _written.append(path)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _read_case(path: str) -> GridCase:
    return load_case(Path(path).read_text())


def _read_scenario(path: str, case: GridCase) -> ScenarioModel:
    model = load_scenario(Path(path).read_text())
    if model.dim != case.n_parameters:
        raise click.BadParameter(
            f"scenario has dimension {model.dim}, case has {case.n_parameters} parameters")
    return model


def _parse_theta(text: str | None, default) -> np.ndarray:
    if text is None:
        return np.asarray(default, dtype=float)
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise click.BadParameter(f"cannot parse parameter vector {text!r}") from exc


def _configs(case: GridCase, use_contingencies: bool) -> dict[int, GridCase]:
    if not use_contingencies:
        return {0: case}
    model = case.contingencies
    return {k: apply_contingency(case, model, k) for k in range(model.n_configs)}


def _problem(case: GridCase, t: int):
    return build_mpp(snapshot_at(case, case.schedule, t))


def _enumerate_all(configs: dict[int, GridCase], t: int, seed: int, workers: int,
                   max_regions: int) -> dict[int, RegionStore]:
    def job(k):
        return k, enumerate_regions(_problem(configs[k], t), max_regions=max_regions,
                                    seed=seed, config=k)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return dict(pool.map(job, sorted(configs)))
    return dict(job(k) for k in sorted(configs))


common_case = click.option("--case", "case_path", required=True,
                           type=click.Path(exists=True, dir_okay=False), help="Case JSON.")
common_out = click.option("--out", required=True, type=click.Path(),
                          help="Output file (or directory for evaluate).")
common_seed = click.option("--seed", default=0, show_default=True, type=int)
common_workers = click.option("--workers", default=1, show_default=True,
                              type=click.IntRange(min=1))


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose: bool):
    """Probabilistic forecasting of locational marginal prices."""
    if verbose:
        import logging
        logging.basicConfig(level=logging.INFO, stream=sys.stderr)


@cli.command("solve-opf")
@common_case
@click.option("--theta", help="Comma-separated parameters (default: nominal values).")
@click.option("--time", "t", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--observed-config", "config", default=0, show_default=True,
              type=click.IntRange(min=0), help="Configuration index to dispatch.")
@common_out
def solve_opf_cmd(case_path, theta, t, config, out):
    """One dispatch with LMPs and the congestion pattern."""
    case = _read_case(case_path)
    if config:
        case = apply_contingency(case, case.contingencies, config)
    snap = snapshot_at(case, case.schedule, t)
    th = _parse_theta(theta, case.nominal_parameters())
    sol = solve_dcopf(snap, th)
    lmp = extract_lmp(sol, snap.S)
    _write(out, _dump({
        "case": case.name, "time": t, "config": config, "theta": th.tolist(),
        "dispatch": sol.g.tolist(), "objective": sol.objective, "lambda": sol.lam,
        "mu_plus": sol.mu_plus.tolist(), "mu_minus": sol.mu_minus.tolist(),
        "lmp": lmp.tolist(), "congestion": list(extract_congestion(sol, snap)),
        "active_set": list(sol.active_set), "basis": list(sol.basis),
    }))


@cli.command("enumerate")
@common_case
@click.option("--time", "t", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--observed-config", "config", default=0, show_default=True,
              type=click.IntRange(min=0), help="Configuration index to enumerate.")
@click.option("--max-regions", default=10_000, show_default=True, type=click.IntRange(min=1))
@common_seed
@common_out
def enumerate_cmd(case_path, t, config, max_regions, seed, out):
    """Offline critical-region partition of the parameter box."""
    case = _read_case(case_path)
    if config:
        case = apply_contingency(case, case.contingencies, config)
    store = enumerate_regions(_problem(case, t), max_regions=max_regions, seed=seed,
                              config=config)
    doc = store.to_dict()
    doc["metadata"] = {"case": case.name, "time": t, "seed": seed}
    _write(out, _dump(doc))
    click.echo(f"{len(store)} critical regions")


def _dcrg_forecast(p, law, n, seed, config, horizon, t) -> ForecastDistribution:
    rng = np.random.default_rng(seed)
    thetas = law.sample(rng, n)
    res = dcrg_simulate(p, thetas)
    counts = np.bincount(res.region_ids, minlength=len(res.cache.store) + 1)
    entries = []
    for r in res.cache.store:
        prob = counts[r.id] / n
        pa = (counts[r.id] + 0.5) / (n + 1.0)
        e = ForecastEntry(config, r.id, float(prob), float(np.sqrt(pa * (1 - pa) / n)),
                          r.congestion)
        if r.U is None:
            e.lmp = r.lmp
        else:
            e.U, e.v = r.U, r.v
            e.component_mean = r.U @ law.mean + r.v
            e.component_cov = r.U @ law.cov @ r.U.T
        entries.append(e)
    unexplained = counts[0] / n
    return ForecastDistribution(entries, horizon, t, float(unexplained), float(unexplained),
                                {"seed": seed, "n_samples": n, "method": "dcrg",
                                 "cache": res.cache.stats(), "provenance": "dcrg"})


@cli.command("forecast")
@common_case
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--horizon", "T", required=True, type=click.IntRange(min=0))
@click.option("--time", "t", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--theta", help="Observed parameters at the issue time (default: mean).")
@click.option("--samples", default=10_000, show_default=True, type=click.IntRange(min=1))
@common_seed
@click.option("--mode", type=click.Choice(["offline", "dcrg"]), default="offline",
              show_default=True)
@click.option("--contingencies/--no-contingencies", default=False, show_default=True)
@click.option("--observed-config", type=click.IntRange(min=0), default=None)
@click.option("--method", type=click.Choice(["is", "mc"]), default="is", show_default=True)
@common_workers
@common_out
def forecast_cmd(case_path, scenario_path, T, t, theta, samples, seed, mode, contingencies,
                 observed_config, method, workers, out):
    """Distribution of LMP and congestion at t+T."""
    case = _read_case(case_path)
    model = _read_scenario(scenario_path, case)
    th = _parse_theta(theta, model.mean(t))
    configs = _configs(case, contingencies or observed_config is not None)
    probs = case.contingencies.probabilities if len(configs) > 1 else np.array([1.0])
    if observed_config is not None:
        if observed_config not in configs:
            raise click.BadParameter(f"unknown configuration {observed_config}")
        wanted = [observed_config]
    else:
        wanted = [k for k in configs if probs[k] > 0]
    law = conditional_law(model, th, t, T)
    target = t + T

    def job(k):
        p = _problem(configs[k], target)
        kseed = _config_seed(seed, k)
        if mode == "dcrg":
            return k, _dcrg_forecast(p, law, samples, kseed, k, T, t)
        store = enumerate_regions(p, seed=seed, config=k)
        if T == 0:
            return k, point_mass(store, th, 0, t)
        return k, forecast_regions(store, law, samples, kseed, method=method, issue_time=t,
                                   config=k)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = dict(pool.map(job, wanted))
    else:
        parts = dict(job(k) for k in wanted)
    if observed_config is not None:
        dist = parts[observed_config]
    elif len(parts) == 1 and len(configs) == 1:
        dist = parts[0]
    else:
        dist = mix_forecasts(parts, probs)
    dist.metadata.update({"case": case.name, "seed": seed, "n_samples": samples,
                          "issue_time": t, "horizon": T, "mode": mode,
                          "theta_t": th.tolist(), "observed_config": observed_config})
    dist.horizon, dist.issue_time = T, t
    _write(out, dist.to_json())


@cli.command("simulate-dcrg")
@common_case
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--horizon", "T", default=1, show_default=True, type=click.IntRange(min=0))
@click.option("--time", "t", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--theta", help="Observed parameters at the issue time (default: mean).")
@click.option("--samples", default=10_000, show_default=True, type=click.IntRange(min=1))
@common_seed
@click.option("--hist-bins", default=30, show_default=True, type=click.IntRange(min=1))
@common_out
def simulate_dcrg_cmd(case_path, scenario_path, T, t, theta, samples, seed, hist_bins, out):
    """LMP and congestion sample streams with cache statistics."""
    case = _read_case(case_path)
    model = _read_scenario(scenario_path, case)
    th = _parse_theta(theta, model.mean(t))
    law = conditional_law(model, th, t, T)
    p = _problem(case, t + T)
    thetas = law.sample(np.random.default_rng(seed), samples)
    res = dcrg_simulate(p, thetas)
    ok = np.isfinite(res.lmp[:, 0])
    marg = summarize_marginals(res.lmp[ok], hist_bins) if ok.sum() >= 2 else []
    _write(out, _dump({
        "metadata": {"case": case.name, "seed": seed, "n_samples": samples, "horizon": T,
                     "issue_time": t, "theta_t": th.tolist()},
        "cache": res.cache.stats(),
        "lmp": [None if not f else row.tolist() for f, row in zip(ok, res.lmp)],
        "congestion": res.congestion.tolist(),
        "region_ids": res.region_ids.tolist(),
        "marginals": [{"mean": m.mean, "var": m.var, "counts": m.counts.tolist(),
                       "edges": m.edges.tolist()} for m in marg],
    }))
    click.echo(_dump(res.cache.stats()).strip())


@cli.command("evaluate")
@common_case
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--horizon", "T", required=True, type=click.IntRange(min=1))
@click.option("--samples", default=2000, show_default=True, type=click.IntRange(min=1))
@click.option("--reps", default=200, show_default=True, type=click.IntRange(min=1))
@click.option("--bins", default=10, show_default=True, type=click.IntRange(min=2))
@common_seed
@click.option("--contingencies/--no-contingencies", default=False, show_default=True)
@common_workers
@common_out
def evaluate_cmd(case_path, scenario_path, T, samples, reps, bins, seed, contingencies,
                 workers, out):
    """Brier scores of Alg-P, Alg-D and Alg-C plus a reliability table.

    Writes report.json, brier.csv and reliability.csv into the --out directory.
    """
    case = _read_case(case_path)
    model = _read_scenario(scenario_path, case)
    configs = _configs(case, contingencies)
    stores = _enumerate_all(configs, 0, seed, workers, 10_000)
    report = run_trajectory_experiment(
        stores, model, T, reps, seed, n_samples=samples, n_bins=bins,
        contingencies=case.contingencies if contingencies else None)
    report.metadata["case"] = case.name
    out = Path(out)
    _write(out / "report.json", report.to_json())
    _write(out / "brier.csv", report.brier_csv())
    _write(out / "reliability.csv", report.reliability_csv())
    click.echo(_dump(report.mean_brier()).strip())


@cli.command("bench")
@common_case
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--horizon", "T", default=1, show_default=True, type=click.IntRange(min=0))
@click.option("--time", "t", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--samples", default=10_000, show_default=True, type=click.IntRange(min=1))
@common_seed
@click.option("--skip-enumeration", is_flag=True,
              help="Leave out Alg-P (offline enumeration can be slow in high dimension).")
@common_out
def bench_cmd(case_path, scenario_path, T, t, samples, seed, skip_enumeration, out):
    """Solve counts of Alg-MC, Alg-DCRG and Alg-P; wall-clock times go to stdout."""
    case = _read_case(case_path)
    model = _read_scenario(scenario_path, case)
    law = conditional_law(model, model.mean(t), t, T)
    p = _problem(case, t + T)
    thetas = law.sample(np.random.default_rng(seed), samples)
    timings = {}
    start = time.perf_counter()
    direct = direct_simulate(p, thetas)
    timings["AlgMC"] = time.perf_counter() - start
    start = time.perf_counter()
    cache = DcrgCache(p)
    dc = dcrg_simulate(p, thetas, cache)
    timings["AlgDCRG"] = time.perf_counter() - start
    result = {
        "metadata": {"case": case.name, "seed": seed, "n_samples": samples, "horizon": T},
        "AlgMC": {"opf_solves": direct.cache.solves, "infeasible": direct.cache.infeasible},
        "AlgDCRG": cache.stats(),
        "streams_identical": bool(np.array_equal(direct.lmp, dc.lmp, equal_nan=True)),
    }
    result["AlgDCRG"]["solve_ratio"] = cache.solves / max(direct.cache.solves, 1)
    if not skip_enumeration:
        start = time.perf_counter()
        store = enumerate_regions(p, seed=seed)
        forecast_regions(store, law, samples, seed)
        timings["AlgP"] = time.perf_counter() - start
        result["AlgP"] = {"regions": len(store)}
    _write(out, _dump(result))
    for name, secs in timings.items():
        click.echo(f"{name}: {secs:.3f} s")


def main(argv=None) -> int:
    _written.clear()
    try:
        cli.main(args=argv, prog_name="lmpcast", standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        code = 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        code = 1
    except LmpcastError as exc:
        click.echo(f"error: {exc}", err=True)
        code = exc.exit_code
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        code = 1
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        code = 3
    for path in _written:
        path.unlink(missing_ok=True)
    _written.clear()
    return code


if __name__ == "__main__":
    sys.exit(main())
