"""Scoring of probabilistic price forecasts and the point-forecast baselines."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np

from .forecast import ForecastDistribution, forecast_regions, mix_forecasts, _config_seed
from .network import ContingencyModel
from .regions import RegionStore
from .stochastic import ScenarioModel, conditional_law, sample_paths

SUM_TOL = 1e-6


def brier_score(forecasts: Sequence[Sequence[float]], realizations: Sequence[int]) -> float:
    """Mean squared distance between each forecast and its outcome's unit vector."""
    if len(forecasts) != len(realizations):
        raise ValueError("forecasts and realizations differ in length")
    if len(forecasts) == 0:
        raise ValueError("no events to score")
    total = 0.0
    for f, k in zip(forecasts, realizations):
        f = np.asarray(f, dtype=float)
        if abs(f.sum() - 1.0) > SUM_TOL:
            raise ValueError("forecast probabilities must sum to 1")
        if not 0 <= k < f.size:
            raise ValueError(f"outcome index {k} outside the forecast support")
        d = f.copy()
        d[k] -= 1.0
        total += float(d @ d)
    return total / len(forecasts)


def brier_term(probs: Mapping, outcome) -> float:
    """Squared distance for one event with forecasts keyed by outcome label.

    Labels absent from ``probs`` carry zero forecast probability.
    """
    sq = sum(p * p for p in probs.values())
    return float(sq - 2.0 * probs.get(outcome, 0.0) + 1.0)


@dataclass
class ReliabilityTable:
    edges: np.ndarray
    mean_forecast: np.ndarray    # NaN in empty bins
    observed: np.ndarray         # NaN in empty bins
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def occupied(self) -> np.ndarray:
        return self.counts > 0

    def rows(self) -> list[tuple[float, float, int]]:
        return [(float(c), float(o), int(n))
                for c, o, n in zip(self.centers, self.observed, self.counts)]


def reliability_diagram(probs: Sequence[float], outcomes: Sequence[bool], n_bins: int = 10
                        ) -> ReliabilityTable:
    """Observed event frequency per equal-width forecast-probability bin."""
    if n_bins < 2:
        raise ValueError("need at least two bins")
    probs = np.asarray(probs, dtype=float)
    outcomes = np.asarray(outcomes, dtype=bool)
    if probs.shape != outcomes.shape:
        raise ValueError("probabilities and outcomes differ in length")
    if np.any((probs < 0) | (probs > 1)):
        raise ValueError("forecast probabilities must lie in [0, 1]")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.clip(np.digitize(probs, edges[1:-1], right=False), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    hits = np.bincount(idx, weights=outcomes.astype(float), minlength=n_bins)
    sums = np.bincount(idx, weights=probs, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        observed = np.where(counts > 0, hits / counts, np.nan)
        mean_f = np.where(counts > 0, sums / counts, np.nan)
    return ReliabilityTable(edges, mean_f, observed, counts)


def _price_label(store: RegionStore, rid: int, theta) -> tuple:
    region = store.get(rid)
    return tuple(np.round(region.price_at(theta), 6).tolist())


def baseline_point_forecast(kind: Literal["AlgD", "AlgC"], store: RegionStore,
                            model: ScenarioModel, theta_t, t: int, T: int
                            ) -> tuple[int, np.ndarray]:
    """Region and price at the unconditional (Alg-D) or conditional (Alg-C) mean."""
    if kind == "AlgD":
        point = model.mean(t + T)
    elif kind == "AlgC":
        point = conditional_law(model, theta_t, t, T).mean
    else:
        raise ValueError(f"unknown baseline {kind!r}")
    rid = store.locate(point)
    if rid is None:
        raise ValueError("point forecast lies outside every stored region")
    return rid, store.get(rid).price_at(point)


@dataclass
class MarginalSummary:
    counts: np.ndarray
    edges: np.ndarray
    mean: float
    var: float
    fit_mean: float
    fit_std: float


def summarize_marginals(lmp_samples: np.ndarray, n_hist_bins: int = 30
                        ) -> list[MarginalSummary]:
    """Per-bus histogram, sample moments and the matching Gaussian fit."""
    x = np.asarray(lmp_samples, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a samples x buses matrix with at least two samples")
    out = []
    for col in x.T:
        col = col[np.isfinite(col)]
        mean, var = float(col.mean()), float(col.var(ddof=1))
        lo, hi = col.min(), col.max()
        if hi - lo <= 1e-12 * max(1.0, abs(lo)):
            counts, edges = np.array([col.size]), np.array([lo - 0.5, hi + 0.5])
        else:
            counts, edges = np.histogram(col, bins=n_hist_bins)
        out.append(MarginalSummary(counts, edges, mean, var, mean, float(np.sqrt(var))))
    return out


@dataclass
class EvaluationReport:
    times: np.ndarray
    brier: dict[str, np.ndarray]
    reliability: ReliabilityTable | None = None
    marginals: list[MarginalSummary] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def mean_brier(self) -> dict[str, float]:
        return {k: float(np.mean(v)) for k, v in self.brier.items()}

    def peak_times(self, alg: str = "AlgP", n: int = 2, separation: int = 5) -> list[int]:
        """Times of the ``n`` largest local maxima at least ``separation`` apart."""
        bs = self.brier[alg]
        order = np.argsort(-bs, kind="stable")
        chosen: list[int] = []
        for i in order:
            if all(abs(int(self.times[i]) - c) >= separation for c in chosen):
                chosen.append(int(self.times[i]))
            if len(chosen) == n:
                break
        return sorted(chosen)

    def brier_csv(self) -> str:
        algs = sorted(self.brier)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time"] + [f"BS_{a}" for a in algs])
        for i, t in enumerate(self.times):
            w.writerow([int(t)] + [f"{self.brier[a][i]:.10g}" for a in algs])
        return buf.getvalue()

    def reliability_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_center", "observed_freq", "count"])
        if self.reliability is not None:
            for c, o, n in self.reliability.rows():
                w.writerow([f"{c:.6g}", "" if np.isnan(o) else f"{o:.10g}", n])
        return buf.getvalue()

    def to_dict(self) -> dict:
        rel = None
        if self.reliability is not None:
            rel = [{"bin_center": c, "observed_freq": None if np.isnan(o) else o, "count": n}
                   for c, o, n in self.reliability.rows()]
        return {
            "times": [int(t) for t in self.times],
            "brier": {k: [float(x) for x in v] for k, v in self.brier.items()},
            "mean_brier": self.mean_brier(),
            "reliability": rel,
            "marginals": [{"mean": m.mean, "var": m.var, "fit_mean": m.fit_mean,
                           "fit_std": m.fit_std, "counts": m.counts.tolist(),
                           "edges": m.edges.tolist()} for m in self.marginals],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def _point_probs(stores: Mapping[int, RegionStore], probs: np.ndarray, point) -> dict:
    """Mixture over configurations of unit forecasts at one parameter point."""
    out: dict[tuple, float] = {}
    for k, store in stores.items():
        if probs[k] == 0:
            continue
        rid = store.locate(point)
        if rid is None:
            continue
        lab = _price_label(store, rid, point)
        out[lab] = out.get(lab, 0.0) + float(probs[k])
    return out


def run_trajectory_experiment(stores: Mapping[int, RegionStore], model: ScenarioModel,
                              horizon: int, n_reps: int, seed: int = 0, *,
                              contingencies: ContingencyModel | None = None,
                              n_samples: int = 2000, n_bins: int = 10,
                              method: Literal["is", "mc"] = "is") -> EvaluationReport:
    """Replicated forecasting along simulated trajectories.

    Each replication draws a path from ``model`` and, at every target time
    t+T, a realized configuration with the contingency probabilities. The
    realized outcome is the price vector at theta_{t+T} in that
    configuration, with the parameter capped at the store box (the
    deliverable range). Alg-P scores the full forecast; Alg-D and Alg-C score
    unit forecasts at the unconditional and conditional means (mixed over
    configurations when contingencies are present). Brier scores are
    indexed by target time and averaged over replications.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    probs = np.array([1.0]) if contingencies is None else contingencies.probabilities
    missing = [k for k, pk in enumerate(probs) if pk > 0 and k not in stores]
    if missing:
        raise KeyError(f"no region store for configurations {missing}")
    rng = np.random.default_rng(seed)
    paths = sample_paths(model, n_reps, seed=int(rng.integers(2**31)))
    n_t = model.n_times
    targets = np.arange(horizon, n_t)
    configs = rng.choice(len(probs), size=(n_reps, n_t), p=probs)
    bs = {a: np.zeros(len(targets)) for a in ("AlgP", "AlgD", "AlgC")}
    rel_p, rel_o = [], []
    for r in range(n_reps):
        for j, target in enumerate(targets):
            t = int(target - horizon)
            theta_t, theta_T = paths[r, t], paths[r, target]
            k_real = int(configs[r, target])
            lo, hi = stores[k_real].box
            theta_T = np.clip(theta_T, lo, hi)
            rid = stores[k_real].locate(theta_T)
            if rid is None:
                raise ValueError("realized parameter lies outside every stored region")
            outcome = _price_label(stores[k_real], rid, theta_T)
            law = conditional_law(model, theta_t, t, horizon)
            fseed = _config_seed(seed, r * n_t + t)
            parts = {k: forecast_regions(stores[k], law, n_samples, _config_seed(fseed, k),
                                         method=method, config=k, clip_to_box=True)
                     for k, pk in enumerate(probs) if pk > 0}
            dist: ForecastDistribution = mix_forecasts(parts, probs)
            fp = dist.outcome_probabilities("lmp")
            bs["AlgP"][j] += brier_term(fp, outcome)
            bs["AlgD"][j] += brier_term(_point_probs(stores, probs, np.clip(model.mean(target), lo, hi)), outcome)
            bs["AlgC"][j] += brier_term(_point_probs(stores, probs, np.clip(law.mean, lo, hi)), outcome)
            labels = set(fp) | {outcome}
            for lab in sorted(labels):
                rel_p.append(min(1.0, max(0.0, fp.get(lab, 0.0))))
                rel_o.append(lab == outcome)
    for a in bs:
        bs[a] /= n_reps
    meta = {"seed": seed, "n_reps": n_reps, "horizon": horizon, "n_samples": n_samples,
            "probabilities": probs.tolist(), "method": method}
    return EvaluationReport(targets, bs, reliability_diagram(rel_p, rel_o, n_bins),
                            metadata=meta)
