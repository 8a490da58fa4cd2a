"""Conditional distribution of LMPs and congestion at t+T over critical regions.

Region probabilities are estimated by importance sampling with a Gaussian
proposal placed on each region's anchor point. The default proposal is a
defensive mixture: half the draws come from the law itself, which bounds
the likelihood ratio by 2 and keeps the estimator stable for regions whose
anchor lies far from the law's bulk.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Literal, Mapping

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from .network import ContingencyModel
from .regions import RegionStore
from .stochastic import ConditionalLaw, _psd_factor

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 10_000
LABEL_DECIMALS = 6


@dataclass
class ForecastEntry:
    config: int
    region: int
    probability: float
    std_error: float
    congestion: tuple[int, ...] | None = None
    lmp: np.ndarray | None = None
    U: np.ndarray | None = None
    v: np.ndarray | None = None
    component_mean: np.ndarray | None = None
    component_cov: np.ndarray | None = None

    @property
    def key(self) -> tuple[int, int]:
        return self.config, self.region

    def to_dict(self) -> dict:
        out = {"config": self.config, "region": self.region,
               "probability": float(self.probability), "std_error": float(self.std_error),
               "congestion": None if self.congestion is None else list(self.congestion)}
        for name in ("lmp", "U", "v", "component_mean", "component_cov"):
            val = getattr(self, name)
            if val is not None:
                out[name] = np.asarray(val).tolist()
        return out


@dataclass
class ForecastDistribution:
    entries: list[ForecastEntry]
    horizon: int
    issue_time: int = 0
    eps_mass: float = 0.0
    uncovered_mc: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        keys = [e.key for e in self.entries]
        if len(set(keys)) != len(keys):
            raise ValueError("forecast entries must be unique per (configuration, region)")

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([e.probability for e in self.entries])

    @property
    def total_mass(self) -> float:
        return float(self.probabilities.sum())

    def as_map(self) -> dict[tuple[int, int], float]:
        return {e.key: e.probability for e in self.entries}

    def entry(self, config: int, region: int) -> ForecastEntry:
        for e in self.entries:
            if e.key == (config, region):
                return e
        raise KeyError((config, region))

    def outcome_probabilities(self, by: Literal["lmp", "congestion", "region"] = "lmp"
                              ) -> dict[tuple, float]:
        """Aggregate mass per outcome label (LMP vector, congestion pattern or key)."""
        out: dict[tuple, float] = {}
        for e in self.entries:
            lab = outcome_label(e, by)
            out[lab] = out.get(lab, 0.0) + e.probability
        return out

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "issue_time": self.issue_time,
            "eps_mass": float(self.eps_mass),
            "uncovered_mc": float(self.uncovered_mc),
            "total_mass": self.total_mass,
            "metadata": self.metadata,
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def outcome_label(entry: ForecastEntry, by: str = "lmp") -> tuple:
    if by == "region":
        return entry.key
    if by == "congestion":
        return tuple(entry.congestion) if entry.congestion is not None else entry.key
    if entry.lmp is None:
        return entry.key
    return tuple(np.round(entry.lmp, LABEL_DECIMALS).tolist())


def _entry_for(region, config: int, prob: float, se: float, law: ConditionalLaw
               ) -> ForecastEntry:
    entry = ForecastEntry(config, region.id, prob, se, region.congestion)
    if region.U is None:
        entry.lmp = np.asarray(region.lmp, dtype=float)
    else:
        entry.U, entry.v = region.U, region.v
        entry.component_mean = region.U @ law.mean + region.v
        entry.component_cov = region.U @ law.cov @ region.U.T
    return entry


def _clipper(store: RegionStore, clip: bool):
    if not clip or store.box is None:
        return lambda theta: theta
    lo, hi = store.box
    return lambda theta: np.clip(theta, lo, hi)


def _plain_mc(store: RegionStore, law: ConditionalLaw, n: int, rng: np.random.Generator,
              clip: bool = False):
    theta = law.sample(rng, n)
    ids = store.locate_many(_clipper(store, clip)(theta))
    R = len(store)
    counts = np.bincount(ids, minlength=R + 1)
    f = counts[1:] / n
    # adjusted proportion keeps the standard error positive at 0 or n hits
    pa = (counts[1:] + 0.5) / (n + 1.0)
    se = np.sqrt(pa * (1 - pa) / n)
    return f, se, counts[0] / n, theta, ids


@dataclass
class _RegionSamples:
    """Weighted draws that landed in one region (for mixture CDF evaluation)."""

    theta: np.ndarray
    weight: np.ndarray


def _importance(store: RegionStore, law: ConditionalLaw, n: int, rng: np.random.Generator,
                proposal: str, dim_budget: int, keep: bool, clip: bool = False):
    R = len(store)
    f = np.zeros(R)
    se = np.zeros(R)
    anchors_fallback = 0
    kept: dict[int, _RegionSamples] = {}
    L = _psd_factor(law.cov)
    target = multivariate_normal(law.mean, law.cov, allow_singular=True)
    cap = _clipper(store, clip)
    for idx, region in enumerate(store):
        anchor, fallback = region.anchor(dim_budget)
        anchors_fallback += fallback
        z = rng.standard_normal((n, law.dim)) @ L.T
        if proposal == "shift":
            theta = anchor + z
            log_h = multivariate_normal(anchor, law.cov, allow_singular=True).logpdf(theta)
        else:
            from_law = rng.random(n) < 0.5
            theta = np.where(from_law[:, None], law.mean + z, anchor + z)
            log_h = logsumexp(np.stack([
                multivariate_normal(anchor, law.cov, allow_singular=True).logpdf(theta),
                target.logpdf(theta)]), axis=0) + np.log(0.5)
        log_h = np.atleast_1d(log_h)
        w = np.exp(np.atleast_1d(target.logpdf(theta)) - log_h)
        theta = cap(theta)
        inside = region.poly.contains_many(theta, tol=0.0)
        vals = w * inside
        f[idx] = vals.mean()
        se[idx] = vals.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
        if keep:
            kept[region.id] = _RegionSamples(theta[inside], w[inside])
    return np.clip(f, 0.0, 1.0), se, anchors_fallback, kept


def forecast_regions(store: RegionStore, law: ConditionalLaw, n_samples: int = DEFAULT_SAMPLES,
                     seed: int = 0, *, method: Literal["is", "mc"] = "is",
                     proposal: Literal["mixture", "shift"] = "mixture", dim_budget: int = 6,
                     issue_time: int = 0, config: int | None = None,
                     clip_to_box: bool = False, _keep_samples: bool = False) -> ForecastDistribution:
    """Probability of theta_{t+T} falling in each stored region.

    The estimates are clipped to [0, 1] and rescaled only when their sum
    exceeds one. ``eps_mass`` is the shortfall from one and
    ``uncovered_mc`` the fraction of plain draws outside every region.
    With ``clip_to_box`` the forecast is for the parameter capped at the
    store's box, so mass beyond the box moves onto its faces.
    """
    if len(store) == 0:
        raise ValueError("cannot forecast from an empty region store")
    if law.dim != store.dim:
        raise ValueError(f"law dimension {law.dim} does not match store dimension {store.dim}")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    config = store.config if config is None else config
    rng = np.random.default_rng(seed)
    f_mc, se_mc, uncovered, theta_mc, ids_mc = _plain_mc(store, law, n_samples, rng, clip_to_box)
    kept = {}
    fallbacks = 0
    if method == "is" and law.is_degenerate():
        logger.warning("degenerate covariance: falling back to plain Monte Carlo")
        method = "mc"
    if method == "is":
        f, se, fallbacks, kept = _importance(store, law, n_samples, rng, proposal,
                                             dim_budget, _keep_samples, clip_to_box)
    elif method == "mc":
        f, se = f_mc, se_mc
        if _keep_samples:
            kept = {r.id: _RegionSamples(theta_mc[ids_mc == r.id],
                                         np.ones(int((ids_mc == r.id).sum())))
                    for r in store}
    else:
        raise ValueError(f"unknown method {method!r}")
    total = f.sum()
    if total > 1.0:
        f = f / total
        se = se / total
    eps_mass = max(0.0, 1.0 - float(f.sum()))
    entries = [_entry_for(r, config, float(f[i]), float(se[i]), law)
               for i, r in enumerate(store)]
    meta = {"seed": seed, "n_samples": n_samples, "method": method, "clip_to_box": clip_to_box,
            "proposal": proposal if method == "is" else None,
            "anchor_fallbacks": int(fallbacks), "provenance": store.provenance}
    dist = ForecastDistribution(entries, law.horizon, issue_time, eps_mass, float(uncovered),
                                meta)
    if _keep_samples:
        dist.metadata["_samples"] = kept
    return dist


def point_mass(store: RegionStore, theta, horizon: int = 0, issue_time: int = 0
               ) -> ForecastDistribution:
    """Unit-mass forecast on the region containing a known parameter."""
    rid = store.locate(theta)
    if rid is None:
        raise ValueError("parameter lies outside every stored region")
    law = ConditionalLaw(np.asarray(theta, float), np.zeros((store.dim, store.dim)), horizon)
    entries = [_entry_for(r, store.config, 1.0 if r.id == rid else 0.0, 0.0, law)
               for r in store]
    return ForecastDistribution(entries, horizon, issue_time, 0.0, 0.0,
                                {"method": "point", "n_samples": 0})


def mix_forecasts(per_config: Mapping[int, ForecastDistribution], probabilities
                  ) -> ForecastDistribution:
    """Entrywise sum of p_k f^(k) over configurations."""
    probs = np.asarray(probabilities, dtype=float)
    entries = []
    eps = uncovered = 0.0
    horizon = issue = 0
    for k in sorted(per_config):
        dist, pk = per_config[k], float(probs[k])
        horizon, issue = dist.horizon, dist.issue_time
        eps += pk * dist.eps_mass
        uncovered += pk * dist.uncovered_mc
        for e in dist.entries:
            scaled = ForecastEntry(**{**e.__dict__, "config": k,
                                      "probability": pk * e.probability,
                                      "std_error": pk * e.std_error})
            entries.append(scaled)
    return ForecastDistribution(entries, horizon, issue, eps, uncovered,
                                {"method": "contingency-mixture",
                                 "probabilities": probs.tolist()})


def forecast_with_contingencies(per_config: Mapping[int, RegionStore], model: ContingencyModel,
                                law: ConditionalLaw, observed: int | None = None,
                                n_samples: int = DEFAULT_SAMPLES, seed: int = 0, **kw
                                ) -> ForecastDistribution:
    """Total-probability mixture over configurations, or one configuration if observed."""
    probs = model.probabilities
    if observed is not None:
        if not 0 <= observed < len(probs):
            raise ValueError(f"invalid configuration index {observed}")
        if observed not in per_config:
            raise KeyError(f"no region store for configuration {observed}")
        return forecast_regions(per_config[observed], law, n_samples,
                                _config_seed(seed, observed), config=observed, **kw)
    missing = [k for k, pk in enumerate(probs) if pk > 0 and k not in per_config]
    if missing:
        raise KeyError(f"no region store for configurations {missing}")
    parts = {k: forecast_regions(per_config[k], law, n_samples, _config_seed(seed, k),
                                 config=k, **kw)
             for k, pk in enumerate(probs) if pk > 0}
    out = mix_forecasts(parts, probs)
    out.metadata.update({"seed": seed, "n_samples": n_samples})
    return out


def _config_seed(seed: int, k: int) -> int:
    """Independent per-configuration seed derived from the root seed."""
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])


# quadratic cost ------------------------------------------------------------


@dataclass
class LmpMixture:
    """Mixture law of the price vector under quadratic cost.

    Components carry the weight, the affine map and the Gaussian moments of
    the untruncated image. The marginal CDF uses the weighted importance
    draws that fell in each region, mapped through its price map, which is
    the truncated-parameter representation of each component.
    """

    distribution: ForecastDistribution
    samples: dict[int, tuple[np.ndarray, np.ndarray]]   # region -> (prices, weights)

    @property
    def weights(self) -> np.ndarray:
        return self.distribution.probabilities

    def marginal_cdf(self, bus: int, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        total = np.zeros_like(x)
        mass = 0.0
        for e in self.distribution.entries:
            prices, w = self.samples.get(e.region, (np.zeros((0, 1)), np.zeros(0)))
            if w.size == 0 or e.probability == 0:
                continue
            vals = prices[:, bus]
            order = np.argsort(vals)
            cw = np.cumsum(w[order]) / w.sum()
            pos = np.searchsorted(vals[order], x, side="right")
            total += e.probability * np.where(pos > 0, cw[np.maximum(pos - 1, 0)], 0.0)
            mass += e.probability
        return total / mass if mass > 0 else total

    def marginal_pdf(self, bus: int, edges) -> np.ndarray:
        """Histogram density on ``edges`` from the mixture CDF."""
        edges = np.asarray(edges, dtype=float)
        return np.diff(self.marginal_cdf(bus, edges)) / np.diff(edges)

    def sample(self, n: int, seed: int = 0, store: RegionStore | None = None,
               law: ConditionalLaw | None = None) -> np.ndarray:
        """Price draws: theta from the law, mapped through its region's price map."""
        if store is None or law is None:
            raise ValueError("sampling needs the region store and the law")
        rng = np.random.default_rng(seed)
        theta = law.sample(rng, n)
        ids = store.locate_many(theta)
        out = np.full((n, len(self.distribution.entries[0].v)), np.nan)
        for rid in np.unique(ids[ids > 0]):
            region = store.get(int(rid))
            sel = ids == rid
            out[sel] = theta[sel] @ region.U.T + region.v
        return out


def forecast_lmp_density_quadratic(store: RegionStore, law: ConditionalLaw,
                                   n_samples: int = DEFAULT_SAMPLES, seed: int = 0, **kw
                                   ) -> LmpMixture:
    """Gaussian-mixture price law for quadratic-cost stores."""
    if any(r.U is None for r in store):
        raise ValueError("store contains constant-price regions; quadratic cost required")
    dist = forecast_regions(store, law, n_samples, seed, _keep_samples=True, **kw)
    kept = dist.metadata.pop("_samples", {})
    samples = {}
    for r in store:
        if r.id in kept:
            s = kept[r.id]
            samples[r.id] = (s.theta @ r.U.T + r.v, s.weight)
    dist.metadata["kind"] = "quadratic-mixture"
    return LmpMixture(dist, samples)
