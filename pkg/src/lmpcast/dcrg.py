"""Dynamic critical region generation: a Monte Carlo simulator that solves
the dispatch only when a sample lands outside every region seen so far.

Each solve yields a basis whose region follows in closed form; later
samples inside it reuse the region's price map without another solve.
Prices are always evaluated through the affine maps of the basis the
direct solver would select, so the stream matches per-sample solving.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateActiveSetError, EmptyRegionError, InfeasibleError
from .mpp import MppProblem, affine_solution
from .opf import select_basis, solution_price, solve_mpp, tight_rows
from .regions import CriticalRegion, RegionStore, _build_region, _congestion_label

logger = logging.getLogger(__name__)


@dataclass
class DcrgCache:
    problem: MppProblem
    store: RegionStore = None
    samples: int = 0
    solves: int = 0
    hits: int = 0
    infeasible: int = 0
    degenerate: int = 0
    redundant_solves: int = 0

    def __post_init__(self):
        if self.store is None:
            self.store = RegionStore(self.problem.n_params,
                                     (self.problem.box_lo, self.problem.box_hi), "dcrg")

    @property
    def distinct_regions(self) -> int:
        return len(self.store)

    def stats(self) -> dict:
        return {"samples": self.samples, "opf_solves": self.solves, "cache_hits": self.hits,
                "distinct_regions": self.distinct_regions, "infeasible": self.infeasible,
                "degenerate": self.degenerate, "redundant_solves": self.redundant_solves}

    def region_for_basis(self, basis) -> CriticalRegion:
        """Region of a basis, built in closed form on first use."""
        region = self.store.find_active_set(tuple(basis))
        if region is None:
            aff = affine_solution(self.problem, basis)
            region = _build_region(self.problem, aff, clip_to_box=False, reduce=False,
                                   region_id=0, config=self.store.config)
            region, _ = self.store.insert(region)
        return region


def _cached_basis(p: MppProblem, region: CriticalRegion, theta: np.ndarray):
    """Basis the direct solver would pick at ``theta`` inside ``region``."""
    x = region.optimizer_at(theta)
    tight = tight_rows(p, theta, x)
    own = set(region.active_set)
    extra = [i for i in tight if i not in own and i not in p.mirror_rows]
    if not extra:
        return region.active_set
    return tuple(select_basis(p, theta, x, tight, region.active_set))


@dataclass
class DcrgResult:
    lmp: np.ndarray              # samples x buses, NaN rows for infeasible samples
    congestion: np.ndarray       # samples x lines, zeros for infeasible samples
    region_ids: np.ndarray       # 0 for infeasible samples
    cache: DcrgCache


def dcrg_simulate(p: MppProblem, thetas: np.ndarray, cache: DcrgCache | None = None
                  ) -> DcrgResult:
    """Price every sample, solving only on cache misses."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    cache = DcrgCache(p) if cache is None else cache
    if cache.problem is not p:
        raise ValueError("cache was grown from a different problem")
    n_bus = p.layout.S_full.shape[1] if p.layout is not None else p.n_params
    n_lines = p.layout.n_lines_total if p.layout is not None else 0
    lmp = np.full((len(thetas), n_bus), np.nan)
    cong = np.zeros((len(thetas), n_lines), dtype=int)
    ids = np.zeros(len(thetas), dtype=int)
    for j, theta in enumerate(thetas):
        cache.samples += 1
        region = None
        rid = cache.store.locate(theta)
        if rid is not None:
            try:
                basis = _cached_basis(p, cache.store.get(rid), theta)
                region = cache.store.find_active_set(basis)
            except DegenerateActiveSetError:
                region = None
        if region is not None:
            cache.hits += 1
        else:
            try:
                sol = solve_mpp(p, theta)
            except InfeasibleError:
                cache.infeasible += 1
                continue
            cache.solves += 1
            before = len(cache.store)
            try:
                region = cache.region_for_basis(sol.basis)
            except (DegenerateActiveSetError, EmptyRegionError):
                cache.degenerate += 1
                raise
            if len(cache.store) == before:
                cache.redundant_solves += 1
        lmp[j] = region.price_at(theta)
        if region.congestion is not None:
            cong[j] = region.congestion
        ids[j] = region.id
    return DcrgResult(lmp, cong, ids, cache)


def direct_simulate(p: MppProblem, thetas: np.ndarray) -> DcrgResult:
    """Reference stream: one dispatch solve per sample (Alg-MC)."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    cache = DcrgCache(p)
    n_bus = p.layout.S_full.shape[1] if p.layout is not None else p.n_params
    n_lines = p.layout.n_lines_total if p.layout is not None else 0
    lmp = np.full((len(thetas), n_bus), np.nan)
    cong = np.zeros((len(thetas), n_lines), dtype=int)
    for j, theta in enumerate(thetas):
        cache.samples += 1
        try:
            sol = solve_mpp(p, theta)
        except InfeasibleError:
            cache.infeasible += 1
            continue
        cache.solves += 1
        lmp[j] = solution_price(p, sol)
        label = _congestion_label(p, sol.basis)
        if label is not None:
            cong[j] = label
    return DcrgResult(lmp, cong, np.zeros(len(thetas), dtype=int), cache)
