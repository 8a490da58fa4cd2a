"""Offline enumeration of the critical-region partition of a parameter box.

Breadth-first facet crossing: solve at a seed, build its region, then step
just past the center of every facet and repeat for each point that no known
region contains. A uniform sampling pass afterwards seeds any region the
walk could not reach (for instance across infeasible pockets).
"""
from __future__ import annotations

import logging
from collections import deque

import numpy as np

from .errors import (BudgetExceededError, DegenerateActiveSetError, EmptyRegionError,
                     InfeasibleError)
from .mpp import MppProblem
from .opf import solve_mpp
from .polytope import INTERIOR_TOL, facet_center
from .regions import CriticalRegion, RegionStore, region_from_active_set

logger = logging.getLogger(__name__)

DEFAULT_REGION_CAP = 10_000
STEP_FACTOR = 1e-6
PERTURB_TRIES = 5


def _region_at(p: MppProblem, theta: np.ndarray, rng: np.random.Generator,
               scale: float) -> CriticalRegion | None:
    """Region whose interior contains ``theta`` or a point very close to it.

    Degenerate or flat active sets are resolved by re-solving at randomly
    perturbed parameters. Returns ``None`` when the program is infeasible.
    """
    point = theta
    for attempt in range(PERTURB_TRIES + 1):
        try:
            sol = solve_mpp(p, point)
            return region_from_active_set(p, sol.basis)
        except InfeasibleError:
            if attempt == 0:
                return None
        except (DegenerateActiveSetError, EmptyRegionError) as exc:
            logger.debug("perturbing degenerate point %s: %s", point, exc)
        point = np.clip(theta + rng.uniform(-scale, scale, theta.shape), p.box_lo, p.box_hi)
    return None


def _first_feasible(p: MppProblem, rng: np.random.Generator, n_tries: int = 1000):
    center = 0.5 * (p.box_lo + p.box_hi)
    yield center
    for _ in range(n_tries):
        yield rng.uniform(p.box_lo, p.box_hi)


def enumerate_regions(p: MppProblem, *, max_regions: int = DEFAULT_REGION_CAP,
                      coverage_samples: int | None = None, seed: int = 0,
                      config: int = 0) -> RegionStore:
    """Partition the parameter box of ``p`` into critical regions.

    Regions are numbered from 1 in discovery order. ``coverage_samples``
    uniform points (default ``200 * dim``) are checked after the walk;
    uncovered feasible points seed further exploration.
    """
    rng = np.random.default_rng(seed)
    store = RegionStore(p.n_params, (p.box_lo.copy(), p.box_hi.copy()), "enumerated", config)
    diag = p.box_diagonal
    if diag == 0:
        raise EmptyRegionError("parameter box has zero volume")
    eps = STEP_FACTOR * diag
    queue: deque[CriticalRegion] = deque()

    def add(region: CriticalRegion | None) -> bool:
        if region is None:
            return False
        region, fresh = store.insert(region)
        if fresh:
            if len(store) > max_regions:
                raise BudgetExceededError(f"more than {max_regions} critical regions")
            queue.append(region)
        return fresh

    for theta in _first_feasible(p, rng):
        if add(_region_at(p, theta, rng, eps)):
            break
    else:
        raise InfeasibleError("no feasible parameter found in the box")

    def walk():
        while queue:
            region = queue.popleft()
            C = region.poly.C
            for k in range(C.shape[0]):
                center, radius = facet_center(region.poly, k, radius_cap=diag)
                if center is None or radius <= INTERIOR_TOL:
                    continue
                normal = C[k] / np.linalg.norm(C[k])
                for step in (eps, 10 * eps):
                    point = center + step * normal
                    if not p.in_box(point):
                        break
                    if store.locate(point, tol=0.0) is not None:
                        break
                    found = _region_at(p, point, rng, eps)
                    if found is None:
                        break
                    if add(found) or store.find_active_set(found.active_set) is not region:
                        break
                    # landed back in the same region: retry further out

    walk()
    n_cover = 200 * p.n_params if coverage_samples is None else coverage_samples
    if n_cover:
        pts = rng.uniform(p.box_lo, p.box_hi, size=(n_cover, p.n_params))
        for point in pts:
            if store.locate(point) is not None:
                continue
            if add(_region_at(p, point, rng, eps)):
                logger.info("coverage pass found a region the walk missed")
                walk()
    return store
