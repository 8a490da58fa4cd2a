"""H-polytopes ``{theta : C theta <= e}``: reduction, centers and vertices.

Every LP in this module goes through ``scipy.optimize.linprog`` (HiGHS).
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection

from .errors import EmptyRegionError

logger = logging.getLogger(__name__)

ABS_TOL = 1e-9
INTERIOR_TOL = 1e-9
DEFAULT_DIM_BUDGET = 6


@dataclass(frozen=True)
class Polytope:
    C: np.ndarray
    e: np.ndarray
    minimal: bool = False
    empty: bool = False

    @property
    def dim(self) -> int:
        return self.C.shape[1]

    def contains(self, theta, tol: float = ABS_TOL) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(self.C @ theta <= self.e + tol))

    def contains_many(self, thetas: np.ndarray, tol: float = ABS_TOL) -> np.ndarray:
        return np.all(thetas @ self.C.T <= self.e + tol, axis=1)

    def intersect(self, other: "Polytope") -> "Polytope":
        return Polytope(np.vstack([self.C, other.C]), np.concatenate([self.e, other.e]))


def normalize_rows(C: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Scale rows to unit norm; returns ``(C, e, infeasible)``.

    Zero rows are dropped, or flag infeasibility when their offset is
    negative.
    """
    norms = np.linalg.norm(C, axis=1)
    zero = norms <= 1e-14
    infeasible = bool(np.any(e[zero] < -ABS_TOL))
    keep = ~zero
    return C[keep] / norms[keep, None], e[keep] / norms[keep], infeasible


def chebyshev_center(C: np.ndarray, e: np.ndarray, radius_cap: float | None = None
                     ) -> tuple[np.ndarray | None, float]:
    """Largest inscribed ball; returns ``(None, -inf)`` when infeasible."""
    k = C.shape[1]
    norms = np.linalg.norm(C, axis=1)
    A = np.hstack([C, norms[:, None]])
    bounds = [(None, None)] * k + [(None, radius_cap)]
    if radius_cap is None:
        bounds[-1] = (None, 1e9)
    cost = np.zeros(k + 1)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=A, b_ub=e, bounds=bounds, method="highs")
    if res.status != 0:
        return None, -np.inf
    return res.x[:k], float(res.x[-1])


def _dedupe(C: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Collapse parallel rows with the same normal, keeping the tightest."""
    if C.shape[0] == 0:
        return C, e
    key = np.round(C, 9)
    # primary sort on the normal, then tightest offset first
    order = np.lexsort(np.vstack([e, key.T[::-1]]))
    C, e, key = C[order], e[order], key[order]
    keep = np.ones(len(e), dtype=bool)
    keep[1:] = np.any(key[1:] != key[:-1], axis=1)
    return C[keep], e[keep]


def reduce_halfspaces(poly: Polytope, tol: float = ABS_TOL) -> Polytope:
    """Minimal representation; each dropped row is certified by an LP.

    A row is redundant when maximising its left-hand side over the other
    rows cannot exceed its offset.
    """
    C, e, infeasible = normalize_rows(np.asarray(poly.C, float), np.asarray(poly.e, float))
    if infeasible:
        return Polytope(C, e, minimal=True, empty=True)
    C, e = _dedupe(C, e)
    _, radius = chebyshev_center(C, e)
    if radius <= INTERIOR_TOL:
        return Polytope(C, e, minimal=True, empty=True)
    keep = np.ones(len(e), dtype=bool)
    k = C.shape[1]
    for i in range(len(e)):
        keep[i] = False
        others = np.flatnonzero(keep)
        A_ub = np.vstack([C[others], C[i]])
        b_ub = np.concatenate([e[others], [e[i] + 1.0]])
        res = linprog(-C[i], A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * k, method="highs")
        if res.status != 0 or -res.fun > e[i] + tol:
            keep[i] = True
    return Polytope(C[keep], e[keep], minimal=True, empty=False)


def interior_radius(poly: Polytope) -> float:
    C, e, infeasible = normalize_rows(np.asarray(poly.C, float), np.asarray(poly.e, float))
    if infeasible:
        return -np.inf
    return chebyshev_center(C, e)[1]


def facet_center(poly: Polytope, k: int, radius_cap: float) -> tuple[np.ndarray | None, float]:
    """Chebyshev center of facet ``k`` measured inside its hyperplane."""
    C, e = poly.C, poly.e
    n = C[k] / np.linalg.norm(C[k])
    others = [i for i in range(len(e)) if i != k]
    Co = C[others]
    proj = Co - np.outer(Co @ n, n)
    pn = np.linalg.norm(proj, axis=1)
    dim = C.shape[1]
    A_ub = np.hstack([Co, pn[:, None]])
    A_eq = np.concatenate([C[k], [0.0]])[None, :]
    cost = np.zeros(dim + 1)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=A_ub, b_ub=e[others], A_eq=A_eq, b_eq=[e[k]],
                  bounds=[(None, None)] * dim + [(None, radius_cap)], method="highs")
    if res.status != 0:
        return None, -np.inf
    return res.x[:dim], float(res.x[-1])


def vertices(poly: Polytope) -> np.ndarray:
    """Vertex list of a bounded, full-dimensional polytope."""
    C, e, _ = normalize_rows(np.asarray(poly.C, float), np.asarray(poly.e, float))
    center, radius = chebyshev_center(C, e)
    if center is None or radius <= INTERIOR_TOL:
        raise EmptyRegionError("polytope has empty interior")
    if C.shape[1] == 1:
        c = C[:, 0]
        hi = np.min(e[c > 0] / c[c > 0])
        lo = np.max(e[c < 0] / c[c < 0])
        return np.array([[lo], [hi]])
    hs = HalfspaceIntersection(np.hstack([C, -e[:, None]]), center)
    pts = hs.intersections
    _, idx = np.unique(np.round(pts, 9), axis=0, return_index=True)
    return pts[np.sort(idx)]


def vertices_bruteforce(poly: Polytope) -> np.ndarray:
    """Enumerate vertices by solving every square subsystem (small cases only)."""
    C, e = np.asarray(poly.C, float), np.asarray(poly.e, float)
    k = C.shape[1]
    pts = []
    for rows in itertools.combinations(range(len(e)), k):
        sub = C[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        v = np.linalg.solve(sub, e[list(rows)])
        if np.all(C @ v <= e + 1e-8):
            pts.append(v)
    if not pts:
        return np.zeros((0, k))
    pts = np.array(pts)
    _, idx = np.unique(np.round(pts, 8), axis=0, return_index=True)
    return pts[np.sort(idx)]


def region_anchor(poly: Polytope, dim_budget: int = DEFAULT_DIM_BUDGET
                  ) -> tuple[np.ndarray, bool]:
    """Mean of the vertices, or the Chebyshev center above ``dim_budget``.

    Returns ``(point, used_fallback)``.
    """
    C, e, infeasible = normalize_rows(np.asarray(poly.C, float), np.asarray(poly.e, float))
    center, radius = (None, -np.inf) if infeasible else chebyshev_center(C, e)
    if center is None or radius <= INTERIOR_TOL:
        raise EmptyRegionError("cannot anchor an empty polytope")
    if poly.dim > dim_budget:
        logger.debug("anchor fallback to Chebyshev center in dimension %d", poly.dim)
        return center, True
    return vertices(Polytope(C, e)).mean(axis=0), False
