"""Critical regions built from active sets, and the store that indexes them.

A region is the closure of the set of parameters sharing one optimal
basis. For linear cost it carries a constant price vector; for quadratic
cost the multipliers, and therefore the prices, are affine in theta.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateActiveSetError, EmptyRegionError
from .mpp import AffineSolution, MppProblem, affine_solution, price_from_rows
from .opf import DispatchSolution, _dual_ok, tight_rows
from .polytope import (ABS_TOL, DEFAULT_DIM_BUDGET, INTERIOR_TOL, Polytope, interior_radius,
                       normalize_rows, reduce_halfspaces, region_anchor)

LOCATE_TOL = 1e-7


@dataclass
class CriticalRegion:
    id: int
    poly: Polytope
    active_set: tuple[int, ...]
    solution: AffineSolution
    lmp: np.ndarray | None = None     # constant prices (linear cost)
    U: np.ndarray | None = None       # affine prices (quadratic cost)
    v: np.ndarray | None = None
    congestion: tuple[int, ...] | None = None
    config: int = 0
    problem: MppProblem | None = field(default=None, repr=False)
    _anchors: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def price_kind(self) -> str:
        return "constant" if self.U is None else "affine"

    def price_at(self, theta) -> np.ndarray:
        if self.problem is not None:
            rows = self.solution.rows
            return price_from_rows(self.problem, rows, self.solution.y(theta))
        if self.U is None:
            return self.lmp
        return self.U @ np.asarray(theta, dtype=float) + self.v

    def optimizer_at(self, theta) -> np.ndarray:
        return self.solution.x(np.asarray(theta, dtype=float))

    def contains(self, theta, tol: float = LOCATE_TOL) -> bool:
        return self.poly.contains(theta, tol)

    def anchor(self, dim_budget: int = DEFAULT_DIM_BUDGET) -> tuple[np.ndarray, bool]:
        """Cached ``region_anchor`` of the polytope."""
        if dim_budget not in self._anchors:
            self._anchors[dim_budget] = region_anchor(self.poly, dim_budget)
        return self._anchors[dim_budget]


def optimal_partition(p: MppProblem, theta, sol: DispatchSolution) -> tuple[int, ...]:
    """Rows tight at the optimizer (mirror rows of equalities included)."""
    theta = np.asarray(theta, dtype=float)
    if sol.g.shape != (p.n_vars,):
        raise ValueError("solution does not belong to this problem")
    slack = p.rhs(theta) - p.A @ sol.g
    if slack.min() < -1e-6 * (1.0 + np.abs(p.rhs(theta)).max()):
        raise ValueError("solution is infeasible for this problem at theta")
    return tight_rows(p, theta, sol.g)


def _congestion_label(p: MppProblem, rows: Sequence[int]) -> tuple[int, ...] | None:
    lay = p.layout
    if lay is None:
        return None
    status = [0] * lay.n_lines_total
    plus = {int(r): lay.line_ids[k] for k, r in enumerate(lay.line_plus)}
    minus = {int(r): lay.line_ids[k] for k, r in enumerate(lay.line_minus)}
    for r in rows:
        if r in plus:
            status[plus[r]] = 1
        elif r in minus:
            status[minus[r]] = -1
    return tuple(status)


def region_halfspaces(p: MppProblem, aff: AffineSolution) -> tuple[np.ndarray, np.ndarray]:
    """Primal (and for quadratic cost, dual) feasibility of the affine maps."""
    rows = set(aff.rows)
    inactive = [int(i) for i in p.ineq_rows if int(i) not in rows]
    AN, bN, EN = p.A[inactive], p.b[inactive], p.E[inactive]
    C = AN @ aff.x_coef - EN
    e = bN - AN @ aff.x_off
    if p.is_quadratic:
        eq = set(p.eq_rows)
        sel = [k for k, r in enumerate(aff.rows) if r not in eq]
        C = np.vstack([C, -aff.y_coef[sel]])
        e = np.concatenate([e, aff.y_off[sel]])
    return C, e


def _build_region(p: MppProblem, aff: AffineSolution, *, clip_to_box: bool, reduce: bool,
                  region_id: int, config: int) -> CriticalRegion:
    C, e = region_halfspaces(p, aff)
    if clip_to_box:
        Cb, eb = p.box_halfspaces()
        C, e = np.vstack([C, Cb]), np.concatenate([e, eb])
    if reduce:
        poly = reduce_halfspaces(Polytope(C, e))
        if poly.empty:
            raise EmptyRegionError(f"active set {aff.rows} yields an empty region")
    else:
        Cn, en, infeasible = normalize_rows(C, e)
        if infeasible:
            raise EmptyRegionError(f"active set {aff.rows} yields an empty region")
        poly = Polytope(Cn, en)
    lmp = U = v = None
    if p.is_quadratic:
        L = p.price_operator(aff.rows)
        U, v = L @ aff.y_coef, L @ aff.y_off
    else:
        lmp = price_from_rows(p, aff.rows, aff.y_off)
    return CriticalRegion(id=region_id, poly=poly, active_set=tuple(aff.rows), solution=aff,
                          lmp=lmp, U=U, v=v, congestion=_congestion_label(p, aff.rows),
                          config=config, problem=p)


def region_from_active_set_linear(p: MppProblem, aset: Iterable[int], *, clip_to_box=True,
                                  reduce=True, region_id: int = 0, config: int = 0
                                  ) -> CriticalRegion:
    """Region of a square, invertible active set under linear cost."""
    if p.is_quadratic:
        raise ValueError("problem has quadratic cost")
    rows = p.basis_rows(aset)
    aff = affine_solution(p, rows)
    if not _dual_ok(p, aff.rows, aff.y_off):
        raise EmptyRegionError(f"active set {tuple(rows)} is not dual feasible for any theta")
    return _build_region(p, aff, clip_to_box=clip_to_box, reduce=reduce,
                         region_id=region_id, config=config)


def region_from_active_set_quadratic(p: MppProblem, aset: Iterable[int], *, clip_to_box=True,
                                     reduce=True, region_id: int = 0, config: int = 0
                                     ) -> CriticalRegion:
    """Region of an independent active set under positive-definite quadratic cost."""
    if not p.is_quadratic:
        raise ValueError("problem has linear cost")
    rows = p.basis_rows(aset)
    aff = affine_solution(p, rows)
    return _build_region(p, aff, clip_to_box=clip_to_box, reduce=reduce,
                         region_id=region_id, config=config)


def region_from_active_set(p: MppProblem, aset: Iterable[int], **kw) -> CriticalRegion:
    if p.is_quadratic:
        return region_from_active_set_quadratic(p, aset, **kw)
    return region_from_active_set_linear(p, aset, **kw)


class RegionStore:
    """Regions of one configuration with point location.

    Ids start at 1 and follow insertion order; the lowest id wins when a
    point sits on a shared boundary.
    """

    def __init__(self, dim: int, box: tuple[np.ndarray, np.ndarray] | None = None,
                 provenance: str = "enumerated", config: int = 0):
        self.dim = dim
        self.box = box
        self.provenance = provenance
        self.config = config
        self.regions: list[CriticalRegion] = []
        self._by_set: dict[tuple[int, ...], CriticalRegion] = {}
        self._stack: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    def get(self, region_id: int) -> CriticalRegion:
        return self.regions[region_id - 1]

    def find_active_set(self, aset: Sequence[int]) -> CriticalRegion | None:
        return self._by_set.get(tuple(aset))

    def insert(self, region: CriticalRegion) -> tuple[CriticalRegion, bool]:
        """Insert unless the active set is known; returns ``(region, inserted)``."""
        known = self._by_set.get(region.active_set)
        if known is not None:
            return known, False
        region.id = len(self.regions) + 1
        region.config = self.config
        self.regions.append(region)
        self._by_set[region.active_set] = region
        self._stack = None
        return region, True

    def _stacked(self):
        if self._stack is None:
            if self.regions:
                C = np.vstack([r.poly.C for r in self.regions])
                e = np.concatenate([r.poly.e for r in self.regions])
                starts = np.cumsum([0] + [len(r.poly.e) for r in self.regions[:-1]])
            else:
                C, e, starts = np.zeros((0, self.dim)), np.zeros(0), np.zeros(0, dtype=int)
            self._stack = (C, e, np.asarray(starts, dtype=int))
        return self._stack

    def membership(self, thetas: np.ndarray, tol: float = LOCATE_TOL) -> np.ndarray:
        """Boolean matrix samples x regions of closed-polytope membership."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if not self.regions:
            return np.zeros((thetas.shape[0], 0), dtype=bool)
        C, e, starts = self._stacked()
        viol = thetas @ C.T - e
        return np.maximum.reduceat(viol, starts, axis=1) <= tol

    def locate_many(self, thetas: np.ndarray, tol: float = LOCATE_TOL) -> np.ndarray:
        """Region id per sample, 0 where no region contains the sample."""
        member = self.membership(thetas, tol)
        if member.shape[1] == 0:
            return np.zeros(member.shape[0], dtype=int)
        first = np.argmax(member, axis=1)
        return np.where(member.any(axis=1), first + 1, 0)

    def locate(self, theta, tol: float = LOCATE_TOL) -> int | None:
        rid = int(self.locate_many(np.atleast_1d(np.asarray(theta, dtype=float))[None, :],
                                   tol)[0])
        return rid or None

    def check_disjoint(self, tol: float = 1e-7) -> list[tuple[int, int]]:
        """Pairs of regions whose interiors overlap by more than ``tol``."""
        bad = []
        for i, a in enumerate(self.regions):
            for b in self.regions[i + 1:]:
                if interior_radius(a.poly.intersect(b.poly)) > tol:
                    bad.append((a.id, b.id))
        return bad

    # serialisation ----------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "dim": self.dim,
            "provenance": self.provenance,
            "config": self.config,
            "box": None if self.box is None else [list(map(float, self.box[0])),
                                                  list(map(float, self.box[1]))],
            "regions": [],
        }
        for r in self.regions:
            entry = {
                "id": r.id,
                "active_set": list(r.active_set),
                "C": r.poly.C.tolist(),
                "e": r.poly.e.tolist(),
                "price_kind": r.price_kind,
                "congestion": None if r.congestion is None else list(r.congestion),
                "x_coef": r.solution.x_coef.tolist(),
                "x_off": r.solution.x_off.tolist(),
                "y_coef": r.solution.y_coef.tolist(),
                "y_off": r.solution.y_off.tolist(),
            }
            if r.U is None:
                entry["lmp"] = r.lmp.tolist()
            else:
                entry["U"] = r.U.tolist()
                entry["v"] = r.v.tolist()
            out["regions"].append(entry)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict, problem: MppProblem | None = None) -> "RegionStore":
        box = None if doc.get("box") is None else (np.array(doc["box"][0]),
                                                   np.array(doc["box"][1]))
        store = cls(int(doc["dim"]), box, doc.get("provenance", "enumerated"),
                    int(doc.get("config", 0)))
        k = store.dim
        for entry in doc["regions"]:
            rows = tuple(entry["active_set"])
            aff = AffineSolution(rows, np.array(entry["x_coef"]).reshape(-1, k),
                                 np.array(entry["x_off"]),
                                 np.array(entry["y_coef"]).reshape(len(rows), k),
                                 np.array(entry["y_off"]))
            poly = Polytope(np.array(entry["C"]).reshape(-1, k), np.array(entry["e"]),
                            minimal=True)
            region = CriticalRegion(
                id=0, poly=poly, active_set=rows, solution=aff,
                lmp=None if "lmp" not in entry else np.array(entry["lmp"]),
                U=None if "U" not in entry else np.array(entry["U"]).reshape(-1, k),
                v=None if "v" not in entry else np.array(entry["v"]),
                congestion=None if entry["congestion"] is None else tuple(entry["congestion"]),
                problem=problem)
            store.insert(region)
        return store

    @classmethod
    def from_json(cls, text: str, problem: MppProblem | None = None) -> "RegionStore":
        return cls.from_dict(json.loads(text), problem)


def locate(store: RegionStore, theta) -> int | None:
    return store.locate(theta)


def region_is_valid(region: CriticalRegion) -> bool:
    return interior_radius(region.poly) > INTERIOR_TOL


__all__ = [
    "ABS_TOL", "CriticalRegion", "DegenerateActiveSetError", "RegionStore", "locate",
    "optimal_partition", "region_from_active_set", "region_from_active_set_linear",
    "region_from_active_set_quadratic", "region_halfspaces", "region_is_valid",
]
