"""Right-hand-side multiparametric program ``min z(x) s.t. Ax <= b + E theta``.

:func:`build_mpp` stacks the dispatch as

    rows  0, 1            energy balance (+, -)
    rows  2 .. 2+L        line upper limits
    rows  .. +L           line lower limits
    rows  .. +G           generator upper limits
    rows  .. +G           generator lower limits

Opposite-signed row pairs such as the balance rows are listed in
``eq_pairs``. Both rows of a pair are tight at every feasible point, so the
solver and the region constructions treat the first row of each pair as a
single equality with a free multiplier, and the second row is never part of
a basis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CaseError, DegenerateActiveSetError
from .network import SystemSnapshot

ActiveSet = tuple[int, ...]


@dataclass(frozen=True)
class DispatchLayout:
    """Links rows and parameters of a dispatch program to the physical grid."""

    S: np.ndarray            # in-service lines x buses
    S_full: np.ndarray       # all lines x buses, zero rows for outages
    line_ids: tuple[int, ...]  # case index of each in-service line
    n_lines_total: int
    n_gens: int
    gen_incidence: np.ndarray  # buses x generators
    fixed_withdrawal: np.ndarray
    param_withdrawal: np.ndarray  # buses x parameters
    param_labels: tuple[str, ...]

    @property
    def n_lines(self) -> int:
        return len(self.line_ids)

    @property
    def line_plus(self) -> np.ndarray:
        return np.arange(2, 2 + self.n_lines)

    @property
    def line_minus(self) -> np.ndarray:
        return np.arange(2 + self.n_lines, 2 + 2 * self.n_lines)

    @property
    def gen_plus(self) -> np.ndarray:
        start = 2 + 2 * self.n_lines
        return np.arange(start, start + self.n_gens)

    @property
    def gen_minus(self) -> np.ndarray:
        start = 2 + 2 * self.n_lines + self.n_gens
        return np.arange(start, start + self.n_gens)

    def row_label(self, i: int) -> str:
        if i == 0:
            return "balance+"
        if i == 1:
            return "balance-"
        L, G = self.n_lines, self.n_gens
        i -= 2
        if i < L:
            return f"line{self.line_ids[i] + 1}+"
        i -= L
        if i < L:
            return f"line{self.line_ids[i] + 1}-"
        i -= L
        if i < G:
            return f"gen{i + 1}+"
        return f"gen{i - G + 1}-"


@dataclass(frozen=True)
class MppProblem:
    A: np.ndarray
    b: np.ndarray
    E: np.ndarray
    c: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    H: np.ndarray | None = None
    eq_pairs: tuple[tuple[int, int], ...] = ()
    layout: DispatchLayout | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        m, n = self.A.shape
        if self.b.shape != (m,) or self.E.shape[0] != m or self.c.shape != (n,):
            raise CaseError("inconsistent MPP dimensions")
        if self.box_lo.shape != (self.E.shape[1],) or self.box_hi.shape != self.box_lo.shape:
            raise CaseError("parameter box does not match the parameter dimension")
        if np.any(self.box_lo > self.box_hi):
            raise CaseError("empty parameter box")
        if self.H is not None:
            if not np.allclose(self.H, self.H.T):
                raise CaseError("quadratic cost must be symmetric")
            if np.linalg.eigvalsh(self.H).min() <= 0:
                raise CaseError("quadratic cost must be positive definite")

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_params(self) -> int:
        return self.E.shape[1]

    @property
    def is_quadratic(self) -> bool:
        return self.H is not None

    @property
    def eq_rows(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.eq_pairs)

    @property
    def mirror_rows(self) -> tuple[int, ...]:
        return tuple(j for _, j in self.eq_pairs)

    @property
    def ineq_rows(self) -> np.ndarray:
        """Rows handled as inequalities by the solver (pairs excluded)."""
        if "ineq" not in self._cache:
            skip = set(self.eq_rows) | set(self.mirror_rows)
            self._cache["ineq"] = np.array([i for i in range(self.n_rows) if i not in skip],
                                           dtype=int)
        return self._cache["ineq"]

    @property
    def H_inv(self) -> np.ndarray:
        if "H_inv" not in self._cache:
            self._cache["H_inv"] = np.linalg.inv(self.H)
        return self._cache["H_inv"]

    def rhs(self, theta) -> np.ndarray:
        return self.b + self.E @ np.asarray(theta, dtype=float)

    def box_halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        k = self.n_params
        C = np.vstack([np.eye(k), -np.eye(k)])
        e = np.concatenate([self.box_hi, -self.box_lo])
        return C, e

    def in_box(self, theta, tol: float = 0.0) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.box_lo - tol) and np.all(theta <= self.box_hi + tol))

    @property
    def box_diagonal(self) -> float:
        return float(np.linalg.norm(self.box_hi - self.box_lo))

    def basis_rows(self, aset: Sequence[int]) -> list[int]:
        """Rows of an active set used in the linear algebra.

        Mirror rows drop out; an equality representative is always included
        since both rows of a pair are tight everywhere.
        """
        mirrors = set(self.mirror_rows)
        rows = set(int(i) for i in aset if int(i) not in mirrors)
        rows.update(self.eq_rows)
        return sorted(rows)

    def full_active_set(self, basis: Sequence[int]) -> ActiveSet:
        return tuple(sorted(set(int(i) for i in basis) | set(self.eq_rows) | set(self.mirror_rows)))

    # prices ---------------------------------------------------------------

    def split_multipliers(self, rows: Sequence[int], y_rows: np.ndarray):
        """Turn multipliers on basis rows into ``(lam, mu_plus, mu_minus, y_full)``.

        ``y_rows`` holds the free multiplier on each equality representative.
        ``lam`` is ``None`` for problems without a dispatch layout.
        """
        y_full = np.zeros(self.n_rows)
        y_full[list(rows)] = y_rows
        for i, j in self.eq_pairs:
            v = y_full[i]
            y_full[i], y_full[j] = max(v, 0.0), max(-v, 0.0)
        lay = self.layout
        if lay is None:
            return None, None, None, y_full
        rows = list(rows)
        lam = -float(y_rows[rows.index(0)]) if 0 in rows else 0.0
        mu_plus = np.zeros(lay.n_lines_total)
        mu_minus = np.zeros(lay.n_lines_total)
        mu_plus[list(lay.line_ids)] = y_full[lay.line_plus]
        mu_minus[list(lay.line_ids)] = y_full[lay.line_minus]
        return lam, mu_plus, mu_minus, y_full

    def price_operator(self, rows: Sequence[int]) -> np.ndarray:
        """Linear map from merged basis multipliers to the price vector.

        For dispatch programs this is the LMP relation; for generic programs
        the price is the cost sensitivity to theta, ``-E' y``.
        """
        rows = list(rows)
        lay = self.layout
        if lay is None:
            Et = -self.E[rows].T
            return Et
        n_bus = lay.S.shape[1]
        L = np.zeros((n_bus, len(rows)))
        plus = {int(r): k for k, r in enumerate(lay.line_plus)}
        minus = {int(r): k for k, r in enumerate(lay.line_minus)}
        for col, r in enumerate(rows):
            if r == 0:
                L[:, col] = -1.0
            elif r in plus:
                L[:, col] = -lay.S[plus[r]]
            elif r in minus:
                L[:, col] = lay.S[minus[r]]
        return L


def lmp_from_multipliers(lam: float, mu_plus: np.ndarray, mu_minus: np.ndarray,
                         S: np.ndarray) -> np.ndarray:
    """``pi = 1 lam - S' mu_plus + S' mu_minus``."""
    if S.shape[0] != mu_plus.shape[0] or mu_plus.shape != mu_minus.shape:
        raise ValueError("multiplier and shift factor dimensions disagree")
    return lam * np.ones(S.shape[1]) - S.T @ mu_plus + S.T @ mu_minus


def price_from_rows(p: MppProblem, rows: Sequence[int], y_rows: np.ndarray) -> np.ndarray:
    """Price vector from merged basis multipliers.

    Dispatch programs return LMPs; generic programs return ``-E' y``.
    """
    if p.layout is None:
        return -p.E[list(rows)].T @ y_rows
    lam, mu_plus, mu_minus, _ = p.split_multipliers(rows, y_rows)
    return lmp_from_multipliers(lam, mu_plus, mu_minus, p.layout.S_full)


def build_mpp(snapshot: SystemSnapshot, box: tuple[np.ndarray, np.ndarray] | None = None
              ) -> MppProblem:
    case = snapshot.case
    live = np.flatnonzero(snapshot.in_service)
    S = np.asarray(snapshot.S)[live]
    Cg = snapshot.gen_incidence()
    fixed, P = case.withdrawal_map()
    n_gen = Cg.shape[1]
    if n_gen == 0:
        raise CaseError("case has no dispatchable generator")
    ones = np.ones(case.n_buses)
    SC = S @ Cg
    A = np.vstack([ones @ Cg, -(ones @ Cg), SC, -SC, np.eye(n_gen), -np.eye(n_gen)])
    b = np.concatenate([
        [ones @ fixed, -(ones @ fixed)],
        snapshot.line_max[live] + S @ fixed,
        -snapshot.line_min[live] - S @ fixed,
        snapshot.gen_max,
        -snapshot.gen_min,
    ])
    SP = S @ P
    E = np.vstack([ones @ P, -(ones @ P), SP, -SP, np.zeros((2 * n_gen, P.shape[1]))])
    lo, hi = case.parameter_box() if box is None else (np.asarray(box[0], float),
                                                         np.asarray(box[1], float))
    qc = snapshot.quad_cost
    layout = DispatchLayout(S=S, S_full=np.asarray(snapshot.S), line_ids=tuple(int(i) for i in live),
                            n_lines_total=len(case.lines), n_gens=n_gen, gen_incidence=Cg,
                            fixed_withdrawal=fixed, param_withdrawal=P,
                            param_labels=tuple(case.parameter_labels))
    return MppProblem(A=A, b=b, E=E, c=snapshot.linear_cost.astype(float),
                      box_lo=lo, box_hi=hi, H=None if qc is None else np.diag(qc),
                      eq_pairs=((0, 1),), layout=layout)


@dataclass(frozen=True)
class AffineSolution:
    """Optimizer and multipliers as affine functions of theta on one basis.

    ``y_coef``/``y_off`` cover ``rows`` only, with equality representatives
    carrying their free multiplier.
    """

    rows: tuple[int, ...]
    x_coef: np.ndarray
    x_off: np.ndarray
    y_coef: np.ndarray
    y_off: np.ndarray

    def x(self, theta) -> np.ndarray:
        return self.x_coef @ theta + self.x_off

    def y(self, theta) -> np.ndarray:
        return self.y_coef @ theta + self.y_off


def affine_solution(p: MppProblem, rows: Sequence[int], cond_limit: float = 1e10
                    ) -> AffineSolution:
    """Closed-form optimizer/multiplier maps for a fixed set of tight rows.

    Linear cost needs ``A_rows`` square and invertible; quadratic cost
    needs linearly independent rows.
    """
    rows = tuple(int(i) for i in rows)
    AI, bI, EI = p.A[list(rows)], p.b[list(rows)], p.E[list(rows)]
    k = p.n_params
    if not p.is_quadratic:
        if AI.shape[0] != p.n_vars:
            raise DegenerateActiveSetError(
                f"{AI.shape[0]} independent tight rows for {p.n_vars} variables")
        if np.linalg.cond(AI) > cond_limit:
            raise DegenerateActiveSetError("active rows are linearly dependent")
        inv = np.linalg.inv(AI)
        x_coef, x_off = inv @ EI, inv @ bI
        y_off = -np.linalg.solve(AI.T, p.c)
        return AffineSolution(rows, x_coef, x_off, np.zeros((len(rows), k)), y_off)
    Hi = p.H_inv
    if AI.shape[0] > p.n_vars:
        raise DegenerateActiveSetError("more active rows than variables")
    if AI.shape[0] == 0:
        x_off = -Hi @ p.c
        return AffineSolution(rows, np.zeros((p.n_vars, k)), x_off,
                              np.zeros((0, k)), np.zeros(0))
    M = AI @ Hi @ AI.T
    if np.linalg.cond(M) > cond_limit:
        raise DegenerateActiveSetError("active rows are linearly dependent")
    Minv = np.linalg.inv(M)
    y_coef = -Minv @ EI
    y_off = -Minv @ (bI + AI @ Hi @ p.c)
    x_coef = -Hi @ AI.T @ y_coef
    x_off = -Hi @ (p.c + AI.T @ y_off)
    return AffineSolution(rows, x_coef, x_off, y_coef, y_off)
