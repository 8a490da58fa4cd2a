"""Real-time DC-OPF dispatch, ex-ante LMPs and congestion patterns."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateActiveSetError
from .mpp import (MppProblem, affine_solution, build_mpp, lmp_from_multipliers,
                  price_from_rows)
from .network import SystemSnapshot
from .qp import solve_qp

BINDING_TOL = 1e-7
MAX_BASIS_CANDIDATES = 50_000


@dataclass(frozen=True)
class DispatchSolution:
    theta: np.ndarray
    g: np.ndarray
    objective: float
    y: np.ndarray                  # one nonnegative multiplier per MPP row
    active_set: tuple[int, ...]    # rows tight at the optimizer
    basis: tuple[int, ...]         # rows defining the affine solution maps
    basis_multipliers: np.ndarray  # free multipliers on ``basis`` rows
    lam: float | None = None
    mu_plus: np.ndarray | None = None
    mu_minus: np.ndarray | None = None
    gen_upper_duals: np.ndarray | None = None
    gen_lower_duals: np.ndarray | None = None
    iterations: int = 0


def tight_rows(p: MppProblem, theta, x) -> tuple[int, ...]:
    rhs = p.rhs(theta)
    slack = rhs - p.A @ x
    tol = BINDING_TOL * (1.0 + np.abs(rhs))
    return tuple(int(i) for i in np.flatnonzero(slack <= tol))


def _dual_ok(p: MppProblem, rows, y_rows) -> bool:
    eq = set(p.eq_rows)
    tol = BINDING_TOL * (1.0 + np.abs(p.c).max(initial=0.0))
    return all(v >= -tol for r, v in zip(rows, y_rows) if r not in eq)


def select_basis(p: MppProblem, theta, x, tight, fallback) -> tuple[int, ...]:
    """Pick the rows that define the solution maps at an optimizer.

    Linear cost: the lexicographically smallest square, invertible and
    dual-feasible subset of the tight rows. Quadratic cost: the whole tight
    set when it is independent and dual feasible, otherwise the solver's
    final working set.
    """
    eq = list(p.eq_rows)
    mirrors = set(p.mirror_rows)
    cand = sorted(i for i in tight if i not in mirrors and i not in eq)
    theta = np.asarray(theta, dtype=float)
    if not p.is_quadratic:
        need = p.n_vars - len(eq)
        combos = itertools.combinations(cand, need) if need >= 0 else iter(())
        for n_tried, combo in enumerate(combos):
            if n_tried >= MAX_BASIS_CANDIDATES:
                break
            rows = tuple(sorted(eq + list(combo)))
            try:
                aff = affine_solution(p, rows)
            except DegenerateActiveSetError:
                continue
            if _dual_ok(p, rows, aff.y_off):
                return rows
    else:
        rows = tuple(sorted(eq + cand))
        try:
            aff = affine_solution(p, rows)
            scale = 1.0 + np.abs(x).max(initial=0.0)
            if (_dual_ok(p, rows, aff.y(theta))
                    and np.abs(aff.x(theta) - x).max(initial=0.0) <= 1e-6 * scale):
                return rows
        except DegenerateActiveSetError:
            pass
    rows = tuple(sorted(set(eq) | set(fallback)))
    affine_solution(p, rows)  # raises when even the solver's set is degenerate
    return rows


def solve_mpp(p: MppProblem, theta) -> DispatchSolution:
    """Solve the program at one parameter value.

    The returned primal and dual values are evaluated through the affine
    maps of the selected basis, so repeated solves that land on the same
    basis are reproducible to the last bit.
    """
    theta = np.asarray(theta, dtype=float)
    rhs = p.rhs(theta)
    eq = list(p.eq_rows)
    ineq = p.ineq_rows
    res = solve_qp(p.c, p.A[ineq], rhs[ineq], p.A[eq], rhs[eq], H=p.H)
    tight = tight_rows(p, theta, res.x)
    fallback = [int(ineq[k]) for k in res.working_set]
    basis = select_basis(p, theta, res.x, tight, fallback)
    aff = affine_solution(p, basis)
    x = aff.x(theta)
    y_rows = aff.y(theta)
    lam, mu_plus, mu_minus, y_full = p.split_multipliers(basis, y_rows)
    obj = float(p.c @ x + (0.5 * x @ p.H @ x if p.H is not None else 0.0))
    active = tight_rows(p, theta, x)
    gen_up = gen_lo = None
    if p.layout is not None:
        gen_up = y_full[p.layout.gen_plus]
        gen_lo = y_full[p.layout.gen_minus]
    return DispatchSolution(theta=theta, g=x, objective=obj, y=y_full,
                            active_set=tuple(sorted(set(active) | set(basis))),
                            basis=basis, basis_multipliers=y_rows, lam=lam,
                            mu_plus=mu_plus, mu_minus=mu_minus,
                            gen_upper_duals=gen_up, gen_lower_duals=gen_lo,
                            iterations=res.iterations)


def solve_dcopf(snapshot: SystemSnapshot, theta, mpp: MppProblem | None = None
                ) -> DispatchSolution:
    """Dispatch at parameter ``theta`` (stochastic loads, then stochastic units)."""
    p = build_mpp(snapshot) if mpp is None else mpp
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (p.n_params,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({p.n_params},)")
    return solve_mpp(p, theta)


def extract_lmp(sol: DispatchSolution, S: np.ndarray) -> np.ndarray:
    if sol.lam is None:
        raise ValueError("solution carries no dispatch multipliers")
    return lmp_from_multipliers(sol.lam, sol.mu_plus, sol.mu_minus, np.asarray(S))


def solution_price(p: MppProblem, sol: DispatchSolution) -> np.ndarray:
    """Price vector of a direct solve (LMPs for dispatch programs)."""
    return price_from_rows(p, sol.basis, sol.basis_multipliers)


def line_flows(sol: DispatchSolution, snapshot: SystemSnapshot) -> np.ndarray:
    case = snapshot.case
    fixed, P = case.withdrawal_map()
    injection = snapshot.gen_incidence() @ sol.g - fixed - P @ sol.theta
    return np.asarray(snapshot.S) @ injection


def extract_congestion(sol: DispatchSolution, snapshot: SystemSnapshot,
                       tol: float = 1e-6) -> tuple[int, ...]:
    """Per-line status: +1 at the upper limit, -1 at the lower limit, else 0."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    flows = line_flows(sol, snapshot)
    status = []
    for f, ln in zip(flows, snapshot.case.lines):
        if not ln.in_service:
            status.append(0)
        elif f >= ln.max_flow - tol:
            status.append(1)
        elif f <= ln.min_flow + tol:
            status.append(-1)
        else:
            status.append(0)
    return tuple(status)


def dual_objective(p: MppProblem, sol: DispatchSolution) -> float:
    """Lagrangian dual value at the returned multipliers."""
    rhs = p.rhs(sol.theta)
    if p.H is None:
        return float(-rhs @ sol.y)
    # q(y) = -1/2 (c + A'y)' H^-1 (c + A'y) - rhs'y
    r = p.c + p.A.T @ sol.y
    return float(-0.5 * r @ p.H_inv @ r - rhs @ sol.y)
