"""Dense primal active-set solver for small LPs and strictly convex QPs.

Solves ``min 1/2 x'Hx + c'x  s.t.  A_eq x = b_eq,  A x <= b`` where ``H`` is
either absent (LP) or positive definite. The LP path is a simplex method in
active-set clothing: once the working set reaches a vertex, the constraint
with the smallest index among those with negative multipliers is dropped
and ties in the ratio test also go to the smallest index (Bland's rule),
which rules out cycling.

A feasible start comes from a phase-one LP that minimises the largest
constraint violation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import InfeasibleError, SolverError, UnboundedError


@dataclass
class QPResult:
    x: np.ndarray
    y_eq: np.ndarray
    y: np.ndarray
    working_set: tuple[int, ...]
    objective: float
    iterations: int


def _null_space(M: np.ndarray, n: int) -> np.ndarray:
    if M.shape[0] == 0:
        return np.eye(n)
    Q, _ = sla.qr(M.T, mode="full")
    return Q[:, M.shape[0]:]


def _active_set(H, c, A_eq, b_eq, A, b, x, work, lp, max_iter, feas_tol):
    """Run the active-set loop from a feasible ``x``.

    ``work`` holds indices into the inequality rows; equality rows are
    always in the working set. Returns ``(x, y_eq, y, work, iterations)``.
    """
    n = x.size
    n_eq = A_eq.shape[0]
    work = list(work)
    scale = 1.0 + np.abs(c).max(initial=0.0)
    for it in range(1, max_iter + 1):
        g = c + (H @ x if H is not None else 0.0)
        AW = np.vstack([A_eq, A[work]]) if work else A_eq
        Z = _null_space(AW, n)
        p = np.zeros(n)
        if Z.shape[1]:
            zg = Z.T @ g
            if lp:
                if np.linalg.norm(zg) > 1e-11 * (np.linalg.norm(g) + scale):
                    p = -Z @ zg
            else:
                p = Z @ np.linalg.solve(Z.T @ H @ Z, -zg)
        if np.linalg.norm(p) <= 1e-12 * (1.0 + np.linalg.norm(x)):
            if AW.shape[0]:
                mult = np.linalg.lstsq(AW.T, -g, rcond=None)[0]
            else:
                mult = np.zeros(0)
            y_ineq = mult[n_eq:]
            dual_tol = 1e-9 * (np.linalg.norm(g) + scale)
            neg = [k for k in range(len(work)) if y_ineq[k] < -dual_tol]
            if not neg:
                y = np.zeros(A.shape[0])
                y[work] = np.maximum(y_ineq, 0.0)
                return x, mult[:n_eq], y, work, it
            if lp:
                drop = min(neg, key=lambda k: work[k])
            else:
                drop = min(neg, key=lambda k: (y_ineq[k], work[k]))
            work.pop(drop)
            continue
        # ratio test against the constraints outside the working set
        Ap = A @ p
        slack = b - A @ x
        in_work = np.zeros(A.shape[0], dtype=bool)
        in_work[work] = True
        step_tol = 1e-12 * (np.abs(A).sum(axis=1) * np.linalg.norm(p, np.inf) + 1e-300)
        blocking = np.where(~in_work & (Ap > step_tol))[0]
        alpha = np.inf if lp else 1.0
        hit = -1
        if blocking.size:
            ratios = np.maximum(slack[blocking], 0.0) / Ap[blocking]
            best = ratios.min()
            if best <= alpha:
                ties = blocking[ratios <= best + 1e-12 * (1.0 + abs(best))]
                hit = int(ties.min())
                alpha = max(best, 0.0)
        if not np.isfinite(alpha):
            raise UnboundedError("objective decreases without bound")
        x = x + alpha * p
        if hit >= 0:
            work.append(hit)
            work.sort()
    raise SolverError(f"active-set solver exceeded {max_iter} iterations")


def solve_qp(c, A, b, A_eq=None, b_eq=None, H=None, *, max_iter=None,
             feas_tol=1e-9) -> QPResult:
    """Solve the program; raises on infeasibility, unboundedness or stalls."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A = np.asarray(A, dtype=float).reshape(-1, n)
    b = np.asarray(b, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    lp = H is None
    if max_iter is None:
        max_iter = 50 * (A.shape[0] + n + 10)
    x, phase_iters = _phase_one(A, b, A_eq, b_eq, max_iter, feas_tol)
    x, y_eq, y, work, iters = _active_set(H, c, A_eq, b_eq, A, b, x, [], lp, max_iter, feas_tol)
    if lp and len(work) + A_eq.shape[0] < n:
        x, work = _slide_to_vertex(A_eq, A, b, x, work)
        x, y_eq, y, work, more = _active_set(None, c, A_eq, b_eq, A, b, x, work, True,
                                             max_iter, feas_tol)
        iters += more
    obj = float(c @ x + (0.5 * x @ H @ x if H is not None else 0.0))
    return QPResult(x, y_eq, y, tuple(work), obj, iters + phase_iters)


def _slide_to_vertex(A_eq, A, b, x, work):
    n = x.size
    work = list(work)
    while True:
        AW = np.vstack([A_eq, A[work]]) if work else A_eq
        Z = _null_space(AW, n)
        if Z.shape[1] == 0:
            return x, work
        d = Z[:, 0]
        if d[np.argmax(np.abs(d))] < 0:
            d = -d
        in_work = np.zeros(A.shape[0], dtype=bool)
        in_work[work] = True
        for direction in (d, -d):
            Ad = A @ direction
            cand = np.where(~in_work & (Ad > 1e-12 * np.abs(A).sum(axis=1)))[0]
            if cand.size:
                break
        else:
            raise UnboundedError("optimal face is unbounded")
        ratios = np.maximum(b[cand] - A[cand] @ x, 0.0) / Ad[cand]
        best = ratios.min()
        hit = int(cand[ratios <= best + 1e-12 * (1.0 + abs(best))].min())
        x = x + best * direction
        work.append(hit)
        work.sort()


def _phase_one(A, b, A_eq, b_eq, max_iter, feas_tol):
    """Find a feasible point by minimising the largest violation ``t``."""
    n = A.shape[1]
    if A_eq.shape[0]:
        x0 = np.linalg.lstsq(A_eq, b_eq, rcond=None)[0]
    else:
        x0 = np.zeros(n)
    viol = np.concatenate([A @ x0 - b, np.zeros(1)])
    scale = 1.0 + np.abs(b).max(initial=0.0) + np.abs(b_eq).max(initial=0.0)
    if viol.max() <= feas_tol * scale and (
            A_eq.shape[0] == 0 or np.abs(A_eq @ x0 - b_eq).max() <= feas_tol * scale):
        return x0, 0
    # variables (x, t): A x - t <= b, -t <= 0, equality rows kept exact
    Ap = np.vstack([np.hstack([A, -np.ones((A.shape[0], 1))]),
                    np.hstack([np.zeros((1, n)), -np.ones((1, 1))])])
    bp = np.concatenate([b, [0.0]])
    Aeq_p = np.hstack([A_eq, np.zeros((A_eq.shape[0], 1))])
    cp = np.zeros(n + 1)
    cp[-1] = 1.0
    z0 = np.concatenate([x0, [max(viol.max(), 0.0) + 1.0]])
    z, _, _, _, iters = _active_set(None, cp, Aeq_p, b_eq, Ap, bp, z0, [], True,
                                    max_iter, feas_tol)
    if z[-1] > feas_tol * scale:
        raise InfeasibleError(f"constraints violated by at least {z[-1]:.6g}")
    x = z[:n]
    if A_eq.shape[0]:
        x = x - np.linalg.lstsq(A_eq, A_eq @ x - b_eq, rcond=None)[0]
    return x, iters
