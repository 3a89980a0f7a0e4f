"""Dense two-phase revised simplex for equality-form linear programs.

Solves min c.x subject to A x = b, x >= 0 at desk scale (a few thousand
variables, a few hundred rows).  The basis inverse is kept explicitly and
updated by eta pivots with periodic refactorization.  Pricing is Dantzig's
rule with a permanent switch to Bland's rule after a stall, which
suffices to escape the degenerate cycling that transportation problems
can produce.  Redundant rows surface as undrivable artificial variables
after phase 1 and are dropped; their dual multipliers are reported as 0.

Every solve returns a certificate: primal residual, worst dual
infeasibility, duality gap, and complementary slackness defect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError

_PIVOT_TOL = 1e-9
_REFACTOR_EVERY = 40
_STALL_LIMIT = 200


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective: float
    dual: np.ndarray
    reduced_costs: np.ndarray
    iterations: int
    primal_residual: float
    dual_infeasibility: float
    duality_gap: float
    complementarity: float
    dropped_rows: tuple[int, ...]


def _refactor(A, basis, b):
    B = A[:, basis]
    try:
        Binv = np.linalg.inv(B)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"basis matrix became singular: {exc}") from exc
    return Binv, Binv @ b


def _restore(A, basis, b):
    """Refactor and certify that the basis is still primal feasible."""
    Binv, xB = _refactor(A, basis, b)
    neg = float(np.min(xB)) if xB.size else 0.0
    if neg < -1e-7 * (1.0 + float(np.max(np.abs(b)))):
        raise SolverError(f"basis lost primal feasibility (min value {neg:.3e})")
    np.clip(xB, 0.0, None, out=xB)
    return Binv, xB


def _core(A, b, c, basis, Binv, xB, max_iter, tol_d):
    """Primal simplex iterations; mutates basis/Binv/xB, returns iteration count."""
    m, n = A.shape
    bland = False
    stall = 0
    last_obj = np.inf
    pivots_since_refactor = 0
    # Harris ratio-test slack: basics may dip this far below zero so the
    # leaving-row choice can favor large pivot elements; refactors clip
    # the dip away and _restore certifies it stayed negligible
    b_scale = 1.0 + (float(np.max(np.abs(b))) if b.size else 0.0)
    feas_delta = 1e-10 * b_scale
    it = 0
    while it < max_iter:
        y = c[basis] @ Binv
        d = c - y @ A
        d[basis] = 0.0
        if bland:
            eligible = np.flatnonzero(d < -tol_d)
            j = int(eligible[0]) if eligible.size else -1
        else:
            j = int(np.argmin(d))
            if d[j] >= -tol_d:
                j = -1
        if j < 0:
            # eta drift can fake optimality on badly scaled costs, so
            # confirm on a fresh factorization before accepting it
            if pivots_since_refactor == 0:
                return it
            Binv[:], xB[:] = _restore(A, basis, b)
            pivots_since_refactor = 0
            continue
        it += 1
        u = Binv @ A[:, j]
        if not np.any(u > _PIVOT_TOL):
            raise SolverError(f"objective unbounded below (column {j})", iterations=it)
        # Every even slightly positive row bounds theta: rows with u below
        # the pivot tolerance cannot be chosen, but skipping them in the
        # bound would let theta push them negative by theta * u.
        rows = np.flatnonzero(u > 1e-12)
        ratios = xB[rows] / u[rows]
        theta_max = float(np.min((xB[rows] + feas_delta) / u[rows]))
        feasible = ratios <= theta_max
        cand = rows[feasible & (u[rows] > _PIVOT_TOL)]
        if cand.size == 0:
            cand = rows[feasible]
        if cand.size == 0:
            cand = rows[[int(np.argmin(ratios))]]
        if bland:
            r = int(cand[np.argmin(basis[cand])])
        else:
            r = int(cand[np.argmax(u[cand])])
        theta = max(xB[r] / u[r], 0.0)
        # a small pivot element or a long step amplifies any eta-update
        # drift into real infeasibility, so risky pivots are only taken
        # straight off a fresh factorization
        if pivots_since_refactor > 0 and (u[r] < 1e-4 or theta > 10.0 * b_scale):
            Binv[:], xB[:] = _restore(A, basis, b)
            pivots_since_refactor = 0
            it -= 1
            continue
        xB -= theta * u
        xB[r] = theta
        np.clip(xB, 0.0, None, out=xB)
        Br = Binv[r] / u[r]
        Binv -= np.outer(u, Br)
        Binv[r] = Br
        basis[r] = j
        pivots_since_refactor += 1
        if pivots_since_refactor >= _REFACTOR_EVERY:
            Binv[:], xB[:] = _restore(A, basis, b)
            pivots_since_refactor = 0
        obj = float(c[basis] @ xB)
        if obj < last_obj - 1e-12 * (1.0 + abs(last_obj)):
            stall = 0
        else:
            stall += 1
            if stall > _STALL_LIMIT and not bland:
                bland = True
        last_obj = obj
    raise SolverError(
        f"simplex did not converge within {max_iter} iterations", iterations=max_iter
    )


def solve_lp(c, A, b, max_iter: int = 50_000) -> LpSolution:
    """Solve min c.x s.t. A x = b, x >= 0; raises SolverError on failure."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.array(c, dtype=float)
    if A.ndim != 2 or A.shape != (b.size, c.size):
        raise SolverError(
            f"shape mismatch: A {A.shape}, b {b.shape}, c {c.shape}"
        )
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    # Phase 1: artificial basis.
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = np.arange(n, n + m)
    Binv = np.eye(m)
    xB = b.copy()
    tol1 = 1e-9
    iters = _core(A1, b, c1, basis, Binv, xB, max_iter, tol1)
    infeas = float(c1[basis] @ xB)
    if infeas > 1e-7 * (1.0 + float(np.abs(b).sum())):
        raise SolverError(f"problem infeasible (phase-1 objective {infeas:.3e})")

    # Drive artificial variables out of the basis; undrivable rows are
    # redundant.  Each swap is degenerate (the artificial sits at level
    # zero), so only Binv is eta-updated and xB is left for the refactor.
    redundant = []
    for r in range(m):
        if basis[r] < n:
            continue
        row_vals = Binv[r] @ A
        row_vals[basis[basis < n]] = 0.0
        candidates = np.flatnonzero(np.abs(row_vals) > 1e-7)
        entered = False
        for j in candidates:
            if j in basis:
                continue
            u = Binv @ A1[:, j]
            if abs(u[r]) <= _PIVOT_TOL:
                continue
            Br = Binv[r] / u[r]
            Binv -= np.outer(u, Br)
            Binv[r] = Br
            basis[r] = j
            entered = True
            break
        if not entered:
            redundant.append(r)

    if redundant:
        keep = np.setdiff1d(np.arange(m), np.array(redundant))
        A = A[keep]
        b = b[keep]
        basis = np.array([bi for r, bi in enumerate(basis) if r not in set(redundant)])
        if np.any(basis >= n):
            raise SolverError("redundancy removal left an artificial variable basic")
        kept_rows = keep
    else:
        kept_rows = np.arange(m)
        if np.any(basis >= n):
            raise SolverError("an artificial variable remained basic after phase 1")
    Binv, xB = _restore(A, basis, b)

    # Phase 2 on the reduced system.
    c_scale = float(np.max(np.abs(c))) if c.size else 0.0
    tol2 = 1e-9 * (1.0 + c_scale)
    iters += _core(A, b, c, basis, Binv, xB, max_iter, tol2)

    # The Harris slack can leave the optimal basis a hair outside the
    # nonnegative orthant.  Dual simplex steps repair that exactly while
    # keeping the reduced costs nonnegative; if a row cannot be repaired
    # the dip is below the _restore certificate and the clip stands.
    Binv, xB = _refactor(A, basis, b)
    b_scale = 1.0 + (float(np.max(np.abs(b))) if b.size else 0.0)
    guard = 0
    while xB.size and float(np.min(xB)) < -1e-12 * b_scale and guard < 50:
        r = int(np.argmin(xB))
        w = Binv[r] @ A
        w[basis] = 0.0
        eligible = np.flatnonzero(w < -_PIVOT_TOL)
        if eligible.size == 0:
            break
        d = c - (c[basis] @ Binv) @ A
        j = int(eligible[np.argmin(d[eligible] / -w[eligible])])
        basis[r] = j
        guard += 1
        Binv, xB = _refactor(A, basis, b)
    np.clip(xB, 0.0, None, out=xB)

    x = np.zeros(n)
    x[basis] = xB
    y_kept = c[basis] @ Binv
    d = c - y_kept @ A
    dual = np.zeros(m)
    dual[kept_rows] = y_kept
    dual[np.asarray(flip, dtype=bool)] *= -1.0

    objective = float(c @ x)
    primal_residual = float(np.max(np.abs(A @ x - b))) if m else 0.0
    dual_infeasibility = float(max(0.0, -np.min(d))) if n else 0.0
    gap = abs(objective - float(b @ y_kept))
    complementarity = float(np.max(np.abs(x * d))) if n else 0.0
    dropped = tuple(int(r) for r in redundant)
    return LpSolution(
        x=x,
        objective=objective,
        dual=dual,
        reduced_costs=d,
        iterations=iters,
        primal_residual=primal_residual,
        dual_infeasibility=dual_infeasibility,
        duality_gap=gap,
        complementarity=complementarity,
        dropped_rows=dropped,
    )
