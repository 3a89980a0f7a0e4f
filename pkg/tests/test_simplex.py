"""Dense primal simplex against scipy's HiGHS on equality-form programs."""

import numpy as np
import pytest
from scipy.optimize import linprog

from mixlab.errors import SolverError
from mixlab.rng import stream
from mixlab.simplex import solve_lp


def _transport_lp(m, n, rng):
    """min <C, P> over couplings of random marginals, in flattened form."""
    a = rng.uniform(0.1, 1.0, size=m)
    a /= a.sum()
    b = rng.uniform(0.1, 1.0, size=n)
    b /= b.sum()
    C = rng.uniform(0.0, 2.0, size=(m, n))
    A = np.zeros((m + n, m * n))
    for i in range(m):
        A[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        A[m + j, j::n] = 1.0
    rhs = np.concatenate([a, b])
    return C.ravel(), A, rhs


def test_matches_highs_on_transport_instances():
    rng = stream(0, "lp-transport")
    for _ in range(15):
        m = int(rng.integers(2, 7))
        n = int(rng.integers(2, 7))
        c, A, b = _transport_lp(m, n, rng)
        sol = solve_lp(c, A, b)
        ref = linprog(c, A_eq=A, b_eq=b, method="highs")
        assert ref.status == 0
        assert sol.objective == pytest.approx(ref.fun, abs=1e-9)
        assert sol.primal_residual <= 1e-9
        assert sol.duality_gap <= 1e-9 * (1.0 + abs(sol.objective))
        assert sol.complementarity <= 1e-9 * (1.0 + abs(sol.objective))
        assert np.all(sol.x >= 0)


def test_matches_highs_on_random_feasible_instances():
    # generate around a known feasible point, then bound the feasible set
    # with a simplex row so the minimum is finite
    rng = stream(1, "lp-rand")
    for _ in range(15):
        m = int(rng.integers(2, 5))
        n = int(rng.integers(m + 1, 9))
        A = rng.normal(size=(m, n))
        x0 = rng.uniform(0.1, 1.0, size=n)
        A = np.vstack([A, np.ones(n)])
        b = A @ x0
        c = rng.normal(size=n)
        sol = solve_lp(c, A, b)
        ref = linprog(c, A_eq=A, b_eq=b, method="highs")
        assert ref.status == 0
        assert sol.objective == pytest.approx(ref.fun, abs=1e-8)
        assert np.abs(A @ sol.x - b).max() <= 1e-8


def test_dual_certificate():
    rng = stream(2, "lp-dual")
    c, A, b = _transport_lp(4, 5, rng)
    sol = solve_lp(c, A, b)
    # weak duality: b'y <= c'x with reduced costs c - A'y >= 0
    assert float(b @ sol.dual) <= sol.objective + 1e-9
    assert sol.reduced_costs.min() >= -1e-9
    assert sol.dual_infeasibility <= 1e-9


def test_degenerate_marginal_with_zero_mass():
    # one marginal entry is zero: the row forces a zero block in the plan
    c = np.array([1.0, 2.0, 3.0, 0.5])
    A = np.array(
        [
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 1.0],
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0],
        ]
    )
    b = np.array([1.0, 0.0, 0.3, 0.7])
    sol = solve_lp(c, A, b)
    ref = linprog(c, A_eq=A, b_eq=b, method="highs")
    assert sol.objective == pytest.approx(ref.fun, abs=1e-10)
    assert sol.x[2] == pytest.approx(0.0, abs=1e-12)
    assert sol.x[3] == pytest.approx(0.0, abs=1e-12)


def test_unbounded_raises():
    # x0 - x1 = 0 with objective -x0 runs off along the diagonal
    with pytest.raises(SolverError):
        solve_lp([-1.0, 0.0], [[1.0, -1.0]], [0.0])


def test_infeasible_raises():
    with pytest.raises(SolverError):
        solve_lp([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0])


def test_redundant_rows_are_dropped():
    # the transport system always has one dependent row
    rng = stream(3, "lp-redundant")
    c, A, b = _transport_lp(3, 3, rng)
    sol = solve_lp(c, A, b)
    assert len(sol.dropped_rows) >= 0  # bookkeeping exists
    ref = linprog(c, A_eq=A, b_eq=b, method="highs")
    assert sol.objective == pytest.approx(ref.fun, abs=1e-10)
