"""Exact optimal transport on finite spaces, including transport to a hull.

All solves go through the in-repo simplex (:mod:`mixlab.simplex`) and
return duality certificates.  ``ot_to_hull`` minimizes transport cost over
couplings whose second marginal ranges over the reweighted hull of a
mixture, by adding the hull coefficients as LP variables.  The
corresponding dual program

    max over (f, g) with f(x) + g(y) <= c(x, y) of  mu(f) + min_i pi_i(g)

is solved independently by ``dual_to_hull`` and certified against the
primal value; tightening g to the c-conjugate of f never hurts, which is
also certified.  ``w2_1d`` computes the squared 2-Wasserstein distance of
measures with shared 1D coordinates through the exact quantile coupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionMismatchError,
    InvariantViolationError,
)
from .measures import (
    FiniteMeasure,
    MixtureModel,
    StateSpace,
    _require_same_space,
    triangle_defect,
)
from .simplex import solve_lp

_GAP_TOL = 1e-6
_MARGINAL_TOL = 1e-9
_POTENTIAL_TOL = 1e-9
_METRIC_CHECK_LIMIT = 400


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """A finite, nonnegative cost with zero diagonal on a state space."""

    space: StateSpace
    matrix: np.ndarray
    kind: str = "custom"
    is_metric: bool = False

    def __post_init__(self):
        c = np.array(self.matrix, dtype=float)
        n = self.space.size
        if c.shape != (n, n):
            raise DimensionMismatchError(f"cost shape {c.shape}, expected ({n}, {n})")
        if not np.all(np.isfinite(c)):
            raise ConfigurationError("infinite costs are not supported")
        if np.any(c < 0):
            raise ConfigurationError("costs must be nonnegative")
        if np.max(np.abs(np.diag(c))) > 0:
            raise ConfigurationError("cost diagonal must be zero")
        object.__setattr__(self, "matrix", _readonly(c))

    @classmethod
    def from_state_metric(cls, space: StateSpace, kind: str = "metric") -> "CostMatrix":
        """Build from the space metric: ``metric``, ``squared_metric`` or ``zero_one``."""
        if kind == "zero_one":
            c = 1.0 - np.eye(space.size)
            return cls(space, c, kind=kind, is_metric=True)
        if space.metric is None:
            raise ConfigurationError(f"cost kind {kind!r} needs a metric on the space")
        if kind == "metric":
            return cls(space, space.metric.copy(), kind=kind, is_metric=True)
        if kind == "squared_metric":
            return cls(space, space.metric**2, kind=kind, is_metric=False)
        raise ConfigurationError(f"unknown cost kind {kind!r}")

    @classmethod
    def from_matrix(cls, space: StateSpace, matrix) -> "CostMatrix":
        c = np.array(matrix, dtype=float)
        metric = False
        if space.size <= _METRIC_CHECK_LIMIT and c.size:
            sym = np.max(np.abs(c - c.T)) <= 1e-12
            off = c[~np.eye(space.size, dtype=bool)]
            pos = off.size == 0 or np.min(off) > 0
            metric = bool(sym and pos and triangle_defect(c) <= 1e-9)
        return cls(space, c, kind="custom", is_metric=metric)


@dataclass(frozen=True, eq=False)
class Coupling:
    """A nonnegative matrix with certified marginals."""

    space: StateSpace
    matrix: np.ndarray
    row_residual: float
    col_residual: float

    @classmethod
    def certified(cls, space, matrix, mu: FiniteMeasure, nu: FiniteMeasure) -> "Coupling":
        g = np.array(matrix, dtype=float)
        g[np.abs(g) < 1e-15] = 0.0
        if np.any(g < 0):
            raise InvariantViolationError("coupling has a negative entry")
        row = float(np.max(np.abs(g.sum(axis=1) - mu.mass)))
        col = float(np.max(np.abs(g.sum(axis=0) - nu.mass)))
        if max(row, col) > _MARGINAL_TOL:
            raise InvariantViolationError(
                f"coupling marginals off by {max(row, col):.3e}",
                residual=max(row, col),
            )
        return cls(space=space, matrix=_readonly(g), row_residual=row, col_residual=col)


@dataclass(frozen=True)
class AlphaFunction:
    """An increasing convex rate function alpha(x) = (x / scale)^exponent."""

    family: str
    scale: float
    exponent: float

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ConfigurationError("alpha scale must be positive and finite")
        if self.exponent < 1:
            raise ConfigurationError("alpha exponent must be >= 1 for convexity")

    @classmethod
    def power(cls, scale: float, exponent: float) -> "AlphaFunction":
        return cls(family="power", scale=scale, exponent=exponent)

    @classmethod
    def w1(cls, C: float) -> "AlphaFunction":
        """alpha(x) = x^2 / (4 C^2), the metric-cost rate function."""
        return cls(family="w1", scale=2.0 * C, exponent=2.0)

    def __call__(self, x: float) -> float:
        if x < 0:
            raise ConfigurationError("alpha is defined on nonnegative arguments")
        return float((x / self.scale) ** self.exponent)


@dataclass(frozen=True, eq=False)
class OtSolution:
    value: float
    coupling: Coupling
    f: np.ndarray
    g: np.ndarray
    duality_gap: float
    complementarity: float
    iterations: int


def _check_potentials(f, g, cost, scale):
    worst = float(np.max(f[:, None] + g[None, :] - cost.matrix))
    if worst > _POTENTIAL_TOL * scale:
        raise InvariantViolationError(
            f"dual potentials violate feasibility by {worst:.3e}", residual=worst
        )


def ot_cost(mu: FiniteMeasure, nu: FiniteMeasure, cost: CostMatrix) -> OtSolution:
    """Exact transport cost T_c(mu, nu) with optimal coupling and potentials."""
    _require_same_space(mu, nu)
    if not cost.space.same_as(mu.space):
        raise DimensionMismatchError("cost lives on a different state space")
    n = mu.space.size
    A = np.zeros((2 * n - 1, n * n))
    b = np.zeros(2 * n - 1)
    for x in range(n):
        A[x, x * n : (x + 1) * n] = 1.0
        b[x] = mu.mass[x]
    for y in range(n - 1):
        A[n + y, y::n] = 1.0
        b[n + y] = nu.mass[y]
    sol = solve_lp(cost.matrix.ravel(), A, b)
    value = sol.objective
    scale = 1.0 + abs(value) + float(np.max(cost.matrix))
    if sol.duality_gap > _GAP_TOL * (1.0 + abs(value)) or sol.primal_residual > _MARGINAL_TOL:
        raise InvariantViolationError(
            f"transport solve failed certification (gap {sol.duality_gap:.3e}, "
            f"marginal residual {sol.primal_residual:.3e})",
            residual=max(sol.duality_gap, sol.primal_residual),
        )
    f = sol.dual[:n].copy()
    g = np.concatenate([sol.dual[n:], [0.0]])
    _check_potentials(f, g, cost, scale)
    coupling = Coupling.certified(mu.space, sol.x.reshape(n, n), mu, nu)
    return OtSolution(
        value=max(value, 0.0),
        coupling=coupling,
        f=_readonly(f),
        g=_readonly(g),
        duality_gap=sol.duality_gap,
        complementarity=sol.complementarity,
        iterations=sol.iterations,
    )


@dataclass(frozen=True, eq=False)
class HullTransportSolution:
    """Transport from mu to the nearest reweighted mixture."""

    value: float
    lambda_hat: FiniteMeasure
    coupling: Coupling
    f: np.ndarray
    g: np.ndarray
    shift: float
    duality_gap: float
    iterations: int


def ot_to_hull(mu: FiniteMeasure, mix: MixtureModel, cost: CostMatrix) -> HullTransportSolution:
    """min over lambda in the simplex of T_c(mu, sum_i lambda_i pi_i).

    One linear program: couplings and hull coefficients are optimized
    jointly.  The dual potentials satisfy f(x) + g(y) <= c(x, y) with
    shift <= pi_i(g) for every i, certified on return.
    """
    _require_same_space(mu, mix.parent, "measure and mixture")
    if not cost.space.same_as(mu.space):
        raise DimensionMismatchError("cost lives on a different state space")
    n = mu.space.size
    m = mix.m
    nvar = n * n + m
    A = np.zeros((2 * n, nvar))
    b = np.zeros(2 * n)
    for x in range(n):
        A[x, x * n : (x + 1) * n] = 1.0
        b[x] = mu.mass[x]
    for y in range(n - 1):
        A[n + y, y::n] = 1.0
        A[n + y, n * n :] = -mix.component_matrix[:, y]
    A[2 * n - 1, n * n :] = 1.0
    b[2 * n - 1] = 1.0
    c_lp = np.concatenate([cost.matrix.ravel(), np.zeros(m)])
    sol = solve_lp(c_lp, A, b)
    value = sol.objective
    if sol.duality_gap > _GAP_TOL * (1.0 + abs(value)) or sol.primal_residual > _MARGINAL_TOL:
        raise InvariantViolationError(
            f"hull transport solve failed certification (gap {sol.duality_gap:.3e}, "
            f"marginal residual {sol.primal_residual:.3e})",
            residual=max(sol.duality_gap, sol.primal_residual),
        )
    lam = FiniteMeasure(mix.index_space, np.clip(sol.x[n * n :], 0.0, None))
    target = mix.reweighted(lam)
    coupling = Coupling.certified(mu.space, sol.x[: n * n].reshape(n, n), mu, target)
    f = sol.dual[:n].copy()
    g = np.concatenate([sol.dual[n : 2 * n - 1], [0.0]])
    shift = float(sol.dual[2 * n - 1])
    scale = 1.0 + abs(value) + float(np.max(cost.matrix))
    _check_potentials(f, g, cost, scale)
    floor = float(np.min(mix.component_matrix @ g))
    if shift > floor + _POTENTIAL_TOL * scale:
        raise InvariantViolationError(
            f"dual shift {shift!r} exceeds min_i pi_i(g) = {floor!r}",
            residual=shift - floor,
        )
    return HullTransportSolution(
        value=max(value, 0.0),
        lambda_hat=lam,
        coupling=coupling,
        f=_readonly(f),
        g=_readonly(g),
        shift=shift,
        duality_gap=sol.duality_gap,
        iterations=sol.iterations,
    )


def c_conjugate(f, cost: CostMatrix) -> np.ndarray:
    """f^c(y) = min_x c(x, y) - f(x)."""
    f = np.asarray(f, dtype=float)
    if f.shape != (cost.space.size,):
        raise DimensionMismatchError("potential has wrong length")
    return np.min(cost.matrix - f[:, None], axis=0)


@dataclass(frozen=True, eq=False)
class DualHullSolution:
    """The dual hull-transport program, solved directly."""

    value: float
    f: np.ndarray
    g: np.ndarray
    active_component: int
    primal: HullTransportSolution
    tightened_value: float
    duality_gap: float
    iterations: int


def dual_to_hull(mu: FiniteMeasure, mix: MixtureModel, cost: CostMatrix) -> DualHullSolution:
    """max over f(x) + g(y) <= c(x, y) of mu(f) + min_i pi_i(g).

    Solved as its own linear program (free potentials split into signed
    parts, one slack per cost entry) and certified against the primal
    ``ot_to_hull`` value within 1e-6 relative tolerance, which is the
    numerical content of strong duality for the hull program.
    """
    _require_same_space(mu, mix.parent, "measure and mixture")
    n = mu.space.size
    m = mix.m
    # variables: f+ f- (2n), g+ g- (2n), t+ t- (2), slack_c (n^2), slack_t (m)
    nf = 2 * n
    ng = 2 * n
    base_t = nf + ng
    base_sc = base_t + 2
    base_st = base_sc + n * n
    nvar = base_st + m
    rows = n * n + m
    A = np.zeros((rows, nvar))
    b = np.zeros(rows)
    r = 0
    for x in range(n):
        for y in range(n):
            A[r, x] = 1.0
            A[r, n + x] = -1.0
            A[r, nf + y] = 1.0
            A[r, nf + n + y] = -1.0
            A[r, base_sc + r] = 1.0
            b[r] = cost.matrix[x, y]
            r += 1
    for i in range(m):
        A[r, base_t] = 1.0
        A[r, base_t + 1] = -1.0
        A[r, nf : nf + n] = -mix.component_matrix[i]
        A[r, nf + n : nf + 2 * n] = mix.component_matrix[i]
        A[r, base_st + i] = 1.0
        r += 1
    c_lp = np.zeros(nvar)
    c_lp[:n] = -mu.mass
    c_lp[n : 2 * n] = mu.mass
    c_lp[base_t] = -1.0
    c_lp[base_t + 1] = 1.0
    sol = solve_lp(c_lp, A, b)
    f = sol.x[:n] - sol.x[n : 2 * n]
    g = sol.x[nf : nf + n] - sol.x[nf + n : nf + 2 * n]
    value = float(mu.mass @ f + np.min(mix.component_matrix @ g))
    scale = 1.0 + abs(value) + float(np.max(cost.matrix))
    _check_potentials(f, g, cost, scale)

    primal = ot_to_hull(mu, mix, cost)
    if abs(value - primal.value) > _GAP_TOL * (1.0 + abs(primal.value)):
        raise InvariantViolationError(
            f"dual value {value!r} disagrees with primal {primal.value!r}",
            residual=abs(value - primal.value),
        )
    fc = c_conjugate(f, cost)
    tightened = float(mu.mass @ f + np.min(mix.component_matrix @ fc))
    if tightened < value - _GAP_TOL * (1.0 + abs(value)):
        raise InvariantViolationError(
            f"conjugate tightening lost value: {tightened!r} < {value!r}",
            residual=value - tightened,
        )
    active = int(np.argmin(mix.component_matrix @ g))
    return DualHullSolution(
        value=value,
        f=_readonly(f.copy()),
        g=_readonly(g.copy()),
        active_component=active,
        primal=primal,
        tightened_value=tightened,
        duality_gap=sol.duality_gap,
        iterations=sol.iterations,
    )


def w2_1d(mu: FiniteMeasure, nu: FiniteMeasure) -> float:
    """Squared W2 distance of measures with shared 1D coordinates.

    Exact quantile-coupling formula for atomic measures: integrate the
    squared difference of the two quantile functions over (0, 1), which
    are step functions with jumps at the merged cumulative masses.
    """
    _require_same_space(mu, nu)
    if mu.space.coords is None:
        raise ConfigurationError("w2_1d needs coordinates on the state space")
    order = np.argsort(mu.space.coords, kind="stable")
    x = mu.space.coords[order]
    cp = np.cumsum(mu.mass[order])
    cq = np.cumsum(nu.mass[order])
    levels = np.unique(np.concatenate([[0.0], cp, cq]))
    levels = np.clip(levels, 0.0, min(cp[-1], cq[-1]))
    levels = np.unique(levels)
    mids = 0.5 * (levels[:-1] + levels[1:])
    widths = np.diff(levels)
    ip = np.minimum(np.searchsorted(cp, mids, side="left"), x.size - 1)
    iq = np.minimum(np.searchsorted(cq, mids, side="left"), x.size - 1)
    diff = x[ip] - x[iq]
    return float(np.sum(widths * diff * diff))
