"""Finite probability measures, mixtures, and responsibility decompositions.

The objects here are deliberately small and immutable:

* :class:`StateSpace` names a finite set of states, optionally with real
  coordinates, string labels, and a metric.
* :class:`FiniteMeasure` is a probability vector on a state space.  Total
  mass is renormalized at construction and the applied correction recorded;
  entries below 1e-300 are flushed to exact zero so that support questions
  have crisp answers downstream.
* :class:`MixtureModel` is a finite mixture pi = sum_i w_i pi_i together
  with its reweighted hull {sum_i lambda_i pi_i : lambda in the simplex}.
* :func:`decompose` splits any mu absolutely continuous w.r.t. pi into
  responsibility weights lambda* and conditional measures mu_i with
  sum_i lambda*_i mu_i = mu, certifying the defining identities.

Divergences use natural logarithms and the exact-zero conventions
0 log 0 = 0 and KL = +inf when absolute continuity fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvariantViolationError,
    SupportError,
)

_FLUSH = 1e-300
_METRIC_TOL = 1e-9
_RECOMPOSE_TOL = 1e-12
_CHAIN_RULE_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def triangle_defect(d: np.ndarray, max_planes: int = 600) -> float:
    """Largest violation of d(x,z) <= d(x,y) + d(y,z); <= 0 means none.

    The scan over the intermediate point y is cubic, so spaces larger than
    ``max_planes`` are spot-checked on an evenly spaced subset of planes.
    """
    n = d.shape[0]
    if n <= max_planes:
        planes = range(n)
    else:
        planes = np.unique(np.linspace(0, n - 1, max_planes).astype(int))
    worst = 0.0
    for y in planes:
        best = d[:, y][:, None] + d[y, :][None, :]
        worst = max(worst, float(np.max(d - best)))
    return worst


@dataclass(frozen=True, eq=False)
class StateSpace:
    """A finite set of states.

    Parameters
    ----------
    size : int
        Number of states, at least 1.
    labels : tuple of str, optional
        Display names, one per state.
    coords : ndarray, optional
        Real coordinate per state (used by 1D transport and grid chains).
    metric : ndarray, optional
        Symmetric matrix of pairwise distances with zero diagonal,
        positive off-diagonal entries, and triangle defect below 1e-9.
    """

    size: int
    labels: tuple[str, ...] | None = None
    coords: np.ndarray | None = None
    metric: np.ndarray | None = None

    def __post_init__(self):
        if int(self.size) < 1:
            raise DimensionMismatchError("state space needs at least one state")
        object.__setattr__(self, "size", int(self.size))
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != self.size:
                raise DimensionMismatchError(
                    f"{len(labels)} labels for {self.size} states"
                )
            object.__setattr__(self, "labels", labels)
        if self.coords is not None:
            c = np.array(self.coords, dtype=float)
            if c.shape != (self.size,):
                raise DimensionMismatchError(
                    f"coords shape {c.shape}, expected ({self.size},)"
                )
            if not np.all(np.isfinite(c)):
                raise DimensionMismatchError("coords must be finite")
            object.__setattr__(self, "coords", _readonly(c))
        if self.metric is not None:
            d = np.array(self.metric, dtype=float)
            if d.shape != (self.size, self.size):
                raise DimensionMismatchError(
                    f"metric shape {d.shape}, expected square of size {self.size}"
                )
            if not np.all(np.isfinite(d)):
                raise DimensionMismatchError("metric must be finite")
            if np.max(np.abs(d - d.T)) > _METRIC_TOL:
                raise DimensionMismatchError("metric must be symmetric")
            if np.max(np.abs(np.diag(d))) > 0:
                raise DimensionMismatchError("metric diagonal must be zero")
            off = d[~np.eye(self.size, dtype=bool)]
            if off.size and np.min(off) <= 0:
                raise DimensionMismatchError("metric must be positive off-diagonal")
            if triangle_defect(d) > _METRIC_TOL:
                raise DimensionMismatchError("metric violates the triangle inequality")
            object.__setattr__(self, "metric", _readonly(d))

    @classmethod
    def line(cls, coords, labels=None) -> "StateSpace":
        """States on the real line with the |x - y| metric."""
        c = np.asarray(coords, dtype=float)
        if c.ndim != 1:
            raise DimensionMismatchError("line coords must be one-dimensional")
        if np.unique(c).size != c.size:
            raise DimensionMismatchError("line coords must be distinct")
        d = np.abs(c[:, None] - c[None, :])
        return cls(size=c.size, labels=labels, coords=c, metric=d)

    def same_as(self, other: "StateSpace") -> bool:
        if self is other:
            return True
        if self.size != other.size:
            return False
        for a, b in ((self.coords, other.coords), (self.metric, other.metric)):
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return self.labels == other.labels


def _require_same_space(a, b, what="operands"):
    if not a.space.same_as(b.space):
        raise DimensionMismatchError(f"{what} live on different state spaces")


@dataclass(frozen=True, eq=False)
class FiniteMeasure:
    """A probability vector on a :class:`StateSpace`.

    Mass entries must be nonnegative and finite with positive total.  The
    vector is renormalized to total mass one at construction and the
    additive correction ``total - 1`` is recorded; entries below 1e-300
    are flushed to exact zero first.
    """

    space: StateSpace
    mass: np.ndarray
    correction: float = field(default=0.0, compare=False)

    def __post_init__(self):
        m = np.array(self.mass, dtype=float)
        if m.shape != (self.space.size,):
            raise DimensionMismatchError(
                f"mass shape {m.shape}, expected ({self.space.size},)"
            )
        if not np.all(np.isfinite(m)):
            raise SupportError("mass entries must be finite")
        if np.any(m < 0):
            i = int(np.argmin(m))
            raise SupportError(f"negative mass {m[i]!r} at state {i}")
        m[m < _FLUSH] = 0.0
        total = float(m.sum())
        if total <= 0.0:
            raise SupportError("measure has no mass")
        m /= total
        object.__setattr__(self, "mass", _readonly(m))
        object.__setattr__(self, "correction", total - 1.0)

    @classmethod
    def uniform(cls, space: StateSpace) -> "FiniteMeasure":
        return cls(space, np.full(space.size, 1.0 / space.size))

    @classmethod
    def point_mass(cls, space: StateSpace, state: int) -> "FiniteMeasure":
        m = np.zeros(space.size)
        m[state] = 1.0
        return cls(space, m)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.mass > 0)

    def expectation(self, f) -> float:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.space.size,):
            raise DimensionMismatchError("function has wrong length")
        return float(self.mass @ f)

    def __len__(self) -> int:
        return self.space.size


def kl_divergence(mu: FiniteMeasure, nu: FiniteMeasure) -> float:
    """KL(mu || nu) in nats; +inf when mu is not absolutely continuous w.r.t. nu."""
    _require_same_space(mu, nu)
    p, q = mu.mass, nu.mass
    on = p > 0
    if np.any(on & (q == 0)):
        return math.inf
    val = float(np.sum(p[on] * np.log(p[on] / q[on])))
    return max(val, 0.0)


def tv_distance(mu: FiniteMeasure, nu: FiniteMeasure) -> float:
    """Total variation distance, half the l1 distance of the mass vectors."""
    _require_same_space(mu, nu)
    return 0.5 * float(np.sum(np.abs(mu.mass - nu.mass)))


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """A finite mixture pi = sum_i w_i pi_i of measures on a shared space.

    ``weights`` is a strictly positive probability vector on the index
    space {0..m-1}; ``parent`` is certified entrywise against the weighted
    component sum within 1e-12.
    """

    components: tuple[FiniteMeasure, ...]
    weights: FiniteMeasure
    parent: FiniteMeasure
    component_matrix: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not self.components:
            raise DimensionMismatchError("mixture needs at least one component")
        space = self.components[0].space
        for k, comp in enumerate(self.components):
            if not comp.space.same_as(space):
                raise DimensionMismatchError(f"component {k} is on a different space")
        if len(self.weights) != len(self.components):
            raise DimensionMismatchError(
                f"{len(self.weights)} weights for {len(self.components)} components"
            )
        if np.any(self.weights.mass <= 0):
            i = int(np.argmin(self.weights.mass))
            raise SupportError(f"mixture weight {i} is not strictly positive")
        P = np.vstack([c.mass for c in self.components])
        object.__setattr__(self, "component_matrix", _readonly(P))
        recomposed = self.weights.mass @ P
        defect = float(np.max(np.abs(recomposed - self.parent.mass)))
        if defect > _RECOMPOSE_TOL:
            raise InvariantViolationError(
                f"parent differs from the weighted component sum by {defect:.3e}",
                residual=defect,
            )

    @classmethod
    def from_components(cls, components, weights, parent=None) -> "MixtureModel":
        components = tuple(components)
        if isinstance(weights, FiniteMeasure):
            wm = weights
        else:
            wm = FiniteMeasure(StateSpace(size=len(components)), np.asarray(weights, dtype=float))
        if parent is None:
            mass = wm.mass @ np.vstack([c.mass for c in components])
            parent = FiniteMeasure(components[0].space, mass)
        return cls(components=components, weights=wm, parent=parent)

    @property
    def space(self) -> StateSpace:
        return self.parent.space

    @property
    def index_space(self) -> StateSpace:
        return self.weights.space

    @property
    def m(self) -> int:
        return len(self.components)

    def reweighted(self, lam) -> FiniteMeasure:
        """The hull point sum_i lambda_i pi_i for lambda in the simplex."""
        lam = lam.mass if isinstance(lam, FiniteMeasure) else np.asarray(lam, dtype=float)
        if lam.shape != (self.m,):
            raise DimensionMismatchError("lambda has wrong length")
        if np.any(lam < 0):
            raise SupportError("hull coefficients must be nonnegative")
        return FiniteMeasure(self.space, lam @ self.component_matrix)


def _density_ratio(mu: FiniteMeasure, pi: FiniteMeasure) -> np.ndarray:
    """mu/pi on supp(pi), raising SupportError when mu puts mass outside."""
    bad = (mu.mass > 0) & (pi.mass == 0)
    if np.any(bad):
        state = int(np.flatnonzero(bad)[0])
        raise SupportError(
            f"measure puts mass {mu.mass[state]:.3e} on state {state} "
            "outside the support of the reference"
        )
    ratio = np.zeros(len(mu))
    on = pi.mass > 0
    ratio[on] = mu.mass[on] / pi.mass[on]
    return ratio


def responsibilities(mu: FiniteMeasure, mix: MixtureModel) -> FiniteMeasure:
    """Responsibility weights lambda*_i = w_i E_{pi_i}[d mu / d pi].

    Always a probability vector on the index space; equals the mixture
    weights when mu = pi.
    """
    _require_same_space(mu, mix.parent, "measure and mixture")
    ratio = _density_ratio(mu, mix.parent)
    lam = mix.weights.mass * (mix.component_matrix @ ratio)
    return FiniteMeasure(mix.index_space, lam)


@dataclass(frozen=True, eq=False)
class ResponsibilityDecomposition:
    """mu = sum_i lambda*_i mu_i with mu_i the component conditionals.

    ``zero_mass_fallbacks`` lists indices where lambda*_i = 0 exactly and
    mu_i was set to pi_i by convention.  Construction certifies the
    recomposition identity and the density-ratio identity
    lambda*_i (d mu_i / d pi_i) = w_i (d mu / d pi) on supp(pi_i), both
    within 1e-12.
    """

    lambda_star: FiniteMeasure
    conditionals: tuple[FiniteMeasure, ...]
    zero_mass_fallbacks: frozenset[int]
    recomposition_residual: float
    ratio_identity_residual: float


def decompose(mu: FiniteMeasure, mix: MixtureModel) -> ResponsibilityDecomposition:
    """Split mu into responsibility weights and conditional measures."""
    lam = responsibilities(mu, mix)
    ratio = _density_ratio(mu, mix.parent)
    w = mix.weights.mass
    conditionals = []
    fallbacks = set()
    for i in range(mix.m):
        pi_i = mix.components[i]
        if lam.mass[i] == 0.0:
            fallbacks.add(i)
            conditionals.append(pi_i)
            continue
        mass = (w[i] / lam.mass[i]) * pi_i.mass * ratio
        conditionals.append(FiniteMeasure(mix.space, mass))
    conditionals = tuple(conditionals)

    recomposed = np.zeros(len(mu))
    for i in range(mix.m):
        if i not in fallbacks:
            recomposed += lam.mass[i] * conditionals[i].mass
    rec_res = float(np.max(np.abs(recomposed - mu.mass)))

    ratio_res = 0.0
    for i in range(mix.m):
        on = mix.components[i].mass > 0
        lhs = np.zeros(len(mu))
        lhs[on] = lam.mass[i] * conditionals[i].mass[on] / mix.components[i].mass[on]
        ratio_res = max(ratio_res, float(np.max(np.abs(lhs[on] - w[i] * ratio[on]))))

    if rec_res > _RECOMPOSE_TOL or ratio_res > _RECOMPOSE_TOL:
        raise InvariantViolationError(
            "responsibility decomposition failed certification "
            f"(recomposition {rec_res:.3e}, ratio identity {ratio_res:.3e})",
            residual=max(rec_res, ratio_res),
        )
    return ResponsibilityDecomposition(
        lambda_star=lam,
        conditionals=conditionals,
        zero_mass_fallbacks=frozenset(fallbacks),
        recomposition_residual=rec_res,
        ratio_identity_residual=ratio_res,
    )


@dataclass(frozen=True)
class EntropyDecomposition:
    """KL(mu||pi) split into a weight term and a within-component term."""

    kl_total: float
    kl_weights: float
    within_sum: float
    residual: float


def entropy_decomposition(mu: FiniteMeasure, mix: MixtureModel) -> EntropyDecomposition:
    """Exact chain rule KL(mu||pi) = KL(lambda*||w) + sum_i lambda*_i KL(mu_i||pi_i).

    The identity is certified within 1e-10; an infinite total KL is
    reported as such with the remaining fields NaN.
    """
    kl_total = kl_divergence(mu, mix.parent)
    if math.isinf(kl_total):
        return EntropyDecomposition(math.inf, math.nan, math.nan, math.nan)
    dec = decompose(mu, mix)
    kl_w = kl_divergence(dec.lambda_star, mix.weights)
    within = 0.0
    for i in range(mix.m):
        li = dec.lambda_star.mass[i]
        if li > 0:
            within += li * kl_divergence(dec.conditionals[i], mix.components[i])
    residual = abs(kl_total - kl_w - within)
    if not residual <= _CHAIN_RULE_TOL:
        raise InvariantViolationError(
            f"entropy decomposition identity off by {residual:.3e}",
            residual=residual,
        )
    return EntropyDecomposition(kl_total, kl_w, within, residual)


@dataclass(frozen=True, eq=False)
class HullProjection:
    """Result of the KL projection of mu onto the reweighted hull."""

    lambda_hat: FiniteMeasure
    value: float
    iterations: int
    converged: bool
    kkt_residual: float
    monotone: bool
    max_objective_increase: float


def kl_to_hull(
    mu: FiniteMeasure,
    mix: MixtureModel,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> HullProjection:
    """min over lambda in the simplex of KL(mu || sum_i lambda_i pi_i).

    Solved by the multiplicative fixed-point iteration
    lambda_i <- lambda_i * sum_x mu(x) pi_i(x) / nu_lambda(x), started from
    the uniform vector and stopped when the iterate moves less than ``tol``
    in l1.  The objective is non-increasing along the iteration; the final
    first-order stationarity (KKT) residual is reported.
    """
    _require_same_space(mu, mix.parent, "measure and mixture")
    covered = mix.component_matrix.sum(axis=0) > 0
    outside = (mu.mass > 0) & ~covered
    if np.any(outside):
        state = int(np.flatnonzero(outside)[0])
        raise SupportError(
            f"state {state} carries mass but no component covers it"
        )

    P = mix.component_matrix
    on = mu.mass > 0
    p = mu.mass[on]
    Pon = P[:, on]
    base = float(np.sum(p * np.log(p)))

    lam = np.full(mix.m, 1.0 / mix.m)

    def objective(l):
        nu = l @ Pon
        return base - float(np.sum(p * np.log(nu)))

    prev_obj = objective(lam)
    max_increase = 0.0
    iterations = 0
    converged = False
    obj_scale = 1.0 + abs(prev_obj)
    for iterations in range(1, max_iter + 1):
        nu = lam @ Pon
        r = Pon @ (p / nu)
        new = lam * r
        s = new.sum()
        if s > 0:
            new = new / s
        move = float(np.sum(np.abs(new - lam)))
        lam = new
        obj = objective(lam)
        max_increase = max(max_increase, obj - prev_obj)
        prev_obj = obj
        if move < tol:
            converged = True
            break

    nu = lam @ Pon
    r = Pon @ (p / nu)
    active = lam > 1e-12
    kkt = 0.0
    if np.any(active):
        kkt = float(np.max(np.abs(r[active] - 1.0)))
    if np.any(~active):
        kkt = max(kkt, float(max(0.0, np.max(r[~active]) - 1.0)))

    value = max(prev_obj, 0.0)
    kl_parent = kl_divergence(mu, mix.parent)
    if value > kl_parent + 1e-9:
        raise InvariantViolationError(
            f"hull projection value {value:.6e} exceeds KL to the parent {kl_parent:.6e}",
            residual=value - kl_parent,
        )
    return HullProjection(
        lambda_hat=FiniteMeasure(mix.index_space, lam),
        value=value,
        iterations=iterations,
        converged=converged,
        kkt_residual=kkt,
        monotone=max_increase <= 1e-12 * obj_scale,
        max_objective_increase=max_increase,
    )


@dataclass(frozen=True, eq=False)
class JointLabeledMeasure:
    """A probability table on pairs (component index, state)."""

    index_space: StateSpace
    space: StateSpace
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.shape != (self.index_space.size, self.space.size):
            raise DimensionMismatchError(
                f"joint table shape {t.shape}, expected "
                f"({self.index_space.size}, {self.space.size})"
            )
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise SupportError("joint table entries must be finite and nonnegative")
        total = float(t.sum())
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
            raise InvariantViolationError(
                f"joint table total mass {total!r} is not 1", residual=abs(total - 1.0)
            )
        object.__setattr__(self, "table", _readonly(t))

    def index_marginal(self) -> FiniteMeasure:
        return FiniteMeasure(self.index_space, self.table.sum(axis=1))

    def state_marginal(self) -> FiniteMeasure:
        return FiniteMeasure(self.space, self.table.sum(axis=0))


def lift_joint(
    mu: FiniteMeasure, mix: MixtureModel
) -> tuple[JointLabeledMeasure, JointLabeledMeasure]:
    """Lift (mu, pi) to labeled joint measures on (index, state) pairs.

    The reference lift puts mass w_i pi_i(x) on (i, x); the lifted mu
    reweights states by d mu / d pi, so its index marginal recovers the
    responsibility weights and its state marginal recovers mu.  Both facts
    are certified within 1e-12.
    """
    _require_same_space(mu, mix.parent, "measure and mixture")
    ratio = _density_ratio(mu, mix.parent)
    w = mix.weights.mass
    base = w[:, None] * mix.component_matrix
    lifted = base * ratio[None, :]
    joint_pi = JointLabeledMeasure(mix.index_space, mix.space, base)
    joint_mu = JointLabeledMeasure(mix.index_space, mix.space, lifted)

    lam = responsibilities(mu, mix)
    res = max(
        float(np.max(np.abs(joint_mu.index_marginal().mass - lam.mass))),
        float(np.max(np.abs(joint_mu.state_marginal().mass - mu.mass))),
        float(np.max(np.abs(joint_pi.state_marginal().mass - mix.parent.mass))),
        float(np.max(np.abs(joint_pi.index_marginal().mass - w))),
    )
    if res > _RECOMPOSE_TOL:
        raise InvariantViolationError(
            f"joint lift marginals off by {res:.3e}", residual=res
        )
    return joint_mu, joint_pi
