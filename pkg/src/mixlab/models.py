"""Benchmark model builders.

Every builder returns a :class:`GeneratorMixture` whose parent conductances
dominate the weighted component conductances edge by edge, either exactly
(conditioned blocks, explicit slack) or by the geometric-mean inequality
(grid chains).  :meth:`ModelSpec.build` re-certifies this at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .continuum import GaussianMixture1D, Grid1D, discretize_langevin, grid_mixture
from .dirichlet import (
    EdgeConductances,
    GeneratorMixture,
    ReversibleGenerator,
    check_assumption,
)
from .errors import (
    ConfigurationError,
    IrreducibilityError,
    InvariantViolationError,
    SupportError,
)
from .measures import FiniteMeasure, MixtureModel, StateSpace
from .rng import random_probability, stream

_ISING_MAX_SITES = 12
_RANDOM_MAX_STATES = 200
_RANDOM_MAX_COMPONENTS = 6


def conditioned_mixture(parent: ReversibleGenerator, blocks) -> GeneratorMixture:
    """Split a chain into its restrictions to a partition of the support.

    Component i is the parent conditioned on block B_i: stationary
    pi|B_i / pi(B_i), conductances c / pi(B_i) on edges inside the block
    and zero across.  In-block rates are unchanged, the mixture weights
    are the block masses, and the weighted conductance sum reproduces the
    parent exactly on every in-block edge, so form domination holds with
    slack only on the cut.
    """
    pi = parent.stationary.mass
    n = parent.space.size
    seen = np.zeros(n, dtype=bool)
    comps = []
    gens = []
    weights = []
    for k, block in enumerate(blocks):
        b = np.asarray(block, dtype=int)
        if b.size == 0:
            raise ConfigurationError(f"block {k} is empty")
        if np.any(seen[b]):
            raise ConfigurationError(f"block {k} overlaps an earlier block")
        seen[b] = True
        wk = float(pi[b].sum())
        if wk <= 0:
            raise SupportError(f"block {k} carries no stationary mass")
        mass = np.zeros(n)
        mass[b] = pi[b] / wk
        c = np.zeros((n, n))
        c[np.ix_(b, b)] = parent.conductances.matrix[np.ix_(b, b)] / wk
        gen = ReversibleGenerator.from_conductances(
            EdgeConductances(parent.space, c), FiniteMeasure(parent.space, mass)
        )
        if not gen.irreducible:
            raise IrreducibilityError(f"block {k} is disconnected under the parent edges")
        comps.append(gen.stationary)
        gens.append(gen)
        weights.append(wk)
    if np.any(pi[~seen] > 0):
        state = int(np.flatnonzero((pi > 0) & ~seen)[0])
        raise ConfigurationError(f"supported state {state} belongs to no block")
    mix = MixtureModel.from_components(comps, np.asarray(weights), parent=parent.stationary)
    return GeneratorMixture(mix, parent, tuple(gens))


def two_point_generator(a: float, b: float) -> ReversibleGenerator:
    """The chain 0 <-> 1 with rates a (up) and b (down), stationary (b, a)/(a+b)."""
    if a <= 0 or b <= 0:
        raise ConfigurationError("two-point rates must be positive")
    space = StateSpace.line(np.array([0.0, 1.0]))
    rates = np.array([[-a, a], [b, -b]])
    return ReversibleGenerator.from_rates(space, rates)


def build_two_point(p: float = 0.5, conductance: float = 0.5) -> GeneratorMixture:
    """Single-component mixture on two states; the hull is just {pi}.

    ``p`` is the stationary mass of state 1 and ``conductance`` the single
    edge weight, so the rates are c/(1-p) and c/p.
    """
    if not (0 < p < 1):
        raise ConfigurationError("p must lie strictly between 0 and 1")
    if conductance <= 0:
        raise ConfigurationError("conductance must be positive")
    gen = two_point_generator(conductance / (1.0 - p), conductance / p)
    mix = MixtureModel.from_components([gen.stationary], [1.0], parent=gen.stationary)
    return GeneratorMixture(mix, gen, (gen,))


def build_block_mixture(
    sizes=(2, 2),
    in_block: float = 1.0,
    bridge: float = 0.05,
    pi=None,
) -> GeneratorMixture:
    """Path blocks joined by weak bridges, conditioned into components.

    Each block is a path with edge conductance ``in_block``; consecutive
    blocks are linked by one edge of conductance ``bridge`` (zero gives a
    disconnected parent, which is allowed: the evolution then never mixes
    across blocks and the responsibilities stay frozen).
    """
    sizes = tuple(int(s) for s in sizes)
    if not sizes or any(s < 1 for s in sizes):
        raise ConfigurationError("block sizes must be positive integers")
    if in_block <= 0 or bridge < 0:
        raise ConfigurationError("need in_block > 0 and bridge >= 0")
    n = sum(sizes)
    space = StateSpace.line(np.arange(n, dtype=float))
    if pi is None:
        pi = np.full(n, 1.0 / n)
    stationary = FiniteMeasure(space, np.asarray(pi, dtype=float))
    if np.any(stationary.mass <= 0):
        raise SupportError("block mixture needs a fully supported stationary measure")

    c = np.zeros((n, n))
    start = 0
    bounds = []
    for s in sizes:
        for j in range(start, start + s - 1):
            c[j, j + 1] = c[j + 1, j] = in_block
        bounds.append((start, start + s - 1))
        start += s
    for (_, last), (first, _) in zip(bounds[:-1], bounds[1:]):
        c[last, first] = c[first, last] = bridge

    parent = ReversibleGenerator.from_conductances(EdgeConductances(space, c), stationary)
    blocks = [np.arange(lo, hi + 1) for lo, hi in bounds]
    return conditioned_mixture(parent, blocks)


def build_gaussian_mixture_grid(
    means,
    variances=None,
    weights=None,
    lo: float | None = None,
    hi: float | None = None,
    n: int = 801,
) -> GeneratorMixture:
    """Langevin grid chain for a 1D Gaussian mixture and its components."""
    means = np.atleast_1d(np.asarray(means, dtype=float))
    if variances is None:
        variances = np.ones_like(means)
    if weights is None:
        weights = np.full(means.size, 1.0 / means.size)
    target = GaussianMixture1D(means, np.asarray(variances, float), np.asarray(weights, float))
    if (lo is None) != (hi is None):
        raise ConfigurationError("supply both window ends or neither")
    grid = None if lo is None else Grid1D(float(lo), float(hi), int(n))
    return grid_mixture(target, grid=grid, n=int(n))


def double_well_potential(depth: float):
    """V(x) = depth (x^2 - 1)^2, wells at +-1 and barrier depth at 0."""
    return lambda x: depth * (x * x - 1.0) ** 2


def build_double_well(
    depth: float = 3.0, lo: float = -2.0, hi: float = 2.0, n: int = 161
) -> GeneratorMixture:
    """Symmetric double-well grid chain conditioned on the sign of x.

    The two components are the well halves {x < 0} and {x >= 0}; for
    positive depth the stationary mass concentrates near +-1, the bridge
    over the saddle is exponentially small in ``depth``, and the
    responsibilities relax on the slow metastable time scale.
    """
    if depth <= 0:
        raise ConfigurationError("well depth must be positive")
    if not (lo < 0 < hi):
        raise ConfigurationError("window must contain the saddle at 0")
    grid = Grid1D(float(lo), float(hi), int(n))
    x = grid.points()
    parent = discretize_langevin(depth * (x * x - 1.0) ** 2, grid)
    blocks = [np.flatnonzero(x < 0.0), np.flatnonzero(x >= 0.0)]
    return conditioned_mixture(parent, blocks)


def _spin_table(sites: int) -> np.ndarray:
    idx = np.arange(1 << sites)
    bits = (idx[:, None] >> np.arange(sites)[None, :]) & 1
    return (2 * bits - 1).astype(float)


def build_ising_glauber(
    sites: int, beta: float, external_field: float = 0.0
) -> GeneratorMixture:
    """Heat-bath single-spin dynamics on a ring, split by magnetization sign.

    States are the 2^sites spin configurations with Gibbs weights
    exp(beta (sum_edges s_i s_j + h sum_i s_i)); a flip of spin k is
    accepted at rate pi(flipped) / (pi + pi(flipped)), making every edge
    conductance pi pi' / (pi + pi').  The two blocks are {M > 0} and
    {M < 0}, with M = 0 configurations assigned by the sign of spin 0.
    The state space carries the Hamming metric.
    """
    sites = int(sites)
    if not (2 <= sites <= _ISING_MAX_SITES):
        raise ConfigurationError(f"sites must lie in [2, {_ISING_MAX_SITES}]")
    if beta < 0:
        raise ConfigurationError("inverse temperature must be nonnegative")
    spins = _spin_table(sites)
    n = spins.shape[0]
    if sites == 2:
        edges = [(0, 1)]
    else:
        edges = [(k, (k + 1) % sites) for k in range(sites)]
    interaction = np.zeros(n)
    for i, j in edges:
        interaction += spins[:, i] * spins[:, j]
    logw = beta * (interaction + external_field * spins.sum(axis=1))
    logw -= logw.max()
    pi = np.exp(logw)
    pi /= pi.sum()

    hamming = 0.5 * (sites - spins @ spins.T)
    np.fill_diagonal(hamming, 0.0)
    labels = tuple("".join("+" if s > 0 else "-" for s in row) for row in spins)
    space = StateSpace(size=n, labels=labels, metric=hamming)

    c = np.zeros((n, n))
    idx = np.arange(n)
    for k in range(sites):
        nbr = idx ^ (1 << k)
        c[idx, nbr] = pi[idx] * pi[nbr] / (pi[idx] + pi[nbr])
    parent = ReversibleGenerator.from_conductances(
        EdgeConductances(space, c), FiniteMeasure(space, pi)
    )
    mag = spins.sum(axis=1)
    plus = (mag > 0) | ((mag == 0) & (spins[:, 0] > 0))
    return conditioned_mixture(parent, [np.flatnonzero(plus), np.flatnonzero(~plus)])


def build_random_dominated(
    n: int = 20, m: int = 3, seed: int = 0, slack_density: float = 0.15
) -> GeneratorMixture:
    """Random fully supported components under a parent built to dominate.

    Each component gets a random spanning tree plus a few extra edges with
    uniform conductances and a flat-Dirichlet stationary vector; the parent
    conductances are the weighted component sum plus sparse nonnegative
    slack, and the parent measure is the exact mixture, so the domination
    hypothesis holds by construction with equality off the slack edges.
    """
    n, m = int(n), int(m)
    if not (2 <= n <= _RANDOM_MAX_STATES):
        raise ConfigurationError(f"state count must lie in [2, {_RANDOM_MAX_STATES}]")
    if not (1 <= m <= _RANDOM_MAX_COMPONENTS):
        raise ConfigurationError(f"component count must lie in [1, {_RANDOM_MAX_COMPONENTS}]")
    rng = stream(seed, "random-dominated", n, m)
    space = StateSpace.line(np.arange(n, dtype=float))

    weights = random_probability(rng, m)
    comps = []
    gens = []
    weighted = np.zeros((n, n))
    for i in range(m):
        c = np.zeros((n, n))
        for j in range(1, n):
            anchor = int(rng.integers(0, j))
            c[j, anchor] = c[anchor, j] = rng.uniform(0.5, 1.5)
        for _ in range(max(n // 3, 1)):
            a, b = rng.integers(0, n, size=2)
            if a != b:
                extra = rng.uniform(0.1, 1.0)
                c[a, b] += extra
                c[b, a] += extra
        mass = random_probability(rng, n)
        gen = ReversibleGenerator.from_conductances(
            EdgeConductances(space, c), FiniteMeasure(space, mass)
        )
        comps.append(gen.stationary)
        gens.append(gen)
        weighted += weights[i] * c

    slack = np.zeros((n, n))
    mask = np.triu(rng.uniform(size=(n, n)) < slack_density, k=1)
    vals = rng.uniform(0.0, 0.5, size=(n, n))
    slack[mask] = vals[mask]
    slack += slack.T

    mix = MixtureModel.from_components(comps, weights)
    parent = ReversibleGenerator.from_conductances(
        EdgeConductances(space, weighted + slack), mix.parent
    )
    return GeneratorMixture(mix, parent, tuple(gens))


_BUILDERS = {
    "two_point": build_two_point,
    "block": build_block_mixture,
    "gaussian_grid": build_gaussian_mixture_grid,
    "double_well": build_double_well,
    "ising": build_ising_glauber,
    "random_dominated": build_random_dominated,
}


@dataclass(frozen=True)
class ModelSpec:
    """A named model family plus its parameters; builds a GeneratorMixture."""

    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _BUILDERS:
            raise ConfigurationError(
                f"unknown model kind {self.kind!r}; expected one of {sorted(_BUILDERS)}"
            )

    def build(self, certify: bool = True) -> GeneratorMixture:
        kwargs = dict(self.params)
        if self.kind == "random_dominated":
            kwargs.setdefault("seed", self.seed)
        gm = _BUILDERS[self.kind](**kwargs)
        if certify:
            report = check_assumption(gm, seed=self.seed)
            if not report.pointwise_ok:
                raise InvariantViolationError(
                    f"model {self.kind!r} lost pointwise form domination "
                    f"(min slack {report.min_slack:.3e})",
                    residual=report.min_slack,
                )
        return gm

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelSpec":
        if not isinstance(doc, dict) or "kind" not in doc:
            raise ConfigurationError("model spec needs a 'kind' entry")
        params = doc.get("params", {})
        if not isinstance(params, dict):
            raise ConfigurationError("model params must be a mapping")
        return cls(kind=doc["kind"], params=dict(params), seed=int(doc.get("seed", 0)))
