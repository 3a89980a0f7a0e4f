"""Reversible generators, Dirichlet forms, and functional-inequality tools.

A continuous-time Markov chain on a finite state space is stored through
its edge conductances c(x, y) = pi(x) Q(x, y), which are symmetric exactly
when the chain is reversible.  Constructors symmetrize the conductances
and rebuild the rate matrix from them, so detailed balance holds by
construction and the Dirichlet form has the standard edge representation

    E(f, g) = 1/2 sum_{x,y} c(x, y) (f(x) - f(y)) (g(x) - g(y)).

Stationary measures are allowed to vanish on part of the space (this is
how conditioned mixture components are represented); conductances must
vanish on every edge touching a zero-mass state, and irreducibility means
connectivity of the conductance graph restricted to the support.

Divergence-like functionals follow the exact-zero conventions of the
measure layer: the Fisher information E(sqrt(f), sqrt(f)) of f = d mu/d pi
is +inf when absolute continuity fails, and the entropy production
E(f, log f) is +inf when f vanishes on exactly one side of a conducting
edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components
from scipy.special import rel_entr

from .errors import (
    DimensionMismatchError,
    InvariantViolationError,
    IrreducibilityError,
    NumericError,
    SupportError,
)
from .measures import FiniteMeasure, MixtureModel, StateSpace, _require_same_space
from .rng import random_probability, stream

_DB_TOL = 1e-10
_FORM_CROSS_TOL = 1e-10
_POINTWISE_TOL = 1e-12
_PSD_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EdgeConductances:
    """Symmetric nonnegative edge weights with zero diagonal."""

    space: StateSpace
    matrix: np.ndarray

    def __post_init__(self):
        c = np.array(self.matrix, dtype=float)
        n = self.space.size
        if c.shape != (n, n):
            raise DimensionMismatchError(
                f"conductance shape {c.shape}, expected ({n}, {n})"
            )
        if not np.all(np.isfinite(c)):
            raise SupportError("conductances must be finite")
        if np.any(c < 0):
            raise SupportError("conductances must be nonnegative")
        asym = float(np.max(np.abs(c - c.T))) if n else 0.0
        scale = float(np.max(c)) if c.size else 0.0
        if asym > _DB_TOL * max(1.0, scale):
            raise InvariantViolationError(
                f"conductances asymmetric by {asym:.3e}", residual=asym
            )
        c = 0.5 * (c + c.T)
        np.fill_diagonal(c, 0.0)
        object.__setattr__(self, "matrix", _readonly(c))

    def laplacian(self) -> np.ndarray:
        """Graph Laplacian L with f' L f = E(f, f)."""
        L = -self.matrix.copy()
        np.fill_diagonal(L, self.matrix.sum(axis=1))
        return L


def _connected_on(mask: np.ndarray, adjacency: np.ndarray) -> bool:
    idx = np.flatnonzero(mask)
    if idx.size <= 1:
        return True
    sub = adjacency[np.ix_(idx, idx)] > 0
    n_comp, _ = connected_components(sub, directed=False)
    return n_comp == 1


@dataclass(frozen=True, eq=False)
class ReversibleGenerator:
    """A reversible rate matrix together with its stationary measure.

    Attributes
    ----------
    rates : ndarray
        Q with nonnegative off-diagonal entries and zero row sums,
        rebuilt from the symmetrized conductances.
    stationary : FiniteMeasure
        Stationary probability measure; may vanish off the active block.
    conductances : EdgeConductances
        c(x, y) = pi(x) Q(x, y), exactly symmetric.
    irreducible : bool
        Whether the conductance graph restricted to supp(pi) is connected.
    db_residual : float
        Relative detailed-balance residual of the inputs before
        symmetrization (certified <= 1e-10).
    """

    space: StateSpace
    rates: np.ndarray
    stationary: FiniteMeasure
    conductances: EdgeConductances
    irreducible: bool
    db_residual: float
    notes: tuple[str, ...] = ()

    @classmethod
    def from_conductances(
        cls, conductances: EdgeConductances, stationary: FiniteMeasure, notes=()
    ) -> "ReversibleGenerator":
        space = conductances.space
        _require_same_space_sp(space, stationary.space)
        c = conductances.matrix
        pi = stationary.mass
        dead = pi == 0
        if np.any(dead):
            touching = c[dead].sum(axis=1)
            if np.any(touching > 0):
                state = int(np.flatnonzero(dead)[np.argmax(touching)])
                raise SupportError(
                    f"state {state} has zero stationary mass but positive conductance"
                )
        Q = np.zeros_like(c)
        alive = ~dead
        Q[alive] = c[alive] / pi[alive, None]
        np.fill_diagonal(Q, 0.0)
        Q[np.arange(len(pi)), np.arange(len(pi))] = -Q.sum(axis=1)
        return cls(
            space=space,
            rates=_readonly(Q),
            stationary=stationary,
            conductances=conductances,
            irreducible=_connected_on(alive, c),
            db_residual=0.0,
            notes=tuple(notes),
        )

    @classmethod
    def from_rates(
        cls, space: StateSpace, rates, stationary: FiniteMeasure | None = None, notes=()
    ) -> "ReversibleGenerator":
        Q = np.array(rates, dtype=float)
        n = space.size
        if Q.shape != (n, n):
            raise DimensionMismatchError(f"rate shape {Q.shape}, expected ({n}, {n})")
        off = Q.copy()
        np.fill_diagonal(off, 0.0)
        if np.any(off < 0) or not np.all(np.isfinite(Q)):
            raise SupportError("off-diagonal rates must be finite and nonnegative")
        if stationary is None:
            stationary = _stationary_from_rates(space, off)
        _require_same_space_sp(space, stationary.space)
        pi = stationary.mass
        flow = pi[:, None] * off
        asym = float(np.max(np.abs(flow - flow.T)))
        scale = max(float(np.max(flow)), 1e-30)
        residual = asym / scale
        if residual > _DB_TOL:
            raise InvariantViolationError(
                f"detailed balance fails with relative residual {residual:.3e}",
                residual=residual,
            )
        cond = EdgeConductances(space, 0.5 * (flow + flow.T))
        gen = cls.from_conductances(cond, stationary, notes=notes)
        object.__setattr__(gen, "db_residual", residual)
        return gen

    @property
    def exit_rates(self) -> np.ndarray:
        return -np.diag(self.rates)

    def apply(self, f: np.ndarray) -> np.ndarray:
        """The generator applied to a state function, (L f)(x)."""
        f = np.asarray(f, dtype=float)
        if f.shape != (self.space.size,):
            raise DimensionMismatchError("function has wrong length")
        return self.rates @ f


def _require_same_space_sp(a: StateSpace, b: StateSpace):
    if not a.same_as(b):
        raise DimensionMismatchError("operands live on different state spaces")


def _stationary_from_rates(space: StateSpace, off: np.ndarray) -> FiniteMeasure:
    Q = off.copy()
    Q[np.arange(space.size), np.arange(space.size)] = -off.sum(axis=1)
    ns = scipy.linalg.null_space(Q.T)
    if ns.shape[1] != 1:
        raise IrreducibilityError(
            f"stationary measure is not unique ({ns.shape[1]} invariant directions); "
            "supply one explicitly"
        )
    v = ns[:, 0]
    v = v * np.sign(v.sum())
    if np.any(v < -1e-12 * np.max(np.abs(v))):
        raise NumericError("computed stationary vector has a negative entry")
    v = np.clip(v, 0.0, None)
    return FiniteMeasure(space, v)


def dirichlet_form(gen: ReversibleGenerator, f, g=None) -> float:
    """E(f, g), cross-checked against -sum_x pi(x) f(x) (L g)(x).

    The edge representation is the primary value; the generator
    representation must agree within 1e-10 relative tolerance, otherwise
    the generator failed certification and an error is raised.
    """
    f = np.asarray(f, dtype=float)
    g = f if g is None else np.asarray(g, dtype=float)
    n = gen.space.size
    if f.shape != (n,) or g.shape != (n,):
        raise DimensionMismatchError("function has wrong length")
    c = gen.conductances.matrix
    df = f[:, None] - f[None, :]
    dg = g[:, None] - g[None, :]
    value = 0.5 * float(np.sum(c * df * dg))
    cross = -float(np.sum(gen.stationary.mass * f * (gen.rates @ g)))
    scale = 1.0 + abs(value) + float(np.sum(c * np.abs(df) * np.abs(dg)))
    if abs(value - cross) > _FORM_CROSS_TOL * scale:
        raise InvariantViolationError(
            f"Dirichlet form representations disagree: edge {value!r} vs "
            f"generator {cross!r}",
            residual=abs(value - cross),
        )
    return value


def _ratio_to_stationary(mu: FiniteMeasure, gen: ReversibleGenerator) -> np.ndarray | None:
    """d mu / d pi on supp(pi); None when mu is not absolutely continuous."""
    _require_same_space(mu, gen.stationary, "measure and generator")
    pi = gen.stationary.mass
    if np.any((mu.mass > 0) & (pi == 0)):
        return None
    f = np.zeros_like(pi)
    on = pi > 0
    f[on] = mu.mass[on] / pi[on]
    return f


def fisher_information(mu: FiniteMeasure, gen: ReversibleGenerator) -> float:
    """E(sqrt(f), sqrt(f)) for f = d mu / d pi; +inf off the support."""
    f = _ratio_to_stationary(mu, gen)
    if f is None:
        return math.inf
    root = np.sqrt(f)
    c = gen.conductances.matrix
    d = root[:, None] - root[None, :]
    return 0.5 * float(np.sum(c * d * d))


def entropy_production(mu: FiniteMeasure, gen: ReversibleGenerator) -> float:
    """E(f, log f) for f = d mu / d pi.

    Edges where f vanishes on exactly one endpoint contribute +inf; edges
    where it vanishes on both contribute zero.
    """
    f = _ratio_to_stationary(mu, gen)
    if f is None:
        return math.inf
    c = gen.conductances.matrix
    iu, ju = np.triu_indices(len(f), k=1)
    w = c[iu, ju]
    edge = w > 0
    fi, fj = f[iu[edge]], f[ju[edge]]
    one_sided = (fi == 0) != (fj == 0)
    if np.any(one_sided):
        return math.inf
    both = (fi > 0) & (fj > 0)
    if not np.any(both):
        return 0.0
    a, b = fi[both], fj[both]
    return float(np.sum(w[edge][both] * (a - b) * (np.log(a) - np.log(b))))


@dataclass(frozen=True, eq=False)
class GeneratorMixture:
    """Component generators whose stationary measures form a MixtureModel.

    The parent generator must be stationary and reversible for the parent
    measure; whether its Dirichlet form dominates the weighted component
    forms is a property to check, not an invariant, see
    :func:`check_assumption`.
    """

    mix: MixtureModel
    parent_generator: ReversibleGenerator
    component_generators: tuple[ReversibleGenerator, ...]

    def __post_init__(self):
        if len(self.component_generators) != self.mix.m:
            raise DimensionMismatchError(
                f"{len(self.component_generators)} generators for {self.mix.m} components"
            )
        _require_same_space(self.parent_generator.stationary, self.mix.parent)
        res = float(
            np.max(np.abs(self.parent_generator.stationary.mass - self.mix.parent.mass))
        )
        for i, gen in enumerate(self.component_generators):
            _require_same_space(gen.stationary, self.mix.parent)
            res = max(
                res,
                float(np.max(np.abs(gen.stationary.mass - self.mix.components[i].mass))),
            )
        if res > 1e-12:
            raise InvariantViolationError(
                f"generator stationary measures differ from mixture entries by {res:.3e}",
                residual=res,
            )

    @property
    def space(self) -> StateSpace:
        return self.mix.space

    @property
    def m(self) -> int:
        return self.mix.m


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the form-domination check sum_i w_i E_i <= E.

    ``pointwise_ok`` compares conductances edge by edge; ``psd_ok`` is the
    eigenvalue fallback for the quadratic form difference (computed only
    when the pointwise check fails); ``entropy_form_ok`` covers the
    entropy-form variant sum_i w_i E_i(f, log f) <= E(f, log f), implied
    pointwise or sampled on random positive functions otherwise.
    """

    pointwise_ok: bool
    psd_ok: bool
    entropy_form_ok: bool
    min_slack: float
    min_eigenvalue: float
    entropy_samples: int

    @property
    def quadratic_ok(self) -> bool:
        return self.pointwise_ok or self.psd_ok


def check_assumption(
    gm: GeneratorMixture, seed: int = 0, entropy_samples: int = 1000
) -> AssumptionReport:
    """Check that the parent Dirichlet form dominates the weighted sum."""
    w = gm.mix.weights.mass
    weighted = np.zeros_like(gm.parent_generator.conductances.matrix)
    for wi, gen in zip(w, gm.component_generators):
        weighted += wi * gen.conductances.matrix
    slack = gm.parent_generator.conductances.matrix - weighted
    off = ~np.eye(gm.space.size, dtype=bool)
    min_slack = float(np.min(slack[off])) if gm.space.size > 1 else 0.0
    pointwise_ok = min_slack >= -_POINTWISE_TOL

    min_eig = math.nan
    psd_ok = pointwise_ok
    if not pointwise_ok:
        # Laplacian of the signed slack matrix, in the pi-weighted inner product.
        L = -slack.copy()
        np.fill_diagonal(L, slack.sum(axis=1) - np.diag(slack))
        pi = gm.mix.parent.mass
        on = pi > 0
        scale = 1.0 / np.sqrt(pi[on])
        sym = L[np.ix_(on, on)] * scale[:, None] * scale[None, :]
        sym = 0.5 * (sym + sym.T)
        try:
            eigs = np.linalg.eigvalsh(sym)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"eigensolve failed in assumption check: {exc}") from exc
        min_eig = float(eigs[0])
        psd_ok = min_eig >= -_PSD_TOL

    entropy_ok = pointwise_ok
    samples = 0
    if not pointwise_ok:
        rng = stream(seed, 0xA55)
        entropy_ok = True
        samples = entropy_samples
        for _ in range(entropy_samples):
            f = rng.exponential(size=gm.space.size) + 1e-3
            lf = np.log(f)
            parent = _edge_form(gm.parent_generator.conductances.matrix, f, lf)
            mixed = sum(
                wi * _edge_form(gen.conductances.matrix, f, lf)
                for wi, gen in zip(w, gm.component_generators)
            )
            if mixed > parent + 1e-9 * (1.0 + abs(parent)):
                entropy_ok = False
                break
    return AssumptionReport(
        pointwise_ok=pointwise_ok,
        psd_ok=psd_ok,
        entropy_form_ok=entropy_ok,
        min_slack=min_slack,
        min_eigenvalue=min_eig,
        entropy_samples=samples,
    )


def _edge_form(c: np.ndarray, f: np.ndarray, g: np.ndarray) -> float:
    df = f[:, None] - f[None, :]
    dg = g[:, None] - g[None, :]
    return 0.5 * float(np.sum(c * df * dg))


def _symmetrized_on_support(gen: ReversibleGenerator):
    pi = gen.stationary.mass
    on = pi > 0
    if not _connected_on(on, gen.conductances.matrix):
        raise IrreducibilityError(
            "conductance graph is disconnected on the stationary support"
        )
    idx = np.flatnonzero(on)
    root = np.sqrt(pi[idx])
    Q = gen.rates[np.ix_(idx, idx)]
    A = root[:, None] * Q / root[None, :]
    return idx, root, 0.5 * (A + A.T)


def spectral_gap(gen: ReversibleGenerator) -> float:
    """Smallest nonzero eigenvalue of -L on the stationary support.

    The Poincare inequality var_pi(g) <= (1/gap) E(g, g) holds with
    equality for the gap eigenfunction; see :func:`spectral_gap_witness`.
    """
    gap, _ = spectral_gap_witness(gen)
    return gap


def spectral_gap_witness(gen: ReversibleGenerator) -> tuple[float, np.ndarray]:
    """Spectral gap and an eigenfunction attaining the Poincare constant."""
    if gen.space.size < 2 or int(np.sum(gen.stationary.mass > 0)) < 2:
        raise IrreducibilityError("spectral gap needs at least two supported states")
    idx, root, A = _symmetrized_on_support(gen)
    try:
        vals, vecs = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"symmetrized eigensolve failed: {exc}") from exc
    top = vals[-1]
    if abs(top) > 1e-8 * max(1.0, float(np.max(np.abs(vals)))):
        raise NumericError(f"leading eigenvalue {top!r} is not numerically zero")
    gap = -float(vals[-2])
    g = np.zeros(gen.space.size)
    g[idx] = vecs[:, -2] / root
    return gap, g


def variance(gen: ReversibleGenerator, g) -> float:
    """var_pi(g) under the generator's stationary measure."""
    g = np.asarray(g, dtype=float)
    pi = gen.stationary.mass
    mean = float(pi @ g)
    return float(pi @ (g - mean) ** 2)


def reweighted_poincare_residual(g, gm: GeneratorMixture) -> float:
    """Squared distance in L2(pi) from g to span{d pi_i / d pi}.

    Equivalently min over members of the span of the pi-variance of the
    difference, since the span contains the constants.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (gm.space.size,):
        raise DimensionMismatchError("function has wrong length")
    pi = gm.mix.parent.mass
    on = pi > 0
    B = np.zeros((gm.space.size, gm.m))
    B[on] = (gm.mix.component_matrix.T)[on] / pi[on, None]
    root = np.sqrt(pi[on])
    A = B[on] * root[:, None]
    y = g[on] * root
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return float(r @ r)


@dataclass(frozen=True)
class ConstantEstimate:
    """A lower bound on a worst-case ratio constant, with its witness."""

    value: float
    witness: np.ndarray
    mode: str
    starts: int
    iterations: int
    provenance: str = "estimated lower bound"


def estimate_lsi_constant(
    gen: ReversibleGenerator,
    mode: str = "lsi",
    seed: int = 0,
    starts: int = 32,
    max_iter: int = 10_000,
    extra_starts: tuple = (),
    mixture: MixtureModel | None = None,
) -> ConstantEstimate:
    """Multi-start mirror ascent on mu for the ratio KL(mu||pi) / D(mu||pi).

    ``mode='lsi'`` uses D = Fisher information, ``mode='mlsi'`` the entropy
    production.  The returned value is a certified lower bound on the true
    constant: either a ratio actually attained by the witness, or the exact
    near-stationary limit 2/gap (lsi) resp. 1/(2 gap) (mlsi), whichever is
    larger.  The ascent itself refuses iterates with KL below 1e-11, where
    the ratio of two vanishing quantities is floating-point noise; that
    neighborhood of pi is exactly what the spectral limit covers.  Random
    starts are flat Dirichlet draws on the support, plus one start tilted
    toward each mixture component when a mixture is supplied.
    """
    if mode not in ("lsi", "mlsi"):
        raise DimensionMismatchError(f"unknown mode {mode!r}")
    if not gen.irreducible:
        raise IrreducibilityError("constant estimation needs an irreducible chain")
    pi = gen.stationary.mass
    on = pi > 0
    idx = np.flatnonzero(on)
    c = gen.conductances.matrix[np.ix_(idx, idx)]
    p = pi[idx]
    n = idx.size

    def ratio_and_grad(x):
        # x is a positive probability vector on the support
        f = x / p
        logf = np.log(f)
        kl = float(np.sum(rel_entr(x, p)))
        if kl < 1e-11:
            return -math.inf, None
        if mode == "lsi":
            root = np.sqrt(f)
            d = root[:, None] - root[None, :]
            den = 0.5 * float(np.sum(c * d * d))
            dden = (c * d).sum(axis=1) / np.sqrt(x * p)
        else:
            d = f[:, None] - f[None, :]
            dl = logf[:, None] - logf[None, :]
            den = 0.5 * float(np.sum(c * d * dl))
            dden = ((c * dl).sum(axis=1) + (c * d).sum(axis=1) / f) / p
        if den <= 0:
            return -math.inf, None
        dkl = logf + 1.0
        grad = (dkl * den - kl * dden) / (den * den)
        return kl / den, grad

    def ascend(x0):
        x = np.clip(x0, 1e-12, None)
        x = x / x.sum()
        val, grad = ratio_and_grad(x)
        step = 1.0
        iters = 0
        for iters in range(1, max_iter + 1):
            if grad is None:
                break
            g = grad - float(x @ grad)
            norm = float(np.max(np.abs(g)))
            if norm < 1e-14:
                break
            improved = False
            for _ in range(50):
                y = x * np.exp(step * g / max(norm, 1e-30))
                y = np.clip(y, 1e-300, None)
                y = y / y.sum()
                new_val, new_grad = ratio_and_grad(y)
                if new_val > val:
                    x, val, grad = y, new_val, new_grad
                    improved = True
                    step *= 1.5
                    break
                step *= 0.5
            if not improved:
                break
            if step < 1e-16:
                break
        return val, x, iters

    # mu = pi (1 + eps h) with the gap eigenfunction h gives the exact limit
    # ratio as eps -> 0: KL ~ eps^2/2 ||h||^2 while FI ~ eps^2/4 E(h, h) and
    # EP ~ eps^2 E(h, h), so sup KL/D >= 2/gap resp. 1/(2 gap).
    gap, h_full = spectral_gap_witness(gen)
    limit_val = 2.0 / gap if mode == "lsi" else 0.5 / gap
    h = h_full[idx]
    tilt = p * (1.0 + (0.25 / max(float(np.max(np.abs(h))), 1e-300)) * h)

    rng = stream(seed, 0x151)
    start_points = [random_probability(rng, n) for _ in range(starts)]
    start_points.append(np.clip(tilt, 1e-12, None))
    if mixture is not None:
        for comp in mixture.components:
            tilt_c = 0.95 * comp.mass[idx] + 0.05 * p
            start_points.append(tilt_c / tilt_c.sum())
    for extra in extra_starts:
        mass = extra.mass if hasattr(extra, "mass") else np.asarray(extra, dtype=float)
        start_points.append(np.clip(mass[idx], 0.0, None))

    best_val, best_x, total_iters = limit_val, p * (1.0 + 1e-5 * h), 0
    for x0 in start_points:
        val, x, iters = ascend(x0)
        total_iters += iters
        if val > best_val:
            best_val, best_x = val, x
    best_x = np.clip(best_x, 0.0, None)
    witness = np.zeros(gen.space.size)
    witness[idx] = best_x / best_x.sum()
    return ConstantEstimate(
        value=best_val,
        witness=witness,
        mode=mode,
        starts=len(start_points),
        iterations=total_iters,
    )
