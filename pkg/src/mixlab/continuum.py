"""1D Gaussian mixtures, Langevin grid discretization, and the two-mode study.

The discretization rule is the load-bearing choice here: nearest-neighbor
rates exp(-(V(y)-V(x))/2)/h^2 make every edge conductance a geometric mean
of stationary masses, so the form-domination hypothesis holds on the grid
by the Cauchy-Schwarz inequality, edge by edge, for any mixture target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.special import ndtr

from .dirichlet import EdgeConductances, GeneratorMixture, ReversibleGenerator
from .errors import ConfigurationError, PreconditionError
from .measures import FiniteMeasure, MixtureModel, StateSpace, kl_to_hull, responsibilities
from .reports import PROVENANCE_EXACT, Constant, InequalityReport, make_report
from .serialize import digest
from .transport import w2_1d

_LEAK_TOL = 1e-10

# log-Sobolev and Talagrand constants of a unit-variance Gaussian under the
# quarter-convention Fisher information: KL <= 2 FI and W2^2 <= 4 FI
_GAUSSIAN_LSI = 2.0
_GAUSSIAN_TALAGRAND = 4.0


@dataclass(frozen=True, eq=False)
class GaussianMixture1D:
    """A finite mixture of one-dimensional Gaussians."""

    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        means = np.atleast_1d(np.asarray(self.means, dtype=float))
        variances = np.atleast_1d(np.asarray(self.variances, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if not (means.shape == variances.shape == weights.shape):
            raise ConfigurationError("means, variances and weights must have equal length")
        if not np.all(np.isfinite(means)):
            raise ConfigurationError("means must be finite")
        if np.any(variances <= 0) or not np.all(np.isfinite(variances)):
            raise ConfigurationError("variances must be positive and finite")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ConfigurationError("weights must be positive and sum to 1")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def single(cls, mean: float, variance: float = 1.0) -> "GaussianMixture1D":
        return cls(np.array([mean]), np.array([variance]), np.array([1.0]))

    @classmethod
    def symmetric_pair(cls, separation: float, w: float = 0.5) -> "GaussianMixture1D":
        return cls(
            np.array([-separation, separation]),
            np.array([1.0, 1.0]),
            np.array([w, 1.0 - w]),
        )

    @property
    def m(self) -> int:
        return self.means.size

    def component_density(self, x: np.ndarray) -> np.ndarray:
        """(m, len(x)) array of component densities."""
        x = np.asarray(x, dtype=float)
        z = (x[None, :] - self.means[:, None]) ** 2 / (2.0 * self.variances[:, None])
        norm = np.sqrt(2.0 * math.pi * self.variances)[:, None]
        return np.exp(-z) / norm

    def density(self, x) -> np.ndarray:
        return self.weights @ self.component_density(np.atleast_1d(x))

    def score(self, x) -> np.ndarray:
        """d/dx log density, analytic."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        comp = self.component_density(x)
        num = self.weights @ (comp * (self.means[:, None] - x[None, :]) / self.variances[:, None])
        return num / (self.weights @ comp)

    def potential(self, x) -> np.ndarray:
        """-log density (the Langevin drift potential, normalization included)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        comp = self.component_density(x)
        return -np.log(self.weights @ comp)

    def mass_outside(self, lo: float, hi: float) -> float:
        sig = np.sqrt(self.variances)
        low = ndtr((lo - self.means) / sig)
        high = 1.0 - ndtr((hi - self.means) / sig)
        return float(np.dot(self.weights, low + high))


@dataclass(frozen=True)
class Grid1D:
    """A uniform 1D grid; certified runs need negligible target mass outside."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ConfigurationError("grid needs lo < hi")
        if self.n < 3:
            raise ConfigurationError("grid needs at least three points")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    def refined(self) -> "Grid1D":
        """Same window with the spacing halved."""
        return Grid1D(self.lo, self.hi, 2 * self.n - 1)

    def leak(self, target: GaussianMixture1D) -> float:
        return target.mass_outside(self.lo, self.hi)

    def certify(self, target: GaussianMixture1D) -> None:
        leak = self.leak(target)
        if leak > _LEAK_TOL:
            raise PreconditionError(
                f"target mass {leak:.3e} outside [{self.lo}, {self.hi}] exceeds {_LEAK_TOL:g}"
            )

    @classmethod
    def default_for(cls, target: GaussianMixture1D, n: int = 801, pad: float = 8.0) -> "Grid1D":
        sig = float(np.max(np.sqrt(target.variances)))
        return cls(float(np.min(target.means)) - pad * sig, float(np.max(target.means)) + pad * sig, n)


def _potential_table(target, grid: Grid1D) -> tuple[np.ndarray, tuple[str, ...]]:
    x = grid.points()
    notes: tuple[str, ...] = ()
    if isinstance(target, GaussianMixture1D):
        v = target.potential(x)
        leak = grid.leak(target)
        if leak > _LEAK_TOL:
            notes = (f"uncertified: target mass {leak:.3e} outside the grid window",)
    elif callable(target):
        v = np.asarray([float(target(xi)) for xi in x])
        notes = ("potential table supplied; truncation not certified",)
    else:
        v = np.asarray(target, dtype=float)
        if v.shape != (grid.n,):
            raise ConfigurationError(f"potential table has shape {v.shape}, expected ({grid.n},)")
        notes = ("potential table supplied; truncation not certified",)
    if not np.all(np.isfinite(v)):
        raise ConfigurationError("potential must be finite on the grid")
    return v, notes


def discretize_langevin(target, grid: Grid1D) -> ReversibleGenerator:
    """Nearest-neighbor chain with rates exp(-(V(y)-V(x))/2) / h^2.

    ``target`` may be a GaussianMixture1D, a callable potential V(x), or a
    table of potential values on the grid points.  The stationary measure
    is the grid-normalized Gibbs weight exp(-V); detailed balance is exact
    by construction and each conductance equals sqrt(pi(x) pi(y)) / h^2.
    """
    v, notes = _potential_table(target, grid)
    w = np.exp(-(v - v.min()))
    pi = w / w.sum()
    space = StateSpace.line(grid.points())
    stationary = FiniteMeasure(space, pi)

    c = np.zeros((grid.n, grid.n))
    geo = np.sqrt(stationary.mass[:-1] * stationary.mass[1:]) / grid.h**2
    i = np.arange(grid.n - 1)
    c[i, i + 1] = geo
    c[i + 1, i] = geo
    return ReversibleGenerator.from_conductances(EdgeConductances(space, c), stationary, notes=notes)


def grid_mixture(target: GaussianMixture1D, grid: Grid1D | None = None, n: int = 801) -> GeneratorMixture:
    """Discretize a Gaussian mixture and its components on a common grid.

    The mixture weights are adjusted to the grid: w_i Z_i / Z, where Z_i
    and Z are the grid sums of the component and parent densities, which
    makes the grid parent exactly the reweighted sum of grid components.
    """
    if grid is None:
        grid = Grid1D.default_for(target, n=n)
    grid.certify(target)
    x = grid.points()
    comp_density = target.component_density(x)
    z_comp = comp_density.sum(axis=1)
    parent_density = target.weights @ comp_density
    z_tot = parent_density.sum()

    parent_gen = discretize_langevin(target, grid)
    space = parent_gen.space
    components = []
    gens = []
    for i in range(target.m):
        comp = GaussianMixture1D.single(float(target.means[i]), float(target.variances[i]))
        gen = discretize_langevin(comp, grid)
        gens.append(gen)
        components.append(gen.stationary)
    eff_weights = target.weights * z_comp / z_tot
    mix = MixtureModel.from_components(components, eff_weights, parent=parent_gen.stationary)
    return GeneratorMixture(mix, parent_gen, tuple(gens))


@dataclass(frozen=True)
class DivergenceEstimate:
    """Quadrature values with the change under one grid halving attached."""

    kl: float
    fi: float
    kl_delta: float
    fi_delta: float
    grid: Grid1D


def continuum_divergences(
    mu: GaussianMixture1D, pi: GaussianMixture1D, grid: Grid1D
) -> DivergenceEstimate:
    """KL and quarter-convention Fisher information between 1D mixtures.

    kl = int mu log(mu/pi), fi = (1/4) int mu (score_mu - score_pi)^2,
    both by composite Simpson quadrature with analytic scores.  Values are
    reported from the halved grid; deltas record the refinement change.
    """
    leak = grid.leak(mu)
    if leak > _LEAK_TOL:
        raise PreconditionError(
            f"mu leaves mass {leak:.3e} outside the quadrature window [{grid.lo}, {grid.hi}]"
        )

    def values(g: Grid1D) -> tuple[float, float]:
        x = g.points()
        dmu = mu.density(x)
        dpi = pi.density(x)
        if np.any(dpi <= 0) or np.any(dmu < 0):
            raise PreconditionError("densities must be strictly positive on the window")
        kl = float(simpson(dmu * np.log(dmu / dpi), x=x))
        fi = 0.25 * float(simpson(dmu * (mu.score(x) - pi.score(x)) ** 2, x=x))
        return kl, fi

    coarse = values(grid)
    fine = values(grid.refined())
    return DivergenceEstimate(
        kl=max(fine[0], 0.0),
        fi=max(fine[1], 0.0),
        kl_delta=abs(fine[0] - coarse[0]),
        fi_delta=abs(fine[1] - coarse[1]),
        grid=grid,
    )


@dataclass(frozen=True, eq=False)
class TwoModeStudy:
    """The symmetric-pair benchmark: large KL, tiny Fisher information.

    pi = (1/2) N(-m, 1) + (1/2) N(m, 1) against mu with weights (3/4, 1/4)
    on the same components.  ``kl_weights_target`` is KL((3/4,1/4)||(1/2,1/2)),
    the separation-independent limit of the relative entropy.
    """

    separation: float
    grid: Grid1D
    kl: float
    fi: float
    kl_delta: float
    fi_delta: float
    kl_weights_target: float
    lambda_star: np.ndarray
    kl_hull: float
    w2sq_hull: float
    reports: tuple[InequalityReport, ...]
    mixture: GeneratorMixture

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.reports)

    def to_dict(self) -> dict:
        return {
            "separation": self.separation,
            "grid": {"lo": self.grid.lo, "hi": self.grid.hi, "n": self.grid.n},
            "kl": self.kl,
            "fi": self.fi,
            "kl_delta": self.kl_delta,
            "fi_delta": self.fi_delta,
            "kl_weights_target": self.kl_weights_target,
            "lambda_star": self.lambda_star,
            "kl_hull": self.kl_hull,
            "w2sq_hull": self.w2sq_hull,
            "reports": [r.to_dict() for r in self.reports],
        }


_TWO_MODE_WEIGHTS = np.array([0.75, 0.25])


def two_mode_report(separation: float, grid: Grid1D | None = None, n: int = 801) -> TwoModeStudy:
    """Reproduce the bimodal benchmark at the given mode separation.

    Checks the two reweighted bounds KL(mu||hull) <= 2 fi and
    W2^2(mu, lambda*-mixture) <= 4 fi on the grid chain, with fi the
    continuum Fisher information of mu relative to pi.
    """
    if separation < 0:
        raise ConfigurationError("separation must be nonnegative")
    pi = GaussianMixture1D.symmetric_pair(separation)
    mu = GaussianMixture1D(
        pi.means.copy(), pi.variances.copy(), _TWO_MODE_WEIGHTS.copy()
    )
    if grid is None:
        grid = Grid1D.default_for(pi, n=n)
    grid.certify(pi)
    grid.certify(mu)

    cont = continuum_divergences(mu, pi, grid)
    gm = grid_mixture(pi, grid)
    mix = gm.mix
    mu_hat = FiniteMeasure(gm.space, mu.density(grid.points()))

    lam = responsibilities(mu_hat, mix)
    hull = kl_to_hull(mu_hat, mix)
    w2sq = w2_1d(mu_hat, mix.reweighted(lam.mass))

    dig = digest({"separation": separation, "grid": [grid.lo, grid.hi, grid.n]})
    consts = lambda name, val: (Constant(name, val, PROVENANCE_EXACT),)
    reports = (
        make_report(
            "two_mode_lsi_bound",
            hull.value,
            _GAUSSIAN_LSI * cont.fi,
            constants=consts("C_lsi_gaussian", _GAUSSIAN_LSI),
            inputs_digest=dig,
            note="grid KL(mu||hull) <= 2 x continuum FI(mu||pi)",
        ),
        make_report(
            "two_mode_talagrand_bound",
            w2sq,
            _GAUSSIAN_TALAGRAND * cont.fi,
            constants=consts("C_talagrand_gaussian", _GAUSSIAN_TALAGRAND),
            inputs_digest=dig,
            note="grid W2^2(mu, lambda*-mixture) <= 4 x continuum FI(mu||pi)",
        ),
    )
    kl_weights_target = float(
        np.sum(_TWO_MODE_WEIGHTS * np.log(_TWO_MODE_WEIGHTS / np.array([0.5, 0.5])))
    )
    return TwoModeStudy(
        separation=float(separation),
        grid=grid,
        kl=cont.kl,
        fi=cont.fi,
        kl_delta=cont.kl_delta,
        fi_delta=cont.fi_delta,
        kl_weights_target=kl_weights_target,
        lambda_star=lam.mass,
        kl_hull=hull.value,
        w2sq_hull=w2sq,
        reports=reports,
        mixture=gm,
    )


def two_mode_sweep(separations, grid: Grid1D | None = None, n: int = 801):
    """Rows (m, kl, fi, lambda1, lambda2, kl_hull, w2sq_hull) per separation."""
    rows = []
    for sep in separations:
        study = two_mode_report(float(sep), grid=grid, n=n)
        rows.append(
            (
                study.separation,
                study.kl,
                study.fi,
                float(study.lambda_star[0]),
                float(study.lambda_star[1]),
                study.kl_hull,
                study.w2sq_hull,
            )
        )
    return rows
