"""Grid discretization of 1D Langevin diffusions and the bimodal benchmark."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from mixlab.continuum import (
    GaussianMixture1D,
    Grid1D,
    continuum_divergences,
    discretize_langevin,
    grid_mixture,
    two_mode_report,
    two_mode_sweep,
)
from mixlab.dirichlet import spectral_gap
from mixlab.errors import ConfigurationError, PreconditionError


def test_gaussian_mixture_validation():
    with pytest.raises(ConfigurationError):
        GaussianMixture1D([0.0], [0.0], [1.0])
    with pytest.raises(ConfigurationError):
        GaussianMixture1D([0.0, 1.0], [1.0, 1.0], [0.7, 0.7])
    with pytest.raises(ConfigurationError):
        GaussianMixture1D([0.0, 1.0], [1.0, 1.0], [1.0, 0.0])
    g = GaussianMixture1D.symmetric_pair(3.0)
    assert np.allclose(g.means, [-3.0, 3.0])
    x = np.linspace(-6, 6, 101)
    assert quad(lambda t: g.density(np.array([t]))[0], -np.inf, np.inf)[0] == pytest.approx(1.0, abs=1e-9)
    assert g.mass_outside(-30.0, 30.0) < 1e-15
    assert x.shape == g.density(x).shape == g.score(x).shape == g.potential(x).shape


def test_grid_certify_and_refined():
    g = GaussianMixture1D.single(0.0)
    wide = Grid1D(-9.0, 9.0, 101)
    wide.certify(g)
    assert wide.refined().n == 201
    assert wide.refined().h == pytest.approx(wide.h / 2)
    narrow = Grid1D(-1.0, 1.0, 11)
    with pytest.raises(PreconditionError):
        narrow.certify(g)
    with pytest.raises(ConfigurationError):
        Grid1D(1.0, -1.0, 11)
    with pytest.raises(ConfigurationError):
        Grid1D(-1.0, 1.0, 2)
    d = Grid1D.default_for(GaussianMixture1D.symmetric_pair(4.0))
    assert (d.lo, d.hi, d.n) == (-12.0, 12.0, 801)


def test_discretized_conductances_are_geometric_means():
    grid = Grid1D(-6.0, 6.0, 41)
    gen = discretize_langevin(GaussianMixture1D.single(0.0), grid)
    pi = gen.stationary.mass
    expected = np.sqrt(pi[:-1] * pi[1:]) / grid.h**2
    i = np.arange(grid.n - 1)
    assert np.allclose(gen.conductances.matrix[i, i + 1], expected, rtol=1e-13)
    # off the tridiagonal everything vanishes
    mask = np.ones((grid.n, grid.n), dtype=bool)
    mask[i, i + 1] = mask[i + 1, i] = False
    assert np.all(gen.conductances.matrix[mask] == 0.0)


def test_ou_gap_converges_at_second_order():
    target = GaussianMixture1D.single(0.0)

    def gap_error(n):
        gen = discretize_langevin(target, Grid1D(-8.0, 8.0, n))
        return abs(spectral_gap(gen) - 1.0)

    ratio = gap_error(201) / gap_error(401)
    assert 3.5 < ratio < 4.5


def test_shifted_gaussian_closed_forms():
    b = 0.8
    mu = GaussianMixture1D.single(b)
    pi = GaussianMixture1D.single(0.0)
    est = continuum_divergences(mu, pi, Grid1D(-10.0, 10.0 + b, 801))
    assert est.kl == pytest.approx(b**2 / 2.0, abs=1e-12)
    assert est.fi == pytest.approx(b**2 / 4.0, abs=1e-12)
    assert est.kl_delta < 1e-12 and est.fi_delta < 1e-12


def test_simpson_quadrature_matches_adaptive_oracle():
    mu = GaussianMixture1D([-2.0, 2.0], [1.0, 1.0], [0.7, 0.3])
    pi = GaussianMixture1D.symmetric_pair(2.0)
    grid = Grid1D(-11.0, 11.0, 801)
    est = continuum_divergences(mu, pi, grid)

    def kl_ig(t):
        x = np.array([t])
        return float((mu.density(x) * np.log(mu.density(x) / pi.density(x)))[0])

    def fi_ig(t):
        x = np.array([t])
        return 0.25 * float((mu.density(x) * (mu.score(x) - pi.score(x)) ** 2)[0])

    kl_ref = quad(kl_ig, grid.lo, grid.hi, limit=200)[0]
    fi_ref = quad(fi_ig, grid.lo, grid.hi, limit=200)[0]
    assert est.kl == pytest.approx(kl_ref, abs=1e-10)
    assert est.fi == pytest.approx(fi_ref, abs=1e-10)


def test_continuum_divergences_rejects_leaky_window():
    mu = GaussianMixture1D.single(5.0)
    pi = GaussianMixture1D.single(0.0)
    with pytest.raises(PreconditionError):
        continuum_divergences(mu, pi, Grid1D(-4.0, 4.0, 101))


def test_grid_mixture_weights_recompose_exactly():
    target = GaussianMixture1D.symmetric_pair(2.5, w=0.6)
    gm = grid_mixture(target, n=301)
    mix = gm.mix
    recomposed = mix.weights.mass @ np.stack([c.mass for c in mix.components])
    assert np.max(np.abs(recomposed - mix.parent.mass)) < 1e-12
    # grid weights stay within the truncation leak of the nominal ones
    assert np.allclose(mix.weights.mass, [0.6, 0.4], atol=1e-9)


def test_two_mode_benchmark_light():
    study = two_mode_report(3.0, n=401)
    assert study.all_pass
    assert study.kl_weights_target == pytest.approx(
        0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    )
    # at separation 3 the overlap still shifts things at the 1e-2 scale
    assert study.kl == pytest.approx(study.kl_weights_target, abs=5e-2)
    assert np.allclose(study.lambda_star, [0.75, 0.25], atol=5e-2)
    assert study.kl_hull <= 2.0 * study.fi + 1e-9
    assert study.w2sq_hull <= 4.0 * study.fi + 1e-9
    d = study.to_dict()
    assert d["separation"] == 3.0 and len(d["reports"]) == 2
    with pytest.raises(ConfigurationError):
        two_mode_report(-1.0)


def test_two_mode_sweep_rows():
    rows = two_mode_sweep([1.0, 2.0], n=301)
    assert len(rows) == 2 and all(len(r) == 7 for r in rows)
    # fisher information decays with separation while kl grows toward its limit
    assert rows[1][2] < rows[0][2]
    assert rows[1][1] > rows[0][1]
