"""Measure layer: spaces, divergences, mixtures, and the hull projection."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from scipy.special import rel_entr

from mixlab.errors import (
    DimensionMismatchError,
    InvariantViolationError,
    SupportError,
)
from mixlab.measures import (
    FiniteMeasure,
    MixtureModel,
    StateSpace,
    decompose,
    entropy_decomposition,
    kl_divergence,
    kl_to_hull,
    lift_joint,
    responsibilities,
    triangle_defect,
    tv_distance,
)
from mixlab.models import build_block_mixture
from mixlab.rng import random_probability, stream

from helpers import instances, random_measure


def test_triangle_defect_matches_brute_force():
    rng = stream(0, "triangle")
    pts = rng.uniform(size=(7, 3))
    d = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
    brute = max(
        d[i, k] - d[i, j] - d[j, k]
        for i in range(7)
        for j in range(7)
        for k in range(7)
    )
    assert triangle_defect(d) == pytest.approx(brute, abs=1e-15)
    assert triangle_defect(d) <= 0

    broken = d.copy()
    broken[0, 6] = broken[6, 0] = d[0, 6] + 5.0  # detour now cheaper
    brute = max(
        broken[i, k] - broken[i, j] - broken[j, k]
        for i in range(7)
        for j in range(7)
        for k in range(7)
    )
    assert brute > 0
    assert triangle_defect(broken) == pytest.approx(brute, abs=1e-15)


def test_line_space_has_coords_and_metric():
    sp = StateSpace.line([0.0, 0.5, 2.0])
    assert sp.size == 3
    assert np.array_equal(sp.metric, np.abs(sp.coords[:, None] - sp.coords[None, :]))
    with pytest.raises(DimensionMismatchError):
        StateSpace.line([0.0, 1.0, 1.0])


def test_metric_validation():
    ok = np.array([[0.0, 1.0], [1.0, 0.0]])
    StateSpace(size=2, metric=ok)
    with pytest.raises(DimensionMismatchError):
        StateSpace(size=2, metric=np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(DimensionMismatchError):
        StateSpace(size=2, metric=np.array([[0.5, 1.0], [1.0, 0.0]]))
    with pytest.raises(DimensionMismatchError):
        StateSpace(size=2, metric=np.array([[0.0, -1.0], [-1.0, 0.0]]))
    bad_triangle = np.array(
        [[0.0, 1.0, 3.0], [1.0, 0.0, 1.0], [3.0, 1.0, 0.0]]
    )
    with pytest.raises(DimensionMismatchError):
        StateSpace(size=3, metric=bad_triangle)


def test_finite_measure_normalizes_and_flushes():
    sp = StateSpace(size=3)
    mu = FiniteMeasure(sp, [2.0, 2.0, 1e-310])
    assert mu.mass[2] == 0.0
    assert mu.mass[0] == pytest.approx(0.5)
    assert mu.correction == pytest.approx(3.0)
    with pytest.raises(SupportError):
        FiniteMeasure(sp, [1.0, -0.5, 0.0])
    with pytest.raises(SupportError):
        FiniteMeasure(sp, [math.nan, 1.0, 0.0])
    with pytest.raises(SupportError):
        FiniteMeasure(sp, [0.0, 0.0, 0.0])


def test_kl_matches_direct_sum():
    sp = StateSpace(size=6)
    rng = stream(1, "kl")
    for _ in range(20):
        mu = FiniteMeasure(sp, random_probability(rng, 6))
        nu = FiniteMeasure(sp, random_probability(rng, 6))
        assert kl_divergence(mu, nu) == pytest.approx(
            float(np.sum(rel_entr(mu.mass, nu.mass))), abs=1e-14
        )


def test_kl_two_point_closed_form_and_infinity():
    sp = StateSpace(size=2)
    mu = FiniteMeasure(sp, [0.7, 0.3])
    nu = FiniteMeasure(sp, [0.4, 0.6])
    expected = 0.7 * math.log(0.7 / 0.4) + 0.3 * math.log(0.3 / 0.6)
    assert kl_divergence(mu, nu) == pytest.approx(expected, rel=1e-15)
    point = FiniteMeasure(StateSpace(size=3), [1.0, 0.0, 0.0])
    wide = FiniteMeasure(StateSpace(size=3), [0.0, 0.5, 0.5])
    assert kl_divergence(wide, point) == math.inf


def test_tv_is_half_l1():
    sp = StateSpace(size=5)
    rng = stream(2, "tv")
    mu = FiniteMeasure(sp, random_probability(rng, 5))
    nu = FiniteMeasure(sp, random_probability(rng, 5))
    assert tv_distance(mu, nu) == pytest.approx(
        0.5 * np.abs(mu.mass - nu.mass).sum(), abs=1e-15
    )
    assert tv_distance(mu, mu) == 0.0


def test_mixture_certifies_parent():
    sp = StateSpace(size=3)
    a = FiniteMeasure(sp, [0.5, 0.5, 0.0])
    b = FiniteMeasure(sp, [0.0, 0.5, 0.5])
    mix = MixtureModel.from_components([a, b], [0.6, 0.4])
    assert mix.parent.mass == pytest.approx([0.3, 0.5, 0.2])
    wrong = FiniteMeasure(sp, [0.4, 0.4, 0.2])
    with pytest.raises(InvariantViolationError):
        MixtureModel.from_components([a, b], [0.6, 0.4], parent=wrong)
    with pytest.raises(SupportError):
        MixtureModel.from_components([a, b], [1.0, 0.0])


def test_reweighted_hull_point():
    mix = build_block_mixture(sizes=(2, 3), bridge=0.1).mix
    lam = [0.25, 0.75]
    nu = mix.reweighted(lam)
    assert nu.mass == pytest.approx(
        0.25 * mix.components[0].mass + 0.75 * mix.components[1].mass
    )
    with pytest.raises(SupportError):
        mix.reweighted([-0.1, 1.1])


def test_responsibilities_match_direct_sum():
    rng = stream(3, "resp")
    for k in range(6):
        mu, gm = next(instances(1, seed=100 + k))
        mix = gm.mix
        ratio = np.zeros(mix.space.size)
        on = mix.parent.mass > 0
        ratio[on] = mu.mass[on] / mix.parent.mass[on]
        expected = mix.weights.mass * (mix.component_matrix @ ratio)
        lam = responsibilities(mu, mix)
        assert lam.mass == pytest.approx(expected, abs=1e-14)
        assert lam.mass.sum() == pytest.approx(1.0, abs=1e-12)
    del rng


def test_decompose_certificates_and_zero_mass_fallback():
    for k in range(9):
        mu, gm = next(instances(1, seed=200 + k))
        dec = decompose(mu, gm.mix)
        assert dec.recomposition_residual <= 1e-12
        assert dec.ratio_identity_residual <= 1e-12

    # mass confined to one block forces the other responsibility to zero
    gm = build_block_mixture(sizes=(2, 2), bridge=0.0)
    mass = np.zeros(4)
    mass[:2] = [0.4, 0.6]
    mu = FiniteMeasure(gm.space, mass)
    dec = decompose(mu, gm.mix)
    assert dec.lambda_star.mass[1] == 0.0
    assert dec.zero_mass_fallbacks == frozenset({1})
    assert dec.conditionals[1].mass == pytest.approx(gm.mix.components[1].mass)


def test_entropy_decomposition_identity():
    for k in range(12):
        mu, gm = next(instances(1, seed=300 + k))
        ed = entropy_decomposition(mu, gm.mix)
        assert ed.residual <= 1e-10
        assert ed.kl_total == pytest.approx(ed.kl_weights + ed.within_sum, abs=1e-10)
        assert ed.kl_weights >= 0 and ed.within_sum >= 0


def test_entropy_decomposition_reports_infinite_kl():
    sp = StateSpace(size=3)
    a = FiniteMeasure(sp, [0.5, 0.5, 0.0])
    b = FiniteMeasure(sp, [0.2, 0.8, 0.0])
    mix = MixtureModel.from_components([a, b], [0.5, 0.5])
    mu = FiniteMeasure(sp, [0.0, 0.5, 0.5])
    ed = entropy_decomposition(mu, mix)
    assert ed.kl_total == math.inf
    assert math.isnan(ed.kl_weights)


def test_kl_to_hull_recovers_member_weights():
    # disjoint blocks make the components linearly independent, so the
    # projection of an actual hull point is unique
    gm = build_block_mixture(sizes=(3, 2), bridge=0.0)
    target = [0.3, 0.7]
    mu = gm.mix.reweighted(target)
    proj = kl_to_hull(mu, gm.mix)
    assert proj.converged and proj.monotone
    assert proj.value <= 1e-12
    assert proj.lambda_hat.mass == pytest.approx(target, abs=1e-5)


def test_kl_to_hull_matches_scalar_minimization():
    mu, gm = next(instances(1, seed=77))
    mix = gm.mix
    if mix.m != 2:  # pick a 2-component instance for the 1D oracle
        gm = build_block_mixture(sizes=(3, 3), bridge=0.05)
        mix = gm.mix
        mu = random_measure(gm, stream(77, "oracle-mu"))

    def objective(t):
        nu = mix.reweighted([t, 1.0 - t])
        return kl_divergence(mu, nu)

    res = minimize_scalar(objective, bounds=(1e-9, 1 - 1e-9), method="bounded",
                          options={"xatol": 1e-12})
    proj = kl_to_hull(mu, mix)
    assert proj.value == pytest.approx(res.fun, abs=1e-8)
    assert proj.monotone
    assert proj.kkt_residual <= 1e-6


def test_kl_to_hull_never_beats_chain_rule_bound():
    for k in range(10):
        mu, gm = next(instances(1, seed=400 + k))
        ed = entropy_decomposition(mu, gm.mix)
        proj = kl_to_hull(mu, gm.mix)
        assert proj.value <= ed.kl_total - ed.kl_weights + 1e-9
        assert proj.monotone


def test_kl_to_hull_rejects_uncovered_mass():
    sp = StateSpace(size=3)
    a = FiniteMeasure(sp, [0.5, 0.5, 0.0])
    mix = MixtureModel.from_components([a], [1.0])
    mu = FiniteMeasure(sp, [0.2, 0.3, 0.5])
    with pytest.raises(SupportError):
        kl_to_hull(mu, mix)


def test_lift_joint_preserves_divergence():
    for k in range(6):
        mu, gm = next(instances(1, seed=500 + k))
        joint_mu, joint_pi = lift_joint(mu, gm.mix)
        lifted_kl = float(np.sum(rel_entr(joint_mu.table, joint_pi.table)))
        assert lifted_kl == pytest.approx(kl_divergence(mu, gm.mix.parent), abs=1e-10)
        lam = responsibilities(mu, gm.mix)
        assert joint_mu.index_marginal().mass == pytest.approx(lam.mass, abs=1e-12)
        assert joint_pi.state_marginal().mass == pytest.approx(
            gm.mix.parent.mass, abs=1e-12
        )
