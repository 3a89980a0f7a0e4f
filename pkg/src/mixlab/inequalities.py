"""Verification suites for the reweighted inequalities.

Each suite turns one (measure, generator mixture) instance into a list of
InequalityReports.  Parameter-free steps (the entropy chain rule, the hull
projection bound, the convexity and form-domination steps) are
theorem-grade; anything involving a transport-information or log-Sobolev
constant carries the constant and its provenance in the report.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dirichlet import (
    GeneratorMixture,
    check_assumption,
    dirichlet_form,
    entropy_production,
    fisher_information,
    reweighted_poincare_residual,
    spectral_gap,
)
from .errors import PreconditionError, SupportError
from .measures import FiniteMeasure, decompose, entropy_decomposition, kl_to_hull
from .reports import (
    PROVENANCE_EXACT,
    PROVENANCE_PROBED,
    PROVENANCE_USER,
    Constant,
    InequalityReport,
    make_report,
)
from .rng import random_probability, stream
from .serialize import digest
from .transport import AlphaFunction, CostMatrix, ot_cost, ot_to_hull

_IDENTITY_RHS = 1e-10


def _alpha_constants(alpha: AlphaFunction, provenance: str) -> tuple[Constant, ...]:
    return (
        Constant("alpha_scale", alpha.scale, provenance),
        Constant("alpha_exponent", alpha.exponent, provenance),
    )


def _as_constant(value, name: str, default_provenance: str = PROVENANCE_USER) -> Constant:
    if isinstance(value, Constant):
        return Constant(name, value.value, value.provenance)
    return Constant(name, float(value), default_provenance)


def _instance_digest(mu: FiniteMeasure, gm: GeneratorMixture, extra: dict | None = None) -> str:
    doc = {
        "mu": mu.mass,
        "weights": gm.mix.weights.mass,
        "components": [c.mass for c in gm.mix.components],
        "parent_rates": gm.parent_generator.rates,
    }
    if extra:
        doc.update(extra)
    return digest(doc)


def _require_assumption(gm: GeneratorMixture, seed: int):
    rep = check_assumption(gm, seed=seed)
    if not rep.quadratic_ok:
        raise PreconditionError(
            "form domination fails: pointwise check and PSD fallback both negative "
            f"(min slack {rep.min_slack:.3e}, min eigenvalue {rep.min_eigenvalue:.3e})"
        )
    return rep


@dataclass(frozen=True)
class ComponentTiProbe:
    """Sampled evidence that component i satisfies alpha(T_c(nu, pi_i)) <= FI_i.

    ``worst_margin`` is the minimum of FI - alpha(T) over the probe set;
    ``worst_ratio`` the maximum of alpha(T)/FI.  A probe certifies the
    hypothesis only on the sampled measures, never in general.
    """

    component: int
    count: int
    worst_margin: float
    worst_ratio: float
    certified: bool


def probe_component_ti(
    gm: GeneratorMixture,
    cost: CostMatrix,
    alpha: AlphaFunction,
    *,
    seed: int = 0,
    probes: int = 200,
) -> tuple[ComponentTiProbe, ...]:
    """Test the component transport-information hypothesis on random measures."""
    results = []
    for i, gen in enumerate(gm.component_generators):
        pi_i = gm.mix.components[i]
        support = pi_i.support
        rng = stream(seed, "ti-probe", i)
        worst_margin = np.inf
        worst_ratio = 0.0
        ok = True
        for _ in range(probes):
            mass = np.zeros(gm.space.size)
            mass[support] = random_probability(rng, support.size)
            nu = FiniteMeasure(gm.space, mass)
            t = ot_cost(nu, pi_i, cost).value
            fi = fisher_information(nu, gen)
            a = alpha(t)
            margin = fi - a
            worst_margin = min(worst_margin, margin)
            if fi > 0:
                worst_ratio = max(worst_ratio, a / fi)
            elif a > 1e-12:
                worst_ratio = np.inf
            if margin < -1e-9 * (1.0 + abs(fi)):
                ok = False
        results.append(
            ComponentTiProbe(
                component=i,
                count=probes,
                worst_margin=float(worst_margin),
                worst_ratio=float(worst_ratio),
                certified=ok,
            )
        )
    return tuple(results)


def calibrate_alpha(
    gm: GeneratorMixture,
    cost: CostMatrix,
    *,
    seed: int = 0,
    probes: int = 200,
    exponent: float = 2.0,
    safety: float = 1.25,
) -> AlphaFunction:
    """Fit the scale of alpha(x) = (x/a)^p so every probe satisfies alpha(T) <= FI.

    The returned function is only probe-certified: the scale is the worst
    observed ratio inflated by ``safety``.  Useful for costs with no
    theorem-backed rate function at hand.  The quadratic default matches
    how the two sides vanish near stationarity (transport linearly, Fisher
    information quadratically); exponent 1 cannot hold near pi_i at any
    scale, so sub-quadratic fits are sample-set artifacts.
    """
    need = 0.0
    for i, gen in enumerate(gm.component_generators):
        pi_i = gm.mix.components[i]
        support = pi_i.support
        rng = stream(seed, "alpha-calibration", i)
        for _ in range(probes):
            mass = np.zeros(gm.space.size)
            mass[support] = random_probability(rng, support.size)
            nu = FiniteMeasure(gm.space, mass)
            t = ot_cost(nu, pi_i, cost).value
            fi = fisher_information(nu, gen)
            if fi <= 0:
                continue
            # need a >= t / fi^(1/p) so that (t/a)^p <= fi
            need = max(need, t / fi ** (1.0 / exponent))
    scale = max(need * safety, 1e-12)
    return AlphaFunction.power(scale, exponent)


def tv_alpha(gm: GeneratorMixture, cost: CostMatrix) -> AlphaFunction:
    """A certified rate function from the exact component Poincare constants.

    Chain of inequalities, valid for any nu and every component: with
    g = sqrt(dnu/dpi_i), TV(nu, pi_i)^2 <= ||g - 1||^2 = 2 var(g)/(1 + pi_i(g))
    <= 2 C_P FI_i, and T_c(nu, pi_i) <= max(c) TV since each moved unit of
    mass costs at most the largest cost entry.  Together
    alpha(x) = (x / (2 sqrt(C_P) max(c)))^2 satisfies alpha(T_c) <= FI
    unconditionally, so reports built on it are theorem-grade (if loose).
    """
    cp = exact_component_poincare(gm).value
    cmax = float(np.max(cost.matrix))
    if cmax <= 0:
        raise PreconditionError("cost matrix has no positive entry")
    return AlphaFunction.power(2.0 * np.sqrt(cp) * cmax, 2.0)


def verify_reweighted_ti(
    mu: FiniteMeasure,
    gm: GeneratorMixture,
    cost: CostMatrix,
    alpha: AlphaFunction,
    *,
    seed: int = 0,
    probes: int = 200,
    probe_results: tuple[ComponentTiProbe, ...] | None = None,
    alpha_provenance: str = PROVENANCE_PROBED,
) -> list[InequalityReport]:
    """Check the reweighted transport-information inequality and its proof steps.

    Emits, in order: the component hypothesis probe (random measures plus
    the actual conditionals of ``mu``), the end-to-end bound
    alpha(T_c(mu, C)) <= FI(mu||pi), the convexity step, the parameter-free
    form-domination step, and the specific-witness transport bound.
    """
    _require_assumption(gm, seed)
    if probe_results is None:
        probe_results = probe_component_ti(gm, cost, alpha, seed=seed, probes=probes)

    mix = gm.mix
    parent = gm.parent_generator
    dec = decompose(mu, mix)
    lam = dec.lambda_star.mass
    dig = _instance_digest(mu, gm, {"cost": cost.matrix, "alpha": [alpha.scale, alpha.exponent]})
    alpha_consts = _alpha_constants(alpha, alpha_provenance)

    hull = ot_to_hull(mu, mix, cost)
    fi_parent = fisher_information(mu, parent)

    # hypothesis margin over probes and over the witnesses actually used
    worst_probe = min(p.worst_margin for p in probe_results)
    worst_ratio = max(p.worst_ratio for p in probe_results)
    witness_terms = np.zeros(mix.m)
    witness_margin = np.inf
    for i, gen in enumerate(gm.component_generators):
        if lam[i] == 0.0:
            continue
        t_i = ot_cost(dec.conditionals[i], mix.components[i], cost).value
        fi_i = fisher_information(dec.conditionals[i], gen)
        witness_terms[i] = alpha(t_i)
        witness_margin = min(witness_margin, fi_i - witness_terms[i])
    hypothesis_margin = min(worst_probe, witness_margin)

    reports = [
        make_report(
            "rti_component_probe",
            -hypothesis_margin,
            0.0,
            constants=alpha_consts,
            inputs_digest=dig,
            note=(
                f"{len(probe_results)} components x {probe_results[0].count} random probes "
                f"plus the mu-conditionals; worst alpha(T)/FI ratio {worst_ratio:.6g}"
            ),
        ),
        make_report(
            "rti_end_to_end",
            alpha(hull.value),
            fi_parent,
            constants=alpha_consts,
            inputs_digest=dig,
            note="alpha(T_c(mu, hull)) <= FI(mu||pi)",
        ),
        make_report(
            "rti_convexity_step",
            alpha(hull.value),
            float(np.dot(lam, witness_terms)),
            inputs_digest=dig,
            note="alpha(T_c(mu, hull)) <= sum_i lambda*_i alpha(T_c(mu_i, pi_i))",
        ),
    ]

    # form-domination step: sum_i w_i E_i(sqrt(f), sqrt(f)) <= FI(mu||pi)
    pi = mix.parent.mass
    ratio = np.zeros_like(pi)
    on = pi > 0
    ratio[on] = mu.mass[on] / pi[on]
    root = np.sqrt(ratio)
    weighted = sum(
        w * dirichlet_form(gen, root)
        for w, gen in zip(mix.weights.mass, gm.component_generators)
    )
    reports.append(
        make_report(
            "rti_form_domination",
            weighted,
            fi_parent,
            inputs_digest=dig,
            note="sum_i w_i E_i(sqrt(dmu/dpi)) <= E(sqrt(dmu/dpi))",
        )
    )

    witness_cost = ot_cost(mu, mix.reweighted(lam), cost).value
    reports.append(
        make_report(
            "rti_witness",
            alpha(witness_cost),
            fi_parent,
            constants=alpha_consts,
            inputs_digest=dig,
            note="alpha(T_c(mu, sum_i lambda*_i pi_i)) <= FI(mu||pi)",
        )
    )
    return reports


def verify_reweighted_lsi(
    mu: FiniteMeasure,
    gm: GeneratorMixture,
    constants: dict | None = None,
    *,
    seed: int = 0,
) -> list[InequalityReport]:
    """Check the reweighted log-Sobolev theorem and the entropy chain rule.

    ``constants`` may carry "C" (log-Sobolev constant of the components)
    and/or "C_prime" (modified log-Sobolev constant), as floats or
    Constant records.  The MLSI branch additionally needs the entropy-form
    domination, so it refuses to run on instances where only the PSD
    fallback of the form check holds.
    """
    constants = dict(constants or {})
    rep = _require_assumption(gm, seed)
    mix = gm.mix
    dig = _instance_digest(mu, gm)

    ed = entropy_decomposition(mu, mix)
    decomposed = ed.kl_total - ed.kl_weights if np.isfinite(ed.kl_total) else np.inf
    try:
        hull_value = kl_to_hull(mu, mix).value
    except SupportError:
        hull_value = np.inf

    reports = [
        make_report(
            "rlsi_hull_vs_decomposition",
            hull_value,
            decomposed,
            inputs_digest=dig,
            note="KL(mu||C) <= KL(mu||pi) - KL(lambda*||w)",
        )
    ]
    if np.isfinite(ed.kl_total):
        reports.append(
            make_report(
                "entropy_chain_rule",
                abs(ed.residual),
                _IDENTITY_RHS,
                inputs_digest=dig,
                note="|KL(mu||pi) - KL(lambda*||w) - sum_i lambda*_i KL(mu_i||pi_i)|",
            )
        )

    if "C" in constants:
        c_lsi = _as_constant(constants["C"], "C_lsi")
        reports.append(
            make_report(
                "rlsi_lsi_bound",
                decomposed,
                c_lsi.value * fisher_information(mu, gm.parent_generator),
                constants=(c_lsi,),
                inputs_digest=dig,
                note="KL(mu||pi) - KL(lambda*||w) <= C FI(mu||pi)",
            )
        )
    if "C_prime" in constants:
        if not (rep.pointwise_ok or rep.entropy_form_ok):
            raise PreconditionError(
                "MLSI branch needs entropy-form domination; only the quadratic "
                "PSD fallback holds on this instance"
            )
        c_mlsi = _as_constant(constants["C_prime"], "C_mlsi")
        reports.append(
            make_report(
                "rlsi_mlsi_bound",
                decomposed,
                c_mlsi.value * entropy_production(mu, gm.parent_generator),
                constants=(c_mlsi,),
                inputs_digest=dig,
                note="KL(mu||pi) - KL(lambda*||w) <= C' EP(mu||pi)",
            )
        )
    return reports


def exact_component_poincare(gm: GeneratorMixture) -> Constant:
    """max_i 1/gap_i over the component chains, an exact Poincare constant."""
    value = max(1.0 / spectral_gap(gen) for gen in gm.component_generators)
    return Constant("C_poincare", value, PROVENANCE_EXACT)


def verify_corollaries(
    mu: FiniteMeasure,
    gm: GeneratorMixture,
    c_metric: CostMatrix | None = None,
    constants: dict | None = None,
    *,
    seed: int = 0,
    random_g: int = 50,
) -> list[InequalityReport]:
    """Check the reweighted Talagrand, TV and Poincare corollaries.

    C_poincare defaults to the exact max_i 1/gap_i; C_talagrand has no
    default (the Talagrand report is emitted only when it is supplied).
    """
    constants = dict(constants or {})
    _require_assumption(gm, seed)
    mix = gm.mix
    dig = _instance_digest(mu, gm)

    if "C_poincare" in constants:
        c_poin = _as_constant(constants["C_poincare"], "C_poincare")
    else:
        c_poin = exact_component_poincare(gm)

    ed = entropy_decomposition(mu, mix)
    fi = fisher_information(mu, gm.parent_generator)
    reports = []

    if "C_talagrand" in constants and c_metric is not None:
        c_tal = _as_constant(constants["C_talagrand"], "C_talagrand")
        reports.append(
            make_report(
                "corollary_talagrand",
                ot_to_hull(mu, mix, c_metric).value,
                c_tal.value * (ed.kl_total - ed.kl_weights),
                constants=(c_tal,),
                inputs_digest=dig,
                note="T_c(mu, hull) <= C_talagrand (KL(mu||pi) - KL(lambda*||w))",
            )
        )

    tv_cost = CostMatrix.from_state_metric(gm.space, "zero_one")
    tv_hull = ot_to_hull(mu, mix, tv_cost).value
    reports.append(
        make_report(
            "corollary_tv_poincare",
            tv_hull**2,
            4.0 * c_poin.value * fi,
            constants=(c_poin,),
            inputs_digest=dig,
            note="inf over hull of TV(mu, .)^2 <= 4 C_poincare FI(mu||pi)",
        )
    )

    # reweighted Poincare on random test functions, worst relative margin kept
    rng = stream(seed, "rpoin-g")
    worst = None
    for _ in range(random_g):
        g = rng.normal(size=gm.space.size)
        lhs = reweighted_poincare_residual(g, gm)
        rhs = c_poin.value * dirichlet_form(gm.parent_generator, g)
        key = (rhs - lhs) / (1.0 + abs(rhs))
        if worst is None or key < worst[0]:
            worst = (key, lhs, rhs)
    if worst is not None:
        reports.append(
            make_report(
                "corollary_rpoin_random_g",
                worst[1],
                worst[2],
                constants=(c_poin,),
                inputs_digest=dig,
                note=f"worst of {random_g} random g (seed {seed})",
            )
        )
    return reports
