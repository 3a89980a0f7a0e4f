"""Deterministic random-instance generation shared by the test suites.

Instances cycle through three discrete families (block mixtures, dominated
random graphs, small Glauber rings) so one seed exercises sparse,
structured, and dense conductance patterns alike.
"""

from __future__ import annotations

import numpy as np

from mixlab.measures import FiniteMeasure
from mixlab.models import (
    build_block_mixture,
    build_ising_glauber,
    build_random_dominated,
)
from mixlab.rng import random_probability, stream


def random_measure(gm, rng) -> FiniteMeasure:
    """A strictly positive random measure on the parent's support."""
    mass = np.zeros(gm.space.size)
    on = np.flatnonzero(gm.mix.parent.mass > 0)
    mass[on] = random_probability(rng, on.size)
    return FiniteMeasure(gm.space, mass)


def random_instance(k: int, seed: int = 0):
    """Instance number k: a (mu, gm) pair, reproducible across runs."""
    rng = stream(seed, "instance", k)
    family = k % 3
    if family == 0:
        blocks = int(rng.integers(2, 4))
        sizes = tuple(int(rng.integers(2, 5)) for _ in range(blocks))
        bridge = 0.0 if rng.uniform() < 0.15 else float(rng.uniform(0.01, 0.2))
        gm = build_block_mixture(
            sizes=sizes,
            in_block=float(rng.uniform(0.5, 2.0)),
            bridge=bridge,
        )
    elif family == 1:
        gm = build_random_dominated(
            n=int(rng.integers(6, 25)),
            m=int(rng.integers(2, 5)),
            seed=int(rng.integers(0, 2**31)),
        )
    else:
        gm = build_ising_glauber(
            sites=int(rng.integers(2, 4)),
            beta=float(rng.uniform(0.1, 1.0)),
            external_field=float(rng.uniform(-0.3, 0.3)),
        )
    return random_measure(gm, rng), gm


def instances(count: int, seed: int = 0):
    for k in range(count):
        yield random_instance(k, seed)
