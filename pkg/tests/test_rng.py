"""Counter-based randomness: purity, key separation, simplex sampling."""

import numpy as np

from mixlab.rng import counter_uniform, random_probability, stream


def test_counter_uniform_is_a_pure_function():
    a = counter_uniform(7, "traj", 3, 0)
    b = counter_uniform(7, "traj", 3, 0)
    assert a == b
    assert 0.0 <= a < 1.0


def test_counter_uniform_separates_keys():
    vals = {
        counter_uniform(7, "traj", 3, 0),
        counter_uniform(7, "traj", 3, 1),
        counter_uniform(7, "traj", 4, 0),
        counter_uniform(7, "other", 3, 0),
        counter_uniform(8, "traj", 3, 0),
    }
    assert len(vals) == 5


def test_counter_uniform_is_roughly_uniform():
    xs = np.array([counter_uniform(0, "u", k) for k in range(4000)])
    assert abs(xs.mean() - 0.5) < 0.03
    assert abs(np.mean(xs < 0.25) - 0.25) < 0.03


def test_stream_reproducible_and_key_dependent():
    a = stream(5, "alpha").uniform(size=8)
    b = stream(5, "alpha").uniform(size=8)
    c = stream(5, "beta").uniform(size=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_random_probability_strictly_positive_and_normalised():
    rng = stream(11, "p")
    for n in (1, 2, 7, 40):
        p = random_probability(rng, n)
        assert p.shape == (n,)
        assert np.all(p > 0)
        assert abs(p.sum() - 1.0) < 1e-12
