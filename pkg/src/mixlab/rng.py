"""Deterministic randomness built on counter-based generators.

Two layers are provided.

``stream(seed, *key)`` returns a numpy ``Generator`` backed by the Philox
counter-based bit generator.  The Philox key is a splitmix64 hash of
``(seed, key)``, so independent streams are pure functions of their key
words and never depend on the order in which they are created or drawn
from.  Property tests and multi-start searches use these streams.

``counter_uniform(seed, *words)`` evaluates the splitmix64 finalizer
directly as a vectorized pure function of integer coordinates and maps the
result into the open interval (0, 1).  The trajectory engine derives every
variate this way from ``(seed, trajectory, step, slot)``, which makes
simulations bit-reproducible under any batching or parallel schedule.

Random probability vectors are sampled as normalized exponentials, i.e.
flat Dirichlet draws.
"""

from __future__ import annotations

import hashlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MULT1 = np.uint64(0xBF58476D1CE4E5B9)
_MULT2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = float(2.0 ** -53)


def _mix(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, elementwise on uint64 arrays."""
    z = (z ^ (z >> np.uint64(30))) * _MULT1
    z = (z ^ (z >> np.uint64(27))) * _MULT2
    return z ^ (z >> np.uint64(31))


def _absorb(state: np.ndarray, word) -> np.ndarray:
    if isinstance(word, str):
        # stable across processes, unlike the builtin salted hash
        word = int.from_bytes(hashlib.sha256(word.encode("utf-8")).digest()[:8], "little")
    w = np.asarray(word)
    if w.dtype.kind not in ("i", "u"):
        raise TypeError(f"key words must be integers or strings, got dtype {w.dtype}")
    with np.errstate(over="ignore"):
        return _mix(state + _GOLDEN + w.astype(np.uint64))


def counter_hash(seed: int, *words) -> np.ndarray:
    """Hash integer coordinates to uint64, broadcasting over array words."""
    with np.errstate(over="ignore"):
        state = _mix(np.asarray(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)))
        for w in words:
            state = _absorb(state, w)
    return state


def counter_uniform(seed: int, *words) -> np.ndarray:
    """Uniform variates in (0, 1), a pure function of (seed, words)."""
    bits = counter_hash(seed, *words)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53


def stream(seed: int, *key) -> np.random.Generator:
    """Independent numpy Generator keyed by (seed, key words) via Philox."""
    k1 = counter_hash(seed, np.uint64(1), *key)
    k2 = counter_hash(seed, np.uint64(2), *key)
    philox_key = np.array([k1, k2], dtype=np.uint64).reshape(2)
    return np.random.Generator(np.random.Philox(key=philox_key))


def random_probability(rng: np.random.Generator, size: int) -> np.ndarray:
    """Flat Dirichlet draw via normalized exponentials; strictly positive."""
    e = rng.exponential(size=size)
    e = np.maximum(e, 1e-290)
    return e / e.sum()
