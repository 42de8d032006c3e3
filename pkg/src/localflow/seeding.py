"""Deterministic derivation of named RNG sub-streams from one 64-bit seed.

Every stochastic stage of a run (dataset sampling, per-block parameter init,
batch index draws, generation noise, ...) owns its own numpy Generator whose
seed is derived from the single run seed plus a label path, e.g.
``derive_seed(seed, "block", 3, "init")``.  The derivation is a splitmix64
walk over the label bytes, so sub-streams are decorrelated and a run is
reproducible bit-for-bit from its seed alone.
"""

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def splitmix64(z):
    """One splitmix64 mixing step (Steele et al. finalizer)."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(root, *labels):
    """Derive a 64-bit sub-seed from ``root`` and a label path.

    Labels may be strings or integers; each byte of each label is absorbed
    with a splitmix64 step, with a separator step between labels.
    """
    state = splitmix64(int(root) & _MASK64)
    for label in labels:
        data = label.encode() if isinstance(label, str) else str(int(label)).encode()
        for byte in data:
            state = splitmix64(state ^ byte)
        state = splitmix64(state ^ 0xA5)
    return state


def rng_for(root, *labels):
    """A fresh ``numpy.random.Generator`` seeded by ``derive_seed(root, *labels)``."""
    return np.random.default_rng(derive_seed(root, *labels))
