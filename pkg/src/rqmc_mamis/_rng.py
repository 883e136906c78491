"""Seed mixing utilities shared by the samplers and the experiment driver.

All derived seeds come from the splitmix64 finalizer, so every run is a pure
function of one user-supplied 64-bit master seed. The builtin ``hash`` is
never used (it is salted per process).
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def mix64(x):
    """splitmix64 finalizer, vectorized over uint64 arrays.

    Accepts ints or integer arrays; returns ``np.uint64`` values with the
    same shape. Wraparound is modulo 2**64.
    """
    with np.errstate(over="ignore"):
        z = np.asarray(x).astype(np.uint64, copy=True)
        z += _GOLDEN
        z ^= z >> np.uint64(30)
        z *= _MIX1
        z ^= z >> np.uint64(27)
        z *= _MIX2
        z ^= z >> np.uint64(31)
    return z


def derive_seed(seed, *tags):
    """Fold integer tags into ``seed``, returning a new 64-bit int.

    ``derive_seed(s, a, b)`` differs from ``derive_seed(s, b, a)``; use it to
    build per-stage / per-repetition seed streams from a master seed.
    """
    state = mix64(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF))
    for tag in tags:
        t = np.uint64(int(tag) & 0xFFFFFFFFFFFFFFFF)
        state = mix64(state ^ mix64(t))
    return int(state)
