"""Uniform input generation: i.i.d. points and scrambled Sobol' points.

Two samplers share one immutable container. The Monte Carlo path uses the
counter-based Philox generator, so point sets are reproducible from a single
64-bit seed. The quasi-Monte Carlo path is a Sobol' digital net built from
the published Joe-Kuo direction numbers (64 dimensions, 32 output bits per
coordinate) with hash-based nested uniform scrambling: digit ``b`` of each
coordinate is flipped by a pseudorandom bit keyed on
``(seed, coordinate, b, leading digits)``, which realizes an Owen-style
permutation tree without storing it. Scrambling therefore preserves the net's
elementary-interval structure exactly while making every point marginally
uniform on ``[0,1)^d``.

Values are multiples of 2**-32 (Sobol') or doubles in ``[0,1)`` (i.i.d.);
no generated value ever equals 1.0. Zero can occur; callers that feed the
points into inverse CDFs are expected to clamp (see ``transforms``).
"""

import enum
import functools
from dataclasses import dataclass

import numpy as np

from ._rng import mix64
from ._sobol_table import JOE_KUO_ROWS, MAX_DIMENSION
from .errors import UnsupportedDimensionError

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

OUTPUT_BITS = 32
MAX_LOG2_POINTS = 20

_SCALE = np.float64(2.0**-OUTPUT_BITS)


class PointKind(enum.Enum):
    IID = "iid"
    SCRAMBLED_SOBOL = "scrambled_sobol"


@dataclass(frozen=True)
class UniformPointSet:
    """An immutable n-by-d block of uniforms plus sampler provenance."""

    n: int
    d: int
    values: np.ndarray
    kind: PointKind
    seed: int

    def __post_init__(self):
        v = self.values
        if v.shape != (self.n, self.d):
            raise ValueError(f"values shape {v.shape} != ({self.n}, {self.d})")
        if np.any(v < 0.0) or np.any(v >= 1.0):
            raise ValueError("point set has entries outside [0, 1)")
        if self.kind is PointKind.SCRAMBLED_SOBOL and self.n & (self.n - 1):
            raise ValueError("Sobol' point counts must be powers of two")
        v.setflags(write=False)


@functools.lru_cache(maxsize=None)
def _direction_matrix(d):
    """Direction integers, shape (d, OUTPUT_BITS), one row per coordinate."""
    if not 1 <= d < MAX_DIMENSION + 1:
        raise UnsupportedDimensionError(
            f"dimension {d} exceeds the shipped direction-number table "
            f"(max {MAX_DIMENSION})"
        )
    V = np.zeros((d, OUTPUT_BITS), dtype=np.uint64)
    # coordinate 0: van der Corput, v_k = 2^(BITS-k)
    for k in range(1, OUTPUT_BITS + 1):
        V[0, k - 1] = 1 << (OUTPUT_BITS - k)
    for j in range(1, d):
        poly, m_init = JOE_KUO_ROWS[j - 1]
        s = poly.bit_length() - 1
        v = [0] * (OUTPUT_BITS + 1)
        for k in range(1, s + 1):
            v[k] = m_init[k - 1] << (OUTPUT_BITS - k)
        for k in range(s + 1, OUTPUT_BITS + 1):
            vk = v[k - s] ^ (v[k - s] >> s)
            for i in range(1, s):
                if (poly >> (s - i)) & 1:
                    vk ^= v[k - i]
            v[k] = vk
        V[j] = v[1:]
    return V


@functools.lru_cache(maxsize=32)
def _sobol_integers(m, d):
    """Unscrambled net as 32-bit integers in Gray-code order, shape (n, d)."""
    n = 1 << m
    V = _direction_matrix(d)
    idx = np.arange(n, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    X = np.zeros((n, d), dtype=np.uint64)
    for k in range(max(m, 1)):
        hit = ((gray >> np.uint64(k)) & np.uint64(1)).astype(bool)
        X[hit] ^= V[:, k]
    X.setflags(write=False)
    return X


def _level_keys(seed, d):
    """Per-(level, coordinate) hash keys, shape (OUTPUT_BITS, d)."""
    coord_keys = mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ mix64(np.arange(d)))
    with np.errstate(over="ignore"):
        levels = np.arange(OUTPUT_BITS, dtype=np.uint64)
        return mix64(coord_keys[None, :] + levels[:, None])


def _scramble_numpy(ints, keys):
    out = ints.copy()
    with np.errstate(over="ignore"):
        for level in range(OUTPUT_BITS):
            prefix = ints >> np.uint64(OUTPUT_BITS - level)
            h = mix64(prefix ^ keys[level][None, :])
            out ^= (h & np.uint64(1)) << np.uint64(OUTPUT_BITS - 1 - level)
    return out


if _numba is not None:

    @_numba.njit(cache=True)
    def _scramble_jit(ints, keys, out):  # pragma: no cover - exercised via wrapper
        n, d = ints.shape
        for i in range(n):
            for j in range(d):
                x = ints[i, j]
                y = x
                for level in range(32):
                    z = (x >> np.uint64(32 - level)) ^ keys[level, j]
                    z = z + np.uint64(0x9E3779B97F4A7C15)
                    z ^= z >> np.uint64(30)
                    z *= np.uint64(0xBF58476D1CE4E5B9)
                    z ^= z >> np.uint64(27)
                    z *= np.uint64(0x94D049BB133111EB)
                    z ^= z >> np.uint64(31)
                    y ^= (z & np.uint64(1)) << np.uint64(31 - level)
                out[i, j] = y


def _nested_scramble(ints, d, seed):
    """Owen-style nested uniform scramble of 32-bit integers, per coordinate.

    The flip applied at digit level ``b`` depends only on the *original*
    digits above ``b``, i.e. on the node of the binary permutation tree the
    point passes through, so each node carries one pseudorandom flip bit.
    The JIT kernel and the numpy fallback produce bit-identical output.
    """
    keys = _level_keys(seed, d)
    if _numba is not None:
        out = np.empty_like(ints)
        _scramble_jit(ints, keys, out)
        return out
    return _scramble_numpy(ints, keys)


def generate_sobol(m, d, seed, scramble=True):
    """Generate a 2**m point scrambled Sobol' set in d dimensions.

    ``scramble=False`` returns the raw digital net (the seed is then ignored
    except for provenance); it exists for reference output and debugging.
    """
    if not 0 <= m <= MAX_LOG2_POINTS:
        raise ValueError(f"log2 point count must be in [0, {MAX_LOG2_POINTS}], got {m}")
    ints = _sobol_integers(m, d)
    if scramble:
        ints = _nested_scramble(ints, d, seed)
    values = ints.astype(np.float64) * _SCALE
    return UniformPointSet(
        n=1 << m, d=d, values=values, kind=PointKind.SCRAMBLED_SOBOL, seed=int(seed)
    )


def generate_iid(n, d, seed):
    """n i.i.d. uniform points from the counter-based Philox generator."""
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    rng = np.random.Generator(np.random.Philox(key=seed & 0xFFFFFFFFFFFFFFFF))
    values = rng.random((n, d))
    return UniformPointSet(n=n, d=d, values=values, kind=PointKind.IID, seed=int(seed))


def dyadic_stratification_check(ps, coordinate, m):
    """True iff each dyadic bin [j*2^-m, (j+1)*2^-m) holds exactly one point.

    For any valid scrambled Sobol' set of 2**m points this holds on every
    coordinate; it is the balance property behind the low-discrepancy bound.
    """
    n = ps.n
    if n & (n - 1) or n != (1 << m):
        raise ValueError(f"point count {n} is not 2**m for m={m}")
    bins = np.floor(ps.values[:, coordinate] * (1 << m)).astype(np.int64)
    counts = np.bincount(bins, minlength=1 << m)
    return bool(np.all(counts == 1))


def dump_points(ps, stream):
    """Debug dump: one point per line, 17 significant digits, space separated."""
    for row in ps.values:
        stream.write(" ".join(f"{v:.17g}" for v in row) + "\n")
