"""Executable pieces of the error analysis: the smoothed clamp and L^q rates.

``smoothed_projection`` is the C^1 clamp used to cut unbounded integrands
down to a box while keeping the Koksma-Hlawka machinery applicable: identity
on [-R+1, R-1], quadratic blends on the unit bands outside, constants
+-(R - 1/2) beyond +-R. ``empirical_lq_error`` measures the L^q error of the
plain quadrature estimator (1/n) sum f(Phi^{-1}(y_j)) over independent
randomizations, which is how the library's rate claims are checked
empirically.
"""

import numpy as np

from . import transforms
from .mamis import draw_uniforms
from ._rng import derive_seed


def smoothed_projection(x, radius):
    """C^1 clamp to [-(R-1/2), R-1/2]; identity on [-R+1, R-1]; componentwise.

    Five branches: constants beyond +-R, quadratic blends on the unit bands
    (-R, -R+1) and (R-1, R), identity between. Requires radius > 1. Computed
    as the odd extension of the nonnegative part, so P(-x) == -P(x) holds
    bit for bit; monotone nondecreasing and C^1 at the four knots.
    """
    R = float(radius)
    if not R > 1.0:
        raise ValueError(f"projection radius must exceed 1, got {radius!r}")
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    xb = np.atleast_1d(x)
    a = np.abs(xb)
    half = (R - 1.0) ** 2 / 2.0
    mag = np.select(
        [a <= R - 1.0, a < R],
        [a, -0.5 * a * a + R * a - half],
        default=R - 0.5,
    )
    out = np.where(np.signbit(xb), -mag, mag)
    return float(out[0]) if scalar else out


def empirical_lq_error(f, sampler, n, dim, q, reps, truth, seed):
    """Empirical L^q error of the plain transported estimator of E[f(X)].

    Runs ``reps`` independent point sets of size ``n`` through
    Phi^{-1} and returns ( mean_r |I_hat - truth|^q )^{1/q}. ``f`` must
    accept an (n, dim) batch of standard-normal points.
    """
    if q < 1:
        raise ValueError(f"moment order must be >= 1, got {q}")
    if reps < 1:
        raise ValueError(f"need at least one repetition, got {reps}")
    acc = 0.0
    for r in range(reps):
        ps = draw_uniforms(sampler, n, dim, derive_seed(seed, r))
        z = transforms.inv_norm_cdf(transforms.clamp_unit(ps.values))
        estimate = float(np.mean(np.asarray(f(z), dtype=np.float64)))
        acc += abs(estimate - truth) ** q
    return (acc / reps) ** (1.0 / q)
