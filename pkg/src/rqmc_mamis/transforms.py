"""Inverse-CDF transforms mapping uniforms to proposal draws.

Every sampler in this library is a deterministic transport of a uniform
point set: standard-normal variates come from the inverse normal CDF applied
componentwise, Gaussian draws from an affine map of those, and Student-t
draws from d normal coordinates plus one extra uniform coordinate driving an
inverse-chi-square mixing variate. Keeping everything inverse-CDF based makes
each sample a smooth function of one low-discrepancy point, which is what the
QMC error analysis needs.

The inverse normal CDF is Acklam's rational approximation polished by a
single Halley step against ``scipy.special.erfc``, giving CDF-level error
near machine precision in both the center and the tails. Uniform inputs are
clamped into ``[2^-53, 1 - 2^-53]`` before inversion because scrambled nets
can emit exactly zero.
"""

import numpy as np
from scipy import special

U_EPS = 2.0**-53
_SQRT2 = np.sqrt(2.0)
_SQRT_2PI = np.sqrt(2.0 * np.pi)

# Acklam's coefficients for the central and tail rational approximations.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def clamp_unit(u):
    """Clamp uniforms into [2^-53, 1 - 2^-53] before any inverse CDF."""
    return np.clip(u, U_EPS, 1.0 - U_EPS)


def norm_cdf(z):
    """Standard normal CDF via erfc (accurate relative error in both tails)."""
    z = np.asarray(z, dtype=np.float64)
    return 0.5 * special.erfc(-z / _SQRT2)


def _acklam_lower_half(p):
    """Acklam's rational approximation for p <= 0.5 (x <= 0)."""
    x = np.empty_like(p)
    low = p < _P_LOW
    mid = ~low
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num * q / den
    if np.any(low):
        # the tail rational in q = sqrt(-2 log p) gives the quantile directly
        q = np.sqrt(-2.0 * np.log(p[low]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[low] = num / den
    return x


def inv_norm_cdf(u):
    """Inverse standard normal CDF, strictly increasing in u.

    Accepts scalars or arrays in [0, 1]; values are clamped into the open
    unit interval before inversion. The upper half reflects onto the lower
    half (1 - p is exact there), where the erfc-based CDF keeps full relative
    accuracy, so one Halley step reaches CDF-level errors near machine
    precision in the center and relative tail errors well below 1e-9.
    """
    scalar = np.isscalar(u) or np.ndim(u) == 0
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ValueError("inverse normal CDF input must lie in [0, 1]")
    p = np.atleast_1d(clamp_unit(u))
    flip = p > 0.5
    q = np.where(flip, 1.0 - p, p)
    x = _acklam_lower_half(q)
    # One Halley step on Phi(x) - q = 0; x <= 0 keeps erfc's argument
    # nonnegative, so err is accurate relative to q.
    err = 0.5 * special.erfc(-x / _SQRT2) - q
    t = err * _SQRT_2PI * np.exp(0.5 * x * x)
    x = x - t / (1.0 + 0.5 * x * t)
    x = np.where(flip, -x, x)
    if scalar:
        return float(x[0])
    return x.reshape(u.shape)


def inv_chi2_cdf(u, nu):
    """Inverse CDF of the chi-square distribution with nu degrees of freedom.

    Bracketed Newton iteration on the regularized incomplete gamma, run to
    |CDF(w) - u| <= 1e-10. Monotone in u; w >= 0.
    """
    if not np.isscalar(nu) or not nu > 0:
        raise ValueError(f"degrees of freedom must be a positive scalar, got {nu!r}")
    scalar = np.isscalar(u) or np.ndim(u) == 0
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ValueError("inverse chi-square CDF input must lie in [0, 1]")
    p = np.atleast_1d(clamp_unit(u)).astype(np.float64)
    k = 0.5 * nu

    # Bracket: lo = 0 has CDF 0 < p; grow hi until it covers the largest p.
    lo = np.zeros_like(p)
    hi = np.full_like(p, max(4.0 * nu, 8.0))
    for _ in range(200):
        short = special.gammainc(k, 0.5 * hi) < p
        if not np.any(short):
            break
        hi[short] *= 2.0

    # Wilson-Hilferty starting point, clipped into the bracket.
    z = inv_norm_cdf(p)
    c = 2.0 / (9.0 * nu)
    w = nu * np.maximum(1.0 - c + z * np.sqrt(c), 1e-8) ** 3
    w = np.clip(w, 1e-300, hi)

    log_norm = special.gammaln(k)
    for _ in range(100):
        f = special.gammainc(k, 0.5 * w) - p
        done = np.abs(f) <= 1e-10
        if np.all(done):
            break
        lo = np.where(f < 0.0, w, lo)
        hi = np.where(f > 0.0, w, hi)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            pdf = 0.5 * np.exp((k - 1.0) * np.log(0.5 * w) - 0.5 * w - log_norm)
            step = np.where(pdf > 0.0, f / pdf, 0.0)
        cand = w - step
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi) | (pdf <= 0.0)
        w = np.where(done, w, np.where(bad, 0.5 * (lo + hi), cand))
    return float(w[0]) if scalar else w.reshape(u.shape)


def gaussian_transport(mean, chol_lower, U):
    """Map uniform rows to N(mean, L L^T) draws: mean + L Phi^{-1}(U).

    ``U`` may be a single d-vector or an (n, d) block; the result matches.
    """
    mean = np.asarray(mean, dtype=np.float64)
    L = np.asarray(chol_lower, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    if U.shape[-1] != mean.shape[0]:
        raise ValueError(f"row dimension {U.shape[-1]} != mean dimension {mean.shape[0]}")
    z = inv_norm_cdf(U)
    return mean + z @ L.T


def student_t_transport(mean, chol_lower, nu, U):
    """Map (d+1)-coordinate uniform rows to t_nu(mean, L L^T) draws.

    The first d coordinates produce a normal vector z, the last drives the
    chi-square mixing variate w; the draw is mean + L z * sqrt(nu / w).
    """
    mean = np.asarray(mean, dtype=np.float64)
    L = np.asarray(chol_lower, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    d = mean.shape[0]
    if U.shape[-1] != d + 1:
        raise ValueError(f"Student-t transport needs d+1={d + 1} coordinates, got {U.shape[-1]}")
    z = inv_norm_cdf(U[..., :d])
    w = inv_chi2_cdf(U[..., d], nu)
    scale = np.sqrt(nu / w)
    return mean + (z * np.expand_dims(scale, -1)) @ L.T
