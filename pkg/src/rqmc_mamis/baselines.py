"""Non-adaptive importance-sampling baselines with mode-matched proposals.

ODIS centers a fixed-covariance Gaussian at the mode of the integrand (or of
the target when the integrand is vector valued); LapIS uses the inverse
negative Hessian at that mode as the proposal covariance; a Student-t variant
keeps the same location and scale with fixed degrees of freedom. Gradients
and Hessians come from central finite differences with step 1e-5 * (1+|x_j|),
so objectives only need to be evaluable, not differentiable in closed form.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import proposals
from .errors import ModeSearchError
from .mamis import Estimate, draw_uniforms
from .proposals import Family, FamilySpec, param_from_moments, spd_repair
from .targets import integrand_matrix

VARIANT_ODIS = "odis"
VARIANT_LAPIS = "lapis"
VARIANT_LAPIS_T = "lapis_t"

_FD_SCALE = 1e-5
_GRAD_TOL = 1e-6


@dataclass(frozen=True)
class ModeResult:
    mode: np.ndarray
    neg_hessian: np.ndarray
    iterations: int
    converged: bool


def _fd_steps(x):
    return _FD_SCALE * (1.0 + np.abs(x))


def _fd_gradient(log_f, x):
    d = x.shape[0]
    h = _fd_steps(x)
    pts = np.repeat(x[None, :], 2 * d, axis=0)
    for j in range(d):
        pts[2 * j, j] += h[j]
        pts[2 * j + 1, j] -= h[j]
    f = np.asarray(log_f(pts), dtype=np.float64)
    return (f[0::2] - f[1::2]) / (2.0 * h)


def _fd_hessian(log_f, x, f_center):
    d = x.shape[0]
    h = _fd_steps(x)
    pts = [x.copy() for _ in range(2 * d)]
    for j in range(d):
        pts[2 * j][j] += h[j]
        pts[2 * j + 1][j] -= h[j]
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    for j, k in pairs:
        for sj, sk in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            p = x.copy()
            p[j] += sj * h[j]
            p[k] += sk * h[k]
            pts.append(p)
    f = np.asarray(log_f(np.stack(pts)), dtype=np.float64)
    H = np.empty((d, d))
    for j in range(d):
        H[j, j] = (f[2 * j] - 2.0 * f_center + f[2 * j + 1]) / h[j] ** 2
    for idx, (j, k) in enumerate(pairs):
        base = 2 * d + 4 * idx
        H[j, k] = H[k, j] = (f[base] - f[base + 1] - f[base + 2] + f[base + 3]) / (
            4.0 * h[j] * h[k]
        )
    return H


def find_mode(log_f, x0, grad_tol=_GRAD_TOL, max_iterations=200):
    """Damped Newton ascent on log_f from x0; log_f must accept (n, d) batches.

    Returns a ModeResult; ``converged`` means the gradient norm fell below
    ``grad_tol``. Non-convergence is reported, not raised, so callers can
    decide whether to abort.
    """
    x = np.array(x0, dtype=np.float64)
    f0 = float(log_f(x[None, :])[0])
    if not np.isfinite(f0):
        raise ModeSearchError(f"objective is not finite at the starting point {x0!r}")
    iterations = 0
    converged = False
    for iterations in range(1, max_iterations + 1):
        g = _fd_gradient(log_f, x)
        if np.linalg.norm(g) <= grad_tol:
            converged = True
            break
        H = _fd_hessian(log_f, x, f0)
        step = _ascent_direction(H, g)
        alpha = 1.0
        improved = False
        for _ in range(60):
            cand = x + alpha * step
            f_cand = float(log_f(cand[None, :])[0])
            if np.isfinite(f_cand) and f_cand > f0:
                x, f0, improved = cand, f_cand, True
                break
            alpha *= 0.5
        if not improved:
            break
    g = _fd_gradient(log_f, x)
    converged = bool(np.linalg.norm(g) <= grad_tol)
    neg_hessian = -_fd_hessian(log_f, x, f0)
    return ModeResult(mode=x, neg_hessian=neg_hessian, iterations=iterations,
                      converged=converged)


def _ascent_direction(H, g):
    """Solve (-H + ridge I) s = g, escalating the ridge until SPD."""
    d = H.shape[0]
    neg_h = -H
    ridge = 0.0
    for _ in range(30):
        try:
            c = np.linalg.cholesky(neg_h + ridge * np.eye(d))
            return linalg.cho_solve((c, True), g)
        except np.linalg.LinAlgError:
            ridge = 1e-8 if ridge == 0.0 else ridge * 10.0
    return g / max(np.linalg.norm(g), 1.0)


def grid_search_start(log_f, lows, highs, cells=41):
    """Best cell center of a coarse grid scan; seeds Newton on multimodal f."""
    axes = [np.linspace(lo, hi, cells) for lo, hi in zip(lows, highs)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    vals = np.asarray(log_f(pts), dtype=np.float64)
    return pts[int(np.argmax(vals))].copy()


def laplace_cov(mode_result):
    """Laplace proposal covariance: inverse negative Hessian at the mode."""
    if not mode_result.converged:
        raise ModeSearchError("mode search did not converge; no Laplace covariance")
    precision, chol = spd_repair(mode_result.neg_hessian)
    identity = np.eye(precision.shape[0])
    cov = linalg.cho_solve((chol, True), identity)
    return spd_repair(cov)


def _objective(target, psi):
    """log(psi * pi~) for scalar integrands, log pi~ for vector ones."""
    probe = integrand_matrix(psi, np.zeros((1, target.dim)))
    if probe.shape[1] > 1:
        return target.log_density
    def log_f(x):
        vals = integrand_matrix(psi, x)[:, 0]
        with np.errstate(divide="ignore"):
            return np.log(np.abs(vals)) + np.asarray(target.log_density(x))
    return log_f


_PROBE_SCALES = (0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 0.1, -0.1)


def _starting_point(log_f, d, x0):
    if x0 is not None:
        return np.asarray(x0, dtype=np.float64)
    candidates = [s * np.ones(d) for s in _PROBE_SCALES]
    candidates += [s * np.eye(d)[j] for s in (0.5, -0.5) for j in range(d)]
    pts = np.stack(candidates)
    vals = np.asarray(log_f(pts), dtype=np.float64)
    if not np.any(np.isfinite(vals)):
        raise ModeSearchError("no finite starting point found for mode search")
    return pts[int(np.nanargmax(np.where(np.isfinite(vals), vals, -np.inf)))].copy()


def run_is_baseline(target, psi, variant, total_samples, sampler, seed, *,
                    fixed_cov=None, nu=2.0, x0=None):
    """Single-proposal IS estimate with a mode-matched proposal.

    ``variant`` is one of 'odis', 'lapis', 'lapis_t'. Self-normalizes when
    the target is unnormalized. The full budget goes into one point set.
    """
    d = target.dim
    log_f = _objective(target, psi)
    start = _starting_point(log_f, d, x0)
    mode_result = find_mode(log_f, start)
    if not mode_result.converged:
        raise ModeSearchError(
            f"mode search failed from {start!r} after {mode_result.iterations} iterations"
        )

    if variant == VARIANT_ODIS:
        cov = np.eye(d) if fixed_cov is None else np.asarray(fixed_cov, dtype=np.float64)
        spec = FamilySpec(Family.GAUSSIAN_MEAN_COV, d)
    elif variant == VARIANT_LAPIS:
        cov, _ = laplace_cov(mode_result)
        spec = FamilySpec(Family.GAUSSIAN_MEAN_COV, d)
    elif variant == VARIANT_LAPIS_T:
        cov, _ = laplace_cov(mode_result)
        spec = FamilySpec(Family.STUDENT_T, d, nu=nu)
    else:
        raise ValueError(f"unknown baseline variant {variant!r}")

    param = param_from_moments(spec, mode_result.mode, cov)
    ps = draw_uniforms(sampler, total_samples, spec.uniform_dim, seed)
    X = proposals.sample(spec, param, ps)
    lw = np.asarray(target.log_density(X)) - proposals.log_density(spec, param, X)
    vals = integrand_matrix(psi, X)

    if target.normalized:
        w = np.exp(lw)
        value = np.array([np.sum(w * vals[:, j]) for j in range(vals.shape[1])])
        value /= total_samples
    else:
        m = np.max(lw)
        w = np.exp(lw - m)
        denom = np.sum(w)
        value = np.array(
            [np.sum(w * vals[:, j]) / denom for j in range(vals.shape[1])]
        )
    return Estimate(value=value, method=variant, stages=1,
                    schedule=(int(total_samples),), n_bar=float(total_samples))
