"""Parametric proposal families: densities, transport sampling, moment maps.

Three families are supported. ``GAUSSIAN_FIXED_COV`` adapts only the mean and
keeps a covariance fixed on the family spec (its Cholesky factor is cached
there). ``GAUSSIAN_MEAN_COV`` and ``STUDENT_T`` adapt mean and covariance;
the packed parameter vector is ``(mean, vec(cov))`` with a row-major vec, so
D = d + d^2. The Student-t degrees of freedom are a fixed hyperparameter.

Densities are always normalized: adaptive multiple importance sampling
weights divide by the true q, and only the target may carry an unknown
constant. Covariance blocks coming out of moment updates pass through
``spd_repair``, which symmetrizes and floors eigenvalues at 1e-8.
"""

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, special

from .errors import InvalidParameterError, SingularProposalError

EIG_FLOOR = 1e-8


class Family(enum.Enum):
    GAUSSIAN_FIXED_COV = "gaussian_fixed_cov"
    GAUSSIAN_MEAN_COV = "gaussian_mean_cov"
    STUDENT_T = "student_t"


def spd_repair(sigma):
    """Symmetrize and floor eigenvalues at 1e-8; return (matrix, Cholesky).

    Inputs that are already SPD with min eigenvalue above the floor are
    returned unchanged apart from symmetrization. Non-finite entries raise
    ``InvalidParameterError`` (callers treat that as "keep the previous
    parameter").
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if not np.all(np.isfinite(sigma)):
        raise InvalidParameterError("covariance block has non-finite entries")
    sym = 0.5 * (sigma + sigma.T)
    eigvals = np.linalg.eigvalsh(sym)
    if eigvals[0] > EIG_FLOOR:
        try:
            return sym, np.linalg.cholesky(sym)
        except np.linalg.LinAlgError:
            pass
    w, V = np.linalg.eigh(sym)
    repaired = (V * np.maximum(w, EIG_FLOOR)) @ V.T
    repaired = 0.5 * (repaired + repaired.T)
    try:
        return repaired, np.linalg.cholesky(repaired)
    except np.linalg.LinAlgError as exc:
        raise SingularProposalError("covariance not factorizable after repair") from exc


def _inv_lower(L):
    return linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True,
                                   check_finite=False)


def aligned_spectral_factor(cov, tol=1e-9):
    """A square root of ``cov`` that keeps leading coordinates meaningful.

    Columns are eigenvectors scaled by sqrt eigenvalues, eigenvalues
    descending, so the dominant variance direction rides the first (best
    equidistributed) coordinate of a low-discrepancy point set. Within a
    repeated-eigenvalue block the basis is free; it is canonicalized by
    Gram-Schmidt of the coordinate vectors projected into the block, which
    keeps each original coordinate a function of as few transformed
    coordinates as possible. Deterministic; satisfies A A^T = cov.
    """
    cov = np.asarray(cov, dtype=np.float64)
    w, V = np.linalg.eigh(cov)
    w, V = w[::-1], V[:, ::-1]
    d = len(w)
    eye = np.eye(d)
    cols = []
    i = 0
    while i < d:
        j = i
        while j + 1 < d and abs(w[j + 1] - w[i]) <= tol * max(1.0, abs(w[i])):
            j += 1
        block = V[:, i:j + 1]
        if j > i:
            projector = block @ block.T
            basis = []
            for k in range(d):
                v = projector @ eye[:, k]
                for b in basis:
                    v = v - (b @ v) * b
                norm = np.linalg.norm(v)
                if norm > 1e-10:
                    basis.append(v / norm)
                if len(basis) == j - i + 1:
                    break
            block = np.stack(basis, axis=1)
        cols.append(block * np.sqrt(np.maximum(w[i:j + 1], 0.0)))
        i = j + 1
    return np.hstack(cols)


@dataclass(frozen=True)
class FamilySpec:
    """Family tag plus the fixed hyperparameters (dimension, nu, fixed cov).

    For the fixed-covariance family the transport square root is the aligned
    spectral factor rather than the Cholesky factor: distributionally
    identical, but it maps the dominant target direction onto the leading
    point-set coordinate, which matters for the quasi-Monte Carlo rate.
    """

    family: Family
    dim: int
    nu: Optional[float] = None
    fixed_cov: Optional[np.ndarray] = None
    fixed_cov_chol: Optional[np.ndarray] = field(default=None, compare=False)
    transport_factor: Optional[np.ndarray] = field(default=None, compare=False)
    inv_factor: Optional[np.ndarray] = field(default=None, compare=False)
    log_det_half: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        if self.family is Family.STUDENT_T:
            if self.nu is None or not self.nu > 0:
                raise ValueError("Student-t family needs nu > 0")
        if self.family is Family.GAUSSIAN_FIXED_COV:
            if self.fixed_cov is None:
                raise ValueError("fixed-covariance family needs fixed_cov")
            cov, chol = spd_repair(self.fixed_cov)
            factor = aligned_spectral_factor(cov)
            object.__setattr__(self, "fixed_cov", cov)
            object.__setattr__(self, "fixed_cov_chol", chol)
            object.__setattr__(self, "transport_factor", factor)
            object.__setattr__(self, "inv_factor", np.linalg.inv(factor))
            object.__setattr__(self, "log_det_half",
                               float(np.sum(np.log(np.diag(chol)))))

    @property
    def theta_dim(self):
        """Packed parameter length: d for mean-only, d + d^2 otherwise."""
        if self.family is Family.GAUSSIAN_FIXED_COV:
            return self.dim
        return self.dim + self.dim * self.dim

    @property
    def uniform_dim(self):
        """Uniform coordinates one draw consumes (d, or d+1 for Student-t)."""
        return self.dim + 1 if self.family is Family.STUDENT_T else self.dim

    @property
    def adapts_covariance(self):
        return self.family is not Family.GAUSSIAN_FIXED_COV


@dataclass(frozen=True)
class ProposalParam:
    """Adaptation state theta: packed vector plus cached covariance factors."""

    family: Family
    theta: np.ndarray
    nu: Optional[float] = None
    cov_chol: Optional[np.ndarray] = field(default=None, compare=False)
    inv_chol: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        self.theta.setflags(write=False)


def param_from_moments(spec, mean, cov=None):
    """Build a ProposalParam from a mean (and covariance for adaptive-cov).

    The covariance block is SPD-repaired; its Cholesky factor and inverse
    factor are cached on the parameter.
    """
    mean = np.asarray(mean, dtype=np.float64)
    if mean.shape != (spec.dim,):
        raise ValueError(f"mean shape {mean.shape} != ({spec.dim},)")
    if not np.all(np.isfinite(mean)):
        raise InvalidParameterError("mean has non-finite entries")
    if spec.family is Family.GAUSSIAN_FIXED_COV:
        return ProposalParam(spec.family, mean.copy())
    if cov is None:
        raise ValueError("mean+covariance family needs a covariance block")
    cov, chol = spd_repair(cov)
    theta = np.concatenate([mean, cov.reshape(-1)])
    return ProposalParam(spec.family, theta, nu=spec.nu, cov_chol=chol,
                         inv_chol=_inv_lower(chol))


def unpack(spec, param):
    """Return (mean, cov) from a packed parameter; cov is None for fixed-cov."""
    if spec.family is Family.GAUSSIAN_FIXED_COV:
        return param.theta.copy(), None
    d = spec.dim
    return param.theta[:d].copy(), param.theta[d:].reshape(d, d).copy()


def _factors(spec, param):
    """(mean, transport factor, inverse factor, half log det) for a parameter."""
    if spec.family is Family.GAUSSIAN_FIXED_COV:
        return (param.theta, spec.transport_factor, spec.inv_factor,
                spec.log_det_half)
    if param.cov_chol is None or param.inv_chol is None:
        raise SingularProposalError("parameter lacks a cached covariance factor")
    log_det_half = float(np.sum(np.log(np.diag(param.cov_chol))))
    return param.theta[: spec.dim], param.cov_chol, param.inv_chol, log_det_half


def _log_density_from_quad(spec, log_det_half, quad):
    d = spec.dim
    if spec.family is Family.STUDENT_T:
        nu = spec.nu
        return (
            special.gammaln(0.5 * (nu + d))
            - special.gammaln(0.5 * nu)
            - 0.5 * d * np.log(nu * np.pi)
            - log_det_half
            - 0.5 * (nu + d) * np.log1p(quad / nu)
        )
    return -0.5 * d * np.log(2.0 * np.pi) - log_det_half - 0.5 * quad


def log_density(spec, param, x):
    """log q(x, theta) of the normalized family density.

    ``x`` may be one point (shape (d,)) or a batch (n, d); returns a scalar
    or an (n,) vector accordingly.
    """
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 1
    mean, _, inv_a, log_det_half = _factors(spec, param)
    z = (np.atleast_2d(x) - mean) @ inv_a.T
    out = _log_density_from_quad(spec, log_det_half, np.sum(z * z, axis=1))
    return float(out[0]) if scalar else out


def log_density_stack(spec, params, x):
    """log q(x, theta_l) for several parameters at once; shape (len, n).

    For the fixed-covariance family all parameters share one whitening, so
    the stack costs O(n d) per extra parameter instead of O(n d^2).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    params = list(params)
    if len(params) == 1:
        return log_density(spec, params[0], x)[None, :]
    if spec.family is Family.GAUSSIAN_FIXED_COV:
        inv_a = spec.inv_factor
        Z = x @ inv_a.T
        W = np.stack([p.theta for p in params]) @ inv_a.T
        quad = (
            np.sum(Z * Z, axis=1)[None, :]
            - 2.0 * (W @ Z.T)
            + np.sum(W * W, axis=1)[:, None]
        )
        return _log_density_from_quad(spec, spec.log_det_half, quad)
    return np.stack([log_density(spec, p, x) for p in params])


def sample(spec, param, ps):
    """Transport a uniform point set through Q(theta); returns (n, d) draws."""
    X, _ = sample_with_log_density(spec, param, ps)
    return X


def sample_with_log_density(spec, param, ps):
    """Transport a point set and return (draws, log q(draws, theta)).

    The density comes straight from the transport's whitened coordinates, so
    it costs nothing beyond the draw itself.
    """
    from . import transforms

    if ps.d != spec.uniform_dim:
        raise ValueError(
            f"point set dimension {ps.d} != required uniform dimension {spec.uniform_dim}"
        )
    mean, factor, _, log_det_half = _factors(spec, param)
    d = spec.dim
    if spec.family is Family.STUDENT_T:
        z = transforms.inv_norm_cdf(transforms.clamp_unit(ps.values[:, :d]))
        w = transforms.inv_chi2_cdf(transforms.clamp_unit(ps.values[:, d]), spec.nu)
        scale = np.sqrt(spec.nu / w)
        X = mean + (z * scale[:, None]) @ factor.T
        quad = np.sum(z * z, axis=1) * (spec.nu / w)
    else:
        z = transforms.inv_norm_cdf(transforms.clamp_unit(ps.values))
        X = mean + z @ factor.T
        quad = np.sum(z * z, axis=1)
    return X, _log_density_from_quad(spec, log_det_half, quad)


def h_statistic(spec, x, aux_mean=None):
    """Moment-matching statistic h with integral theta* = E_pi[h(X)].

    Mean-only family: h(x) = x. Mean+covariance families: h(x) =
    (x, vec((x - aux_mean)(x - aux_mean)^T)); with ``aux_mean`` absent the
    outer product is uncentered (the pilot variant, h = (x, vec(x x^T))).
    """
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 1
    xb = np.atleast_2d(x)
    if spec.family is Family.GAUSSIAN_FIXED_COV:
        out = xb.copy()
    else:
        centered = xb if aux_mean is None else xb - np.asarray(aux_mean, dtype=np.float64)
        outer = centered[:, :, None] * centered[:, None, :]
        out = np.concatenate([xb, outer.reshape(xb.shape[0], -1)], axis=1)
    return out[0] if scalar else out
