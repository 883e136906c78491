"""Benchmark target distributions, integrands, and pima data ingestion.

Four targets are provided: a shared-covariance three-Gaussian mixture in
general dimension, a two-dimensional five-Gaussian mixture with tight and
unequal component covariances, an unnormalized banana-shaped density, and a
Bayesian logistic-regression posterior on the first 30 pima records. Every
``log_density`` accepts a single point (shape (d,)) or a batch (n, d).

Unnormalized targets carry ``normalized=False``; the unnormalized-weight
estimator refuses them and directs callers to the self-normalized variant.
"""

import csv
import importlib.resources
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import linalg

from .errors import IngestionError


@dataclass(frozen=True)
class Target:
    """Dimension, log unnormalized density, and optional analytic truths."""

    dim: int
    log_density: Callable[[np.ndarray], np.ndarray]
    normalized: bool
    ground_truth: Optional[Mapping[str, np.ndarray]] = None
    name: str = ""


@dataclass(frozen=True)
class Integrand:
    """A named map from R^d to R^k evaluated rowwise on sample batches."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PimaDesign:
    """Standardized 30-row design matrix (intercept last) and binary labels."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        self.X.setflags(write=False)
        self.Y.setflags(write=False)


def _mixture_log_density(means, chols, log_weights):
    """Batched Gaussian mixture log density.

    Components sharing one covariance factor are evaluated through a single
    whitening; otherwise each component whitens separately.
    """
    d = means.shape[1]
    consts = np.array(
        [
            -0.5 * d * np.log(2.0 * np.pi) - np.sum(np.log(np.diag(L)))
            for L in chols
        ]
    )
    inv_chols = [
        linalg.solve_triangular(L, np.eye(d), lower=True, check_finite=False)
        for L in chols
    ]
    shared = all(L is chols[0] for L in chols)
    if shared:
        W = means @ inv_chols[0].T

    def log_density(x):
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 1
        xb = np.atleast_2d(x)
        if shared:
            Z = xb @ inv_chols[0].T
            quad = (
                np.sum(Z * Z, axis=1)[None, :]
                - 2.0 * (W @ Z.T)
                + np.sum(W * W, axis=1)[:, None]
            )
            comps = log_weights[:, None] + consts[:, None] - 0.5 * quad
        else:
            comps = np.empty((len(means), xb.shape[0]))
            for i, (mu, inv_L) in enumerate(zip(means, inv_chols)):
                z = (xb - mu) @ inv_L.T
                comps[i] = log_weights[i] + consts[i] - 0.5 * np.sum(z * z, axis=1)
        m = np.max(comps, axis=0)
        out = m + np.log(np.sum(np.exp(comps - m), axis=0))
        return float(out[0]) if scalar else out

    return log_density


def make_shared_cov_gmm(d):
    """Equal-weight 3-Gaussian mixture with means +-1 and 0, shared covariance.

    The shared covariance has diagonal d and off-diagonal 1. The first-moment
    truth is 0 by symmetry and E[x_1^2] = d + 2/3.
    """
    if d < 2:
        raise ValueError(f"target dimension must be >= 2, got {d}")
    cov = np.full((d, d), 1.0)
    np.fill_diagonal(cov, float(d))
    L = np.linalg.cholesky(cov)
    means = np.stack([np.ones(d), np.zeros(d), -np.ones(d)])
    log_weights = np.log(np.full(3, 1.0 / 3.0))
    log_density = _mixture_log_density(means, [L, L, L], log_weights)
    truth = {
        "first_coord_squared": np.array([d + 2.0 / 3.0]),
        "identity": np.zeros(d),
    }
    return Target(dim=d, log_density=log_density, normalized=True,
                  ground_truth=truth, name="shared_cov_gmm")


# Five-component mixture, the affine image y = x/10 + 2 of a classic widely
# separated 2-D benchmark. One published transcription lists mu4 = (1.1, 2.9)
# and a 1/40^2 covariance scale, contradicting both the affine map and the
# example's exact mean (2.16, 2.14); the affine-consistent values are used.
FIVE_MIXTURE_MEANS = np.array(
    [[1.0, 1.0], [2.0, 3.6], [3.3, 2.8], [1.1, 2.7], [3.4, 0.6]]
)
FIVE_MIXTURE_COVS = (
    np.array([[[2.0, 0.6], [0.6, 1.0]],
              [[2.0, -0.4], [-0.4, 2.0]],
              [[2.0, 0.8], [0.8, 2.0]],
              [[3.0, 0.0], [0.0, 0.5]],
              [[2.0, -0.1], [-0.1, 2.0]]])
    / 10.0**2
)


def make_five_mixture():
    """2-D equal-weight five-Gaussian mixture; exact mean (2.16, 2.14)."""
    chols = [np.linalg.cholesky(S) for S in FIVE_MIXTURE_COVS]
    log_density = _mixture_log_density(
        FIVE_MIXTURE_MEANS, chols, np.log(np.full(5, 0.2))
    )
    truth = {"identity": FIVE_MIXTURE_MEANS.mean(axis=0)}
    return Target(dim=2, log_density=log_density, normalized=True,
                  ground_truth=truth, name="five_mixture")


def make_banana(eta1=3.0, eta2=2.0, b=10.0):
    """Unnormalized 2-D banana-shaped target.

    log pi~(x) = -(4 - b x1 - x2^2)^2 / (2 eta1^2) - x2^2 / (2 eta2^2).
    The x2 marginal is exactly N(0, eta2^2) (the x1 section integral does not
    depend on x2), so the mean is ((4 - eta2^2)/b, 0); with the default
    parameters that is (0, 0), which a 2-D quadrature oracle confirms.
    """
    if eta1 <= 0 or eta2 <= 0 or b <= 0:
        raise ValueError("banana parameters must be positive")

    def log_density(x):
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 1
        xb = np.atleast_2d(x)
        g = 4.0 - b * xb[:, 0] - xb[:, 1] ** 2
        out = -(g * g) / (2.0 * eta1**2) - xb[:, 1] ** 2 / (2.0 * eta2**2)
        return float(out[0]) if scalar else out

    truth = {"identity": np.array([(4.0 - eta2**2) / b, 0.0])}
    return Target(dim=2, log_density=log_density, normalized=False,
                  ground_truth=truth, name="banana")


def default_pima_path():
    """Path of the bundled first-30-rows pima CSV."""
    return importlib.resources.files("rqmc_mamis").joinpath("data/pima.csv")


def load_pima(path):
    """Load the first 30 pima rows: standardize features, append intercept.

    The file must have 9 comma-separated columns (8 numeric features plus a
    binary outcome); a non-numeric first row is treated as a header. Each
    feature is standardized to zero mean and unit variance over the 30 rows.
    """
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise IngestionError(f"cannot read pima file {path!r}: {exc}") from exc
    if rows and not _is_numeric_row(rows[0]):
        rows = rows[1:]
    if len(rows) < 30:
        raise IngestionError(f"pima file has {len(rows)} data rows; need at least 30")
    data = np.empty((30, 9))
    for i, row in enumerate(rows[:30]):
        if len(row) != 9:
            raise IngestionError(f"row {i + 1} has {len(row)} columns, expected 9")
        try:
            data[i] = [float(v) for v in row]
        except ValueError as exc:
            raise IngestionError(f"row {i + 1} is not numeric: {row!r}") from exc
    features, outcome = data[:, :8], data[:, 8]
    if not np.all(np.isin(outcome, (0.0, 1.0))):
        raise IngestionError("outcome column must be binary 0/1")
    std = features.std(axis=0)
    zero_var = np.nonzero(std == 0.0)[0]
    if zero_var.size:
        raise IngestionError(f"feature column {zero_var[0] + 1} has zero variance")
    standardized = (features - features.mean(axis=0)) / std
    X = np.hstack([standardized, np.ones((30, 1))])
    return PimaDesign(X=X, Y=outcome.astype(np.int64))


def _is_numeric_row(row):
    try:
        [float(v) for v in row]
    except ValueError:
        return False
    return True


def make_logistic_posterior(design):
    """Bayesian logistic posterior: standard normal prior, Bernoulli likelihood.

    log pi~(z) = -||z||^2/2 + sum_i [ Y_i X_i^T z - log(1 + exp(X_i^T z)) ],
    with the log1p-exp identity so huge linear predictors do not overflow.
    """
    X, Y = design.X, design.Y.astype(np.float64)

    def log_density(z):
        z = np.asarray(z, dtype=np.float64)
        scalar = z.ndim == 1
        zb = np.atleast_2d(z)
        a = zb @ X.T
        loglik = np.sum(Y * a - np.logaddexp(0.0, a), axis=1)
        out = -0.5 * np.sum(zb * zb, axis=1) + loglik
        return float(out[0]) if scalar else out

    return Target(dim=X.shape[1], log_density=log_density, normalized=False,
                  ground_truth=None, name="logistic_posterior")


def logistic_log_density_grad(design, z):
    """Analytic gradient of the logistic log posterior (test/mode oracle)."""
    X, Y = design.X, design.Y.astype(np.float64)
    z = np.asarray(z, dtype=np.float64)
    p = 1.0 / (1.0 + np.exp(-(X @ z)))
    return -z + (Y - p) @ X


_INTEGRANDS = {
    "first_coord_squared": lambda x: np.atleast_2d(x)[:, 0] ** 2,
    "identity": lambda x: np.atleast_2d(x).copy(),
    "squared_norm": lambda x: np.sum(np.atleast_2d(x) ** 2, axis=1),
}


def integrand_registry(name):
    """Look up an integrand by name; raises KeyError with the known names."""
    if name not in _INTEGRANDS:
        raise KeyError(f"unknown integrand {name!r}; known: {sorted(_INTEGRANDS)}")
    fn = _INTEGRANDS[name]

    def apply(x):
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 1
        out = fn(x)
        if scalar:
            return out[0] if out.ndim > 1 else float(out[0])
        return out

    return Integrand(name=name, fn=apply)


def integrand_matrix(psi, x):
    """Evaluate an integrand on a batch as an (n, k) matrix (k=1 for scalars)."""
    vals = np.asarray(psi.fn(np.atleast_2d(x)), dtype=np.float64)
    if vals.ndim == 1:
        vals = vals[:, None]
    return vals
