import numpy as np
import pytest
from scipy import stats
from scipy.integrate import simpson

from rqmc_mamis.errors import IngestionError
from rqmc_mamis.targets import (FIVE_MIXTURE_COVS, FIVE_MIXTURE_MEANS,
                                default_pima_path, integrand_registry,
                                load_pima, logistic_log_density_grad,
                                make_banana, make_five_mixture,
                                make_logistic_posterior, make_shared_cov_gmm)


def test_toy_gmm_ground_truth_d20():
    t = make_shared_cov_gmm(20)
    assert np.isclose(t.ground_truth["first_coord_squared"][0], 20 + 2 / 3)
    assert np.array_equal(t.ground_truth["identity"], np.zeros(20))


def test_toy_gmm_symmetry():
    t = make_shared_cov_gmm(5)
    x = np.random.default_rng(0).normal(size=(50, 5)) * 3
    assert np.allclose(t.log_density(x), t.log_density(-x), rtol=0, atol=1e-10)


def test_toy_gmm_d2_normalization_quadrature():
    t = make_shared_cov_gmm(2)
    g = np.linspace(-14, 14, 1401)
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    dens = np.exp(t.log_density(pts)).reshape(X.shape)
    integral = np.trapezoid(np.trapezoid(dens, g, axis=1), g)
    assert abs(integral - 1.0) < 1e-3


def test_five_mixture_truth_and_mean_arithmetic():
    t = make_five_mixture()
    assert np.allclose(t.ground_truth["identity"], [2.16, 2.14], rtol=0, atol=1e-12)
    assert np.allclose(FIVE_MIXTURE_MEANS.mean(axis=0), [2.16, 2.14],
                       rtol=0, atol=1e-12)


def test_five_mixture_density_lower_bound_at_component():
    t = make_five_mixture()
    mu1 = FIVE_MIXTURE_MEANS[0]
    comp = stats.multivariate_normal(mu1, FIVE_MIXTURE_COVS[0]).pdf(mu1)
    assert 0.2 * comp > 0.0
    assert np.exp(t.log_density(mu1)) >= 0.2 * comp * (1.0 - 1e-12)


def test_five_mixture_normalization_quadrature():
    t = make_five_mixture()
    g1 = np.linspace(-1.0, 5.5, 1301)
    g2 = np.linspace(-1.5, 6.0, 1501)
    X, Y = np.meshgrid(g1, g2, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    dens = np.exp(t.log_density(pts)).reshape(X.shape)
    integral = np.trapezoid(np.trapezoid(dens, g2, axis=1), g1)
    assert abs(integral - 1.0) < 1e-3


def test_banana_quadrature_mean_is_zero():
    # 2-D Simpson oracle for the default parameters
    t = make_banana()
    x1 = np.linspace(-22.0, 3.0, 2001)
    x2 = np.linspace(-14.0, 14.0, 2001)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    W = np.exp(t.log_density(np.stack([X1.ravel(), X2.ravel()], axis=1))).reshape(X1.shape)
    Z = simpson(simpson(W, x=x2, axis=1), x=x1)
    m1 = simpson(simpson(W * X1, x=x2, axis=1), x=x1) / Z
    m2 = simpson(simpson(W * X2, x=x2, axis=1), x=x1) / Z
    assert abs(m1) < 1e-6 and abs(m2) < 1e-6
    assert np.allclose(t.ground_truth["identity"], [0.0, 0.0], rtol=0, atol=0)


def test_banana_exponent_maximum():
    t = make_banana()
    assert t.log_density(np.array([0.4, 0.0])) == 0.0


def test_banana_x2_symmetry():
    t = make_banana()
    rng = np.random.default_rng(1)
    x = rng.normal(size=(100, 2)) * np.array([0.5, 3.0])
    flipped = x * np.array([1.0, -1.0])
    assert np.allclose(t.log_density(x), t.log_density(flipped), rtol=0, atol=1e-12)


def test_banana_rejects_bad_params():
    with pytest.raises(ValueError):
        make_banana(eta1=-1.0)


def test_load_pima_standardization():
    design = load_pima(default_pima_path())
    assert design.X.shape == (30, 9)
    assert np.all(design.X[:, 8] == 1.0)
    feats = design.X[:, :8]
    assert np.max(np.abs(feats.mean(axis=0))) < 1e-12
    assert np.max(np.abs(feats.var(axis=0) - 1.0)) < 1e-12
    assert set(np.unique(design.Y)) <= {0, 1}


def test_load_pima_headerless(tmp_path):
    with open(default_pima_path()) as fh:
        lines = fh.read().splitlines()
    p = tmp_path / "no_header.csv"
    p.write_text("\n".join(lines[1:]) + "\n")
    design = load_pima(p)
    ref = load_pima(default_pima_path())
    assert np.array_equal(design.X, ref.X)
    assert np.array_equal(design.Y, ref.Y)


def test_load_pima_errors(tmp_path):
    with pytest.raises(IngestionError):
        load_pima(tmp_path / "missing.csv")
    short = tmp_path / "short.csv"
    short.write_text("1,2,3,4,5,6,7,8,0\n" * 10)
    with pytest.raises(IngestionError):
        load_pima(short)
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n" * 30)
    with pytest.raises(IngestionError):
        load_pima(bad)
    const = tmp_path / "const.csv"
    const.write_text("\n".join(f"5,2,{i},4,5,6,7,8,{i % 2}" for i in range(30)) + "\n")
    with pytest.raises(IngestionError, match="column 1"):
        load_pima(const)


def test_logistic_log_density_at_zero():
    t = make_logistic_posterior(load_pima(default_pima_path()))
    assert np.isclose(t.log_density(np.zeros(9)), -30 * np.log(2.0),
                      rtol=0, atol=1e-10)


def test_logistic_overflow_safe():
    design = load_pima(default_pima_path())
    t = make_logistic_posterior(design)
    z = np.zeros(9)
    z[8] = 700.0  # intercept column drives X_i^T z = 700 for every record
    with np.errstate(over="raise"):
        val = t.log_density(z)
    assert np.isfinite(val)
    loglik = val + 0.5 * 700.0**2  # remove the prior part
    n_ones = int(design.Y.sum())
    # records with Y=1 contribute ~0; records with Y=0 contribute -700
    assert np.isclose(loglik, -700.0 * (30 - n_ones), rtol=1e-10)


def test_logistic_gradient_finite_difference():
    design = load_pima(default_pima_path())
    t = make_logistic_posterior(design)
    rng = np.random.default_rng(4)
    for _ in range(20):
        z = rng.normal(size=9) * 0.5
        g = logistic_log_density_grad(design, z)
        fd = np.empty(9)
        for j in range(9):
            h = 1e-6 * (1 + abs(z[j]))
            zp, zm = z.copy(), z.copy()
            zp[j] += h
            zm[j] -= h
            fd[j] = (t.log_density(zp) - t.log_density(zm)) / (2 * h)
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-7)


def test_all_targets_finite_on_wide_cloud():
    rng = np.random.default_rng(5)
    cases = [
        (make_shared_cov_gmm(6), 6, 10 * np.sqrt(6)),
        (make_five_mixture(), 2, 10.0),
        (make_banana(), 2, 20.0),
        (make_logistic_posterior(load_pima(default_pima_path())), 9, 10.0),
    ]
    for target, d, scale in cases:
        cloud = rng.normal(size=(10**4, d)) * scale
        assert np.all(np.isfinite(target.log_density(cloud)))


def test_integrand_registry():
    assert integrand_registry("first_coord_squared").fn(np.array([3.0, 4.0])) == 9.0
    assert np.array_equal(integrand_registry("identity").fn(np.array([3.0, 4.0])),
                          [3.0, 4.0])
    assert integrand_registry("squared_norm").fn(np.array([3.0, 4.0])) == 25.0
    with pytest.raises(KeyError):
        integrand_registry("nope")
