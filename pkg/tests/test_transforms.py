import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from rqmc_mamis import pointgen
from rqmc_mamis.transforms import (clamp_unit, gaussian_transport,
                                   inv_chi2_cdf, inv_norm_cdf, norm_cdf,
                                   student_t_transport)

# high-precision reference for Phi^{-1}(0.975), from a 40-digit erfinv
PHI_INV_0975 = 1.9599639845400545


def test_inv_norm_cdf_median():
    assert inv_norm_cdf(0.5) == 0.0


def test_inv_norm_cdf_reference_value():
    assert abs(inv_norm_cdf(0.975) - PHI_INV_0975) < 1e-5


def test_inv_norm_cdf_antisymmetry():
    u = np.linspace(1e-6, 0.5 - 1e-9, 257)
    assert np.allclose(inv_norm_cdf(u), -inv_norm_cdf(1.0 - u), rtol=0, atol=1e-11)


def test_round_trip_on_grid():
    u = np.linspace(1e-8, 1 - 1e-8, 10**4)
    z = inv_norm_cdf(u)
    assert np.max(np.abs(norm_cdf(z) - u)) <= 1e-9


def test_central_cdf_accuracy():
    u = np.linspace(0.001, 0.999, 4001)
    assert np.max(np.abs(norm_cdf(inv_norm_cdf(u)) - u)) <= 1e-12


def test_tail_relative_cdf_accuracy():
    u = np.geomspace(2**-53, 1e-3, 2000)
    rel = np.abs(norm_cdf(inv_norm_cdf(u)) - u) / u
    assert np.max(rel) <= 1e-9
    # upper tail measured through the survival function (1 - CDF is lossy);
    # the reference mass is the survival of the actual representable input
    upper = 1.0 - u
    mass = 1.0 - upper  # exact for upper in [0.5, 1]
    z_up = inv_norm_cdf(upper)
    survival = 0.5 * special.erfc(z_up / np.sqrt(2.0))
    rel_up = np.abs(survival - mass) / mass
    assert np.max(rel_up) <= 1e-9


def test_inv_norm_cdf_monotone():
    u = np.linspace(1e-10, 1 - 1e-10, 5001)
    z = inv_norm_cdf(u)
    assert np.all(np.diff(z) > 0)


def test_inv_norm_cdf_rejects_out_of_range():
    with pytest.raises(ValueError):
        inv_norm_cdf(-0.1)
    with pytest.raises(ValueError):
        inv_norm_cdf(np.array([0.2, 1.3]))


def test_clamp_handles_exact_zero_and_one_inputs():
    z = inv_norm_cdf(np.array([0.0, 1.0]))
    assert np.all(np.isfinite(z))
    assert z[0] < -8 and z[1] > 8


@given(st.floats(min_value=1e-12, max_value=1 - 1e-12),
       st.floats(min_value=1e-12, max_value=1 - 1e-12))
@settings(max_examples=200, deadline=None)
def test_inv_norm_cdf_monotone_property(u1, u2):
    if u1 == u2:
        return
    lo, hi = min(u1, u2), max(u1, u2)
    assert inv_norm_cdf(lo) <= inv_norm_cdf(hi)


def test_inv_chi2_cdf_closed_forms_nu2():
    # chi^2_2 CDF is 1 - exp(-w/2), solved analytically
    assert abs(inv_chi2_cdf(0.5, 2.0) - 2.0 * np.log(2.0)) < 1e-9
    assert abs(inv_chi2_cdf(0.9, 2.0) - (-2.0 * np.log(0.1))) < 1e-9


def test_inv_chi2_cdf_lower_limit():
    w = inv_chi2_cdf(1e-14, 2.0)
    assert 0.0 <= w < 1e-10


def test_inv_chi2_cdf_definition_tolerance():
    rng = np.random.default_rng(0)
    for nu in (0.5, 1.0, 2.0, 3.7, 9.0, 40.0):
        u = rng.uniform(1e-9, 1 - 1e-9, size=200)
        w = inv_chi2_cdf(u, nu)
        assert np.max(np.abs(special.gammainc(nu / 2.0, w / 2.0) - u)) <= 1e-10


def test_inv_chi2_cdf_matches_scipy():
    u = np.linspace(0.001, 0.999, 101)
    for nu in (1.0, 2.0, 5.0, 11.5):
        ref = stats.chi2.ppf(u, nu)
        assert np.allclose(inv_chi2_cdf(u, nu), ref, rtol=1e-8, atol=1e-8)


def test_inv_chi2_cdf_monotone():
    u = np.linspace(1e-6, 1 - 1e-6, 2001)
    w = inv_chi2_cdf(u, 3.0)
    assert np.all(np.diff(w) > 0)


def test_inv_chi2_cdf_rejects_bad_args():
    with pytest.raises(ValueError):
        inv_chi2_cdf(0.5, -1.0)
    with pytest.raises(ValueError):
        inv_chi2_cdf(1.5, 2.0)


def test_gaussian_transport_center_and_shift():
    d = 4
    row = np.full(d, 0.5)
    assert np.allclose(gaussian_transport(np.zeros(d), np.eye(d), row), 0.0)
    mu = np.array([1.0, -2.0, 0.5, 3.0])
    assert np.allclose(gaussian_transport(mu, np.eye(d), row), mu)


def test_gaussian_transport_moment_check():
    rng = np.random.default_rng(3)
    B = rng.normal(size=(3, 3))
    cov = B @ B.T + 0.5 * np.eye(3)
    L = np.linalg.cholesky(cov)
    ps = pointgen.generate_sobol(14, 3, seed=77)
    X = gaussian_transport(np.zeros(3), L, ps.values)
    emp = np.cov(X.T, bias=True)
    assert np.linalg.norm(emp - cov) < 0.05 * np.linalg.norm(cov)


def test_student_t_transport_center_row():
    d = 3
    mu = np.array([0.5, -1.0, 2.0])
    row = np.array([0.5, 0.5, 0.5, 0.123])
    out = student_t_transport(mu, np.eye(d), 2.0, row)
    assert np.allclose(out, mu)  # z = 0 regardless of the mixing variate


def test_student_t_large_nu_approaches_gaussian():
    mu = np.zeros(2)
    L = np.eye(2)
    nu = 1e6
    row = np.array([[0.7, 0.3, 0.5]])  # mixing coordinate at its median
    t_out = student_t_transport(mu, L, nu, row)
    g_out = gaussian_transport(mu, L, row[:, :2])
    assert np.allclose(t_out, g_out, rtol=0, atol=1e-5)


def test_student_t_median_matches_location():
    mu = np.array([1.5, -0.5])
    ps = pointgen.generate_sobol(14, 3, seed=5)
    X = student_t_transport(mu, np.eye(2), 2.0, ps.values)
    med = np.median(X, axis=0)
    assert np.all(np.abs(med - mu) < 0.05)


def test_transport_determinism():
    ps = pointgen.generate_iid(128, 3, seed=10)
    a = gaussian_transport(np.zeros(2), np.eye(2), ps.values[:, :2])
    b = gaussian_transport(np.zeros(2), np.eye(2), ps.values[:, :2])
    assert np.array_equal(a, b)
    c = student_t_transport(np.zeros(2), np.eye(2), 2.0, ps.values)
    d = student_t_transport(np.zeros(2), np.eye(2), 2.0, ps.values)
    assert np.array_equal(c, d)


def test_clamp_unit_bounds():
    u = clamp_unit(np.array([0.0, 0.5, 1.0]))
    assert u[0] == 2.0**-53 and u[2] == 1.0 - 2.0**-53 and u[1] == 0.5
