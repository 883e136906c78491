import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rqmc_mamis.theory import empirical_lq_error, smoothed_projection


def test_projection_identity_at_origin():
    assert smoothed_projection(0.0, 3.0) == 0.0


def test_projection_saturates_at_half_band():
    assert smoothed_projection(10.0, 3.0) == 2.5
    assert smoothed_projection(-10.0, 3.0) == -2.5


def test_projection_identity_core_exact():
    x = np.linspace(-2.0, 2.0, 401)  # core is [-2, 2] for R = 3
    assert np.array_equal(smoothed_projection(x, 3.0), x)


def test_projection_odd_exact():
    x = np.linspace(-8.0, 8.0, 4001)
    assert np.array_equal(smoothed_projection(-x, 3.0), -smoothed_projection(x, 3.0))


def test_projection_bound():
    x = np.linspace(-50.0, 50.0, 20001)
    for R in (1.5, 3.0, 7.0):
        assert np.all(np.abs(smoothed_projection(x, R)) <= R - 0.5)


def test_projection_monotone():
    x = np.linspace(-10.0, 10.0, 5001)
    assert np.all(np.diff(smoothed_projection(x, 2.5)) >= 0.0)


@pytest.mark.parametrize("R", [2.0, 3.0, 5.5])
def test_projection_c1_at_knots(R):
    h = 1e-6
    for knot in (-R, -R + 1.0, R - 1.0, R):
        left = (smoothed_projection(knot, R) - smoothed_projection(knot - h, R)) / h
        right = (smoothed_projection(knot + h, R) - smoothed_projection(knot, R)) / h
        assert abs(left - right) <= 1e-4
    # continuity across each knot
    for knot in (-R, -R + 1.0, R - 1.0, R):
        gap = abs(smoothed_projection(knot + h, R) - smoothed_projection(knot - h, R))
        assert gap <= 3 * h


def test_projection_rejects_small_radius():
    with pytest.raises(ValueError):
        smoothed_projection(1.0, 1.0)


@given(st.floats(min_value=-100, max_value=100),
       st.floats(min_value=1.001, max_value=20))
@settings(max_examples=200, deadline=None)
def test_projection_properties_hypothesis(x, R):
    p = smoothed_projection(x, R)
    assert abs(p) <= R - 0.5
    assert smoothed_projection(-x, R) == -p
    if abs(x) <= R - 1.0:
        assert p == x


def test_empirical_lq_error_monotone_in_budget():
    f = lambda z: z[:, 0]
    big = empirical_lq_error(f, "rqmc", 2**12, 1, 2.0, 8, 0.0, seed=3)
    small = empirical_lq_error(f, "rqmc", 2**8, 1, 2.0, 8, 0.0, seed=3)
    assert big < small


def test_empirical_lq_error_validates_args():
    f = lambda z: z[:, 0]
    with pytest.raises(ValueError):
        empirical_lq_error(f, "rqmc", 64, 1, 0.5, 8, 0.0, seed=0)
    with pytest.raises(ValueError):
        empirical_lq_error(f, "rqmc", 64, 1, 2.0, 0, 0.0, seed=0)


def test_empirical_lq_error_slopes():
    # f(x) = x_1^2 under N(0, I_2), truth 1 (analytic oracle)
    from rqmc_mamis.harness import fit_loglog_slope

    f = lambda z: z[:, 0] ** 2
    budgets = [2**k for k in range(6, 14)]
    rq = [empirical_lq_error(f, "rqmc", n, 2, 2.0, 50, 1.0, seed=5) for n in budgets]
    mc = [empirical_lq_error(f, "mc", n, 2, 2.0, 50, 1.0, seed=5) for n in budgets]
    s_rq, _ = fit_loglog_slope(budgets, rq)
    s_mc, _ = fit_loglog_slope(budgets, mc)
    assert s_rq <= -0.9
    assert -0.65 <= s_mc <= -0.35
