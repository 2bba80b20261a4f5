import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bmolab.corpus import log_profile, random_fourier
from bmolab.grid import Ball, GridFunction, make_grid
from bmolab.growth import power, radial_power_weight, weighted_power
from bmolab.jn import (FitError, NotAdmissible, admissible_lambda, bound_excess,
                       distribution_normalization, exp_integrability, fit_exponential,
                       fit_polynomial_tail, jn_distribution, jn_weighted_distribution,
                       normalized_lambdas, oscillation_max)
from bmolab.semigroup import apply_kernel, poisson

BALL = Ball((2048,), 0.125)


def _curve(g, f, weighted=False, phi=None):
    phi = power(g) if phi is None else phi
    op = poisson(1)
    s = distribution_normalization(f, phi, op, BALL)
    d = jn_weighted_distribution if weighted else jn_distribution
    return d(f, phi, op, BALL, normalized_lambdas(s, points=120))


def test_distribution_matches_direct_count(g4096):
    f = log_profile(g4096)
    curve = _curve(g4096, f)
    osc = np.abs(f.values - apply_kernel(poisson(1), f, BALL.radius).values)
    inside = np.abs(g4096.axis()) < BALL.radius
    for lam, m in zip(curve.lambdas[::10], curve.measures[::10]):
        assert m == pytest.approx(np.count_nonzero(osc[inside] > lam) * g4096.spacing, rel=1e-14)


def test_distribution_nonincreasing(g4096):
    curve = _curve(g4096, random_fourier(g4096, 3))
    assert np.all(np.diff(curve.measures) <= 0)
    assert curve.measures[0] <= curve.total


def test_exponential_fit_log_profile(g4096):
    curve = _curve(g4096, log_profile(g4096))
    fit = fit_exponential(curve)
    assert fit.c2 > 0 and fit.r2 > 0.98 and fit.points >= 5
    assert bound_excess(curve, fit) >= 1.0


def test_normalization_covariance(g4096):
    f = log_profile(g4096)
    a = fit_exponential(_curve(g4096, f))
    b = fit_exponential(_curve(g4096, f * 2.0))
    assert b.c2 == pytest.approx(a.c2, rel=1e-6)


def test_fit_needs_points(g4096):
    f = log_profile(g4096)
    s = distribution_normalization(f, power(g4096), poisson(1), BALL)
    curve = jn_distribution(f, power(g4096), poisson(1), BALL, np.geomspace(1, 2, 3) * 1e6 / s)
    with pytest.raises(FitError):
        fit_exponential(curve)


def test_weighted_distribution_and_tail(g4096):
    phi = weighted_power(g4096, radial_power_weight(g4096, 0.5), 1.0)
    curve = _curve(g4096, log_profile(g4096), weighted=True, phi=phi)
    assert curve.weighted and curve.time_slot > 0
    assert np.all(np.diff(curve.measures) <= 0)
    poly = fit_polynomial_tail(curve, 2.0)
    assert poly.slope < 0 and poly.b1 == curve.total


def test_lambda_grid_rejects(g4096):
    f = log_profile(g4096)
    with pytest.raises(ValueError):
        jn_distribution(f, power(g4096), poisson(1), BALL, [2.0, 1.0])
    with pytest.raises(ValueError):
        jn_distribution(f, power(g4096), poisson(1), BALL, [0.0, 1.0])


def test_constant_not_normalizable(g1):
    f = GridFunction(g1, np.ones(g1.shape))
    with pytest.raises(ValueError):
        jn_distribution(f, power(g1), poisson(1), Ball((512,), 0.1), [1.0, 2.0])
    # an explicit seminorm bypasses the zero guard
    assert exp_integrability(f, power(g1), poisson(1), Ball((512,), 0.1), 1.0, seminorm=1.0) == \
        pytest.approx(1.0, abs=1e-12)


def test_exp_integrability_and_admissible(g4096):
    f, phi, op = log_profile(g4096), power(g4096), poisson(1)
    v1 = exp_integrability(f, phi, op, BALL, 0.1)
    v2 = exp_integrability(f, phi, op, BALL, 0.2)
    assert 1 < v1 < v2
    lam, v = admissible_lambda(f, phi, op, BALL, 1e6, cap=2.0)
    assert v <= 2.0 and lam < 1e6
    with pytest.raises(NotAdmissible):
        exp_integrability(f, phi, op, BALL, 1e6)
    with pytest.raises(ValueError):
        exp_integrability(f, phi, op, BALL, 0.0)


def test_oscillation_max(g4096):
    f = log_profile(g4096)
    osc = np.abs(f.values - apply_kernel(poisson(1), f, BALL.radius).values)
    assert oscillation_max(f, poisson(1), BALL) == osc[np.abs(g4096.axis()) < BALL.radius].max()


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 31), a=st.floats(0.01, 100.0))
def test_normalized_distribution_scale_free(seed, a):
    g = make_grid(1, 1.0, 512)
    f = random_fourier(g, seed)
    phi, op, ball = power(g), poisson(1), Ball((256,), 0.125)
    grid_l = np.geomspace(0.1, 5.0, 20)
    c1 = jn_distribution(f, phi, op, ball, grid_l / distribution_normalization(f, phi, op, ball))
    fa = f * a
    c2 = jn_distribution(fa, phi, op, ball, grid_l / distribution_normalization(fa, phi, op, ball))
    np.testing.assert_array_equal(c1.counts, c2.counts)
