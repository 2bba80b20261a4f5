import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bmolab.carleson import (index_condition_check, default_scales, equivalence_report, g_function,
                             log_trapezoid_weights, lp_derivative_field, lp_symbol,
                             phi_carleson_norm, refined_scales, single_mode_oracle, tent_sample)
from bmolab.corpus import generate_corpus, log_profile, random_fourier
from bmolab.grid import GridFunction, make_ball_menu, make_grid, standard_menu
from bmolab.growth import power, radial_power_weight, weighted_power
from bmolab.semigroup import apply_kernel, box, heat, poisson


def test_field_regression(g4096):
    f = log_profile(g4096)
    for (i, t), want in [((2048, 0.01), 0.030056850082058044), ((2100, 0.05), 0.08784759927033355),
                         ((1000, 0.1), -0.04007533288642155)]:
        assert lp_derivative_field(f, poisson(1), t).values[i] == pytest.approx(want, rel=1e-10)


@pytest.mark.parametrize("op,t", [(poisson(1), 0.02), (heat(), 4e-4)])
def test_field_matches_finite_difference(g1, op, t):
    # t d/dt [P_t f - P_2t f] by a central difference through the semigroup
    f = random_fourier(g1, 4)
    eps = 1e-4 * t

    def u(tau):
        return apply_kernel(op, f, tau).values - apply_kernel(op, f, 2 * tau).values

    fd = t * (u(t + eps) - u(t - eps)) / (2 * eps)
    np.testing.assert_allclose(lp_derivative_field(f, op, t).values, fd, atol=1e-7)


def test_symbol_rejects_box():
    with pytest.raises(ValueError):
        lp_symbol(box(), np.ones(3), 0.1)


def test_field_rejects_large_t(g1):
    with pytest.raises(ValueError):
        lp_derivative_field(random_fourier(g1, 0), poisson(1), 0.2)


def test_log_trapezoid_integrates_constants():
    s = np.geomspace(0.01, 0.1, 17)
    assert log_trapezoid_weights(s, 2.0).sum() == pytest.approx(2 * np.log(10), rel=1e-14)
    with pytest.raises(ValueError):
        log_trapezoid_weights([0.1])


def test_refined_scales_nested(g1):
    s = default_scales(g1, 10)
    r = refined_scales(s)
    assert r.size == 19 and np.all(r[0::2] == s) and np.all(np.diff(r) > 0)


def test_g_function_single_mode_2d():
    g = make_grid(2, 1.0, 128)
    x = g.coordinates()[0]
    f = GridFunction(g, np.cos(2 * np.pi * 4 * x))
    s = default_scales(g)
    for op in (poisson(2), heat()):
        want = np.sqrt(single_mode_oracle(8 * np.pi, s[0], s[-1], op)) * np.abs(f.values)
        got = g_function(f, op, s).values
        assert np.max(np.abs(got - want)) <= 2e-3 * np.max(want)


def test_g_function_empty_grid(g1):
    with pytest.raises(ValueError):
        g_function(random_fourier(g1, 0), poisson(1), [])


def test_tent_sample_matches_contribution(g1):
    f, phi = random_fourier(g1, 1), power(g1)
    menu = make_ball_menu(g1, 256, [0.125, 0.03125])
    rep = phi_carleson_norm(f, phi, poisson(1), menu)
    b = menu.balls[rep.argmax]
    ts = tent_sample(f, poisson(1), b)
    mu = ts.density.shape[1] * g1.spacing
    assert rep.value == pytest.approx(np.sqrt(mu) / mu * np.sqrt(ts.integral), rel=1e-12)
    assert ts.scales[-1] == b.radius


def test_constant_has_zero_carleson_norm(g1):
    f = GridFunction(g1, np.full(g1.shape, 3.0))
    assert phi_carleson_norm(f, power(g1), heat(), standard_menu(g1)).value < 1e-14


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 31), a=st.floats(0.01, 100.0), c=st.floats(-10, 10))
def test_carleson_seminorm_properties(seed, a, c):
    g = make_grid(1, 1.0, 256)
    menu = make_ball_menu(g, 32, [0.125, 0.0625])
    f, phi = random_fourier(g, seed), power(g)
    v = phi_carleson_norm(f, phi, poisson(1), menu).value
    assert phi_carleson_norm(f * a + c, phi, poisson(1), menu).value == pytest.approx(a * v, rel=1e-9)


def test_equivalence_report_shape(g1):
    corpus = generate_corpus(g1, names=["log_profile", "smoothed_sawtooth", "mollified_indicator",
                                        "random_fourier", "single_mode"])
    tab = equivalence_report(corpus, power(g1), standard_menu(g1))
    assert tab.values.shape == (5, len(tab.columns))
    lo, hi = tab.window("carleson", "bmo_A_poisson")
    r = tab.column("carleson") / tab.column("bmo_A_poisson")
    assert (lo, hi) == (r.min(), r.max())
    np.testing.assert_array_equal(tab.column("wb_c1"), tab.column("bmo_A_poisson"))


def test_equivalence_report_rejects(g1):
    with pytest.raises(ValueError):
        equivalence_report(generate_corpus(g1, names=["log_profile"]), power(g1), standard_menu(g1))
    corpus = generate_corpus(g1, names=["constant", "log_profile", "smoothed_sawtooth",
                                        "random_fourier", "single_mode"])
    with pytest.raises(ValueError, match="zero classical seminorm"):
        equivalence_report(corpus, power(g1), standard_menu(g1))


def test_index_condition(g1, g2):
    b = index_condition_check(power(g1))
    assert b == {"lhs": 1.0, "rhs": 2.0, "holds": True, "status": "unverified"}
    phi = weighted_power(g2, radial_power_weight(g2, 0.5), 1.0, ap_exponent=1.0, rh_exponent=2.0)
    b = index_condition_check(phi)
    assert b["lhs"] == pytest.approx(4 - 1) and b["rhs"] == 3.0 and not b["holds"]


def test_radius_at_grid_start_has_empty_tent():
    g = make_grid(1, 1.0, 256)
    f = random_fourier(g, 0)
    menu = make_ball_menu(g, 64, [4 * g.spacing])
    assert tent_sample(f, poisson(1), menu.balls[0]).integral == 0.0
    assert phi_carleson_norm(f, power(g), poisson(1), menu).value == 0.0
    full = standard_menu(g)
    assert phi_carleson_norm(f, power(g), poisson(1), full).value > 0
