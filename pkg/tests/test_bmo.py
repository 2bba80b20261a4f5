import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bmolab.bmo import (admissibility_check, bmo_phi, bmo_phi_A, bmo_phi_A_max, bmo_phi_A_p,
                        bmo_tilde_p, drift_bound_check, drift_exponent, mean_drift_check,
                        verify_wb_conditions)
from bmolab.corpus import log_profile, random_fourier
from bmolab.grid import GridFunction, ball_flat_indices, make_ball_menu, make_grid, standard_menu
from bmolab.growth import power, radial_power_weight, weighted_power
from bmolab.luxembourg import indicator_norm
from bmolab.semigroup import box, heat, poisson


def _small():
    g = make_grid(1, 1.0, 256)
    return g, make_ball_menu(g, 16, [0.125, 0.0625, 0.03125])


def test_constant_has_zero_seminorms(g1):
    f = GridFunction(g1, np.full(g1.shape, 4.0))
    menu = standard_menu(g1)
    phi = power(g1)
    assert bmo_phi(f, phi, menu).value == pytest.approx(0.0, abs=1e-12)
    for op in (poisson(1), heat(), box()):
        assert bmo_phi_A(f, phi, op, menu).value == pytest.approx(0.0, abs=1e-12)


def test_classical_matches_loop(g1):
    f = random_fourier(g1, 2)
    phi = weighted_power(g1, radial_power_weight(g1, 0.5), 1.0)
    menu = make_ball_menu(g1, 128, [0.125, 0.03])
    best = 0.0
    for b in menu.balls:
        v = f.values[ball_flat_indices(g1, np.array([b.center]), b.radius)[0]]
        best = max(best, np.abs(v - v.mean()).sum() * g1.spacing / indicator_norm(phi, b))
    assert bmo_phi(f, phi, menu).value == pytest.approx(best, rel=1e-12)


def test_poisson_log_profile_regression(g4096):
    rep = bmo_phi_A(log_profile(g4096), power(g4096), poisson(1), standard_menu(g4096))
    assert rep.value == pytest.approx(1.1192381987349882, rel=1e-10)
    assert rep.kind == "A" and rep.kernel == "poisson" and rep.note == "menu-restricted"


def test_tilde_p_weighted_regression(g4096):
    phi = weighted_power(g4096, radial_power_weight(g4096, 0.5), 1.0)
    rep = bmo_tilde_p(log_profile(g4096), phi, poisson(1), standard_menu(g4096), 2.0)
    assert rep.value == pytest.approx(44.761932024177625, rel=1e-10)


def test_p_one_variants_coincide(g1):
    f, phi, menu = random_fourier(g1, 1), power(g1), standard_menu(g1)
    a = bmo_phi_A(f, phi, poisson(1), menu).value
    assert bmo_phi_A_p(f, phi, poisson(1), menu, 1.0).value == a
    assert bmo_tilde_p(f, phi, poisson(1), menu, 1.0).value == pytest.approx(a, rel=1e-12)


def test_p_tilde_below_one_rejected(g1):
    f, phi, menu = random_fourier(g1, 1), power(g1), standard_menu(g1)
    with pytest.raises(ValueError):
        bmo_phi_A_p(f, phi, heat(), menu, 0.5)
    with pytest.raises(ValueError):
        bmo_tilde_p(f, phi, heat(), menu, 0.5)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), a=st.floats(-100, 100).filter(lambda v: abs(v) > 1e-3))
def test_homogeneous(seed, a):
    g, menu = _small()
    f = random_fourier(g, seed)
    phi = power(g)
    assert bmo_phi(f * a, phi, menu).value == pytest.approx(abs(a) * bmo_phi(f, phi, menu).value, rel=1e-10)
    assert bmo_phi_A(f * a, phi, heat(), menu).value == pytest.approx(
        abs(a) * bmo_phi_A(f, phi, heat(), menu).value, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), c=st.floats(-50, 50))
def test_constants_are_invisible(seed, c):
    g, menu = _small()
    f = random_fourier(g, seed)
    phi = power(g)
    assert bmo_phi(f + c, phi, menu).value == pytest.approx(bmo_phi(f, phi, menu).value, rel=1e-9, abs=1e-12)
    assert bmo_phi_A(f + c, phi, poisson(1), menu).value == pytest.approx(
        bmo_phi_A(f, phi, poisson(1), menu).value, rel=1e-9, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), k=st.integers(-20, 20))
def test_stride_translation_invariant(seed, k):
    g, menu = _small()
    f = random_fourier(g, seed)
    phi = power(g)
    shifted = f.translate((16 * k,))
    assert bmo_phi(shifted, phi, menu).value == pytest.approx(bmo_phi(f, phi, menu).value, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), p=st.floats(1.0, 4.0), dp=st.floats(0.0, 3.0))
def test_p_variant_monotone(seed, p, dp):
    g, menu = _small()
    f, phi = random_fourier(g, seed), power(g)
    lo = bmo_phi_A_p(f, phi, heat(), menu, p).value
    hi = bmo_phi_A_p(f, phi, heat(), menu, p + dp).value
    assert lo <= hi * (1 + 1e-12)


def test_growth_scaling(g1):
    f, menu = random_fourier(g1, 0), standard_menu(g1)
    a = bmo_phi(f, power(g1), menu).value
    assert bmo_phi(f, power(g1, scale=4.0), menu).value == pytest.approx(a / 4, rel=1e-12)


def test_maximal_variant_nonnegative(g1):
    rep = bmo_phi_A_max(random_fourier(g1, 0), power(g1), poisson(1))
    assert np.all(rep.contributions >= 0) and rep.value > 0
    x, t = rep.argmax_element
    assert len(x) == 1 and t > 0


def test_wb_first_constant_is_A(g1):
    f, phi, menu = random_fourier(g1, 0), power(g1), standard_menu(g1)
    wb = verify_wb_conditions(f, phi, poisson(1), menu)
    assert wb.c1 == bmo_phi_A(f, phi, poisson(1), menu).value
    assert wb.c2 > 0 and wb.c3 > 0 and wb.exponent == 0.0


def test_drift_exponent(g1, g2):
    assert drift_exponent(power(g1)) == 0.0
    phi = weighted_power(g2, radial_power_weight(g2, 0.5), 0.5, ap_exponent=2.0)
    assert drift_exponent(phi) == pytest.approx(2 * 2 / 0.5 - 2)
    assert drift_exponent(phi, n=1, alpha=0, p1=1, p=1) == 1.0


def test_drift_checks(g1):
    f, phi = random_fourier(g1, 0), power(g1)
    s = bmo_phi_A(f, phi, poisson(1), standard_menu(g1))
    rep = drift_bound_check(f, phi, poisson(1), [(0,), (100,)], 0.01, [2, 4, 8], s)
    assert len(rep.ratios) == 3 and np.isfinite(rep.max_ratio)
    menu = standard_menu(g1)
    rep = mean_drift_check(f, phi, [b for b in menu.balls if b.radius <= 0.03][:4], [2, 4], s)
    assert np.isfinite(rep.max_ratio)
    with pytest.raises(ValueError):
        drift_bound_check(f, phi, poisson(1), [(0,)], 0.01, [1.0], s)
    with pytest.raises(ValueError):
        mean_drift_check(f, phi, menu.balls[:1], [2], 0.0)


def test_admissibility_of_constant(g1):
    # for f = 1 with r = 1: int dx / ((1 + d)^beta * 2 (1 + d)), d = |x|
    d = np.abs(g1.axis())
    want = np.sum(1 / ((1 + d) ** 0.5 * 2 * (1 + d))) * g1.spacing
    v = admissibility_check(GridFunction(g1, np.ones(g1.shape)), 0.0, 0.5, 2.0)
    assert v == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        admissibility_check(GridFunction(g1, np.ones(g1.shape)), 0.0, 1.5, 2.0)
