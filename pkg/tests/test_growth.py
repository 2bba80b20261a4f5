import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from bmolab.grid import Ball, GridError, GridFunction, ball_flat_indices, make_ball_menu, make_grid
from bmolab.growth import (GrowthFunction, ap_constant, check_afnj, eval_growth, ky_log, log_type,
                           nested_pairs_from_menu, power, radial_power_weight, rh_constant,
                           type_exponent_probe, weighted_power)


def _menu(g):
    return make_ball_menu(g, 64, [g.side_length / 8 * 2.0 ** -k for k in range(5)])


def test_power_values(g1):
    phi = power(g1, 0.75, scale=3.0)
    assert eval_growth(phi, (5,), 2.0) == pytest.approx(3.0 * 2.0 ** 0.75, rel=1e-15)
    assert eval_growth(phi, (5,), 0.0) == 0.0


def test_log_type_formula(g1):
    phi = log_type(g1, s=0.5, beta=1.0, gamma=2.0)
    x = g1.point((900,))[0]
    d = abs(x)
    want = 7.0 ** 0.5 / (np.log(np.e + d) + np.log(np.e + 7.0) ** 2)
    assert eval_growth(phi, (900,), 7.0) == pytest.approx(want, rel=1e-14)


def test_log_type_zero_logs_halves(g1):
    # with beta = gamma = 0 both log factors equal 1
    phi = log_type(g1, s=1.0)
    assert eval_growth(phi, (0,), 5.0) == pytest.approx(2.5, rel=1e-15)


def test_ky_log_formula(g1):
    phi = ky_log(g1, 0.5, anchor=(0.1,))
    x = g1.point((300,))[0]
    d = abs(x - 0.1)
    tp = 3.0 ** 0.5
    assert eval_growth(phi, (300,), 3.0) == pytest.approx(tp / (np.log(np.e + d) + np.log(np.e + tp)) ** 0.5,
                                                          rel=1e-14)


def test_weighted_formula(g1, rng):
    w = GridFunction(g1, rng.uniform(0.5, 2.0, g1.shape))
    phi = weighted_power(g1, w, 0.5)
    assert eval_growth(phi, (11,), 4.0) == pytest.approx(w.values[11] * 2.0, rel=1e-15)


@pytest.mark.parametrize("kw", [dict(family="nope"), dict(exponent=0.0), dict(beta=-1.0),
                                dict(scale=0.0), dict(anchor=(0.0, 0.0)), dict(upper_type=1.5)])
def test_growth_rejects(g1, kw):
    base = dict(grid=g1, family="log_type", exponent=1.0)
    base.update(kw)
    with pytest.raises(ValueError):
        GrowthFunction(**base)


def test_weighted_needs_positive_weight(g1):
    with pytest.raises(ValueError):
        weighted_power(g1, GridFunction(g1, np.zeros(g1.shape)))


def test_negative_t_rejected(g1):
    with pytest.raises(ValueError):
        eval_growth(power(g1), (0,), -1.0)


def test_radial_weight_exact_cell_average():
    g = make_grid(1, 1.0, 256)
    w = radial_power_weight(g, 0.5).values
    h = g.spacing
    for i in (0, 1, 127, 128, 129, 255):
        x = g.point((i,))[0]
        want = quad(lambda y: min(abs(y), 1 - abs(y)) ** 0.5, x - h / 2, x + h / 2,
                    points=[0.0] if abs(x) < h else None, epsabs=1e-15)[0] / h
        assert w[i] == pytest.approx(want, rel=1e-12)


def test_radial_weight_rejects_nonintegrable(g1):
    with pytest.raises(ValueError):
        radial_power_weight(g1, -1.0)


def test_radial_weight_2d_positive(g2):
    w = radial_power_weight(g2, -0.5).values
    assert np.all(np.isfinite(w)) and np.all(w > 0)
    assert np.argmax(w) == np.ravel_multi_index((32, 32), g2.shape)


def _ap_oracle(w, g, menu, p):
    best = 0.0
    for b in menu.balls:
        v = w[ball_flat_indices(g, np.array([b.center]), b.radius)[0]]
        best = max(best, v.mean() * np.mean(v ** (-1 / (p - 1))) ** (p - 1))
    return best


def test_weighted_a2_regression():
    g = make_grid(1, 2.0, 4096)
    w = radial_power_weight(g, 0.5)
    phi = weighted_power(g, w)
    menu = _menu(g)
    rep = ap_constant(phi, menu, 2.0)
    assert rep.constant == pytest.approx(_ap_oracle(w.values, g, menu, 2.0), rel=1e-12)
    assert rep.constant == pytest.approx(1.484970325380028, rel=1e-10)
    assert rh_constant(phi, menu, 2.0).constant == pytest.approx(1.0871192298001944, rel=1e-10)


def test_power_is_a1_and_rh_infinity(g1):
    menu = _menu(g1)
    assert ap_constant(power(g1, 0.5), menu, 1.0).constant == pytest.approx(1.0, rel=1e-14)
    assert rh_constant(power(g1, 0.5), menu, np.inf).constant == pytest.approx(1.0, rel=1e-14)


def test_ap_rejects(g1):
    menu = _menu(g1)
    with pytest.raises(ValueError):
        ap_constant(power(g1), menu, 0.5)
    with pytest.raises(ValueError):
        rh_constant(power(g1), menu, 1.0)
    with pytest.raises(ValueError):
        ap_constant(power(g1), menu, 2.0, t_samples=[])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), p=st.floats(1.1, 4.0), c=st.floats(0.01, 100.0))
def test_ap_at_least_one_and_scale_invariant(seed, p, c):
    g = make_grid(1, 1.0, 256)
    w = GridFunction(g, np.random.default_rng(seed).uniform(0.1, 10.0, g.shape))
    menu = make_ball_menu(g, 32, [0.125, 0.0625])
    a = ap_constant(weighted_power(g, w), menu, p).constant
    b = ap_constant(weighted_power(g, w, scale=c), menu, p).constant
    assert a >= 1 - 1e-12
    assert a == b


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), p=st.floats(1.2, 4.0), dp=st.floats(0.1, 2.0))
def test_ap_monotone_in_p(seed, p, dp):
    g = make_grid(1, 1.0, 256)
    w = GridFunction(g, np.random.default_rng(seed).uniform(0.1, 10.0, g.shape))
    menu = make_ball_menu(g, 32, [0.125, 0.0625])
    phi = weighted_power(g, w)
    assert ap_constant(phi, menu, p + dp).constant <= ap_constant(phi, menu, p).constant * (1 + 1e-12)


def test_type_probe_power(g1):
    probe = type_exponent_probe(power(g1, 0.6), [(0,), (100,)], 2.0 ** np.arange(-5, 6),
                                np.geomspace(0.01, 100, 9), c_candidates=(1.0,))
    assert probe.lower == pytest.approx(0.6, abs=1e-12)
    assert probe.upper == pytest.approx(0.6, abs=1e-12)


def test_type_probe_ky_log_regression(g4096):
    phi = ky_log(g4096, 1.0)
    probe = type_exponent_probe(phi, [(i,) for i in range(0, 4096, 256)], 2.0 ** np.arange(-10, 11),
                                np.geomspace(1e-3, 0.5, 12))
    assert probe.upper is None
    assert probe.lower < 1
    assert probe.lower == pytest.approx(0.9223206872884733, rel=1e-10)


def test_type_probe_rejects_empty(g1):
    with pytest.raises(ValueError):
        type_exponent_probe(power(g1), [], [1.0], [0.5])


def test_afnj_unweighted_is_one(g1):
    # ||chi_B|| = mu(B) for phi = t
    phi = power(g1, 1.0)
    assert check_afnj(phi, nested_pairs_from_menu(_menu(g1), g1)) == pytest.approx(1.0, rel=1e-14)


def test_afnj_weighted_regression(g4096):
    from bmolab.grid import standard_menu
    phi = weighted_power(g4096, radial_power_weight(g4096, 0.5), p=0.5)
    menu = standard_menu(g4096)
    assert check_afnj(phi, nested_pairs_from_menu(menu, g4096)) == pytest.approx(0.5601083915311501,
                                                                                rel=1e-10)


def test_afnj_rejects(g1):
    phi = power(g1)
    with pytest.raises(ValueError):
        check_afnj(phi, [])
    with pytest.raises(GridError):
        check_afnj(phi, [(Ball((0,), 0.1), Ball((500,), 0.1))])
