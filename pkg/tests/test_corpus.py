import numpy as np
import pytest

from bmolab.corpus import MEMBERS, generate_corpus, log_profile, random_fourier, sawtooth
from bmolab.grid import make_grid


def test_all_members_present(g1):
    c = generate_corpus(g1)
    assert c.names() == MEMBERS
    for _, f in c:
        assert f.grid == g1 and np.all(np.isfinite(f.values))


def test_unknown_member(g1):
    with pytest.raises(KeyError):
        generate_corpus(g1, names=["nope"])


def test_deterministic(g2):
    a, b = generate_corpus(g2, seed=3), generate_corpus(g2, seed=3)
    for (na, fa), (nb, fb) in zip(a, b):
        assert na == nb
        np.testing.assert_array_equal(fa.values, fb.values)


def test_seed_changes_random_member(g1):
    assert not np.array_equal(random_fourier(g1, 0).values, random_fourier(g1, 1).values)


def test_random_fourier_normalised(g2):
    f = random_fourier(g2, 5)
    assert abs(f.values.mean()) < 1e-14
    assert np.max(np.abs(f.values)) == pytest.approx(1.0, rel=1e-15)


def test_sawtooth_mean_zero(g1):
    assert abs(sawtooth(g1).integral() / g1.total_measure) <= g1.spacing


def test_log_profile_maximum():
    # log|2 sin(pi x)| peaks at log 2 on the antipode of the singularity
    g = make_grid(1, 1.0, 4096)
    assert np.max(log_profile(g).values) == pytest.approx(np.log(2), abs=1e-6)
    assert np.max(log_profile(g).values) == pytest.approx(0.6931471564315084, rel=1e-12)


def test_log_profile_mean_zero_1d():
    # int_0^1 log|2 sin(pi x)| dx = 0
    g = make_grid(1, 1.0, 4096)
    assert abs(log_profile(g).values.mean()) < 1e-3
