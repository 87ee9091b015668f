import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import ellipk

from isotorus import frequency as fq
from isotorus.errors import ConfigError, InvalidPotentialError, OutOfBandError
from isotorus.potential import (FourierPotential, LatticePotential, fourier_recover,
                                lame_potential, pushforward_periodic, random_potential,
                                tail_bound)


def test_random_potential_budget(desk_V):
    desk_V.check()
    assert (0, 0) not in desk_V.coeffs
    for n, c in desk_V.coeffs.items():
        assert abs(c) <= 0.05 * math.exp(-sum(map(abs, n))) * (1 + 1e-12)
        assert desk_V.coeffs[tuple(-v for v in n)] == pytest.approx(c.conjugate())


def test_random_potential_seeded(two_freq):
    a = random_potential(two_freq, 0.05, seed=3)
    b = random_potential(two_freq, 0.05, seed=3)
    assert a.coeffs == b.coeffs


def test_reality_violation(two_freq):
    with pytest.raises(InvalidPotentialError):
        FourierPotential({(1, 0): 0.01}, two_freq, 0.05)


def test_decay_violation(two_freq):
    with pytest.raises(InvalidPotentialError):
        FourierPotential({(1, 0): 0.1, (-1, 0): 0.1}, two_freq, 0.05)


def test_dict_roundtrip(desk_V):
    W = FourierPotential.from_dict(desk_V.to_dict())
    x = np.linspace(0, 10, 7)
    assert np.allclose(W(x), desk_V(x), atol=1e-15)


def test_shift_is_translation(desk_V):
    x = np.linspace(-3, 3, 11)
    assert np.allclose(desk_V.shifted(0.7)(x), desk_V(x + 0.7), atol=1e-14)


def test_pushforward_matches_rational_evaluation(desk_V, desk_lattice, desk_lp):
    x = np.linspace(0, desk_lp.period, 13)
    direct = desk_V.with_frequency(desk_lattice.rf)(x)
    assert np.allclose(desk_lp(x), direct, atol=1e-13)
    assert np.allclose(desk_lp(x + desk_lp.period), desk_lp(x), atol=1e-12)


def test_pushforward_dimension_mismatch(desk_V):
    lat = fq.build_lattice(fq.RationalFrequency((1,), (3,), 2))
    with pytest.raises(ConfigError):
        pushforward_periodic(desk_V, lat)


def test_lattice_roundtrip(desk_lp):
    q = LatticePotential.from_dict(desk_lp.to_dict())
    assert q.coeffs == desk_lp.coeffs and q.period == desk_lp.period


def test_cosine_bounds():
    q = LatticePotential.cosine(0.01)
    assert q.bounds() == pytest.approx((-0.02, 0.02))
    assert q(0.0) == pytest.approx(0.02)


def test_lame_samples():
    k, T = 0.5, 1.0
    q = lame_potential(k, 2, T)
    s = 2 * ellipk(k * k) / T
    assert q(0.0) == pytest.approx(0.0, abs=1e-12)
    # sn(K) = 1 at x = T/2
    assert q(T / 2) == pytest.approx(6 * (s * k) ** 2, rel=1e-12)


def test_tail_bound_dominates_direct_sum():
    for nu, R in [(1, 3), (2, 5), (3, 4)]:
        direct = sum(fq.shell_count(nu, s) * math.exp(-s) for s in range(R, 400))
        b = tail_bound(1.0, 1.0, nu, R)
        assert direct <= b <= 1.5 * direct + 1e-300


def test_tail_bound_monotone():
    vals = [tail_bound(1.0, 0.7, 2, R) for R in range(1, 12)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_fourier_recover_exact_mode():
    f = fq.Frequency.parse(["(sqrt(5)-1)/2"], b0=2.0)
    T = 200.0
    t = np.linspace(0, T, 40001)
    Q = 2 * 0.3 * np.cos(2 * np.pi * f.vector[0] * t)
    rec = fourier_recover(t, Q, f, (1,), amplitude=0.3, kappa0=1.0)
    assert abs(rec.estimate - 0.3) <= rec.radius
    assert rec.radius < 1e-2


def test_fourier_recover_out_of_band():
    f = fq.Frequency.parse(["(sqrt(5)-1)/2"], b0=2.0)
    t = np.linspace(0, 16.0, 3201)
    with pytest.raises(OutOfBandError):
        fourier_recover(t, np.zeros_like(t), f, (5,))


@given(st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=-5, max_value=5))
def test_lattice_shift_property(t, x):
    q = LatticePotential.from_amplitudes(3, {1: 0.2, 2: 0.05j})
    assert q.shifted(t)(x) == pytest.approx(q(x + t), abs=1e-12)


def test_tail_bound_full_sum():
    e = math.exp(-1.0)
    assert tail_bound(1.0, 1.0, 1, 0) >= (1 + e) / (1 - e)


def test_tail_bound_r20():
    b = tail_bound(1.0, 1.0, 1, 20)
    assert 2 * math.exp(-20) / (1 - math.exp(-1)) <= b <= 1e-7
