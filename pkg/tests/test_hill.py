import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import ellipk

from isotorus import hill
from isotorus.errors import ConfigError
from isotorus.potential import LatticePotential, lame_potential


def test_free_operator_edges():
    q = LatticePotential.constant(0.0)
    full = hill.band_edges(q, 5)
    assert full.ground == pytest.approx(0.0, abs=1e-8)
    for g in full.gaps:
        assert g.closed
        assert g.E_minus == pytest.approx((math.pi * g.n) ** 2, abs=1e-8)
    assert hill.spectrum(q, 5).gaps == []


def test_constant_shift():
    q = LatticePotential.constant(0.7)
    mu = hill.dirichlet_eigenvalues(q, 3)
    assert np.allclose(mu, 0.7 + (math.pi * np.arange(1, 4)) ** 2, atol=1e-8)


def test_mathieu_gaps(mathieu):
    spec = hill.spectrum(mathieu, 6)
    wide = [g for g in spec.gaps if g.width > 1e-6]
    assert [g.n for g in wide] == [1, 2]
    assert wide[0].width == pytest.approx(0.02, rel=0.01)
    # second gap is second order in eps: frozen from the Fourier-matrix oracle
    assert wide[1].width == pytest.approx(5.066e-6, rel=2e-3)


def test_against_fourier_oracle(desk_lp):
    spec = hill.band_edges(desk_lp, 12)
    E0, edges = hill.fourier_band_edges(desk_lp, 12)
    assert spec.ground == pytest.approx(E0, abs=1e-8)
    assert np.allclose(spec.edges(), edges, atol=1e-8)


def test_lame_analytic_edges():
    k = 0.5
    q = lame_potential(k, 2, 1.0)
    s2 = (2 * ellipk(k * k)) ** 2
    r = math.sqrt(1 - k ** 2 + k ** 4)
    spec = hill.spectrum(q, 6)
    assert spec.ground == pytest.approx(s2 * (2 * (1 + k ** 2) - 2 * r), abs=1e-8)
    assert spec.ground == pytest.approx(7.92536, abs=1e-5)
    assert len(spec.gaps) == 2
    g1, g2 = spec.gaps
    assert (g1.E_minus, g1.E_plus) == pytest.approx((s2 * (1 + k ** 2), s2 * (1 + 4 * k ** 2)),
                                                     abs=1e-8)
    assert (g2.E_minus, g2.E_plus) == pytest.approx((s2 * (4 + k ** 2), s2 * (2 * (1 + k ** 2) + 2 * r)),
                                                     abs=1e-8)


def test_wronskian_and_interlacing(desk_lp):
    for lam in [0.3, 2.0, 10.0]:
        assert hill.monodromy(desk_lp, lam).wronskian == pytest.approx(1.0, abs=1e-9)
    # below the spectrum the entries grow like exp(T sqrt(-lam)); check relative to that scale
    m = hill.monodromy(desk_lp, -0.5)
    scale = max(abs(m.y1T * m.dy2T), abs(m.dy1T * m.y2T))
    assert abs(m.wronskian - 1.0) <= 1e-9 * scale
    spec = hill.band_edges(desk_lp, 30)
    assert spec.check_interlacing()
    for g in spec.gaps:
        assert g.E_minus - 1e-9 <= g.mu <= g.E_plus + 1e-9


def test_discriminant_band_signs(mathieu):
    spec = hill.spectrum(mathieu, 2)
    g = spec.gaps[0]
    assert abs(hill.discriminant(mathieu, g.center)) > 2
    assert abs(hill.discriminant(mathieu, g.E_plus + 1.0)) <= 2


def test_n_max_for_energy():
    assert hill.n_max_for_energy(1.0, (math.pi * 3.5) ** 2) == 4


def test_bad_n_max(mathieu):
    with pytest.raises(ConfigError):
        hill.spectrum(mathieu, 0)


def test_json_roundtrip(mathieu):
    spec = hill.spectrum(mathieu, 3)
    back = hill.SpectrumData.from_dict(spec.to_dict())
    assert back.ground == spec.ground and [g.n for g in back.gaps] == [g.n for g in spec.gaps]


def test_label_gaps(desk_lp, desk_lattice):
    spec = hill.label_gaps(hill.spectrum(desk_lp, 40), desk_lattice)
    for g in spec.gaps:
        assert np.dot(g.label, desk_lattice.weights) == g.n


@given(st.floats(min_value=-2.0, max_value=60.0))
def test_wronskian_property(lam):
    q = LatticePotential.from_amplitudes(1, {1: 0.3, 2: 0.1})
    assert hill.monodromy(q, lam).wronskian == pytest.approx(1.0, abs=10 * hill.DEFAULT_TOL)


@given(st.floats(min_value=0.0, max_value=1.0))
def test_translation_invariance(t):
    q = LatticePotential.from_amplitudes(1, {1: 0.3, 2: 0.1j})
    a = hill.band_edges(q, 3)
    b = hill.band_edges(q.shifted(t), 3)
    assert np.allclose(a.edges(), b.edges(), rtol=10 * hill.DEFAULT_TOL, atol=10 * hill.DEFAULT_TOL)


def test_edge_asymptotics_constant(desk_lp):
    spec = hill.spectrum(desk_lp, 60)
    C = hill.edge_asymptotics(spec)
    T = spec.period
    for g in spec.gaps:
        free = (math.pi * g.n / T) ** 2
        assert max(abs(g.E_minus - free), abs(g.E_plus - free)) <= C * T ** 2 / g.n * (1 + 1e-12)
