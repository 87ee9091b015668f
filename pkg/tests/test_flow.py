import numpy as np
import pytest
from hypothesis import given, strategies as st

from isotorus import flow as fl
from isotorus import hill
from isotorus.errors import ConfigError, InvalidFrameError
from isotorus.potential import LatticePotential, lame_potential


@pytest.fixture(scope="module")
def lame():
    q = lame_potential(0.5, 2, 1.0)
    spec = hill.spectrum(q, 6)
    gf = fl.GapFrame.from_spectrum(spec)
    return q, spec, gf, fl.dirichlet_to_torus(q, gf)


@pytest.fixture(scope="module")
def mathieu_frame(mathieu):
    spec = hill.spectrum(mathieu, 6)
    gf = fl.GapFrame.from_spectrum(spec, N=1)
    return gf, fl.dirichlet_to_torus(mathieu, gf)


def test_frame_order_and_omitted(mathieu_frame, mathieu):
    gf, _ = mathieu_frame
    assert gf.N == 1 and gf.n == (1,)
    # the dropped second gap is counted in the omitted budget
    assert gf.omitted_width == pytest.approx(5.066e-6, rel=2e-3)
    assert gf.xi[0] == pytest.approx(np.sqrt(gf.gamma[0]))


def test_frame_validation():
    with pytest.raises(InvalidFrameError):
        fl.GapFrame(0.0, np.array([1.0]), np.array([1.0]), (1,))
    with pytest.raises(InvalidFrameError):
        fl.GapFrame(0.0, np.array([1.0, 1.5]), np.array([2.0, 3.0]), (1, 2))
    with pytest.raises(InvalidFrameError):
        fl.GapFrame(5.0, np.array([1.0]), np.array([2.0]), (1,))


def test_frame_roundtrip(lame):
    gf = lame[2]
    back = fl.GapFrame.from_dict(gf.to_dict())
    assert np.array_equal(back.E_minus, gf.E_minus) and back.n == gf.n


def test_mu_of_theta_edges(lame):
    gf = lame[2]
    mu, sig = fl.mu_of_theta(gf, np.array([0.0, np.pi]))
    assert mu == pytest.approx([gf.E_minus[0], gf.E_plus[1]])
    assert list(sig) == [0, 0]


def test_single_gap_matches_translation(mathieu_frame, mathieu):
    gf, s0 = mathieu_frame
    ts = np.array([0.0, 1 / 7, 1 / 3, 1 / 2])
    tr = fl.integrate_flow(gf, s0, (0.0, 0.5), t_eval=ts)
    for t, mu in zip(tr.t, tr.mu[:, 0]):
        assert mu == pytest.approx(hill.dirichlet_eigenvalues(mathieu.shifted(t), 1)[0], abs=1e-8)


def test_one_revolution_per_period(mathieu_frame):
    gf, s0 = mathieu_frame
    tr = fl.integrate_flow(gf, s0, (0.0, 1.0), t_eval=np.array([0.0, 1.0]))
    assert (tr.theta[-1, 0] - tr.theta[0, 0]) / (2 * np.pi) == pytest.approx(1.0, abs=1e-4)


def test_lame_trace_formula(lame):
    q, _, gf, s0 = lame
    x = np.linspace(0, 1, 101)
    tr = fl.integrate_flow(gf, s0, (0.0, 1.0), t_eval=x)
    assert np.abs(fl.trace_reconstruct(gf, tr) - q(x)).max() < 1e-7


def test_lame_dirichlet_tracking(lame):
    q, _, gf, s0 = lame
    tr = fl.integrate_flow(gf, s0, (0.0, 0.5), t_eval=np.array([0.0, 0.13, 0.5]))
    for i, t in enumerate(tr.t):
        direct = hill.dirichlet_eigenvalues(q.shifted(t), 2)
        assert np.allclose(np.sort(tr.mu[i]), direct, atol=1e-7)


def test_factor_check_bounds(lame):
    gf, s0 = lame[2], lame[3]
    dev, elem, lemma, applicable = fl.factor_check(gf, s0)
    assert np.all(dev <= elem + 1e-12)


def test_field_outside_frame_raises(lame):
    gf = lame[2]
    with pytest.raises(ConfigError):
        fl.theta_field(gf, np.zeros(3), N_cut=3)


def test_torus_state_json():
    s = fl.TorusState(np.array([0.5, 7.0]))
    back = fl.TorusState.from_json(s.to_json())
    assert np.array_equal(back.theta, s.theta)
    assert s.theta[1] == pytest.approx(7.0 - 2 * np.pi)


def test_isospectral_move(lame):
    q, spec, gf, s0 = lame
    img = fl.isospectral_map(gf, s0.moved(0, np.pi))
    spec2 = hill.spectrum(img.potential, 6)
    assert len(spec2.gaps) == 2
    assert np.allclose(spec2.edges(), spec.edges(), atol=1e-7)
    assert spec2.ground == pytest.approx(spec.ground, abs=1e-7)
    # the moved point is a different potential
    assert np.abs(img.Q - q(img.t)).max() > 1.0


@given(st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi), st.floats(0.01, 0.6))
def test_confinement_property(a, b, t):
    q = lame_potential(0.5, 2, 1.0)
    gf = fl.GapFrame.from_spectrum(hill.spectrum(q, 6))
    tr = fl.integrate_flow(gf, fl.TorusState(np.array([a, b])), (0.0, t), tol=1e-9)
    assert np.all(tr.mu >= gf.E_minus - 1e-12) and np.all(tr.mu <= gf.E_plus + 1e-12)


@given(st.floats(0, 2 * np.pi), st.floats(0.0, 0.4), st.floats(0.0, 0.4))
def test_semigroup_property(a, t1, t2):
    q = LatticePotential.from_amplitudes(1, {1: 0.05, 2: 0.02})
    gf = fl.GapFrame.from_spectrum(hill.spectrum(q, 4), gap_min=1e-3)
    s = fl.TorusState(np.full(gf.N, a))
    one = fl.flow_map(gf, s, t1 + t2, tol=1e-11)
    two = fl.flow_map(gf, fl.flow_map(gf, s, t1, tol=1e-11), t2, tol=1e-11)
    assert fl.torus_distance(gf, one, two) < 1e-8
