import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from isotorus import dual, hill
from isotorus.errors import AmbiguityError, ConfigError, ResolutionError
from isotorus.jacobi import eigh
from isotorus.potential import LatticePotential


def _herm(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return A + A.conj().T


@pytest.mark.parametrize("n,seed", [(1, 0), (2, 1), (7, 2), (40, 3)])
def test_jacobi_against_numpy(n, seed):
    A = _herm(n, seed)
    w, V = eigh(A)
    assert np.allclose(w, np.linalg.eigvalsh(A), atol=1e-12 * np.abs(A).max())
    assert np.allclose(V.conj().T @ V, np.eye(n), atol=1e-12)
    assert np.allclose(A @ V, V * w, atol=1e-11 * np.abs(A).max())


def test_jacobi_rejects_non_hermitian():
    with pytest.raises(ValueError):
        eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_jacobi_deterministic():
    A = _herm(12, 9)
    assert np.array_equal(eigh(A)[0], eigh(A.copy())[0])


@given(arrays(np.float64, (5, 5), elements=st.floats(-10, 10)))
def test_jacobi_property(M):
    A = M + M.T
    w = eigh(A, vectors=False)
    assert np.allclose(w, np.linalg.eigvalsh(A), atol=1e-10 * max(1.0, np.abs(A).max()))


def test_dual_matrix_hermitian(desk_lp):
    dm = dual.dual_matrix(desk_lp, 0.0013, 6)
    assert np.allclose(dm.H, dm.H.conj().T)
    assert dm.dim == len(desk_lp.lattice.coset_table(6)[0])
    with pytest.raises(ResolutionError):
        dm.index(10 ** 6)


def test_mathieu_dual_block(mathieu):
    lo, hi = dual.gap_edges_dual(mathieu, 1, R=10)
    spec = hill.spectrum(mathieu, 2)
    g = spec.gap(1)
    assert hi - lo == pytest.approx(0.02, rel=0.01)
    assert abs(lo - g.E_minus) < 1e-8 and abs(hi - g.E_plus) < 1e-8


def test_edge_limits_agree(mathieu):
    lo, hi = dual.gap_edges_dual(mathieu, 1, R=10)
    for pair in dual.edge_limits(mathieu, 1, R=10):
        assert pair == pytest.approx((lo, hi), abs=1e-8)


def test_branch_solves_ode(mathieu):
    b = dual.floquet_branch(dual.dual_matrix(mathieu, 0.2, 10))
    x = np.linspace(0, 1, 40)
    p, pp = b.psi_derivatives(x)
    assert np.abs(-pp + mathieu(x) * p - b.E * p).max() < 1e-10
    assert b.phi[0] == pytest.approx(1.0)


def test_branch_near_resonance_rejected(mathieu):
    with pytest.raises(ConfigError):
        dual.floquet_branch(dual.dual_matrix(mathieu, -0.5, 10))


def test_degenerate_branch_is_ambiguous():
    dm = dual.DualMatrix(0.1, 1, np.array([0, 5]), np.array([0, 1]), np.eye(2, dtype=complex), 1.0)
    with pytest.raises(AmbiguityError):
        dual.floquet_branch(dm)


@given(st.floats(min_value=0.01, max_value=0.49))
def test_branch_even_in_k(k):
    q = LatticePotential.from_amplitudes(1, {1: 0.05, 2: 0.02j})
    a = dual.floquet_branch(dual.dual_matrix(q, k, 8))
    b = dual.floquet_branch(dual.dual_matrix(q, -k, 8))
    assert a.E == pytest.approx(b.E, abs=1e-10)


def test_crosscheck_mathieu(mathieu):
    cc = dual.crosscheck_hill(mathieu, 4, R=10)
    assert cc.passed and len(cc.matched) == 2
