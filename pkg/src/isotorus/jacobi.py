"""Cyclic Jacobi eigensolver for Hermitian matrices.

Rotations follow the round-robin (Brent-Luk) ordering, in which each round
pairs all indices into disjoint (p, q) couples.  Sweeps repeat until the
off-diagonal Frobenius norm falls below ``tol`` times the matrix norm.  The
result is bit-reproducible: no BLAS, no threading, fixed rotation order.
"""
import numba
import numpy as np

from .errors import NumericalError


def _rounds(n):
    """Round-robin pairings of range(n) (n even), shape (n-1, n//2, 2)."""
    players = list(range(n))
    out = np.empty((n - 1, n // 2, 2), dtype=np.int64)
    for r in range(n - 1):
        p = np.array(players[: n // 2])
        q = np.array(players[n // 2:][::-1])
        out[r, :, 0] = np.minimum(p, q)
        out[r, :, 1] = np.maximum(p, q)
        players = [players[0]] + [players[-1]] + players[1:-1]
    return out


@numba.njit(cache=True)
def _off(A):
    n = A.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                s += A[i, j].real ** 2 + A[i, j].imag ** 2
    return np.sqrt(s)


@numba.njit(cache=True)
def _sweeps(A, V, rounds, tol, max_sweeps, vectors):
    n = A.shape[0]
    scale = np.sqrt(np.sum(A.real ** 2 + A.imag ** 2))
    for sweep in range(max_sweeps):
        if _off(A) <= tol * scale:
            return sweep
        for r in range(rounds.shape[0]):
            for k in range(rounds.shape[1]):
                p = rounds[r, k, 0]
                q = rounds[r, k, 1]
                apq = A[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                if sweep > 3 and (abs(A[p, p].real) + 1e3 * mag == abs(A[p, p].real)
                                  and abs(A[q, q].real) + 1e3 * mag == abs(A[q, q].real)):
                    # negligible against both diagonal entries
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    continue
                ph = apq / mag
                zeta = (A[q, q].real - A[p, p].real) / (2.0 * mag)
                if zeta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # U on (p, q): [[c, s], [-conj(ph) s, conj(ph) c]]; rows of
                # U^H A are updated in place, columns follow by Hermiticity
                cu = np.conj(ph) * s
                cv = np.conj(ph) * c
                app = A[p, p].real
                aqq = A[q, q].real
                for j in range(n):
                    ap = A[p, j]
                    aq = A[q, j]
                    A[p, j] = c * ap - ph * s * aq
                    A[q, j] = s * ap + ph * c * aq
                for j in range(n):
                    A[j, p] = np.conj(A[p, j])
                    A[j, q] = np.conj(A[q, j])
                A[p, p] = app - t * mag
                A[q, q] = aqq + t * mag
                A[p, q] = 0.0
                A[q, p] = 0.0
                if vectors:
                    # W holds eigenvectors as rows
                    for i in range(n):
                        vp = V[p, i]
                        vq = V[q, i]
                        V[p, i] = vp * c - vq * cu
                        V[q, i] = vp * s + vq * cv
    if _off(A) <= tol * scale:
        return max_sweeps
    return -1


def eigh(A, tol=1e-15, max_sweeps=60, vectors=True):
    """Eigenvalues (ascending) and eigenvectors (columns) of Hermitian ``A``."""
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    if A.ndim != 2 or A.shape != (n, n):
        raise ValueError("square matrix expected")
    if not np.allclose(A, A.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max(initial=0.0))):
        raise ValueError("matrix is not Hermitian")
    A = 0.5 * (A + A.conj().T)
    m = n + (n % 2)
    if m != n:
        # an uncoupled padding index is never rotated and is dropped at the end
        B = np.zeros((m, m), dtype=complex)
        B[:n, :n] = A
        A = B
    V = np.eye(m, dtype=complex)
    if m > 0 and np.any(A):
        if _sweeps(A, V, _rounds(m), tol, max_sweeps, vectors) < 0:
            raise NumericalError("Jacobi sweeps did not converge")
    w = A.diagonal().real[:n]
    order = np.argsort(w, kind="stable")
    if vectors:
        return w[order], V[:n, :n].T[:, order]
    return w[order]
