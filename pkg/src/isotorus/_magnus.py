"""Sixth-order Magnus propagator for -y'' + q y = lam y (numba kernel).

The system Y' = A(x) Y with A = [[0, 1], [q - lam, 0]] is advanced over a
uniform grid using three Gauss-Legendre nodes per step (Blanes, Casas and
Ros).  Both fundamental solutions are carried along, each with its own
log-scale so that nothing overflows below the spectrum, together with their
Pruefer angles.
"""
import numba
import numpy as np

GAUSS3 = np.array([0.5 - np.sqrt(15.0) / 10, 0.5, 0.5 + np.sqrt(15.0) / 10])
_BIG = 1e100


@numba.njit(cache=True, inline="always")
def _comm(a1, b1, c1, a2, b2, c2):
    # commutator of traceless [[a, b], [c, -a]] matrices
    return (b1 * c2 - c1 * b2, 2.0 * (a1 * b2 - b1 * a2), 2.0 * (c1 * a2 - a1 * c2))


@numba.njit(cache=True, nogil=True)
def propagate(Q, h, lams, angles=3):
    """Return rows (y1, p1, y2, p2, theta2, s1, s2, theta1) at the grid end.

    Q[k, i] is the potential at node i of step k; the true solution values
    are y1*exp(s1), p1*exp(s1), y2*exp(s2), p2*exp(s2).  theta1 and theta2
    are the continuous Pruefer angles atan2(y, y') of y1 and y2; bit 1 of
    ``angles`` requests theta2 and bit 2 requests theta1 (skipped otherwise).
    """
    want2 = (angles & 1) != 0
    want1 = (angles & 2) != 0
    nb = lams.shape[0]
    ns = Q.shape[0]
    out = np.empty((nb, 8))
    r15 = np.sqrt(15.0)
    for bi in range(nb):
        lam = lams[bi]
        y1 = 1.0
        p1 = 0.0
        y2 = 0.0
        p2 = 1.0
        th = 0.0
        th1 = 0.5 * np.pi
        s1 = 0.0
        s2 = 0.0
        for k in range(ns):
            g1 = Q[k, 0] - lam
            g2 = Q[k, 1] - lam
            g3 = Q[k, 2] - lam
            a1b = h
            a1c = h * g2
            a2c = r15 * h / 3.0 * (g3 - g1)
            a3c = 10.0 * h / 3.0 * (g3 - 2.0 * g2 + g1)
            C1a, C1b, C1c = _comm(0.0, a1b, a1c, 0.0, 0.0, a2c)
            ta, tb, tc = _comm(0.0, a1b, a1c, C1a, C1b, 2.0 * a3c + C1c)
            Xa = C1a
            Xb = -20.0 * a1b + C1b
            Xc = -20.0 * a1c - a3c + C1c
            ua, ub, uc = _comm(Xa, Xb, Xc, -ta / 60.0, -tb / 60.0, a2c - tc / 60.0)
            oa = ua / 240.0
            ob = a1b + ub / 240.0
            oc = a1c + a3c / 12.0 + uc / 240.0
            w2 = oa * oa + ob * oc
            if w2 > 0.0:
                w = np.sqrt(w2)
                c = np.cosh(w)
                sn = np.sinh(w) / w
            elif w2 < 0.0:
                w = np.sqrt(-w2)
                c = np.cos(w)
                sn = np.sin(w) / w
            else:
                c = 1.0
                sn = 1.0
            m11 = c + sn * oa
            m12 = sn * ob
            m21 = sn * oc
            m22 = c - sn * oa
            ny1 = m11 * y1 + m12 * p1
            np1 = m21 * y1 + m22 * p1
            ny2 = m11 * y2 + m12 * p2
            np2 = m21 * y2 + m22 * p2
            if want2:
                th += np.arctan2(p2 * ny2 - y2 * np2, p2 * np2 + y2 * ny2)
            if want1:
                th1 += np.arctan2(p1 * ny1 - y1 * np1, p1 * np1 + y1 * ny1)
            y1 = ny1
            p1 = np1
            y2 = ny2
            p2 = np2
            n1 = abs(y1) + abs(p1)
            if n1 > _BIG:
                y1 /= n1
                p1 /= n1
                s1 += np.log(n1)
            n2 = abs(y2) + abs(p2)
            if n2 > _BIG:
                y2 /= n2
                p2 /= n2
                s2 += np.log(n2)
        out[bi, 0] = y1
        out[bi, 1] = p1
        out[bi, 2] = y2
        out[bi, 3] = p2
        out[bi, 4] = th
        out[bi, 5] = s1
        out[bi, 6] = s2
        out[bi, 7] = th1
    return out


def node_grid(T, h):
    """Uniform step count and node abscissae for period T and target step h."""
    ns = max(int(np.ceil(T / h)), 1)
    h = T / ns
    x0 = np.arange(ns) * h
    return ns, h, x0[:, None] + h * GAUSS3[None, :]
