"""Hill spectra: fundamental solutions, discriminant, band edges, Dirichlet
eigenvalues.

A potential is anything with a ``period`` attribute and a vectorized
``__call__``; ``LatticePotential`` additionally provides exact bounds and a
bandwidth which sharpen the brackets and the step selection.

Strategy.  The Dirichlet eigenvalue mu_n is the root of theta(T, lam) = n pi
where theta is the Pruefer angle of y2 (continuous and increasing in lam).
By Sturm comparison mu_n lies in [min q + (n pi/T)^2, max q + (n pi/T)^2].
Since y2(T, mu_n) = 0 one has Delta(mu_n) = y1 + 1/y1, so
(-1)^n Delta(mu_n) >= 2, which brackets the edges
E_n^- in [mu_{n-1}, mu_n] and E_n^+ in [mu_n, mu_{n+1}].
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import _magnus
from .errors import BracketError, ConfigError, StiffnessError

DEFAULT_TOL = 1e-10


# ---------------------------------------------------------------------------
# records

@dataclass
class MonodromyData:
    lam: float
    y1T: float
    dy1T: float
    y2T: float
    dy2T: float

    @property
    def delta(self):
        return self.y1T + self.dy2T

    @property
    def wronskian(self):
        return self.y1T * self.dy2T - self.dy1T * self.y2T


@dataclass
class Gap:
    n: int
    E_minus: float
    E_plus: float
    provenance: str = "hill"
    mu: float | None = None
    ell: int | None = None
    label: tuple | None = None
    qnorm: int | None = None
    closed: bool = False

    @property
    def width(self):
        return self.E_plus - self.E_minus

    @property
    def center(self):
        return 0.5 * (self.E_plus + self.E_minus)


@dataclass
class SpectrumData:
    ground: float
    gaps: list
    period: float
    provenance: str = "hill"
    meta: dict = field(default_factory=dict)

    def open_gaps(self):
        return [g for g in self.gaps if not g.closed]

    def gap(self, n):
        for g in self.gaps:
            if g.n == n:
                return g
        raise KeyError(n)

    def edges(self):
        g = sorted(self.gaps, key=lambda g: g.n)
        return np.array([[x.E_minus, x.E_plus] for x in g]).reshape(-1, 2)

    def check_interlacing(self, strict=True):
        """E0 < E1- <= E1+ < E2- <= ... for consecutively indexed gaps."""
        g = sorted(self.gaps, key=lambda g: g.n)
        prev = self.ground
        prev_n = 0
        for x in g:
            if x.E_minus > x.E_plus:
                return False
            if x.n == prev_n + 1:
                if (x.E_minus <= prev) if strict else (x.E_minus < prev):
                    return False
            elif x.E_minus <= self.ground:
                return False
            prev, prev_n = x.E_plus, x.n
        return True

    def bands(self, window=None):
        """Spectrum as closed intervals (from the open gaps), clipped to a window."""
        lo = self.ground
        out = []
        for g in sorted(self.open_gaps(), key=lambda g: g.E_minus):
            out.append((lo, g.E_minus))
            lo = g.E_plus
        out.append((lo, math.inf))
        if window is not None:
            a, b = window
            out = [(max(x, a), min(y, b)) for x, y in out if y >= a and x <= b]
        return out

    def to_csv(self, path=None, open_only=False):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "E_minus", "E_plus", "width"])
        w.writerow([0, repr(self.ground), repr(self.ground), repr(0.0)])
        for g in sorted(self.open_gaps() if open_only else self.gaps, key=lambda g: g.n):
            w.writerow([g.n, repr(g.E_minus), repr(g.E_plus), repr(g.width)])
        if path is not None:
            with open(path, "w") as fh:
                fh.write(buf.getvalue())
        return buf.getvalue()

    def to_dict(self):
        d = {"ground": self.ground, "period": self.period,
             "provenance": self.provenance, "meta": self.meta,
             "gaps": [asdict(g) for g in self.gaps]}
        for g in d["gaps"]:
            if g["label"] is not None:
                g["label"] = list(g["label"])
        return d

    @classmethod
    def from_dict(cls, d):
        gaps = []
        for g in d["gaps"]:
            g = dict(g)
            if g.get("label") is not None:
                g["label"] = tuple(g["label"])
            gaps.append(Gap(**g))
        return cls(d["ground"], gaps, d["period"], d.get("provenance", "hill"),
                   d.get("meta", {}))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


# ---------------------------------------------------------------------------
# the propagator

def _bounds(q):
    if hasattr(q, "bounds"):
        return q.bounds()
    x = np.linspace(0, q.period, 4097)
    v = np.asarray(q(x))
    pad = 0.05 * (v.max() - v.min()) + 1e-12
    return float(v.min() - pad), float(v.max() + pad)


class HillSolver:
    """Batched monodromy evaluation for one potential.

    The step is chosen once for energies up to ``lam_max``: a phase budget
    of one radian per step and a step-doubling check of all monodromy
    entries at probe energies against ``tol``.
    """

    def __init__(self, q, tol=DEFAULT_TOL, lam_max=None, h=None):
        self.q = q
        self.T = float(q.period)
        self.tol = float(tol)
        self.lower, self.upper = _bounds(q)
        if lam_max is None:
            lam_max = self.upper + (4 * math.pi / self.T) ** 2
        self.lam_max = float(lam_max)
        if h is None:
            h = self._choose_step()
        self._set_step(h)

    def _set_step(self, h):
        self.ns, self.h, nodes = _magnus.node_grid(self.T, h)
        self.Q = np.ascontiguousarray(np.asarray(self.q(nodes), dtype=float))

    def _choose_step(self):
        span = max(self.lam_max - self.lower, 1.0)
        h = min(1.0 / math.sqrt(span), 0.5)
        bw = getattr(self.q, "bandwidth", None)
        if bw:
            h = min(h, 0.25 / bw)
        probes = np.array([self.lower, 0.5 * (self.lower + self.lam_max), self.lam_max])
        for _ in range(12):
            self._set_step(h)
            d1 = self._entries(probes)
            self._set_step(h / 2)
            d2 = self._entries(probes)
            ok = np.all(np.isfinite(d1) & np.isfinite(d2), axis=1)
            scale = np.maximum(1.0, np.abs(d2[ok]).max(axis=1, initial=0.0))[:, None]
            err = (np.abs(d1 - d2)[ok] / scale).ravel()
            if err.size == 0 or err.max() * 64 / 63 <= self.tol:
                return h
            h /= 2
        return h

    def _entries(self, lams):
        """All four monodromy entries (rows), for the step-doubling check."""
        r = self.propagate(lams, 0)
        with np.errstate(over="ignore", invalid="ignore"):
            e1, e2 = np.exp(r[:, 5]), np.exp(r[:, 6])
            return np.stack([r[:, 0] * e1, r[:, 1] * e1, r[:, 2] * e2, r[:, 3] * e2], axis=1)

    def propagate(self, lams, angles=3):
        lams = np.ascontiguousarray(np.atleast_1d(np.asarray(lams, dtype=float)))
        return _magnus.propagate(self.Q, self.h, lams, angles)

    @staticmethod
    def _delta(raw):
        with np.errstate(over="ignore", invalid="ignore"):
            a = raw[:, 0] * np.exp(raw[:, 5])
            b = raw[:, 3] * np.exp(raw[:, 6])
            d = a + b
        # both terms carry the sign of a growing solution below the spectrum
        bad = ~np.isfinite(d)
        if np.any(bad):
            d[bad] = np.where(np.sign(raw[bad, 0]) + np.sign(raw[bad, 3]) >= 0, np.inf, -np.inf)
        return d

    def discriminant(self, lams):
        return self._delta(self.propagate(lams, 0))

    def theta(self, lams):
        return self.propagate(lams, 1)[:, 4]

    def monodromy(self, lam):
        r = self.propagate([lam])[0]
        with np.errstate(over="ignore"):
            e1, e2 = math.exp(min(r[5], 700)), math.exp(min(r[6], 700))
        return MonodromyData(float(lam), r[0] * e1, r[1] * e1, r[2] * e2, r[3] * e2)


def _rk_monodromy(q, lam, tol):
    T = float(q.period)

    def rhs(x, y):
        v = float(q(x)) - lam
        return [y[1], v * y[0], y[3], v * y[2]]

    sol = solve_ivp(rhs, (0.0, T), [1.0, 0.0, 0.0, 1.0], method="DOP853",
                    rtol=tol, atol=tol * 1e-3)
    if not sol.success:
        raise StiffnessError(f"integration failed at lambda={lam}: {sol.message}", lam)
    y = sol.y[:, -1]
    return MonodromyData(float(lam), y[0], y[1], y[2], y[3])


def monodromy(q, lam, tol=DEFAULT_TOL, method="magnus"):
    """Fundamental solutions at T.  ``method='rk'`` uses an adaptive DOP853 route."""
    if method == "rk":
        return _rk_monodromy(q, float(lam), tol)
    if method != "magnus":
        raise ConfigError(f"unknown method {method!r}")
    lo, hi = _bounds(q)
    return HillSolver(q, tol, lam_max=max(float(lam), hi + 1.0)).monodromy(lam)


def discriminant(q, lam, tol=DEFAULT_TOL, method="magnus"):
    lam = np.asarray(lam, dtype=float)
    if method == "rk":
        out = np.array([_rk_monodromy(q, float(x), tol).delta for x in lam.ravel()])
        return out.reshape(lam.shape)[()]
    lo, hi = _bounds(q)
    s = HillSolver(q, tol, lam_max=max(float(np.max(lam)), hi + 1.0))
    return s.discriminant(lam.ravel()).reshape(lam.shape)[()]


def discriminant_scan_csv(q, lams, tol=DEFAULT_TOL, path=None):
    d = np.atleast_1d(discriminant(q, lams, tol))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "delta"])
    for a, b in zip(np.atleast_1d(lams), d):
        w.writerow([repr(float(a)), repr(float(b))])
    if path is not None:
        with open(path, "w") as fh:
            fh.write(buf.getvalue())
    return buf.getvalue()


# ---------------------------------------------------------------------------
# bracketed root finding

def _xtol(x):
    return 2e-14 * np.maximum(1.0, np.abs(x))


# ---------------------------------------------------------------------------
# spectra

def _solver_for(q, n_top, tol, solver):
    if solver is not None:
        return solver
    lo, hi = _bounds(q)
    T = float(q.period)
    lam_max = hi + ((n_top + 1.5) * math.pi / T) ** 2 + 1.0
    return HillSolver(q, tol, lam_max=lam_max)


def _angle_roots(s, ns, kind):
    """Dirichlet (kind='D') or Neumann (kind='N') eigenvalues for indices ns.

    Roots of theta2(T) = n pi, respectively theta1(T) = pi/2 + n pi, inside
    the comparison brackets [min q + (n pi/T)^2, max q + (n pi/T)^2].
    """
    ns = np.asarray(ns, dtype=np.int64)
    col, off, bit = (4, 0.0, 1) if kind == "D" else (7, 0.5 * math.pi, 2)
    k2 = (ns * math.pi / s.T) ** 2
    pad = 1e-9 * np.maximum(1.0, k2)
    lo = s.lower + k2 - pad
    hi = s.upper + k2 + pad
    target = ns * math.pi + off

    def fun(lam, idx):
        return s.propagate(lam, bit)[:, col] - target[idx]

    allidx = np.arange(ns.size)
    glo = fun(lo, allidx)
    ghi = fun(hi, allidx)
    bad = (glo > 0) | (ghi < 0)
    if np.any(bad):
        raise BracketError(f"{'Dirichlet' if kind == 'D' else 'Neumann'} bracket failure",
                           {"n": ns[bad].tolist(), "lo": lo[bad].tolist(),
                            "hi": hi[bad].tolist()})
    return _solve_tracked(fun, lo, hi, glo, ghi)


def _solve_tracked(fun, lo, hi, flo, fhi):
    """Vectorized Illinois (modified regula falsi) on sign-changing brackets.

    ``fun(x, idx)`` evaluates the entries ``idx`` at ``x``; every fourth step
    falls back to bisection unless the bracket has halved.
    """
    n = lo.size
    out = np.empty(n)
    act_all = np.arange(n)
    lo, hi, flo, fhi = lo.copy(), hi.copy(), flo.copy(), fhi.copy()
    x = np.where(flo == 0, lo, hi)
    done = (flo == 0) | (fhi == 0)
    side = np.zeros(n, dtype=int)
    width0 = hi - lo
    for it in range(200):
        act = ~done & (hi - lo > _xtol(0.5 * (hi + lo)))
        if not np.any(act):
            break
        idx = act_all[act]
        a, b, fa, fb = lo[idx], hi[idx], flo[idx], fhi[idx]
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            xn = b - fb * (b - a) / (fb - fa)
        bisect = ~np.isfinite(xn) | (xn <= a) | (xn >= b)
        if it % 4 == 3:
            bisect |= (b - a) > 0.5 * width0[idx]
        xn = np.where(bisect, 0.5 * (a + b), xn)
        fx = fun(xn, idx)
        same_hi = np.sign(fx) == np.sign(fb)
        sd = side[idx]
        new_hi = np.where(same_hi, xn, b)
        new_lo = np.where(same_hi, a, xn)
        new_fhi = np.where(same_hi, fx, fb)
        new_flo = np.where(same_hi, fa, fx)
        new_flo = np.where(same_hi & (sd == 1), new_flo / 2, new_flo)
        new_fhi = np.where(~same_hi & (sd == -1), new_fhi / 2, new_fhi)
        side[idx] = np.where(same_hi, 1, -1)
        if it % 4 == 3:
            width0[idx] = new_hi - new_lo
        lo[idx], hi[idx], flo[idx], fhi[idx] = new_lo, new_hi, new_flo, new_fhi
        x[idx] = xn
        done[idx] |= fx == 0
    out[:] = np.where(done, x, 0.5 * (lo + hi))
    return out


def dirichlet_eigenvalues(q, n_max, tol=DEFAULT_TOL, solver=None, indices=None):
    """mu_1 < mu_2 < ... < mu_{n_max} (or only the requested indices)."""
    if n_max < 1:
        raise ConfigError("n_max must be >= 1")
    ns = np.arange(1, n_max + 1) if indices is None else np.asarray(sorted(indices))
    s = _solver_for(q, int(ns.max()), tol, solver)
    return _angle_roots(s, ns, "D")


def neumann_eigenvalues(q, n_max, tol=DEFAULT_TOL, solver=None, indices=None):
    """Eigenvalues with y'(0) = y'(T) = 0, indices 1..n_max."""
    ns = np.arange(1, n_max + 1) if indices is None else np.asarray(sorted(indices))
    s = _solver_for(q, int(ns.max()), tol, solver)
    return _angle_roots(s, ns, "N")


def _default_gap_tol(E):
    return 1e-8 * max(1.0, abs(E))


def band_edges(q, n_max, tol=DEFAULT_TOL, gap_tol=None, indices=None, solver=None):
    """Ground energy and the edge pairs (E_n^-, E_n^+) for n <= n_max.

    Both the Dirichlet point mu_n and the Neumann point nu_n lie in the
    closure of gap n and satisfy (-1)^n Delta >= 2, so the edges are
    bracketed by E_n^- in [max(mu,nu)_{n-1}, min(mu,nu)_n] and
    E_n^+ in [max(mu,nu)_n, min(mu,nu)_{n+1}].  If mu_n and nu_n coincide
    with |Delta| = 2 there, the gap is closed at that point.  ``indices``
    restricts the work to a subset of gap numbers.  Gaps narrower than
    ``gap_tol`` (default 1e-8 max(1,|E|)) are flagged closed.
    """
    if n_max < 1:
        raise ConfigError("n_max must be >= 1")
    ns = (np.arange(1, n_max + 1) if indices is None
          else np.array(sorted(set(int(i) for i in indices)), dtype=np.int64))
    if ns.size and ns.min() < 1:
        raise ConfigError("gap indices start at 1")
    need = sorted({1} | set(ns.tolist()) | set((ns + 1).tolist())
                  | set((ns[ns > 1] - 1).tolist()))
    s = _solver_for(q, max(need), tol, solver)
    need = np.array(need, dtype=np.int64)
    mu = dict(zip(need.tolist(), _angle_roots(s, need, "D")))
    nu = dict(zip(need.tolist(), _angle_roots(s, need, "N")))
    lo_pt = {n: min(mu[n], nu[n]) for n in mu}
    hi_pt = {n: max(mu[n], nu[n]) for n in mu}

    # ground state: Delta - 2 changes sign on [min q - 1, min(mu_1, nu_1)]
    lo0 = np.array([s.lower - 1.0])
    hi0 = np.array([lo_pt[1]])
    f0 = lambda lam, idx: s.discriminant(lam) - 2.0  # noqa: E731
    flo, fhi = f0(lo0, None), f0(hi0, None)
    if not (flo[0] > 0 and fhi[0] < 0):
        raise BracketError("ground-state bracket failure",
                           {"lambda": [lo0[0], hi0[0]], "delta": [flo[0] + 2, fhi[0] + 2]})
    E0 = float(_solve_tracked(f0, lo0, hi0, flo, fhi)[0])

    nl = ns.tolist()
    sgn = np.where(ns % 2 == 0, 1.0, -1.0)
    a_in = np.array([lo_pt[n] for n in nl])
    b_in = np.array([hi_pt[n] for n in nl])
    left = np.array([hi_pt[n - 1] if n > 1 else E0 for n in nl])
    right = np.array([lo_pt[n + 1] for n in nl])
    lo = np.concatenate([left, b_in])
    hi = np.concatenate([a_in, right])
    sgg = np.concatenate([sgn, sgn])
    fun = lambda lam, idx: sgg[idx] * s.discriminant(lam) - 2.0  # noqa: E731
    allidx = np.arange(lo.size)
    flo = fun(lo, allidx)
    fhi = fun(hi, allidx)
    k = ns.size
    f_in = np.concatenate([fhi[:k], flo[k:]])
    # outer points sit in neighbouring gap closures where f <= -4
    if np.any(np.concatenate([flo[:k], fhi[k:]]) > -1.0):
        raise BracketError("edge bracket failure", {"n": nl})
    dtol = 100 * max(tol, 1e-14)
    closed_pt = (np.abs(b_in - a_in) <= _xtol(a_in) * 1e3) & (np.maximum(f_in[:k], f_in[k:]) <= dtol)
    # inner points are inside the gap: f >= 0 up to discriminant accuracy
    fhi[:k] = np.maximum(fhi[:k], 0.0)
    flo[k:] = np.maximum(flo[k:], 0.0)
    root = _solve_tracked(fun, lo, hi, flo, fhi)
    Em, Ep = root[:k], root[k:]

    gaps = []
    for i, n in enumerate(nl):
        gt = _default_gap_tol(a_in[i]) if gap_tol is None else gap_tol
        em, ep = float(Em[i]), float(Ep[i])
        if closed_pt[i]:
            em = ep = float(0.5 * (a_in[i] + b_in[i]))
        closed = bool(closed_pt[i] or (ep - em) < gt)
        gaps.append(Gap(int(n), em, ep, "hill", mu=float(mu[n]), closed=closed))
    return SpectrumData(E0, gaps, s.T, "hill",
                        {"tol": tol, "step": s.h, "steps": s.ns, "n_max": int(n_max)})


def spectrum(q, n_max, tol=DEFAULT_TOL, gap_tol=None, indices=None, solver=None):
    """Ground energy and the open gaps only."""
    full = band_edges(q, n_max, tol, gap_tol, indices, solver)
    meta = dict(full.meta, closed_width=float(sum(g.width for g in full.gaps if g.closed)))
    return SpectrumData(full.ground, full.open_gaps(), full.period, "hill", meta)


def n_max_for_energy(T, E, lower=0.0):
    """Largest gap index whose edges can lie below energy E."""
    return max(int(math.floor(T * math.sqrt(max(E - lower, 0.0)) / math.pi)) + 1, 1)


# ---------------------------------------------------------------------------
# independent oracle: truncated Fourier matrices

def fourier_matrix(lp, N, theta):
    """Hermitian matrix of the (anti)periodic problem on 2N+1 modes."""
    T = lp.period
    j = np.arange(-N, N + 1)
    H = np.zeros((j.size, j.size), dtype=complex)
    for ell, c in lp.coeffs.items():
        if ell == 0:
            H[np.diag_indices(j.size)] += c
            continue
        # entry (a, b) = c(j_a - j_b)
        if abs(ell) < j.size:
            idx = np.arange(max(0, ell), min(j.size, j.size + ell))
            H[idx, idx - ell] += c
    H[np.diag_indices(j.size)] += (2 * np.pi * (j + theta) / T) ** 2
    return H


def fourier_band_edges(lp, n_max, N=None):
    """Oracle edges from eigenvalues of the periodic/antiperiodic matrices.

    Returns ``(E0, edges)`` with edges[n-1] = (E_n^-, E_n^+).
    """
    if N is None:
        N = n_max + 2 * int(np.max(np.abs(lp._l))) + 20 if lp._l.size else n_max + 5
    per = np.linalg.eigvalsh(fourier_matrix(lp, N, 0.0))
    anti = np.linalg.eigvalsh(fourier_matrix(lp, N, 0.5))
    E0 = per[0]
    edges = []
    for n in range(1, n_max + 1):
        if n % 2 == 0:
            k = n - 1  # per[1], per[2] are E2-, E2+
            edges.append((per[k], per[k + 1]))
        else:
            k = n - 1
            edges.append((anti[k], anti[k + 1]))
    return float(E0), np.array(edges)


def edge_asymptotics(spec):
    """Fitted C with |E_n^+- - (pi n / T)^2| <= C T^2 / n over the reported gaps."""
    T = spec.period
    worst = 0.0
    for g in spec.gaps:
        free = (math.pi * g.n / T) ** 2
        dev = max(abs(g.E_minus - free), abs(g.E_plus - free))
        worst = max(worst, dev * g.n / T ** 2)
    return worst


def label_gaps(spec, lattice, radius=None):
    """Attach coset data: ell = n and the minimal representative of that coset."""
    from .frequency import quotient_norm
    for g in spec.gaps:
        m, rep = quotient_norm(g.n, lattice, radius)
        g.ell, g.qnorm, g.label = g.n, m, rep
    return spec
