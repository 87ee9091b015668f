"""Isospectral torus of a periodic potential and the translation flow on it.

Each open gap G_n = (E_n^-, E_n^+) carries a circle with angle theta_n and
the Dirichlet eigenvalue mu_n = E_n^- + gamma_n sin^2(theta_n / 2).  The
first half-turn (0, pi) is the sheet on which mu_n moves up, the second the
sheet on which it moves down.  Translating the potential by t moves the
Dirichlet eigenvalues by the Dubrovin equations

    dmu_n/dt = +-2 sqrt((mu_n - E0)(mu_n - E_n^-)(E_n^+ - mu_n))
                  * prod_{i != n} sqrt((E_i^- - mu_n)(E_i^+ - mu_n)) / |mu_i - mu_n|,

which in angle form read dtheta_n/dt = 2 sqrt(mu_n - E0) * prod_{i != n}(...):
smooth, positive, and nonvanishing at the gap edges.  The trace formula
q(t) = E0 + sum_n (E_n^+ + E_n^- - 2 mu_n(t)) recovers the translated
potential.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import frequency as fq
from .errors import ConfigError, InvalidFrameError, NotFoundError, StiffnessError
from .potential import LatticePotential, fourier_recover

TWO_PI = 2 * np.pi


# ---------------------------------------------------------------------------
# frame and state

@dataclass(frozen=True)
class GapFrame:
    """Open gaps in enumeration order: decreasing width, then |m|, then label."""
    ground: float
    E_minus: np.ndarray
    E_plus: np.ndarray
    n: tuple
    labels: tuple = ()
    qnorms: tuple = ()
    period: float = 1.0
    omitted_width: float = 0.0
    lattice: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        Em = np.asarray(self.E_minus, dtype=float)
        Ep = np.asarray(self.E_plus, dtype=float)
        object.__setattr__(self, "E_minus", Em)
        object.__setattr__(self, "E_plus", Ep)
        if Em.shape != Ep.shape or len(self.n) != Em.size:
            raise InvalidFrameError("frame arrays disagree in length")
        if np.any(Ep <= Em):
            raise InvalidFrameError("every frame gap must be open")
        if Em.size:
            o = np.argsort(Em)
            if np.any(Em[o][1:] < Ep[o][:-1]):
                raise InvalidFrameError("frame gaps overlap")
            if not self.ground < Em.min():
                raise InvalidFrameError("ground energy must lie below all gaps")

    @property
    def N(self):
        return self.E_minus.size

    @property
    def gamma(self):
        return self.E_plus - self.E_minus

    @property
    def xi(self):
        """Angle scale max(sqrt(gamma), gamma), so that gamma/xi <= xi."""
        g = self.gamma
        return np.maximum(np.sqrt(g), g)

    def eta(self):
        """Matrix of gap-to-gap distances dist(G_i, G_n)."""
        Em, Ep = self.E_minus, self.E_plus
        d = np.maximum(Em[:, None] - Ep[None, :], Em[None, :] - Ep[:, None])
        np.fill_diagonal(d, 0.0)
        return np.maximum(d, 0.0)

    def truncated(self, N_cut):
        N_cut = int(N_cut)
        if not 0 <= N_cut <= self.N:
            raise ConfigError(f"N_cut={N_cut} outside 0..{self.N}")
        extra = float(self.gamma[N_cut:].sum())
        return GapFrame(self.ground, self.E_minus[:N_cut], self.E_plus[:N_cut],
                        self.n[:N_cut], self.labels[:N_cut], self.qnorms[:N_cut],
                        self.period, self.omitted_width + extra, self.lattice)

    @classmethod
    def from_spectrum(cls, spec, lattice=None, gap_min=1e-8, N=None):
        """Frame of all gaps wider than ``gap_min`` (at most N of them)."""
        gaps = [g for g in spec.gaps if not g.closed and g.width >= gap_min]
        if lattice is not None:
            for g in gaps:
                if g.qnorm is None:
                    m, rep = fq.quotient_norm(g.n, lattice)
                    g.ell, g.qnorm, g.label = g.n, m, rep
        gaps.sort(key=lambda g: (-g.width, g.qnorm if g.qnorm is not None else 0,
                                 tuple(g.label) if g.label is not None else (g.n,)))
        omitted = sum(g.width for g in spec.gaps if g.closed or g.width < gap_min)
        omitted += spec.meta.get("closed_width", 0.0)
        if N is not None:
            omitted += sum(g.width for g in gaps[N:])
            gaps = gaps[:N]
        return cls(spec.ground,
                   np.array([g.E_minus for g in gaps]), np.array([g.E_plus for g in gaps]),
                   tuple(g.n for g in gaps),
                   tuple(tuple(g.label) if g.label is not None else None for g in gaps),
                   tuple(g.qnorm for g in gaps), spec.period, float(omitted), lattice)

    def to_dict(self):
        return {"ground": self.ground, "E_minus": self.E_minus.tolist(),
                "E_plus": self.E_plus.tolist(), "n": list(self.n),
                "labels": [list(v) if v is not None else None for v in self.labels],
                "qnorms": list(self.qnorms), "period": self.period,
                "omitted_width": self.omitted_width}

    @classmethod
    def from_dict(cls, d):
        return cls(d["ground"], np.array(d["E_minus"]), np.array(d["E_plus"]),
                   tuple(d["n"]),
                   tuple(tuple(v) if v is not None else None for v in d.get("labels", [])),
                   tuple(d.get("qnorms", [])), d.get("period", 1.0),
                   d.get("omitted_width", 0.0))


@dataclass(frozen=True)
class TorusState:
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.mod(np.asarray(self.theta, dtype=float), TWO_PI))

    def moved(self, n, by):
        th = self.theta.copy()
        th[n] += by
        return TorusState(th)

    def to_json(self):
        return json.dumps({"theta": [repr(float(v)) for v in self.theta]}, sort_keys=True)

    @classmethod
    def from_json(cls, s):
        return cls(np.array([float(v) for v in json.loads(s)["theta"]]))


def torus_distance(gf, a, b):
    """sum_n xi_n |theta_n - theta'_n| with the circular difference."""
    th_a = np.asarray(a.theta if isinstance(a, TorusState) else a, dtype=float)
    th_b = np.asarray(b.theta if isinstance(b, TorusState) else b, dtype=float)
    d = np.abs(np.mod(th_a - th_b + np.pi, TWO_PI) - np.pi)
    return np.sum(gf.xi[: d.shape[-1]] * d, axis=-1)


def mu_of_theta(gf, s):
    """(mu_n, sigma_n) with sigma = +1 on (0, pi), -1 on (pi, 2 pi), 0 at 0 and pi."""
    th = np.mod(np.asarray(s.theta if isinstance(s, TorusState) else s, dtype=float), TWO_PI)
    N = th.shape[-1]
    mu = gf.E_minus[:N] + gf.gamma[:N] * np.sin(th / 2) ** 2
    sig = np.sign(np.sin(th))
    sig[np.isclose(th, 0.0, atol=1e-15) | np.isclose(th, np.pi, atol=1e-15)
        | np.isclose(th, TWO_PI, atol=1e-15)] = 0
    return mu, sig.astype(int)


# ---------------------------------------------------------------------------
# vector field

def _factors(gf, mu, N):
    """Matrix F[i, n] = (E_i^- - mu_n)(E_i^+ - mu_n) / (mu_i - mu_n)^2, F[n, n] = 1."""
    Em, Ep = gf.E_minus[:N], gf.E_plus[:N]
    num = (Em[:, None] - mu[None, :]) * (Ep[:, None] - mu[None, :])
    den = (mu[:, None] - mu[None, :]) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        F = num / den
    np.fill_diagonal(F, 1.0)
    return F


def theta_field(gf, s, N_cut=None):
    """dtheta/dt for the first N_cut circles (all by default)."""
    N = gf.N if N_cut is None else int(N_cut)
    if N > gf.N:
        raise ConfigError("N_cut exceeds the number of open gaps")
    th = np.asarray(s.theta if isinstance(s, TorusState) else s, dtype=float)[:N]
    if N == 0:
        return np.zeros(0)
    mu = gf.E_minus[:N] + gf.gamma[:N] * np.sin(th / 2) ** 2
    F = _factors(gf, mu, N)
    if not np.all(np.isfinite(F)) or np.any(F <= 0):
        i, n = np.argwhere(~(F > 0) | ~np.isfinite(F))[0]
        raise InvalidFrameError(f"nonpositive product factor between gaps {i} and {n}")
    base = mu - gf.ground
    if np.any(base <= 0):
        raise InvalidFrameError("Dirichlet value below the ground energy")
    return 2.0 * np.sqrt(base * np.prod(F, axis=0))


def mu_velocity(gf, s, N_cut=None):
    """dmu_n/dt implied by the angle field (chain rule through the sine map)."""
    N = gf.N if N_cut is None else int(N_cut)
    th = np.asarray(s.theta if isinstance(s, TorusState) else s, dtype=float)[:N]
    return 0.5 * gf.gamma[:N] * np.sin(th) * theta_field(gf, th, N)


def factor_check(gf, s, N_cut=None):
    """Deviation of each product factor sqrt(F[i, n]) from 1 against its bounds.

    Returns (dev, elementary, lemma, applicable): the elementary bound is
    gamma_i / dist(mu_n, G_i); the 6 gamma_i^(3/4) bound is flagged
    applicable where dist(mu_n, G_i) >= gamma_i^(1/4) / 6.
    """
    N = gf.N if N_cut is None else int(N_cut)
    th = np.asarray(s.theta if isinstance(s, TorusState) else s, dtype=float)[:N]
    mu = gf.E_minus[:N] + gf.gamma[:N] * np.sin(th / 2) ** 2
    dev = np.abs(np.sqrt(_factors(gf, mu, N)) - 1)
    Em, Ep, g = gf.E_minus[:N], gf.E_plus[:N], gf.gamma[:N]
    dist = np.maximum(Em[:, None] - mu[None, :], mu[None, :] - Ep[:, None])
    with np.errstate(divide="ignore"):
        elem = g[:, None] / dist
    lemma = np.broadcast_to(6 * g[:, None] ** 0.75, dev.shape).copy()
    applicable = dist >= g[:, None] ** 0.25 / 6
    for a in (dev, elem, lemma):
        np.fill_diagonal(a, 0.0)
    np.fill_diagonal(applicable, False)
    return dev, elem, lemma, applicable


# ---------------------------------------------------------------------------
# trajectories

@dataclass
class Trajectory:
    t: np.ndarray
    theta: np.ndarray  # shape (len(t), N_cut), unwrapped
    N_cut: int
    frame: GapFrame = field(repr=False)
    dense: object = field(default=None, repr=False)
    stats: dict = field(default_factory=dict)

    @property
    def mu(self):
        return mu_of_theta(self.frame, self.theta)[0]

    def state(self, i=-1):
        return TorusState(self.theta[i])

    def at(self, t):
        """Unwrapped angles at arbitrary times (dense output)."""
        t = np.asarray(t, dtype=float)
        if self.dense is None:
            return np.broadcast_to(self.theta[0], t.shape + (self.N_cut,)).copy()
        return self.dense(t).T

    def to_csv(self, path=None, Q=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        N = self.N_cut
        w.writerow(["t"] + [f"theta{i + 1}" for i in range(N)] + [f"mu{i + 1}" for i in range(N)]
                   + (["Q"] if Q else []))
        mu = self.mu
        q = trace_reconstruct(self.frame, self) if Q else None
        for i, t in enumerate(self.t):
            row = [repr(float(t))] + [repr(float(v)) for v in np.mod(self.theta[i], TWO_PI)]
            row += [repr(float(v)) for v in mu[i]]
            if Q:
                row.append(repr(float(q[i])))
            w.writerow(row)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(buf.getvalue())
        return buf.getvalue()


def integrate_flow(gf, s0, t_span, tol=1e-10, N_cut=None, t_eval=None, max_step=np.inf):
    """Integrate the angle field with DOP853; angles are returned unwrapped."""
    N = gf.N if N_cut is None else int(N_cut)
    if N > gf.N:
        raise ConfigError("N_cut exceeds the number of open gaps")
    t0, t1 = (0.0, float(t_span)) if np.isscalar(t_span) else map(float, t_span)
    if not (np.isfinite(t0) and np.isfinite(t1)):
        raise ConfigError("t_span must be finite")
    th0 = np.asarray(s0.theta if isinstance(s0, TorusState) else s0, dtype=float)[:N].copy()
    if t_eval is None:
        t_eval = np.linspace(t0, t1, 201)
    t_eval = np.asarray(t_eval, dtype=float)
    if N == 0 or t1 == t0:
        return Trajectory(t_eval, np.tile(th0, (t_eval.size, 1)), N, gf)
    sol = solve_ivp(lambda t, y: theta_field(gf, y, N), (t0, t1), th0, method="DOP853",
                    rtol=tol, atol=tol, dense_output=True, t_eval=t_eval, max_step=max_step)
    if sol.status != 0:
        y = sol.y[:, -1] if sol.y.size else th0
        rate = theta_field(gf, y, N)
        k = int(np.argmax(rate))
        raise StiffnessError(f"flow integration stopped at t={sol.t[-1] if sol.t.size else t0}: "
                             f"{sol.message}; dominant gap n={gf.n[k]}", where=gf.n[k])
    traj = Trajectory(sol.t, sol.y.T.copy(), N, gf, sol.sol,
                      {"nfev": int(sol.nfev), "tol": tol})
    mu = traj.mu
    if np.any(mu < gf.E_minus[:N] - 1e-12 * (1 + np.abs(gf.E_minus[:N]))) or \
            np.any(mu > gf.E_plus[:N] + 1e-12 * (1 + np.abs(gf.E_plus[:N]))):
        raise InvalidFrameError("Dirichlet value left its gap")
    return traj


def flow_map(gf, s, t, tol=1e-10, N_cut=None):
    """State reached from s after time t."""
    tr = integrate_flow(gf, s, (0.0, t), tol, N_cut, t_eval=np.array([0.0, float(t)]))
    return TorusState(tr.theta[-1])


def trace_reconstruct(gf, traj):
    """Q(t) = E0 + sum_{n <= N_cut} (E_n^+ + E_n^- - 2 mu_n(t))."""
    if isinstance(traj, Trajectory):
        mu = traj.mu
        N = traj.N_cut
    else:
        th = np.atleast_2d(traj.theta if isinstance(traj, TorusState) else traj)
        mu = mu_of_theta(gf, th)[0]
        N = th.shape[-1]
    Em, Ep = gf.E_minus[:N], gf.E_plus[:N]
    return gf.ground + np.sum(Em + Ep - 2 * mu, axis=-1)


def dirichlet_to_torus(q, gf, delta=None, tol=1e-10, mu_tol=1e-7, edge_snap=1e-9):
    """Torus point of q: theta from mu_n(0), sheet from the sign of mu_n(delta) - mu_n(0)."""
    from .hill import dirichlet_eigenvalues
    if gf.N == 0:
        return TorusState(np.zeros(0))
    if delta is None:
        delta = 1e-4 * gf.period
    idx = sorted(gf.n)
    pos = [idx.index(n) for n in gf.n]
    mu0 = np.asarray(dirichlet_eigenvalues(q, max(idx), tol, indices=idx))[pos]
    mu1 = np.asarray(dirichlet_eigenvalues(q.shifted(delta), max(idx), tol, indices=idx))[pos]
    g = gf.gamma
    slack = mu_tol * np.maximum(1.0, np.abs(mu0))
    if np.any(mu0 < gf.E_minus - slack) or np.any(mu0 > gf.E_plus + slack):
        bad = int(np.argmax(np.maximum(gf.E_minus - mu0, mu0 - gf.E_plus)))
        raise InvalidFrameError(f"Dirichlet value of gap n={gf.n[bad]} outside its gap")
    # theta ~ sqrt(mu - E) at an edge, so values within the eigenvalue accuracy
    # of an edge are snapped to it
    snap = edge_snap * np.maximum(1.0, np.abs(mu0))
    r = np.clip((mu0 - gf.E_minus) / g, 0.0, 1.0)
    r = np.where(mu0 - gf.E_minus <= snap, 0.0, np.where(gf.E_plus - mu0 <= snap, 1.0, r))
    th = 2 * np.arcsin(np.sqrt(r))
    down = mu1 < mu0
    th = np.where(down, TWO_PI - th, th)
    return TorusState(th)


# ---------------------------------------------------------------------------
# forward map: torus point -> potential

@dataclass
class IsoImage:
    t: np.ndarray
    Q: np.ndarray
    coeffs: dict
    radius: float
    potential: LatticePotential
    decay: list
    trajectory: Trajectory = field(repr=False, default=None)

    def decay_ok(self):
        return all(r["ok"] for r in self.decay)


def isospectral_map(gf, s, t_grid=None, lattice=None, ells=None, epsilon=None, kappa0=1.0,
                    tol=1e-10, N_cut=None, coeff_min=1e-13):
    """Potential of the torus point s: Q(t) by the trace formula over one period,
    coefficients d(l) by period averages, and the decay report
    |d(l)| <= sqrt(2 eps) exp(-kappa0 |m| / 2) + radius with |m| the quotient norm.
    """
    from .potential import periodic_lattice
    T = gf.period
    N = gf.N if N_cut is None else int(N_cut)
    lattice = lattice if lattice is not None else gf.lattice
    if lattice is None:
        lattice = periodic_lattice(T)
    top = int(np.max(gf.n[:N])) if N else 1
    L = max(4 * top, 32) if ells is None else max(abs(int(e)) for e in ells)
    if t_grid is None:
        h = min(0.01, T / (20 * max(L, 1)))
        M = int(np.ceil(T / h))
        M += M % 2
        t_grid = np.linspace(0.0, T, M + 1)
    t_grid = np.asarray(t_grid, dtype=float)
    traj = integrate_flow(gf, s, (t_grid[0], t_grid[-1]), tol, N, t_eval=t_grid)
    Q = trace_reconstruct(gf, traj)
    if ells is None:
        # FFT locates the significant modes; each one is then re-estimated with a radius
        c = np.fft.rfft(Q[:-1]) / (Q.size - 1)
        c = c[: L + 1]
        ells = np.nonzero(np.abs(c) > coeff_min * max(1.0, np.abs(c).max()))[0].tolist()
    delta = gf.omitted_width + 10 * tol
    coeffs, radius, decay = {}, 0.0, []
    omega = (1.0 / T,)
    for ell in sorted(set(abs(int(e)) for e in ells)):
        rec = fourier_recover(t_grid, Q, omega, (ell,), delta=delta, check_band=False)
        coeffs[ell] = rec.estimate
        if ell:
            coeffs[-ell] = np.conj(rec.estimate)
        radius = max(radius, rec.radius)
        if ell and epsilon is not None:
            try:
                m = fq.quotient_norm(ell, lattice)[0]
            except NotFoundError:
                m = None
            if m is not None:
                bound = math.sqrt(2 * epsilon) * math.exp(-kappa0 * m / 2)
                decay.append({"ell": ell, "m": m, "abs": abs(rec.estimate), "bound": bound,
                              "radius": rec.radius, "ok": abs(rec.estimate) <= bound + rec.radius})
    coeffs[0] = complex(coeffs.get(0, 0.0).real)
    pot = LatticePotential(lattice, coeffs, epsilon, kappa0)
    return IsoImage(t_grid, Q, coeffs, radius, pot, decay, traj)
