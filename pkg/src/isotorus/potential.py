"""Quasi-periodic and periodic Fourier potentials.

A ``FourierPotential`` is V(x) = sum_n c(n) exp(2 pi i x n.omega) with a
finite coefficient map.  Pushing it forward to a rational frequency gives a
``LatticePotential`` indexed by coset numbers l, i.e. a T-periodic function
sum_l c(l) exp(2 pi i x l / T).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gamma, gammaincc

from . import frequency as fq
from .errors import ConfigError, InvalidPotentialError, OutOfBandError

REALITY_TOL = 1e-12


def _omega_vector(freq):
    if isinstance(freq, (fq.Frequency, fq.RationalFrequency)):
        return freq.vector
    return np.atleast_1d(np.asarray(freq, dtype=float))


@dataclass(frozen=True)
class FourierPotential:
    coeffs: dict
    frequency: object
    epsilon: float = 1.0
    kappa0: float = 1.0
    alpha0: float = 1.0
    validate: bool = True
    _n: np.ndarray = field(init=False, repr=False, compare=False)
    _c: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nu = len(_omega_vector(self.frequency))
        cf = {}
        for n, c in self.coeffs.items():
            key = tuple(int(v) for v in np.atleast_1d(n))
            if len(key) != nu:
                raise ConfigError(f"coefficient index {key} has wrong dimension")
            cf[key] = complex(c)
        object.__setattr__(self, "coeffs", cf)
        keys = sorted(cf)
        n = np.array(keys, dtype=np.int64).reshape(-1, nu)
        c = np.array([cf[k] for k in keys], dtype=complex)
        object.__setattr__(self, "_n", n)
        object.__setattr__(self, "_c", c)
        if not 0.5 <= self.alpha0 <= 1:
            raise ConfigError("alpha0 must lie in [1/2, 1]")
        if self.validate:
            self.check()

    @property
    def nu(self):
        return self._n.shape[1]

    @property
    def omega(self):
        return _omega_vector(self.frequency)

    @property
    def l1(self):
        return float(np.abs(self._c).sum())

    def check(self):
        """Reality, zero mean and the decay budget."""
        scale = max(self.l1, 1.0)
        for k, c in self.coeffs.items():
            mk = tuple(-v for v in k)
            if abs(self.coeffs.get(mk, 0.0) - c.conjugate()) > REALITY_TOL * scale:
                raise InvalidPotentialError(f"reality violated at n={k}")
            if not any(k) and c != 0:
                raise InvalidPotentialError("c(0) must vanish")
            norm = sum(abs(v) for v in k)
            if k and any(k):
                bound = self.epsilon * math.exp(-self.kappa0 * norm ** self.alpha0)
                if abs(c) > bound * (1 + 1e-12) + 1e-300:
                    raise InvalidPotentialError(
                        f"|c{k}|={abs(c):.3e} exceeds decay budget {bound:.3e}")

    def __call__(self, x):
        return evaluate(self, x)

    def shifted(self, t):
        """V(. + t)."""
        ph = np.exp(2j * np.pi * t * (self._n @ self.omega))
        cf = {tuple(k): c * p for k, c, p in zip(self._n.tolist(), self._c, ph)}
        return FourierPotential(cf, self.frequency, self.epsilon, self.kappa0,
                                self.alpha0, validate=False)

    def with_frequency(self, freq):
        return FourierPotential(self.coeffs, freq, self.epsilon, self.kappa0,
                                self.alpha0, validate=False)

    def to_dict(self):
        fr = self.frequency
        ref = fr.to_dict() if hasattr(fr, "to_dict") else [float(w) for w in self.omega]
        return {"omega_ref": ref, "epsilon": self.epsilon, "kappa0": self.kappa0,
                "alpha0": self.alpha0,
                "coeffs": [{"n": list(k), "re": c.real, "im": c.imag}
                           for k, c in sorted(self.coeffs.items())]}

    @classmethod
    def from_dict(cls, d, frequency=None):
        if frequency is None:
            ref = d["omega_ref"]
            if isinstance(ref, dict) and "num" in ref:
                frequency = fq.RationalFrequency.from_dict(ref)
            elif isinstance(ref, dict):
                frequency = fq.Frequency.from_dict(ref)
            else:
                frequency = np.asarray(ref, dtype=float)
        cf = {tuple(e["n"]): complex(e["re"], e.get("im", 0.0)) for e in d["coeffs"]}
        return cls(cf, frequency, float(d.get("epsilon", 1.0)),
                   float(d.get("kappa0", 1.0)), float(d.get("alpha0", 1.0)))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def evaluate(V, x):
    """V(x) = sum c(n) exp(2 pi i x n.omega), real part after a reality check."""
    x = np.asarray(x, dtype=float)
    if V._c.size == 0:
        return np.zeros_like(x)[()]
    freqs = V._n @ V.omega
    ph = np.exp(2j * np.pi * np.multiply.outer(x, freqs))
    val = ph @ V._c
    resid = np.max(np.abs(val.imag)) if val.size else 0.0
    if resid > REALITY_TOL * max(V.l1, 1e-300) * max(1.0, np.sqrt(V._c.size)):
        raise InvalidPotentialError(f"imaginary residue {resid:.2e}")
    return val.real[()]


def random_potential(freq, epsilon, kappa0=1.0, support=3, seed=0, alpha0=1.0,
                     rho=(0.5, 1.0), real=False):
    """Seeded test potential with |c(n)| = rho_n eps exp(-kappa0 |n|^alpha0).

    ``real=True`` keeps every coefficient real (even potential).
    """
    rng = np.random.default_rng(seed)
    nu = len(_omega_vector(freq))
    cf = {}
    for n in fq.ball(nu, support)[1:]:
        k = tuple(int(v) for v in n)
        mk = tuple(-v for v in k)
        if mk in cf:
            continue
        amp = epsilon * math.exp(-kappa0 * sum(map(abs, k)) ** alpha0)
        amp *= rng.uniform(*rho)
        phase = 0.0 if real else rng.uniform(0, 2 * np.pi)
        c = amp * complex(math.cos(phase), math.sin(phase))
        if real:
            c *= 1 if rng.random() < 0.5 else -1
        cf[k] = c
        cf[mk] = c.conjugate()
    return FourierPotential(cf, freq, epsilon, kappa0, alpha0)


# ---------------------------------------------------------------------------
# periodic potentials on an omega-tilde lattice

def periodic_lattice(T):
    """Lattice of a single frequency 1/T (T integer or rational)."""
    f = 1 / Fraction(T).limit_denominator(10 ** 9)
    return fq.build_lattice(fq.RationalFrequency((f.numerator,), (f.denominator,)))


@dataclass(frozen=True)
class LatticePotential:
    """T-periodic potential q(x) = sum_l c(l) exp(2 pi i x l / T)."""
    lattice: fq.OmegaLattice
    coeffs: dict
    epsilon: float | None = None
    kappa0: float | None = None
    alpha0: float = 1.0
    _l: np.ndarray = field(init=False, repr=False, compare=False)
    _c: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cf = {int(k): complex(v) for k, v in self.coeffs.items()}
        object.__setattr__(self, "coeffs", cf)
        keys = sorted(cf)
        object.__setattr__(self, "_l", np.array(keys, dtype=np.int64))
        object.__setattr__(self, "_c", np.array([cf[k] for k in keys], dtype=complex))
        scale = max(float(np.abs(self._c).sum()), 1.0)
        for k, c in cf.items():
            if abs(cf.get(-k, 0.0) - c.conjugate()) > REALITY_TOL * scale:
                raise InvalidPotentialError(f"reality violated at coset {k}")

    @property
    def period(self):
        return float(self.lattice.T)

    @property
    def mean(self):
        return self.coeffs.get(0, 0.0).real

    @property
    def bandwidth(self):
        """Largest frequency |l|/T present (0 for a constant)."""
        return float(np.max(np.abs(self._l))) / self.period if self._l.size else 0.0

    def bounds(self):
        """Certified (lower, upper) bounds for q."""
        osc = float(np.abs(self._c[self._l != 0]).sum())
        return self.mean - osc, self.mean + osc

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self._c.size == 0:
            return np.zeros_like(x)[()]
        pos = self._l > 0
        out = np.full(x.shape, self.mean)
        if np.any(pos):
            ph = np.exp(2j * np.pi * np.multiply.outer(x, self._l[pos] / self.period))
            out = out + 2 * (ph @ self._c[pos]).real
        return out[()]

    def shifted(self, t):
        """q(. + t)."""
        ph = np.exp(2j * np.pi * t * self._l / self.period)
        cf = dict(zip(self._l.tolist(), self._c * ph))
        # keep exact conjugate symmetry after the phase multiply
        cf = {k: (v if k >= 0 else cf[-k].conjugate()) for k, v in cf.items()}
        return LatticePotential(self.lattice, cf, self.epsilon, self.kappa0, self.alpha0)

    def decay_check(self, kappa0=None, R=None):
        """Max ratio |c(l)| / exp(-kappa0 |m|^alpha0 / 2) over stored cosets."""
        kappa0 = self.kappa0 if kappa0 is None else kappa0
        worst = 0.0
        for ell, c in self.coeffs.items():
            if ell == 0 or c == 0:
                continue
            m, _ = fq.quotient_norm(ell, self.lattice, R)
            worst = max(worst, abs(c) / math.exp(-kappa0 * m ** self.alpha0 / 2))
        return worst

    def to_dict(self):
        return {"lattice": self.lattice.rf.to_dict(),
                "coeffs": [{"l": k, "re": c.real, "im": c.imag}
                           for k, c in sorted(self.coeffs.items())],
                "epsilon": self.epsilon, "kappa0": self.kappa0, "alpha0": self.alpha0}

    @classmethod
    def from_dict(cls, d):
        lat = fq.build_lattice(fq.RationalFrequency.from_dict(d["lattice"]))
        cf = {int(e["l"]): complex(e["re"], e.get("im", 0.0)) for e in d["coeffs"]}
        return cls(lat, cf, d.get("epsilon"), d.get("kappa0"), d.get("alpha0", 1.0))

    @classmethod
    def cosine(cls, eps, T=1, harmonic=1):
        """2 eps cos(2 pi harmonic x / T)."""
        return cls(periodic_lattice(T), {harmonic: eps, -harmonic: eps}, abs(eps), 1.0)

    @classmethod
    def constant(cls, c0, T=1):
        return cls(periodic_lattice(T), {0: c0} if c0 else {})

    @classmethod
    def from_amplitudes(cls, T, amps, epsilon=None, kappa0=None):
        """Real even potential sum_k 2 a_k cos(2 pi k x / T) from {k: a_k}."""
        cf = {}
        for k, a in amps.items():
            cf[int(k)] = a
            cf[-int(k)] = np.conj(a)
        return cls(periodic_lattice(T), cf, epsilon, kappa0)


    @classmethod
    def from_function(cls, T, f, N=256, cutoff=1e-15, epsilon=None, kappa0=None):
        """Coefficients of a real T-periodic function from N uniform samples (FFT)."""
        x = np.arange(N) * (float(T) / N)
        c = np.fft.fft(np.asarray(f(x), dtype=float)) / N
        keep = {}
        scale = max(np.abs(c).max(), 1.0)
        for ell in range(-(N // 2) + 1, N // 2):
            v = c[ell % N]
            if abs(v) > cutoff * scale:
                keep[ell] = v
        # exact conjugate symmetry
        keep = {k: (v if k >= 0 else np.conj(keep.get(-k, np.conj(v))))
                for k, v in keep.items()}
        keep = {k: v for k, v in keep.items() if -k in keep}
        if 0 in keep:
            keep[0] = complex(keep[0].real)
        return cls(periodic_lattice(T), keep, epsilon, kappa0)


def lame_potential(k, ell=2, T=1, N=256):
    """Finite-gap potential ell(ell+1) (s k)^2 sn^2(s x, k), s = 2K(k)/T.

    Its Hill spectrum has exactly ``ell`` open gaps.
    """
    from scipy.special import ellipj, ellipk
    m = k * k
    s = 2 * ellipk(m) / float(T)
    f = lambda x: ell * (ell + 1) * (s * k) ** 2 * ellipj(s * x, m)[0] ** 2
    return LatticePotential.from_function(T, f, N)


def pushforward_periodic(V, lat):
    """Sum the coefficients of V over cosets of the null lattice of ``lat``."""
    if V.nu != lat.nu:
        raise ConfigError("potential and lattice dimensions differ")
    cf = {}
    if V._n.size:
        ells = fq.lattice_indices(V._n, lat)
        for ell, c in zip(ells.tolist(), V._c):
            cf[ell] = cf.get(ell, 0.0) + c
    return LatticePotential(lat, cf, V.epsilon, V.kappa0, V.alpha0)


def distance_rho(V0, V1):
    """sum_n |c0(n) - c1(n)| over the union of supports."""
    if not np.array_equal(V0.omega, V1.omega):
        raise ConfigError("frequency mismatch")
    keys = set(V0.coeffs) | set(V1.coeffs)
    return float(sum(abs(V0.coeffs.get(k, 0) - V1.coeffs.get(k, 0)) for k in keys))


def write_samples_csv(V, x, path=None):
    """CSV rows (x, V(x))."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(V(x))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "V"])
    for a, b in zip(x, v):
        w.writerow([repr(float(a)), repr(float(b))])
    if path is not None:
        with open(path, "w") as fh:
            fh.write(buf.getvalue())
    return buf.getvalue()


# ---------------------------------------------------------------------------
# lattice sums

def tail_bound(kappa0, alpha0, nu, R, details=False):
    """Certified upper bound for sum_{|n|>=R} exp(-kappa0 |n|^alpha0) over Z^nu.

    Shells R..S-1 are summed exactly; beyond S the shell count is majorized
    by 2^nu (s+nu)^(nu-1) and the remaining sum by its first term plus an
    incomplete-gamma integral.  With ``details`` the constant C of the form
    bound = C exp(-kappa0 R^alpha0 / 2) is returned as well.
    """
    if R < 0 or not 0.5 <= alpha0 <= 1:
        raise ConfigError("need R >= 0 and alpha0 in [1/2,1]")
    R = int(math.ceil(R))
    k, a = float(kappa0), float(alpha0)
    # majorant g(x) = 2^nu (x+nu)^(nu-1) exp(-k x^a) is decreasing for x >= S
    S = max(R, nu)
    while (nu - 1) / (S + nu) >= k * a * S ** (a - 1):
        S += 1
    S += 40
    explicit = math.fsum(fq.shell_count(nu, s) * math.exp(-k * s ** a)
                         for s in range(R, S))
    g_S = 2 ** nu * (S + nu) ** (nu - 1) * math.exp(-k * S ** a)
    # (x+nu)^(nu-1) <= (2x)^(nu-1) for x >= nu
    p = nu / a
    integral = (2 ** nu * 2 ** (nu - 1) / a * k ** (-p)
                * gamma(p) * gammaincc(p, k * S ** a))
    bound = (explicit + g_S + integral) * (1 + 1e-12)
    if details:
        return bound, bound * math.exp(k * R ** a / 2)
    return bound


# ---------------------------------------------------------------------------
# Fourier recovery by time averages

@dataclass
class Recovery:
    n: tuple
    estimate: complex
    radius: float
    T_avg: float
    parts: dict


def _kernel(T, f):
    """|(1/T) int_0^T exp(2 pi i t f) dt|."""
    x = np.pi * T * np.asarray(f, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.abs(np.sin(x) / x)
    return np.where(np.abs(x) < 1e-300, 1.0, out)


def fourier_recover(t, Q, omega, n, beta0=None, kappa0=1.0, amplitude=None,
                    delta=0.0, M=None, check_band=True):
    """Estimate d(n) = lim (1/T) int_0^T Q(t) exp(-2 pi i t n.omega) dt.

    ``t`` is a uniform grid on [0, T_avg].  The error radius is
    delta + sum_{m != n} A e^{-kappa0 |m|} |kernel((m-n).omega)| + A tail(M+1)
    + a Richardson estimate of the quadrature error, where A = ``amplitude``
    is the decay budget |d(m)| <= A e^{-kappa0|m|}.  Without a budget only
    delta and the quadrature part enter.
    """
    t = np.asarray(t, dtype=float)
    Q = np.asarray(Q, dtype=float)
    om = _omega_vector(omega)
    n = tuple(int(v) for v in np.atleast_1d(n))
    if len(n) != len(om):
        raise ConfigError("mode dimension mismatch")
    T = float(t[-1] - t[0])
    if T <= 0 or t.size < 3:
        raise ConfigError("need a grid with positive length")
    h = np.diff(t)
    if np.ptp(h) > 1e-9 * h.mean():
        raise ConfigError("grid must be uniform")
    h = float(h.mean())
    fn = float(np.dot(n, om))
    nn = sum(map(abs, n))
    if beta0 is None:
        b0 = omega.b0 if isinstance(omega, fq.Frequency) else 2.0 * len(om)
        beta0 = 1.0 / (2 * b0)
    if check_band and nn > max(T ** beta0, 1.0):
        raise OutOfBandError(f"|n|={nn} exceeds T_avg^beta0={T ** beta0:.3g}")
    if h > min(0.01, 1.0 / (20 * max(abs(fn), 1e-300))) * (1 + 1e-9):
        raise ConfigError(f"grid step {h:g} too coarse for mode {n}")

    w = np.exp(-2j * np.pi * (t - t[0]) * fn)
    f = Q * w
    est = (trapezoid(f, dx=h)) / T
    parts = {"delta": float(delta)}
    if (t.size - 1) % 2 == 0:
        coarse = trapezoid(f[::2], dx=2 * h) / T
        parts["quadrature"] = float(abs(est - coarse) / 3)
    else:
        parts["quadrature"] = float(abs(trapezoid(f[:-1], dx=h) / T - est))
    if amplitude is not None:
        if M is None:
            M = max(2 * nn + 8, 14)
        m = fq.ball(len(om), M)
        norms = np.abs(m).sum(axis=1)
        keep = ~np.all(m == np.array(n), axis=1)
        terms = (amplitude * np.exp(-kappa0 * norms[keep])
                 * _kernel(T, (m[keep] - np.array(n)) @ om))
        parts["aliasing"] = float(terms.sum())
        parts["tail"] = float(amplitude * tail_bound(kappa0, 1.0, len(om), M + 1))
    radius = float(sum(parts.values()))
    if not np.any(Q):
        est, radius = 0j, float(delta)
    return Recovery(n, complex(est), radius, T, parts)
