"""Diophantine frequencies, continued-fraction approximants and the
omega-tilde lattice.

Everything that touches the lattice (tau0, the period T, coset indices,
the null lattice) is exact rational arithmetic on python integers.  Floats
only show up when a potential is evaluated.
"""
from __future__ import annotations

import json
import math
import re
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, reduce

import numpy as np
from mpmath import iv

from .errors import ConfigError, NotFoundError, PrecisionError

CF_PREC = 128


@contextmanager
def _ivprec(prec=CF_PREC):
    old = iv.prec
    iv.prec = prec
    try:
        yield
    finally:
        iv.prec = old


_EXPR_OK = re.compile(r"^[0-9eE+\-*/(). a-z]*$")
_RATIONAL = re.compile(r"^\s*-?\d+\s*(/\s*\d+)?\s*$")
_EXPR_NAMES = ("sqrt", "pi", "exp", "log", "cbrt")


def _interval_of(value):
    """Enclosing interval of a component given as a number or expression.

    Strings are evaluated in interval arithmetic, so e.g. ``"(sqrt(5)-1)/2"``
    yields a certified enclosure.  Floats are taken to be correct up to
    one ulp.
    """
    with _ivprec():
        if isinstance(value, str):
            expr = value.strip()
            if not _EXPR_OK.match(expr):
                raise ConfigError(f"bad frequency expression {value!r}")
            names = {k: getattr(iv, k) for k in _EXPR_NAMES if hasattr(iv, k)}
            names["cbrt"] = lambda x: iv.root(x, 3)
            for tok in re.findall(r"[a-z]+", re.sub(r"\d[eE][+-]?\d", "", expr)):
                if tok not in names and tok != "e":
                    raise ConfigError(f"unknown name {tok!r} in {value!r}")
            # numeric literals become exact intervals, not python floats
            expr = re.sub(r"(?<![a-z])(\d+\.?\d*(?:[eE][+-]?\d+)?)",
                          r"_n('\1')", expr)
            names["_n"] = iv.mpf
            try:
                out = eval(expr, {"__builtins__": {}},
                           dict(names, e=iv.e))  # noqa: S307
            except Exception as exc:  # syntax errors etc.
                raise ConfigError(f"cannot evaluate {value!r}: {exc}") from exc
            if not isinstance(out, iv.mpf):
                out = iv.mpf(out)
            return out
        if isinstance(value, Fraction):
            return iv.mpf(value.numerator) / value.denominator
        x = float(value)
        if not math.isfinite(x):
            raise ConfigError("frequency component must be finite")
        u = math.ulp(x)
        return iv.mpf([x - u, x + u])


@dataclass(frozen=True)
class Frequency:
    """Real frequency vector with Diophantine constants.

    ``omega`` holds floats; ``exact`` optionally holds expressions such as
    ``"sqrt(2)-1"`` used for certified continued fractions.
    """
    omega: tuple
    a0: float = 0.1
    b0: float = 2.5
    c: float = 0.3
    beta: float = 2.0
    exact: tuple | None = None

    def __post_init__(self):
        om = tuple(float(w) for w in self.omega)
        object.__setattr__(self, "omega", om)
        if self.exact is not None:
            ex = tuple(self.exact)
            if len(ex) != len(om):
                raise ConfigError("exact/omega length mismatch")
            object.__setattr__(self, "exact", ex)
        if not om:
            raise ConfigError("empty frequency vector")
        if any((not math.isfinite(w)) or w == 0.0 for w in om):
            raise ConfigError("frequency components must be finite and nonzero")
        if not 0 < self.a0 < 1:
            raise ConfigError("a0 must lie in (0,1)")
        if not self.b0 > len(om):
            raise ConfigError("b0 must exceed nu")
        if not 0 < self.c < 1:
            raise ConfigError("c must lie in (0,1)")
        if not self.beta > 1:
            raise ConfigError("beta must exceed 1")

    @property
    def nu(self):
        return len(self.omega)

    @property
    def vector(self):
        return np.asarray(self.omega, dtype=float)

    def interval(self, j):
        """Certified enclosure of component j (a Fraction when exactly rational)."""
        src = self.exact[j] if self.exact is not None else self.omega[j]
        if isinstance(src, str) and _RATIONAL.match(src):
            return Fraction(src.replace(" ", ""))
        return _interval_of(src)

    @classmethod
    def parse(cls, omega, **kw):
        """Build from a list mixing numbers and expression strings."""
        exact = tuple(w if isinstance(w, str) else repr(float(w)) for w in omega)
        floats = []
        for w in omega:
            if isinstance(w, str):
                floats.append(float(iv.mpf(_interval_of(w)).mid))
            else:
                floats.append(float(w))
        has_str = any(isinstance(w, str) for w in omega)
        return cls(tuple(floats), exact=exact if has_str else None, **kw)

    def to_dict(self):
        om = list(self.exact) if self.exact is not None else list(self.omega)
        return {"omega": om, "a0": self.a0, "b0": self.b0, "c": self.c,
                "beta": self.beta}

    @classmethod
    def from_dict(cls, d):
        kw = {k: d[k] for k in ("a0", "b0", "c", "beta") if k in d}
        return cls.parse(d["omega"], **kw)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class RationalFrequency:
    num: tuple
    den: tuple
    r: int = 0

    def __post_init__(self):
        num = tuple(int(x) for x in self.num)
        den = tuple(int(x) for x in self.den)
        if len(num) != len(den) or not num:
            raise ConfigError("numerator/denominator length mismatch")
        if any(t <= 0 for t in den):
            raise ConfigError("denominators must be positive")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def nu(self):
        return len(self.num)

    @property
    def fractions(self):
        return tuple(Fraction(a, b) for a, b in zip(self.num, self.den))

    @property
    def vector(self):
        return np.array([a / b for a, b in zip(self.num, self.den)])

    def to_dict(self):
        return {"num": list(self.num), "den": list(self.den), "r": self.r}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["num"]), tuple(d["den"]), int(d.get("r", 0)))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


# ---------------------------------------------------------------------------
# integer vectors

@lru_cache(maxsize=None)
def _shell_tuple(nu, s):
    if nu == 1:
        return ((s,), (-s,)) if s > 0 else ((0,),)
    out = []
    for a in range(-s, s + 1):
        for rest in _shell_tuple(nu - 1, s - abs(a)):
            out.append((a,) + rest)
    return tuple(sorted(out))


def shell(nu, s):
    """Integer vectors of l1 norm exactly ``s`` (lexicographic order)."""
    return np.array(_shell_tuple(nu, s), dtype=np.int64).reshape(-1, nu)


@lru_cache(maxsize=64)
def _ball(nu, R):
    arr = np.concatenate([shell(nu, s) for s in range(R + 1)])
    arr.setflags(write=False)
    return arr


def ball(nu, R):
    """Integer vectors with ``|n| <= R`` sorted by norm, then lexicographically."""
    return _ball(int(nu), int(R))


def shell_count(nu, s):
    """Number of integer nu-vectors of l1 norm s."""
    if s == 0:
        return 1
    return sum(2 ** k * math.comb(nu, k) * math.comb(s - 1, k - 1)
               for k in range(1, min(nu, s) + 1))


# ---------------------------------------------------------------------------
# Diophantine certificate

@dataclass
class DiophantineReport:
    ratio: float
    worst_n: tuple
    passed: bool
    R: int
    threshold: float


def check_diophantine(freq, R, omega=None):
    """min over 0<|n|<=R of |n.omega| |n|^b0, compared with a0."""
    if R < 1:
        raise ConfigError("R must be >= 1")
    om = freq.vector if omega is None else np.asarray(omega, dtype=float)
    if om.shape != (freq.nu,):
        raise ConfigError("dimension mismatch of omega")
    n = ball(freq.nu, R)[1:]
    norms = np.abs(n).sum(axis=1)
    ratio = np.abs(n @ om) * norms.astype(float) ** freq.b0
    i = int(np.argmin(ratio))
    return DiophantineReport(float(ratio[i]), tuple(int(v) for v in n[i]),
                             bool(ratio[i] >= freq.a0), R, freq.a0)


# ---------------------------------------------------------------------------
# continued fractions

def certified_convergents(x, qmax, max_terms=200):
    """Convergents (p, q) of the real enclosed by interval ``x``.

    Expansion continues until a denominator exceeds ``qmax``.  Returns the
    list and a flag telling whether the number turned out rational (the
    expansion terminated exactly).
    """
    conv = []
    p0, q0, p1, q1 = 0, 1, 1, 0
    if isinstance(x, Fraction):
        for _ in range(max_terms):
            a = math.floor(x)
            p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
            conv.append((p1, q1))
            if q1 > qmax:
                return conv, False
            if x == a:
                return conv, True
            x = 1 / (x - a)
    with _ivprec():
        for _ in range(max_terms):
            a_lo = int(math.floor(iv.mpf(x.a)))
            a_hi = int(math.floor(iv.mpf(x.b)))
            if a_lo != a_hi:
                raise PrecisionError(
                    "continued fraction not certifiable beyond denominator "
                    f"{conv[-1][1] if conv else 1}")
            a = a_lo
            p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
            conv.append((p1, q1))
            if q1 > qmax:
                return conv, False
            frac = x - a
            if frac.a == 0 and frac.b == 0:
                return conv, True
            if frac.a <= 0:
                raise PrecisionError(
                    f"continued fraction not certifiable beyond denominator {q1}")
            x = 1 / frac
    raise PrecisionError(f"term budget exhausted at denominator {q1}")


def rational_approximation(freq, r):
    """Per component: the convergent p^(s+1)/q^(s+1) with q^(s) <= r < q^(s+1)."""
    if int(r) != r or r < 2:
        raise ConfigError("r must be an integer >= 2")
    r = int(r)
    num, den = [], []
    for j in range(freq.nu):
        conv, rational = certified_convergents(freq.interval(j), r)
        # drop the repeated q=1 that appears when 0 < omega < 1
        if rational and conv[-1][1] <= r:
            p, q = conv[-1]
        else:
            p, q = next((p, q) for p, q in conv if q > r)
        num.append(p)
        den.append(q)
    return RationalFrequency(tuple(num), tuple(den), r)


def lemma_bounds(freq, rf):
    """Check |omega_j - l_j/t_j| < 1/r and r < t_j <= c^-1 r^beta per component."""
    r = rf.r
    out = []
    with _ivprec():
        for j in range(freq.nu):
            x = freq.interval(j)
            if isinstance(x, Fraction):
                close = abs(x - Fraction(rf.num[j], rf.den[j])) < Fraction(1, r)
            else:
                d = abs(x - iv.mpf(rf.num[j]) / rf.den[j])
                close = bool(d.b < iv.mpf(1) / r)
            t = rf.den[j]
            size = r < t and t <= r ** freq.beta / freq.c
            out.append({"close": close, "denominator": bool(size)})
    return out


@dataclass
class BoxReport:
    R0bar: float
    passed: bool
    worst_n: tuple
    worst_ratio: float
    b0: float
    b0bar: float | None


def box_condition(freq, rf):
    """Diophantine condition in the box for omega-tilde.

    |n.omega~| >= (a0/2)|n|^-b0 on 0<|n|<=R0bar, R0bar = (a0 r / (2 nu))^(1/(b0+1)).
    Also reports the exponent b0bar with R0bar^b0bar = prod t_j, kept apart
    from b0.
    """
    a0p = freq.a0 / 2
    R0 = (a0p * rf.r / freq.nu) ** (1.0 / (freq.b0 + 1))
    Rint = int(math.floor(R0))
    lat = build_lattice(rf)
    worst, wr, ok = (), math.inf, True
    if Rint >= 1:
        n = ball(freq.nu, Rint)[1:]
        ells = lattice_indices(n, lat)
        norms = np.abs(n).sum(axis=1)
        T = float(lat.T)
        lhs = np.abs(ells) / T
        ratio = lhs * norms.astype(float) ** freq.b0
        i = int(np.argmin(ratio))
        worst, wr = tuple(int(v) for v in n[i]), float(ratio[i])
        ok = wr >= a0p
    prod_t = math.prod(rf.den)
    b0bar = math.log(prod_t) / math.log(R0) if R0 > 1 else None
    return BoxReport(R0, bool(ok), worst, wr, freq.b0, b0bar)


# ---------------------------------------------------------------------------
# omega-tilde lattice

def _ext_gcd(a, b):
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    g, x, y = _ext_gcd(b, a % b)
    return g, y, x - (a // b) * y


def _null_basis(w):
    """Integer basis of {n : w.n = 0} via unimodular column reduction."""
    nu = len(w)
    U = [[int(i == j) for j in range(nu)] for i in range(nu)]
    w = list(w)
    for j in range(1, nu):
        a, b = w[0], w[j]
        if b == 0:
            continue
        g, x, y = _ext_gcd(a, b)
        # new col0 = x*c0 + y*cj (weight g); new colj = (b/g)*c0 - (a/g)*cj (weight 0)
        for i in range(nu):
            c0, cj = U[i][0], U[i][j]
            U[i][0], U[i][j] = x * c0 + y * cj, (b // g) * c0 - (a // g) * cj
        w[0], w[j] = g, 0
    basis = []
    for j in range(1, nu):
        v = [U[i][j] for i in range(nu)]
        if any(v):
            first = next(x for x in v if x)
            if first < 0:
                v = [-x for x in v]
            basis.append(tuple(v))
    return _reduce_basis(basis)


def _reduce_basis(basis):
    # cheap pairwise size reduction in the l1 norm; keeps the span
    basis = [list(b) for b in basis]
    changed = True
    while changed:
        changed = False
        for i in range(len(basis)):
            for j in range(len(basis)):
                if i == j:
                    continue
                for sgn in (1, -1):
                    cand = [a - sgn * b for a, b in zip(basis[i], basis[j])]
                    if sum(map(abs, cand)) < sum(map(abs, basis[i])):
                        basis[i] = cand
                        changed = True
    out = []
    for v in basis:
        first = next(x for x in v if x)
        out.append(tuple(-x for x in v) if first < 0 else tuple(v))
    return tuple(sorted(out, key=lambda v: (sum(map(abs, v)), v)))


@dataclass(frozen=True)
class OmegaLattice:
    """Quotient of Z^nu by the null lattice of a rational frequency.

    ``weights[j] = T * omega~_j`` are coprime integers, so the coset index is
    ``l(n) = weights . n`` and the period is ``T = 1/tau0``.
    """
    rf: RationalFrequency
    tau0: Fraction
    T: Fraction
    weights: tuple
    null_basis: tuple
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def nu(self):
        return self.rf.nu

    @property
    def period(self):
        return float(self.T)

    @property
    def omega_tilde(self):
        return self.rf.fractions

    def coset_index(self, n):
        return coset_index(n, self)

    def xi(self, ell):
        """Frequency ell/T of coset ell (float)."""
        return np.asarray(ell, dtype=float) / float(self.T)

    def coset_table(self, R):
        """Cosets with quotient norm <= R.

        Returns ``(ells, reps, norms)`` sorted by norm then by ell, with the
        lexicographically first minimal representative.
        """
        key = ("table", int(R))
        if key not in self._cache:
            n = ball(self.nu, R)
            ells = n @ np.asarray(self.weights, dtype=np.int64)
            _, first = np.unique(ells, return_index=True)
            first = np.sort(first)  # ball order: by norm then lexicographic
            reps = n[first]
            norms = np.abs(reps).sum(axis=1)
            e = ells[first]
            order = np.lexsort((e, norms))
            self._cache[key] = (e[order], reps[order], norms[order])
        return self._cache[key]

    def to_dict(self):
        return {"rf": self.rf.to_dict(), "T": str(self.T), "tau0": str(self.tau0),
                "weights": list(self.weights),
                "null_basis": [list(v) for v in self.null_basis]}


def build_lattice(rf):
    fr = rf.fractions
    if all(f == 0 for f in fr):
        raise ConfigError("omega-tilde must be nonzero")
    D = reduce(math.lcm, (f.denominator for f in fr))
    a = [int(f * D) for f in fr]
    g = reduce(math.gcd, (abs(x) for x in a))
    tau0 = Fraction(g, D)
    T = Fraction(D, g)
    w = tuple(x // g for x in a)
    return OmegaLattice(rf, tau0, T, w, _null_basis(w))


def lattice_indices(n, lat):
    """Vectorized coset indices for an integer array of shape (..., nu)."""
    n = np.asarray(n)
    if not np.issubdtype(n.dtype, np.integer):
        if np.any(n != np.round(n)):
            raise ConfigError("coset index needs integer vectors")
        n = n.astype(np.int64)
    return n @ np.asarray(lat.weights, dtype=np.int64)


def coset_index(n, lat):
    n = tuple(int(v) for v in n)
    if len(n) != lat.nu:
        raise ConfigError("dimension mismatch")
    val = sum(Fraction(k) * f for k, f in zip(n, lat.rf.fractions)) * lat.T
    if val.denominator != 1:
        # cannot happen with exact arithmetic; guards against misuse
        raise PrecisionError(f"non-integer coset index {val}")
    return int(val)


def quotient_norm(ell, lat, radius=None):
    """Minimal l1 norm over the coset ell, searched shell by shell.

    Returns ``(norm, representative)``; raises NotFoundError when nothing
    lies within ``radius`` (default 4 |ell| max t_j).
    """
    ell = int(ell)
    if radius is None:
        radius = max(4 * abs(ell) * max(lat.rf.den), 1)
    w = np.asarray(lat.weights, dtype=np.int64)
    if lat.nu == 1:
        # single frequency: weights = (+-1,)
        k, rem = divmod(ell, int(w[0]))
        if rem == 0 and abs(k) <= radius:
            return abs(k), (k,)
        raise NotFoundError(f"no representative of coset {ell} within |n|<={radius}")
    for s in range(radius + 1):
        sh = shell(lat.nu, s)
        hit = np.nonzero(sh @ w == ell)[0]
        if hit.size:
            return s, tuple(int(v) for v in sh[hit[0]])
    raise NotFoundError(f"no representative of coset {ell} within |n|<={radius}")


def distance(omega_a, omega_b):
    """l1 distance between two frequency vectors (floats or fractions)."""
    return float(sum(abs(float(a) - float(b)) for a, b in zip(omega_a, omega_b)))
