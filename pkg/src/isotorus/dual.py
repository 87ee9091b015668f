"""Lattice-dual Bloch operator of a periodic potential.

For a T-periodic q(x) = sum_l c(l) exp(2 pi i x l / T) and quasi-momentum k
the Bloch ansatz psi = exp(2 pi i k x) sum_l phi(l) exp(2 pi i x l / T) turns
-psi'' + q psi = E psi into the Hermitian system

    (2 pi)^2 (xi(l) + k)^2 phi(l) + sum_l' c(l - l') phi(l') = E phi(l),

xi(l) = l / T, truncated to cosets of quotient norm <= R.  Gap edges sit at
k_m = -xi(m)/2, where the diagonal entries of cosets 0 and m coincide.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import frequency as fq
from .errors import AmbiguityError, ConfigError, ResolutionError
from .jacobi import eigh
from .potential import tail_bound

BRANCH_TOL = 1e-8
MAX_DIM = 400


def default_radius(lp, tail_tol=1e-10, max_dim=MAX_DIM):
    """Smallest R with tail_bound <= tail_tol, capped so the matrix stays small."""
    nu = lp.lattice.nu
    kappa0 = lp.kappa0 or 1.0
    R = 1
    while tail_bound(kappa0, lp.alpha0, nu, R) > tail_tol:
        R += 1
    while R > 1 and len(lp.lattice.coset_table(R)[0]) > max_dim:
        R -= 1
    return R


@dataclass
class DualMatrix:
    k: float
    R: int
    ells: np.ndarray
    norms: np.ndarray
    H: np.ndarray
    period: float

    def index(self, ell):
        hit = np.nonzero(self.ells == int(ell))[0]
        if not hit.size:
            raise ResolutionError(f"coset {ell} outside radius {self.R}")
        return int(hit[0])

    @property
    def dim(self):
        return len(self.ells)


def _coeff_matrix(lp, ells):
    d = ells[:, None] - ells[None, :]
    C = np.zeros(d.shape, dtype=complex)
    for ell, c in lp.coeffs.items():
        if ell != 0:
            C[d == ell] = c
    return C


def dual_matrix(lp, k, R=None):
    """Truncated dual matrix on the cosets with quotient norm <= R."""
    if R is None:
        R = default_radius(lp)
    if R < 1:
        raise ConfigError("radius must be >= 1")
    ells, _, norms = lp.lattice.coset_table(int(R))
    C = _coeff_matrix(lp, ells)
    T = lp.period
    diag = (2 * np.pi) ** 2 * (ells / T + k) ** 2 + lp.coeffs.get(0, 0.0).real
    H = C + np.diag(diag)
    return DualMatrix(float(k), int(R), ells, norms, H, T)


@dataclass
class BlochBranch:
    k: float
    E: float
    ells: np.ndarray
    coeffs: np.ndarray
    period: float
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def phi(self):
        return dict(zip(self.ells.tolist(), self.coeffs))

    def psi(self, x):
        """Bloch solution exp(2 pi i k x) sum_l phi(l) exp(2 pi i x l / T)."""
        x = np.asarray(x, dtype=float)
        ph = np.exp(2j * np.pi * np.multiply.outer(x, self.ells / self.period + self.k))
        return ph @ self.coeffs

    def psi_derivatives(self, x):
        """(psi, psi'') at x."""
        x = np.asarray(x, dtype=float)
        f = self.ells / self.period + self.k
        ph = np.exp(2j * np.pi * np.multiply.outer(x, f))
        return ph @ self.coeffs, ph @ (-(2 * np.pi * f) ** 2 * self.coeffs)


def resonances(lattice, R):
    """Resonant quasi-momenta k_m = -xi(m)/2 for the cosets m in the table."""
    ells = lattice.coset_table(R)[0]
    return -ells[ells != 0] / (2 * lattice.period)


def floquet_branch(dm, guard=1e-6):
    """Eigenpair with maximal weight on coset 0, scaled to phi(0) = 1."""
    ells = dm.ells
    km = -ells[ells != 0] / (2 * dm.period)
    if km.size and np.min(np.abs(km - dm.k)) < guard:
        raise ConfigError(f"k={dm.k} is within {guard:g} of a resonance; use gap_edges_dual")
    w, V = eigh(dm.H)
    i0 = dm.index(0)
    ov = np.abs(V[i0, :])
    j = int(np.argmax(ov))
    # tie-break toward the lower eigenvalue (argmax picks the first, eigenvalues ascend)
    E = float(w[j])
    near = np.nonzero((np.abs(w - E) <= BRANCH_TOL * (1 + abs(E))) & (np.arange(len(w)) != j))[0]
    if near.size:
        raise AmbiguityError(f"two branches within {BRANCH_TOL:g} at k={dm.k}",
                             candidates=[E] + [float(w[i]) for i in near])
    v = V[:, j] / V[i0, j]
    res = float(np.linalg.norm(dm.H @ v - E * v))
    if res > BRANCH_TOL * (1 + abs(E)):
        raise AmbiguityError(f"branch residual {res:.3g} above tolerance", candidates=[E])
    return BlochBranch(dm.k, E, ells.copy(), v, dm.period, res,
                       {"R": dm.R, "dim": dm.dim, "overlap": float(ov[j])})


def _resonant_pair(dm, ell):
    w, V = eigh(dm.H)
    i0, im = dm.index(0), dm.index(ell)
    weight = np.abs(V[i0, :]) ** 2 + np.abs(V[im, :]) ** 2
    order = np.argsort(weight)[::-1]
    a, b, third = order[0], order[1], weight[order[2]] if len(order) > 2 else 0.0
    if weight[b] < 0.5 or third > 0.5 * weight[b]:
        raise ResolutionError(f"radius {dm.R} cannot separate the resonant pair of coset {ell}")
    lo, hi = sorted((float(w[a]), float(w[b])))
    return lo, hi


def _coset(lp, m):
    if isinstance(m, (tuple, list, np.ndarray)):
        return fq.coset_index(m, lp.lattice)
    return int(m)


def gap_edges_dual(lp, m, R=None):
    """Edges (E-, E+) of the gap labelled by coset m, at k_m = -xi(m)/2."""
    ell = _coset(lp, m)
    if ell == 0:
        raise ConfigError("coset 0 carries no gap")
    if R is None:
        R = default_radius(lp)
    dm = dual_matrix(lp, -ell / (2 * lp.period), R)
    return _resonant_pair(dm, ell)


def edge_limits(lp, m, R=None, steps=None):
    """One-sided limits of the two resonant eigenvalues at k_m by Richardson.

    Near k_m each branch is even in k - k_m, with expansion parameter
    (s h / width)^2 where s = (2 pi)^2 2 |xi(m)| is the slope of the diagonal
    splitting, so the default steps are width / (20 s) and half of it.  The
    two samples are extrapolated in h^2.  Returns the extrapolated pair from
    the left and from the right.
    """
    ell = _coset(lp, m)
    if R is None:
        R = default_radius(lp)
    km = -ell / (2 * lp.period)
    if steps is None:
        lo, hi = gap_edges_dual(lp, ell, R)
        slope = (2 * np.pi) ** 2 * 2 * abs(ell) / lp.period
        h1 = max(hi - lo, 1e-300) / (20 * slope)
        steps = (h1, h1 / 2)
    h1, h2 = steps
    out = []
    for side in (-1, 1):
        vals = [np.array(_resonant_pair(dual_matrix(lp, km + side * h, R), ell)) for h in steps]
        ext = (h1 ** 2 * vals[1] - h2 ** 2 * vals[0]) / (h1 ** 2 - h2 ** 2)
        out.append(tuple(float(v) for v in ext))
    return out


@dataclass
class CrossCheck:
    matched: list
    unmatched_hill: list
    unmatched_dual: list
    max_discrepancy: float
    tol: float
    R: int

    @property
    def passed(self):
        return not self.unmatched_hill and not self.unmatched_dual and self.max_discrepancy <= self.tol

    def to_dict(self):
        return {"matched": self.matched, "unmatched_hill": self.unmatched_hill,
                "unmatched_dual": self.unmatched_dual,
                "max_discrepancy": self.max_discrepancy, "tol": self.tol, "R": self.R,
                "passed": self.passed}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def crosscheck_hill(lp, n_max, R=None, tol=1e-5, width_min=1e-6, qmax=None,
                    hill_tol=1e-10, spec=None):
    """Match dual gaps (coset m) with Hill gaps (index n = |l(m)|).

    Hill gaps wider than ``width_min`` with n <= n_max must have a dual
    partner within ``tol`` per edge; dual gaps from cosets with quotient
    norm <= ``qmax`` (default R - 3, away from the truncation boundary) wider than ``width_min`` must have a
    Hill partner.  Failures are reported, not raised.
    """
    from .hill import spectrum
    if R is None:
        R = default_radius(lp)
    if qmax is None:
        qmax = max(R - 3, 1)
    if spec is None:
        spec = spectrum(lp, n_max, tol=hill_tol)
    hill = {g.n: g for g in spec.gaps if g.n <= n_max and g.width >= width_min}
    ells, _, norms = lp.lattice.coset_table(R)
    cand = {int(e): int(s) for e, s in zip(ells, norms) if 0 < e <= n_max and s <= qmax}
    matched, un_h, un_d, worst = [], [], [], 0.0
    dual = {}
    for ell in sorted(set(cand) | set(hill)):
        if ell not in cand:
            continue
        try:
            dual[ell] = gap_edges_dual(lp, ell, R)
        except ResolutionError:
            continue
    for n, g in sorted(hill.items()):
        if n not in dual:
            un_h.append({"n": n, "edges": [g.E_minus, g.E_plus], "reason": "no dual coset"})
            continue
        lo, hi = dual[n]
        d = max(abs(lo - g.E_minus), abs(hi - g.E_plus))
        worst = max(worst, d)
        rec = {"n": n, "m": list(fq.quotient_norm(n, lp.lattice)[1]),
               "hill": [g.E_minus, g.E_plus], "dual": [lo, hi], "discrepancy": d}
        (matched if d <= tol else un_h).append(rec)
    for ell, (lo, hi) in sorted(dual.items()):
        if hi - lo >= width_min and ell not in hill:
            un_d.append({"m": ell, "dual": [lo, hi], "width": hi - lo})
    return CrossCheck(matched, un_h, un_d, worst, tol, R)


def branch_csv(branches, path=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "E", "residual"])
    for b in branches:
        w.writerow([repr(b.k), repr(b.E), repr(b.residual)])
    if path is not None:
        with open(path, "w") as fh:
            fh.write(buf.getvalue())
    return buf.getvalue()


def gap_report_json(lp, cosets, R=None):
    """JSON list of dual gap edges for the given cosets."""
    rows = []
    for m in cosets:
        ell = _coset(lp, m)
        lo, hi = gap_edges_dual(lp, ell, R)
        rows.append({"ell": ell, "E_minus": lo, "E_plus": hi, "width": hi - lo})
    return json.dumps(rows, sort_keys=True, indent=1)
