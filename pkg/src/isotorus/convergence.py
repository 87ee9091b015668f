"""Approximation experiments across rational approximants.

Windowed Hausdorff distances between spectra, gap matching between
approximants, two-sided gap/Fourier checks and the convergence of the
translation flow under frequency refinement.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import frequency as fq
from . import flow as fl
from .errors import ConfigError, NotFoundError
from .hill import n_max_for_energy, spectrum
from .potential import pushforward_periodic


# ---------------------------------------------------------------------------
# windowed spectra and the Hausdorff distance

@dataclass
class SpectrumWindowed:
    window: tuple
    bands: list

    def __post_init__(self):
        a, b = map(float, self.window)
        if not a < b:
            raise ConfigError("window must satisfy a < b")
        bands = sorted((max(float(lo), a), min(float(hi), b)) for lo, hi in self.bands)
        bands = [(lo, hi) for lo, hi in bands if lo <= hi]
        merged = []
        for lo, hi in bands:
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(hi, merged[-1][1]))
            else:
                merged.append((lo, hi))
        self.window = (a, b)
        self.bands = merged

    @property
    def empty(self):
        return not self.bands

    @classmethod
    def from_spectrum(cls, spec, window):
        return cls(tuple(window), spec.bands(tuple(window)))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.bands:
            out |= (x >= lo) & (x <= hi)
        return out

    def dist(self, x):
        """Distance from points x to the set."""
        x = np.asarray(x, dtype=float)
        d = np.full(x.shape, np.inf)
        for lo, hi in self.bands:
            d = np.minimum(d, np.maximum(0.0, np.maximum(lo - x, x - hi)))
        return d

    def to_dict(self):
        return {"window": list(self.window), "bands": [list(b) for b in self.bands]}


def _directed(A, B):
    """sup_{x in A} dist(x, B): attained at endpoints of A or at midpoints of
    the holes of B that fall inside A."""
    pts = [p for band in A.bands for p in band]
    for (_, h0), (h1, _) in zip(B.bands[:-1], B.bands[1:]):
        mid = 0.5 * (h0 + h1)
        if A.contains(mid):
            pts.append(mid)
    return float(np.max(B.dist(np.array(pts))))


def hausdorff_distance(S1, S2):
    """Exact Hausdorff distance of two windowed spectra on the same window.

    An empty set on either side gives the window length.
    """
    if tuple(S1.window) != tuple(S2.window):
        raise ConfigError("spectra live on different windows")
    if S1.empty or S2.empty:
        return float(S1.window[1] - S1.window[0])
    return max(_directed(S1, S2), _directed(S2, S1))


def default_window(ground, span=10.0):
    return (ground - 1.0, ground + span)


def windowed_spectrum(lp, window, tol=1e-8):
    n_max = n_max_for_energy(lp.period, window[1], lp.bounds()[0])
    spec = spectrum(lp, n_max, tol=tol)
    return spec, SpectrumWindowed.from_spectrum(spec, window)


# ---------------------------------------------------------------------------
# spectral scaling across approximants

@dataclass
class ScalingScan:
    rows: list
    pairs: list
    slope: float | None
    C_fit: float | None
    C_drift: bool | None
    window: tuple
    meta: dict = field(default_factory=dict)

    @property
    def decreasing(self):
        d = [p["distance"] for p in self.pairs]
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def bound_holds(self):
        """d <= C_fit (1 + E^(1/4)) |domega|^(1/2) on every pair."""
        if self.C_fit is None:
            return True
        return all(p["ratio"] <= self.C_fit * (1 + 1e-12) for p in self.pairs)

    def passed(self, slope_max=0.7):
        ok_slope = self.slope is None or self.slope <= slope_max
        return self.decreasing and ok_slope and self.bound_holds

    def to_dict(self):
        return {"rows": self.rows, "pairs": self.pairs, "slope": self.slope,
                "C_fit": self.C_fit, "C_drift": self.C_drift, "bound_holds": self.bound_holds,
                "window": list(self.window), "decreasing": self.decreasing, "meta": self.meta}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "r_next", "domega", "distance", "bound_ratio"])
        for p in self.pairs:
            w.writerow([p["r"], p["r_next"], repr(p["domega"]), repr(p["distance"]),
                        repr(p["ratio"])])
        return buf.getvalue()


def approximant_potential(V, r):
    rf = fq.rational_approximation(V.frequency, r)
    lat = fq.build_lattice(rf)
    return pushforward_periodic(V, lat), lat


def spectral_scaling_scan(V, r_list, window=None, tol=1e-8, spectra=None):
    """Hausdorff distances between windowed spectra of consecutive approximants.

    C is fitted as the largest ratio d / ((1 + E_max^(1/4)) |domega|^(1/2));
    ``C_drift`` flags (without failing) a ratio that grows along the list,
    i.e. a constant fitted on the first pair that does not carry over.
    """
    r_list = list(r_list)
    if sorted(r_list) != r_list or len(set(r_list)) != len(r_list):
        raise ConfigError("r_list must be strictly increasing")
    omega = V.frequency.vector
    rows, windowed, lats = [], [], []
    for r in r_list:
        lp, lat = approximant_potential(V, r)
        lats.append(lat)
        if window is None:
            spec0 = spectrum(lp, 1, tol=tol) if spectra is None else spectra[r]
            window = default_window(spec0.ground)
        if spectra is not None and r in spectra:
            spec = spectra[r]
            sw = SpectrumWindowed.from_spectrum(spec, window)
        else:
            spec, sw = windowed_spectrum(lp, window, tol)
        windowed.append(sw)
        rows.append({"r": r, "omega_tilde": [str(f) for f in lat.omega_tilde],
                     "T": lat.period, "domega_limit": fq.distance(omega, lat.omega_tilde),
                     "ground": spec.ground, "n_bands": len(sw.bands)})
    E_scale = 1 + max(abs(window[0]), abs(window[1])) ** 0.25
    pairs = []
    for i in range(len(r_list) - 1):
        a, b = rows[i], rows[i + 1]
        dw = fq.distance(lats[i].omega_tilde, lats[i + 1].omega_tilde)
        d = hausdorff_distance(windowed[i], windowed[i + 1])
        pairs.append({"r": a["r"], "r_next": b["r"], "domega": dw, "distance": d,
                      "ratio": d / (E_scale * math.sqrt(dw)) if dw > 0 else 0.0})
    slope = None
    use = [p for p in pairs if p["distance"] > 0 and p["domega"] > 0]
    if len(use) >= 2:
        x = np.log([p["domega"] for p in use])
        y = np.log([p["distance"] for p in use])
        slope = float(np.polyfit(x, y, 1)[0])
    C_fit = max((p["ratio"] for p in pairs), default=None)
    drift = None
    if len(pairs) >= 2:
        C0 = pairs[0]["ratio"]
        drift = any(p["ratio"] > C0 * (1 + 1e-9) for p in pairs[1:])
    return ScalingScan(rows, pairs, slope, C_fit, drift, tuple(window),
                       {"tol": tol, "E_scale": E_scale})


# ---------------------------------------------------------------------------
# gap matching between approximants

@dataclass
class GapInjectionReport:
    tau: float
    pairs: list
    unmatched: list
    mode: str
    applicable: bool
    lam: float | None = None

    @property
    def injective(self):
        tgt = [p["n_b"] for p in self.pairs]
        return len(tgt) == len(set(tgt))

    def mapping(self):
        return {p["n_a"]: p["n_b"] for p in self.pairs}

    def to_dict(self):
        return {"tau": self.tau, "pairs": self.pairs, "unmatched": self.unmatched,
                "mode": self.mode, "applicable": self.applicable, "lam": self.lam,
                "injective": self.injective}


def matching_shrink(omega, tau, domega, C0=1.0):
    """lambda' = C0 |omega|^2 (log 1/tau)^2 |domega|^(1/2)."""
    w2 = float(np.sum(np.asarray(omega, dtype=float) ** 2))
    return C0 * w2 * math.log(1 / tau) ** 2 * math.sqrt(abs(domega))


def gap_matching(S_a, S_b, tau, mode="containment", omega=None, domega=None, C0=1.0,
                 lattice_a=None, lattice_b=None):
    """Inject the gaps of S_a wider than tau into the gaps of S_b.

    ``containment``: each gap's core [E- + lam, E+ - lam] must lie in a
    unique gap of S_b; if lam >= tau/4 (or no frequency data is given with
    a positive domega) the report is flagged not applicable.
    ``label``: gaps are paired by their minimal coset representative,
    which requires ``lattice_a`` and ``lattice_b``.
    """
    gaps_a = [g for g in S_a.gaps if not g.closed and g.width >= tau]
    gaps_b = [g for g in S_b.gaps if not g.closed]
    pairs, unmatched = [], []
    if mode == "containment":
        lam = 0.0
        if domega:
            if omega is None:
                raise ConfigError("containment matching needs omega when domega > 0")
            lam = matching_shrink(omega, tau, domega, C0)
        if lam >= tau / 4:
            return GapInjectionReport(tau, [], [g.n for g in gaps_a], mode, False, lam)
        Eb_lo = np.array([g.E_minus for g in gaps_b])
        Eb_hi = np.array([g.E_plus for g in gaps_b])
        for g in gaps_a:
            lo, hi = g.E_minus + lam, g.E_plus - lam
            hit = np.nonzero((Eb_lo <= lo) & (Eb_hi >= hi))[0]
            if hit.size == 1:
                h = gaps_b[hit[0]]
                pairs.append({"n_a": g.n, "n_b": h.n,
                              "d_minus": abs(g.E_minus - h.E_minus),
                              "d_plus": abs(g.E_plus - h.E_plus)})
            else:
                unmatched.append(g.n)
        return GapInjectionReport(tau, pairs, unmatched, mode, True, lam)
    if mode == "label":
        if lattice_a is None or lattice_b is None:
            raise ConfigError("label matching needs both lattices")
        by_label = {}
        for h in gaps_b:
            try:
                by_label[_label(h, lattice_b)] = h
            except NotFoundError:
                continue
        for g in gaps_a:
            h = by_label.get(_label(g, lattice_a))
            if h is None:
                unmatched.append(g.n)
                continue
            pairs.append({"n_a": g.n, "n_b": h.n, "label": list(_label(g, lattice_a)),
                          "d_minus": abs(g.E_minus - h.E_minus),
                          "d_plus": abs(g.E_plus - h.E_plus)})
        return GapInjectionReport(tau, pairs, unmatched, mode, True, None)
    raise ConfigError(f"unknown matching mode {mode!r}")


def _label(g, lattice):
    if g.label is None:
        m, rep = fq.quotient_norm(g.n, lattice)
        g.ell, g.qnorm, g.label = g.n, m, rep
    return tuple(g.label)


# ---------------------------------------------------------------------------
# gap widths against Fourier decay

def gap_fourier_check(V, lat, n_max, mmax=4, tol=1e-10, spec=None):
    """Forward: width(m) <= 2 eps exp(-kappa0 |m|/2) for labelled gaps with |m| <= mmax.
    Inverse diagnostic: the decay rate kappa' implied by the widths, and whether
    the stored coefficients satisfy |c(m)| <= sqrt(2 eps) exp(-kappa' |m|/2).
    """
    eps, k0 = V.epsilon, V.kappa0
    lp = pushforward_periodic(V, lat)
    if spec is None:
        spec = spectrum(lp, n_max, tol=tol)
    rows = []
    for g in spec.gaps:
        m, rep = fq.quotient_norm(g.n, lat)
        if m > mmax:
            continue
        bound = 2 * eps * math.exp(-k0 * m / 2)
        rows.append({"n": g.n, "m": m, "label": list(rep), "width": g.width, "bound": bound,
                     "ok": g.width <= bound})
    rates = [-2 * math.log(r["width"] / (2 * eps)) / r["m"] for r in rows if r["width"] > 0]
    kappa_p = min(rates) if rates else k0
    inv = []
    for n, c in V.coeffs.items():
        m = sum(map(abs, n))
        if m == 0:
            continue
        b = math.sqrt(2 * eps) * math.exp(-kappa_p * m / 2)
        inv.append({"n": list(n), "abs": abs(c), "bound": b, "ok": abs(c) <= b})
    return {"forward": rows, "forward_ok": all(r["ok"] for r in rows),
            "kappa_implied": kappa_p, "inverse": inv,
            "inverse_consistent": all(r["ok"] for r in inv)}


def gap_separation_fit(spec, lattice):
    """Fit dist(G_m, other gaps) >= a |m|^(-b): b from the log-log lower hull slope,
    a the largest constant valid for every gap."""
    gaps = [g for g in spec.gaps if not g.closed]
    if len(gaps) < 3:
        return {"a": None, "b": None, "ok": True, "n": len(gaps)}
    lo = np.array([g.E_minus for g in gaps])
    hi = np.array([g.E_plus for g in gaps])
    m = np.array([max(fq.quotient_norm(g.n, lattice)[0], 1) for g in gaps], dtype=float)
    dist = np.empty(len(gaps))
    for i in range(len(gaps)):
        d = np.maximum(lo - hi[i], lo[i] - hi)
        d[i] = np.inf
        dist[i] = d.min()
    x, y = np.log(m), np.log(dist)
    b = max(float(-np.polyfit(x, y, 1)[0]), 0.0) if np.ptp(x) > 0 else 0.0
    a = float(np.min(dist * m ** b))
    return {"a": a, "b": b, "ok": bool(a > 0), "n": len(gaps)}


# ---------------------------------------------------------------------------
# flow convergence under refinement

def fit_stability(t, d, d0):
    """Fit log(d/d0) <= log K + L t: L by least squares, K as the tightest envelope."""
    t = np.asarray(t, dtype=float)
    y = np.log(np.maximum(np.asarray(d, dtype=float), 1e-300) / d0)
    L = float(np.polyfit(t, y, 1)[0]) if np.ptp(t) > 0 else 0.0
    L = max(L, 0.0)
    K = float(np.exp(np.max(y - L * t)))
    resid = float(np.sqrt(np.mean((y - (math.log(K) + L * t)) ** 2)))
    holds = bool(np.all(np.asarray(d) <= K * np.exp(L * t) * d0 * (1 + 1e-12)))
    return {"K": K, "L": L, "rms": resid, "holds": holds}


def _frame(lp, lat, E_cut, tol, gap_min):
    n_max = n_max_for_energy(lp.period, E_cut, lp.bounds()[0])
    spec = spectrum(lp, n_max, tol=tol)
    spec.gaps = [g for g in spec.gaps if g.E_plus <= E_cut]
    gf = fl.GapFrame.from_spectrum(spec, lattice=lat, gap_min=gap_min)
    return spec, gf


@dataclass
class FlowStudy:
    rows: list
    stability: dict
    meta: dict

    def passed(self):
        ok = all(r["deviation"] < r["control"] for r in self.rows)
        dec = all(b["deviation"] <= a["deviation"] for a, b in zip(self.rows, self.rows[1:]))
        return bool(ok and dec and self.stability.get("holds", False))

    def to_dict(self):
        return {"rows": self.rows, "stability": self.stability, "meta": self.meta}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def flow_convergence_study(V, r_list, N=3, T_span=None, E_cut=20.0, tol=1e-10,
                           hill_tol=1e-9, gap_min=1e-8, n_t=801, d0=1e-6, frames=None):
    """Sup-t deviation of the first N angles between consecutive approximants.

    Frames are paired by coset label; the finer frame starts at the coarser
    frame's angles on shared coordinates and at its own Dirichlet data
    elsewhere.  The control run pairs the first N coordinates with a cyclic
    shift of their matches.  Stability: a perturbation of size d0 of the
    coarsest start, fitted by d(t) <= K exp(L t) d0.
    """
    built = {}
    for r in r_list:
        if frames is not None and r in frames:
            built[r] = frames[r]
            continue
        lp, lat = approximant_potential(V, r)
        spec, gf = _frame(lp, lat, E_cut, hill_tol, gap_min)
        s0 = fl.dirichlet_to_torus(lp, gf, tol=hill_tol)
        built[r] = (lp, lat, spec, gf, s0)
    r0 = r_list[0]
    T0 = built[r0][3].period
    if T_span is None:
        T_span = 2 * T0
    t = np.linspace(0.0, T_span, n_t)
    rows = []
    for ra, rb in zip(r_list, r_list[1:]):
        lpa, lata, spa, gfa, sa = built[ra]
        lpb, latb, spb, gfb, sb = built[rb]
        if gfa.N < N:
            raise ConfigError(f"frame r={ra} has only {gfa.N} gaps")
        lab_b = {lab: i for i, lab in enumerate(gfb.labels)}
        match = []
        for i in range(N):
            j = lab_b.get(gfa.labels[i])
            if j is None:
                raise ConfigError(f"gap {gfa.labels[i]} of r={ra} has no partner at r={rb}")
            match.append(j)
        dev = _pair_deviation(gfa, sa, gfb, sb, match, N, t, tol)
        ctrl = _pair_deviation(gfa, sa, gfb, sb, match[1:] + match[:1], N, t, tol)
        rows.append({"r": ra, "r_next": rb, "match": [int(j) for j in match],
                     "labels": [list(gfa.labels[i]) for i in range(N)],
                     "deviation": dev, "control": ctrl,
                     "domega": fq.distance(lata.omega_tilde, latb.omega_tilde)})
    # stability of the coarsest frame
    lpa, lata, spa, gfa, sa = built[r0]
    pert = sa.theta.copy()
    pert[0] += d0 / gfa.xi[0]
    ta = fl.integrate_flow(gfa, sa, (0.0, T_span), tol, t_eval=t)
    tb = fl.integrate_flow(gfa, fl.TorusState(pert), (0.0, T_span), tol, t_eval=t)
    d = fl.torus_distance(gfa, ta.theta, tb.theta)
    stab = fit_stability(t, d, d0)
    meta = {"N": N, "T_span": T_span, "E_cut": E_cut, "tol": tol, "hill_tol": hill_tol,
            "frame_sizes": {str(r): built[r][3].N for r in r_list}}
    return FlowStudy(rows, stab, meta)


def _pair_deviation(gfa, sa, gfb, sb, match, N, t, tol):
    thb = sb.theta.copy()
    for i, j in enumerate(match):
        thb[j] = sa.theta[i]
    ta = fl.integrate_flow(gfa, sa, (t[0], t[-1]), tol, t_eval=t)
    tb = fl.integrate_flow(gfb, fl.TorusState(thb), (t[0], t[-1]), tol, t_eval=t)
    diff = np.abs(ta.theta[:, :N] - tb.theta[:, match])
    return float(np.max(diff.sum(axis=1)))
