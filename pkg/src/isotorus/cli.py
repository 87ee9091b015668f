"""Command-line entry point.

    python3 -m isotorus <command> --config cfg.json --out outdir [--tol x] [--threads n]

Commands: approx, spectrum, flow, reconstruct, study-scaling, study-gaps,
study-flow.  Every command writes JSON/CSV artifacts and a manifest.json
with the canonical config, its SHA-256 hash and library versions.  Exit
status: 0 success, 2 configuration error, 3 numerical failure,
4 cross-validation failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import convergence as cv
from . import dual
from . import flow as fl
from . import frequency as fq
from . import hill
from .errors import ConfigError, NumericalError
from .potential import (FourierPotential, LatticePotential, lame_potential,
                        pushforward_periodic, random_potential)

COMMANDS = ("approx", "spectrum", "flow", "reconstruct", "study-scaling", "study-gaps",
            "study-flow")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_XVAL = 0, 2, 3, 4


class CrossValidationFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# config

@dataclass
class RunConfig:
    command: str
    raw: dict
    out: Path
    tol: float = 1e-10
    threads: int | None = None
    knobs: dict = field(default_factory=dict)

    @property
    def canonical(self):
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical.encode()).hexdigest()


_KNOBS = {
    "r": (int, lambda v: v >= 1), "R": (int, lambda v: v >= 1),
    "n_max": (int, lambda v: v >= 1), "N_cut": (int, lambda v: v >= 0),
    "N": (int, lambda v: v >= 1), "tol": (float, lambda v: 0 < v < 1e-2),
    "t_span": (float, lambda v: math.isfinite(v) and v > 0),
    "n_t": (int, lambda v: v >= 2), "gap_min": (float, lambda v: v > 0),
    "tau": (float, lambda v: 0 < v < 1), "E_cut": (float, math.isfinite),
    "mmax": (int, lambda v: v >= 1), "seed": (int, lambda v: True),
}


def validate(raw):
    """Check every knob before any computation."""
    out = {}
    for k, (typ, ok) in _KNOBS.items():
        if k in raw and raw[k] is not None:
            try:
                v = typ(raw[k])
            except (TypeError, ValueError):
                raise ConfigError(f"knob {k!r} must be {typ.__name__}")
            if not ok(v):
                raise ConfigError(f"knob {k!r}={raw[k]!r} out of range")
            out[k] = v
    if "window" in raw and raw["window"] is not None:
        w = raw["window"]
        if len(w) != 2 or not float(w[0]) < float(w[1]):
            raise ConfigError("window must be [a, b] with a < b")
        out["window"] = (float(w[0]), float(w[1]))
    if "r_list" in raw:
        rl = [int(v) for v in raw["r_list"]]
        if not rl or sorted(set(rl)) != rl or rl[0] < 1:
            raise ConfigError("r_list must be strictly increasing positive integers")
        out["r_list"] = rl
    return out


def load_config(command, path, out, tol=None, threads=None):
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "command" in raw and raw["command"] != command:
        raise ConfigError(f"config is for {raw['command']!r}, not {command!r}")
    raw = dict(raw)
    if tol is not None:
        raw["tol"] = tol
    knobs = validate(raw)
    if threads is not None and threads < 1:
        raise ConfigError("--threads must be >= 1")
    return RunConfig(command, raw, Path(out), knobs.get("tol", 1e-10), threads, knobs)


def build_frequency(d):
    if isinstance(d, list):
        return fq.Frequency.parse(d)
    return fq.Frequency.from_dict(d)


def build_potential(raw):
    """(quasi-periodic V or None, periodic LatticePotential or None, lattice)."""
    p = raw.get("potential")
    if p is None:
        raise ConfigError("config needs a 'potential' entry")
    kind = p.get("type", "fourier")
    if kind == "zero":
        lp = LatticePotential.constant(0.0, p.get("T", 1))
        return None, lp, lp.lattice
    if kind == "cosine":
        lp = LatticePotential.cosine(float(p["epsilon"]), p.get("T", 1), int(p.get("harmonic", 1)))
        return None, lp, lp.lattice
    if kind == "lame":
        lp = lame_potential(float(p["k"]), int(p.get("ell", 2)), p.get("T", 1))
        return None, lp, lp.lattice
    if kind == "lattice":
        lp = LatticePotential.from_dict(p)
        return None, lp, lp.lattice
    if kind in ("fourier", "random"):
        freq = build_frequency(raw["frequency"]) if "frequency" in raw else None
        if kind == "random":
            if freq is None:
                raise ConfigError("random potential needs a 'frequency' entry")
            V = random_potential(freq, float(p["epsilon"]), float(p.get("kappa0", 1.0)),
                                 int(p.get("support", 3)), int(p.get("seed", 0)),
                                 float(p.get("alpha0", 1.0)), real=bool(p.get("real", False)))
        else:
            V = FourierPotential.from_dict(p, None)
            if freq is not None and not np.allclose(V.omega, freq.vector, rtol=0, atol=1e-15):
                raise ConfigError("potential omega_ref does not match the config frequency")
            if freq is not None:
                V = V.with_frequency(freq)
        if not isinstance(V.frequency, fq.Frequency):
            raise ConfigError("quasi-periodic potentials need a Frequency reference")
        lp = lat = None
        if "r" in raw:
            rf = fq.rational_approximation(V.frequency, int(raw["r"]))
            lat = fq.build_lattice(rf)
            lp = pushforward_periodic(V, lat)
        return V, lp, lat
    raise ConfigError(f"unknown potential type {kind!r}")


# ---------------------------------------------------------------------------
# artifacts

def _plain(o):
    if isinstance(o, dict):
        return {str(k): _plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_plain(v) for v in o]
    if isinstance(o, np.ndarray):
        return _plain(o.tolist())
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, float) and not math.isfinite(o):
        return repr(o)
    return o


class Writer:
    def __init__(self, cfg):
        self.cfg = cfg
        self.files = []
        cfg.out.mkdir(parents=True, exist_ok=True)

    def json(self, name, obj):
        obj = dict(_plain(obj), config_hash=self.cfg.hash)
        (self.cfg.out / name).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")
        self.files.append(name)

    def csv(self, name, text):
        (self.cfg.out / name).write_text(f"# config_hash={self.cfg.hash}\n" + text)
        self.files.append(name)

    def manifest(self, status, extra=None):
        import mpmath
        import numba
        import scipy
        man = {"command": self.cfg.command, "config": self.cfg.raw,
               "config_hash": self.cfg.hash, "knobs": _plain(self.cfg.knobs),
               "tol": self.cfg.tol, "threads": self.cfg.threads, "status": status,
               "artifacts": sorted(self.files),
               "versions": {"isotorus": __version__, "python": platform.python_version(),
                            "numpy": np.__version__, "scipy": scipy.__version__,
                            "numba": numba.__version__, "mpmath": mpmath.__version__}}
        if extra:
            man.update(_plain(extra))
        (self.cfg.out / "manifest.json").write_text(json.dumps(man, sort_keys=True, indent=1) + "\n")


def _rows_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands

def cmd_approx(cfg, out):
    freq = build_frequency(cfg.raw["frequency"])
    r_list = cfg.knobs.get("r_list", [cfg.knobs.get("r", 10)])
    rows = []
    for r in r_list:
        rf = fq.rational_approximation(freq, r)
        lat = fq.build_lattice(rf)
        box = fq.box_condition(freq, rf)
        rows.append({"r": r, "omega_tilde": [str(f) for f in rf.fractions],
                     "tau0": str(lat.tau0), "T": str(lat.T), "weights": list(lat.weights),
                     "null_basis": [list(v) for v in lat.null_basis],
                     "distance": fq.distance(freq.vector, rf.vector),
                     "lemma_bounds": fq.lemma_bounds(freq, rf),
                     "box": {"R0bar": box.R0bar, "passed": box.passed}})
    dio = fq.check_diophantine(freq, int(cfg.raw.get("diophantine_R", 20)))
    out.json("approx.json", {"frequency": freq.to_dict(), "approximants": rows,
                             "diophantine": {"ratio": dio.ratio, "worst_n": dio.worst_n,
                                             "passed": dio.passed, "R": dio.R}})
    out.csv("approx.csv", _rows_csv(["r", "omega_tilde", "T", "distance"],
                                    [(r["r"], " ".join(r["omega_tilde"]), r["T"], r["distance"])
                                     for r in rows]))
    return {}


def _n_max(cfg, lp):
    if "n_max" in cfg.knobs:
        return cfg.knobs["n_max"]
    if "E_cut" in cfg.knobs:
        return hill.n_max_for_energy(lp.period, cfg.knobs["E_cut"], lp.bounds()[0])
    return 20


def _require_periodic(lp):
    if lp is None:
        raise ConfigError("this command needs a periodic potential (give 'r' for a quasi-periodic one)")
    return lp


def cmd_spectrum(cfg, out):
    V, lp, lat = build_potential(cfg.raw)
    lp = _require_periodic(lp)
    n_max = _n_max(cfg, lp)
    spec = hill.spectrum(lp, n_max, tol=cfg.tol)
    if lat is not None:
        hill.label_gaps(spec, lat)
    out.json("spectrum.json", spec.to_dict())
    out.csv("spectrum.csv", spec.to_csv())
    status = {}
    if cfg.raw.get("crosscheck", True):
        R = cfg.knobs.get("R", None)
        cc = dual.crosscheck_hill(lp, n_max, R=R, tol=float(cfg.raw.get("xval_tol", 1e-5)),
                                  qmax=cfg.raw.get("qmax"), spec=spec)
        out.json("crosscheck.json", cc.to_dict())
        status["crosscheck_passed"] = cc.passed
        if not cc.passed:
            raise CrossValidationFailure(status)
    return status


def _frame_and_state(cfg, lp, lat):
    spec = hill.spectrum(lp, _n_max(cfg, lp), tol=cfg.tol)
    gf = fl.GapFrame.from_spectrum(spec, lattice=lat, gap_min=cfg.knobs.get("gap_min", 1e-8),
                                   N=cfg.raw.get("frame_size"))
    s0 = cfg.raw.get("s0", "dirichlet")
    if s0 == "dirichlet":
        st = fl.dirichlet_to_torus(lp, gf, tol=cfg.tol)
    else:
        th = np.asarray(s0, dtype=float)
        if th.size != gf.N:
            raise ConfigError(f"s0 has {th.size} angles, frame has {gf.N}")
        st = fl.TorusState(th)
    return spec, gf, st


def cmd_flow(cfg, out):
    V, lp, lat = build_potential(cfg.raw)
    lp = _require_periodic(lp)
    spec, gf, s0 = _frame_and_state(cfg, lp, lat)
    N_cut = cfg.knobs.get("N_cut", gf.N)
    if N_cut > gf.N:
        raise ConfigError(f"N_cut={N_cut} exceeds the {gf.N} open gaps")
    t_span = cfg.knobs.get("t_span", gf.period)
    t = np.linspace(0.0, t_span, cfg.knobs.get("n_t", 201))
    tr = fl.integrate_flow(gf, s0, (0.0, t_span), tol=min(cfg.tol, 1e-8), N_cut=N_cut, t_eval=t)
    out.json("frame.json", gf.to_dict())
    out.json("state.json", json.loads(s0.to_json()))
    out.json("state_final.json", json.loads(tr.state(-1).to_json()))
    out.csv("trajectory.csv", tr.to_csv())
    return {}


def cmd_reconstruct(cfg, out):
    V, lp, lat = build_potential(cfg.raw)
    lp = _require_periodic(lp)
    spec, gf, s0 = _frame_and_state(cfg, lp, lat)
    th = s0.theta.copy()
    for k, v in (cfg.raw.get("move") or {}).items():
        i = int(k)
        if not 0 <= i < gf.N:
            raise ConfigError(f"move index {i} outside the frame")
        th[i] += float(v)
    s = fl.TorusState(th)
    eps = V.epsilon if V is not None else lp.epsilon
    k0 = V.kappa0 if V is not None else (lp.kappa0 or 1.0)
    img = fl.isospectral_map(gf, s, epsilon=eps, kappa0=k0, tol=min(cfg.tol, 1e-8),
                             lattice=lat)
    spec2 = hill.spectrum(img.potential, _n_max(cfg, lp), tol=cfg.tol)
    ref = {g.n: g for g in spec.gaps}
    dev = [max(abs(g.E_minus - ref[g.n].E_minus), abs(g.E_plus - ref[g.n].E_plus))
           for g in spec2.gaps if g.n in ref]
    iso = {"max_edge_deviation": max(dev, default=0.0),
           "gaps_original": len(spec.gaps), "gaps_reconstructed": len(spec2.gaps)}
    coeffs = [{"l": k, "re": c.real, "im": c.imag} for k, c in sorted(img.coeffs.items())]
    out.json("reconstruct.json", {"state": [float(v) for v in s.theta], "coeffs": coeffs,
                                  "radius": img.radius, "decay": img.decay,
                                  "decay_ok": img.decay_ok(), "isospectral": iso})
    step = max(1, (img.t.size - 1) // 2000)
    out.csv("samples.csv", _rows_csv(["t", "Q"], zip(img.t[::step].tolist(),
                                                     img.Q[::step].tolist())))
    return {"decay_ok": img.decay_ok(), "isospectral_deviation": iso["max_edge_deviation"]}


def _quasi(cfg):
    V, _, _ = build_potential({k: v for k, v in cfg.raw.items() if k != "r"})
    if V is None:
        raise ConfigError("studies need a quasi-periodic potential")
    return V


def cmd_study_scaling(cfg, out):
    V = _quasi(cfg)
    sc = cv.spectral_scaling_scan(V, cfg.knobs.get("r_list", [10, 20, 50]),
                                  cfg.knobs.get("window"), tol=min(cfg.tol, 1e-8))
    out.json("scaling.json", sc.to_dict())
    out.csv("scaling.csv", sc.to_csv())
    return {"passed": sc.passed()}


def cmd_study_gaps(cfg, out):
    V = _quasi(cfg)
    r_list = cfg.knobs.get("r_list", [10, 20])
    tau = cfg.knobs.get("tau", 1e-3)
    mmax = cfg.knobs.get("mmax", 4)
    E_cut = cfg.knobs.get("E_cut", 10.0)
    specs, lats = {}, {}
    for r in r_list:
        lp, lat = cv.approximant_potential(V, r)
        specs[r] = hill.spectrum(lp, hill.n_max_for_energy(lp.period, E_cut, lp.bounds()[0]),
                                 tol=cfg.tol)
        hill.label_gaps(specs[r], lat)
        lats[r] = lat
    report = {"fourier": {}, "matching": [], "separation": {}}
    for r in r_list:
        report["fourier"][str(r)] = cv.gap_fourier_check(V, lats[r], None, mmax, spec=specs[r])
        report["separation"][str(r)] = cv.gap_separation_fit(specs[r], lats[r])
    for ra, rb in zip(r_list, r_list[1:]):
        dw = fq.distance(lats[ra].omega_tilde, lats[rb].omega_tilde)
        cont = cv.gap_matching(specs[ra], specs[rb], tau, "containment", V.frequency.vector, dw)
        lab = cv.gap_matching(specs[ra], specs[rb], tau, "label", lattice_a=lats[ra],
                              lattice_b=lats[rb])
        report["matching"].append({"r": ra, "r_next": rb, "containment": cont.to_dict(),
                                   "label": lab.to_dict()})
    out.json("gaps.json", report)
    rows = [(r, f["n"], f["m"], f["width"], f["bound"], f["ok"])
            for r in r_list for f in report["fourier"][str(r)]["forward"]]
    out.csv("gaps.csv", _rows_csv(["r", "n", "m", "width", "bound", "ok"], rows))
    return {"forward_ok": all(report["fourier"][str(r)]["forward_ok"] for r in r_list)}


def cmd_study_flow(cfg, out):
    V = _quasi(cfg)
    st = cv.flow_convergence_study(V, cfg.knobs.get("r_list", [10, 20]), N=cfg.knobs.get("N", 3),
                                   T_span=cfg.knobs.get("t_span"),
                                   E_cut=cfg.knobs.get("E_cut", 20.0), tol=min(cfg.tol, 1e-8),
                                   hill_tol=max(cfg.tol, 1e-9))
    out.json("flow_study.json", st.to_dict())
    out.csv("flow_study.csv", _rows_csv(["r", "r_next", "deviation", "control"],
                                        [(r["r"], r["r_next"], r["deviation"], r["control"])
                                         for r in st.rows]))
    return {"passed": st.passed()}


HANDLERS = {"approx": cmd_approx, "spectrum": cmd_spectrum, "flow": cmd_flow,
            "reconstruct": cmd_reconstruct, "study-scaling": cmd_study_scaling,
            "study-gaps": cmd_study_gaps, "study-flow": cmd_study_flow}


def run(cfg):
    """Execute one command; returns the exit status."""
    if cfg.threads:
        import numba
        with warnings.catch_warnings():
            # probing the threading layer may warn about an old TBB; the kernels are serial
            warnings.simplefilter("ignore", numba.NumbaWarning)
            numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))
    out = Writer(cfg)
    try:
        extra = HANDLERS[cfg.command](cfg, out)
    except CrossValidationFailure as e:
        out.manifest("cross-validation failure", e.args[0] if e.args else None)
        return EXIT_XVAL
    except ConfigError as e:
        out.manifest("config error", {"error": str(e)})
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        out.manifest("numerical failure", {"error": f"{type(e).__name__}: {e}"})
        print(f"numerical failure ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_NUMERIC
    out.manifest("ok", extra)
    return EXIT_OK


def main(argv=None):
    ap = argparse.ArgumentParser(prog="isotorus", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default="out")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--tol", type=float, default=None)
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.command, args.config, args.out, args.tol, args.threads)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg)
    except (KeyError, TypeError, ValueError) as e:
        print(f"config error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
