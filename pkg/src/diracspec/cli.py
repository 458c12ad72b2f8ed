"""diracspec command line.

Every subcommand reads its options from flags, from an INI file (section
``[common]`` then the section named after the subcommand, keys spelled like
the flags without the leading dashes), or from defaults, in that order of
precedence. Results go to ``<out>/<subcommand>.<csv|json>``; ``<out>`` is
``--out``, else $DIRACSPEC_OUT, else the working directory. A short summary
is printed to stdout.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 invariant violation.
"""

import argparse
import configparser
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import ArgumentError, DiracSpecError, DomainError, InvariantViolation, NumericalError
from .export import csv_text, fmt, json_text

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INVARIANT = 0, 2, 3, 4
DET_DRIFT = 1e-8


# --- option parsing ------------------------------------------------------------------


def _floats(text):
    try:
        return [float(v) for v in str(text).replace(" ", "").split(",") if v != ""]
    except ValueError:
        raise ValueError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ValueError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _range(text):
    """a:b:step -> a + i step for i = 0..round((b - a)/step)."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ValueError(f"expected start:stop:step, got {text!r}")
    a, b, step = (float(p) for p in parts)
    if not (step > 0 and math.isfinite(a) and math.isfinite(b) and b >= a):
        raise ValueError(f"need finite start <= stop and a positive step, got {text!r}")
    n = int(round((b - a) / step))
    if n > 10_000_000:
        raise ValueError(f"range {text!r} has too many points")
    return [a + step * i for i in range(n + 1)]


def _mollify(text):
    t = str(text).strip().lower()
    if t == "auto":
        return None
    if t in ("on", "true", "yes"):
        return True
    if t in ("off", "false", "no"):
        return False
    w = float(t)
    if not w > 0:
        raise ValueError("mollifier width must be positive")
    return w


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _positive(cast):
    def conv(text):
        v = cast(text)
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"must be positive and finite, got {text!r}")
        return v
    return conv


POS = _positive(float)
POSINT = _positive(int)

# (flag, type, default, help); flags are shared by every subcommand listing them
OPTIONS = {
    "eta": (str, "sin(2*pi*r)", "radial or layered profile expression"),
    "q": (str, None, "potential expression (r, t or x1..xd)"),
    "d": (int, 3, "dimension (2 or 3)"),
    "h": (POS, None, "grid spacing"),
    "L": (POS, None, "grid half-width"),
    "tol": (POS, 1e-10, "integration / quadrature tolerance"),
    "lambda": (float, None, "spectral parameter"),
    "lambda-list": (_floats, None, "comma-separated spectral parameters"),
    "lambda-range": (_range, "-3:3:0.01", "spectral grid start:stop:step"),
    "p": (POS, 1.0, "period"),
    "k": (float, 1.0, "angular index"),
    "k-list": (_floats, None, "comma-separated angular indices"),
    "direction": (_floats, None, "unit direction k, comma-separated"),
    "center": (_floats, None, "center a_n, comma-separated"),
    "j": (POSINT, 1, "period index of the monodromy"),
    "R": (POS, None, "outer radius"),
    "R-max": (POS, 1e4, "outer radius of the probe"),
    "R-list": (_floats, "100,1000,10000,100000", "radii for the mass growth"),
    "r0": (POS, None, "start radius"),
    "N": (POSINT, 2000, "number of cells"),
    "scheme": (str, "staggered", "staggered or collocated"),
    "window-starts": (_floats, "100,200,400,800", "tail window starts"),
    "window-len": (POS, 100.0, "tail window length"),
    "bins": (POSINT, 200, "histogram bins"),
    "n-list": (_ints, "0,1,2,3", "sequence indices"),
    "radius0": (POS, 8.0, "r_n = radius0 * 2^n"),
    "mollify": (_mollify, "auto", "auto, on, off or a width"),
    "chi": (str, "poly", "bump profile: poly or exp"),
    "phi": (str, "(x1^2+x2^2+x3^2)/{r}^1.5", "distortion; {r} is replaced by r_n"),
    "field": (str, "zero-mode", "zero-mode, zero-resonance or plane-wave"),
    "scales": (_floats, "4,8,16,32,64", "cutoff scales n"),
    "density": (POS, 32.0, "grid nodes per unit length"),
    "levels": (POSINT, 3, "refinement levels"),
    "integral": (_bool, "true", "also report the virial integral of the field"),
    "points": (POSINT, 16, "self-test points"),
    "kind": (str, None, "potential kind (cartesian, radial, layered)"),
}

SUBCOMMANDS = {
    "zero-mode": (["h", "L", "tol"], {"h": 0.05, "L": 4.0, "tol": 1e-3}, "3D zero mode residual and norm"),
    "zero-resonance": (["h", "L", "R-list", "tol"], {"h": 0.025, "L": 4.0, "tol": 1e-3},
                       "2D zero resonance residual and mass growth"),
    "layered": (["eta", "d", "direction", "lambda", "h", "L", "tol"],
                {"eta": "sin(t)", "lambda": 0.37, "h": 0.05, "L": 1.0, "tol": 1e-4},
                "layered eigensolution residual"),
    "bands": (["eta", "p", "lambda-range", "tol"], {"tol": 1e-12}, "discriminant and band classification"),
    "monodromy": (["eta", "p", "k", "lambda-list", "j", "tol"], {"lambda-list": [0.3, 0.7, 2.5], "k": 0.0},
                  "monodromy matrices against the free closed form"),
    "boundedness": (["eta", "p", "k", "lambda", "R-max", "tol"], {"lambda": 0.4 * math.pi},
                    "window maxima of the fundamental matrix"),
    "bv-check": (["eta", "lambda", "r0", "R"], {"lambda": 0.4 * math.pi, "r0": 1.0, "R": 1024.0},
                 "total variation of 1/(r(lambda - eta) - 1)"),
    "limit-range": (["eta", "window-starts", "window-len", "bins"], {}, "asymptotic value set of eta"),
    "weyl-planar": (["q", "d", "lambda", "n-list", "radius0", "h", "direction", "center", "eta", "mollify", "chi"],
                    {"q": "sin(t)", "lambda": 0.37, "h": 0.5, "eta": None}, "planar Weyl sequence residuals"),
    "weyl-distorted": (["q", "d", "lambda", "n-list", "radius0", "h", "direction", "center", "eta", "mollify", "chi",
                        "phi"],
                       {"q": "sin(t)", "lambda": 0.37, "h": 0.5, "eta": None}, "distorted Weyl sequence residuals"),
    "schnol": (["field", "q", "lambda", "scales", "direction", "tol"], {"lambda": 0.0}, "cutoff sequence residuals"),
    "mass-ratio": (["field", "lambda", "scales", "direction", "tol"],
                   {"lambda": 0.0, "scales": [1, 2, 4, 8, 16, 32, 64]}, "ball masses and ratios"),
    "virial": (["q", "d", "R", "density", "levels", "integral", "field"],
               {"q": "-3/(1+r^2)", "R": 10.0}, "virial bounds and integral"),
    "radial-eig": (["eta", "k", "k-list", "R", "N", "scheme"], {"eta": "-3/(1+r^2)", "R": 60.0},
                   "truncated radial operator spectrum"),
    "parse-check": (["q", "d", "kind", "points"], {"q": "-3/(1+r^2)"}, "parse, print and gradient self-test"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="diracspec", description="Spectral analysis of massless Dirac operators")
    parser.add_argument("--version", action="version", version=f"diracspec {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    for name, (keys, _, help_text) in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="INI file with [common] and [%s] sections" % name)
        p.add_argument("--out", help="output directory (default $DIRACSPEC_OUT or .)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--jobs", type=int, default=None, help="worker threads for independent items")
        p.add_argument("--dry-run", action="store_true", help="validate and print the plan only")
        for key in keys:
            # values stay text here so that file and flag values go through the same conversion
            p.add_argument(f"--{key}", dest=key.replace("-", "_"), default=None, help=OPTIONS[key][2])
    return parser


def _convert(key, raw):
    cast = OPTIONS[key][0]
    if raw is None or not isinstance(raw, str):
        return raw
    try:
        return cast(raw)
    except (TypeError, ValueError) as err:
        raise ArgumentError(f"invalid value for {key}: {err}", key=key) from None


def resolve(args):
    """Merge defaults, config file and flags into a plain dict of typed values."""
    keys, overrides, _ = SUBCOMMANDS[args.command]
    file_vals, common = {}, {}
    if args.config:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            with open(args.config) as fh:
                cp.read_file(fh)
        except OSError as err:
            raise ArgumentError(f"cannot read config file: {err}", key="config") from None
        except configparser.Error as err:
            raise ArgumentError(f"malformed config file: {err}", key="config") from None
        allowed = set(keys) | {"out", "format", "jobs"}
        for section in ("common", args.command):
            if cp.has_section(section):
                for key, val in cp.items(section):
                    key = key.replace("_", "-")
                    if key not in allowed:
                        if section == args.command:
                            raise ArgumentError(f"unknown key {key!r} in section [{section}]", key=key)
                        continue
                    (common if section == "common" else file_vals)[key] = val
    merged = {**common, **file_vals}
    cfg = {}
    for key in keys:
        flag = getattr(args, key.replace("-", "_"))
        if flag is not None:
            raw = flag
        elif key in merged:
            raw = merged[key]
        elif key in overrides:
            raw = overrides[key]
        else:
            raw = OPTIONS[key][1]
        cfg[key] = _convert(key, raw)
    cfg["format"] = args.format or merged.get("format", "csv")
    if cfg["format"] not in ("csv", "json"):
        raise ArgumentError(f"format must be csv or json, got {cfg['format']!r}", key="format")
    jobs = args.jobs if args.jobs is not None else merged.get("jobs", 1)
    try:
        cfg["jobs"] = int(jobs)
    except ValueError:
        raise ArgumentError(f"jobs must be an integer, got {jobs!r}", key="jobs") from None
    if cfg["jobs"] < 1:
        raise ArgumentError("jobs must be at least 1", key="jobs")
    cfg["out"] = args.out or merged.get("out") or os.environ.get("DIRACSPEC_OUT") or "."
    return cfg


# --- helpers ---------------------------------------------------------------------------


def _require(cfg, key):
    if cfg.get(key) is None:
        raise ArgumentError(f"missing required option {key}", key=key)
    return cfg[key]


def _spec(text, d=3, key="q", **kw):
    from .potential import PotentialSpec

    try:
        return PotentialSpec.from_text(text, d=d, **kw)
    except ArgumentError as err:
        raise ArgumentError(f"{key}: {err}", key=key) from None


def _ordered_map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _field(cfg, d_hint=3):
    from .explicit import LayeredSolution, ZeroMode3D, ZeroResonance2D

    name = cfg["field"]
    if name == "zero-mode":
        return ZeroMode3D(), ZeroMode3D.potential, 3
    if name == "zero-resonance":
        return ZeroResonance2D(), ZeroResonance2D.potential, 2
    if name == "plane-wave":
        k = cfg.get("direction") or [0.0, 0.0, 1.0]
        zero = _spec("0", d=len(k), key="field", direction=tuple(k))
        return LayeredSolution(cfg["lambda"], k, zero), "0", len(k)
    raise ArgumentError(f"unknown field {name!r} (zero-mode, zero-resonance or plane-wave)", key="field")


def _residual_pair(make, q, lam, h):
    from .explicit import residual_norm

    rows = []
    for hh in (2 * h, h):
        sup, l2 = residual_norm(make(hh), q, lam)
        rows.append((hh, sup, l2))
    return rows


def _grid(d, L, h, key="h"):
    from .explicit import GridSpec

    # snap L to a multiple of 2h so that both h and 2h grids exist
    cells = int(math.ceil(L / (2 * h) - 1e-9))
    return lambda hh: GridSpec(d, cells * 2 * h, hh)


# --- subcommands ------------------------------------------------------------------------
# each returns (header, rows, summary)


def cmd_zero_mode(cfg):
    from .explicit import SpinorField, ZeroMode3D, ball_mass

    z = ZeroMode3D()
    q = _spec(ZeroMode3D.potential)
    grid = _grid(3, cfg["L"], cfg["h"])
    rows = _residual_pair(lambda hh: SpinorField(grid(hh), closure=z), q, 0.0, cfg["h"])
    norm2 = ball_mass(z, math.inf, 1e-12)
    ratio = rows[0][1] / rows[1][1]
    summary = {"sup_residual": rows[1][1], "halving_ratio": ratio, "residual_ok": rows[1][1] <= cfg["tol"],
               "norm_squared": norm2, "norm_squared_error": norm2 - math.pi**2}
    return ("h", "sup_residual", "l2_residual"), rows, summary


def cmd_zero_resonance(cfg):
    from .explicit import SpinorField, ZeroResonance2D, ball_mass, weighted_l2_norm

    psi = ZeroResonance2D()
    q = _spec(ZeroResonance2D.potential, d=2)
    grid = _grid(2, cfg["L"], cfg["h"])
    res = _residual_pair(lambda hh: SpinorField(grid(hh), closure=psi), q, 0.0, cfg["h"])
    Rs = cfg["R-list"]
    masses = [ball_mass(psi, R, 1e-10) for R in Rs]
    slope = float(np.polyfit(np.log(Rs), masses, 1)[0]) if len(Rs) > 1 else float("nan")
    rows = [(R, m, 2 * math.pi * math.log(R)) for R, m in zip(Rs, masses)]
    summary = {"sup_residual": res[1][1], "halving_ratio": res[0][1] / res[1][1],
               "residual_ok": res[1][1] <= cfg["tol"], "mass_slope": slope,
               "mass_slope_relative_error": slope / (2 * math.pi) - 1,
               "weighted_norm_s0.5": weighted_l2_norm(psi, 0.5, math.inf, 1e-10)}
    return ("R", "mass", "two_pi_log_R"), rows, summary


def cmd_layered(cfg):
    from .explicit import LayeredSolution, SpinorField

    d = cfg["d"]
    k = cfg["direction"] or [0.0] * (d - 1) + [1.0]
    q = _spec(cfg["eta"], d=d, key="eta", kind="layered", direction=tuple(k))
    sol = LayeredSolution(cfg["lambda"], None, q)
    grid = _grid(d, cfg["L"], cfg["h"])
    rows = _residual_pair(lambda hh: SpinorField.from_closure(grid(hh), sol), q, cfg["lambda"], cfg["h"])
    summary = {"sup_residual": rows[1][1], "halving_ratio": rows[0][1] / rows[1][1],
               "residual_ok": rows[1][1] <= cfg["tol"]}
    return ("h", "sup_residual", "l2_residual"), rows, summary


def cmd_bands(cfg):
    from .radial import band_map

    _spec(cfg["eta"], key="eta", kind="radial")
    bm = band_map(cfg["eta"], cfg["p"], cfg["lambda-range"], cfg["tol"])
    summary = {"eta_mean": bm.eta_mean, "period": bm.period, "exceptional_points": bm.exceptional_points().tolist()}
    return ("lambda", "discriminant", "classification"), list(bm.rows()), summary


def cmd_monodromy(cfg):
    from .radial import RadialSystem, free_monodromy, monodromy

    _spec(cfg["eta"], key="eta", kind="radial")
    rows = []
    for lam in _require(cfg, "lambda-list"):
        sys_ = RadialSystem(cfg["eta"], cfg["k"], lam, 3, cfg["p"])
        tm, trace = monodromy(sys_, cfg["j"], cfg["tol"])
        m = tm.matrix
        det = float(np.linalg.det(m))
        if abs(det - 1) > DET_DRIFT:
            raise InvariantViolation(f"det of the monodromy drifted to {det!r} at lambda={lam!r}")
        free = free_monodromy(lam, cfg["p"], sys_.profile.mean(cfg["p"], cfg["tol"]))
        rows.append((lam, m[0, 0], m[0, 1], m[1, 0], m[1, 1], trace, det, float(np.linalg.norm(m - free, 2))))
    summary = {"max_det_error": max(abs(r[6] - 1) for r in rows), "max_distance_to_free": max(r[7] for r in rows)}
    return ("lambda", "m11", "m12", "m21", "m22", "trace", "det", "distance_to_free"), rows, summary


def cmd_boundedness(cfg):
    from .radial import RadialSystem, boundedness_probe

    _spec(cfg["eta"], key="eta", kind="radial")
    sys_ = RadialSystem(cfg["eta"], cfg["k"], _require(cfg, "lambda"), 3, cfg["p"])
    rep = boundedness_probe(sys_, cfg["R-max"], cfg["tol"])
    summary = {"exponent": rep.exponent, "steps": rep.steps,
               "diagnostics": [dict(zip(("j", "D", "abs_mu", "cond_E"), d)) for d in rep.diagnostics]}
    return ("window_start", "window_end", "sup_norm"), list(rep.rows()), summary


def cmd_bv_check(cfg):
    from .radial import bv_check

    _spec(cfg["eta"], key="eta", kind="radial")
    rep = bv_check(cfg["eta"], _require(cfg, "lambda"), cfg["r0"], cfg["R"])
    summary = {"tv": rep.tv, "pole": rep.pole, "trend": rep.trend, "fit_slope": rep.fit_slope, "fit_r2": rep.fit_r2}
    return ("R", "tv"), list(rep.samples), summary


def cmd_limit_range(cfg):
    from .radial import limit_range

    _spec(cfg["eta"], key="eta", kind="radial")
    iv = limit_range(cfg["eta"], cfg["window-starts"], cfg["window-len"], cfg["bins"])
    return ("lower", "upper"), iv, {"intervals": len(iv)}


def _approx_spec(cfg):
    from .weyl import PlanarApproxSpec

    d = cfg["d"]
    q = _spec(_require(cfg, "q"), d=d, direction=tuple(cfg["direction"]) if cfg["direction"] else None)
    r0 = cfg["radius0"]
    kw = {"radii": lambda n: r0 * 2.0**n}
    if cfg["direction"]:
        kw["direction"] = np.array(cfg["direction"])
    if cfg["center"]:
        kw["center"] = np.array(cfg["center"])
    if cfg["eta"]:
        kw["eta"] = cfg["eta"]
    return PlanarApproxSpec(q, **kw)


def _weyl_output(rep):
    summary = {"slope": rep.slope() if len(rep.rows) > 1 else None, "budget_ok": all(rep.budget_ok())}
    summary.update({k: v for k, v in rep.extra.items()})
    return rep.HEADER, rep.rows, summary


def cmd_weyl_planar(cfg):
    from .weyl import BumpProfile, planar_residual_report

    spec = _approx_spec(cfg)
    rep = planar_residual_report(spec, _require(cfg, "lambda"), cfg["n-list"], cfg["h"],
                                 BumpProfile(cfg["chi"], spec.d), cfg["mollify"], jobs=cfg["jobs"])
    return _weyl_output(rep)


def cmd_weyl_distorted(cfg):
    from .weyl import BumpProfile, DistortedApproxSpec, distorted_residual_report

    spec = _approx_spec(cfg)
    template = cfg["phi"]
    if spec.d == 2 and template == OPTIONS["phi"][1]:
        template = "(x1^2+x2^2)/{r}^1.5"
    r0 = cfg["radius0"]
    phi = DistortedApproxSpec(spec, lambda n: template.replace("{r}", repr(r0 * 2.0**n)))
    rep = distorted_residual_report(phi, _require(cfg, "lambda"), cfg["n-list"], cfg["h"],
                                    BumpProfile(cfg["chi"], spec.d), cfg["mollify"], jobs=cfg["jobs"])
    return _weyl_output(rep)


def cmd_schnol(cfg):
    from .weyl import schnol_residual

    f, default_q, d = _field(cfg)
    q = _spec(cfg["q"] or default_q, d=d)
    rep = schnol_residual(f, q, cfg["lambda"], cfg["scales"], cfg["tol"], d=d, jobs=cfg["jobs"])
    summary = {"slope": rep.slope() if len(rep.rows) > 1 else None}
    return ("n", "residual"), [(r[0], r[3]) for r in rep.rows], summary


def cmd_mass_ratio(cfg):
    from .weyl import mass_ratio_analysis

    f, _, d = _field(cfg)
    rep = mass_ratio_analysis(f, cfg["scales"], cfg["tol"], d=d)
    rows = [(n, m, r, n * n * r) for n, m, r in rep.rows()]
    return ("n", "M_n", "ratio", "n2_ratio"), rows, {"monotone": rep.monotone, "subsequence": rep.subsequence}


def cmd_virial(cfg):
    from .virial import virial_bounds, virial_integral

    q = _spec(cfg["q"], d=cfg["d"])
    b = virial_bounds(q, cfg["R"], cfg["density"], cfg["levels"], cfg["d"])
    summary = {"m_q": b.m_q, "M_q": b.M_q, "argmin": list(b.argmin), "argmax": list(b.argmax),
               "contains_zero": b.contains(0.0), "cauchy": b.cauchy, "tail": b.tail}
    if cfg["integral"]:
        f, _, d = _field(cfg)
        if d != cfg["d"]:
            raise ArgumentError(f"field {cfg['field']!r} lives in dimension {d}, not {cfg['d']}", key="field")
        summary["virial_integral"] = virial_integral(f, q)
    return ("density", "m_q", "M_q"), list(b.history), summary


def cmd_radial_eig(cfg):
    from .radial import RadialSystem
    from .virial import discrete_radial_eigenvalues

    _spec(cfg["eta"], key="eta", kind="radial")
    ks = cfg["k-list"] or [cfg["k"]]

    def one(k):
        return k, discrete_radial_eigenvalues(RadialSystem(cfg["eta"], k, 0.0), cfg["R"], cfg["N"],
                                              scheme=cfg["scheme"])

    rows, summary = [], {}
    for k, s in _ordered_map(one, ks, cfg["jobs"]):
        for i, w in enumerate(s.eigenvalues):
            rows.append((k, w, s.outer_mass[i], bool(s.boundary[i]), bool(s.unresolved[i])))
        inner = s.interior
        summary[fmt(k)] = {"interior": inner.tolist()}
    return ("k", "eigenvalue", "outer_mass", "boundary", "unresolved"), rows, summary


def cmd_parse_check(cfg):
    from .potential import parse, to_string

    text = _require(cfg, "q")
    try:
        tree = parse(text)
    except ArgumentError as err:
        raise ArgumentError(str(err), key="q") from None
    printed = to_string(tree)
    fixpoint = to_string(parse(printed)) == printed
    spec = _spec(text, d=cfg["d"], kind=cfg["kind"])
    # deterministic points away from the origin
    x = np.random.default_rng(12345).uniform(-1.5, 1.5, (cfg["points"], spec.d)) + 0.1
    g = spec.grad(x)
    eps = 1e-6
    fd = np.stack([(spec.eval(x + eps * e) - spec.eval(x - eps * e)) / (2 * eps) for e in np.eye(spec.d)], axis=-1)
    rel = np.linalg.norm(g.grad - fd, axis=-1) / np.maximum(np.linalg.norm(g.grad, axis=-1), 1.0)
    rows = [tuple(x[i]) + (g.value[i],) + tuple(g.grad[i]) + (rel[i],) for i in range(len(x))]
    header = tuple(f"x{i + 1}" for i in range(spec.d)) + ("q",) + tuple(f"dq{i + 1}" for i in range(spec.d)) + (
        "rel_error",)
    summary = {"printed": printed, "kind": spec.kind, "fixpoint": fixpoint, "max_rel_error": float(rel.max()),
               "flagged": int(np.sum(g.flagged)), "pass": bool(fixpoint and rel.max() <= 1e-6)}
    return header, rows, summary


HANDLERS = {name: globals()["cmd_" + name.replace("-", "_")] for name in SUBCOMMANDS}


# --- driver ----------------------------------------------------------------------------


def _output_path(cfg, command):
    out = cfg["out"]
    if not os.path.isdir(out):
        raise ArgumentError(f"output directory {out!r} does not exist", key="out")
    if not os.access(out, os.W_OK):
        raise ArgumentError(f"output directory {out!r} is not writable", key="out")
    return os.path.join(out, f"{command}.{cfg['format']}")


def _plan(command, cfg):
    return {"subcommand": command, "config": {k: v for k, v in cfg.items()},
            "output": os.path.join(cfg["out"], f"{command}.{cfg['format']}")}


def _print_summary(command, summary, path, stream):
    print(f"{command}: wrote {path}", file=stream)
    for key in sorted(summary):
        val = summary[key]
        if isinstance(val, (list, dict)):
            val = json.dumps(json.loads(json_text(val)), sort_keys=True)
        elif isinstance(val, float):
            val = fmt(val)
        print(f"  {key}: {val}", file=stream)


VALUE_FLAGS = {f"--{k}" for k in OPTIONS} | {"--config", "--out", "--format", "--jobs"}


def _glue_values(argv):
    """``--flag -3:3:0.01`` -> ``--flag=-3:3:0.01`` so dash-led values are not read as flags."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and argv[i + 1] not in VALUE_FLAGS:
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    argv = _glue_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if not args.command:
        parser.print_help(stderr)
        return EXIT_CONFIG
    try:
        cfg = resolve(args)
        if args.dry_run:
            # validate the expressions without running anything
            for key in ("q", "eta"):
                if cfg.get(key):
                    from .potential import parse

                    try:
                        parse(cfg[key])
                    except ArgumentError as err:
                        raise ArgumentError(f"{key}: {err}", key=key) from None
            stdout.write(json_text(_plan(args.command, cfg)))
            return EXIT_OK
        path = _output_path(cfg, args.command)
        header, rows, summary = HANDLERS[args.command](cfg)
        rows = [tuple(r) for r in rows]
        if cfg["format"] == "csv":
            text = csv_text(header, rows)
        else:
            text = json_text({"columns": list(header), "rows": rows, "summary": summary})
        with open(path, "w", newline="") as fh:
            fh.write(text)
        _print_summary(args.command, summary, path, stdout)
        return EXIT_OK
    except InvariantViolation as err:
        print(f"invariant violation: {err}", file=stderr)
        return EXIT_INVARIANT
    except ArgumentError as err:
        key = getattr(err, "key", None)
        print(f"config error{f' [{key}]' if key else ''}: {err}", file=stderr)
        return EXIT_CONFIG
    except (NumericalError, DomainError) as err:
        where = getattr(err, "r", None)
        where = f" at r={where!r}" if where is not None else ""
        print(f"numerical failure{where}: {err}", file=stderr)
        return EXIT_NUMERIC
    except DiracSpecError as err:
        print(f"error: {err}", file=stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
