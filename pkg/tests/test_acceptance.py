"""Acceptance criteria 1-12, each at its stated tolerance.

Every test prints one line ``CRITERION <n> PASS|FAIL <measurements>`` to the
terminal (outside pytest's capture) before asserting.
"""

import math
import time

import numpy as np
import pytest

from diracspec.clifford import pauli
from diracspec.explicit import GridSpec, SpinorField, ZeroMode3D, ZeroResonance2D, ball_mass, residual_norm
from diracspec.explicit import weighted_l2_norm
from diracspec.potential import PotentialSpec, parse, to_string
from diracspec.errors import ParseError
from diracspec.radial import RadialSystem, boundedness_probe, bv_check, free_monodromy, monodromy, propagate
from diracspec.virial import discrete_radial_eigenvalues, virial_bounds, virial_integral
from diracspec.weyl import (
    DistortedApproxSpec,
    PlanarApproxSpec,
    distorted_residual_report,
    mass_ratio_analysis,
    planar_residual_report,
    schnol_residual,
)

SIN = "sin(2*pi*r)"
WELL = "-3/(1+r^2)"


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n} {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


def test_criterion_01_zero_mode_fourth_order(report):
    t0 = time.perf_counter()
    z, q = ZeroMode3D(), PotentialSpec.from_text(WELL)
    sups = [residual_norm(SpinorField(GridSpec(3, 4.0, h), closure=z), q, 0.0)[0] for h in (0.05, 0.025)]
    ratio = sups[0] / sups[1]
    dt = time.perf_counter() - t0
    ok = 12 <= ratio <= 20 and dt <= 30
    report(1, ok, f"sup(h=0.05)={sups[0]:.3e} sup(h=0.025)={sups[1]:.3e} ratio={ratio:.2f} time={dt:.1f}s")
    assert ok


def test_criterion_02_norms_and_resonance_growth(report):
    t0 = time.perf_counter()
    norm2 = ball_mass(ZeroMode3D(), math.inf, 1e-12)
    psi = ZeroResonance2D()
    Rs = np.geomspace(1e2, 1e5, 7)
    masses = [ball_mass(psi, R, 1e-10) for R in Rs]
    slope = float(np.polyfit(np.log(Rs), masses, 1)[0])
    # <x>^-0.5 psi: partial norms are Cauchy and agree with the norm over R^2
    weighted = [weighted_l2_norm(psi, 0.5, R, 1e-10) for R in (1e2, 1e4, 1e6)]
    total = weighted_l2_norm(psi, 0.5, math.inf, 1e-10)
    gaps = [total - w for w in weighted]
    dt = time.perf_counter() - t0
    ok = (abs(norm2 - math.pi**2) <= 1e-6 and abs(slope / (2 * math.pi) - 1) <= 0.01
          and math.isfinite(total) and gaps[0] > gaps[1] > gaps[2] >= 0 and gaps[2] <= 1e-2 and dt <= 10)
    report(2, ok, f"|f|^2-pi^2={norm2 - math.pi**2:.2e} slope/2pi={slope / (2 * math.pi):.6f} "
                  f"||<x>^-0.5 psi||={total:.8f} tail gaps={[f'{g:.1e}' for g in gaps]} time={dt:.1f}s")
    assert ok


def test_criterion_03_monodromy_closed_form(report):
    t0 = time.perf_counter()
    worst_m = worst_det = 0.0
    for lam in (0.3, 0.7, 2.5):
        sys_ = RadialSystem(SIN, 0, lam, 3, 1.0)
        tm, _ = monodromy(sys_, 1, 1e-12)
        closed = np.eye(2) * math.cos(lam) + 1j * pauli(2) * math.sin(lam)
        worst_m = max(worst_m, float(np.linalg.norm(tm.matrix - closed.real, 2)))
        assert np.abs(closed.imag).max() == 0
        psi = propagate(sys_, 0.0, 1.0, 1e-12)
        worst_det = max(worst_det, abs(float(np.linalg.det(psi.matrix)) - 1))
    dt = time.perf_counter() - t0
    ok = worst_m <= 1e-8 and worst_det <= 1e-10 and dt <= 5
    report(3, ok, f"max||M-closed||={worst_m:.2e} max|det-1|={worst_det:.2e} time={dt:.1f}s")
    assert ok


def test_criterion_04_period_monodromy_bound(report):
    t0 = time.perf_counter()
    sys_ = RadialSystem(SIN, 1, 0.7, 3, 1.0)
    M = free_monodromy(0.7, 1.0, 0.0)
    worst = -math.inf
    for j in range(2, 201):
        tm, _ = monodromy(sys_, j, 1e-11)
        bound = (1 + 1 / (j - 1)) - 1 + 1e-6
        worst = max(worst, float(np.linalg.norm(tm.matrix - M, 2)) - bound)
    dt = time.perf_counter() - t0
    ok = worst <= 0 and dt <= 60
    report(4, ok, f"max(||M_j-M|| - bound) over j=2..200 = {worst:.3e} time={dt:.1f}s")
    assert ok


def test_criterion_05_mid_band_boundedness(report):
    t0 = time.perf_counter()
    rep = boundedness_probe(RadialSystem(SIN, 1, 0.4 * math.pi, 3, 1.0), 1e4, 1e-10)
    dt = time.perf_counter() - t0
    # exceptional point lambda = pi: reported only
    edge = boundedness_probe(RadialSystem(SIN, 1, math.pi, 3, 1.0), 1024.0, 1e-10)
    ok = rep.exponent <= 0.05 and dt <= 120
    report(5, ok, f"exponent={rep.exponent:.4f} windows={len(rep.windows)} time={dt:.1f}s "
                  f"(lambda=pi: exponent={edge.exponent:.3f}, reported)")
    assert ok


def test_criterion_06_bv_dichotomy(report):
    const = bv_check("0.5", 2.0, 2.0, 1000.0)
    g0, g1 = 1 / (2.0 * 1.5 - 1), 1 / (1000.0 * 1.5 - 1)
    closed = abs(g0 - g1)
    periodic = bv_check(SIN, 5.0, 1.0, 1024.0)
    ok = (const.trend == "converging" and abs(const.tv - closed) <= 0.01 * closed
          and periodic.trend == "log-divergent" and periodic.fit_r2 >= 0.99)
    report(6, ok, f"constant: tv={const.tv:.8f} closed={closed:.8f} trend={const.trend}; "
                  f"periodic: trend={periodic.trend} R2={periodic.fit_r2:.5f} slope={periodic.fit_slope:.4f}")
    assert ok


def _weyl_d3():
    q = PotentialSpec.from_text("sin(t)", direction=(0, 0, 1))
    spec = PlanarApproxSpec(q, radii=lambda n: 8.0 * 2**n)
    planar = {lam: planar_residual_report(spec, lam, [0, 1, 2, 3], 0.5, jobs=4) for lam in (0.37, 5.0)}
    phi = DistortedApproxSpec(spec, lambda n: f"(x1^2+x2^2+x3^2)/{(8.0 * 2**n) ** 1.5!r}")
    # r_n = 8 needs h <= 0.46 once the distortion tilts the phase; the other radii run at 0.5
    distorted = distorted_residual_report(phi, 0.37, [0, 1, 2, 3], lambda n: 0.4 if n == 0 else 0.5, jobs=4)
    return planar, distorted


def _weyl_d2():
    q = PotentialSpec.from_text("sin(t)", d=2, direction=(0.6, 0.8))
    spec = PlanarApproxSpec(q, radii=lambda n: 8.0 * 2**n)
    planar = {lam: planar_residual_report(spec, lam, [0, 1, 2, 3], 0.25) for lam in (0.37, 5.0)}
    phi = DistortedApproxSpec(spec, lambda n: f"(x1^2+x2^2)/{(8.0 * 2**n) ** 1.5!r}")
    distorted = distorted_residual_report(phi, 0.37, [0, 1, 2, 3], lambda n: 0.2 if n == 0 else 0.25)
    return planar, distorted


def _weyl_ok(planar, distorted):
    slopes = {lam: rep.slope() for lam, rep in planar.items()}
    budget = all(all(rep.budget_ok()) for rep in planar.values()) and all(distorted.budget_ok())
    T3 = distorted.column("T3")
    decay = bool(np.all(np.diff(T3) < 0)) and T3[-1] <= T3[0] * 8**-0.5 * 1.2
    ok = budget and all(-1.1 <= s <= -0.9 for s in slopes.values()) and decay
    return ok, slopes, T3


def test_criterion_07_weyl_residual_decay(report):
    t0 = time.perf_counter()
    ok3, slopes3, T3_3 = _weyl_ok(*_weyl_d3())
    dt3 = time.perf_counter() - t0
    t0 = time.perf_counter()
    ok2, slopes2, T3_2 = _weyl_ok(*_weyl_d2())
    dt2 = time.perf_counter() - t0
    ok = ok3 and ok2 and dt3 <= 600 and dt2 <= 60
    fmt_s = lambda s: ", ".join(f"{lam}:{v:.4f}" for lam, v in s.items())  # noqa: E731
    report(7, ok, f"d=3 slopes {{{fmt_s(slopes3)}}} T3={np.round(T3_3, 4).tolist()} time={dt3:.0f}s; "
                  f"d=2 slopes {{{fmt_s(slopes2)}}} T3={np.round(T3_2, 4).tolist()} time={dt2:.1f}s")
    assert ok


def test_criterion_08_schnol_mass_ratio(report):
    from diracspec.explicit import LayeredSolution

    wave = LayeredSolution(0.3, (0, 0, 1), PotentialSpec.from_text("0", direction=(0, 0, 1)))
    ns = [8, 16, 32, 64, 128]
    mr = mass_ratio_analysis(wave, ns)
    n2 = np.array(mr.ratio) * np.array(ns) ** 2
    res = schnol_residual(ZeroMode3D(), WELL, 0.0, [8, 16, 32, 64, 128, 256])
    slope = res.slope()
    part_a = bool(np.all(np.abs(n2 / 7 - 1) <= 0.01))
    part_b = -1.1 <= slope <= -0.9
    ok = part_a and part_b
    report(8, ok, f"n^2 ratio={np.round(n2, 8).tolist()} (target 7, {'ok' if part_a else 'off'}); "
                  f"zero-mode residual slope={slope:.4f} (target [-1.1,-0.9], {'ok' if part_b else 'off'})")
    assert ok


def test_criterion_09_virial(report):
    b = virial_bounds(WELL)
    integral = virial_integral(ZeroMode3D(), WELL)
    ok = abs(b.m_q + 3) <= 1e-6 and abs(b.M_q - 0.375) <= 1e-6 and abs(integral) <= 1e-6 and b.contains(0.0)
    report(9, ok, f"(m_q, M_q)=({b.m_q!r}, {b.M_q!r}) virial integral={integral:.2e} 0 in interval={b.contains(0.0)}")
    assert ok


def test_criterion_10_discrete_radial_operator(report):
    free = discrete_radial_eigenvalues(RadialSystem("0", 1, 0.0), 60.0, 2000).eigenvalues
    sym = float(np.abs(np.sort(free) - np.sort(-free)).max())
    shifted = discrete_radial_eigenvalues(RadialSystem("0.8", 1, 0.0), 60.0, 2000).eigenvalues
    shift = float(np.abs(shifted - (free + 0.8)).max())
    b = virial_bounds(WELL)
    well = discrete_radial_eigenvalues(RadialSystem(WELL, 1, 0.0), 60.0, 2000)
    inner = well.interior
    inside = bool(inner.size) and bool(np.all((inner >= b.m_q - 0.05) & (inner <= b.M_q + 0.05)))
    ok = sym <= 1e-8 and shift <= 1e-8 and inside
    report(10, ok, f"symmetry={sym:.1e} shift={shift:.1e} interior={np.round(inner, 6).tolist()} "
                   f"(lattice-scale modes excluded that were not boundary-flagged: {int((well.unresolved & ~well.boundary).sum())})")
    assert ok


def test_criterion_11_dsl(report):
    from test_potential import GRAD_CORPUS

    rng = np.random.default_rng(20240611)
    worst = 0.0
    eps = 1e-6
    for text in GRAD_CORPUS:
        spec = PotentialSpec.from_text(text, kind="cartesian")
        x = rng.uniform(-1.5, 1.5, size=(50, 3))
        ad = spec.grad(x).grad
        fd = np.stack([(spec.eval(x + eps * e) - spec.eval(x - eps * e)) / (2 * eps) for e in np.eye(3)], axis=-1)
        rel = np.linalg.norm(ad - fd, axis=-1) / np.maximum(np.linalg.norm(ad, axis=-1), 1.0)
        worst = max(worst, float(rel.max()))
    bad = {"1 +": 3, "sin(x1": 6, "2 ** 3": 3, "x1 $ 2": 3, "": 0, "(x1))": 4}
    positioned = 0
    for text, offset in bad.items():
        try:
            parse(text)
        except ParseError as err:
            positioned += err.offset == offset
    fix = all(to_string(parse(to_string(parse(t)))) == to_string(parse(t)) for t in GRAD_CORPUS)
    ok = len(GRAD_CORPUS) == 20 and worst <= 1e-6 and positioned == len(bad) and fix
    report(11, ok, f"corpus={len(GRAD_CORPUS)} worst rel err={worst:.2e} positioned errors={positioned}/{len(bad)} "
                   f"fixpoint={fix}")
    assert ok


def test_criterion_12_determinism(report, tmp_path):
    from test_cli import FAST, call

    mismatched = []
    for name, args in sorted(FAST.items()):
        outputs = []
        for i, jobs in enumerate(("1", "1", "4")):
            d = tmp_path / f"{name}-{i}"
            d.mkdir()
            code = call([name, "--out", str(d), "--jobs", jobs] + args)[0]
            assert code == 0, name
            outputs.append((d / f"{name}.csv").read_bytes())
            d2 = tmp_path / f"{name}-{i}-json"
            d2.mkdir()
            call([name, "--out", str(d2), "--jobs", jobs, "--format", "json"] + args)
            outputs[-1] += (d2 / f"{name}.json").read_bytes()
        if not (outputs[0] == outputs[1] == outputs[2]):
            mismatched.append(name)
    ok = not mismatched
    report(12, ok, f"{len(FAST)} subcommands x (csv, json) x 3 runs (jobs 1, 1, 4); mismatches={mismatched}")
    assert ok
