import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracspec.errors import ArgumentError, DomainError
from diracspec.explicit import LayeredSolution, ZeroMode3D
from diracspec.potential import PotentialSpec
from diracspec.radial import RadialSystem
from diracspec.virial import (
    discrete_radial_eigenvalues,
    l2_solution_probe,
    virial_bounds,
    virial_integral,
)

WELL = "-3/(1+r^2)"


# --- bounds -----------------------------------------------------------------------


def test_bounds_of_the_well():
    b = virial_bounds(WELL)
    assert abs(b.m_q + 3) <= 1e-12 and abs(b.M_q - 0.375) <= 1e-12
    assert abs(b.argmax[0] - math.sqrt(3)) <= 1e-5
    assert b.argmin == (0.0, 0.0, 0.0)
    assert b.cauchy and len(b.history) == 3
    assert b.tail["within_bounds"] and abs(b.tail["limit_estimate"]) <= 1e-10


def test_bounds_cartesian_form_agrees():
    b = virial_bounds("-3/(1+x1^2+x2^2+x3^2)", R=4.0, density=4.0, levels=2)
    assert abs(b.m_q + 3) <= 1e-9 and abs(b.M_q - 0.375) <= 1e-9
    assert abs(np.linalg.norm(b.argmax) - math.sqrt(3)) <= 1e-4


def test_bounds_constant():
    b = virial_bounds("1.25", R=3.0)
    assert b.m_q == b.M_q == 1.25


def test_bounds_two_dimensional_well():
    b = virial_bounds("-2/(1+r^2)", d=2)
    assert abs(b.m_q + 2) <= 1e-12 and b.argmin == (0.0, 0.0)


def test_bounds_layered():
    # v(t) = sin t + t cos t on |t| <= 3
    b = virial_bounds(PotentialSpec.from_text("sin(t)", direction=(0, 0, 1)), R=3.0)
    t = np.linspace(-3, 3, 600001)
    v = np.sin(t) + t * np.cos(t)
    assert abs(b.m_q - v.min()) <= 1e-9 and abs(b.M_q - v.max()) <= 1e-9


def test_bounds_refinement_history_is_cauchy():
    b = virial_bounds("sin(3*r)/(1+r)", R=6.0, density=8.0, levels=4)
    changes = [max(abs(b2[1] - b1[1]), abs(b2[2] - b1[2])) for b1, b2 in zip(b.history, b.history[1:])]
    assert all(c2 <= c1 + 1e-12 for c1, c2 in zip(changes, changes[1:]))
    assert b.cauchy


def test_bounds_reject_kink():
    with pytest.raises(DomainError) as e:
        virial_bounds("abs(x1 - 0.5)", R=1.0, density=4.0, levels=1)
    assert e.value.point is not None


def test_bounds_argument_errors():
    with pytest.raises(ArgumentError):
        virial_bounds(WELL, R=0.0)
    with pytest.raises(ArgumentError):
        virial_bounds(WELL, density=-1.0)


@settings(max_examples=12, deadline=None)
@given(st.floats(0.3, 4.0))
def test_scaling_leaves_bounds_unchanged(s):
    base = virial_bounds(WELL, R=20.0, density=16.0, levels=2)
    scaled = virial_bounds(f"-3/(1+({s!r}*r)^2)", R=20.0, density=16.0, levels=2)
    assert abs(scaled.m_q - base.m_q) <= 1e-9
    assert abs(scaled.M_q - base.M_q) <= 1e-9
    assert abs(scaled.argmax[0] - base.argmax[0] / s) <= 1e-4 * max(1, 1 / s)


# --- virial integral -----------------------------------------------------------


def test_zero_mode_virial_integral_vanishes():
    assert abs(virial_integral(ZeroMode3D(), WELL)) <= 1e-10


def test_zero_mode_virial_integral_oracle():
    # oracle: 4 pi integral 3 (r^2 - 1) (1 + r^2)^-4 r^2 dr / pi^2 computed by scipy
    from scipy.integrate import quad

    num = quad(lambda r: 4 * math.pi * 3 * (r * r - 1) * (1 + r * r) ** -4 * r * r, 0, np.inf, epsabs=1e-13, limit=200)[0]
    assert abs(num / math.pi**2) <= 1e-10
    got = virial_integral(ZeroMode3D(), "-3/(1+x1^2+x2^2+x3^2)", tol=1e-9)
    assert abs(got - num / math.pi**2) <= 1e-6


def test_constant_potential_integral():
    assert abs(virial_integral(ZeroMode3D(), "0.7") - 0.7) <= 1e-10


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.0, 3.0))
def test_integral_is_a_mean_of_v(width, shift):
    b = virial_bounds(WELL, R=30.0)

    class Bump:
        d = 3

        def modulus(self, r):
            return np.exp(-((r - shift) ** 2) / width**2)

    val = virial_integral(Bump(), WELL, tol=1e-11)
    assert b.m_q - 1e-9 <= val <= b.M_q + 1e-9


def test_integral_of_non_radial_field():
    f = LayeredSolution(0.3, (0, 0, 1), PotentialSpec.from_text("0", direction=(0, 0, 1)))
    # |f| = 1: over the ball the mean of v for q = 2 + x1 (v = 2 + 2 x1) is 2
    assert abs(virial_integral(f, "2 + x1", R=2.0, tol=1e-11) - 2.0) <= 1e-9


# --- discrete radial operator ------------------------------------------------------


@pytest.mark.parametrize("N", [200, 1000, 4000])
def test_free_spectrum_is_symmetric(N):
    w = discrete_radial_eigenvalues(RadialSystem("0", 1, 0.0), 40.0, N).eigenvalues
    assert np.all(np.diff(w) >= 0)
    assert np.abs(np.sort(w) - np.sort(-w)).max() <= 1e-8


def test_constant_shift_is_exact():
    a = discrete_radial_eigenvalues(RadialSystem("0", 2, 0.0), 30.0, 800).eigenvalues
    b = discrete_radial_eigenvalues(RadialSystem("0.8", 2, 0.0), 30.0, 800).eigenvalues
    assert np.abs(b - (a + 0.8)).max() <= 1e-8


def test_well_interior_eigenvalues_in_virial_interval():
    spec = discrete_radial_eigenvalues(RadialSystem(WELL, 1, 0.0), 60.0, 2000)
    assert spec.interior.size >= 1
    assert np.all((spec.interior >= -3.05) & (spec.interior <= 0.425))
    # the zero mode lives in this channel
    assert np.min(np.abs(spec.interior)) <= 1e-3


def test_zero_mode_eigenvalue_converges():
    errs = []
    for N in (1000, 2000, 4000):
        s = discrete_radial_eigenvalues(RadialSystem(WELL, 1, 0.0), 60.0, N)
        errs.append(np.min(np.abs(s.interior)))
    assert errs[0] > errs[1] > errs[2]


N_FREE = 400


def test_boundary_modes_flagged():
    s = discrete_radial_eigenvalues(RadialSystem("0", 1, 0.0), 20.0, N_FREE)
    # free scattering states fill the box evenly, so each carries ~10% in the outer tenth;
    # the only exceptions sit at the lattice band edge +-2/h and are flagged unresolved
    assert np.all(s.boundary | s.unresolved)
    assert s.interior.size == 0
    assert np.all(np.abs(s.eigenvalues[~s.boundary]) > 0.99 * 2 * N_FREE / 20.0)


def test_doubling_demonstration():
    # continuum count of free modes with |lam| < 1 on [0, R] is about 2R/pi
    R, N = 20.0, 400
    stag = discrete_radial_eigenvalues(RadialSystem("0", 1, 0.0), R, N, scheme="staggered").eigenvalues
    coll = discrete_radial_eigenvalues(RadialSystem("0", 1, 0.0), R, N, scheme="collocated").eigenvalues
    n_stag = int(np.sum(np.abs(stag) < 1))
    n_coll = int(np.sum(np.abs(coll) < 1))
    assert abs(n_stag - 2 * R / math.pi) <= 2
    assert abs(n_coll - 2 * n_stag) <= 2


def test_discrete_argument_errors():
    with pytest.raises(ArgumentError):
        discrete_radial_eigenvalues(RadialSystem("0", 1, 0.0), -1.0, 10)
    with pytest.raises(ArgumentError):
        discrete_radial_eigenvalues(RadialSystem("0", 1, 0.0), 1.0, 1)
    with pytest.raises(ArgumentError):
        discrete_radial_eigenvalues(RadialSystem("0", 1, 0.0), 1.0, 10, scheme="spectral")


# --- L2 probe ------------------------------------------------------------------------


def test_probe_coulomb_tail():
    rep = l2_solution_probe(RadialSystem("5/(1+r)", 1, 0.0), lam=2.0, R_max=400.0)
    assert rep.verdict == "no-L2-solution-evidence"
    assert rep.slope > 0


def test_probe_free_operator():
    rep = l2_solution_probe(RadialSystem("0", 1, 0.5), R_max=400.0)
    assert rep.verdict == "no-L2-solution-evidence"
    ms = [m for _, m in rep.samples]
    assert all(b >= a for a, b in zip(ms, ms[1:]))


def test_probe_never_claims_an_eigenvalue():
    rep = l2_solution_probe(RadialSystem(WELL, 1, 0.0), R_max=200.0)
    assert rep.verdict in ("no-L2-solution-evidence", "possible-eigenvalue")
