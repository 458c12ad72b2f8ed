"""Virial bounds, the virial integral identity and discrete radial spectra.

For an eigenfunction H f = lam f with ||f|| = 1 the virial identity gives
lam = integral of (q + x.grad q) |f|^2, so eigenvalues lie in [m_q, M_q], the
range of v = q + x.grad q.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.linalg import eig_banded, eigh_tridiagonal

from . import quadrature
from .errors import ArgumentError, DomainError, NumericalError
from .explicit import _sphere_rule
from .potential import CARTESIAN, RADIAL, PotentialSpec
from .radial import RadialSystem, integrate

_GAUSS3 = ((0.5 - math.sqrt(0.15), 5 / 18), (0.5, 8 / 18), (0.5 + math.sqrt(0.15), 5 / 18))


@dataclass(frozen=True)
class VirialBounds:
    m_q: float
    M_q: float
    argmin: tuple
    argmax: tuple
    R: float
    density: float
    history: list = field(default_factory=list)  # (density, m_q, M_q)
    cauchy: bool = True
    tail: dict = None

    def contains(self, value, tol=0.0):
        return self.m_q - tol <= value <= self.M_q + tol


_MAX_GRID = 2_000_000


def _as_spec(q, d):
    if isinstance(q, PotentialSpec):
        spec = q
    else:
        spec = PotentialSpec.from_text(str(q), d=d)
    if spec.kind == CARTESIAN and not spec.expr.variables():
        spec = PotentialSpec(spec.expr, RADIAL, spec.d)  # a constant is radial
    return spec


def _check_flags(spec, pts):
    g = spec.grad(pts)
    if g.any_flagged:
        idx = np.argwhere(g.flagged.reshape(-1))[0, 0]
        point = np.asarray(pts).reshape(-1, spec.d)[idx].tolist()
        raise DomainError("potential is not differentiable here (virial density undefined)", point=point)


def _refine_1d(fun, grid, vals, sign):
    """Local optimum of sign*fun near the best grid node (bounded Brent)."""
    i = int(np.argmin(sign * vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    best_t, best_v = float(grid[i]), float(vals[i])
    if hi > lo:
        res = optimize.minimize_scalar(lambda t: sign * fun(t), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-13 * max(1.0, abs(hi))})
        if res.fun < sign * best_v:
            best_t, best_v = float(res.x), float(sign * res.fun)
    return best_t, best_v


def _extremes_1d(spec, R, density):
    """Radial and layered specs: v along the reduced variable."""
    prof = spec.profile
    if spec.kind == RADIAL:
        t = np.linspace(0.0, R, max(int(density * R), 8) + 1)
    else:
        t = np.linspace(-R, R, max(int(2 * density * R), 8) + 1)
    deta, bad = prof.derivative(t)
    if np.any(bad):
        tb = float(t[np.argmax(bad)])
        point = [tb] + [0.0] * (spec.d - 1) if spec.kind == RADIAL else (tb * spec.k).tolist()
        raise DomainError("potential is not differentiable here (virial density undefined)", point=point)
    vals = np.asarray(prof(t), dtype=float) + t * deta

    def v(s):
        dd, _ = prof.derivative(np.array([s]))
        return float(prof.scalar(s) + s * dd[0])

    tmin, vmin = _refine_1d(v, t, vals, 1.0)
    tmax, vmax = _refine_1d(v, t, vals, -1.0)

    def to_point(s):
        e = np.zeros(spec.d)
        if spec.kind == RADIAL:
            e[0] = s
            return tuple(e.tolist())
        return tuple((s * spec.k).tolist())

    return vmin, vmax, to_point(tmin), to_point(tmax)


def _extremes_nd(spec, R, density, starts=3):
    n = max(int(2 * density * R), 8) + 1
    n = min(n, int(_MAX_GRID ** (1 / spec.d)) | 1)
    axes = [np.linspace(-R, R, n)] * spec.d
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.d)
    pts = pts[np.sum(pts * pts, axis=-1) <= R * R * (1 + 1e-12)]
    _check_flags(spec, pts)
    vals = spec.virial_density(pts)

    def local(sign):
        order = np.argsort(sign * vals)[:starts]
        best_x, best_v = pts[order[0]], float(vals[order[0]])
        step = 2 * R / (n - 1)
        for i in order:
            x0 = pts[i]

            def obj(x):
                if np.dot(x, x) > R * R:
                    return sign * best_v + 1.0 + np.dot(x, x)  # outside the search ball
                return sign * float(spec.virial_density(x[None, :])[0])

            simplex = np.vstack([x0] + [x0 + step * e for e in np.eye(spec.d)])
            res = optimize.minimize(obj, x0, method="Nelder-Mead",
                                    options={"xatol": 1e-12, "fatol": 1e-15, "initial_simplex": simplex,
                                             "maxiter": 4000})
            if np.dot(res.x, res.x) <= R * R and sign * res.fun < sign * best_v:
                best_x, best_v = res.x, float(sign * res.fun)
        return tuple(float(c) for c in best_x), best_v

    xmin, vmin = local(1.0)
    xmax, vmax = local(-1.0)
    return vmin, vmax, xmin, xmax


def _radial_tail(spec, R, m, M):
    prof = spec.profile
    r = np.geomspace(max(R, 1e-3), max(R, 1e-3) * 1e6, 400)
    deta, _ = prof.derivative(r)
    v = np.asarray(prof(r), dtype=float) + r * deta
    return {
        "from": float(R),
        "to": float(r[-1]),
        "inf": float(v.min()),
        "sup": float(v.max()),
        "limit_estimate": float(v[-1]),
        "within_bounds": bool(v.min() >= m - 1e-12 and v.max() <= M + 1e-12),
    }


def virial_bounds(q, R=10.0, density=32.0, levels=3, d=3):
    """(m_q, M_q): extremes of v = q + x.grad q over |x| <= R.

    ``density`` is grid points per unit length; the search is repeated
    ``levels`` times with the density doubled each time and the sequence of
    refined bounds is kept in ``history``. Cartesian grids are capped at
    about two million nodes. Grid extremes are polished by a
    bounded 1-D search (radial, layered) or Nelder-Mead (Cartesian).
    """
    spec = _as_spec(q, d)
    if not (R > 0 and math.isfinite(R)):
        raise ArgumentError(f"search radius must be positive and finite, got {R!r}", key="R")
    if not density > 0:
        raise ArgumentError(f"grid density must be positive, got {density!r}", key="density")
    if levels < 1:
        raise ArgumentError("levels must be at least 1", key="levels")
    history = []
    result = None
    for lev in range(levels):
        dens = density * 2**lev
        if spec.kind == CARTESIAN:
            result = _extremes_nd(spec, R, dens)
        else:
            result = _extremes_1d(spec, R, dens)
        history.append((float(dens), float(result[0]), float(result[1])))
    cauchy = True
    for a, b, c in zip(history, history[1:], history[2:]):
        prev = max(abs(b[1] - a[1]), abs(b[2] - a[2]))
        cur = max(abs(c[1] - b[1]), abs(c[2] - b[2]))
        cauchy &= cur <= prev + 1e-12
    m, M, xmin, xmax = result
    tail = _radial_tail(spec, R, m, M) if spec.kind == RADIAL else None
    return VirialBounds(float(m), float(M), xmin, xmax, float(R), float(density), history, bool(cauchy), tail)


def virial_integral(f, q, tol=1e-10, d=None, R=math.inf, angular_order=24):
    """(integral of v |f|^2) / (integral of |f|^2) over |x| <= R (default all space).

    Uses the radial reduction when q is radial and |f| is radial (``f.modulus``);
    otherwise |f|^2 v is averaged over spheres with a product Gauss rule.
    """
    d = d or getattr(f, "d", None)
    if d not in (2, 3):
        raise ArgumentError("dimension of the field is unknown; pass d", key="d")
    spec = _as_spec(q, d)
    if spec.d != d:
        raise ArgumentError(f"potential is {spec.d}-dimensional, field is {d}-dimensional", key="d")
    area = 2 * np.pi if d == 2 else 4 * np.pi
    if spec.kind == RADIAL and hasattr(f, "modulus"):
        prof = spec.profile

        def mass(r):
            return area * r ** (d - 1) * f.modulus(r) ** 2

        def weighted(r):
            deta, _ = prof.derivative(r)
            return mass(r) * (prof(r) + r * deta)
    else:
        dirs, w = _sphere_rule(d, angular_order)

        def _parts(r):
            pts = r[..., None, None] * dirs
            mag2 = np.sum(np.abs(np.asarray(f(pts))) ** 2, axis=-1)
            return r[..., None] ** (d - 1) * mag2, spec.virial_density(pts)

        def mass(r):
            m2, _ = _parts(r)
            return m2 @ w

        def weighted(r):
            m2, v = _parts(r)
            return (m2 * v) @ w

    norm2 = quadrature.integrate(mass, 0.0, R, tol)
    if not norm2 > 0:
        raise NumericalError("field has zero norm on the integration domain")
    return quadrature.integrate(weighted, 0.0, R, tol * norm2) / norm2


# --- discrete radial operator -----------------------------------------------------


@dataclass(frozen=True)
class DiscreteSpectrum:
    """Eigenvalues (sorted) of a truncated radial operator with localization data."""

    eigenvalues: np.ndarray
    outer_mass: np.ndarray  # fraction of each eigenvector's mass in r >= (1 - outer) R
    boundary: np.ndarray  # flagged as truncation (boundary-localized) modes
    unresolved: np.ndarray  # phase per cell max |lam - eta| h above pi/4 (lattice modes)
    R: float
    N: int
    scheme: str

    @property
    def interior(self):
        """Eigenvalues that are neither truncation nor lattice-scale modes."""
        return self.eigenvalues[~(self.boundary | self.unresolved)]


def _staggered(sys, R, N):
    """Interleaved tridiagonal matrix: u2 at (i - 1/2) h, u1 at i h, i = 1..N.

    Discretizes (H u)_1 = -u2' + eta u1 + (k/r) u2 and
    (H u)_2 = u1' + eta u2 + (k/r) u1 with one-cell differences; the k/r
    coupling is the average of (k/r_i) u1(r_i) over the two neighbours so the
    matrix is symmetric. u1(0) = 0 and u2(R + h/2) = 0 close the system.
    """
    h = R / N
    r = h * np.arange(1, N + 1)
    s = r - 0.5 * h
    nodes = np.empty(2 * N)
    nodes[0::2], nodes[1::2] = s, r
    diag = np.asarray(sys.profile(nodes), dtype=float)
    diag = np.broadcast_to(diag, nodes.shape).copy()
    off = np.empty(2 * N - 1)
    off[0::2] = 1 / h + sys.k / (2 * r)  # (s_i, r_i)
    off[1::2] = -1 / h + sys.k / (2 * r[:-1])  # (r_i, s_{i+1})
    return nodes, diag, off


def _collocated(sys, R, N):
    """Both components at r_i = i h with central differences (shows doubling)."""
    h = R / N
    r = h * np.arange(1, N + 1)
    nodes = np.repeat(r, 2)
    eta = np.broadcast_to(np.asarray(sys.profile(r), dtype=float), r.shape)
    # banded storage (upper form) for order (u1_1, u2_1, u1_2, u2_2, ...)
    n = 2 * N
    ab = np.zeros((4, n))
    ab[3, :] = np.repeat(eta, 2)
    ab[2, 1::2] = sys.k / r  # (u1_i, u2_i)
    # (u1_i, u2_{i+1}) = -1/(2h) at offset 3; (u2_i, u1_{i+1}) = +1/(2h) at offset 1
    ab[0, 3::2] = -1 / (2 * h)
    ab[2, 2::2] = 1 / (2 * h)
    return nodes, ab


def discrete_radial_eigenvalues(sys, R, N, tol=None, scheme="staggered", outer=0.1, threshold=0.05):
    """Spectrum of a symmetric discretization of -i sigma_2 d/dr + eta + sigma_1 k/r on (0, R].

    Eigenvectors with more than ``threshold`` of their mass in the outer
    ``outer`` fraction of [0, R] are flagged as boundary-localized. Eigenvalues
    whose local phase per cell max|lam - eta| h exceeds pi/4 are flagged as
    unresolved: they live at the lattice cutoff (an attractive well binds
    states just beyond the discrete band edge +-2/h) and approximate nothing
    in the continuum operator.
    ``tol`` is accepted for interface symmetry; the eigensolvers are direct.
    """
    if not isinstance(sys, RadialSystem):
        raise ArgumentError("expected a RadialSystem", key="sys")
    if not (R > 0 and math.isfinite(R)):
        raise ArgumentError(f"truncation radius must be positive, got {R!r}", key="R")
    if int(N) != N or N < 2:
        raise ArgumentError(f"N must be an integer >= 2, got {N!r}", key="N")
    N = int(N)
    try:
        if scheme == "staggered":
            nodes, diag, off = _staggered(sys, R, N)
            w, v = eigh_tridiagonal(diag, off)
        elif scheme == "collocated":
            nodes, ab = _collocated(sys, R, N)
            w, v = eig_banded(ab, lower=False)
        else:
            raise ArgumentError(f"unknown scheme {scheme!r}", key="scheme")
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"eigensolver failed: {err}") from None
    v *= v
    outer_mass = v[nodes >= (1 - outer) * R].sum(axis=0) / v.sum(axis=0)
    del v
    h = R / N
    eta = np.broadcast_to(np.asarray(sys.profile(nodes), dtype=float), nodes.shape)
    phase = h * np.maximum(np.abs(w - eta.min()), np.abs(w - eta.max()))
    return DiscreteSpectrum(w, outer_mass, outer_mass > threshold, phase > math.pi / 4, float(R), N, scheme)


# --- L2 solution probe ---------------------------------------------------------


@dataclass(frozen=True)
class L2Probe:
    verdict: str  # no-L2-solution-evidence | possible-eigenvalue
    slope: float
    samples: list  # (R, smallest eigenvalue of the Gram matrix)
    r0: float


def l2_solution_probe(sys, lam=None, R_max=400.0, r0=1.0, tol=1e-10, n_samples=24):
    """Mass growth of the fundamental system from r0.

    The Gram matrix Gamma(R) = integral from r0 to R of Psi^T Psi bounds the
    mass of every solution u = Psi v, |v| = 1, from below by its smallest
    eigenvalue. That eigenvalue is fitted as a + c R over the upper half of
    the samples; linear growth (c > 0 with c R_max comparable to the final
    value) is reported as no evidence of an L2 solution.
    """
    if lam is not None:
        sys = sys.with_lambda(lam)
    if not (R_max > 4 * r0 > 0):
        raise ArgumentError(f"R_max must exceed 4 r0, got {R_max!r}", key="R_max")
    marks = list(np.geomspace(R_max / 64, R_max, n_samples))
    gram = [0.0, 0.0, 0.0]  # G11, G12, G22
    samples = []
    state = {"next": 0}

    def on_step(step, y_new):
        h = abs(step.h)
        for theta, w in _GAUSS3:
            a, b, c, d = step.dense(theta)
            gram[0] += w * h * (a * a + c * c)
            gram[1] += w * h * (a * b + c * d)
            gram[2] += w * h * (b * b + d * d)
        r_end = step.r + step.h
        while state["next"] < len(marks) and r_end >= marks[state["next"]] * (1 - 1e-12):
            g11, g12, g22 = gram
            lmin = 0.5 * (g11 + g22) - math.hypot(0.5 * (g11 - g22), g12)
            samples.append((float(marks[state["next"]]), float(lmin)))
            state["next"] += 1

    integrate(sys, r0, R_max, tol, checkpoints=marks, on_step=on_step)
    upper = [(R, m) for R, m in samples if R >= R_max / 2]
    xs = np.array([s[0] for s in upper])
    ys = np.array([s[1] for s in upper])
    c = float(np.polyfit(xs, ys, 1)[0]) if len(upper) >= 2 else float("nan")
    final = samples[-1][1]
    linear = c > 0 and 0.5 <= final / (c * R_max) <= 2.0
    verdict = "no-L2-solution-evidence" if linear else "possible-eigenvalue"
    return L2Probe(verdict, c, samples, float(r0))
