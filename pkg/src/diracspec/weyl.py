"""Weyl singular sequences and their residual budgets.

A planar element is f_n = chi_n F_n on the ball B(a_n, r_n) with

    chi_n(x) = r_n^(-d/2) chi((x - a_n) / r_n),
    F_n(x)   = exp(-i (M.k) xi_n(s(x))) exp(i lam x.k) phi_n,   xi_n' = eta~_n,

s(x) = (x - a_n).k (+ phi(x) for the distorted variant) and (M.k) phi_n = phi_n.
||(H - lam) f_n|| is measured with the grid stencil and compared with the
three-term budget T1 + T2 + T3:

    T1 = ||grad chi|| / r_n
    T2 = ||chi||_inf (r_n^-d integral over the ball of |q - eta_n(s)|^2)^(1/2)
    T3 = ||chi||_inf (omega / r_n integral of |eta_n - eta~_n|^2)^(1/2)           planar
    T3 = ||chi||_inf (r_n^-d integral over the ball of |grad phi|^2 |eta_n(s)|^2)^(1/2)  distorted

with omega = pi (d = 3) or 2 (d = 2), the largest cross-section of the unit
ball. The |(M.v) u| = |v| |u| identity turns each term of (H - lam) f_n into
a scalar integral.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import quadrature
from .clifford import plus_eigenspinor, spinor_dim, unit_vector
from .errors import ArgumentError, DomainError, InvariantViolation, UnderResolvedGrid
from .explicit import GridSpec, LayeredSolution, SpinorField, _sphere_rule, ball_mass, grid_l2_norm, residual_norm
from .export import write_csv, write_json
from .potential import CARTESIAN, LAYERED, PotentialSpec, Profile, as_profile

MAX_PHASE_PER_CELL = math.pi / 4
MIN_CELLS_PER_RADIUS = 8


# --- bump --------------------------------------------------------------------------


def _poly(s):
    return np.where(s < 1, np.clip(1 - s * s, 0, None) ** 4, 0.0)


def _dpoly(s):
    return np.where(s < 1, -8 * s * np.clip(1 - s * s, 0, None) ** 3, 0.0)


def _exp(s):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return np.where(s < 1, np.exp(1.0 / np.minimum(s * s - 1, -1e-300)), 0.0)


def _dexp(s):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        u = np.minimum(s * s - 1, -1e-300)
        return np.where(s < 1, np.exp(1.0 / u) * (-2 * s / (u * u)), 0.0)


_BUMPS = {"poly": (_poly, _dpoly), "exp": (_exp, _dexp)}


@dataclass(frozen=True)
class BumpProfile:
    """Radial bump chi(x) = c rho(|x|) supported in the unit ball with ||chi||_2 = 1.

    ``poly``: rho = (1 - s^2)^4 (C^3). ``exp``: rho = exp(1/(s^2 - 1)) (C^inf).
    """

    kind: str = "poly"
    d: int = 3
    c: float = field(default=None, init=False)
    grad_norm: float = field(default=None, init=False)
    sup: float = field(default=None, init=False)

    def __post_init__(self):
        if self.kind not in _BUMPS:
            raise ArgumentError(f"unknown bump kind {self.kind!r} (poly or exp)", key="chi")
        spinor_dim(self.d)
        rho, drho = _BUMPS[self.kind]
        area = 2 * math.pi if self.d == 2 else 4 * math.pi
        m0 = area * quadrature.integrate(lambda s: rho(s) ** 2 * s ** (self.d - 1), 0.0, 1.0, 1e-14)
        m1 = area * quadrature.integrate(lambda s: drho(s) ** 2 * s ** (self.d - 1), 0.0, 1.0, 1e-14)
        c = 1.0 / math.sqrt(m0)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "grad_norm", c * math.sqrt(m1))
        object.__setattr__(self, "sup", c * float(rho(np.array(0.0))))

    def radial(self, s):
        return self.c * _BUMPS[self.kind][0](np.asarray(s, dtype=float))

    def dradial(self, s):
        return self.c * _BUMPS[self.kind][1](np.asarray(s, dtype=float))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.radial(np.sqrt(np.sum(x * x, axis=-1)))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        s = np.sqrt(np.sum(x * x, axis=-1))
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(s[..., None] > 0, x / np.where(s > 0, s, 1.0)[..., None], 0.0)
        return self.dradial(s)[..., None] * unit


def bump_chi(kind="poly", d=3):
    return BumpProfile(kind, d)


# --- profiles used by the elements ---------------------------------------------------


class ShiftedProfile(Profile):
    """t -> base(t + c)."""

    def __init__(self, base, c):
        self.base, self.c = base, float(c)
        self.smooth = base.smooth

    def __call__(self, t):
        return self.base(np.asarray(t, dtype=float) + self.c)

    def derivative(self, t):
        return self.base.derivative(np.asarray(t, dtype=float) + self.c)

    def antiderivative(self, t, tol=1e-10):
        t = np.asarray(t, dtype=float)
        return self.base.antiderivative(t + self.c, tol) - self.base.antiderivative(np.array(self.c), tol)


class MollifiedProfile(Profile):
    """Gaussian mollification eta * G_w on [lo, hi], stored as a cubic spline.

    The convolution is a trapezoid sum on a grid of spacing w/40 over +-6w
    (truncation below 1e-15 relative). Outside [lo, hi] the base profile is
    returned unchanged.
    """

    smooth = True

    def __init__(self, base, width, lo, hi):
        if not width > 0:
            raise ArgumentError(f"mollifier width must be positive, got {width!r}", key="mollify")
        self.base, self.width, self.lo, self.hi = base, float(width), float(lo), float(hi)
        dt = width / 40
        taps = int(math.ceil(6 * width / dt))
        kern = np.exp(-0.5 * ((np.arange(-taps, taps + 1) * dt) / width) ** 2)
        kern /= kern.sum()
        n = int(math.ceil((hi - lo) / dt)) + 1
        t = lo + dt * np.arange(n)
        ext = lo + dt * np.arange(-taps, n + taps)
        vals = np.convolve(np.asarray(base(ext), dtype=float), kern, mode="valid")
        self._spline = CubicSpline(t, vals)
        self._prim = self._spline.antiderivative()
        self._prim0 = float(self._prim(min(max(0.0, lo), hi)))

    def _inside(self, t):
        return (t >= self.lo) & (t <= self.hi)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(self._inside(t), self._spline(np.clip(t, self.lo, self.hi)), self.base(t))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        inside = self._inside(t)
        d, bad = self.base.derivative(t)
        return np.where(inside, self._spline(np.clip(t, self.lo, self.hi), 1), d), np.where(inside, False, bad)

    def antiderivative(self, t, tol=1e-10):
        t = np.asarray(t, dtype=float)
        if np.any(~self._inside(t)):
            raise DomainError("mollified profile antiderivative requested outside its table",
                              point=float(t[~self._inside(t)].reshape(-1)[0]))
        if not (self.lo <= 0.0 <= self.hi):
            raise DomainError("mollified profile table must contain 0", point=0.0)
        return self._prim(t) - self._prim0

    def antiderivative_table(self, t_min, t_max, tol=1e-10, spacing=0.02):
        prim, p0 = self._prim, self._prim0
        return lambda t: prim(t) - p0


# --- approximation specs -----------------------------------------------------------


def _per_n(value, n):
    return value(n) if callable(value) and not isinstance(value, Profile) else value


@dataclass(frozen=True)
class PlanarApproxSpec:
    """Per-index data (k_n, a_n, r_n, eta_n); entries are constants or callables of n.

    ``radii`` maps n to r_n (callable, or a sequence indexed by n). With
    ``eta = None`` the potential must be layered and eta_n is its profile
    restricted to the ball, so q = eta_n((x - a_n).k_n) exactly.
    """

    q: PotentialSpec
    radii: object = None
    direction: object = None
    center: object = None
    eta: object = None
    d: int = None

    def __post_init__(self):
        q = self.q if isinstance(self.q, PotentialSpec) else PotentialSpec.from_text(str(self.q), d=self.d or 3)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "d", q.d)
        if self.radii is None:
            object.__setattr__(self, "radii", lambda n: 4.0 * 2.0**n)
        if self.direction is None:
            object.__setattr__(self, "direction", q.k if q.kind == LAYERED else np.eye(q.d)[0])
        if self.center is None:
            object.__setattr__(self, "center", np.zeros(q.d))
        if self.eta is None and q.kind != LAYERED:
            raise ArgumentError("eta_n must be given unless q is layered", key="eta")

    def r(self, n):
        radii = self.radii
        r = radii(n) if callable(radii) else radii[n]
        if not (r > 0 and math.isfinite(r)):
            raise ArgumentError(f"radius r_{n} must be positive, got {r!r}", key="radii")
        return float(r)

    def k(self, n):
        k = unit_vector(np.asarray(_per_n(self.direction, n), dtype=float), normalize=False)
        if k.shape != (self.d,):
            raise ArgumentError(f"direction k_{n} has the wrong dimension", key="direction")
        return k

    def a(self, n):
        a = np.asarray(_per_n(self.center, n), dtype=float).reshape(-1)
        if a.shape != (self.d,):
            raise ArgumentError(f"center a_{n} has the wrong dimension", key="center")
        return a

    def eta_n(self, n):
        """eta_n as a function of the local coordinate s = (x - a_n).k_n."""
        if self.eta is not None:
            return as_profile(_per_n(self.eta, n), "t")
        k, a = self.k(n), self.a(n)
        kq = self.q.k
        if abs(abs(float(kq @ k)) - 1) > 1e-12:
            raise ArgumentError("default eta_n needs k_n parallel to the layering direction of q", key="direction")
        sign = float(np.sign(kq @ k))
        base = self.q.profile
        if sign < 0:
            raise ArgumentError("default eta_n needs k_n = +k of q (pass eta for the reversed direction)",
                                key="direction")
        shift = float(a @ kq)
        return base if shift == 0 else ShiftedProfile(base, shift)

    def check_increasing(self, n_list):
        rs = [self.r(n) for n in n_list]
        if any(b <= a for a, b in zip(rs, rs[1:])):
            raise ArgumentError("radii r_n must increase strictly along n_list", key="radii")


@dataclass(frozen=True)
class DistortedApproxSpec:
    """A planar spec plus a distortion phi_n (DSL text in x1..xd, or callable of n)."""

    planar: PlanarApproxSpec
    phi: object = "0"

    def phi_n(self, n):
        phi = _per_n(self.phi, n)
        if isinstance(phi, PotentialSpec):
            spec = phi
        else:
            spec = PotentialSpec.from_text(str(phi), d=self.planar.d, kind=CARTESIAN)
        if spec.kind != CARTESIAN or spec.d != self.planar.d:
            raise ArgumentError("phi_n must be a Cartesian expression in x1..xd", key="phi")
        return spec


# --- quadrature on the ball ---------------------------------------------------------


def _composite_gauss(a, b, panel, order=8):
    """Nodes and weights of composite Gauss-Legendre on [a, b] (vectorized over rows)."""
    x, w = np.polynomial.legendre.leggauss(order)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    npan = max(1, int(math.ceil(float(np.max(b - a)) / panel)))
    edges = a[..., None] + (b - a)[..., None] * np.linspace(0, 1, npan + 1)
    half = 0.5 * (edges[..., 1:] - edges[..., :-1])
    mid = 0.5 * (edges[..., 1:] + edges[..., :-1])
    nodes = (mid[..., None] + half[..., None] * x).reshape(a.shape + (-1,))
    weights = (half[..., None] * w).reshape(a.shape + (-1,))
    return nodes, weights


def _frame(k):
    """Orthonormal basis of the complement of k."""
    d = k.shape[0]
    basis = np.linalg.svd(k[None, :])[2][1:]
    return basis.reshape(d - 1, d)


def ball_rule(d, center, k, r, density=2.0, max_chunk=1 << 20):
    """Yield (points, weights) chunks of a product rule on B(center, r).

    Along k: composite Gauss; across: Gauss in the transverse radius and the
    trapezoid rule in the angle (d = 3), or Gauss across the chord (d = 2).
    ``density`` is nodes per unit length.
    """
    panel = 8.0 / density
    t, wt = _composite_gauss(np.array(-r), np.array(r), panel)
    E = _frame(k)
    center = np.asarray(center, dtype=float)
    half = np.sqrt(np.clip(r * r - t * t, 0, None))
    if d == 2:
        # t = r sin(theta) removes the square-root endpoint behaviour of the chord
        th, wth = _composite_gauss(np.array(-math.pi / 2), np.array(math.pi / 2), panel / r)
        t, wt = r * np.sin(th), r * np.cos(th) * wth
        half = r * np.cos(th)
        y, wy = _composite_gauss(-half, half, panel)
        pts = center + t[:, None, None] * k + y[..., None] * E[0]
        w = wt[:, None] * wy
        yield pts.reshape(-1, 2), w.reshape(-1)
        return
    step = max(1, max_chunk // max(1, int(density * r) ** 2 * 8))
    for i0 in range(0, t.size, step):
        i1 = min(i0 + step, t.size)
        rho, wr = _composite_gauss(np.zeros(i1 - i0), half[i0:i1], panel)
        pts_all, w_all = [], []
        for j in range(i1 - i0):
            counts = np.maximum(8, np.ceil(2 * math.pi * rho[j] * density)).astype(int)
            rr = np.repeat(rho[j], counts)
            ww = np.repeat(wr[j] * rho[j] * 2 * math.pi / counts, counts)
            start = np.repeat(np.cumsum(counts) - counts, counts)
            th = 2 * math.pi * (np.arange(rr.size) - start) / np.repeat(counts, counts)
            pts = (center + t[i0 + j] * k
                   + (rr * np.cos(th))[:, None] * E[0] + (rr * np.sin(th))[:, None] * E[1])
            pts_all.append(pts)
            w_all.append(wt[i0 + j] * ww)
        yield np.concatenate(pts_all), np.concatenate(w_all)


# --- the elements ------------------------------------------------------------------


class WeylElement:
    """f_n = chi_n F_n; exposes the envelope (carrier lam k split off) for the stencil."""

    def __init__(self, r, a, k, lam, chi, eta_tilde, phi=None, tol=1e-10):
        self.r, self.a, self.k, self.lam, self.chi = float(r), np.asarray(a, dtype=float), k, float(lam), chi
        self.d = k.shape[0]
        self.phi = phi
        self.spinor = plus_eigenspinor(k)
        if phi is None:
            argument = self.local
        else:
            def argument(x):
                return self.local(x) + phi.eval(x)
        self._layered = LayeredSolution(lam, k, eta_tilde, self.spinor, tol, argument=argument)

    def local(self, x):
        return (np.asarray(x, dtype=float) - self.a) @ self.k

    @property
    def carrier(self):
        return self.lam * self.k

    def cutoff(self, x):
        y = (np.asarray(x, dtype=float) - self.a) / self.r
        return self.r ** (-self.d / 2) * self.chi(y)

    def envelope(self, x):
        x = np.asarray(x, dtype=float)
        c = self.cutoff(x)
        out = np.zeros(x.shape[:-1] + (self.spinor.size,), dtype=complex)
        inside = c != 0
        if np.any(inside):
            out[inside] = c[inside][:, None] * self._layered.envelope(x[inside])
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(1j * self.lam * (x @ self.k))[..., None] * self.envelope(x)


def _prepare(spec, n, chi, mollify, phi=None, pad=1.0):
    """Shared per-n data: radius, frame, eta_n, eta~_n and the s-range."""
    r, k, a = spec.r(n), spec.k(n), spec.a(n)
    eta = spec.eta_n(n)
    lo, hi = -r - pad, r + pad
    if phi is not None:
        # range of s = (x - a).k + phi(x) over the ball, sampled on the ball rule
        smin, smax = lo, hi
        for pts, _ in ball_rule(spec.d, a, k, r, density=1.0):
            s = (pts - a) @ k + phi.eval(pts)
            smin, smax = min(smin, float(s.min()) - pad), max(smax, float(s.max()) + pad)
        lo, hi = smin, smax
    use = (not eta.smooth) if mollify is None else bool(mollify)
    width = None
    if use:
        width = 1.0 / r if mollify in (None, True) else float(mollify)
        eta_t = MollifiedProfile(eta, width, min(lo, -pad), max(hi, pad))
    else:
        eta_t = eta
    return r, k, a, eta, eta_t, width


def _check_resolution(eta_t, lo, hi, h, r, grad_s_max=1.0):
    t = np.linspace(lo, hi, max(2001, int(40 * (hi - lo)) + 1))
    peak = float(np.max(np.abs(eta_t(t)))) * grad_s_max
    limits = [r / MIN_CELLS_PER_RADIUS]
    if peak > 0:
        limits.append(MAX_PHASE_PER_CELL / peak)
    need = min(limits)
    if h > need:
        raise UnderResolvedGrid(
            f"grid h = {h!r} under-resolves the element (phase per cell {peak * h:.3g}, "
            f"{r / h:.3g} cells per radius); need h <= {need:.6g}",
            required_h=need,
        )


def _grid_for(d, r, a, h):
    cells = int(math.ceil(r / h - 1e-9))
    L = (cells + 4) * h  # the ball stays inside the interior of both the h and 2h grids
    return GridSpec(d, L, h, 2, tuple(a.tolist()))


def _measure(element, q, lam, h):
    """L2 residual on grids h and 2h and the Richardson error estimate of the h value."""
    fine = SpinorField.from_closure(_grid_for(element.d, element.r, element.a, h), element)
    coarse = SpinorField.from_closure(_grid_for(element.d, element.r, element.a, 2 * h), element)
    res_h = residual_norm(fine, q, lam)[1]
    res_2h = residual_norm(coarse, q, lam)[1]
    norm = grid_l2_norm(fine)
    return res_h, abs(res_2h - res_h) / 15.0, norm


@dataclass(frozen=True)
class SingularSequenceReport:
    """Per-n rows: n, r_n, norm, residual, T1, T2, T3, grid error estimate."""

    rows: list
    lam: float
    kind: str
    extra: dict = field(default_factory=dict)

    HEADER = ("n", "r_n", "norm", "residual", "T1", "T2", "T3", "grid_error")

    def column(self, name):
        i = self.HEADER.index(name)
        return np.array([row[i] for row in self.rows], dtype=float)

    def budget_ok(self, factor=10.0):
        """residual <= T1 + T2 + T3 + factor * grid_error at every n."""
        return [
            row[3] <= row[4] + row[5] + row[6] + factor * row[7] for row in self.rows
        ]

    def slope(self):
        """Least-squares slope of log residual against log r_n."""
        r, res = self.column("r_n"), self.column("residual")
        return float(np.polyfit(np.log(r), np.log(res), 1)[0])

    def to_csv(self, path):
        return write_csv(path, self.HEADER, self.rows)

    def to_json(self, path):
        return write_json(path, {"kind": self.kind, "lambda": self.lam, "columns": list(self.HEADER),
                                 "rows": self.rows, "extra": self.extra})


def _run(fn, n_list, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
            return list(pool.map(fn, n_list))
    return [fn(n) for n in n_list]


def _ball_integral(fn, d, a, k, r, density):
    total = 0.0
    for pts, w in ball_rule(d, a, k, r, density):
        total += float(np.dot(fn(pts), w))
    return total


def planar_weyl_element(n, spec, lam, chi=None, mollify=None, tol=1e-10):
    """The element f_n of a planar spec (closure with ``envelope`` and ``carrier``)."""
    chi = chi or BumpProfile("poly", spec.d)
    r, k, a, _, eta_t, _ = _prepare(spec, n, chi, mollify)
    return WeylElement(r, a, k, lam, chi, eta_t, None, tol)


def planar_residual_report(spec, lam, n_list, grid_h, chi=None, mollify=None, density=2.0, jobs=None):
    """Measured residuals and the three-term budget for each n (planar elements).

    ``grid_h`` is a spacing or a callable n -> spacing. ``mollify``: None
    smooths eta_n only when it is not smooth, True always (width 1/r_n), a
    number sets the width, False never.
    """
    chi = chi or BumpProfile("poly", spec.d)
    if chi.d != spec.d:
        raise ArgumentError("bump dimension does not match the potential", key="chi")
    spec.check_increasing(n_list)
    omega = math.pi if spec.d == 3 else 2.0

    def one(n):
        r, k, a, eta, eta_t, width = _prepare(spec, n, chi, mollify)
        h = float(grid_h(n) if callable(grid_h) else grid_h)
        _check_resolution(eta_t, -r, r, h, r)
        element = WeylElement(r, a, k, lam, chi, eta_t)
        res, err, norm = _measure(element, spec.q, lam, h)
        T1 = chi.grad_norm / r

        def gap2(pts):
            return (spec.q.eval(pts) - eta((pts - a) @ k)) ** 2

        T2 = chi.sup * math.sqrt(max(_ball_integral(gap2, spec.d, a, k, r, density), 0.0) * r ** (-spec.d))
        if width is None:
            T3 = 0.0
        else:
            # panels one mollifier width wide; kinks of eta only cost local accuracy
            t, w = _composite_gauss(np.array(-r), np.array(r), width)
            gap = float(np.dot((eta(t) - eta_t(t)) ** 2, w))
            T3 = chi.sup * math.sqrt(omega / r * gap)
        return (int(n), r, norm, res, T1, T2, T3, err)

    rows = _run(one, list(n_list), jobs)
    return SingularSequenceReport(rows, float(lam), "planar")


def _is_zero_distortion(spec, n, phi, density):
    r, k, a = spec.planar.r(n), spec.planar.k(n), spec.planar.a(n)
    for pts, _ in ball_rule(spec.planar.d, a, k, r, density=1.0):
        g = phi.grad(pts)
        if np.any(phi.eval(pts) != 0) or np.any(g.grad != 0):
            return False
    return True


def distorted_residual_report(spec, lam, n_list, grid_h, chi=None, mollify=None, density=2.0, jobs=None):
    """Residual budget for distorted elements with s = (x - a_n).k_n + phi_n(x).

    Also reports the two distortion conditions
    C1 = r_n^-d integral |q - eta_n(s)|^2 and C2 = r_n^-d integral |grad phi_n|^2 |eta_n(s)|^2,
    so T2 = ||chi||_inf sqrt(C1) and T3 = ||chi||_inf sqrt(C2). With a
    mollified profile eta~_n replaces eta_n in both (it is the profile that
    F_n uses). When phi_n vanishes identically the planar report is returned.
    """
    planar = spec.planar
    chi = chi or BumpProfile("poly", planar.d)
    planar.check_increasing(n_list)
    phis = {n: spec.phi_n(n) for n in n_list}
    if all(_is_zero_distortion(spec, n, phis[n], density) for n in n_list):
        rep = planar_residual_report(planar, lam, n_list, grid_h, chi, mollify, density, jobs)
        return SingularSequenceReport(rep.rows, rep.lam, "distorted",
                                      {"C1": [None] * len(rep.rows), "C2": [None] * len(rep.rows),
                                       "reduced_to_planar": True})

    def one(n):
        phi = phis[n]
        r, k, a, eta, eta_t, width = _prepare(planar, n, chi, mollify, phi=phi)
        h = float(grid_h(n) if callable(grid_h) else grid_h)
        gmax = 0.0  # max |grad s| = max |k + grad phi| on the ball
        c1 = c2 = 0.0
        for pts, w in ball_rule(planar.d, a, k, r, density):
            s = (pts - a) @ k + phi.eval(pts)
            g = phi.grad(pts)
            if g.any_flagged:
                bad = pts[np.argmax(g.flagged)].tolist()
                raise DomainError("distortion is not differentiable here", point=bad)
            gn2 = np.sum(g.grad**2, axis=-1)
            gmax = max(gmax, float(np.sqrt(np.sum((g.grad + k) ** 2, axis=-1).max())))
            e = eta_t(s)
            c1 += float(np.dot((planar.q.eval(pts) - e) ** 2, w))
            c2 += float(np.dot(gn2 * e * e, w))
        c1 *= r ** (-planar.d)
        c2 *= r ** (-planar.d)
        _check_resolution(eta_t, -r, r, h, r, grad_s_max=gmax)
        element = WeylElement(r, a, k, lam, chi, eta_t, phi)
        res, err, norm = _measure(element, planar.q, lam, h)
        T1 = chi.grad_norm / r
        T2 = chi.sup * math.sqrt(max(c1, 0.0))
        T3 = chi.sup * math.sqrt(max(c2, 0.0))
        return (int(n), r, norm, res, T1, T2, T3, err), c1, c2

    out = _run(one, list(n_list), jobs)
    rows = [o[0] for o in out]
    return SingularSequenceReport(rows, float(lam), "distorted",
                                  {"C1": [o[1] for o in out], "C2": [o[2] for o in out],
                                   "reduced_to_planar": False})


# --- the Schnol-type sequence ---------------------------------------------------------


def _smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1 - u, 1.0)), 0.0)
    return a / (a + b)


def _dsmooth_step(u):
    u = np.asarray(u, dtype=float)
    inside = (u > 0) & (u < 1)
    uu = np.where(inside, u, 0.5)
    a = np.exp(-1.0 / uu)
    b = np.exp(-1.0 / (1 - uu))
    da = a / uu**2
    db = -b / (1 - uu) ** 2
    return np.where(inside, (da * b - a * db) / (a + b) ** 2, 0.0)


@dataclass(frozen=True)
class PlateauCutoff:
    """chi = 1 on |x| <= 1, 0 on |x| >= 2, smooth and radially decreasing."""

    def radial(self, s):
        return 1.0 - _smooth_step(np.asarray(s, dtype=float) - 1.0)

    def dradial(self, s):
        return -_dsmooth_step(np.asarray(s, dtype=float) - 1.0)


def _radial_moments(f, n, cut, d, tol, angular_order=24):
    """(integral chi(x/n)^2 |f|^2, integral |grad chi|(x/n)^2 |f|^2) on |x| <= 2n."""
    area = 2 * np.pi if d == 2 else 4 * np.pi
    if hasattr(f, "modulus"):
        def mag2(r):
            return area * np.asarray(f.modulus(r), dtype=float) ** 2
    else:
        dirs, w = _sphere_rule(d, angular_order)

        def mag2(r):
            vals = np.asarray(f(r[..., None, None] * dirs))
            return np.sum(np.abs(vals) ** 2, axis=-1) @ w

    def m0(r):
        return cut.radial(r / n) ** 2 * mag2(r) * r ** (d - 1)

    def m1(r):
        return cut.dradial(r / n) ** 2 * mag2(r) * r ** (d - 1)

    # chi(x/n) = 1 on [0, n]: split there so the plateau is integrated without the transition
    plateau = quadrature.integrate(lambda r: mag2(r) * r ** (d - 1), 0.0, n, tol)
    trans0 = quadrature.integrate(m0, n, 2 * n, tol)
    trans1 = quadrature.integrate(m1, n, 2 * n, tol)
    return plateau + trans0, trans1


def schnol_residual(f, q, lam, n_list, tol=1e-10, d=None, check_grid=None, check_tol=None, jobs=None):
    """||(H - lam) f_n|| for f_n = chi_n f / ||chi_n f|| from the exact identity.

    With (H - lam) f = 0 the only surviving term is -i (M.grad chi_n) f, and
    |(M.v) u| = |v| |u| gives

        residual_n = (1/n) (integral |grad chi|(x/n)^2 |f|^2)^(1/2) / ||chi(./n) f||.

    lam is absorbed into q (q - lam). When ``check_grid`` is given, the
    eigen-equation is verified there first (sup residual <= ``check_tol``).
    """
    d = d or getattr(f, "d", None)
    if d not in (2, 3):
        raise ArgumentError("dimension of the field is unknown; pass d", key="d")
    qs = q if isinstance(q, PotentialSpec) or q is None else PotentialSpec.from_text(str(q), d=d)
    shifted = qs.shifted(-lam) if qs is not None else None
    if check_grid is not None:
        fld = SpinorField.from_closure(check_grid, f)
        sup, _ = residual_norm(fld, shifted, 0.0)
        limit = check_tol if check_tol is not None else 1e-6
        if sup > limit:
            raise InvariantViolation(f"(H - lam) f has sup residual {sup:.3g} > {limit:.3g} on the check grid")
    cut = PlateauCutoff()

    def one(n):
        if not n > 0:
            raise ArgumentError(f"cutoff scale must be positive, got {n!r}", key="n_list")
        mass, grad_mass = _radial_moments(f, float(n), cut, d, tol)
        if not mass > 0:
            raise DomainError(f"f vanishes on the ball of radius {2 * n!r}; chi_n f = 0", point=float(n))
        res = math.sqrt(max(grad_mass, 0.0)) / (n * math.sqrt(mass))
        return (n, float(n), 1.0, res, res, 0.0, 0.0, 0.0)

    rows = _run(one, list(n_list), jobs)
    return SingularSequenceReport(rows, float(lam), "schnol")


def cutoff_constant(d=3, tol=1e-12):
    """||grad chi|| / ||chi|| for the plateau cutoff: the |f| = 1 residual is this over n."""
    cut = PlateauCutoff()
    m0 = quadrature.integrate(lambda s: cut.radial(s) ** 2 * s ** (d - 1), 0.0, 2.0, tol)
    m1 = quadrature.integrate(lambda s: cut.dradial(s) ** 2 * s ** (d - 1), 0.0, 2.0, tol)
    return math.sqrt(m1 / m0)


@dataclass(frozen=True)
class MassRatioReport:
    n: list
    mass: list  # M(n)
    ratio: list  # (M(2n) - M(n)) / (n^2 M(n))
    subsequence: list  # indices into n where the ratio reaches a new running minimum
    monotone: bool

    def rows(self):
        return list(zip(self.n, self.mass, self.ratio))

    def to_csv(self, path):
        return write_csv(path, ["n", "M_n", "ratio"], self.rows())


def mass_ratio_analysis(f, n_list, tol=1e-10, d=None):
    """M(n) = integral over |x| <= n of |f|^2 and the ratios driving the subsequence choice."""
    d = d or getattr(f, "d", None)
    ns = [float(n) for n in n_list]
    if any(n <= 0 for n in ns):
        raise ArgumentError("ball radii must be positive", key="n_list")
    cache = {}

    def M(n):
        if n not in cache:
            cache[n] = ball_mass(f, n, tol, d)
        return cache[n]

    mass = [M(n) for n in ns]
    ratio = []
    for n in ns:
        if M(n) <= 0:
            raise DomainError(f"f vanishes on the ball of radius {n!r}", point=n)
        ratio.append((M(2 * n) - M(n)) / (n * n * M(n)))
    order = sorted(range(len(ns)), key=lambda i: ns[i])
    monotone = all(M(ns[j]) >= M(ns[i]) - tol for i, j in zip(order, order[1:]))
    monotone &= all(M(2 * n) >= M(n) - tol for n in ns)
    sub, best = [], math.inf
    for i in order:
        if ratio[i] < best:
            best = ratio[i]
            sub.append(i)
    return MassRatioReport([n for n in ns], mass, ratio, sub, bool(monotone))
