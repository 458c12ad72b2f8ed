"""Closed-form solutions, the Dirac stencil on uniform grids, and norms.

Grid fields are stored as an *envelope* g together with an optional constant
carrier wavevector kappa, the physical field being exp(i kappa.x) g(x). The
derivative of the carrier is applied analytically,

    -i alpha.grad (e^{i kappa.x} g) = e^{i kappa.x} [ (alpha.kappa) g - i alpha.grad g ],

so fast plane-wave oscillation never has to be resolved by the stencil.

Large grids are processed in slabs along the first axis; a field backed by a
closure is never materialized in full when only residual norms are needed.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, quadrature
from .clifford import dirac_dot, dirac_matrices, plus_eigenspinor, spinor_dim, unit_vector
from .errors import ArgumentError
from .potential import PotentialSpec, as_profile

STENCIL_RADIUS = 2
# 4th-order central first-derivative weights for offsets -2..2 (divide by h)
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0

# target number of grid nodes per processed slab
_SLAB_NODES = 1 << 21


# --- grids and fields -------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on the box center + [-L, L]^d with spacing h.

    ``margin`` is the number of boundary layers excluded when a stencil is
    applied; it must be at least the stencil radius.
    """

    d: int
    L: float
    h: float
    margin: int = STENCIL_RADIUS
    center: tuple = None

    def __post_init__(self):
        spinor_dim(self.d)
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ArgumentError(f"grid spacing must be positive, got {self.h!r}", key="h")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ArgumentError(f"box half-width must be positive, got {self.L!r}", key="L")
        cells = 2 * self.L / self.h
        if abs(cells - round(cells)) > 1e-9 * max(cells, 1.0):
            raise ArgumentError(f"2L/h = {cells!r} is not an integer", key="h")
        if self.margin < 0 or int(self.margin) != self.margin:
            raise ArgumentError(f"margin must be a nonnegative integer, got {self.margin!r}", key="margin")
        if 2 * self.margin >= round(cells) + 1:
            raise ArgumentError("margin leaves no interior nodes", key="margin")
        c = (0.0,) * self.d if self.center is None else tuple(float(v) for v in self.center)
        if len(c) != self.d:
            raise ArgumentError(f"grid center has {len(c)} components, expected {self.d}", key="center")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "margin", int(self.margin))

    @property
    def n(self):
        """Nodes per axis."""
        return int(round(2 * self.L / self.h)) + 1

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def size(self):
        return self.n**self.d

    def axis(self, i=0):
        return self.center[i] + self.h * (np.arange(self.n) - (self.n - 1) / 2)

    def points(self, first=slice(None)):
        """Coordinates of shape (..., d); ``first`` restricts the first axis."""
        axes = [self.axis(i) for i in range(self.d)]
        axes[0] = axes[0][first]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def interior(self):
        """The grid of nodes left after removing ``margin`` layers on each side."""
        if self.margin == 0:
            return self
        return GridSpec(self.d, self.L - self.margin * self.h, self.h, 0, self.center)

    def header(self):
        return {"d": self.d, "L": self.L, "h": self.h, "margin": self.margin, "center": list(self.center)}


@dataclass(frozen=True)
class SpinorField:
    """A spinor field sampled on a grid, optionally backed by a closure.

    ``values`` (shape grid.shape + (m,)) or ``closure`` (x -> envelope values)
    give the envelope g; the field is exp(i carrier.x) g.
    """

    grid: GridSpec
    values: np.ndarray = None
    closure: object = field(default=None, compare=False)
    carrier: tuple = None

    def __post_init__(self):
        m = spinor_dim(self.grid.d)
        if self.values is None and self.closure is None:
            raise ArgumentError("a field needs values or a closure", key="field")
        if self.values is not None:
            vals = np.asarray(self.values, dtype=complex)
            if vals.shape != self.grid.shape + (m,):
                raise ArgumentError(
                    f"field values have shape {vals.shape}, expected {self.grid.shape + (m,)}", key="field"
                )
            if not np.all(np.isfinite(vals)):
                raise ArgumentError("field contains non-finite values", key="field")
            vals.setflags(write=False)
            object.__setattr__(self, "values", vals)
        if self.carrier is not None:
            kappa = tuple(float(c) for c in np.asarray(self.carrier, dtype=float).reshape(-1))
            if len(kappa) != self.grid.d:
                raise ArgumentError("carrier dimension does not match the grid", key="carrier")
            object.__setattr__(self, "carrier", kappa)

    @property
    def m(self):
        return spinor_dim(self.grid.d)

    @classmethod
    def from_closure(cls, grid, solution, demodulate=True):
        """Wrap a closed-form solution; its carrier is split off when available."""
        if demodulate and getattr(solution, "carrier", None) is not None:
            return cls(grid, closure=solution.envelope, carrier=tuple(solution.carrier))
        return cls(grid, closure=solution)

    def envelope_block(self, first=slice(None)):
        """Envelope values on the sub-block selected along the first axis."""
        if self.values is not None:
            return self.values[first]
        out = np.asarray(self.closure(self.grid.points(first)), dtype=complex)
        if not np.all(np.isfinite(out)):
            raise ArgumentError("field closure produced non-finite values", key="field")
        return out

    def phase(self, first=slice(None)):
        if self.carrier is None:
            return None
        return np.exp(1j * (self.grid.points(first) @ np.array(self.carrier)))

    def full_values(self):
        """Physical field values exp(i carrier.x) g on the whole grid."""
        g = self.envelope_block()
        ph = self.phase()
        return g if ph is None else g * ph[..., None]

    def materialize(self):
        if self.values is not None:
            return self
        return SpinorField(self.grid, self.envelope_block(), None, self.carrier)

    # --- import / export ---------------------------------------------------

    def save(self, path, fmt=None):
        """Write the physical field values.

        ``csv``: comment header ``# diracspec-field {json}`` then rows
        ``index, re_1, im_1, ..., re_m, im_m`` with the flat C-order node index.
        ``bin``: the bytes ``DSPF1\\n``, one JSON header line, then the values
        as little-endian complex128 in C order.
        """
        fmt = fmt or ("csv" if str(path).endswith(".csv") else "bin")
        vals = self.full_values().reshape(-1, self.m)
        header = dict(self.grid.header(), m=self.m)
        if fmt == "csv":
            with open(path, "w") as fh:
                fh.write(f"# diracspec-field {json.dumps(header, sort_keys=True)}\n")
                cols = ",".join(f"re{j},im{j}" for j in range(1, self.m + 1))
                fh.write(f"index,{cols}\n")
                for i, row in enumerate(vals):
                    parts = ",".join(f"{repr(float(c.real))},{repr(float(c.imag))}" for c in row)
                    fh.write(f"{i},{parts}\n")
        elif fmt == "bin":
            with open(path, "wb") as fh:
                fh.write(b"DSPF1\n")
                fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
                fh.write(np.ascontiguousarray(vals, dtype="<c16").tobytes())
        else:
            raise ArgumentError(f"unknown field format {fmt!r}", key="format")

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            first = fh.readline()
            if first == b"DSPF1\n":
                header = json.loads(fh.readline())
                raw = np.frombuffer(fh.read(), dtype="<c16")
            else:
                text = first.decode()
                if not text.startswith("# diracspec-field "):
                    raise ArgumentError(f"{path}: not a field file", key="path")
                header = json.loads(text[len("# diracspec-field "):])
                fh.readline()
                data = np.loadtxt(fh, delimiter=",", ndmin=2)
                raw = data[:, 1::2] + 1j * data[:, 2::2]
        grid = GridSpec(header["d"], header["L"], header["h"], header["margin"], tuple(header["center"]))
        return cls(grid, np.asarray(raw, dtype=complex).reshape(grid.shape + (header["m"],)))


# --- closed-form solutions -------------------------------------------------


def _unit_spinor(phi0, m):
    phi0 = np.asarray(phi0, dtype=complex).reshape(-1)
    if phi0.shape != (m,):
        raise ArgumentError(f"spinor must have {m} components, got {phi0.shape[0]}", key="phi0")
    n = np.linalg.norm(phi0)
    if abs(n - 1.0) > 1e-12:
        raise ArgumentError(f"spinor must have unit norm, got {n!r}", key="phi0")
    return phi0


class _BracketSolution:
    """<x>^{-p} (I + i M.x) phi0 with the Dirac matrices M of dimension d."""

    def __init__(self, phi0, d, power):
        self.d = d
        self.phi0 = _unit_spinor(phi0, spinor_dim(d))
        self.power = power
        # rows: M_j phi0
        mphi = 1j * np.einsum("jab,b->ja", dirac_matrices(d), self.phi0)
        self._lin = np.ascontiguousarray(mphi[..., None].view(float).reshape(d, -1))
        self._const = self.phi0.view(float).copy()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ArgumentError(f"points must have trailing dimension {self.d}", key="x")
        s = 1.0 + sum(x[..., j] ** 2 for j in range(self.d))
        # <x>^{-power} without a generic float pow
        w = 1.0 / s ** (self.power // 2)
        if self.power % 2:
            w /= np.sqrt(s)
        # phi0 + i (M.x) phi0 built in interleaved real form, then viewed as complex
        out = x @ self._lin
        out += self._const
        out *= w[..., None]
        return out.view(complex)

    def modulus(self, r):
        """|f| as a function of |x| (the product identity makes it radial)."""
        r = np.asarray(r, dtype=float)
        return (1.0 + r * r) ** (0.5 - 0.5 * self.power)


class ZeroMode3D(_BracketSolution):
    """f(x) = <x>^{-3} (I_4 + i alpha.x) phi0, annihilated by -i alpha.grad - 3/<x>^2."""

    potential = "-3/(1+r^2)"

    def __init__(self, phi0=None):
        super().__init__(np.eye(4)[0] if phi0 is None else phi0, 3, 3)


class ZeroResonance2D(_BracketSolution):
    """psi(x) = <x>^{-2} (I_2 + i sigma.x) phi0, annihilated by -i sigma.grad - 2/<x>^2."""

    potential = "-2/(1+r^2)"

    def __init__(self, phi0=None):
        super().__init__(np.eye(2)[0] if phi0 is None else phi0, 2, 2)


def zero_mode_3d(x, phi0):
    """Evaluate the three-dimensional zero mode at points ``x`` (shape (..., 3))."""
    return ZeroMode3D(phi0)(x)


def zero_resonance_2d(x, phi0):
    """Evaluate the two-dimensional zero resonance at points ``x`` (shape (..., 2))."""
    return ZeroResonance2D(phi0)(x)


class LayeredSolution:
    """f(x) = exp(-i (M.k) xi(x.k)) exp(i lam x.k) phi0 with xi' = eta and (M.k) phi0 = phi0.

    Solves (-i M.grad + eta(x.k)) f = lam f for the layered potential eta(x.k).
    ``phi0`` defaults to :func:`plus_eigenspinor`; a supplied spinor must lie in
    the +1 eigenspace of M.k, otherwise f is not an eigensolution.

    xi is evaluated by adaptive quadrature for small point sets and by a cubic
    Hermite table (nodes from the same quadrature) for large ones.
    """

    TABLE_THRESHOLD = 4096

    def __init__(self, lam, k, eta, phi0=None, tol=1e-10, argument=None):
        self.lam = float(lam)
        if isinstance(eta, PotentialSpec):
            if eta.kind != "layered":
                raise ArgumentError("layered solutions need a layered potential", key="q")
            if k is None:
                k = eta.k
            eta = eta.profile
        self.k = unit_vector(k, normalize=False)
        self.d = self.k.shape[0]
        self.profile = as_profile(eta, "t")
        self.tol = tol
        self.kmat = dirac_dot(self.k)
        if phi0 is None:
            phi0 = plus_eigenspinor(self.k)
        self.phi0 = _unit_spinor(phi0, spinor_dim(self.d))
        if np.linalg.norm(self.kmat @ self.phi0 - self.phi0) > 1e-12:
            raise ArgumentError("phi0 is not a +1 eigenspinor of the direction matrix", key="phi0")
        # argument(x) -> t at which xi is evaluated; default x.k
        self.argument = argument or (lambda x: x @ self.k)
        self._table = None
        self._table_range = None

    @property
    def carrier(self):
        return self.lam * self.k

    def xi(self, t):
        t = np.asarray(t, dtype=float)
        if t.size <= self.TABLE_THRESHOLD:
            return self.profile.antiderivative(t, self.tol)
        lo, hi = float(np.min(t)), float(np.max(t))
        if self._table is None or lo < self._table_range[0] or hi > self._table_range[1]:
            pad = 1.0
            lo, hi = lo - pad, hi + pad
            if self._table_range is not None:
                lo, hi = min(lo, self._table_range[0]), max(hi, self._table_range[1])
            self._table = self.profile.antiderivative_table(lo, hi, self.tol, spacing=0.01)
            self._table_range = (lo, hi)
        return self._table(t)

    def envelope(self, x):
        """exp(-i xi) phi0, using (M.k) phi0 = phi0; the carrier is left out."""
        x = np.asarray(x, dtype=float)
        xi = self.xi(self.argument(x))
        return np.exp(-1j * xi)[..., None] * self.phi0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(1j * self.lam * (x @ self.k))[..., None] * self.envelope(x)

    def modulus(self, r):
        return np.ones(np.shape(r))


def layered_eigensolution(lam, k, eta, x, tol=1e-10, phi0=None):
    """Evaluate the layered eigensolution at points ``x``."""
    return LayeredSolution(lam, k, eta, phi0, tol)(x)


# --- the stencil -------------------------------------------------------------


def _stencil_derivative(block, axis, h, lo, hi):
    """4th-order derivative along ``axis`` on indices lo..hi-1 of that axis."""
    sl = [slice(None)] * block.ndim
    out = None
    for w, off in zip(_D1, range(-2, 3)):
        if w == 0.0:
            continue
        sl[axis] = slice(lo + off, hi + off)
        term = w * block[tuple(sl)]
        out = term if out is None else out + term
    return out / h


def _slabs(grid):
    """Interior index ranges [i0, i1) along the first axis, sized for memory."""
    m, n = grid.margin, grid.n
    plane = n ** (grid.d - 1)
    step = max(1, _SLAB_NODES // plane)
    return [(i, min(i + step, n - m)) for i in range(m, n - m, step)]


def _kinetic_numpy(g, mats, h, m, n, rows):
    d = mats.shape[0]
    out = 0
    for j in range(d):
        if j == 0:
            sub = g[(slice(None),) + (slice(m, n - m),) * (d - 1)]
            dg = _stencil_derivative(sub, 0, h, STENCIL_RADIUS, STENCIL_RADIUS + rows)
        else:
            sub = g[(slice(STENCIL_RADIUS, STENCIL_RADIUS + rows),) + tuple(
                slice(None) if a == j else slice(m, n - m) for a in range(1, d)
            )]
            dg = _stencil_derivative(sub, j, h, m, n - m)
        out = out + dg @ (-1j * mats[j]).T
    return out


def _kinetic_compiled(g, mats, h, m, n, rows):
    d = mats.shape[0]
    out = np.empty((rows,) + (n - 2 * m,) * (d - 1) + (mats.shape[1],), dtype=complex)
    kernel = _kernels.dirac_stencil_3d if d == 3 else _kernels.dirac_stencil_2d
    col, coef = _kernels.monomial_form(-1j * mats)
    kernel(np.ascontiguousarray(g), col, coef, 1.0 / h, m, out)
    return out


def _dirac_block(fld, q, lam, i0, i1, compiled=True):
    """Envelope of (-i M.grad + q - lam) f on interior nodes with first index in [i0, i1)."""
    grid = fld.grid
    d, h, m, n = grid.d, grid.h, grid.margin, grid.n
    rows = i1 - i0
    mats = dirac_matrices(d)
    g = fld.envelope_block(slice(i0 - STENCIL_RADIUS, i1 + STENCIL_RADIUS))
    kinetic = _kinetic_compiled if compiled else _kinetic_numpy
    out = kinetic(g, mats, h, m, n, rows)
    inner = (slice(STENCIL_RADIUS, STENCIL_RADIUS + rows),) + (slice(m, n - m),) * (d - 1)
    g0 = g[inner]
    pts = grid.points(slice(i0, i1))[(slice(None),) + (slice(m, n - m),) * (d - 1)]
    if q is not None:
        qv = q.eval(pts) if isinstance(q, PotentialSpec) else np.asarray(q(pts), dtype=float)
        out += (qv - lam)[..., None] * g0
    elif lam != 0:
        out -= lam * g0
    if fld.carrier is not None:
        out += g0 @ dirac_dot(np.array(fld.carrier)).T
    return out


def _check_margin(fld):
    if fld.grid.margin < STENCIL_RADIUS:
        raise ArgumentError(
            f"grid margin {fld.grid.margin} is smaller than the stencil radius {STENCIL_RADIUS}", key="margin"
        )


def apply_dirac(fld, q=None, lam=0.0, compiled=True):
    """(-i M.grad + q - lam) f on the interior nodes, as a new field.

    The result lives on ``fld.grid.interior()`` and carries the same carrier.
    ``q`` may be a :class:`PotentialSpec`, a callable of points, or None (q = 0).
    ``compiled=False`` selects the slower pure-numpy stencil.
    """
    _check_margin(fld)
    parts = [_dirac_block(fld, q, lam, i0, i1, compiled) for i0, i1 in _slabs(fld.grid)]
    return SpinorField(fld.grid.interior(), np.concatenate(parts, axis=0), None, fld.carrier)


def _abs2(v):
    """Squared spinor norm at each node."""
    r = np.ascontiguousarray(v).view(float)
    return np.einsum("...i,...i->...", r, r)


def residual_norm(fld, q=None, lam=0.0):
    """Sup and L2 norms of (H - lam) f over the interior nodes.

    The L2 norm uses the trapezoid rule on the interior box. Slabs are reduced
    in a fixed order, so the result does not depend on how the work is split.
    """
    _check_margin(fld)
    grid = fld.grid
    d, m, n = grid.d, grid.margin, grid.n
    inner_n = n - 2 * m
    w_in = np.ones(inner_n)
    w_in[0] = w_in[-1] = 0.5
    sup = 0.0
    sq = 0.0
    for i0, i1 in _slabs(grid):
        res = _dirac_block(fld, q, lam, i0, i1)
        mag2 = _abs2(res)
        sup = max(sup, float(np.sqrt(mag2.max())))
        w = w_in[i0 - m:i1 - m]
        for _ in range(d - 1):
            w = np.multiply.outer(w, w_in)
        sq += float(np.sum(w * mag2))
    return sup, math.sqrt(sq * grid.h**d)


def grid_l2_norm(fld):
    """Trapezoid L2 norm of the field over its whole grid."""
    grid = fld.grid
    w1 = np.ones(grid.n)
    w1[0] = w1[-1] = 0.5
    plane = grid.n ** (grid.d - 1)
    step = max(1, _SLAB_NODES // plane)
    sq = 0.0
    for i0 in range(0, grid.n, step):
        i1 = min(i0 + step, grid.n)
        g = fld.envelope_block(slice(i0, i1))
        mag2 = _abs2(g)
        w = w1[i0:i1]
        for _ in range(grid.d - 1):
            w = np.multiply.outer(w, w1)
        sq += float(np.sum(w * mag2))
    return math.sqrt(sq * grid.h**grid.d)


# --- norms -------------------------------------------------------------------


def _sphere_rule(d, order):
    """Directions and weights integrating smooth functions over the unit sphere."""
    if d == 2:
        phi = 2 * np.pi * np.arange(2 * order) / (2 * order)
        dirs = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return dirs, np.full(phi.size, 2 * np.pi / phi.size)
    z, wz = np.polynomial.legendre.leggauss(order)
    phi = 2 * np.pi * np.arange(2 * order) / (2 * order)
    zz, pp = np.meshgrid(z, phi, indexing="ij")
    s = np.sqrt(1 - zz**2)
    dirs = np.stack([s * np.cos(pp), s * np.sin(pp), zz], axis=-1).reshape(-1, 3)
    w = np.multiply.outer(wz, np.full(phi.size, 2 * np.pi / phi.size)).reshape(-1)
    return dirs, w


def weighted_l2_norm(f, s, R, tol=1e-10, d=None, angular_order=24):
    """(integral over |x| <= R of <x>^{-2s} |f(x)|^2 dx)^{1/2}; R may be inf.

    When ``f`` exposes ``modulus(r)`` (|f| radial) the angular integral is the
    sphere area and only a 1-D adaptive quadrature remains. Otherwise |f|^2 is
    averaged over spheres with a product Gauss rule of ``angular_order``.
    """
    if s < 0:
        raise ArgumentError(f"weight exponent must be nonnegative, got {s!r}", key="s")
    if not R > 0:
        raise ArgumentError(f"radius must be positive, got {R!r}", key="R")
    d = d or getattr(f, "d", None)
    if d not in (2, 3):
        raise ArgumentError("dimension of the field is unknown; pass d", key="d")
    area = 2 * np.pi if d == 2 else 4 * np.pi
    if hasattr(f, "modulus"):
        def density(r):
            return area * r ** (d - 1) * (1 + r * r) ** (-s) * f.modulus(r) ** 2
    else:
        dirs, w = _sphere_rule(d, angular_order)

        def density(r):
            pts = r[..., None, None] * dirs
            vals = np.asarray(f(pts))
            mag2 = np.sum(np.abs(vals) ** 2, axis=-1)
            return r ** (d - 1) * (1 + r * r) ** (-s) * (mag2 @ w)

    sq = quadrature.integrate(density, 0.0, R, tol)
    return math.sqrt(max(sq, 0.0))


def ball_mass(f, R, tol=1e-10, d=None):
    """M(R) = integral over |x| <= R of |f|^2."""
    return weighted_l2_norm(f, 0.0, R, tol, d) ** 2
