"""Potential descriptions: Cartesian q(x), radial eta(|x|) and layered eta(x.k).

Every spec exposes pointwise values, gradients (forward-mode duals), the virial
density q + x.grad q, and, for radial and layered kinds, the one-dimensional
profile eta together with its antiderivative.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .. import quadrature
from ..clifford import unit_vector
from ..errors import ArgumentError, DomainError
from .dual import ARRAY_NAMESPACE, DUAL_NAMESPACE, SCALAR_NAMESPACE, Dual
from .expr import Expr, compile_expr, parse

CARTESIAN = "cartesian"
RADIAL = "radial"
LAYERED = "layered"
KINDS = (CARTESIAN, RADIAL, LAYERED)

_CARTESIAN_VARS = {2: {"x1", "x2"}, 3: {"x1", "x2", "x3"}}


@dataclass(frozen=True)
class GradResult:
    """Value, gradient and non-differentiability flags at a batch of points."""

    value: np.ndarray
    grad: np.ndarray
    flagged: np.ndarray

    @property
    def any_flagged(self):
        return bool(np.any(self.flagged))


class Profile:
    """A real function of one variable (eta(r) or eta(t)).

    Subclasses implement vectorized ``__call__``, a fast ``scalar`` path,
    ``derivative`` and ``antiderivative``.
    """

    smooth = True

    def scalar(self, t):
        return float(self(np.float64(t)))

    def derivative(self, t):
        raise NotImplementedError

    def antiderivative(self, t, tol=1e-10):
        """Integral from 0 to ``t`` (elementwise) with absolute error <= tol."""
        t = np.asarray(t, dtype=float)
        return quadrature.cumulative_integral(self, t, tol)

    def antiderivative_table(self, t_min, t_max, tol=1e-10, spacing=0.02):
        """Cubic Hermite interpolant of the antiderivative on ``[t_min, t_max]``.

        Node values come from adaptive quadrature, node slopes are exact profile
        values, so the interpolant is accurate to O(spacing^4) between nodes.
        """
        lo, hi = min(t_min, 0.0), max(t_max, 0.0)
        n = max(int(np.ceil((hi - lo) / spacing)), 1)
        nodes = np.linspace(lo, hi, n + 1)
        values = self.antiderivative(nodes, tol)
        return CubicHermiteSpline(nodes, values, np.asarray(self(nodes), dtype=float), extrapolate=False)

    def mean(self, period, tol=1e-12):
        """Average over one period [0, period]."""
        return quadrature.integrate(self, 0.0, period, tol) / period


class ExprProfile(Profile):
    """Profile backed by a DSL expression in a single variable (``r`` or ``t``)."""

    def __init__(self, expr, var):
        if isinstance(expr, str):
            expr = parse(expr)
        extra = expr.variables() - {var}
        if extra:
            raise ArgumentError(
                f"profile in {var!r} uses variable(s) {', '.join(sorted(extra))}", key="eta"
            )
        self.expr = expr
        self.var = var
        self._array = compile_expr(expr, ARRAY_NAMESPACE)
        self._scalar = compile_expr(expr, SCALAR_NAMESPACE)
        self._dual = compile_expr(expr, DUAL_NAMESPACE)
        self.smooth = "abs" not in expr.functions()

    def __repr__(self):
        return f"ExprProfile({str(self.expr)!r}, {self.var!r})"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        try:
            out = self._array(**{self.var: t})
        except DomainError as err:
            idx = getattr(err, "index", None)
            at = t[idx] if idx is not None else t
            raise DomainError(str(err), point={self.var: at}) from None
        out = np.asarray(out, dtype=float)
        return out if out.shape == t.shape else np.broadcast_to(out, t.shape).copy()

    def scalar(self, t):
        try:
            return float(self._scalar(**{self.var: t}))
        except (ValueError, ZeroDivisionError, OverflowError) as err:
            raise DomainError(str(err), point={self.var: t}) from None
        except DomainError as err:
            raise DomainError(str(err), point={self.var: t}) from None

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        res = self._dual(**{self.var: Dual.variable(t, 0, 1)})
        if not isinstance(res, Dual):
            return np.zeros(t.shape), np.zeros(t.shape, dtype=bool)
        return np.broadcast_to(res.grad[0], t.shape).copy(), np.broadcast_to(res.bad, t.shape).copy()


class SampledProfile(Profile):
    """Tabulated profile with linear interpolation (constant extrapolation).

    The antiderivative is computed exactly for the piecewise-linear interpolant.
    """

    smooth = False

    def __init__(self, nodes, values):
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 2:
            raise ArgumentError("sampled profile needs matching 1-D arrays of length >= 2", key="eta")
        if np.any(np.diff(nodes) <= 0):
            raise ArgumentError("sampled profile nodes must be strictly increasing", key="eta")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(values))):
            raise ArgumentError("sampled profile contains non-finite entries", key="eta")
        self.nodes = nodes
        self.values = values
        seg = 0.5 * (values[1:] + values[:-1]) * np.diff(nodes)
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._zero = float(self._primitive(np.array([0.0]))[0])

    @classmethod
    def from_csv(cls, path):
        """Read a two-column CSV of (r, eta) rows; a non-numeric header is skipped."""
        rows = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = [p.strip() for p in line.split(",")]
                try:
                    rows.append((float(parts[0]), float(parts[1])))
                except (ValueError, IndexError):
                    if rows:
                        raise ArgumentError(f"{path}:{lineno}: expected two numeric columns", key="eta")
        arr = np.array(rows, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    def __repr__(self):
        return f"SampledProfile(<{self.nodes.size} nodes on [{self.nodes[0]}, {self.nodes[-1]}]>)"

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self.nodes, self.values)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        slopes = np.diff(self.values) / np.diff(self.nodes)
        idx = np.clip(np.searchsorted(self.nodes, t, side="right") - 1, 0, slopes.size - 1)
        inside = (t > self.nodes[0]) & (t < self.nodes[-1])
        d = np.where(inside, slopes[idx], 0.0)
        at_node = np.isin(t, self.nodes[1:-1])
        return d, at_node

    def _primitive(self, t):
        # integral from nodes[0] to t of the interpolant (constant extension outside)
        t = np.asarray(t, dtype=float)
        x0, x1 = self.nodes[0], self.nodes[-1]
        tc = np.clip(t, x0, x1)
        idx = np.clip(np.searchsorted(self.nodes, tc, side="right") - 1, 0, self.nodes.size - 2)
        xa = self.nodes[idx]
        ya = self.values[idx]
        slope = (self.values[idx + 1] - ya) / (self.nodes[idx + 1] - xa)
        dx = tc - xa
        inner = self._cum[idx] + ya * dx + 0.5 * slope * dx * dx
        below = np.minimum(t - x0, 0.0) * self.values[0]
        above = np.maximum(t - x1, 0.0) * self.values[-1]
        return inner + below + above

    def antiderivative(self, t, tol=1e-10):
        return self._primitive(t) - self._zero

    def antiderivative_table(self, t_min, t_max, tol=1e-10, spacing=0.02):
        return self.antiderivative


def as_profile(eta, var="r"):
    """Coerce a string, Expr or Profile into a :class:`Profile`."""
    if isinstance(eta, Profile):
        return eta
    if isinstance(eta, (str, Expr)):
        return ExprProfile(eta, var)
    raise ArgumentError(f"cannot interpret {eta!r} as a profile", key="eta")


@dataclass(frozen=True)
class PotentialSpec:
    """A scalar potential q on R^d.

    kind ``cartesian``: expression in x1..xd.
    kind ``radial``: q(x) = eta(|x|), expression in r, optional period.
    kind ``layered``: q(x) = eta(x.k), expression in t, unit direction k.
    """

    expr: Expr
    kind: str
    d: int = 3
    period: float = None
    direction: tuple = None
    _fns: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"unknown potential kind {self.kind!r}", key="kind")
        if self.d not in (2, 3):
            raise ArgumentError(f"dimension must be 2 or 3, got {self.d!r}", key="d")
        allowed = {CARTESIAN: _CARTESIAN_VARS[self.d], RADIAL: {"r"}, LAYERED: {"t"}}[self.kind]
        extra = self.expr.variables() - allowed
        if extra:
            raise ArgumentError(
                f"variable(s) {', '.join(sorted(extra))} not allowed in a {self.kind} "
                f"potential (allowed: {', '.join(sorted(allowed))})",
                key="q",
            )
        if self.period is not None:
            if self.kind != RADIAL:
                raise ArgumentError("only radial potentials carry a period", key="p")
            if not (np.isfinite(self.period) and self.period > 0):
                raise ArgumentError(f"period must be positive, got {self.period!r}", key="p")
        if self.kind == LAYERED:
            k = self.direction if self.direction is not None else (1.0,) + (0.0,) * (self.d - 1)
            k = unit_vector(k, normalize=False)
            if k.shape[0] != self.d:
                raise ArgumentError(f"direction has {k.shape[0]} components, expected {self.d}", key="k")
            object.__setattr__(self, "direction", tuple(float(c) for c in k))
        elif self.direction is not None:
            raise ArgumentError("only layered potentials carry a direction", key="k")
        var = {CARTESIAN: None, RADIAL: "r", LAYERED: "t"}[self.kind]
        fns = {
            "array": compile_expr(self.expr, ARRAY_NAMESPACE),
            "dual": compile_expr(self.expr, DUAL_NAMESPACE),
            "profile": ExprProfile(self.expr, var) if var else None,
        }
        object.__setattr__(self, "_fns", fns)

    @classmethod
    def from_text(cls, text, d=3, kind=None, period=None, direction=None):
        """Parse ``text``; the kind is inferred from its variables when not given."""
        expr = parse(text)
        if kind is None:
            used = expr.variables()
            if "r" in used and not used - {"r"}:
                kind = RADIAL
            elif "t" in used and not used - {"t"}:
                kind = LAYERED
            elif period is not None:
                kind = RADIAL
            elif direction is not None:
                kind = LAYERED
            else:
                kind = CARTESIAN
        if direction is not None:
            direction = tuple(float(c) for c in unit_vector(direction))
        return cls(expr, kind, d, period, direction)

    @property
    def k(self):
        return None if self.direction is None else np.array(self.direction)

    @property
    def profile(self):
        """The 1-D profile eta for radial/layered specs (None for Cartesian)."""
        return self._fns["profile"]

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.d,):
            raise ArgumentError(f"points must have trailing dimension {self.d}, got shape {x.shape}", key="x")
        return x

    def _reduced(self, x):
        if self.kind == RADIAL:
            return {"r": np.sqrt(np.sum(x * x, axis=-1))}
        if self.kind == LAYERED:
            return {"t": x @ self.k}
        return {f"x{i + 1}": x[..., i] for i in range(self.d)}

    def _raise_at(self, err, x):
        idx = getattr(err, "index", None)
        if idx is not None and x.ndim > 1:
            point = x[idx]
        else:
            point = x
        raise DomainError(str(err), point=np.asarray(point).tolist()) from None

    def eval(self, x):
        """q at points ``x`` of shape (..., d)."""
        x = self._points(x)
        args = self._reduced(x)
        try:
            out = self._fns["array"](**args)
        except DomainError as err:
            self._raise_at(err, x)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape[:-1]).copy()

    __call__ = eval

    def grad(self, x):
        """Gradient of q by forward-mode duals; returns a :class:`GradResult`."""
        x = self._points(x)
        shape = x.shape[:-1]
        try:
            if self.kind == CARTESIAN:
                args = {f"x{i + 1}": Dual.variable(x[..., i], i, self.d) for i in range(self.d)}
                res = self._fns["dual"](**args)
                if not isinstance(res, Dual):
                    val = np.broadcast_to(np.asarray(res, dtype=float), shape).copy()
                    return GradResult(val, np.zeros(shape + (self.d,)), np.zeros(shape, dtype=bool))
                val = np.broadcast_to(res.val, shape).copy()
                g = np.moveaxis(np.broadcast_to(res.grad, (self.d,) + shape), 0, -1).copy()
                return GradResult(val, g, np.broadcast_to(res.bad, shape).copy())
            if self.kind == LAYERED:
                t = x @ self.k
                val = self.eval(x)
                deta, bad = self.profile.derivative(t)
                return GradResult(val, deta[..., None] * self.k, bad)
            r = np.sqrt(np.sum(x * x, axis=-1))
            val = self.eval(x)
            deta, bad = self.profile.derivative(r)
            origin = r == 0
            with np.errstate(invalid="ignore", divide="ignore"):
                unit = np.where(origin[..., None], 0.0, x / np.where(origin, 1.0, r)[..., None])
            # grad of eta(|x|) at the origin exists only when eta'(0) = 0
            bad = bad | (origin & (deta != 0))
            return GradResult(val, deta[..., None] * unit, bad)
        except DomainError as err:
            self._raise_at(err, x)

    def x_dot_grad(self, x):
        """(x . grad) q, using r eta'(r) for radial and t eta'(t) for layered specs."""
        x = self._points(x)
        if self.kind == RADIAL:
            r = np.sqrt(np.sum(x * x, axis=-1))
            deta, _ = self.profile.derivative(r)
            return r * deta
        if self.kind == LAYERED:
            t = x @ self.k
            deta, _ = self.profile.derivative(t)
            return t * deta
        g = self.grad(x)
        return np.sum(x * g.grad, axis=-1)

    def virial_density(self, x):
        """v(x) = q(x) + (x . grad q)(x)."""
        return self.eval(x) + self.x_dot_grad(x)

    def shifted(self, c):
        """The same potential with the constant ``c`` added."""
        from .expr import BinOp, Num

        if c == 0:
            return self
        term = BinOp("+", self.expr, Num(float(c))) if c > 0 else BinOp("-", self.expr, Num(float(-c)))
        return PotentialSpec(term, self.kind, self.d, self.period, self.direction)


def antiderivative_profile(spec, t, tol=1e-10):
    """xi(t) = integral from 0 to t of the profile of a radial or layered spec.

    Raises :class:`QuadratureError` (carrying the achieved estimate) if the
    adaptive rule cannot reach ``tol``.
    """
    if isinstance(spec, PotentialSpec):
        if spec.kind == CARTESIAN:
            raise ArgumentError("Cartesian potentials have no one-dimensional profile", key="q")
        profile = spec.profile
    else:
        profile = as_profile(spec, "t")
    out = profile.antiderivative(np.asarray(t, dtype=float), tol)
    return float(out) if np.ndim(out) == 0 else out
