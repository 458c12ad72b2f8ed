"""Vectorized forward-mode dual numbers and the evaluation namespaces.

A :class:`Dual` carries a value array, a gradient array with one leading axis
per seeded variable, and a boolean mask marking points where some operation
was not differentiable (``abs`` at 0, ``sqrt`` at 0, ...).
"""

import math

import numpy as np

from ..errors import DomainError


class Dual:
    __slots__ = ("val", "grad", "bad")
    # make numpy defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, val, grad, bad=False):
        self.val = val
        self.grad = grad
        self.bad = bad

    @classmethod
    def variable(cls, val, index, nvars):
        val = np.asarray(val, dtype=float)
        grad = np.zeros((nvars,) + val.shape)
        grad[index] = 1.0
        return cls(val, grad, np.zeros(val.shape, dtype=bool))

    def _chain(self, val, dval, bad=False):
        return Dual(val, self.grad * dval, self.bad | bad)

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.grad + other.grad, self.bad | other.bad)
        return Dual(self.val + other, self.grad, self.bad)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.grad - other.grad, self.bad | other.bad)
        return Dual(self.val - other, self.grad, self.bad)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.grad, self.bad)

    def __neg__(self):
        return Dual(-self.val, -self.grad, self.bad)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.val * other.val,
                self.grad * other.val + other.grad * self.val,
                self.bad | other.bad,
            )
        return Dual(self.val * other, self.grad * other, self.bad)

    __rmul__ = __mul__


def _first_index(mask):
    mask = np.asarray(mask)
    if mask.ndim == 0:
        return None
    return np.unravel_index(int(np.argmax(mask)), mask.shape)


def _fail(message, mask):
    err = DomainError(message)
    err.index = _first_index(mask)
    raise err


def _value(a):
    return a.val if isinstance(a, Dual) else a


# --- array namespace (numpy, checked) -------------------------------------


def _a_div(a, b):
    zero = np.asarray(b) == 0
    if np.any(zero):
        _fail("division by zero", zero)
    return a / b


def _a_pow(a, b):
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    bad = (a_arr < 0) & (b_arr != np.floor(b_arr))
    if np.any(bad):
        _fail("negative base raised to a non-integer power", bad)
    bad = (a_arr == 0) & (b_arr < 0)
    if np.any(bad):
        _fail("zero raised to a negative power", bad)
    return np.power(a_arr, b_arr)


def _a_sqrt(a):
    neg = np.asarray(a) < 0
    if np.any(neg):
        _fail("sqrt of a negative number", neg)
    return np.sqrt(a)


def _a_log(a):
    nonpos = np.asarray(a) <= 0
    if np.any(nonpos):
        _fail("log of a non-positive number", nonpos)
    return np.log(a)


ARRAY_NAMESPACE = {
    "_div": _a_div,
    "_pow": _a_pow,
    "_sin": np.sin,
    "_cos": np.cos,
    "_exp": np.exp,
    "_sqrt": _a_sqrt,
    "_abs": np.abs,
    "_log": _a_log,
    "_pi": math.pi,
}


# --- scalar namespace (math module, fast path for ODE right-hand sides) ----


def _s_div(a, b):
    if b == 0:
        raise DomainError("division by zero")
    return a / b


def _s_pow(a, b):
    if a < 0 and b != math.floor(b):
        raise DomainError("negative base raised to a non-integer power")
    if a == 0 and b < 0:
        raise DomainError("zero raised to a negative power")
    return math.pow(a, b)


def _s_sqrt(a):
    if a < 0:
        raise DomainError("sqrt of a negative number")
    return math.sqrt(a)


def _s_log(a):
    if a <= 0:
        raise DomainError("log of a non-positive number")
    return math.log(a)


SCALAR_NAMESPACE = {
    "_div": _s_div,
    "_pow": _s_pow,
    "_sin": math.sin,
    "_cos": math.cos,
    "_exp": math.exp,
    "_sqrt": _s_sqrt,
    "_abs": abs,
    "_log": _s_log,
    "_pi": math.pi,
}


# --- dual namespace ---------------------------------------------------------


def _d_div(a, b):
    bv = _value(b)
    zero = np.asarray(bv) == 0
    if np.any(zero):
        _fail("division by zero", zero)
    if not isinstance(b, Dual):
        return a * (1.0 / bv)
    inv = 1.0 / bv
    return b._chain(inv, -inv * inv) * a if isinstance(a, Dual) else b._chain(a * inv, -a * inv * inv)


def _d_pow(a, b):
    av, bv = _value(a), _value(b)
    val = _a_pow(av, bv)
    if isinstance(b, Dual):
        # a^b with a variable exponent: needs a > 0
        nonpos = np.asarray(av) <= 0
        if np.any(nonpos):
            _fail("variable exponent requires a positive base", nonpos)
        out = b._chain(val, val * np.log(av))
        if isinstance(a, Dual):
            out = out + a._chain(0.0 * val, bv * val / av)
        return out
    if not isinstance(a, Dual):
        return val
    with np.errstate(divide="ignore", invalid="ignore"):
        dval = bv * _a_pow_unchecked(av, bv - 1.0)
    bad = ~np.isfinite(dval)
    dval = np.where(bad, 0.0, dval)
    return a._chain(val, dval, bad)


def _a_pow_unchecked(a, b):
    return np.power(np.asarray(a, dtype=float), b)


def _unary(fn, dfn):
    def apply(a):
        if not isinstance(a, Dual):
            return fn(a)
        return a._chain(fn(a.val), dfn(a.val))

    return apply


def _d_sqrt(a):
    if not isinstance(a, Dual):
        return _a_sqrt(a)
    val = _a_sqrt(a.val)
    zero = val == 0
    with np.errstate(divide="ignore"):
        dval = np.where(zero, 0.0, 0.5 / np.where(zero, 1.0, val))
    return a._chain(val, dval, zero)


def _d_abs(a):
    if not isinstance(a, Dual):
        return np.abs(a)
    return a._chain(np.abs(a.val), np.sign(a.val), a.val == 0)


def _d_log(a):
    if not isinstance(a, Dual):
        return _a_log(a)
    return a._chain(_a_log(a.val), 1.0 / a.val)


DUAL_NAMESPACE = {
    "_div": _d_div,
    "_pow": _d_pow,
    "_sin": _unary(np.sin, np.cos),
    "_cos": _unary(np.cos, lambda v: -np.sin(v)),
    "_exp": _unary(np.exp, np.exp),
    "_sqrt": _d_sqrt,
    "_abs": _d_abs,
    "_log": _d_log,
    "_pi": math.pi,
}
