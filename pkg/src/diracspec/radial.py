"""Radial Dirac systems: transfer matrices, monodromy, band maps and probes.

For q(x) = eta(|x|) each angular channel k reduces to

    -i sigma_2 u' + eta u + sigma_1 (k / r) u = lam u,     u: (0, inf) -> R^2.

Multiplying by i sigma_2 (note (i sigma_2)(-i sigma_2) = I and
i sigma_2 sigma_1 = sigma_3) gives the real first-order system u' = G(r) u with

    G(r) = (lam - eta(r)) i sigma_2 - (k / r) sigma_3
         = [[-k/r,          lam - eta(r)],
            [-(lam - eta(r)),         k/r]],

which is trace free, so fundamental matrices have unit determinant.
"""

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .export import write_csv
from .errors import ArgumentError, DomainError, SingularityError
from .potential import Profile, as_profile

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A2 = (1 / 5,)
_A3 = (3 / 40, 9 / 40)
_A4 = (44 / 45, -56 / 15, 32 / 9)
_A5 = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
_A6 = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))
# continuous extension: y(r + th h) = y + h sum_i K_i sum_j P[i][j] th^(j+1)
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

SIGMA3 = np.diag([1.0, -1.0])
I_SIGMA2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def angular_indices(d, cutoff):
    """The first ``cutoff`` angular indices ordered by |k| (positive first)."""
    if d not in (2, 3):
        raise ArgumentError(f"dimension must be 2 or 3, got {d!r}", key="d")
    if int(cutoff) != cutoff or cutoff < 1:
        raise ArgumentError(f"cutoff must be a positive integer, got {cutoff!r}", key="cutoff")
    out = []
    base = 1.0 if d == 3 else 0.5
    i = 0
    while len(out) < cutoff:
        out.append(base + i)
        if len(out) < cutoff:
            out.append(-(base + i))
        i += 1
    return out


@dataclass(frozen=True)
class RadialSystem:
    """One angular channel of a radial Dirac operator at spectral parameter lam."""

    eta: object
    k: float
    lam: float
    d: int = 3
    period: float = None
    profile: Profile = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "profile", as_profile(self.eta, "r"))
        if self.d not in (2, 3):
            raise ArgumentError(f"dimension must be 2 or 3, got {self.d!r}", key="d")
        k = float(self.k)
        if k != 0.0:
            frac = k - math.floor(k)
            ok = frac == 0.0 if self.d == 3 else frac == 0.5
            if not ok:
                expected = "a nonzero integer" if self.d == 3 else "a half-integer"
                raise ArgumentError(f"angular index for d={self.d} must be {expected} (or 0), got {k!r}", key="k")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "lam", float(self.lam))
        if self.period is not None and not (self.period > 0 and math.isfinite(self.period)):
            raise ArgumentError(f"period must be positive, got {self.period!r}", key="p")

    def with_lambda(self, lam):
        return RadialSystem(self.eta, self.k, lam, self.d, self.period)

    def eta_at(self, r):
        try:
            return self.profile.scalar(r)
        except DomainError as err:
            raise DomainError(f"eta undefined: {err}", point={"r": r}) from None

    def G(self, r):
        """The coefficient matrix of u' = G(r) u."""
        if self.k != 0.0 and r == 0.0:
            raise SingularityError("angular term k/r is singular at r = 0", r=0.0)
        a = -self.k / r if self.k else 0.0
        b = self.lam - self.eta_at(r)
        return np.array([[a, b], [-b, -a]])


def radial_rhs(r, u, sys):
    """u'(r) = G(r) u for a single vector or a stack of column vectors."""
    return sys.G(r) @ np.asarray(u, dtype=float)


def raddir_residual(r, u, du, sys):
    """-i sigma_2 u' + eta u + sigma_1 (k/r) u - lam u evaluated in complex arithmetic."""
    s1 = np.array([[0, 1], [1, 0]], dtype=complex)
    s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
    u = np.asarray(u, dtype=complex)
    du = np.asarray(du, dtype=complex)
    eta = sys.eta_at(r)
    return -1j * (s2 @ du) + eta * u + (sys.k / r) * (s1 @ u) - sys.lam * u


@dataclass(frozen=True)
class TransferMatrix:
    """Real 2x2 propagator of the radial system from r0 to r1."""

    matrix: np.ndarray
    r0: float
    r1: float
    steps: int = 0

    @property
    def det(self):
        m = self.matrix
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    @property
    def trace(self):
        return float(self.matrix[0, 0] + self.matrix[1, 1])

    def __matmul__(self, other):
        if isinstance(other, TransferMatrix):
            return TransferMatrix(self.matrix @ other.matrix, other.r0, self.r1, self.steps + other.steps)
        return self.matrix @ other


def op_norm(m):
    """Spectral norm of a real 2x2 matrix (closed form)."""
    a, b, c, d = float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1])
    # (|rotation part| + |reflection part|) / 2, free of cancellation near s1 = s2
    return 0.5 * (math.hypot(a + d, c - b) + math.hypot(a - d, b + c))


# --- integrator ----------------------------------------------------------------


def _g_mul(g11, g12, y):
    y0, y1, y2, y3 = y
    return (g11 * y0 + g12 * y2, g11 * y1 + g12 * y3, -g12 * y0 - g11 * y2, -g12 * y1 - g11 * y3)


class _Step:
    """An accepted step: start r, signed size h, start state y and stages K."""

    __slots__ = ("r", "h", "y", "K")

    def __init__(self, r, h, y, K):
        self.r, self.h, self.y, self.K = r, h, y, K

    def dense(self, theta):
        """Continuous extension (4th order) at r + theta h."""
        w = [sum(p * theta ** (j + 1) for j, p in enumerate(row)) for row in _P]
        h = self.h
        return tuple(self.y[c] + h * sum(w[i] * self.K[i][c] for i in range(7)) for c in range(4))


def integrate(sys, r0, r1, tol=1e-10, y0=(1.0, 0.0, 0.0, 1.0), checkpoints=(), on_step=None,
              h_init=None, project=True):
    """Adaptive Dormand-Prince 5(4) for the matrix system Psi' = G Psi.

    The state is Psi stored row-major as four floats. The local error estimate
    is kept below ``tol * max(1, max|Psi|)`` per step. Steps are shortened to
    land exactly on every point in ``checkpoints``; ``on_step(step, y_new)`` is
    called after each accepted step. With ``project`` the state is rescaled to
    unit determinant after every step (the exact flow preserves det = 1).

    Returns (Psi as a 2x2 array, number of accepted steps).
    """
    if not (tol > 0):
        raise ArgumentError(f"tolerance must be positive, got {tol!r}", key="tol")
    if r0 == r1:
        return np.array(y0, dtype=float).reshape(2, 2), 0
    direction = 1.0 if r1 > r0 else -1.0
    k = sys.k
    if k != 0.0 and (min(r0, r1) <= 0.0):
        raise SingularityError(f"cannot integrate through r = 0 with angular index k = {k:g}", r=min(r0, r1))
    lam = sys.lam
    eta = sys.eta_at
    marks = sorted({float(c) for c in checkpoints if (c - r0) * direction > 0 and (r1 - c) * direction > 0},
                   reverse=direction < 0)
    marks.append(float(r1))

    def coeffs(r):
        return (-k / r if k else 0.0), lam - eta(r)

    span = abs(r1 - r0)
    h = direction * (h_init if h_init else min(0.05, 0.01 * span))
    r = float(r0)
    y = tuple(float(v) for v in y0)
    K1 = _g_mul(*coeffs(r), y)
    steps = 0
    target_idx = 0
    a2, a3, a4, a5, a6 = _A2, _A3, _A4, _A5, _A6
    b = _B5
    e = _E
    while True:
        target = marks[target_idx]
        remaining = target - r
        last = False
        if abs(h) >= abs(remaining):
            h = remaining
            last = True
        hmin = 1e-14 * max(1.0, abs(r))
        if abs(h) < hmin and not last:
            raise SingularityError(f"step size underflow at r = {r!r}", r=r)
        Y = tuple(y[c] + h * a2[0] * K1[c] for c in range(4))
        K2 = _g_mul(*coeffs(r + _C[1] * h), Y)
        Y = tuple(y[c] + h * (a3[0] * K1[c] + a3[1] * K2[c]) for c in range(4))
        K3 = _g_mul(*coeffs(r + _C[2] * h), Y)
        Y = tuple(y[c] + h * (a4[0] * K1[c] + a4[1] * K2[c] + a4[2] * K3[c]) for c in range(4))
        K4 = _g_mul(*coeffs(r + _C[3] * h), Y)
        Y = tuple(y[c] + h * (a5[0] * K1[c] + a5[1] * K2[c] + a5[2] * K3[c] + a5[3] * K4[c]) for c in range(4))
        K5 = _g_mul(*coeffs(r + _C[4] * h), Y)
        Y = tuple(
            y[c] + h * (a6[0] * K1[c] + a6[1] * K2[c] + a6[2] * K3[c] + a6[3] * K4[c] + a6[4] * K5[c])
            for c in range(4)
        )
        r_new = target if last else r + h
        K6 = _g_mul(*coeffs(r + _C[5] * h if not last else r_new), Y)
        y_new = tuple(
            y[c] + h * (b[0] * K1[c] + b[2] * K3[c] + b[3] * K4[c] + b[4] * K5[c] + b[5] * K6[c])
            for c in range(4)
        )
        K7 = _g_mul(*coeffs(r_new), y_new)
        err = max(
            abs(h * (e[0] * K1[c] + e[2] * K3[c] + e[3] * K4[c] + e[4] * K5[c] + e[5] * K6[c] + e[6] * K7[c]))
            for c in range(4)
        )
        scale = tol * max(1.0, max(abs(v) for v in y_new))
        if not math.isfinite(err):
            raise SingularityError(f"non-finite solution near r = {r!r}", r=r)
        if err <= scale:
            steps += 1
            if on_step is not None:
                on_step(_Step(r, h, y, (K1, K2, K3, K4, K5, K6, K7)), y_new)
            if project:
                det = y_new[0] * y_new[3] - y_new[1] * y_new[2]
                if det > 0:
                    s = 1.0 / math.sqrt(det)
                    y_new = tuple(v * s for v in y_new)
                    K7 = tuple(v * s for v in K7)
            r, y, K1 = r_new, y_new, K7
            if last:
                target_idx += 1
                if target_idx == len(marks):
                    break
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * (scale / err) ** 0.2))
            if not last:
                h *= fac
            else:
                h = direction * max(abs(h) * fac, 1e-3 * hmin) if abs(h) > 0 else direction * 1e-3
        else:
            h *= max(0.2, 0.9 * (scale / err) ** 0.2)
    return np.array(y, dtype=float).reshape(2, 2), steps


def propagate(sys, r0, r1, tol=1e-10, project=True):
    """Fundamental matrix Psi(r1) with Psi(r0) = I (either order of r0, r1)."""
    if not (tol > 0):
        raise ArgumentError(f"tolerance must be positive, got {tol!r}", key="tol")
    checkpoints = ()
    if sys.period is not None:
        lo, hi = sorted((r0, r1))
        p = sys.period
        checkpoints = [j * p for j in range(int(math.floor(lo / p)) + 1, int(math.ceil(hi / p)))]
    m, steps = integrate(sys, r0, r1, tol, checkpoints=checkpoints, project=project)
    return TransferMatrix(m, float(r0), float(r1), steps)


def free_propagator(r, anchor, Q, lam, tol=1e-12):
    """exp(-i sigma_2 theta) = I cos(theta) - i sigma_2 sin(theta), theta = Q(r) - Q(anchor) - lam (r - anchor).

    ``Q`` is an antiderivative of eta (any additive constant cancels) given as a
    callable, or a profile / expression for eta whose antiderivative is taken
    by quadrature. Solves the k = 0 system from ``anchor`` with identity start.
    """
    if isinstance(Q, (str, Profile)) or not callable(Q):
        prof = as_profile(Q, "r")
        q_r, q_a = prof.antiderivative(np.array([r, anchor]), tol)
    else:
        q_r, q_a = float(Q(r)), float(Q(anchor))
    theta = (q_r - q_a) - lam * (r - anchor)
    c, s = math.cos(theta), math.sin(theta)
    # -i sigma_2 = [[0, -1], [1, 0]]
    return TransferMatrix(np.array([[c, -s], [s, c]]), float(anchor), float(r))


def free_monodromy(lam, p, eta_mean=0.0):
    """I cos((lam - eta_mean) p) + i sigma_2 sin((lam - eta_mean) p)."""
    a = (lam - eta_mean) * p
    return np.array([[math.cos(a), math.sin(a)], [-math.sin(a), math.cos(a)]])


def monodromy(sys, j, tol=1e-10):
    """(M_j, D_j): the propagator over the j-th period [(j-1)p, jp] and its trace."""
    if sys.period is None:
        raise ArgumentError("monodromy needs a periodic system (set the period)", key="p")
    if int(j) != j or j < 1:
        raise ArgumentError(f"period index must be a positive integer, got {j!r}", key="j")
    p = sys.period
    tm = propagate(sys, (j - 1) * p, j * p, tol)
    return tm, tm.trace


# --- band map ----------------------------------------------------------------


@dataclass(frozen=True)
class BandMap:
    """Spectral-parameter grid with free discriminant and classification."""

    lam: np.ndarray
    discriminant: np.ndarray
    exceptional: np.ndarray
    eta_mean: float
    period: float
    tolerance: float

    def classification(self):
        return np.where(self.exceptional, "exceptional", "band")

    def exceptional_points(self):
        return self.lam[self.exceptional]

    def rows(self):
        for lam, dsc, cls in zip(self.lam, self.discriminant, self.classification()):
            yield float(lam), float(dsc), str(cls)

    def to_csv(self, path):
        return write_csv(path, ["lambda", "discriminant", "classification"], self.rows())


def band_map(eta, p, lambda_grid, tol=1e-12, width=0.5):
    """Classify each lam: exceptional iff dist((lam - eta_mean) p, pi Z) < width * spacing * p.

    ``spacing`` is the smallest gap of the (sorted) grid, so every point of
    (pi/p) Z + eta_mean inside the grid range marks its nearest grid node.
    """
    if not (p > 0 and math.isfinite(p)):
        raise ArgumentError(f"period must be positive, got {p!r}", key="p")
    lam = np.asarray(lambda_grid, dtype=float).reshape(-1)
    if lam.size == 0 or not np.all(np.isfinite(lam)):
        raise ArgumentError("lambda grid must be finite and nonempty", key="lambda")
    prof = as_profile(eta, "r")
    eta_mean = prof.mean(p, tol)
    if lam.size > 1:
        gaps = np.diff(np.sort(lam))
        gaps = gaps[gaps > 0]
        spacing = float(gaps.min()) if gaps.size else 1.0
    else:
        spacing = 1.0
    thr = width * spacing * p
    phase = (lam - eta_mean) * p
    dist = np.abs(phase - np.pi * np.round(phase / np.pi))
    return BandMap(lam, 2 * np.cos(phase), dist < thr, float(eta_mean), float(p), float(thr))


# --- boundedness ----------------------------------------------------------------


@dataclass(frozen=True)
class GrowthReport:
    """Sup norms of Psi on dyadic windows and the fitted growth exponent."""

    windows: list  # (start, end, sup of ||Psi||)
    exponent: float
    diagnostics: list  # (j, D_j, |mu_j|, cond(E_j))
    steps: int

    def rows(self):
        for a, b, s in self.windows:
            yield a, b, s

    def to_csv(self, path):
        return write_csv(path, ["window_start", "window_end", "sup_norm"], self.rows())


def _eigen_diagnostics(j, m):
    """Trace, modulus of the eigenvalue and condition of the eigenvector matrix E_j."""
    D = float(m[0, 0] + m[1, 1])
    if abs(D) >= 2:
        mu = D / 2 + math.sqrt(D * D / 4 - 1)
        return (j, D, abs(mu), math.inf)
    mu = complex(D / 2, math.sqrt(1 - D * D / 4))
    E = np.array([[mu - m[1, 1], mu.conjugate() - m[1, 1]], [m[1, 0], m[1, 0]]], dtype=complex)
    return (j, D, abs(mu), float(np.linalg.cond(E)))


def boundedness_probe(sys, R_max, tol=1e-10, r_start=None, n_diag=8):
    """Propagate from r_start (default one period) to R_max and record window sups.

    Windows are [2^m s, 2^(m+1) s] with s = r_start, the last one cut at
    R_max; ||Psi(r)|| is sampled at every accepted step. The exponent is the least-squares slope of
    log(window max) against log(window start).
    """
    s = r_start if r_start is not None else (sys.period if sys.period else 1.0)
    if not (R_max > 2 * s):
        raise ArgumentError(f"R_max must exceed two windows' start ({2 * s!r}), got {R_max!r}", key="R_max")
    edges = [s]
    while edges[-1] * 2 < R_max * (1 - 1e-12):
        edges.append(edges[-1] * 2)
    edges.append(float(R_max))  # the last window may be partial
    sups = [0.0] * (len(edges) - 1)
    period_marks = []
    if sys.period:
        p = sys.period
        period_marks = [j * p for j in range(int(math.ceil(s / p - 1e-9)), int(math.floor(R_max / p + 1e-9)) + 1)]
    checkpoints = sorted(set(edges) | set(period_marks))
    snapshots = {}

    def on_step(step, y_new):
        r_end = step.r + step.h
        psi = np.array(y_new).reshape(2, 2)
        w = min(max(bisect.bisect_left(edges, r_end * (1 - 1e-13)) - 1, 0), len(sups) - 1)
        sups[w] = max(sups[w], op_norm(psi))
        if sys.period:
            j = round(r_end / sys.period)
            if abs(r_end - j * sys.period) <= 1e-9 * max(1.0, r_end):
                snapshots[j] = psi

    if sys.period:
        snapshots[round(s / sys.period)] = np.eye(2)
    _, steps = integrate(sys, s, edges[-1], tol, checkpoints=checkpoints, on_step=on_step)
    windows = [(edges[i], edges[i + 1], sups[i]) for i in range(len(sups))]
    if len(windows) >= 2:
        xs = np.log([w[0] for w in windows])
        ys = np.log([w[2] for w in windows])
        exponent = float(np.polyfit(xs, ys, 1)[0])
    else:
        exponent = float("nan")
    diagnostics = []
    if sys.period and len(snapshots) > 1:
        keys = sorted(snapshots)
        pick = np.unique(np.geomspace(keys[1], keys[-1], min(n_diag, len(keys) - 1)).round().astype(int))
        for j in pick:
            if j in snapshots and j - 1 in snapshots:
                Mj = snapshots[j] @ np.linalg.inv(snapshots[j - 1])
                diagnostics.append(_eigen_diagnostics(int(j), Mj))
    return GrowthReport(windows, exponent, diagnostics, steps)


# --- BV hypothesis ---------------------------------------------------------------


@dataclass(frozen=True)
class BVReport:
    tv: float
    pole: float  # None when the denominator keeps its sign
    trend: str  # converging | log-divergent | unknown
    samples: list  # (R, TV(R))
    fit_slope: float
    fit_r2: float


def _tv_on(g, a, b, n):
    r = np.linspace(a, b, n + 1)
    return float(np.sum(np.abs(np.diff(g(r)))))


def bv_check(eta, lam, r0, R, points_per_unit=400, rtol=1e-7, period=None):
    """Total variation of g(r) = 1/(r (lam - eta(r)) - 1) on [r0, R] and its trend.

    TV is computed on uniform partitions, doubled until the relative change is
    below ``rtol``. TV(R_i) is sampled at R_i = r0 2^i; the trend is
    ``converging`` when increments over successive doublings shrink
    geometrically (ratio <= 0.75), ``log-divergent`` when they level off
    (ratio within [0.8, 1.25]) and TV is linear in log R with R^2 >= 0.99.
    """
    if not r0 > 0:
        raise ArgumentError(f"r0 must be positive, got {r0!r}", key="r0")
    if not R > r0:
        raise ArgumentError(f"R must exceed r0, got {R!r}", key="R")
    prof = as_profile(eta, "r")

    def denom(r):
        return r * (lam - prof(r)) - 1.0

    def g(r):
        return 1.0 / denom(r)

    n0 = max(64, int(points_per_unit * (R - r0)))
    rr = np.linspace(r0, R, n0 + 1)
    den = denom(rr)
    sign_change = np.nonzero(np.sign(den[:-1]) * np.sign(den[1:]) <= 0)[0]
    if sign_change.size:
        i = int(sign_change[0])
        a, b = rr[i], rr[i + 1]
        for _ in range(80):
            mid = 0.5 * (a + b)
            if np.sign(denom(np.array(a))) * np.sign(denom(np.array(mid))) <= 0:
                b = mid
            else:
                a = mid
        return BVReport(math.inf, 0.5 * (a + b), "unknown", [], float("nan"), float("nan"))

    edges = [r0]
    while edges[-1] * 2 < R:
        edges.append(edges[-1] * 2)
    edges.append(R)
    pieces = []
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(64, int(points_per_unit * (b - a)))
        prev = _tv_on(g, a, b, n)
        for _ in range(12):
            n *= 2
            cur = _tv_on(g, a, b, n)
            if abs(cur - prev) <= rtol * max(cur, 1e-300):
                prev = cur
                break
            prev = cur
        pieces.append(prev)
    cum = np.cumsum(pieces)
    samples = list(zip([float(e) for e in edges[1:]], [float(c) for c in cum]))
    tv = float(cum[-1])
    # doubling windows only (the last window may be partial)
    incs = [p for p, (a, b) in zip(pieces, zip(edges[:-1], edges[1:])) if abs(b - 2 * a) <= 1e-9 * b]
    slope = r2 = float("nan")
    if len(samples) >= 3:
        xs = np.log([s[0] for s in samples])
        ys = np.array([s[1] for s in samples])
        coef = np.polyfit(xs, ys, 1)
        fit = np.polyval(coef, xs)
        ss_res = float(np.sum((ys - fit) ** 2))
        ss_tot = float(np.sum((ys - ys.mean()) ** 2))
        slope = float(coef[0])
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    trend = "unknown"
    if len(incs) >= 4:
        tail = incs[len(incs) // 2:]
        ratios = [b / a for a, b in zip(tail[:-1], tail[1:]) if a > 0]
        if ratios and max(ratios) <= 0.75:
            trend = "converging"
        elif ratios and min(ratios) >= 0.8 and max(ratios) <= 1.25 and r2 >= 0.99:
            trend = "log-divergent"
    return BVReport(tv, None, trend, samples, slope, r2)


# --- limit range -----------------------------------------------------------------


def limit_range(eta, window_starts, window_len, bins=200, samples_per_window=20000):
    """Histogram estimate of the limit range of eta as closed intervals.

    Tail i is [w_i, W] with W = max(window_starts) + window_len; the sampled
    values of every tail are binned on a common grid spanning all samples and
    the occupied bins are intersected over tails. Adjacent surviving bins are
    merged into intervals. A constant profile returns the degenerate interval.
    """
    starts = sorted(float(w) for w in window_starts)
    if not starts or not (window_len > 0):
        raise ArgumentError("limit_range needs at least one window of positive length", key="windows")
    if bins < 1:
        raise ArgumentError("bins must be positive", key="bins")
    prof = as_profile(eta, "r")
    end = starts[-1] + window_len
    tails = []
    for w in starts:
        n = int(samples_per_window * max(1.0, (end - w) / window_len))
        n = min(n, 2_000_000)
        tails.append(np.asarray(prof(np.linspace(w, end, n)), dtype=float))
    if any(t.size == 0 for t in tails):
        raise ArgumentError("empty sampling window", key="windows")
    lo = min(float(t.min()) for t in tails)
    hi = max(float(t.max()) for t in tails)
    if hi == lo:
        return [(lo, hi)]
    edges = np.linspace(lo, hi, bins + 1)
    occupied = np.ones(bins, dtype=bool)
    for t in tails:
        idx = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, bins - 1)
        hit = np.zeros(bins, dtype=bool)
        hit[idx] = True
        occupied &= hit
    intervals = []
    i = 0
    while i < bins:
        if occupied[i]:
            j = i
            while j + 1 < bins and occupied[j + 1]:
                j += 1
            intervals.append((float(edges[i]), float(edges[j + 1])))
            i = j + 1
        else:
            i += 1
    return intervals
