"""Pauli and Dirac alpha matrices and the small closed-form algebra built on them.

All matrices are dense complex numpy arrays (2x2 for d = 2, 4x4 for d = 3).
"""

import numpy as np

from .errors import ArgumentError, InvariantViolation

_SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

UNIT_TOL = 1e-12


def _check_index(j):
    if j not in (1, 2, 3):
        raise ArgumentError(f"matrix index must be 1, 2 or 3, got {j!r}", key="j")


def pauli(j):
    """Return the Pauli matrix sigma_j, j in {1, 2, 3}."""
    _check_index(j)
    return _SIGMA[j - 1].copy()


def alpha(j):
    """Return the 4x4 Dirac matrix alpha_j = [[0, sigma_j], [sigma_j, 0]]."""
    _check_index(j)
    out = np.zeros((4, 4), dtype=complex)
    out[:2, 2:] = _SIGMA[j - 1]
    out[2:, :2] = _SIGMA[j - 1]
    return out


def spinor_dim(d):
    """Number of spinor components for spatial dimension d (2 -> 2, 3 -> 4)."""
    if d == 2:
        return 2
    if d == 3:
        return 4
    raise ArgumentError(f"dimension must be 2 or 3, got {d!r}", key="d")


def dirac_matrices(d):
    """The d matrices whose dot product with nabla forms the kinetic term.

    sigma_1, sigma_2 for d = 2 and alpha_1, alpha_2, alpha_3 for d = 3,
    stacked into an array of shape (d, m, m).
    """
    spinor_dim(d)
    if d == 2:
        return np.stack([pauli(1), pauli(2)])
    return np.stack([alpha(1), alpha(2), alpha(3)])


def dirac_dot(v, d=None):
    """sigma.v (d = 2) or alpha.v (d = 3) for a real vector v."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ArgumentError("vector must be one-dimensional", key="v")
    if d is None:
        d = v.shape[0]
    if v.shape[0] != d:
        raise ArgumentError(f"vector has length {v.shape[0]}, expected {d}", key="v")
    mats = dirac_matrices(d)
    return np.tensordot(v, mats, axes=1)


def unit_vector(v, normalize=True):
    """Validate (and by default normalize) a direction in R^2 or R^3.

    With ``normalize=False`` the vector must already have length 1 within
    ``UNIT_TOL``.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] not in (2, 3):
        raise ArgumentError(f"direction must have 2 or 3 components, got {v.shape[0]}", key="k")
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0.0:
        raise ArgumentError("direction must be a finite nonzero vector", key="k")
    if normalize:
        return v / n
    if abs(n - 1.0) > UNIT_TOL:
        raise ArgumentError(f"direction is not a unit vector (|k| = {n!r})", key="k")
    return v


def dirac_exp(k, theta):
    """exp(-i (alpha.k) theta) = I cos(theta) - i (alpha.k) sin(theta) for unit k.

    Uses (alpha.k)^2 = I, so no general matrix exponential is needed. For a
    2-component k the Pauli analogue is returned.
    """
    k = unit_vector(k, normalize=False)
    a = dirac_dot(k)
    eye = np.eye(a.shape[0], dtype=complex)
    return eye * np.cos(theta) - 1j * np.sin(theta) * a


def plus_eigenspinor(k, d=None):
    """Deterministic unit spinor phi with (alpha.k) phi = phi.

    Basis vectors e_1, e_2, ... are projected in order by (I + alpha.k)/2; the
    first projection of squared norm at least 0.1 is normalized and returned.
    Since the projector has trace m/2, at least one seed always qualifies.
    """
    k = unit_vector(k, normalize=False)
    if d is not None and d != k.shape[0]:
        raise ArgumentError(f"direction has {k.shape[0]} components, expected {d}", key="k")
    a = dirac_dot(k)
    m = a.shape[0]
    proj = 0.5 * (np.eye(m, dtype=complex) + a)
    for i in range(m):
        phi = proj[:, i]
        n2 = np.vdot(phi, phi).real
        if n2 >= 0.1:
            return phi / np.sqrt(n2)
    raise InvariantViolation("no basis seed survives the projection onto the +1 eigenspace")
