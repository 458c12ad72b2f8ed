"""Compiled inner loops for the grid Dirac operator.

The Pauli and alpha matrices have exactly one nonzero entry per row, so the
kinetic term is passed as (column, coefficient) pairs: row r of -i M_a picks
component ``col[a, r]`` scaled by ``coef[a, r]``.
"""

import numba
import numpy as np

# 4th-order central first-derivative weights for offsets -2, -1, +1, +2
_W1 = 1.0 / 12.0
_W2 = 8.0 / 12.0


def monomial_form(mats):
    """(col, coef) of matrices with one nonzero per row; raises otherwise."""
    mats = np.asarray(mats)
    nz = mats != 0
    if not np.all(nz.sum(axis=-1) == 1):
        raise ValueError("matrices are not monomial")
    col = np.argmax(nz, axis=-1).astype(np.int64)
    coef = np.take_along_axis(mats, col[..., None], axis=-1)[..., 0].astype(np.complex128)
    return col, coef


@numba.njit(cache=True)
def dirac_stencil_3d(g, col, coef, inv_h, margin, out):
    """Kinetic term at interior nodes; out[i, j, k] sits at g[i + 2, margin + j, margin + k].

    ``g`` has shape (ni + 4, n, n, m).
    """
    ni, nj, nk, m = out.shape
    dv = np.empty((3, m), dtype=np.complex128)
    for i in range(ni):
        gi = i + 2
        for j in range(nj):
            gj = j + margin
            for k in range(nk):
                gk = k + margin
                for c in range(m):
                    dv[0, c] = (_W1 * (g[gi - 2, gj, gk, c] - g[gi + 2, gj, gk, c])
                                + _W2 * (g[gi + 1, gj, gk, c] - g[gi - 1, gj, gk, c])) * inv_h
                    dv[1, c] = (_W1 * (g[gi, gj - 2, gk, c] - g[gi, gj + 2, gk, c])
                                + _W2 * (g[gi, gj + 1, gk, c] - g[gi, gj - 1, gk, c])) * inv_h
                    dv[2, c] = (_W1 * (g[gi, gj, gk - 2, c] - g[gi, gj, gk + 2, c])
                                + _W2 * (g[gi, gj, gk + 1, c] - g[gi, gj, gk - 1, c])) * inv_h
                for r in range(m):
                    out[i, j, k, r] = (coef[0, r] * dv[0, col[0, r]]
                                       + coef[1, r] * dv[1, col[1, r]]
                                       + coef[2, r] * dv[2, col[2, r]])


@numba.njit(cache=True)
def dirac_stencil_2d(g, col, coef, inv_h, margin, out):
    """Two-dimensional analogue of :func:`dirac_stencil_3d`; g has shape (ni + 4, n, m)."""
    ni, nj, m = out.shape
    dv = np.empty((2, m), dtype=np.complex128)
    for i in range(ni):
        gi = i + 2
        for j in range(nj):
            gj = j + margin
            for c in range(m):
                dv[0, c] = (_W1 * (g[gi - 2, gj, c] - g[gi + 2, gj, c])
                            + _W2 * (g[gi + 1, gj, c] - g[gi - 1, gj, c])) * inv_h
                dv[1, c] = (_W1 * (g[gi, gj - 2, c] - g[gi, gj + 2, c])
                            + _W2 * (g[gi, gj + 1, c] - g[gi, gj - 1, c])) * inv_h
            for r in range(m):
                out[i, j, r] = coef[0, r] * dv[0, col[0, r]] + coef[1, r] * dv[1, col[1, r]]
