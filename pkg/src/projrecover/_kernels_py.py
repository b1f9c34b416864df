"""Numpy implementations of the hot exterior-algebra kernels.

Used when the compiled extension is unavailable or disabled through the
``PROJRECOVER_PURE_PYTHON`` environment variable.  Signatures match
``_kernels_c`` exactly.
"""

import numpy as np


def wedge(a, b, ia, ib, out, sign, nout):
    res = np.zeros(nout, dtype=complex)
    np.add.at(res, out, sign * a[ia] * b[ib])
    return res


def wedge_left_matrix(a, ia, ib, out, sign, nout, ncols):
    mat = np.zeros((nout, ncols), dtype=complex)
    np.add.at(mat, (out, ib), sign * a[ia])
    return mat


def compound(A, rows, cols):
    nr, r = rows.shape
    nc = cols.shape[0]
    if r == 0:
        return np.ones((1, 1), dtype=complex)
    sub = A[rows[:, None, :, None], cols[None, :, None, :]]
    return np.linalg.det(sub).reshape(nr, nc)
