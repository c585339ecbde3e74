"""Selects the compiled Schur kernel when available.

Set ``WPT_ESTIM_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

import numpy as np

from . import _schur_py

BACKEND = "python"
schur_block = _schur_py.schur_block

if not os.environ.get("WPT_ESTIM_PURE_PYTHON"):
    try:
        from . import _schur as _compiled
    except ImportError:  # extension not built
        pass
    else:
        schur_block = _compiled.schur_block
        BACKEND = "compiled"


def sparsity_pattern(A: np.ndarray, tol: float = 0.0):
    """CSR-like upper-triangular pattern of a stack of symmetric matrices.

    Returns ``(ptr, rows, cols, vals, dense)`` as consumed by the compiled
    kernel. A constraint is routed to the dense formula when pairing its
    nonzeros with every other sparse constraint would cost more than the
    two ``n x n`` products of the dense path.
    """
    m, n, _ = A.shape
    iu, ju = np.triu_indices(n)
    ptr = [0]
    rows, cols, vals = [], [], []
    nnz = np.zeros(m, dtype=np.int64)
    for i in range(m):
        v = A[i][iu, ju]
        keep = np.abs(v) > tol
        r, c, v = iu[keep], ju[keep], v[keep]
        v = np.where(r == c, v, 2.0 * v)
        rows.append(r)
        cols.append(c)
        vals.append(v)
        nnz[i] = v.size
        ptr.append(ptr[-1] + v.size)
    total = nnz.sum()
    dense = (nnz * total > 2 * n ** 3).astype(np.uint8)
    cat = (lambda xs, dt: np.ascontiguousarray(np.concatenate(xs).astype(dt)) if xs
           else np.zeros(0, dtype=dt))
    return (np.asarray(ptr, dtype=np.int64), cat(rows, np.int64), cat(cols, np.int64),
            cat(vals, np.float64), dense)
