"""Pure numpy Schur-complement kernel (fallback for the compiled core)."""
import numpy as np


def schur_block(A, pattern, W, M):
    """Accumulate ``M[i, k] += <A_i, W A_k W>`` for one PSD block.

    ``A`` has shape (m, n, n). ``pattern`` is ignored here; the dense batched
    product is used for every constraint.
    """
    m = A.shape[0]
    T = np.matmul(np.matmul(W, A), W)
    M += A.reshape(m, -1) @ T.reshape(m, -1).T
