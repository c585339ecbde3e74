# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Schur-complement assembly for the interior-point solver.

For each PSD block the Schur matrix ``M[i, k] = <A_i, W A_k W>`` is formed
using the sparsity of the constraint matrices: constraints flagged dense get
``A_i W`` computed explicitly (one product instead of the two that
``W A_i W`` needs) and all dense pairs are formed by one GEMM through
``tr(A_i W A_k W) = <A_i W, (A_k W)^T>``. Dense-sparse pairs evaluate
``W A_i W`` only on the sparse constraint's nonzeros. Pairs of sparse constraints use the entrywise formula over
their nonzeros only.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


from scipy.linalg.cython_blas cimport dgemm, dsymm


cdef void _aw(const double[:, :, ::1] A, Py_ssize_t i, const double[:, ::1] W,
              double[:, ::1] out) noexcept nogil:
    # BLAS sees the row-major buffers as their transposes; with A_i and W
    # symmetric the column-major product A_i W lands in ``out`` as W A_i.
    cdef int n = <int> W.shape[0]
    cdef double one = 1.0, zero = 0.0
    cdef char side = b'L'
    cdef char uplo = b'U'
    dsymm(&side, &uplo, &n, &n, &one, <double*> &A[i, 0, 0], &n,
          <double*> &W[0, 0], &n, &zero, &out[0, 0], &n)


def schur_block(const double[:, :, ::1] A, pattern, const double[:, ::1] W, double[:, ::1] M):
    """Accumulate ``M[i, k] += <A_i, W A_k W>`` for one PSD block.

    ``pattern`` is ``(ptr, rows, cols, vals, dense)``: upper-triangular
    nonzeros of each constraint in CSR-like layout with off-diagonal values
    doubled, plus a flag per constraint selecting the dense formula.
    """
    cdef const long long[::1] ptr = pattern[0]
    cdef const long long[::1] rows = pattern[1]
    cdef const long long[::1] cols = pattern[2]
    cdef const double[::1] vals = pattern[3]
    cdef const unsigned char[::1] dense = pattern[4]
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t n = A.shape[1]
    cdef Py_ssize_t i, k, e, f, p, q, r, s, di, dk, nd = 0
    cdef double acc, a, t
    cdef int nn = <int> (n * n)
    cdef int ndi
    cdef double one = 1.0, zero = 0.0
    cdef char trT = b'T'
    cdef char trN = b'N'
    for i in range(m):
        nd += dense[i]
    cdef Py_ssize_t nb = max(nd, 1)
    cdef Py_ssize_t[::1] idx = np.empty(nb, dtype=np.intp)
    # WA[d] = W A_i and AW[d] = A_i W for the d-th dense constraint
    cdef double[:, :, ::1] WA = np.empty((nb, n, n))
    cdef double[:, :, ::1] AW = np.empty((nb, n, n))
    cdef double[:, ::1] C = np.empty((nb, nb))
    ndi = <int> nd

    with nogil:
        di = 0
        for i in range(m):
            if dense[i]:
                idx[di] = i
                di += 1
        for di in range(nd):
            _aw(A, idx[di], W, WA[di])
            for p in range(n):
                for q in range(n):
                    AW[di, p, q] = WA[di, q, p]
        if nd > 0:
            # tr(A_i W A_k W) = <A_i W, (A_k W)^T> for every dense pair in one GEMM
            dgemm(&trT, &trN, &ndi, &ndi, &nn, &one, &WA[0, 0, 0], &nn,
                  &AW[0, 0, 0], &nn, &zero, &C[0, 0], &ndi)
            for di in range(nd):
                for dk in range(nd):
                    M[idx[di], idx[dk]] += C[di, dk]
        # dense against sparse: only the entries of W A_i W on the pattern
        for di in range(nd):
            i = idx[di]
            for k in range(m):
                if dense[k]:
                    continue
                acc = 0.0
                for e in range(ptr[k], ptr[k + 1]):
                    r = rows[e]
                    q = cols[e]
                    t = 0.0
                    for p in range(n):
                        t = t + W[r, p] * AW[di, p, q]
                    acc = acc + vals[e] * t
                M[i, k] += acc
                M[k, i] += acc
        # sparse against sparse
        for i in range(m):
            if dense[i]:
                continue
            for k in range(i + 1):
                if dense[k]:
                    continue
                acc = 0.0
                for e in range(ptr[i], ptr[i + 1]):
                    p = rows[e]
                    q = cols[e]
                    a = vals[e]
                    for f in range(ptr[k], ptr[k + 1]):
                        r = rows[f]
                        s = cols[f]
                        acc = acc + a * vals[f] * (W[q, r] * W[s, p] + W[p, r] * W[s, q])
                acc = 0.5 * acc
                M[i, k] += acc
                if k != i:
                    M[k, i] += acc
