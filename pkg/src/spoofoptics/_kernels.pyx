# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop: real SH basis evaluation.

Mirrors ``_kernels_py.real_sh_basis`` operation for operation; results agree
with the numpy fallback bit for bit (checked in tests/test_kernels.py).
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def real_sh_basis(const double[:, ::1] dirs, int order, const double[:, ::1] norm):
    """Evaluate all real SH up to ``order`` at unit directions.

    ``norm[l, m]`` holds sqrt((2l+1)/4pi * (l-m)!/(l+m)!) with the sqrt(2)
    factor already folded in for m > 0. Returns an (N, (order+1)**2) array.
    """
    cdef Py_ssize_t n = dirs.shape[0]
    cdef int ncoef = (order + 1) * (order + 1)
    out_arr = np.empty((n, ncoef), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] pmm = np.empty(order + 1, dtype=np.float64)
    cdef Py_ssize_t i
    cdef int l, m
    cdef double x, y, z, c, s, c_next, p_prev2, p_prev1, p_cur, fact

    for i in range(n):
        x = dirs[i, 0]
        y = dirs[i, 1]
        z = dirs[i, 2]
        # c + i s = (x + i y)**m, built incrementally
        c = 1.0
        s = 0.0
        fact = 1.0
        for m in range(order + 1):
            if m > 0:
                fact = fact * (2 * m - 1)
                c_next = c * x - s * y
                s = c * y + s * x
                c = c_next
            p_prev2 = 0.0
            p_prev1 = fact
            for l in range(m, order + 1):
                if l == m:
                    p_cur = fact
                elif l == m + 1:
                    p_cur = z * (2 * m + 1) * fact
                else:
                    p_cur = ((2 * l - 1) * z * p_prev1 - (l + m - 1) * p_prev2) / (l - m)
                if l > m:
                    p_prev2 = p_prev1
                    p_prev1 = p_cur
                if m == 0:
                    out[i, l * l + l] = norm[l, 0] * p_cur
                else:
                    out[i, l * l + l + m] = norm[l, m] * p_cur * c
                    out[i, l * l + l - m] = norm[l, m] * p_cur * s
    return out_arr

