"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def real_sh_basis(dirs, order, norm):
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    out = np.empty((dirs.shape[0], (order + 1) ** 2), dtype=np.float64)
    c = np.ones_like(x)
    s = np.zeros_like(x)
    fact = 1.0
    for m in range(order + 1):
        if m > 0:
            fact = fact * (2 * m - 1)
            c, s = c * x - s * y, c * y + s * x
        p_prev2 = np.zeros_like(z)
        p_prev1 = np.full_like(z, fact)
        for l in range(m, order + 1):
            if l == m:
                p_cur = np.full_like(z, fact)
            elif l == m + 1:
                p_cur = z * (2 * m + 1) * fact
            else:
                p_cur = ((2 * l - 1) * z * p_prev1 - (l + m - 1) * p_prev2) / (l - m)
            if l > m:
                p_prev2, p_prev1 = p_prev1, p_cur
            if m == 0:
                out[:, l * l + l] = norm[l, 0] * p_cur
            else:
                out[:, l * l + l + m] = norm[l, m] * p_cur * c
                out[:, l * l + l - m] = norm[l, m] * p_cur * s
    return out


def gram(design, target):
    design = np.ascontiguousarray(design, dtype=np.float64)
    target = np.ascontiguousarray(target, dtype=np.float64)
    return design.T @ design, design.T @ target, float(target @ target)
