# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the greedy merge loop.

Expression-for-expression mirror of _build_py.run_build; the build disables
FP contraction and sincos fusion (glibc's sincos is not bit-identical to
separate sin/cos calls) so both backends emit bit-identical rotation
sequences and covariance states. Any change to the formulas or tie rules
must land in both files.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport M_PI, atan2, cos, fabs, sin, sqrt

cnp.import_array()

cdef double PI_4 = M_PI / 4.0
cdef double PI_2 = M_PI / 2.0


cdef inline double _pair_sim(double c, double vi, double vj, bint use_corr) noexcept nogil:
    cdef double s
    if not use_corr:
        return fabs(c)
    if vi <= 0.0 or vj <= 0.0:
        return 0.0
    s = fabs(c) / sqrt(vi * vj)
    if s > 1.0:
        s = 1.0
    return s


cdef void _row_scan(double[:, ::1] cov, cnp.uint8_t[::1] active, Py_ssize_t i,
                    bint use_corr, double *out_val, Py_ssize_t *out_j) noexcept nogil:
    cdef Py_ssize_t p = cov.shape[0]
    cdef Py_ssize_t j, bj = -1
    cdef double v, best = -1.0
    for j in range(p):
        if j == i or not active[j]:
            continue
        v = _pair_sim(cov[i, j], cov[i, i], cov[j, j], use_corr)
        if v > best:
            best = v
            bj = j
    out_val[0] = best
    out_j[0] = bj


cdef void _apply_rotation(double[:, ::1] cov, Py_ssize_t a, Py_ssize_t b,
                          double theta) noexcept nogil:
    cdef Py_ssize_t p = cov.shape[0]
    cdef Py_ssize_t i
    cdef double c = cos(theta)
    cdef double s = sin(theta)
    cdef double caa = cov[a, a]
    cdef double cbb = cov[b, b]
    cdef double cab = cov[a, b]
    cdef double ra, rb, na, nb
    for i in range(p):
        if i == a or i == b:
            continue
        ra = cov[i, a]
        rb = cov[i, b]
        na = c * ra + s * rb
        nb = c * rb - s * ra
        cov[i, a] = na
        cov[a, i] = na
        cov[i, b] = nb
        cov[b, i] = nb
    cov[a, a] = c * c * caa + 2.0 * c * s * cab + s * s * cbb
    cov[b, b] = s * s * caa - 2.0 * c * s * cab + c * c * cbb
    cov[a, b] = 0.0
    cov[b, a] = 0.0


def run_build(double[:, ::1] cov, cnp.uint8_t[::1] active, bint use_corr,
              Py_ssize_t n_levels, bint exhaustive, double stop_below):
    """Compiled counterpart of _build_py.run_build; same contract."""
    cdef Py_ssize_t p = cov.shape[0]
    alphas_arr = np.zeros(n_levels, dtype=np.int64)
    betas_arr = np.zeros(n_levels, dtype=np.int64)
    thetas_arr = np.zeros(n_levels)
    sum_is_beta_arr = np.zeros(n_levels, dtype=np.uint8)
    sims_arr = np.zeros(n_levels)
    cdef cnp.int64_t[::1] alphas = alphas_arr
    cdef cnp.int64_t[::1] betas = betas_arr
    cdef double[::1] thetas = thetas_arr
    cdef cnp.uint8_t[::1] sum_is_beta = sum_is_beta_arr
    cdef double[::1] sims = sims_arr

    row_val_arr = np.full(p, -1.0)
    row_j_arr = np.full(p, -1, dtype=np.intp)
    cdef double[::1] row_val = row_val_arr
    cdef Py_ssize_t[::1] row_j = row_j_arr

    cdef Py_ssize_t k, i, j, a, b, su, de, i0, count = 0
    cdef double v, best, cab, theta
    cdef bint beta_is_sum

    with nogil:
        if not exhaustive:
            for i in range(p):
                if active[i]:
                    _row_scan(cov, active, i, use_corr, &row_val[i], &row_j[i])

        for k in range(n_levels):
            best = -1.0
            a = -1
            b = -1
            if exhaustive:
                for i in range(p):
                    if not active[i]:
                        continue
                    for j in range(i + 1, p):
                        if not active[j]:
                            continue
                        v = _pair_sim(cov[i, j], cov[i, i], cov[j, j], use_corr)
                        if v > best:
                            best = v
                            a = i
                            b = j
            else:
                i0 = -1
                for i in range(p):
                    if active[i] and row_val[i] > best:
                        best = row_val[i]
                        i0 = i
                a = i0
                b = row_j[i0]
                if b < a:
                    a = b
                    b = i0
            if best < stop_below:
                break
            cab = cov[a, b]
            theta = 0.5 * atan2(2.0 * cab, cov[a, a] - cov[b, b])
            if theta > PI_4:
                theta = theta - PI_2
            elif theta < -PI_4:
                theta = theta + PI_2
            _apply_rotation(cov, a, b, theta)
            beta_is_sum = cov[b, b] > cov[a, a]
            de = a if beta_is_sum else b
            active[de] = 0
            alphas[k] = a
            betas[k] = b
            thetas[k] = theta
            sum_is_beta[k] = beta_is_sum
            sims[k] = -best if cab < 0.0 else best
            count = k + 1
            if not exhaustive and count < n_levels:
                su = b if beta_is_sum else a
                row_val[de] = -1.0
                row_j[de] = -1
                for i in range(p):
                    if not active[i] or i == su:
                        continue
                    if row_j[i] == a or row_j[i] == b:
                        _row_scan(cov, active, i, use_corr, &row_val[i], &row_j[i])
                    else:
                        v = _pair_sim(cov[i, su], cov[i, i], cov[su, su], use_corr)
                        if v > row_val[i] or (v == row_val[i] and su < row_j[i]):
                            row_val[i] = v
                            row_j[i] = su
                _row_scan(cov, active, su, use_corr, &row_val[su], &row_j[su])

    return (alphas_arr[:count], betas_arr[:count], thetas_arr[:count],
            sum_is_beta_arr[:count], sims_arr[:count])
