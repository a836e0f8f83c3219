# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot numeric kernels (see _pyref for docs)."""

import numpy as np

from libc.math cimport exp, floor, log, log1p, sqrt


cdef inline double _qform_row(const double[:, ::1] hessian,
                              const double[::1] center,
                              const double[:, ::1] points,
                              Py_ssize_t row) noexcept nogil:
    cdef Py_ssize_t n = center.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc = 0.0
    cdef double row_acc
    for i in range(n):
        row_acc = 0.0
        for j in range(n):
            row_acc += hessian[i, j] * (points[row, j] - center[j])
        acc += (points[row, i] - center[i]) * row_acc
    return acc


def quadform_batch(const double[:, ::1] hessian, const double[::1] center,
                   double scale, const double[:, ::1] points):
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t k
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for k in range(m):
            out[k] = scale * _qform_row(hessian, center, points, k)
    return out_arr


def penalized_batch(const double[:, ::1] hess_f, const double[::1] center_f,
                    double scale_f,
                    const double[:, ::1] hess_g, const double[::1] center_g,
                    double scale_g,
                    double level, double penalty_coef,
                    const double[:, ::1] points):
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t k
    cdef double fv, gv, excess
    cost_arr = np.empty(m, dtype=np.float64)
    f_arr = np.empty(m, dtype=np.float64)
    g_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] cost = cost_arr
    cdef double[::1] f = f_arr
    cdef double[::1] g = g_arr
    with nogil:
        for k in range(m):
            fv = scale_f * _qform_row(hess_f, center_f, points, k)
            gv = scale_g * _qform_row(hess_g, center_g, points, k)
            f[k] = fv
            g[k] = gv
            excess = gv - level
            if excess > 0.0:
                cost[k] = fv + penalty_coef * (excess * excess)
            else:
                cost[k] = fv
    return cost_arr, f_arr, g_arr


def double_geometric_from_p(double p, const double[::1] u1,
                            const double[::1] u2):
    cdef Py_ssize_t m = u1.shape[0]
    cdef Py_ssize_t k
    cdef double log_omp, g1, g2
    out_arr = np.zeros(m, dtype=np.int64)
    cdef long long[::1] out = out_arr
    if p >= 1.0:
        return out_arr
    log_omp = log1p(-p)
    with nogil:
        for k in range(m):
            g1 = floor(log1p(-u1[k]) / log_omp)
            g2 = floor(log1p(-u2[k]) / log_omp)
            out[k] = <long long> (g1 - g2)
    return out_arr


def mies_mutate_batch(const double[:, ::1] x, const double[:, ::1] s,
                      const double[:, ::1] z, const double[:, ::1] q,
                      const double[::1] norm_global_r,
                      const double[:, ::1] norm_s,
                      const double[:, ::1] norm_x,
                      const double[::1] norm_global_z,
                      const double[:, ::1] norm_q,
                      const double[:, ::1] u1, const double[:, ::1] u2,
                      double tau_g_r, double tau_l_r,
                      double tau_g_z, double tau_l_z,
                      double s_floor, double q_floor, double step_divisor):
    cdef Py_ssize_t lam = x.shape[0]
    cdef Py_ssize_t n_r = x.shape[1]
    cdef Py_ssize_t n_z = z.shape[1]
    cdef Py_ssize_t k, i
    cdef double global_term, sv, qv, t, one_minus_p, log_omp, g1, g2

    x_new_arr = np.empty((lam, n_r), dtype=np.float64)
    s_new_arr = np.empty((lam, n_r), dtype=np.float64)
    z_new_arr = np.empty((lam, n_z), dtype=np.float64)
    q_new_arr = np.empty((lam, n_z), dtype=np.float64)
    cdef double[:, ::1] x_new = x_new_arr
    cdef double[:, ::1] s_new = s_new_arr
    cdef double[:, ::1] z_new = z_new_arr
    cdef double[:, ::1] q_new = q_new_arr

    with nogil:
        for k in range(lam):
            if n_r > 0:
                global_term = tau_g_r * norm_global_r[k]
                for i in range(n_r):
                    sv = s[k, i] * exp(global_term + tau_l_r * norm_s[k, i])
                    if sv < s_floor:
                        sv = s_floor
                    s_new[k, i] = sv
                    x_new[k, i] = x[k, i] + sv * norm_x[k, i]
            if n_z > 0:
                global_term = tau_g_z * norm_global_z[k]
                for i in range(n_z):
                    qv = q[k, i] * exp(global_term + tau_l_z * norm_q[k, i])
                    if qv < q_floor:
                        qv = q_floor
                    q_new[k, i] = qv
                    t = qv / step_divisor
                    one_minus_p = t / (sqrt(1.0 + t * t) + 1.0)
                    if one_minus_p > 0.0:
                        log_omp = log(one_minus_p)
                        g1 = floor(log1p(-u1[k, i]) / log_omp)
                        g2 = floor(log1p(-u2[k, i]) / log_omp)
                        z_new[k, i] = z[k, i] + (g1 - g2)
                    else:
                        z_new[k, i] = z[k, i]
    return x_new_arr, s_new_arr, z_new_arr, q_new_arr
