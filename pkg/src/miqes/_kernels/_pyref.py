"""Pure-numpy implementations of the hot numeric kernels.

Used as the fallback when the compiled extension is unavailable. Semantics
match ``_core`` exactly; floating-point results may differ in the last ulp
because numpy's vectorized transcendentals are not bit-identical to libm.
"""

from __future__ import annotations

import numpy as np


def quadform_batch(hessian, center, scale, points):
    """Evaluate scale * (x - center)^T H (x - center) for each row of points."""
    y = points - center
    return scale * np.einsum("ij,jk,ik->i", y, hessian, y)


def penalized_batch(hess_f, center_f, scale_f, hess_g, center_g, scale_g,
                    level, penalty_coef, points):
    """Objective, constraint and penalized cost for each row of points.

    cost = f + penalty_coef * (g - level)^2 whenever g > level, else f.
    """
    f = quadform_batch(hess_f, center_f, scale_f, points)
    g = quadform_batch(hess_g, center_g, scale_g, points)
    excess = g - level
    cost = np.where(excess > 0.0, f + penalty_coef * (excess * excess), f)
    return cost, f, g


def double_geometric_from_p(p, u1, u2):
    """Difference of two geometric(p) draws per uniform pair, as int64.

    Each geometric draw is floor(log(1 - u) / log(1 - p)); p = 1 degenerates
    to the constant 0.
    """
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    if p >= 1.0:
        return np.zeros(u1.shape, dtype=np.int64)
    log_omp = np.log1p(-p)
    g1 = np.floor(np.log1p(-u1) / log_omp)
    g2 = np.floor(np.log1p(-u2) / log_omp)
    return (g1 - g2).astype(np.int64)


def mies_mutate_batch(x, s, z, q,
                      norm_global_r, norm_s, norm_x,
                      norm_global_z, norm_q, u1, u2,
                      tau_g_r, tau_l_r, tau_g_z, tau_l_z,
                      s_floor, q_floor, step_divisor):
    """One batch of self-adaptive mutations (one row per offspring).

    Real part: lognormal per-coordinate step-size update with a shared
    global factor per offspring, floored at ``s_floor``, then additive
    normal steps. Integer part: same lognormal scheme on the mean-step
    parameters, floored at ``q_floor``, then additive double-geometric
    steps whose per-coordinate geometric parameter comes from the mean
    step q' / step_divisor. Integer vectors are integer-valued float64.
    Empty blocks (zero columns) are passed through untouched.
    """
    if x.shape[1] > 0:
        s_new = np.maximum(
            s_floor,
            s * np.exp(tau_g_r * norm_global_r[:, None] + tau_l_r * norm_s),
        )
        x_new = x + s_new * norm_x
    else:
        s_new = s.copy()
        x_new = x.copy()
    if z.shape[1] > 0:
        q_new = np.maximum(
            q_floor,
            q * np.exp(tau_g_z * norm_global_z[:, None] + tau_l_z * norm_q),
        )
        t = q_new / step_divisor
        one_minus_p = t / (np.sqrt(1.0 + t * t) + 1.0)
        step = np.zeros_like(q_new)
        active = one_minus_p > 0.0
        if np.any(active):
            log_omp = np.log(one_minus_p[active])
            g1 = np.floor(np.log1p(-u1[active]) / log_omp)
            g2 = np.floor(np.log1p(-u2[active]) / log_omp)
            step[active] = g1 - g2
        z_new = z + step
    else:
        q_new = q.copy()
        z_new = z.copy()
    return x_new, s_new, z_new, q_new
