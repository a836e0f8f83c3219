"""Exact reference solver for desk-scale instances.

Solves min (x - a)^T A (x - a) subject to (x - b)^T B (x - b) <= E with the
trailing coordinates integer, by combining:

* an exact continuous solver for the one-constraint convex subproblem
  (monotone bisection on the constraint multiplier);
* certified enumeration of the integer block: candidate assignments are the
  lattice points of the feasible ellipsoid intersected with an objective
  ellipsoid derived from an incumbent, generated level-by-level with
  interval propagation;
* per-assignment lower bounds from supporting lines of the continuous
  value function (its slope is the negative multiplier), so that only a
  short sorted prefix of candidates needs an exact continuous solve.

Results are deterministic; ties are broken by the lexicographically
smallest integer assignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadforms import ProblemInstance

CONSTRAINT_RESIDUAL_REL = 1e-10
NU_MAX = 1e15

# Feasibility slack absorbing float rounding of the quadratic forms.
def _slack(level: float) -> float:
    return 1e-12 * max(1.0, level)


class OracleError(RuntimeError):
    """Base class for oracle failures."""


class EnumerationGuardError(OracleError):
    """The integer enumeration exceeded its size guard."""


class InfeasibleInstanceError(OracleError):
    """No integer assignment admits a feasible point."""


class BracketError(OracleError):
    """No multiplier bracket found within [0, NU_MAX]."""


@dataclass
class OracleSolution:
    x_star: np.ndarray
    f_star: float
    g_at_star: float
    status: str
    nodes_enumerated: int
    nu: float = 0.0


def solve_continuous_qcqp(hess_obj: np.ndarray, center_obj: np.ndarray,
                          hess_con: np.ndarray, center_con: np.ndarray,
                          level: float) -> OracleSolution:
    """Exact minimizer of one centered PSD quadratic under one PD quadratic ball.

    If the unconstrained minimizer (the objective center) is feasible it is
    returned directly; otherwise the boundary solution y(nu) solving
    (A + nu B) y = A a + nu B b is located by doubling the multiplier until
    the constraint holds, then bisecting until |g - level| <= 1e-10 * level.
    """
    a = np.asarray(center_obj, dtype=np.float64)
    b = np.asarray(center_con, dtype=np.float64)
    A = np.asarray(hess_obj, dtype=np.float64)
    B = np.asarray(hess_con, dtype=np.float64)
    if a.size == 0:
        return OracleSolution(a.copy(), 0.0, 0.0, "interior", 0, 0.0)

    d = a - b
    g_at_a = float(d @ B @ d)
    if g_at_a <= level:
        return OracleSolution(a.copy(), 0.0, g_at_a, "interior", 0, 0.0)
    if level == 0.0:
        db = b - a
        return OracleSolution(b.copy(), float(db @ A @ db), 0.0, "boundary", 0, math.inf)

    rhs_a = A @ a
    rhs_b = B @ b

    def point_at(nu: float) -> np.ndarray:
        m = A + nu * B
        try:
            return np.linalg.solve(m, rhs_a + nu * rhs_b)
        except np.linalg.LinAlgError:
            jitter = 1e-12 * float(np.trace(m))
            return np.linalg.solve(m + jitter * np.eye(m.shape[0]), rhs_a + nu * rhs_b)

    def g_at(nu: float) -> float:
        y = point_at(nu) - b
        return float(y @ B @ y)

    hi = 1.0
    g_hi = g_at(hi)
    while g_hi > level:
        hi *= 2.0
        if hi > NU_MAX:
            raise BracketError(f"no multiplier bracket within [0, {NU_MAX:g}]")
        g_hi = g_at(hi)
    lo = hi / 2.0 if hi > 1.0 else 0.0

    # hi stays on the feasible side, so the returned point never violates
    # the constraint; convergence is |g - level| <= 1e-10 * level.
    tol = CONSTRAINT_RESIDUAL_REL * level
    for _ in range(500):
        if level - g_hi <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        g_mid = g_at(mid)
        if g_mid > level:
            lo = mid
        else:
            hi, g_hi = mid, g_mid
    nu = hi
    y = point_at(nu)
    dy = y - a
    wy = y - b
    return OracleSolution(y, float(dy @ A @ dy), float(wy @ B @ wy), "boundary", 0, nu)


@dataclass
class _SplitInstance:
    """Scaled matrices and the continuous/integer partition of an instance."""

    A: np.ndarray          # scaled objective matrix, full D x D
    a: np.ndarray
    B: np.ndarray          # scaled constraint matrix, full D x D
    b: np.ndarray
    level: float
    n_r: int
    n_z: int
    schur_f: np.ndarray    # f lower-bound form on the integer block
    schur_g: np.ndarray    # g lower-bound form on the integer block
    solve_cc_f: np.ndarray | None  # A_cc^-1 A_cz, for conditioned centers
    solve_cc_g: np.ndarray | None
    block_diagonal: bool

    @classmethod
    def from_instance(cls, instance: ProblemInstance) -> "_SplitInstance":
        A = instance.objective.scale * instance.objective.hessian
        B = instance.constraint.scale * instance.constraint.hessian
        a = np.asarray(instance.objective.center)
        b = np.asarray(instance.constraint.center)
        n_r, n_z = instance.n_r, instance.n_z
        if n_r == 0:
            return cls(A, a, B, b, instance.constraint_level, n_r, n_z,
                       A.copy(), B.copy(), None, None, True)
        A_cc, A_cz, A_zz = A[:n_r, :n_r], A[:n_r, n_r:], A[n_r:, n_r:]
        B_cc, B_cz, B_zz = B[:n_r, :n_r], B[:n_r, n_r:], B[n_r:, n_r:]
        block_diag = not np.any(A_cz) and not np.any(B_cz)
        sol_f = np.linalg.solve(A_cc, A_cz) if n_z else np.zeros((n_r, 0))
        sol_g = np.linalg.solve(B_cc, B_cz) if n_z else np.zeros((n_r, 0))
        schur_f = A_zz - A_cz.T @ sol_f
        schur_g = B_zz - B_cz.T @ sol_g
        schur_f = (schur_f + schur_f.T) / 2.0
        schur_g = (schur_g + schur_g.T) / 2.0
        return cls(A, a, B, b, instance.constraint_level, n_r, n_z,
                   schur_f, schur_g, sol_f, sol_g, block_diag)

    def f_lower(self, z: np.ndarray) -> np.ndarray:
        """min over the continuous block of f, for rows of integer assignments."""
        y = z - self.a[self.n_r:]
        return np.einsum("ij,jk,ik->i", y, self.schur_f, y)

    def g_lower(self, z: np.ndarray) -> np.ndarray:
        y = z - self.b[self.n_r:]
        return np.einsum("ij,jk,ik->i", y, self.schur_g, y)

    def conditioned_solve(self, z: np.ndarray) -> tuple[OracleSolution, float]:
        """Continuous subproblem with the integer block fixed to z.

        Returns the subproblem solution (in the continuous coordinates, with
        the constant offsets removed) and the total objective value.
        """
        f_off = float(self.f_lower(z.reshape(1, -1))[0])
        g_off = float(self.g_lower(z.reshape(1, -1))[0])
        level_rem = self.level - g_off
        if level_rem < -_slack(self.level):
            raise InfeasibleInstanceError("assignment violates the constraint outright")
        level_rem = max(level_rem, 0.0)
        center_f = self.a[:self.n_r] - self.solve_cc_f @ (z - self.a[self.n_r:])
        center_g = self.b[:self.n_r] - self.solve_cc_g @ (z - self.b[self.n_r:])
        sub = solve_continuous_qcqp(self.A[:self.n_r, :self.n_r], center_f,
                                    self.B[:self.n_r, :self.n_r], center_g,
                                    level_rem)
        return sub, f_off + sub.f_star

    def assemble(self, x_c: np.ndarray, z: np.ndarray) -> np.ndarray:
        return np.concatenate([x_c, z.astype(np.float64)])


def certified_box(instance: ProblemInstance) -> tuple[np.ndarray, np.ndarray]:
    """Outward-rounded per-coordinate interval certified to contain the optimum.

    Every feasible point satisfies lambda_min(B) ||x - b||^2 <= level for the
    scaled constraint matrix B, so each integer coordinate lies within
    r = sqrt(level / lambda_min) of the constraint center.
    """
    B = instance.constraint.scale * instance.constraint.hessian
    lam_min = float(np.linalg.eigvalsh(B)[0])
    if lam_min <= 0.0:
        raise OracleError("constraint Hessian must be positive definite")
    r = math.sqrt(instance.constraint_level / lam_min)
    centers = instance.constraint.center[instance.n_r:]
    lo = np.floor(centers - r).astype(np.int64)
    hi = np.ceil(centers + r).astype(np.int64)
    return lo, hi


def _ellipsoid_cholesky(form: np.ndarray) -> np.ndarray:
    """Upper-triangular U with form = U^T U, jittered if needed."""
    try:
        return np.linalg.cholesky(form).T
    except np.linalg.LinAlgError:
        jitter = 1e-12 * max(float(np.trace(form)), 1.0)
        return np.linalg.cholesky(form + jitter * np.eye(form.shape[0])).T


def _lattice_candidates(forms: list[tuple[np.ndarray, np.ndarray, float]],
                        box: tuple[np.ndarray, np.ndarray] | None,
                        max_nodes: int) -> np.ndarray:
    """Integer points inside every ellipsoid (z-c)^T Q (z-c) <= rho.

    Level-by-level interval propagation on the Cholesky factors of each
    form; per-level ranges are intersected across forms (and the optional
    box). Returns a (k, n) int64 array; may include boundary points whose
    exact form value marginally exceeds rho (callers re-check exactly).
    """
    n = forms[0][1].shape[0]
    chol = [( _ellipsoid_cholesky(q), c, rho) for q, c, rho in forms]
    live = 1
    z_part = np.zeros((1, 0), dtype=np.int64)
    partials = [(np.zeros(1), np.zeros((1, n))) for _ in chol]  # (S, carry)
    total = 0
    for i in range(n - 1, -1, -1):
        lo_all = np.full(live, -np.inf)
        hi_all = np.full(live, np.inf)
        for (U, c, rho), (S, carry) in zip(chol, partials):
            room = rho - S
            dead = room < 0.0
            width = np.sqrt(np.maximum(room, 0.0))
            # |U_ii (z_i - c_i) + carry_i| <= width
            lo = c[i] + (-width - carry[:, i]) / U[i, i]
            hi = c[i] + (width - carry[:, i]) / U[i, i]
            lo[dead] = np.inf
            hi[dead] = -np.inf
            lo_all = np.maximum(lo_all, lo)
            hi_all = np.minimum(hi_all, hi)
        lo_int = np.ceil(lo_all - 1e-9)
        hi_int = np.floor(hi_all + 1e-9)
        if box is not None:
            lo_int = np.maximum(lo_int, box[0][i])
            hi_int = np.minimum(hi_int, box[1][i])
        counts = np.maximum(hi_int - lo_int + 1, 0.0)
        new_live = int(counts.sum())
        total += new_live
        if total > max_nodes:
            raise EnumerationGuardError(
                f"integer enumeration exceeded {max_nodes} nodes")
        if new_live == 0:
            return np.zeros((0, n), dtype=np.int64)
        counts_i = counts.astype(np.int64)
        parent = np.repeat(np.arange(live), counts_i)
        offsets = np.arange(new_live) - np.repeat(
            np.concatenate([[0], np.cumsum(counts_i)[:-1]]), counts_i)
        values = np.repeat(lo_int, counts_i) + offsets
        z_part = np.column_stack([values.astype(np.int64), z_part[parent]])
        new_partials = []
        for (U, c, rho), (S, carry) in zip(chol, partials):
            w = U[i, i] * (values - c[i]) + carry[parent, i]
            S_new = S[parent] + w * w
            carry_new = carry[parent]
            if i > 0:
                carry_new = carry_new.copy()
                carry_new[:, :i] += np.outer(values - c[i], U[:i, i])
            new_partials.append((S_new, carry_new))
        partials = new_partials
        live = new_live
    return z_part


def _phi_supports(split: _SplitInstance, level: float) -> list[tuple[float, float, float]]:
    """Supporting lines (t_k, phi_k, nu_k) of the continuous value function.

    phi(t) = min over the continuous block of f subject to g <= t is convex
    and non-increasing with derivative -nu(t), so phi(t) >= phi_k - nu_k *
    (t - t_k) for every k. Only valid for block-diagonal splits, where the
    conditioned continuous forms do not depend on the integer assignment.
    """
    if split.n_r == 0:
        return [(0.0, 0.0, 0.0)]
    A_cc = split.A[:split.n_r, :split.n_r]
    B_cc = split.B[:split.n_r, :split.n_r]
    a_c, b_c = split.a[:split.n_r], split.b[:split.n_r]
    fractions = np.concatenate([np.logspace(-5, -1.2, 8), np.linspace(0.1, 1.0, 24)])
    supports = []
    for frac in fractions:
        t = level * float(frac)
        sub = solve_continuous_qcqp(A_cc, a_c, B_cc, b_c, t)
        supports.append((t, sub.f_star, sub.nu))
        if sub.status == "interior":
            break
    return supports


def _phi_lower(supports: list[tuple[float, float, float]], t: np.ndarray) -> np.ndarray:
    best = np.zeros_like(t)
    for t_k, phi_k, nu_k in supports:
        if not math.isfinite(nu_k):
            continue
        np.maximum(best, phi_k - nu_k * (t - t_k), out=best)
    return best


def solve_mixed(instance: ProblemInstance,
                z_box: tuple[np.ndarray, np.ndarray] | None = None,
                pruning: bool = True,
                max_nodes: int = 5_000_000) -> OracleSolution:
    """Global optimum over integer assignments of the trailing coordinates.

    With pruning, candidate assignments come from the intersection of the
    feasible ellipsoid with an incumbent-derived objective ellipsoid;
    assignments are then visited in order of their objective lower bound
    and the search stops as soon as the bound passes the incumbent.
    Without pruning, every assignment of the (guarded) box is evaluated.
    """
    if instance.n_z == 0:
        split = _SplitInstance.from_instance(instance)
        sol = solve_continuous_qcqp(split.A, split.a, split.B, split.b, split.level)
        return sol
    if instance.n_z > 8:
        raise EnumerationGuardError(f"n_z = {instance.n_z} exceeds the guard of 8")
    split = _SplitInstance.from_instance(instance)
    if not pruning:
        return _solve_box_naive(instance, split, z_box, max_nodes)
    return _solve_pruned(instance, split, z_box, max_nodes)


def _box_points(box: tuple[np.ndarray, np.ndarray], max_nodes: int) -> np.ndarray:
    lo, hi = box
    widths = (hi - lo + 1).astype(np.float64)
    volume = float(np.prod(widths))
    if volume > max_nodes or volume > 1e7:
        raise EnumerationGuardError(
            f"box volume {volume:.3g} exceeds the enumeration guard")
    axes = [np.arange(l, h + 1, dtype=np.int64) for l, h in zip(lo, hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _solve_box_naive(instance: ProblemInstance, split: _SplitInstance,
                     z_box, max_nodes: int) -> OracleSolution:
    box = z_box if z_box is not None else certified_box(instance)
    points = _box_points(box, max_nodes)
    slack = _slack(split.level)
    if split.n_r == 0:
        g_vals = split.g_lower(points)
        feas = g_vals <= split.level + slack
        if not np.any(feas):
            raise InfeasibleInstanceError("no feasible integer assignment in the box")
        f_vals = split.f_lower(points)
        best = _argmin_lex(f_vals[feas], points[feas])
        z = points[feas][best]
        return _finish_all_integer(instance, split, z, len(points))
    best_cost = math.inf
    best_z = None
    best_sub = None
    for z in points:
        if split.g_lower(z.reshape(1, -1))[0] > split.level + slack:
            continue
        sub, cost = split.conditioned_solve(z.astype(np.float64))
        if cost < best_cost or (cost == best_cost and best_z is not None
                                and tuple(z) < tuple(best_z)):
            best_cost, best_z, best_sub = cost, z, sub
    if best_z is None:
        raise InfeasibleInstanceError("no feasible integer assignment in the box")
    return _finish_mixed(instance, split, best_z, best_sub, len(points))


def _argmin_lex(values: np.ndarray, points: np.ndarray) -> int:
    """Index of the smallest value; ties resolved by lexicographic order."""
    min_val = values.min()
    tied = np.flatnonzero(values == min_val)
    if len(tied) == 1:
        return int(tied[0])
    order = np.lexsort(points[tied].T[::-1])
    return int(tied[order[0]])


def _finish_all_integer(instance, split, z, nodes) -> OracleSolution:
    x = z.astype(np.float64)
    f = instance.objective_value(x)
    g = instance.constraint_value(x)
    status = "interior" if g < instance.constraint_level else "boundary"
    return OracleSolution(x, f, g, status, nodes, 0.0)


def _finish_mixed(instance, split, z, sub, nodes) -> OracleSolution:
    x = split.assemble(sub.x_star, z.astype(np.float64))
    f = instance.objective_value(x)
    g = instance.constraint_value(x)
    return OracleSolution(x, f, g, sub.status, nodes, sub.nu)


def _solve_pruned(instance: ProblemInstance, split: _SplitInstance,
                  z_box, max_nodes: int) -> OracleSolution:
    level = split.level
    slack = _slack(level)
    a_z = split.a[split.n_r:]
    b_z = split.b[split.n_r:]
    supports = _phi_supports(split, level) if split.block_diagonal else [(0.0, 0.0, 0.0)]
    phi_full = supports[-1][1] if split.block_diagonal else 0.0

    def total_cost(z: np.ndarray):
        """(cost, sub) for one assignment, or None when infeasible."""
        if split.g_lower(z.reshape(1, -1))[0] > level + slack:
            return None
        if split.n_r == 0:
            return float(split.f_lower(z.reshape(1, -1))[0]), None
        sub, cost = split.conditioned_solve(z.astype(np.float64))
        return cost, sub

    solves = 0
    best_cost = math.inf
    best_z = None
    best_sub = None

    def consider(z: np.ndarray) -> None:
        nonlocal best_cost, best_z, best_sub, solves
        res = total_cost(z)
        solves += 1
        if res is None:
            return
        cost, sub = res
        z_key = tuple(int(v) for v in z)
        if cost < best_cost or (cost == best_cost and best_z is not None
                                and z_key < tuple(best_z)):
            best_cost, best_z, best_sub = cost, np.asarray(z, dtype=np.int64), sub

    # Bootstrap incumbent: the constraint center's integer block, the rounded
    # continuous relaxation, and a greedy +-1 coordinate descent.
    clip = (lambda z: np.clip(z, z_box[0], z_box[1])) if z_box is not None else (lambda z: z)
    consider(clip(np.round(b_z).astype(np.int64)))
    relax = solve_continuous_qcqp(split.A, split.a, split.B, split.b, level)
    z_relax = clip(np.round(relax.x_star[split.n_r:]).astype(np.int64))
    consider(z_relax)
    if split.n_z <= 6:
        for delta in _box_points((np.full(split.n_z, -1, dtype=np.int64),
                                  np.ones(split.n_z, dtype=np.int64)), 1000):
            consider(clip(z_relax + delta))
    if best_z is not None:
        improved = True
        rounds = 0
        while improved and rounds < 100:
            improved = False
            rounds += 1
            for i in range(split.n_z):
                for step in (1, -1):
                    cand = best_z.copy()
                    cand[i] += step
                    cand = clip(cand)
                    prev = best_cost
                    consider(cand)
                    if best_cost < prev:
                        improved = True

    # Certified enumeration of the candidate intersection.
    pad = 1.0 + 1e-12
    forms = [(split.schur_g, b_z.astype(np.float64), level * pad)]
    if math.isfinite(best_cost):
        rho_f = (best_cost - phi_full) * pad + 1e-12
        forms.append((split.schur_f, a_z.astype(np.float64), max(rho_f, 0.0)))
    candidates = _lattice_candidates(forms, z_box, max_nodes)
    nodes = len(candidates) + solves
    if len(candidates) == 0 and best_z is None:
        raise InfeasibleInstanceError("no feasible integer assignment")

    if len(candidates) > 0:
        g_low = split.g_lower(candidates.astype(np.float64))
        keep = g_low <= level + slack
        candidates = candidates[keep]
        g_low = g_low[keep]
    if len(candidates) == 0 and best_z is None:
        raise InfeasibleInstanceError("no feasible integer assignment")

    if len(candidates) > 0:
        f_low = split.f_lower(candidates.astype(np.float64))
        bound = f_low + _phi_lower(supports, level - g_low) if split.n_r > 0 \
            else f_low
        order = np.argsort(bound, kind="stable")
        for idx in order:
            if bound[idx] > best_cost:
                break
            consider(candidates[idx])

    if best_z is None:
        raise InfeasibleInstanceError("no feasible integer assignment")
    if split.n_r == 0:
        return _finish_all_integer(instance, split, best_z, nodes)
    return _finish_mixed(instance, split, best_z, best_sub, nodes)
