"""CMA-ES with integer handling for unbounded mixed-integer search.

A single full covariance matrix adapts over all coordinates; candidates get
their integer coordinates rounded (half away from zero) before evaluation
while the raw pre-rounding samples feed the distribution update. A lower
bound on the effective per-coordinate standard deviation of the integer
coordinates prevents stagnation on integer plateaus.

Strategy constants follow the standard CMA-ES defaults (weighted
recombination, cumulative step-size adaptation, rank-one plus rank-mu
covariance update).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .quadforms import ProblemInstance
from .records import FEASIBILITY_SLACK, BestTracker, RunRecord, TracePoint


@dataclass
class CmaConfig:
    lambda_: int | None = None
    budget: int = 20_000
    integer_min_std: float = 0.2
    tol_fun: float = 1e-9
    tol_x_rel: float = 1e-11
    init_sigma: float = 5.0
    init_low: float = -10.0
    init_high: float = 10.0

    def resolved_lambda(self, dim: int) -> int:
        lam = self.lambda_ if self.lambda_ is not None else 4 + int(3 * math.log(dim))
        if lam < 2:
            raise ValueError(f"lambda must be >= 2, got {lam}")
        return lam


@dataclass
class CmaState:
    mean: np.ndarray
    sigma: float
    C: np.ndarray
    path_sigma: np.ndarray
    path_c: np.ndarray
    weights: np.ndarray
    lam: int
    generation: int = 0
    eigen_basis: np.ndarray | None = field(default=None, repr=False)
    eigen_sqrt: np.ndarray | None = field(default=None, repr=False)
    eigen_generation: int = -1

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def mu(self) -> int:
        return self.weights.shape[0]


class _Constants:
    """Default learning rates and normalizers derived from (dim, weights)."""

    def __init__(self, dim: int, weights: np.ndarray):
        mueff = 1.0 / float(np.sum(weights ** 2))
        self.mueff = mueff
        self.c_sigma = (mueff + 2.0) / (dim + mueff + 5.0)
        self.d_sigma = (
            1.0
            + 2.0 * max(0.0, math.sqrt((mueff - 1.0) / (dim + 1.0)) - 1.0)
            + self.c_sigma
        )
        self.c_c = (4.0 + mueff / dim) / (dim + 4.0 + 2.0 * mueff / dim)
        self.c_1 = 2.0 / ((dim + 1.3) ** 2 + mueff)
        self.c_mu = min(
            1.0 - self.c_1,
            2.0 * (mueff - 2.0 + 1.0 / mueff) / ((dim + 2.0) ** 2 + mueff),
        )
        self.chi_n = math.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim ** 2))
        self.lazy_gap = max(1, int(1.0 / (10.0 * dim * (self.c_1 + self.c_mu))))


def _selection_weights(lam: int) -> np.ndarray:
    mu = lam // 2
    raw = math.log((lam + 1.0) / 2.0) - np.log(np.arange(1, mu + 1))
    return raw / raw.sum()


def init_state(instance: ProblemInstance, config: CmaConfig,
               rng: np.random.Generator) -> CmaState:
    dim = instance.dim
    lam = config.resolved_lambda(dim)
    state = CmaState(
        mean=rng.uniform(config.init_low, config.init_high, dim),
        sigma=config.init_sigma,
        C=np.eye(dim),
        path_sigma=np.zeros(dim),
        path_c=np.zeros(dim),
        weights=_selection_weights(lam),
        lam=lam,
    )
    enforce_integer_floor(state, instance.integer_indices, config.integer_min_std)
    return state


def round_integers(points: np.ndarray, integer_indices: np.ndarray) -> np.ndarray:
    """Round the integer coordinates to the nearest integer, half away from zero."""
    out = np.array(points, dtype=np.float64)
    if integer_indices.size:
        block = out[..., integer_indices]
        # + 0.0 normalizes the -0.0 produced by copysign on small negatives.
        out[..., integer_indices] = np.copysign(np.floor(np.abs(block) + 0.5), block) + 0.0
    return out


def _refresh_eigen(state: CmaState) -> None:
    eigvals, basis = np.linalg.eigh(state.C)
    floor = 1e-14 * max(eigvals[-1], 0.0)
    if eigvals[0] < floor:
        eigvals = np.maximum(eigvals, floor if floor > 0.0 else 1e-300)
        state.C = (basis * eigvals) @ basis.T
        state.C = (state.C + state.C.T) / 2.0
    state.eigen_basis = basis
    state.eigen_sqrt = np.sqrt(eigvals)
    state.eigen_generation = state.generation


def ask(state: CmaState, instance: ProblemInstance,
        rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sample lambda candidates; returns (rounded-for-evaluation, raw-for-update)."""
    consts = _Constants(state.dim, state.weights)
    if state.eigen_basis is None or state.generation - state.eigen_generation >= consts.lazy_gap:
        _refresh_eigen(state)
    z = rng.standard_normal((state.lam, state.dim))
    y = z @ (state.eigen_basis * state.eigen_sqrt).T
    raw = state.mean + state.sigma * y
    return round_integers(raw, instance.integer_indices), raw


def tell(state: CmaState, instance: ProblemInstance, config: CmaConfig,
         raw_candidates: np.ndarray, costs: np.ndarray) -> None:
    """Standard CMA-ES update from the raw samples, then the integer floor.

    Candidates are ranked by cost with a stable sort; the mu best raw
    vectors drive the weighted mean, both evolution paths, the step size
    (cumulative step-size adaptation) and the rank-one / rank-mu
    covariance update.
    """
    costs = np.asarray(costs, dtype=np.float64)
    if not np.all(np.isfinite(costs)):
        raise ValueError("tell requires finite costs")
    if raw_candidates.shape != (state.lam, state.dim):
        raise ValueError(f"expected {(state.lam, state.dim)} candidates, got {raw_candidates.shape}")
    consts = _Constants(state.dim, state.weights)
    order = np.argsort(costs, kind="stable")
    selected = raw_candidates[order[: state.mu]]

    mean_old = state.mean
    y_sel = (selected - mean_old) / state.sigma
    y_w = state.weights @ y_sel
    state.mean = mean_old + state.sigma * y_w

    if state.eigen_basis is None:
        _refresh_eigen(state)
    # C^(-1/2) y_w through the cached eigendecomposition.
    c_invsqrt_yw = state.eigen_basis @ ((state.eigen_basis.T @ y_w) / state.eigen_sqrt)
    cs, ds = consts.c_sigma, consts.d_sigma
    state.path_sigma = (1.0 - cs) * state.path_sigma + math.sqrt(
        cs * (2.0 - cs) * consts.mueff
    ) * c_invsqrt_yw

    state.generation += 1
    ps_norm = float(np.linalg.norm(state.path_sigma))
    h_sig = ps_norm / math.sqrt(
        1.0 - (1.0 - cs) ** (2 * state.generation)
    ) < (1.4 + 2.0 / (state.dim + 1.0)) * consts.chi_n

    cc = consts.c_c
    state.path_c = (1.0 - cc) * state.path_c + (
        math.sqrt(cc * (2.0 - cc) * consts.mueff) * y_w if h_sig else 0.0
    )

    rank_one = np.outer(state.path_c, state.path_c)
    rank_mu = y_sel.T @ (state.weights[:, None] * y_sel)
    delta_h = (0.0 if h_sig else 1.0) * cc * (2.0 - cc)
    state.C = (
        (1.0 - consts.c_1 - consts.c_mu) * state.C
        + consts.c_1 * (rank_one + delta_h * state.C)
        + consts.c_mu * rank_mu
    )
    state.C = (state.C + state.C.T) / 2.0

    state.sigma *= math.exp((cs / ds) * (ps_norm / consts.chi_n - 1.0))

    enforce_integer_floor(state, instance.integer_indices, config.integer_min_std)
    _renormalize(state)


def enforce_integer_floor(state: CmaState, integer_indices: np.ndarray,
                          integer_min_std: float) -> None:
    """Raise deficient integer-coordinate variances up to the floor.

    Rows and columns of deficient coordinates are rescaled by the same
    factor as the standard deviation, preserving correlations (and positive
    semidefiniteness, being a diagonal congruence).
    """
    if integer_indices.size == 0:
        return
    diag = np.diag(state.C)[integer_indices]
    eff = state.sigma * np.sqrt(diag)
    deficient = eff < integer_min_std
    if not np.any(deficient):
        return
    factors = np.ones(state.dim)
    idx = integer_indices[deficient]
    zero = diag[deficient] == 0.0
    nonzero_idx = idx[~zero]
    factors[nonzero_idx] = integer_min_std / eff[deficient][~zero]
    state.C *= np.outer(factors, factors)
    for i in idx[zero]:
        state.C[i, i] = (integer_min_std / state.sigma) ** 2
    # Stale eigen caches would sample below the floor; refresh next ask.
    state.eigen_generation = -(10 ** 9)


def _renormalize(state: CmaState, cap: float = 1e8) -> None:
    """Rescale (sigma, C, p_c) jointly when C's diagonal explodes.

    The integer variance floor inflates C while the step size shrinks; the
    sampling distribution sigma^2 C is unchanged by moving that scale back
    into sigma, but the bookkeeping would eventually overflow. p_c lives in
    (x - m) / sigma units, so it rescales with 1 / sqrt(kappa); the whitened
    p_sigma is scale-free.
    """
    top = float(np.max(np.diag(state.C)))
    if top <= cap:
        return
    state.C /= top
    state.path_c /= math.sqrt(top)
    state.sigma *= math.sqrt(top)
    state.eigen_generation = -(10 ** 9)


def min_integer_std(state: CmaState, integer_indices: np.ndarray) -> float:
    """Smallest effective standard deviation among the integer coordinates."""
    if integer_indices.size == 0:
        return float("nan")
    return float(state.sigma * np.sqrt(np.min(np.diag(state.C)[integer_indices])))


def run(instance: ProblemInstance, config: CmaConfig, seed: int,
        trace: bool = False) -> RunRecord:
    """Ask / evaluate / tell until the budget or a tolerance criterion hits."""
    t_start = time.perf_counter()
    rng = np.random.default_rng(seed)
    state = init_state(instance, config, rng)
    integer_indices = instance.integer_indices
    continuous = np.arange(instance.n_r)
    tol_x = config.tol_x_rel * config.init_sigma
    hist_len = 10 + math.ceil(30.0 * instance.dim / state.lam)

    tracker = BestTracker(instance.constraint_level)
    mean_eval = round_integers(state.mean, integer_indices)
    cost0, f0, g0 = instance.penalized_cost_many(mean_eval.reshape(1, -1))
    tracker.update(mean_eval, float(cost0[0]), float(f0[0]), float(g0[0]))
    evaluations = 1

    trace_points: list[TracePoint] | None = [] if trace else None
    if trace_points is not None:
        trace_points.append(TracePoint(
            0, evaluations, tracker.best_cost, state.sigma,
            min_integer_std(state, integer_indices),
        ))

    best_history: list[float] = []
    termination = "budget"
    while evaluations < config.budget:
        x_eval, x_raw = ask(state, instance, rng)
        cost, f, g = instance.penalized_cost_many(x_eval)
        evaluations += state.lam
        tracker.update_many(x_eval, cost, f, g)
        tell(state, instance, config, x_raw, cost)

        if trace_points is not None:
            trace_points.append(TracePoint(
                state.generation, evaluations, tracker.best_cost, state.sigma,
                min_integer_std(state, integer_indices),
            ))

        best_history.append(float(np.min(cost)))
        if len(best_history) > hist_len:
            best_history.pop(0)
            if max(best_history) - min(best_history) < config.tol_fun:
                termination = "tolerance"
                break
        if continuous.size and state.sigma * math.sqrt(
            float(np.max(np.diag(state.C)[continuous]))
        ) < tol_x:
            termination = "tolerance"
            break

    best_x = tracker.best_x if tracker.best_x is not None else mean_eval
    return RunRecord(
        test_case=instance.test_case,
        dim=instance.dim,
        n_r=instance.n_r,
        n_z=instance.n_z,
        condition=instance.condition,
        level=instance.constraint_level,
        solver="cma_ih",
        seed=seed,
        budget=config.budget,
        best_cost=tracker.best_cost,
        best_f=tracker.best_f,
        best_g=tracker.best_g,
        feasible=tracker.best_g <= instance.constraint_level + FEASIBILITY_SLACK,
        best_feasible_f=tracker.best_feasible_f,
        evaluations=evaluations,
        termination=termination,
        best_x=best_x,
        wall_time=time.perf_counter() - t_start,
        trace=trace_points,
    )
