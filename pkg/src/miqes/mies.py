"""Self-adaptive mixed-integer evolution strategy.

Each individual carries per-coordinate mutation standard deviations for its
continuous part and per-coordinate mean-step parameters for its integer
part. Both sets of strategy parameters self-adapt lognormally and are
floored (s at 1e-5, q at 1); integer steps are double-geometric. Plain
truncation selection, no recombination, no boundary handling: the search
space is unbounded.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .quadforms import ProblemInstance
from .records import FEASIBILITY_SLACK, BestTracker, RunRecord, TracePoint

STEP_SIZE_FLOOR = 1e-5
MEAN_STEP_FLOOR = 1.0


@dataclass
class MiesIndividual:
    """Decision variables plus their strategy parameters.

    x/s are the continuous coordinates and their mutation standard
    deviations; z/q are the integer coordinates and their mean-step
    parameters. cost/f/g are filled in by evaluation.
    """

    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    q: np.ndarray
    cost: float = float("nan")
    f: float = float("nan")
    g: float = float("nan")
    feasible: bool = False

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.s = np.asarray(self.s, dtype=np.float64)
        self.z = np.asarray(self.z, dtype=np.int64)
        self.q = np.asarray(self.q, dtype=np.float64)
        if self.x.shape != self.s.shape or self.z.shape != self.q.shape:
            raise ValueError("strategy parameter shapes must match decision shapes")

    @property
    def n_r(self) -> int:
        return self.x.shape[0]

    @property
    def n_z(self) -> int:
        return self.z.shape[0]

    def decision_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.z.astype(np.float64)])


@dataclass
class MiesConfig:
    mu: int = 15
    lambda_: int = 100
    selection: str = "comma"
    budget: int = 20_000
    init_low: float = -10.0
    init_high: float = 10.0
    init_s: float = 1.0
    init_q: float = 1.0
    mean_step_divisor: str = "one"

    def __post_init__(self):
        if not 1 <= self.mu <= self.lambda_:
            raise ValueError(f"need lambda >= mu >= 1, got mu={self.mu}, lambda={self.lambda_}")
        if self.selection not in ("comma", "plus"):
            raise ValueError(f"selection must be 'comma' or 'plus', got {self.selection!r}")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if self.mean_step_divisor not in ("one", "n_z"):
            raise ValueError(f"mean_step_divisor must be 'one' or 'n_z', got {self.mean_step_divisor!r}")
        if self.init_s <= 0 or self.init_q < 1.0:
            raise ValueError("init_s must be positive and init_q >= 1")


def _taus(n: int) -> tuple[float, float]:
    return 1.0 / np.sqrt(2.0 * n), 1.0 / np.sqrt(2.0 * np.sqrt(n))


def _divisor_value(divisor: str, n_z: int) -> float:
    return 1.0 if divisor == "one" else float(max(n_z, 1))


def mutate(ind: MiesIndividual, rng: np.random.Generator,
           mean_step_divisor: str = "one") -> MiesIndividual:
    """Mutate one individual; the parent is left untouched.

    Draw order: one global normal, then the per-coordinate lognormal and
    step normals for the continuous block (skipped entirely when n_r = 0),
    then the same for the integer block plus two uniforms per coordinate.
    """
    n_r, n_z = ind.n_r, ind.n_z
    if n_r > 0:
        tau_g_r, tau_l_r = _taus(n_r)
        global_r = rng.standard_normal(1)
        norm_s = rng.standard_normal((1, n_r))
        norm_x = rng.standard_normal((1, n_r))
    else:
        tau_g_r = tau_l_r = 0.0
        global_r = np.zeros(1)
        norm_s = np.zeros((1, 0))
        norm_x = np.zeros((1, 0))
    if n_z > 0:
        tau_g_z, tau_l_z = _taus(n_z)
        global_z = rng.standard_normal(1)
        norm_q = rng.standard_normal((1, n_z))
        u1 = rng.random((1, n_z))
        u2 = rng.random((1, n_z))
    else:
        tau_g_z = tau_l_z = 0.0
        global_z = np.zeros(1)
        norm_q = np.zeros((1, 0))
        u1 = np.zeros((1, 0))
        u2 = np.zeros((1, 0))
    x_new, s_new, z_new, q_new = kernels.mies_mutate_batch(
        ind.x.reshape(1, -1), ind.s.reshape(1, -1),
        ind.z.astype(np.float64).reshape(1, -1), ind.q.reshape(1, -1),
        global_r, norm_s, norm_x, global_z, norm_q, u1, u2,
        tau_g_r, tau_l_r, tau_g_z, tau_l_z,
        STEP_SIZE_FLOOR, MEAN_STEP_FLOOR, _divisor_value(mean_step_divisor, n_z),
    )
    return MiesIndividual(x=x_new[0], s=s_new[0], z=z_new[0].astype(np.int64), q=q_new[0])


def evaluate(instance: ProblemInstance, ind: MiesIndividual) -> MiesIndividual:
    """Fill in cost, objective, constraint and feasibility in place."""
    x = ind.decision_vector()
    ind.f = instance.objective_value(x)
    ind.g = instance.constraint_value(x)
    ind.cost = instance.penalized_cost(x)
    ind.feasible = ind.g <= instance.constraint_level
    return ind


def _select_order(costs: np.ndarray, gs: np.ndarray) -> np.ndarray:
    """Ranking by cost, ties by constraint value, then by insertion order."""
    return np.lexsort((gs, costs))


def select(parents: list[MiesIndividual], offspring: list[MiesIndividual],
           config: MiesConfig) -> list[MiesIndividual]:
    """Truncation selection of the mu best by penalized cost."""
    pool = list(offspring) if config.selection == "comma" else list(parents) + list(offspring)
    costs = np.array([ind.cost for ind in pool])
    gs = np.array([ind.g for ind in pool])
    if np.any(np.isnan(costs)):
        raise ValueError("selection requires evaluated individuals")
    order = _select_order(costs, gs)
    return [pool[i] for i in order[:config.mu]]


def run(instance: ProblemInstance, config: MiesConfig, seed: int,
        trace: bool = False) -> RunRecord:
    """Mutate / evaluate / select until the evaluation budget is exhausted."""
    t_start = time.perf_counter()
    rng = np.random.default_rng(seed)
    n_r, n_z = instance.n_r, instance.n_z
    mu, lam = config.mu, config.lambda_
    divisor = _divisor_value(config.mean_step_divisor, n_z)
    tau_g_r, tau_l_r = _taus(n_r) if n_r > 0 else (0.0, 0.0)
    tau_g_z, tau_l_z = _taus(n_z) if n_z > 0 else (0.0, 0.0)

    par_x = rng.uniform(config.init_low, config.init_high, (mu, n_r))
    par_z = rng.integers(int(config.init_low), int(config.init_high) + 1,
                         (mu, n_z)).astype(np.float64)
    par_s = np.full((mu, n_r), config.init_s)
    par_q = np.full((mu, n_z), config.init_q)

    tracker = BestTracker(instance.constraint_level)
    par_cost, par_f, par_g = _evaluate_batch(instance, par_x, par_z)
    tracker.update_many(np.hstack([par_x, par_z]), par_cost, par_f, par_g)
    evaluations = mu

    trace_points: list[TracePoint] | None = [] if trace else None
    generation = 0
    if trace_points is not None:
        trace_points.append(TracePoint(generation, evaluations, tracker.best_cost))

    while evaluations < config.budget:
        generation += 1
        parent_idx = rng.integers(0, mu, size=lam)
        off_x, off_s, off_z, off_q = kernels.mies_mutate_batch(
            np.ascontiguousarray(par_x[parent_idx]),
            np.ascontiguousarray(par_s[parent_idx]),
            np.ascontiguousarray(par_z[parent_idx]),
            np.ascontiguousarray(par_q[parent_idx]),
            rng.standard_normal(lam) if n_r > 0 else np.zeros(lam),
            rng.standard_normal((lam, n_r)) if n_r > 0 else np.zeros((lam, 0)),
            rng.standard_normal((lam, n_r)) if n_r > 0 else np.zeros((lam, 0)),
            rng.standard_normal(lam) if n_z > 0 else np.zeros(lam),
            rng.standard_normal((lam, n_z)) if n_z > 0 else np.zeros((lam, 0)),
            rng.random((lam, n_z)) if n_z > 0 else np.zeros((lam, 0)),
            rng.random((lam, n_z)) if n_z > 0 else np.zeros((lam, 0)),
            tau_g_r, tau_l_r, tau_g_z, tau_l_z,
            STEP_SIZE_FLOOR, MEAN_STEP_FLOOR, divisor,
        )
        off_cost, off_f, off_g = _evaluate_batch(instance, off_x, off_z)
        evaluations += lam
        tracker.update_many(np.hstack([off_x, off_z]), off_cost, off_f, off_g)

        if config.selection == "comma":
            pool = (off_x, off_s, off_z, off_q, off_cost, off_g)
        else:
            pool = (
                np.vstack([par_x, off_x]), np.vstack([par_s, off_s]),
                np.vstack([par_z, off_z]), np.vstack([par_q, off_q]),
                np.concatenate([par_cost, off_cost]), np.concatenate([par_g, off_g]),
            )
        order = _select_order(pool[4], pool[5])[:mu]
        par_x, par_s, par_z, par_q = (a[order] for a in pool[:4])
        par_cost, par_g = pool[4][order], pool[5][order]

        if trace_points is not None:
            trace_points.append(TracePoint(generation, evaluations, tracker.best_cost))

    best_x = tracker.best_x if tracker.best_x is not None else np.zeros(instance.dim)
    return RunRecord(
        test_case=instance.test_case,
        dim=instance.dim,
        n_r=n_r,
        n_z=n_z,
        condition=instance.condition,
        level=instance.constraint_level,
        solver="mies",
        seed=seed,
        budget=config.budget,
        best_cost=tracker.best_cost,
        best_f=tracker.best_f,
        best_g=tracker.best_g,
        feasible=tracker.best_g <= instance.constraint_level + FEASIBILITY_SLACK,
        best_feasible_f=tracker.best_feasible_f,
        evaluations=evaluations,
        termination="budget",
        best_x=best_x,
        wall_time=time.perf_counter() - t_start,
        trace=trace_points,
    )


def _evaluate_batch(instance: ProblemInstance, xs: np.ndarray, zs: np.ndarray):
    points = np.ascontiguousarray(np.hstack([xs, zs]))
    return kernels.penalized_batch(
        instance.objective.hessian, instance.objective.center, instance.objective.scale,
        instance.constraint.hessian, instance.constraint.center, instance.constraint.scale,
        instance.constraint_level, instance.penalty_coef, points,
    )
