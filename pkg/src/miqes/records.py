"""Run outcome records shared by the solvers and the benchmark harness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# A run is feasible-flagged when the best constraint value is within this
# slack of the level; the penalty itself uses the exact boundary.
FEASIBILITY_SLACK = 1e-9


@dataclass
class TracePoint:
    """Per-generation progress snapshot (min_int_std is cma-only)."""

    generation: int
    evaluations: int
    best_cost: float
    sigma: float = float("nan")
    min_int_std: float = float("nan")


@dataclass
class RunRecord:
    """Outcome of one solver run on one instance.

    best_* fields describe the best-ever individual by penalized cost;
    best_feasible_f is the lowest objective value seen among feasible
    candidates (nan when the run never produced a feasible point).
    """

    test_case: str
    dim: int
    n_r: int
    n_z: int
    condition: float
    level: float
    solver: str
    seed: int
    budget: int
    best_cost: float
    best_f: float
    best_g: float
    feasible: bool
    best_feasible_f: float
    evaluations: int
    termination: str
    best_x: np.ndarray
    wall_time: float = 0.0
    seed_index: int = -1
    trace: list[TracePoint] | None = field(default=None, repr=False)

    @property
    def has_feasible(self) -> bool:
        return not np.isnan(self.best_feasible_f)

    def descriptor(self) -> dict:
        return {
            "test_case": self.test_case,
            "D": self.dim,
            "n_r": self.n_r,
            "n_z": self.n_z,
            "c": self.condition,
            "E": self.level,
        }


class BestTracker:
    """Tracks the best-by-cost candidate and the best feasible objective.

    Feasibility here is exact (g <= level); the emitted record's feasible
    flag additionally allows the documented 1e-9 slack.
    """

    def __init__(self, level: float):
        self.level = level
        self.best_cost = float("inf")
        self.best_f = float("nan")
        self.best_g = float("nan")
        self.best_x: np.ndarray | None = None
        self.best_feasible_f = float("nan")

    def update(self, x: np.ndarray, cost: float, f: float, g: float) -> None:
        if cost < self.best_cost:
            self.best_cost = cost
            self.best_f = f
            self.best_g = g
            self.best_x = np.array(x, dtype=np.float64)
        if g <= self.level and not f >= self.best_feasible_f:
            # "not >=" also replaces the initial nan.
            self.best_feasible_f = f

    def update_many(self, points: np.ndarray, costs: np.ndarray,
                    fs: np.ndarray, gs: np.ndarray) -> None:
        k = int(np.argmin(costs))
        if costs[k] < self.best_cost:
            self.best_cost = float(costs[k])
            self.best_f = float(fs[k])
            self.best_g = float(gs[k])
            self.best_x = np.array(points[k], dtype=np.float64)
        feas = gs <= self.level
        if np.any(feas):
            f_min = float(np.min(fs[feas]))
            if not f_min >= self.best_feasible_f:
                self.best_feasible_f = f_min
