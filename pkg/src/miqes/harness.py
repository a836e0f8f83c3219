"""Experiment-matrix execution, metrics and CSV output.

A matrix cell is (test case, dimension, condition, level, solver); each cell
runs a configured number of seeds. Seeds are derived from a SHA-256 hash of
the cell descriptor so results are stable across platforms and processes.
Oracle references live in a JSON fixtures file keyed by the instance
descriptor; summaries normalize against them and flag cells without one.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cma_ih, mies, oracle
from .quadforms import ProblemInstance, descriptor_key, make_instance, make_sphere_instance
from .records import FEASIBILITY_SLACK, RunRecord

RECORD_COLUMNS = (
    "test_case", "D", "n_r", "n_z", "c", "E", "solver", "seed_index", "seed",
    "budget", "best_cost", "best_f", "best_g", "feasible", "best_feasible_f",
    "evaluations", "termination", "wall_time", "best_x",
)

SUMMARY_COLUMNS = (
    "test_case", "D", "n_r", "n_z", "c", "E", "solver", "runs",
    "feasibility_rate", "infeasible_runs", "normalization", "reference_f",
    "norm_min", "norm_q25", "norm_median", "norm_q75", "norm_max", "mean_eps_z",
)


def integer_error_rate(candidate: np.ndarray, reference: np.ndarray,
                       integer_indices: np.ndarray) -> float:
    """Fraction of integer coordinates differing from the reference (exact equality)."""
    candidate = np.asarray(candidate)
    reference = np.asarray(reference)
    if candidate.shape != reference.shape:
        raise ValueError("candidate and reference must have equal length")
    integer_indices = np.asarray(integer_indices, dtype=np.int64)
    if integer_indices.size == 0:
        raise ValueError("integer error rate is undefined without integer coordinates")
    diffs = candidate[integer_indices] != reference[integer_indices]
    return float(np.count_nonzero(diffs)) / integer_indices.size


def normalized_objective(record: RunRecord, reference_f: float) -> tuple[float, bool]:
    """best_f over the reference optimum; (absolute best_f, True) when the
    reference optimum is 0 and normalization is undefined."""
    if reference_f > 0.0:
        return record.best_f / reference_f, False
    return record.best_f, True


def derive_seed(descriptor: dict, solver: str, seed_index: int) -> int:
    """Platform-stable 64-bit seed: SHA-256 of 'descriptor|solver|seed_index'."""
    key = f"{descriptor_key(descriptor)}|{solver}|{seed_index}"
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def build_instance(test_case: str, dim: int, condition: float, level: float,
                   all_integer: bool) -> ProblemInstance:
    if test_case == "SPHERE":
        return make_sphere_instance(dim, level, all_integer)
    return make_instance(test_case, dim, condition, level, all_integer)


@dataclass
class MatrixConfig:
    """Grid and run settings for one experiment matrix."""

    test_cases: tuple = ("TC0", "TC1", "TC2", "TC3")
    dims: tuple = (8,)
    conditions: tuple = (10.0, 1e3, 1e6)
    levels: tuple = (10.0, 50.0)
    solvers: tuple = ("mies", "cma_ih")
    seeds: int = 5
    budget: int = 20_000
    all_integer: bool = False
    trace: bool = False
    jobs: int = 1
    mies_options: dict = field(default_factory=dict)
    cma_options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "MatrixConfig":
        known = {
            "test_cases": tuple, "dims": tuple, "conditions": tuple,
            "levels": tuple, "solvers": tuple, "seeds": int, "budget": int,
            "all_integer": bool, "trace": bool, "jobs": int,
            "mies_options": dict, "cma_options": dict,
        }
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            conv = known[key]
            kwargs[key] = conv(value) if conv is not dict else dict(value)
        return cls(**kwargs)

    def cells(self) -> list[dict]:
        out = []
        for test_case in self.test_cases:
            for dim in self.dims:
                for cond in self.conditions:
                    for level in self.levels:
                        for solver in self.solvers:
                            out.append({
                                "test_case": test_case,
                                "dim": int(dim),
                                "condition": float(cond),
                                "level": float(level),
                                "all_integer": self.all_integer,
                                "solver": solver,
                            })
        return out


def run_single(test_case: str, dim: int, condition: float, level: float,
               all_integer: bool, solver: str, seed_index: int, budget: int,
               trace: bool = False, mies_options: dict | None = None,
               cma_options: dict | None = None) -> RunRecord:
    """One run of one cell; the seed is derived from the cell descriptor."""
    instance = build_instance(test_case, dim, condition, level, all_integer)
    seed = derive_seed(instance.descriptor(), solver, seed_index)
    if solver == "mies":
        config = mies.MiesConfig(budget=budget, **(mies_options or {}))
        record = mies.run(instance, config, seed, trace=trace)
    elif solver == "cma_ih":
        config = cma_ih.CmaConfig(budget=budget, **(cma_options or {}))
        record = cma_ih.run(instance, config, seed, trace=trace)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    record.seed_index = seed_index
    return record


def _run_task(task: dict) -> RunRecord:
    return run_single(**task)


def run_matrix(config: MatrixConfig) -> list[RunRecord]:
    """Execute every (cell, seed) and return records sorted by descriptor and seed.

    Runs are independent (each owns its derived seed), so the worker count
    never affects results, only wall time.
    """
    tasks = []
    for cell in config.cells():
        for seed_index in range(config.seeds):
            tasks.append(dict(
                cell,
                seed_index=seed_index,
                budget=config.budget,
                trace=config.trace,
                mies_options=config.mies_options,
                cma_options=config.cma_options,
            ))
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        records = [_run_task(t) for t in tasks]
    records.sort(key=lambda r: (descriptor_key(r.descriptor()), r.solver, r.seed_index))
    return records


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def record_to_row(record: RunRecord) -> list[str]:
    return [
        record.test_case, str(record.dim), str(record.n_r), str(record.n_z),
        _fmt(record.condition), _fmt(record.level), record.solver,
        str(record.seed_index), str(record.seed), str(record.budget),
        _fmt(record.best_cost), _fmt(record.best_f), _fmt(record.best_g),
        "true" if record.feasible else "false", _fmt(record.best_feasible_f),
        str(record.evaluations), record.termination, _fmt(record.wall_time),
        ";".join(_fmt(v) for v in record.best_x),
    ]


def write_records_csv(records: list[RunRecord], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for record in records:
            writer.writerow(record_to_row(record))


def read_records_csv(path: str) -> list[RunRecord]:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(RunRecord(
                test_case=row["test_case"],
                dim=int(row["D"]),
                n_r=int(row["n_r"]),
                n_z=int(row["n_z"]),
                condition=float(row["c"]),
                level=float(row["E"]),
                solver=row["solver"],
                seed=int(row["seed"]),
                budget=int(row["budget"]),
                best_cost=float(row["best_cost"]),
                best_f=float(row["best_f"]),
                best_g=float(row["best_g"]),
                feasible=row["feasible"] == "true",
                best_feasible_f=float(row["best_feasible_f"]),
                evaluations=int(row["evaluations"]),
                termination=row["termination"],
                best_x=np.array([float(v) for v in row["best_x"].split(";")]),
                wall_time=float(row["wall_time"]),
                seed_index=int(row["seed_index"]),
            ))
    return records


def write_trace_csv(record: RunRecord, path: str) -> None:
    if record.trace is None:
        raise ValueError("record carries no trace")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("generation", "evaluations", "best_cost", "sigma", "min_int_std"))
        for point in record.trace:
            writer.writerow((
                point.generation, point.evaluations, _fmt(point.best_cost),
                _fmt(point.sigma), _fmt(point.min_int_std),
            ))


def trace_filename(record: RunRecord) -> str:
    key = descriptor_key(record.descriptor()).replace("|", "_").replace("=", "")
    return f"trace_{key}_{record.solver}_s{record.seed_index}.csv"


def compute_reference(instance: ProblemInstance, max_nodes: int = 5_000_000) -> dict:
    solution = oracle.solve_mixed(instance, max_nodes=max_nodes)
    return {
        "descriptor": instance.descriptor(),
        "f_star": solution.f_star,
        "g_at_star": solution.g_at_star,
        "x_star": [float(v) for v in solution.x_star],
        "status": solution.status,
        "nodes_enumerated": solution.nodes_enumerated,
    }


def load_fixtures(path: str) -> dict:
    if not os.path.exists(path):
        return {}
    with open(path) as fh:
        return json.load(fh)


def save_fixtures(fixtures: dict, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(fixtures, fh, indent=1, sort_keys=True)


def ensure_references(instances: list[ProblemInstance], fixtures: dict,
                      max_nodes: int = 5_000_000) -> tuple[dict, list[str]]:
    """Compute any missing oracle references; returns (fixtures, failed keys)."""
    failed = []
    for instance in instances:
        key = instance.key()
        if key in fixtures:
            continue
        try:
            fixtures[key] = compute_reference(instance, max_nodes=max_nodes)
        except oracle.OracleError as exc:
            failed.append(f"{key}: {exc}")
    return fixtures, failed


@dataclass
class SummaryRow:
    test_case: str
    dim: int
    n_r: int
    n_z: int
    condition: float
    level: float
    solver: str
    runs: int
    feasibility_rate: float
    infeasible_runs: int
    normalization: str
    reference_f: float
    norm_min: float
    norm_q25: float
    norm_median: float
    norm_q75: float
    norm_max: float
    mean_eps_z: float


def _summary_objective(record: RunRecord) -> float:
    """Objective used in summaries: the best feasible objective when one was
    found, otherwise the penalized best cost (infeasible runs look worse)."""
    return record.best_feasible_f if record.has_feasible else record.best_cost


def summarize(records: list[RunRecord], fixtures: dict | None = None) -> list[SummaryRow]:
    """Per-cell quantiles of the normalized objective, mean integer error
    rate against the oracle optimizer, and the feasibility rate.

    Quantiles use linear interpolation. Cells without an oracle reference
    report absolute objective values with normalization flagged 'missing';
    a reference optimum of exactly 0 is flagged 'absolute'.
    """
    fixtures = fixtures or {}
    groups: dict[tuple, list[RunRecord]] = {}
    for record in records:
        group_key = (descriptor_key(record.descriptor()), record.solver)
        groups.setdefault(group_key, []).append(record)
    rows = []
    for (key, solver), group in sorted(groups.items()):
        fixture = fixtures.get(key)
        reference_f = float(fixture["f_star"]) if fixture else float("nan")
        values = np.array([_summary_objective(r) for r in group])
        if fixture is None:
            normalization = "missing"
        elif reference_f > 0.0:
            normalization = "oracle"
            values = values / reference_f
        else:
            normalization = "absolute"
        quantiles = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
        if fixture is not None:
            reference_x = np.array(fixture["x_star"])
            integer_indices = np.arange(group[0].n_r, group[0].dim)
            eps = [integer_error_rate(r.best_x, reference_x, integer_indices)
                   for r in group]
            mean_eps = float(np.mean(eps))
        else:
            mean_eps = float("nan")
        first = group[0]
        rows.append(SummaryRow(
            test_case=first.test_case, dim=first.dim, n_r=first.n_r,
            n_z=first.n_z, condition=first.condition, level=first.level,
            solver=solver, runs=len(group),
            feasibility_rate=float(np.mean([r.has_feasible for r in group])),
            infeasible_runs=int(np.sum([not r.has_feasible for r in group])),
            normalization=normalization, reference_f=reference_f,
            norm_min=float(quantiles[0]), norm_q25=float(quantiles[1]),
            norm_median=float(quantiles[2]), norm_q75=float(quantiles[3]),
            norm_max=float(quantiles[4]), mean_eps_z=mean_eps,
        ))
    return rows


def write_summary_csv(rows: list[SummaryRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([
                row.test_case, str(row.dim), str(row.n_r), str(row.n_z),
                _fmt(row.condition), _fmt(row.level), row.solver, str(row.runs),
                _fmt(row.feasibility_rate), str(row.infeasible_runs),
                row.normalization, _fmt(row.reference_f),
                _fmt(row.norm_min), _fmt(row.norm_q25), _fmt(row.norm_median),
                _fmt(row.norm_q75), _fmt(row.norm_max), _fmt(row.mean_eps_z),
            ])


def check_record_invariants(record: RunRecord) -> list[str]:
    """Violated row invariants, as human-readable strings (empty when clean)."""
    problems = []
    if record.feasible != (record.best_g <= record.level + FEASIBILITY_SLACK):
        problems.append("feasible flag inconsistent with best_g")
    if record.feasible:
        max_gap = record.best_cost - record.best_f
        # Within the slack band the penalty contributes at most coef * slack^2.
        allowed = 1e4 * record.dim ** 2 * FEASIBILITY_SLACK ** 2 + 1e-12
        if max_gap > allowed:
            problems.append("best_cost exceeds best_f on a feasible record")
    if record.best_x.shape[0] != record.dim:
        problems.append("best_x has wrong length")
    z_part = record.best_x[record.n_r:]
    if not np.all(z_part == np.round(z_part)):
        problems.append("integer coordinates are not exact integers")
    return problems
