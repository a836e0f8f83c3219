"""Benchmark of the compiled kernels against the pure-Python fallback.

Micro-benchmarks time each kernel on representative shapes for every
available backend; the end-to-end section times a full solver run per
backend by temporarily swapping the dispatched kernel functions.
"""

from __future__ import annotations

import time
from contextlib import contextmanager

import numpy as np

from . import _kernels
from .quadforms import make_instance

_KERNEL_NAMES = ("quadform_batch", "penalized_batch", "double_geometric_from_p",
                 "mies_mutate_batch")


@contextmanager
def use_backend(name: str):
    """Temporarily dispatch all kernels through the named backend."""
    impl = _kernels.available_backends()[name]
    saved = {k: getattr(_kernels, k) for k in _KERNEL_NAMES}
    try:
        for k in _KERNEL_NAMES:
            setattr(_kernels, k, getattr(impl, k))
        yield
    finally:
        for k, fn in saved.items():
            setattr(_kernels, k, fn)


def _time(fn, repeats: int) -> float:
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def _kernel_inputs(dim: int, lam: int, rng: np.random.Generator) -> dict:
    n = dim // 2
    instance = make_instance("TC1", dim, 100.0, 30.0)
    points = rng.uniform(-10, 10, (lam, dim))
    return {
        "instance": instance,
        "points": np.ascontiguousarray(points),
        "x": rng.uniform(-10, 10, (lam, n)),
        "s": np.full((lam, n), 1.0),
        "z": np.round(rng.uniform(-10, 10, (lam, n))),
        "q": np.full((lam, n), 1.0),
        "g_r": rng.standard_normal(lam),
        "n_s": rng.standard_normal((lam, n)),
        "n_x": rng.standard_normal((lam, n)),
        "g_z": rng.standard_normal(lam),
        "n_q": rng.standard_normal((lam, n)),
        "u1": rng.random((lam, n)),
        "u2": rng.random((lam, n)),
        "u_flat": rng.random(lam * n),
    }


def run_benchmark(dim: int = 8, lam: int = 100, repeats: int = 200,
                  budget: int = 20_000) -> list[str]:
    """Returns the report lines (also usable programmatically in tests)."""
    from . import mies  # late import to avoid cycles

    rng = np.random.default_rng(12345)
    data = _kernel_inputs(dim, lam, rng)
    inst = data["instance"]
    n = dim // 2
    taus = 1.0 / np.sqrt(2 * n), 1.0 / np.sqrt(2 * np.sqrt(n))

    def make_calls(impl):
        return {
            "quadform_batch": lambda: impl.quadform_batch(
                inst.objective.hessian, inst.objective.center,
                inst.objective.scale, data["points"]),
            "penalized_batch": lambda: impl.penalized_batch(
                inst.objective.hessian, inst.objective.center, inst.objective.scale,
                inst.constraint.hessian, inst.constraint.center, inst.constraint.scale,
                inst.constraint_level, inst.penalty_coef, data["points"]),
            "double_geometric_from_p": lambda: impl.double_geometric_from_p(
                0.3, data["u_flat"], data["u_flat"]),
            "mies_mutate_batch": lambda: impl.mies_mutate_batch(
                data["x"], data["s"], data["z"], data["q"],
                data["g_r"], data["n_s"], data["n_x"],
                data["g_z"], data["n_q"], data["u1"], data["u2"],
                taus[0], taus[1], taus[0], taus[1], 1e-5, 1.0, 1.0),
        }

    backends = _kernels.available_backends()
    lines = [f"kernel backends available: {', '.join(sorted(backends))}",
             f"shapes: dim={dim}, lambda={lam}, repeats={repeats}", ""]
    lines.append(f"{'kernel':<26} " + " ".join(f"{b:>12}" for b in sorted(backends))
                 + ("      speedup" if len(backends) > 1 else ""))
    timings: dict[str, dict[str, float]] = {}
    for name in _KERNEL_NAMES:
        timings[name] = {}
        for bname in sorted(backends):
            calls = make_calls(backends[bname])
            timings[name][bname] = _time(calls[name], repeats)
        row = f"{name:<26} " + " ".join(
            f"{timings[name][b] * 1e6:>9.1f} us" for b in sorted(backends))
        if "cython" in backends and "python" in backends:
            row += f"   {timings[name]['python'] / timings[name]['cython']:>8.1f}x"
        lines.append(row)

    lines.append("")
    lines.append(f"end-to-end mies run (TC1, dim={dim}, budget={budget}):")
    for bname in sorted(backends):
        with use_backend(bname):
            config = mies.MiesConfig(budget=budget)
            start = time.perf_counter()
            mies.run(inst, config, seed=2024)
            elapsed = time.perf_counter() - start
        lines.append(f"  {bname:<8} {elapsed:8.3f} s")
    return lines
