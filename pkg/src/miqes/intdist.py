"""Double-geometric integer mutation law: parameter conversion, sampling, exact pmf.

The mutation step is the difference of two i.i.d. geometric(p) draws, which
is symmetric about 0 and supported on all of Z. The geometric parameter p
and the mean step size S = E[||z||_1] of an n_z-dimensional mutation vector
are linked bijectively, so callers can control the distribution through
either parameterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from . import _kernels as kernels


def p_from_mean_step(mean_step: float, n_z: int) -> float:
    """Geometric parameter giving an n_z-dimensional mean L1 step of mean_step."""
    if mean_step < 0.0:
        raise ValueError(f"mean step must be nonnegative, got {mean_step}")
    if n_z < 1:
        raise ValueError(f"n_z must be positive, got {n_z}")
    t = mean_step / n_z
    return 1.0 - t / (math.sqrt(1.0 + t * t) + 1.0)


def mean_step_from_p(p: float, n_z: int) -> float:
    """Mean L1 step of an n_z-dimensional mutation with geometric parameter p."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if n_z < 1:
        raise ValueError(f"n_z must be positive, got {n_z}")
    return n_z * 2.0 * (1.0 - p) / (p * (2.0 - p))


@dataclass(frozen=True)
class DoubleGeometricParam:
    """Geometric parameter p with the dimension context used for conversion."""

    p: float
    n_z: int = 1

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if self.n_z < 1:
            raise ValueError(f"n_z must be positive, got {self.n_z}")

    @classmethod
    def from_mean_step(cls, mean_step: float, n_z: int) -> "DoubleGeometricParam":
        return cls(p=p_from_mean_step(mean_step, n_z), n_z=n_z)

    @property
    def mean_step(self) -> float:
        return mean_step_from_p(self.p, self.n_z)


def sample_geometric(p: float, u: float) -> int:
    """Geometric(p) draw from one uniform u in [0, 1): floor(log(1-u)/log(1-p)).

    p = 1 is the degenerate constant-0 case (the limit of the formula).
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    if p == 1.0:
        return 0
    return int(math.floor(math.log1p(-u) / math.log1p(-p)))


def sample_double_geometric(param: DoubleGeometricParam,
                            rng: np.random.Generator) -> int:
    """One double-geometric step g1 - g2 using two uniforms from rng."""
    g1 = sample_geometric(param.p, rng.random())
    g2 = sample_geometric(param.p, rng.random())
    return g1 - g2


def sample_double_geometric_many(p: float, size: int,
                                 rng: np.random.Generator) -> np.ndarray:
    """Vectorized double-geometric sampling; draws 2 * size uniforms from rng."""
    u1 = rng.random(size)
    u2 = rng.random(size)
    return kernels.double_geometric_from_p(p, u1, u2)


def pmf(k: int, p: float) -> float:
    """Exact probability of step k: p * (1-p)^|k| / (2-p)."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    return p * (1.0 - p) ** abs(k) / (2.0 - p)


def tail_mass(k_range: int, p: float) -> float:
    """Exact one-sided tail probability Pr{z > k_range} = (1-p)^(k_range+1) / (2-p)."""
    return (1.0 - p) ** (k_range + 1) / (2.0 - p)


def chi_square_fit(samples: np.ndarray, p: float, k_range: int = 30,
                   min_expected: float = 5.0) -> tuple[float, float, int]:
    """Chi-square goodness-of-fit of samples against the exact pmf.

    Bins are the integers in [-k_range, k_range] plus the two open tails;
    adjacent low-expectation bins are merged left-to-right until every bin
    expects at least min_expected counts. Returns (statistic, p_value,
    degrees_of_freedom).
    """
    samples = np.asarray(samples)
    n = samples.size
    ks = np.arange(-k_range, k_range + 1)
    expected = np.array([n * pmf(int(k), p) for k in ks])
    observed = np.array([np.count_nonzero(samples == k) for k in ks], dtype=float)
    expected = np.concatenate([[n * tail_mass(k_range, p)], expected,
                               [n * tail_mass(k_range, p)]])
    observed = np.concatenate([
        [float(np.count_nonzero(samples < -k_range))],
        observed,
        [float(np.count_nonzero(samples > k_range))],
    ])
    exp_bins: list[float] = []
    obs_bins: list[float] = []
    acc_e = acc_o = 0.0
    for e, o in zip(expected, observed):
        acc_e += e
        acc_o += o
        if acc_e >= min_expected:
            exp_bins.append(acc_e)
            obs_bins.append(acc_o)
            acc_e = acc_o = 0.0
    if exp_bins:
        exp_bins[-1] += acc_e
        obs_bins[-1] += acc_o
    else:
        exp_bins, obs_bins = [acc_e], [acc_o]
    exp_arr = np.array(exp_bins)
    obs_arr = np.array(obs_bins)
    if len(exp_arr) < 2:
        raise ValueError("not enough samples to form chi-square bins")
    stat = float(np.sum((obs_arr - exp_arr) ** 2 / exp_arr))
    dof = len(exp_arr) - 1
    p_value = float(chi2.sf(stat, dof))
    return stat, p_value, dof
