"""Parametric family of mixed-integer quadratically-constrained quadratic programs.

Instances minimize a centered convex quadratic objective subject to one
centered convex quadratic inequality, over a decision vector whose trailing
coordinates are integer. Construction is fully deterministic from the
instance parameters (test case, dimension, condition number, constraint
level, all-integer flag).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-9

TEST_CASES = ("TC0", "TC1", "TC2", "TC3", "SPHERE")

# Alternating patterns for the two model centers; repeated to dimension D.
OBJECTIVE_CENTER_PATTERN = (7.0, -7.0)
CONSTRAINT_CENTER_PATTERN = (-4.0, 4.0)

# Weight of the quadratic-excess penalty is PENALTY_WEIGHT * D**2.
PENALTY_WEIGHT = 1.0e4

ROTATION_ANGLE = math.pi / 4.0


def validate_hessian(hessian: np.ndarray, name: str = "hessian") -> np.ndarray:
    """Check symmetry and positive semidefiniteness; return a float64 copy."""
    h = np.asarray(hessian, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {h.shape}")
    asym = np.max(np.abs(h - h.T)) if h.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ValueError(f"{name} is not symmetric (max asymmetry {asym:.3e})")
    eigvals = np.linalg.eigvalsh(h)
    if eigvals[0] < -PSD_TOL * max(eigvals[-1], 1.0):
        raise ValueError(f"{name} is not positive semidefinite (min eig {eigvals[0]:.3e})")
    return h


def build_cigar(n: int, condition: float) -> np.ndarray:
    """Diagonal matrix with first entry 1 and the remaining entries equal to condition."""
    if n < 1:
        raise ValueError(f"cigar needs n >= 1, got {n}")
    if condition < 1.0:
        raise ValueError(f"condition must be >= 1, got {condition}")
    diag = np.full(n, float(condition))
    diag[0] = 1.0
    return np.diag(diag)


def build_ellipse(n: int, condition: float) -> np.ndarray:
    """Diagonal matrix with entries condition ** ((i - 1) / (n - 1)), i = 1..n."""
    if n < 2:
        raise ValueError(f"ellipse needs n >= 2, got {n}")
    if condition < 1.0:
        raise ValueError(f"condition must be >= 1, got {condition}")
    exponents = np.arange(n) / (n - 1)
    return np.diag(condition ** exponents)


def build_plane_rotation(n: int, theta: float) -> np.ndarray:
    """Rotation by theta in the plane spanned by the two alternating unit vectors.

    The plane is spanned by the normalizations of (1, 0, 1, 0, ...) and
    (0, 1, 0, 1, ...); the result is orthogonal with determinant 1.
    """
    if n < 2:
        raise ValueError(f"plane rotation needs n >= 2, got {n}")
    u = np.zeros(n)
    v = np.zeros(n)
    u[0::2] = 1.0
    v[1::2] = 1.0
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    return (
        np.eye(n)
        + (cos_t - 1.0) * (np.outer(u, u) + np.outer(v, v))
        + sin_t * (np.outer(v, u) - np.outer(u, v))
    )


def build_rotated_ellipse(n: int, condition: float) -> np.ndarray:
    """Ellipse spectrum made non-separable by the quarter-turn plane rotation."""
    rotation = build_plane_rotation(n, ROTATION_ANGLE)
    rotated = rotation @ build_ellipse(n, condition) @ rotation.T
    # Symmetrize away the last-ulp asymmetry of the triple product.
    return (rotated + rotated.T) / 2.0


def block_concat(hessian: np.ndarray) -> np.ndarray:
    """Block-diagonal duplication [[H, 0], [0, H]] of an n x n Hessian."""
    h = validate_hessian(hessian)
    n = h.shape[0]
    out = np.zeros((2 * n, 2 * n))
    out[:n, :n] = h
    out[n:, n:] = h
    return out


def _center(pattern: tuple[float, float], dim: int) -> np.ndarray:
    return np.array([pattern[i % 2] for i in range(dim)])


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """A centered quadratic x -> scale * (x - center)^T H (x - center).

    Immutable after construction (arrays are locked), so forms are safe to
    share across worker processes and threads.
    """

    hessian: np.ndarray
    center: np.ndarray
    scale: float

    def __post_init__(self):
        h = validate_hessian(self.hessian)
        c = np.asarray(self.center, dtype=np.float64)
        if c.ndim != 1 or c.shape[0] != h.shape[0]:
            raise ValueError(
                f"center length {c.shape} does not match hessian size {h.shape[0]}"
            )
        if not self.scale > 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        h.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "hessian", h)
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got shape {x.shape}")
        y = x - self.center
        return float(self.scale * (y @ self.hessian @ y))

    def value_many(self, points: np.ndarray) -> np.ndarray:
        points = np.ascontiguousarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise ValueError(f"expected (m, {self.dim}) array, got shape {points.shape}")
        return kernels.quadform_batch(self.hessian, self.center, self.scale, points)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """One instance: objective form, constraint form and level, dimension split.

    The decision vector holds n_r continuous coordinates followed by n_z
    integer coordinates. Instances are immutable and safe to share.
    """

    objective: QuadraticForm
    constraint: QuadraticForm
    constraint_level: float
    n_r: int
    n_z: int
    test_case: str
    condition: float

    def __post_init__(self):
        if self.n_r < 0 or self.n_z < 0:
            raise ValueError("n_r and n_z must be nonnegative")
        dim = self.n_r + self.n_z
        if self.objective.dim != dim or self.constraint.dim != dim:
            raise ValueError(
                f"dimension split {self.n_r}+{self.n_z} does not match form size"
            )
        if not self.constraint_level > 0.0:
            raise ValueError(f"constraint level must be positive, got {self.constraint_level}")

    @property
    def dim(self) -> int:
        return self.n_r + self.n_z

    @property
    def integer_indices(self) -> np.ndarray:
        """0-based indices of the integer coordinates (the trailing block)."""
        return np.arange(self.n_r, self.dim)

    @property
    def penalty_coef(self) -> float:
        return PENALTY_WEIGHT * self.dim ** 2

    def objective_value(self, x: np.ndarray) -> float:
        return self.objective.value(x)

    def constraint_value(self, x: np.ndarray) -> float:
        return self.constraint.value(x)

    def is_feasible(self, x: np.ndarray) -> bool:
        return self.constraint_value(x) <= self.constraint_level

    def penalized_cost(self, x: np.ndarray) -> float:
        """Objective plus the quadratic-excess penalty when the constraint is violated.

        The constraint boundary itself is feasible and unpenalized; the
        squared excess makes the cost continuous across it either way.
        """
        f = self.objective_value(x)
        g = self.constraint_value(x)
        excess = g - self.constraint_level
        if excess > 0.0:
            return f + self.penalty_coef * (excess * excess)
        return f

    def penalized_cost_many(self, points: np.ndarray):
        """Vectorized (cost, f, g) for an (m, D) array of decision vectors."""
        points = np.ascontiguousarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise ValueError(f"expected (m, {self.dim}) array, got shape {points.shape}")
        return kernels.penalized_batch(
            self.objective.hessian, self.objective.center, self.objective.scale,
            self.constraint.hessian, self.constraint.center, self.constraint.scale,
            self.constraint_level, self.penalty_coef, points,
        )

    def descriptor(self) -> dict:
        """Flat record used as CSV key and CLI argument bundle."""
        return {
            "test_case": self.test_case,
            "D": self.dim,
            "n_r": self.n_r,
            "n_z": self.n_z,
            "c": self.condition,
            "E": self.constraint_level,
        }

    def key(self) -> str:
        """Stable string form of the descriptor, used to key fixture files."""
        return descriptor_key(self.descriptor())


def descriptor_key(descriptor: dict) -> str:
    return "|".join([
        str(descriptor["test_case"]),
        f"D={int(descriptor['D'])}",
        f"n_r={int(descriptor['n_r'])}",
        f"n_z={int(descriptor['n_z'])}",
        f"c={float(descriptor['c']):.17g}",
        f"E={float(descriptor['E']):.17g}",
    ])


_BLOCK_BUILDERS = {
    "TC0": (build_cigar, build_cigar),
    "TC1": (build_rotated_ellipse, build_cigar),
    "TC2": (build_cigar, build_rotated_ellipse),
    "TC3": (build_rotated_ellipse, build_rotated_ellipse),
}


def make_instance(test_case: str, dim: int, condition: float, level: float,
                  all_integer: bool = False) -> ProblemInstance:
    """Build a test-case instance at the given dimension, condition and level.

    Both Hessians are block-diagonal duplications of an n x n block
    (n = dim / 2), so the conditioning affects the continuous and the
    integer coordinates alike. The split is half/half, or fully integer
    when all_integer is set.
    """
    if test_case not in _BLOCK_BUILDERS:
        raise ValueError(f"unknown test case {test_case!r}; expected one of {list(_BLOCK_BUILDERS)}")
    if dim < 4 or dim % 2 != 0:
        raise ValueError(f"dimension must be an even integer >= 4, got {dim}")
    if condition < 1.0:
        raise ValueError(f"condition must be >= 1, got {condition}")
    if not level > 0.0:
        raise ValueError(f"constraint level must be positive, got {level}")
    n = dim // 2
    build_f, build_g = _BLOCK_BUILDERS[test_case]
    scale = 1.0 / condition
    objective = QuadraticForm(
        block_concat(build_f(n, condition)),
        _center(OBJECTIVE_CENTER_PATTERN, dim),
        scale,
    )
    constraint = QuadraticForm(
        block_concat(build_g(n, condition)),
        _center(CONSTRAINT_CENTER_PATTERN, dim),
        scale,
    )
    n_z = dim if all_integer else dim // 2
    return ProblemInstance(
        objective=objective,
        constraint=constraint,
        constraint_level=float(level),
        n_r=dim - n_z,
        n_z=n_z,
        test_case=test_case,
        condition=float(condition),
    )


def make_sphere_instance(dim: int, level: float,
                         all_integer: bool = False) -> ProblemInstance:
    """Sphere objective constrained by a sphere: identity Hessians, unit scale."""
    if dim < 2 or dim % 2 != 0:
        raise ValueError(f"dimension must be an even integer >= 2, got {dim}")
    if not level > 0.0:
        raise ValueError(f"constraint level must be positive, got {level}")
    objective = QuadraticForm(np.eye(dim), _center(OBJECTIVE_CENTER_PATTERN, dim), 1.0)
    constraint = QuadraticForm(np.eye(dim), _center(CONSTRAINT_CENTER_PATTERN, dim), 1.0)
    n_z = dim if all_integer else dim // 2
    return ProblemInstance(
        objective=objective,
        constraint=constraint,
        constraint_level=float(level),
        n_r=dim - n_z,
        n_z=n_z,
        test_case="SPHERE",
        condition=1.0,
    )
