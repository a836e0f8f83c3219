"""Mixed-integer evolution strategies on quadratically constrained quadratic programs.

Library plus CLI benchmark harness: a parametric unbounded MIQCQP instance
family, a self-adaptive mixed-integer evolution strategy, CMA-ES with
integer handling, an exact desk-scale reference solver, and an experiment
matrix with reproducible seeds and CSV output.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .quadforms import (
    ProblemInstance,
    QuadraticForm,
    block_concat,
    build_cigar,
    build_ellipse,
    build_plane_rotation,
    build_rotated_ellipse,
    make_instance,
    make_sphere_instance,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "ProblemInstance",
    "QuadraticForm",
    "block_concat",
    "build_cigar",
    "build_ellipse",
    "build_plane_rotation",
    "build_rotated_ellipse",
    "make_instance",
    "make_sphere_instance",
    "__version__",
]
