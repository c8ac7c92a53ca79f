"""Variance-reduced accelerated primal-dual solver for finite-sum
saddle-point problems, with baselines, gap metrics, and a benchmark CLI."""

from .geometry import (
    Box,
    BregmanGeometry,
    Simplex,
    divergence,
    entropy_simplex_geometry,
    euclidean_box_geometry,
    grad_map,
    grad_map_inverse,
    momentum_combine,
    prox_box,
    prox_simplex_entropy,
)
from .problems import (
    BilinearInstance,
    DroInstance,
    FullBatchView,
    LipschitzProfile,
    PrimalDualPoint,
    SaddlePointProblem,
    empirical_lipschitz,
    full_gradient_lipschitz,
    lipschitz_estimate,
    synthetic_bilinear,
    synthetic_dro,
)
from .schedule import (
    ConstantSchedule,
    PolynomialSchedule,
    constant_schedule,
    polynomial_schedule,
    validate,
)
from .solver import RngStream, SolveResult, run, run_epoch
from .baselines import apd_full_solve, run_stochastic_baseline, smd_step, smp_step, tune_baseline
from .metrics import GapEvaluator, ReferenceSaddle, gap, saddle_oracle

__version__ = "0.1.0"

__all__ = [
    "Box", "BregmanGeometry", "Simplex", "divergence",
    "entropy_simplex_geometry", "euclidean_box_geometry", "grad_map",
    "grad_map_inverse", "momentum_combine", "prox_box", "prox_simplex_entropy",
    "BilinearInstance", "DroInstance", "FullBatchView", "LipschitzProfile",
    "PrimalDualPoint", "SaddlePointProblem", "empirical_lipschitz",
    "full_gradient_lipschitz", "lipschitz_estimate", "synthetic_bilinear",
    "synthetic_dro", "ConstantSchedule", "PolynomialSchedule",
    "constant_schedule", "polynomial_schedule", "validate", "RngStream",
    "SolveResult", "run", "run_epoch", "apd_full_solve",
    "run_stochastic_baseline", "smd_step", "smp_step", "tune_baseline",
    "GapEvaluator", "ReferenceSaddle", "gap", "saddle_oracle",
]
