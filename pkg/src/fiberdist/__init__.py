"""Adversarial (minimum noise energy) distance for the nondispersive fiber channel."""

from .approx import ApproxTable, approx_distance, build_table, load_table, save_table
from .channel import ControlSignal, FiberParams, Trajectory, control_energy, integrate, propagate_noise_free
from .constellation import Constellation, design_max_min, distance_matrix, greedy_refine, max_clique, polar_grid, qam
from .distance import (
    DistanceResult,
    decompose_distance,
    distance_from_origin,
    exact_distance,
    phi_star,
    radial_distance,
    upper_bound,
)
from .eulag import EffortSolution, JointSolution, solve_effort, solve_joint
from .errors import FiberDistError

__all__ = [
    "ApproxTable", "approx_distance", "build_table", "load_table", "save_table",
    "ControlSignal", "FiberParams", "Trajectory", "control_energy", "integrate", "propagate_noise_free",
    "Constellation", "design_max_min", "distance_matrix", "greedy_refine", "max_clique", "polar_grid", "qam",
    "DistanceResult", "decompose_distance", "distance_from_origin", "exact_distance", "phi_star",
    "radial_distance", "upper_bound",
    "EffortSolution", "JointSolution", "solve_effort", "solve_joint",
    "FiberDistError",
]
