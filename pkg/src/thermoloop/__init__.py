"""Triangularly coupled triple-loop thermosyphon: models, gain bounds, adaptive and ADRC control."""

from thermoloop.model import SystemParams, rhs_controlled, rhs_disturbed, rhs_tracking, jacobian
from thermoloop.integrator import IntegrationConfig, Trajectory, rk4_step, simulate
from thermoloop.stability import build_A, gain_bounds, is_positive_definite, psi

__all__ = [
    "SystemParams",
    "rhs_controlled",
    "rhs_disturbed",
    "rhs_tracking",
    "jacobian",
    "IntegrationConfig",
    "Trajectory",
    "rk4_step",
    "simulate",
    "build_A",
    "gain_bounds",
    "is_positive_definite",
    "psi",
]

__version__ = "0.1.0"
