"""Deterministic robot and world simulation for desk-scale deployments."""

from .world import FaultScript, SimObject, SimWorld, sample_box_surface
from .robot import SimRobot, SimRobotParams

__all__ = [
    "FaultScript",
    "SimObject",
    "SimWorld",
    "sample_box_surface",
    "SimRobot",
    "SimRobotParams",
]
