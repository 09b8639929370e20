"""Schedulability analysis for partitioned fixed-priority systems with FIFO spin locks and flexible spin priorities."""

from .assignment import assign, preset, protocol_assignment
from .model import Resource, System, Task, load_system, validate, validate_assignment
from .rta import AnalysisReport, analyze, schedulable
from .taskgen import GenConfig, generate

__all__ = [
    "AnalysisReport",
    "GenConfig",
    "Resource",
    "System",
    "Task",
    "analyze",
    "assign",
    "generate",
    "load_system",
    "preset",
    "protocol_assignment",
    "schedulable",
    "validate",
    "validate_assignment",
]
