"""Numerical continuation and critical-point analysis for the 1D Bratu problem."""

__version__ = "0.1.0"

from .analytic import CriticalityRoot, ExactBranchPoint, exact_branch, find_alpha_bar
from .continuation import (
    BranchPoint,
    ContinuationConfig,
    CriticalKind,
    CriticalPoint,
    locate_critical_points,
    trace_branch,
)
from .discretize import DiscreteState, Grid, Scheme, SchemeKind
from .linalg import BorderedSystem, SymTridiag, Tridiag
from .scan import Form, scan_alpha

__all__ = [
    "BorderedSystem",
    "BranchPoint",
    "ContinuationConfig",
    "CriticalKind",
    "CriticalPoint",
    "CriticalityRoot",
    "DiscreteState",
    "ExactBranchPoint",
    "Form",
    "Grid",
    "Scheme",
    "SchemeKind",
    "SymTridiag",
    "Tridiag",
    "exact_branch",
    "find_alpha_bar",
    "locate_critical_points",
    "scan_alpha",
    "trace_branch",
]
