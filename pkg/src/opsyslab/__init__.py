"""opsyslab: numerics for finite-dimensional matrix operator systems.

Concrete *-closed subspaces S of M_d carry induced matrix norms and positive
cones at every matrix level.  This package computes positive decompositions,
generation/normality constants, convex gauges and widths, quotient/coproduct
constructions and machine-checkable dualizability verdicts for such systems.
"""

from .core import (
    ToleranceConfig,
    OperatorSystemSpec,
    LevelElement,
    build_system,
    realize,
    is_positive,
    op_norm,
    project_to_system,
)

__version__ = "0.1.0"

__all__ = [
    "ToleranceConfig",
    "OperatorSystemSpec",
    "LevelElement",
    "build_system",
    "realize",
    "is_positive",
    "op_norm",
    "project_to_system",
    "__version__",
]
