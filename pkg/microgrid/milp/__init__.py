from .branch_and_bound import solve_milp
from .exceptions import ModelError, MilpError, MpsFormatError, MpsNameError, NumericalBreakdown
from .iis import irreducible_rows
from .model import (
    LinConstraint,
    MilpModel,
    ModelBuilder,
    Sense,
    Solution,
    SolverLimits,
    SolveStatus,
    Tolerances,
    VarDef,
    VarKind,
    max_violation,
)
from .mps import read_mps, write_mps
from .simplex import solve_lp

__all__ = [
    "LinConstraint",
    "MilpError",
    "MilpModel",
    "ModelBuilder",
    "ModelError",
    "MpsFormatError",
    "MpsNameError",
    "NumericalBreakdown",
    "Sense",
    "Solution",
    "SolverLimits",
    "SolveStatus",
    "Tolerances",
    "VarDef",
    "VarKind",
    "irreducible_rows",
    "max_violation",
    "read_mps",
    "solve_lp",
    "solve_milp",
    "write_mps",
]
