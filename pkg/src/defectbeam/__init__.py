"""Second-order non-holonomic Euler-Bernoulli and Timoshenko beams and their defect densities."""

from .core import (
    BeamCoefficients,
    BoundaryConditionError,
    BoundaryConditions,
    DefectBeamError,
    Essential,
    Grid1D,
    InvalidParameterError,
    LoadCase,
    ModelKind,
    Natural,
    NotSPDError,
    ScalarField1D,
    SingularSystemError,
    SolverError,
    make_rect_section,
)
from .defects import (
    asymptotic_sweep,
    defects_from_solution,
    eb_curvature_paths,
    eb_defect_consistency,
    greens_kernel,
    kernel_integral,
    timo_defect_groups,
)
from .energy import assemble, energy_gradient, total_energy
from .kinematics import build_fields, defect_fields, deformation_measures
from .solvers import Solution, make_mms, mms_convergence, solve, solve_eb, solve_timoshenko

__version__ = "0.1.0"

__all__ = [
    "BeamCoefficients", "BoundaryConditionError", "BoundaryConditions", "DefectBeamError", "Essential", "Grid1D",
    "InvalidParameterError", "LoadCase", "ModelKind", "Natural", "NotSPDError", "ScalarField1D",
    "SingularSystemError", "SolverError", "Solution", "assemble", "asymptotic_sweep", "build_fields",
    "defect_fields", "defects_from_solution", "deformation_measures", "eb_curvature_paths", "eb_defect_consistency",
    "energy_gradient", "greens_kernel", "kernel_integral", "make_mms", "make_rect_section", "mms_convergence",
    "solve", "solve_eb", "solve_timoshenko", "timo_defect_groups", "total_energy",
]
