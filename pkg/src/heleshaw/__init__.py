"""Finite-difference simulator for Brinkman-regularized Hele-Shaw tumor growth.

The model couples a density transported by the gradient of a smoothed
pressure potential with a pressure-limited growth law:

    n_t - div(n grad W) = n G(p),   p = a n^gamma,   -mu lap W + W = p.

Modules: grid (fields and stencils), brinkman (elliptic solve), transport
(fluxes, update, CFL), invariants (a-priori estimate checkers), sim
(driver and IO), expressions (initial-data grammar), cli (command line).
"""

from .brinkman import (
    EllipticSolution,
    EllipticSolverConfig,
    IterationLimitExceeded,
    SingularMatrix,
    apply_helmholtz,
    face_velocities,
    solve_brinkman,
    solve_brinkman_dense,
)
from .expressions import ExpressionError, compile_expression
from .grid import (
    BoundaryCondition,
    FaceVelocities,
    GridSpec,
    InitialDataError,
    ScalarField,
    cell_average_init,
    diff_minus,
    diff_plus,
    laplacian,
)
from .invariants import (
    InvariantReport,
    check_density_bounds,
    check_energy_identity,
    check_entropy_l2,
    check_mass_balance,
    check_potential_bounds,
)
from .sim import (
    Diagnostics,
    Frame,
    IncompatibleGrids,
    SimConfig,
    SimState,
    convergence_study,
    init_state,
    load_config,
    read_frame,
    restrict,
    run,
    step,
    write_frame,
)
from .transport import (
    CflConfig,
    CflMode,
    CflViolation,
    ModelParams,
    NonFiniteState,
    cfl_dt,
    convex_coefficients,
    growth,
    numerical_fluxes,
    pressure,
    transport_step,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition", "GridSpec", "ScalarField", "FaceVelocities",
    "InitialDataError", "cell_average_init", "diff_plus", "diff_minus",
    "laplacian",
    "EllipticSolverConfig", "EllipticSolution", "IterationLimitExceeded",
    "SingularMatrix", "apply_helmholtz", "solve_brinkman",
    "solve_brinkman_dense", "face_velocities",
    "ModelParams", "CflConfig", "CflMode", "CflViolation", "NonFiniteState",
    "pressure", "growth", "numerical_fluxes", "transport_step", "cfl_dt",
    "convex_coefficients",
    "InvariantReport", "check_density_bounds", "check_potential_bounds",
    "check_mass_balance", "check_entropy_l2", "check_energy_identity",
    "SimConfig", "SimState", "Diagnostics", "IncompatibleGrids", "Frame",
    "init_state", "step", "run", "restrict", "convergence_study",
    "read_frame", "write_frame", "load_config",
    "ExpressionError", "compile_expression",
    "__version__",
]
