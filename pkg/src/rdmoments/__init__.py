"""Moment relaxations of the periodic reaction-diffusion flow.

The package assembles the linear transport (continuity) equations satisfied
by occupation/terminal moments of the flow y_t = y_xx + eps*y*(1-y) in
truncated Fourier coordinates, relaxes them to a semidefinite program with
per-equation truncation slacks, solves it with a built-in first-order
splitting backend, and validates everything against a finite-difference
ensemble oracle.
"""

__version__ = "0.1.0"

from .moments import (
    MomentSequence,
    MultiIndex,
    Polynomial,
    enumerate_monomials,
    evaluate_template,
    localizing_matrix,
    moment_matrix,
    riesz,
)
from .spectral import (
    FourierVector,
    GridFunction,
    RealCoordinates,
    dft,
    drift,
    drift_polynomials,
    idft,
    quad_convolution,
)
from .liouville import (
    DiracAtFunction,
    Ensemble,
    GaussianProduct,
    LiouvilleConstraint,
    assemble_constraint,
    assemble_system,
    initial_moments,
    residual,
    test_indices,
)
from .relaxation import (
    ConicProblem,
    RelaxationOptions,
    SolveReport,
    build_relaxation,
    compare_moments,
    solve,
)
from .oracle import (
    EmpiricalMoments,
    GridTrajectory,
    contraction_check,
    dissipativity_check,
    fd_solve,
    invariance_check,
    nogap_check,
    pushforward_moments,
)
from .sdpa import export_sdpa, parse_sdpa

__all__ = [name for name in dir() if not name.startswith("_")]
