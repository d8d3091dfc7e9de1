"""Engineered-reservoir protection of two-ion entangled states in a lossy cavity."""

from .dfs import (
    DfsCoordinates,
    InversionResult,
    NoSolutionError,
    ReservoirParameters,
    analytic_state_at,
    coefficients_at,
    dfs_basis,
    invert_parameters,
    psi_r,
)
from .hilbert import (
    DensityOperator,
    HilbertSpace,
    LinearOperator,
    StateVector,
    partial_trace,
    schmidt_decompose,
    tensor_product,
)
from .lindblad import IntegrationError, MasterEquationSpec, Trajectory, integrate
from .model import SystemParams, build_h1, build_h2, frame_unitary_at, jump_operator
from .observables import (
    CyclicityError,
    concurrence,
    fidelity_trace,
    global_geometric_phase,
    subsystem_geometric_phase,
)

__version__ = "0.1.0"
