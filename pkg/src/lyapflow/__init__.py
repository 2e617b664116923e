"""Lyapunov spectra from a covariant operator equation, with projected variational equations."""

from .errors import (
    CapabilityError,
    ConfigError,
    ContractViolation,
    DegenerateContextError,
    LyapflowError,
    NumericalFailure,
    PreconditionError,
    RangeError,
)
from .lyapunov import (
    FundamentalState,
    LyapunovState,
    SpectrumSeries,
    evolve_spectrum,
    exponents_from_F,
    fundamental_matrix,
    linear_spectrum_closed_form,
    lyapunov_rhs,
    qr_oracle,
    symplectic_defect,
)
from .operators import (
    MetricTensor,
    adjoint,
    apply_psi_ad,
    commutator,
    eig_sym,
    hermitian_split,
    operator_inner,
    psi,
)
from .systems import (
    StatePoint,
    SymplecticStructure,
    SystemDefinition,
    abc_flow,
    divergence,
    frw,
    gross_neveu,
    hamiltonian_field,
    jacobian_check,
    linear_system,
    make_system,
)

__version__ = "0.1.0"
