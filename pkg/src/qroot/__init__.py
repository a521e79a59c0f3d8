"""qroot: a matrix-level simulator of composable block encodings with a
resource ledger, covering sign-change root detection over sample grids,
simulated quantum Newton solves of structured nonlinear systems, circulant
spectral solvers, and coupled-oscillator applications."""

__version__ = "0.1.0"

from .block_encoding import (
    BlockEncoding,
    CostLedger,
    amplify,
    bounded_diag,
    column_to_diag,
    density_from_purification,
    dilate,
    from_state_diag,
    identity_encoding,
    lin_combo,
    product,
    projector,
    scale_down,
    tensor,
    unitary_encoding,
)
from .circulant_pde import (
    CirculantSpec,
    StencilSpec,
    circulant_eigenvalues,
    circulant_encode,
    fd_coefficients,
    laplacian_circulant,
    poisson_periodic_solve,
)
from .matrix_core import eig_hermitian, hadamard_power, qft
from .newton_solver import (
    NewtonConfig,
    SolveReport,
    encode_diag_f,
    encode_diag_gradient,
    encode_jacobian,
    encode_state_diag,
    newton_step,
    solve,
    solve_lm,
)
from .nonlinear_system import (
    FunctionFamily,
    JacobianBound,
    Kind,
    SystemState,
    classical_lm,
    classical_newton,
    linear_family,
)
from .physics_apps import (
    LyapunovConfig,
    MassChainSpec,
    TimeGrid,
    build_dynamics_system,
    build_equilibrium_system,
    equilibrium_energy,
    first_order_chain,
    lyapunov_estimate,
    potential_energy,
    simulate_dynamics,
)
from .poly_transform import (
    InversionSpec,
    Polynomial,
    fractional_power,
    inverse_polynomial,
    invert,
    make_polynomial,
    qsvt_apply,
)
from .root_dissect import (
    DissectionReport,
    MultivariatePolynomial,
    SampleGrid,
    Verdict,
    classical_scan,
    dissect,
    encode_grid_function,
)
from .spectral_probe import (
    SpectralEstimate,
    condition_number,
    max_eigenvalue,
    max_via_shift,
    min_via_shift,
)
