"""Integrable multi-phase thermodynamics in hodograph form."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .hodograph import (  # noqa: F401
    NewtonResult,
    PdeCheckReport,
    PhaseSystem,
    RootSet,
    SolutionBranch,
    SolutionGrid,
    ThermoCoordinates,
    linear_path,
    newton,
    pde_check,
    solve_grid,
    solve_state,
    state_residual,
    sweep,
)
from .hydro import (  # noqa: F401
    GeneralSymmetry,
    SpeedFamily,
    build_general_symmetry,
    conservation_residual,
    is_linearly_degenerate,
    lax_speed,
    semi_hamiltonian_residual,
    symmetry_residual,
    tsallis_family,
    wnl_basis,
    wnl_flow,
    wnl_matrix,
    wnl_speed,
)
from .kernels import BACKEND  # noqa: F401
from .numcore import ScalarField, VectorField, quadrature  # noqa: F401
from .onephase import (  # noqa: F401
    AlphaF,
    IsothermTable,
    MagnetParams,
    MagnetSystem,
    OnePhaseEOS,
    Root,
    VdwParams,
    brillouin,
    critical_point,
    halfspin_residual,
    hopf_residual,
    magnet_residual,
    magnet_solve,
    read_isotherm_csv,
    reconstruct_alpha_f,
    solve_onephase,
    spinodals,
    vdw_eos,
    write_isotherm_csv,
)
from .tsallis import (  # noqa: F401
    TsallisEntropy,
    binary_compose,
    epd_residual,
    split_phase,
    tsallis_entropy,
    tsallis_speed,
)
