"""Variable-coefficient Helmholtz solver with a moving-layer sweeping
preconditioner: PML-damped finite differences in 2D/3D, an approximate
layer-elimination factorization built from thin absorbing panels, and a
preconditioned GMRES driver with near-linear solve cost."""

from .assembly import (
    BlockTridiagonalSystem,
    PanelSystem,
    assemble_global,
    assemble_middle_panel,
    assemble_panel,
    layer_major_permutation,
    write_coo_text,
)
from .banded import BandedFactor, banded_factorize, banded_solve
from .bench import BenchmarkCase, make_forcing, make_velocity, run_case, run_table
from .errors import FactorizationError, MemoryGuardError
from .gmres import SolveReport, gmres_solve, unpreconditioned_residual
from .multifrontal import (
    DissectionOrdering,
    MultifrontalFactor,
    mf_factorize,
    mf_solve,
    nested_dissection_order,
    read_coo_text,
)
from .oracle import ExactSweepFactorization, exact_factorize, exact_solve
from .pml import PmlConfig, default_damping_amplitude, sigma_profile, stretch_factor
from .problem import (
    FieldVector,
    Grid,
    HelmholtzProblem,
    read_field_file,
    read_velocity_file,
    write_field_file,
    write_velocity_file,
)
from .sweeping import (
    SweepConfig,
    SweepPreconditioner,
    build_preconditioner,
    schur_approx_error,
)

__version__ = "0.1.0"
