"""Dynamic homogenization of periodic layered elastic composites.

Overall parameters come from piecewise-constant eigenstress/eigenvelocity
fields in a uniform reference medium; a transfer-matrix solver supplies the
exact dispersion and mode shapes used for verification.
"""
from .dispersion import (
    BranchPoint,
    DispersionBranch,
    Scan,
    effective_on_branch,
    find_branches,
    quasi_static_limit,
    residual,
    trace_branches,
)
from .errors import DynHomogError
from .fields import FieldProfile, local_residuals, reconstruct
from .homogenizer import (
    EffectiveParams,
    apply_constitutive,
    effective_params,
    homogenize,
    solve_eigenfields,
)
from .oracle import exact_dispersion, field_integration_homog, mode_shape, monodromy_trace
from .spectral import SpectralBasis, assemble
from .unit_cell import (
    Material,
    ReferenceMedium,
    UnitCell,
    build_cell,
    discretize,
    reference_from_average,
    reference_from_layer,
)

__version__ = "0.1.0"
