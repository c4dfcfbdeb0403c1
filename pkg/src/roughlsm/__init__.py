"""Near-field data synthesis and sampling-method reconstruction for a locally
perturbed planar interface between two acoustic half-spaces.

The forward path solves a volume integral equation against the flat two-layer
background kernel; the inverse path scans a sampling grid with a regularized
test-function fit and reports a normalized indicator field.
"""

from .errors import (
    CoincidentPointsError,
    ConfigError,
    FileFormatError,
    MeshBudgetError,
    NumericalError,
    QuadratureConvergenceError,
    RoughLSMError,
)
from .forward import (
    LSSystem,
    NearFieldMatrix,
    add_noise,
    assemble_ls,
    disk_phi_integral,
    gr_scattered,
    scattered_field,
    solve_total_field,
    synthesize,
)
from .geometry import (
    HalfDiskInterface,
    InterfaceProfile,
    MeasurementLine,
    PerturbationMesh,
    SamplingGrid,
    build_half_disk_mesh,
    build_mesh,
    cubic_bspline,
)
from .inversion import (
    IndicatorField,
    TikhonovConfig,
    TikhonovSolver,
    extract_interface,
    indicator_map,
    separation_metric,
    svd_filter_solve,
    test_rhs,
)
from .layered_green import (
    KernelTabulator,
    g0,
    g0_scattered,
    tabulate_kernel,
)
from .medium import Medium
from .oracle import FDFDConfig, fdfd_scattered
from .specfun import (
    hankel1_0,
    hankel1_0_many,
    hankel1_1,
    hankel1_1_many,
    phi,
    phi_from_distance,
)

__version__ = "0.1.0"

__all__ = [
    "CoincidentPointsError",
    "ConfigError",
    "FDFDConfig",
    "FileFormatError",
    "HalfDiskInterface",
    "IndicatorField",
    "InterfaceProfile",
    "KernelTabulator",
    "LSSystem",
    "MeasurementLine",
    "Medium",
    "MeshBudgetError",
    "NearFieldMatrix",
    "NumericalError",
    "PerturbationMesh",
    "QuadratureConvergenceError",
    "RoughLSMError",
    "SamplingGrid",
    "TikhonovConfig",
    "TikhonovSolver",
    "add_noise",
    "assemble_ls",
    "build_half_disk_mesh",
    "build_mesh",
    "cubic_bspline",
    "disk_phi_integral",
    "extract_interface",
    "fdfd_scattered",
    "g0",
    "g0_scattered",
    "gr_scattered",
    "hankel1_0",
    "hankel1_0_many",
    "hankel1_1",
    "hankel1_1_many",
    "indicator_map",
    "phi",
    "phi_from_distance",
    "scattered_field",
    "separation_metric",
    "solve_total_field",
    "svd_filter_solve",
    "synthesize",
    "tabulate_kernel",
    "test_rhs",
]
