"""voxhom: spectral homogenization of periodic voxel microstructures.

The library solves the cell problem of periodic homogenization on regular
voxel grids.  The unknown is the polarization field of a Lippmann-Schwinger
reformulation against a constant reference medium; the system operator is
applied matrix-free through FFTs, so memory stays proportional to the field
itself.  Four discrete Green operators with different accuracy/smoothness
trade-offs are available, plus CG and fixed-point solvers, convergence and
timing studies, and a small file/CLI layer around them.

Typical flow::

    pack  = generate_hard_spheres(50, 0.098, seed=7)
    micro = voxelize(pack, 128, [PhaseTensor.conduction(1.0, d=3),
                                 PhaseTensor.conduction(10.0, d=3)])
    ref   = ReferenceMedium.conduction(0.5, d=3)
    coeff = build_coefficients(micro, ref, 64)
    green = make_green("filtered", ref, coeff.grid)
    op    = SystemOperator(coeff, green)
    astar = homogenized_tensor(op, SolveConfig(rel_tol=1e-6))
"""

from .elasticity import IsotropicStiffness, shear_loading, sym_basis
from .green import (
    ConsistentGreen,
    FilteredGreen,
    FiniteDifferenceGreen,
    ReferenceMedium,
    SeriesConvergenceError,
    TruncatedGreen,
    VARIANTS,
    make_green,
)
from .grid import (
    Grid,
    SpectralField,
    SpectralSymmetryError,
    VoxelField,
    centered_freq,
    dft_forward,
    dft_inverse,
    is_nyquist,
    make_grid,
    weighted_dot,
    weighted_norm,
)
from .io import (
    FormatError,
    RunConfig,
    read_config,
    read_sphere_pack,
    read_voxel_file,
    write_config,
    write_sphere_pack,
    write_voxel_file,
)
from .microstructure import (
    CoefficientField,
    ContrastError,
    Microstructure,
    PackingError,
    PhaseTensor,
    SpherePack,
    build_coefficients,
    checkerboard_microstructure,
    generate_hard_spheres,
    laminate_microstructure,
    uniform_microstructure,
    voigt_reuss,
    voxelize,
)
from .operator import SystemOperator, apply_green_field, apply_system, assemble_dense
from .solvers import (
    DivergenceError,
    HomogenizedTensor,
    SOLVERS,
    SolveConfig,
    SolveReport,
    homogenized_column,
    homogenized_tensor,
    reconstruct_strain,
    solve,
)
from .study import (
    bench,
    convergence_sweep,
    fit_rate,
    infsup_check,
    parallel_efficiency,
    sign_split,
)

__version__ = "0.1.0"

__all__ = [
    "CoefficientField",
    "ConsistentGreen",
    "ContrastError",
    "DivergenceError",
    "FilteredGreen",
    "FiniteDifferenceGreen",
    "FormatError",
    "Grid",
    "HomogenizedTensor",
    "IsotropicStiffness",
    "Microstructure",
    "PackingError",
    "PhaseTensor",
    "ReferenceMedium",
    "RunConfig",
    "SOLVERS",
    "SeriesConvergenceError",
    "SolveConfig",
    "SolveReport",
    "SpectralField",
    "SpectralSymmetryError",
    "SpherePack",
    "SystemOperator",
    "TruncatedGreen",
    "VARIANTS",
    "VoxelField",
    "apply_green_field",
    "apply_system",
    "assemble_dense",
    "bench",
    "build_coefficients",
    "centered_freq",
    "checkerboard_microstructure",
    "convergence_sweep",
    "dft_forward",
    "dft_inverse",
    "fit_rate",
    "generate_hard_spheres",
    "homogenized_column",
    "homogenized_tensor",
    "infsup_check",
    "is_nyquist",
    "laminate_microstructure",
    "make_green",
    "make_grid",
    "parallel_efficiency",
    "read_config",
    "read_sphere_pack",
    "read_voxel_file",
    "reconstruct_strain",
    "shear_loading",
    "sign_split",
    "solve",
    "sym_basis",
    "uniform_microstructure",
    "voigt_reuss",
    "voxelize",
    "weighted_dot",
    "weighted_norm",
    "write_config",
    "write_sphere_pack",
    "write_voxel_file",
    "__version__",
]
