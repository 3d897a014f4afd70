"""Least-squares surface reconstruction on arbitrary pixel domains.

Sparse derivative and smoothing operators are built from 2D Savitzky-Golay
kernels fitted on nearest-pixel neighborhoods, and used for normals-from-depth
and orthographic or perspective height-from-normals.
"""
import os as _os

# cap BLAS/OpenMP pools before numpy loads them; 0 or unset means library default
_threads = _os.environ.get("SGRECON_THREADS", "").strip()
if _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .domain import (  # noqa: E402
    Neighborhood,
    PixelDomain,
    build_domain,
    has_square_neighborhood,
    knn_pixels,
    knn_points3d,
    square_support,
)
from .lsq import LsqProblem, LsqSolution, default_pins, fix_gauge, solve  # noqa: E402
from .operators import KernelConfig, OperatorBundle, assemble_operators, matvec, vstack  # noqa: E402
from .reconstruct import (  # noqa: E402
    CameraIntrinsics,
    DepthField,
    NormalField,
    ReconstructionOptions,
    build_ortho_system,
    build_persp_system,
    height_from_normals,
    normals_from_depth,
)
from .sgfilter import SgKernel, classic_kernel, design_matrix, sg_kernel  # noqa: E402

__version__ = "0.1.0"
