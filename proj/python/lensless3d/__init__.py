"""Lensless 3D imaging toolkit.

Caustic-based point spread functions, the cropped-convolution forward model,
ADMM reconstruction with a 3D total-variation or native sparsity prior, and
system-analysis helpers. The heavy lifting lives in the compiled extension.
"""

from lensless3d._core import (
    DiffuserSurface,
    FovReport,
    IoError,
    NumericalError,
    Operator,
    PsfSimilarity,
    SystemGeometry,
    ValidationError,
    VolumeGrid,
    build_grid,
    calibrate,
    compute_fov,
    generate_diffuser,
    magnification,
    psf_similarity,
    reciprocal_depth_planes,
    render_psf,
    simulate_points,
    solve,
)

__all__ = [
    "DiffuserSurface",
    "FovReport",
    "IoError",
    "NumericalError",
    "Operator",
    "PsfSimilarity",
    "SystemGeometry",
    "ValidationError",
    "VolumeGrid",
    "build_grid",
    "calibrate",
    "compute_fov",
    "generate_diffuser",
    "magnification",
    "psf_similarity",
    "reciprocal_depth_planes",
    "render_psf",
    "simulate_points",
    "solve",
]

__version__ = "0.1.0"
