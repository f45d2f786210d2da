"""Knotted non-Hermitian four-band lattice: spectra, braids, winding, many-body diagnostics."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DegenerateFillingError,
    DegenerateProjectionError,
    DegenerateSpectrumError,
    DimensionError,
    GaplessError,
    GridTooCoarseError,
    ImaginaryResidueError,
    NearEPError,
    NHKnotsError,
    ResolutionError,
    SolverError,
)
from .lattice import LatticeSpec, ModelParams, build_bloch, build_real_hamiltonian, symmetry_residuals  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "DegenerateFillingError",
    "DegenerateProjectionError",
    "DegenerateSpectrumError",
    "DimensionError",
    "GaplessError",
    "GridTooCoarseError",
    "ImaginaryResidueError",
    "NearEPError",
    "NHKnotsError",
    "ResolutionError",
    "SolverError",
    "LatticeSpec",
    "ModelParams",
    "build_bloch",
    "build_real_hamiltonian",
    "symmetry_residuals",
]
