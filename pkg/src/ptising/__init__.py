"""Exact diagonalization toolkit for the PT-symmetric transverse-field Ising chain.

The chain carries a staggered imaginary longitudinal field (balanced gain and
loss).  Modules:

- :mod:`.hamiltonian`: bit-basis Hamiltonian, dense and matrix-free.
- :mod:`.spectra`: eigensolvers, ground-state selection, exceptional points.
- :mod:`.observables`: correlations, structure factor, correlation length.
- :mod:`.fss`: xi/N scaling curves and their crossings.
- :mod:`.bethe_peierls`: two- and six-spin cluster mean field.
- :mod:`.sweep`: parameter grids with checkpoint/resume, phase diagram.
- :mod:`.config`, :mod:`.output`, :mod:`.cli`: configuration, datasets, CLI.
"""

from .errors import (
    ConfigError,
    ConvergenceError,
    DenseLimitExceeded,
    InvalidParameters,
    NoCrossing,
    NoExceptionPoint,
    NonPositiveStructureFactor,
    PTIsingError,
    StorageError,
)
from .hamiltonian import Boundary, ChainParams, apply_hamiltonian, build_hamiltonian, hamiltonian_operator
from .observables import correlation_length, correlation_profile, normalize_params, order_parameter, structure_factor
from .spectra import (
    PTClass,
    SpectrumResult,
    diagonalize,
    energy_gap,
    extremal_eigenpairs,
    find_exception_point,
    full_spectrum,
    select_ground_state,
)

__version__ = "0.1.0"

__all__ = [
    "Boundary",
    "ChainParams",
    "ConfigError",
    "ConvergenceError",
    "DenseLimitExceeded",
    "InvalidParameters",
    "NoCrossing",
    "NoExceptionPoint",
    "NonPositiveStructureFactor",
    "PTClass",
    "PTIsingError",
    "SpectrumResult",
    "StorageError",
    "apply_hamiltonian",
    "build_hamiltonian",
    "correlation_length",
    "correlation_profile",
    "diagonalize",
    "energy_gap",
    "extremal_eigenpairs",
    "find_exception_point",
    "full_spectrum",
    "hamiltonian_operator",
    "normalize_params",
    "order_parameter",
    "select_ground_state",
    "structure_factor",
]
