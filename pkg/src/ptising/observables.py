"""Ground-state correlations, structure factor, correlation length and order parameter.

The correlation profile uses the conjugate-transpose bra of the right ground
vector by default, so C(j) is real for any ground state.  The biorthogonal
variant (left vector as bra) is available for comparison and is complex in
general.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameters, NonPositiveStructureFactor
from .hamiltonian import Boundary, ChainParams, spin_values

log = logging.getLogger(__name__)

#: Relative deviation from unit norm that triggers renormalization.
NORM_TOL = 1e-10


@dataclass(frozen=True)
class CorrelationProfile:
    """C(j) for j = 0..N measured from ``reference_site`` (1-based).

    ``af_mode`` marks profiles whose Fourier transform uses |C(j)|.
    """

    n_sites: int
    values: np.ndarray
    af_mode: bool = False
    reference_site: int = 1
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.n_sites + 1,):
            raise ValueError(f"expected {self.n_sites + 1} values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def transformed(self) -> np.ndarray:
        """Values entering the Fourier sum: C(j), or |C(j)| in af_mode."""
        return np.abs(self.values).astype(complex) if self.af_mode else self.values

    def asymmetry(self) -> float:
        """max_j |C(j) - C(N-j)|; zero for a reflection-symmetric profile."""
        return float(np.max(np.abs(self.values - self.values[::-1])))


@dataclass(frozen=True)
class NormalizedParams:
    j_tilde: float
    gamma_tilde: float
    energy_scale: float

    def scale_energy(self, eps):
        """Map energies to the normalized scale eps / sqrt(J^2 + Delta^2)."""
        return np.asarray(eps) / self.energy_scale


def normalize_params(params: ChainParams) -> NormalizedParams:
    scale = params.energy_scale
    return NormalizedParams(params.coupling / scale, params.gain / scale, scale)


def correlation_profile(
    ground: np.ndarray,
    params: ChainParams,
    reference_site: int = 1,
    af_mode: bool | None = None,
    left: np.ndarray | None = None,
) -> CorrelationProfile:
    """Spin-spin correlation <sz_ref sz_{ref+j}> in the ground state.

    Sites wrap modulo N for both boundaries; for an open chain the wrapped
    separations are not physical distances.  ``af_mode`` defaults to J < 0.
    Passing ``left`` switches to the biorthogonal expectation
    <L|A|R> / <L|R>.
    """
    n = params.n_sites
    if not 1 <= reference_site <= n:
        raise InvalidParameters(f"reference_site must lie in 1..{n}, got {reference_site}")
    v = np.asarray(ground, dtype=complex)
    if v.shape != (params.dim,):
        raise ValueError(f"ground vector has shape {v.shape}, expected ({params.dim},)")
    if af_mode is None:
        af_mode = params.coupling < 0

    if left is None:
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > NORM_TOL:
            warnings.warn(f"ground vector norm {norm:.3e} != 1; renormalizing", RuntimeWarning, stacklevel=2)
            v = v / norm
        weights = np.abs(v) ** 2
    else:
        w = np.asarray(left, dtype=complex)
        overlap = np.vdot(w, v)
        if abs(overlap) < 1e-14:
            raise ValueError("left and right ground vectors are orthogonal (defective point)")
        weights = np.conj(w) * v / overlap

    s = spin_values(n)
    r = reference_site - 1
    ref = weights * s[r]
    values = np.array([ref @ s[(r + j) % n] for j in range(n + 1)], dtype=complex)
    return CorrelationProfile(n, values, bool(af_mode), reference_site, params.boundary)


def structure_factor_complex(profile: CorrelationProfile, q: float, include_endpoint: bool = True) -> complex:
    """Complex sum of cos(q j) C(j) over j = 0..N (or 0..N-1)."""
    c = profile.transformed()
    if not include_endpoint:
        c = c[:-1]
    j = np.arange(c.size)
    return complex(np.cos(q * j) @ c)


def structure_factor(profile: CorrelationProfile, q: float, include_endpoint: bool = True) -> float:
    """S(q) = Re sum_j cos(q j) C(j), j = 0..N by default.

    With ``include_endpoint=False`` the j = N term is dropped, so each
    separation on a periodic ring is counted once.
    """
    s = structure_factor_complex(profile, q, include_endpoint)
    if s.imag:
        log.debug("structure factor imaginary remainder %.3e at q=%g", s.imag, q)
    return s.real


def correlation_length(profile: CorrelationProfile, include_endpoint: bool = True) -> float:
    """Second-moment length (N / 2 pi) sqrt(S(0)/S(q1) - 1), clamped at 0."""
    n = profile.n_sites
    q1 = 2 * np.pi / n
    s0 = structure_factor(profile, 0.0, include_endpoint)
    s1 = structure_factor(profile, q1, include_endpoint)
    if s1 <= 0:
        raise NonPositiveStructureFactor(f"structure factor non-positive at q1 (S(q1)={s1:.3e})")
    ratio = s0 / s1 - 1.0
    if ratio <= 0:
        if ratio < -1e-12:
            log.debug("S(0) < S(q1); correlation length clamped to 0")
        return 0.0
    return float(np.sqrt(ratio) / q1)


def order_parameter(profile: CorrelationProfile) -> float:
    """sqrt(|C(N/2)|): midpoint correlation, in [0, 1]."""
    if profile.n_sites % 2:
        raise InvalidParameters(f"order parameter needs even N, got {profile.n_sites}")
    return float(np.sqrt(abs(profile.values[profile.n_sites // 2])))
