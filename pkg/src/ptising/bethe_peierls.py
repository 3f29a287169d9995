"""Bethe-Peierls cluster mean field for the staggered-gain Ising chain.

Two-spin clusters: a central spin 0 coupled exactly to a lumped neighbour
spin 1 that also feels the mean field M.  The antiferromagnetic form is
written after a pi rotation of the even spins about x, which turns the
staggered imaginary field into a uniform one and J into |J|.

Six-spin cluster: an open chain of six spins with |J| on the five internal
bonds, the imaginary field of the matching frame (uniform for J < 0,
staggered for J > 0), and a mean field -2|J| M sz on each edge spin.  The
self-consistency compares the mean sz of sites 3, 4 with that of sites 2, 5.

All cluster matrices use spin 0 (site 1) as the leading tensor factor.
Expectation values take the conjugate-transpose bra of the unit-norm right
ground vector, so residuals are real; the magnetization is therefore solved
for on the real axis.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .spectra import canonical_order

log = logging.getLogger(__name__)

M_THRESHOLD = 1e-3
BISECT_RES = 1e-3
TOL_BP = 1e-10
M_COLD = 0.5
#: Largest |M| searched for nontrivial roots; the residual has saturated well before this.
M_MAX = 100.0

_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_Z = np.diag([1.0, -1.0])


class ClusterKind(str, enum.Enum):
    TWO_SPIN_AF = "two_spin_af"
    TWO_SPIN_F = "two_spin_f"
    SIX_SPIN = "six_spin"


class Phase(str, enum.Enum):
    PARAMAGNETIC = "paramagnetic"
    ORDERED = "ordered"


@dataclass(frozen=True)
class BPCluster:
    kind: ClusterKind
    delta: float = 1.0
    coupling: float = 0.0
    gain: float = 0.0
    magnetization: complex = 0.0

    def matrix(self) -> np.ndarray:
        return cluster_matrix(self.magnetization, self.kind, self)


@dataclass(frozen=True)
class BPSolution:
    magnetization: complex
    residual: complex
    converged: bool
    phase: Phase
    roots: tuple[float, ...] = ()
    flags: tuple[str, ...] = field(default=())


@lru_cache(maxsize=64)
def _site_op(which: str, i: int, n: int) -> np.ndarray:
    o = _X if which == "x" else _Z
    m = np.ones((1, 1))
    for k in range(n):
        m = np.kron(m, o if k == i else np.eye(2))
    m.setflags(write=False)
    return m


@lru_cache(maxsize=8)
def _site_z_diag(n: int) -> np.ndarray:
    d = np.array([np.diag(_site_op("z", i, n)) for i in range(n)])
    d.setflags(write=False)
    return d


def build_effective_af(M, params) -> np.ndarray:
    """D(sx0 + 2 sx1) - 2|J| sz0 sz1 - 2|J| M sz1 + i g (sz0 + 2 sz1)."""
    d, j, g = params.delta, abs(params.coupling), params.gain
    x0, x1 = _site_op("x", 0, 2), _site_op("x", 1, 2)
    z0, z1 = _site_op("z", 0, 2), _site_op("z", 1, 2)
    return d * (x0 + 2 * x1) - 2 * j * (z0 @ z1) - 2 * j * M * z1 + 1j * g * (z0 + 2 * z1)


def build_effective_f(M, params, even_center: bool = False) -> np.ndarray:
    """D(sx0 + 2 sx1) - 2J sz0 sz1 - 2J M sz1 + i g (sz0 - 2 sz1).

    ``even_center`` gives the cluster around an even central spin, the
    complex conjugate of the odd one for real M.
    """
    d, j, g = params.delta, params.coupling, params.gain
    x0, x1 = _site_op("x", 0, 2), _site_op("x", 1, 2)
    z0, z1 = _site_op("z", 0, 2), _site_op("z", 1, 2)
    sign = -1.0 if even_center else 1.0
    return d * (x0 + 2 * x1) - 2 * j * (z0 @ z1) - 2 * j * M * z1 + sign * 1j * g * (z0 - 2 * z1)


@lru_cache(maxsize=2)
def _six_spin_terms(uniform: bool):
    n = 6
    sx = sum(_site_op("x", i, n) for i in range(n))
    field = sum((1.0 if (uniform or i % 2 == 0) else -1.0) * _site_op("z", i, n) for i in range(n))
    bonds = sum(_site_op("z", i, n) @ _site_op("z", i + 1, n) for i in range(n - 1))
    edges = _site_op("z", 0, n) + _site_op("z", n - 1, n)
    return sx, field, bonds, edges


def build_six_spin(M, params) -> np.ndarray:
    d, j, g = params.delta, abs(params.coupling), params.gain
    sx, field_, bonds, edges = _six_spin_terms(params.coupling < 0)
    return d * sx + 1j * g * field_ - j * bonds - 2 * j * M * edges


def cluster_matrix(M, kind, params) -> np.ndarray:
    kind = ClusterKind(kind)
    if kind is ClusterKind.TWO_SPIN_AF:
        return build_effective_af(M, params)
    if kind is ClusterKind.TWO_SPIN_F:
        return build_effective_f(M, params)
    return build_six_spin(M, params)


def cluster_ground(h: np.ndarray):
    """Ground eigenpair by smallest real part, negative imaginary part on ties.

    Returns (energy, unit right vector, flags).
    """
    w, v = np.linalg.eig(h)
    scale = max(1.0, float(np.max(np.abs(w))))
    order = canonical_order(w, 1e-10 * scale)
    g, e = order[0], order[1]
    flags = ()
    if abs(w[g] - w[e]) < 1e-7 * scale:
        flags = ("defective",) if abs(np.vdot(v[:, g], v[:, e])) > 1 - 1e-6 else ("degenerate",)
    vec = v[:, g] / np.linalg.norm(v[:, g])
    return w[g], vec, flags


def _magnetizations(M, kind, params):
    h = cluster_matrix(M, kind, params)
    _, vec, flags = cluster_ground(h)
    n = 2 if ClusterKind(kind) is not ClusterKind.SIX_SPIN else 6
    return _site_z_diag(n) @ (np.abs(vec) ** 2), flags


def bp_residual(M, kind, params, return_flags: bool = False):
    """Self-consistency defect of the cluster ground state at field M.

    Two-spin: <sz0> - <sz1>.  Six-spin: mean <sz> of sites 3, 4 minus mean of
    sites 2, 5.  With the Euclidean bra the defect is real for any M.
    """
    mz, flags = _magnetizations(M, kind, params)
    if ClusterKind(kind) is ClusterKind.SIX_SPIN:
        r = (mz[2] + mz[3]) / 2 - (mz[1] + mz[4]) / 2
    else:
        r = mz[0] - mz[1]
    r = complex(r)
    if flags:
        log.debug("bp_residual: %s cluster ground at M=%s", flags[0], M)
    return (r, flags) if return_flags else r


def _scan_grid(m_threshold: float, m_max: float) -> np.ndarray:
    near = m_threshold * np.array([0.5, 1.0, 2.0, 5.0, 10.0])
    body = np.linspace(0.02, min(2.0, m_max), 100)
    tail = np.geomspace(2.0, m_max, 30) if m_max > 2.0 else np.empty(0)
    return np.unique(np.concatenate([near[near < 0.02], body, tail]))


def bp_roots(kind, params, m_threshold: float = M_THRESHOLD, m_max: float = M_MAX, xtol: float = 1e-13) -> list[float]:
    """All positive roots of the residual on (m_threshold/2, m_max], bracketed by a scan."""
    grid = _scan_grid(m_threshold, m_max)

    def f(m):
        return bp_residual(m, kind, params).real

    r = np.array([f(m) for m in grid])
    if np.all(np.abs(r) < 1e-14):
        # the field does not reach the cluster (J = 0): only the trivial root
        return []
    roots = []
    for i in range(grid.size - 1):
        if r[i] == 0.0:
            roots.append(float(grid[i]))
        elif r[i] * r[i + 1] < 0:
            roots.append(float(brentq(f, grid[i], grid[i + 1], xtol=xtol)))
    return roots


def solve_bp(
    kind,
    params,
    M_init=M_COLD,
    m_threshold: float = M_THRESHOLD,
    tol_bp: float = TOL_BP,
    m_max: float = M_MAX,
) -> BPSolution:
    """Self-consistent magnetization.

    Nontrivial roots are bracketed on the positive real axis (the residual is
    odd under M -> -M for the global spin flip) and the one closest to
    |Re M_init| is returned, which keeps continuation on one branch.  M = 0
    is always listed in ``roots``.
    """
    kind = ClusterKind(kind)
    roots = bp_roots(kind, params, m_threshold, m_max)
    flags = []
    if roots:
        target = abs(complex(M_init).real)
        m = min(roots, key=lambda x: (abs(x - target), -x))
        if len(roots) > 1:
            flags.append("multiple-roots")
    else:
        m = 0.0
    res, rflags = bp_residual(m, kind, params, return_flags=True)
    flags.extend(rflags)
    converged = abs(res) < tol_bp
    if m == 0.0 and not converged:
        # M=0 sits on a jump of the residual when the cluster ground pair is PT-broken
        flags.append("trivial-root-discontinuous")
    phase = Phase.ORDERED if abs(m) > m_threshold else Phase.PARAMAGNETIC
    return BPSolution(complex(m), res, converged, phase, (0.0, *roots), tuple(flags))


@dataclass(frozen=True)
class BPBoundaryPoint:
    j_over_delta: float
    gamma_over_delta: float
    kind: ClusterKind
    ordered_side: str  # "above" if the ordered phase lies at larger J/Delta


def default_j_grid(kind) -> np.ndarray:
    kind = ClusterKind(kind)
    if kind is ClusterKind.TWO_SPIN_AF:
        return np.linspace(-1.5, -0.02, 75)
    if kind is ClusterKind.TWO_SPIN_F:
        return np.linspace(0.02, 1.5, 75)
    return np.concatenate([np.linspace(-1.5, -0.02, 75), np.linspace(0.02, 1.5, 75)])


def bp_phase_line(kind, gamma_over_delta: float, j_grid=None, delta: float = 1.0,
                  resolution: float = BISECT_RES, **solve_kw) -> tuple[list[BPBoundaryPoint], list]:
    """Boundary points along J/Delta at fixed gamma/Delta.

    Phases are evaluated with continuation along the sorted grid; every phase
    change between neighbours is bisected to ``resolution``.  Returns the
    points and the per-grid-point solutions.
    """
    kind = ClusterKind(kind)
    js = np.sort(np.asarray(default_j_grid(kind) if j_grid is None else j_grid, dtype=float))
    g = gamma_over_delta * delta

    def solve(jd, m0):
        return solve_bp(kind, BPCluster(kind, delta, jd * delta, g), M_init=m0, **solve_kw)

    sols, m0 = [], M_COLD
    for jd in js:
        s = solve(jd, m0)
        sols.append(s)
        if s.phase is Phase.ORDERED:
            m0 = s.magnetization
    points = []
    for i in range(js.size - 1):
        a, b = sols[i], sols[i + 1]
        if a.phase is b.phase or np.sign(js[i]) != np.sign(js[i + 1]):
            continue
        lo, hi = js[i], js[i + 1]
        plo = a.phase
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            pm = solve(mid, (a if a.phase is Phase.ORDERED else b).magnetization).phase
            if pm is plo:
                lo = mid
            else:
                hi = mid
        side = "above" if b.phase is Phase.ORDERED else "below"
        points.append(BPBoundaryPoint(float(0.5 * (lo + hi)), float(gamma_over_delta), kind, side))
    return points, sols


def bp_phase_boundary(kind, gamma_grid, j_grid=None, delta: float = 1.0, **kw) -> list[BPBoundaryPoint]:
    """Boundary points over a grid of gamma/Delta values (Fig.-6-style BP lines)."""
    out = []
    for gd in gamma_grid:
        pts, _ = bp_phase_line(kind, float(gd), j_grid, delta, **kw)
        out.extend(pts)
    return out
