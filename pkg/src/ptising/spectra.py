"""Non-Hermitian spectra: dense and iterative diagonalization, ground-state
designation, PT classification and exceptional-point location.

Every chain Hamiltonian commutes with the antiunitary ``X K`` (global spin
flip times complex conjugation). In the basis ``(e_b + e_~b)/sqrt2``,
``1j (e_b - e_~b)/sqrt2`` it is therefore a real matrix, and both solvers
work in that basis: real arithmetic is cheaper, and eigenvalues come out
either exactly real or as exact conjugate pairs.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigs

from .errors import ConvergenceError, DenseLimitExceeded, InvalidParameters, NoExceptionPoint
from .hamiltonian import (
    DENSE_LIMIT,
    Boundary,
    ChainParams,
    OperatorMatrix,
    _flip_sum,
    build_hamiltonian,
    diagonal,
    translation_permutation,
)

log = logging.getLogger(__name__)

TOL_IM = 1e-8
TOL_RESID = 1e-9
#: chains up to this size are diagonalized densely by :func:`diagonalize`
AUTO_DENSE_MAX = 8

_SQRT_HALF = np.sqrt(0.5)


class PTClass(str, enum.Enum):
    PRESERVED = "preserved"
    BROKEN = "broken"


# -- real PT basis ---------------------------------------------------------


def _pairs(n_sites: int):
    dim = 1 << n_sites
    reps = np.arange(dim >> 1)
    return reps, reps ^ (dim - 1)


def to_real_basis(v: np.ndarray, n_sites: int) -> np.ndarray:
    """Coordinates of ``v`` (rows = basis codes) in the real PT basis."""
    reps, comp = _pairs(n_sites)
    a, b = v[reps], v[comp]
    return np.concatenate([(a + b) * _SQRT_HALF, -1j * (a - b) * _SQRT_HALF])


def from_real_basis(x: np.ndarray, n_sites: int) -> np.ndarray:
    reps, comp = _pairs(n_sites)
    half = reps.size
    u, w = x[:half], x[half:]
    out = np.empty((1 << n_sites,) + x.shape[1:], dtype=complex)
    out[reps] = (u + 1j * w) * _SQRT_HALF
    out[comp] = (u - 1j * w) * _SQRT_HALF
    return out


def real_form(h: OperatorMatrix) -> np.ndarray:
    """Dense real matrix similar (by a unitary) to ``h``."""
    n = h.params.n_sites
    m = h.matrix
    # to_real_basis applies W^H from the left; M W = conj(W^H conj(M)^T)^T
    hw = np.conj(to_real_basis(np.conj(m).T, n)).T
    out = to_real_basis(hw, n)
    return np.ascontiguousarray(out.real)


def real_operator(params: ChainParams) -> LinearOperator:
    d = diagonal(params)
    n, delta = params.n_sites, params.delta

    def matvec(x):
        x = np.asarray(x, dtype=float).reshape(-1)
        v = from_real_basis(x, n)
        hv = d * v + delta * _flip_sum(v, n)
        return to_real_basis(hv, n).real

    return LinearOperator((params.dim, params.dim), matvec=matvec, dtype=float)


# -- ordering and classification ------------------------------------------


def canonical_order(eigenvalues, tol: float) -> np.ndarray:
    """Indices ordering eigenvalues by real part, ascending.

    Values whose real parts agree within ``tol`` form one group, ordered by
    imaginary part ascending, so the Im < 0 member of a conjugate pair comes
    first.
    """
    e = np.asarray(eigenvalues, dtype=complex)
    by_re = np.argsort(e.real, kind="stable")
    out = []
    i = 0
    while i < by_re.size:
        j = i + 1
        while j < by_re.size and e.real[by_re[j]] - e.real[by_re[i]] < tol:
            j += 1
        group = by_re[i:j]
        out.extend(group[np.argsort(e.imag[group], kind="stable")])
        i = j
    return np.asarray(out, dtype=int)


def default_tol_im(scale: float) -> float:
    return TOL_IM * max(scale, 1.0)


def select_ground_state(spec, tol_im: float | None = None):
    """Designate ground and first excited states and the PT class.

    ``spec`` is a :class:`SpectrumResult` or a sequence of eigenvalues.
    Returns ``(ground_index, first_excited_index, pt_class)`` with indices into
    the given eigenvalue array.
    """
    e = np.asarray(spec.eigenvalues if isinstance(spec, SpectrumResult) else spec, dtype=complex)
    if e.size < 2:
        raise ValueError("at least two eigenvalues are needed to designate a ground state")
    if tol_im is None:
        tol_im = default_tol_im(float(np.max(np.abs(e))))
    order = canonical_order(e, tol_im)
    g, fe = int(order[0]), int(order[1])
    conj_pair = (
        abs(e[g].real - e[fe].real) < tol_im
        and e[g].imag < -tol_im
        and e[fe].imag > tol_im
    )
    if conj_pair or np.any(np.abs(e.imag) >= tol_im):
        return g, fe, PTClass.BROKEN
    return g, fe, PTClass.PRESERVED


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Eigenpairs in canonical order (see :func:`canonical_order`)."""

    eigenvalues: np.ndarray
    right_vectors: np.ndarray | None
    left_vectors: np.ndarray | None
    ground_index: int
    first_excited_index: int
    pt_class: PTClass
    residual_norms: np.ndarray
    params: ChainParams | None = None
    flags: frozenset = field(default_factory=frozenset)

    @property
    def ground_energy(self) -> complex:
        return complex(self.eigenvalues[self.ground_index])

    @property
    def ground_vector(self) -> np.ndarray:
        return self.right_vectors[:, self.ground_index]

    def lowest(self, k: int) -> np.ndarray:
        return self.eigenvalues[:k]


def energy_gap(spec: SpectrumResult) -> complex:
    """First-excited minus ground eigenvalue."""
    return complex(spec.eigenvalues[spec.first_excited_index] - spec.eigenvalues[spec.ground_index])


def _finish(evals, right, left, params, h_norm, apply, tol_im, tol_resid, flags=()):
    scale = params.energy_scale if params is not None else 1.0
    if tol_im is None:
        tol_im = default_tol_im(scale)
    order = canonical_order(evals, tol_im)
    evals = evals[order]
    flags = set(flags)
    resid = np.zeros(evals.size)
    if right is not None:
        right = right[:, order]
        right = right / np.linalg.norm(right, axis=0)
        hv = apply(right)
        resid = np.linalg.norm(hv - right * evals, axis=0)
        cond = None
        if left is not None:
            left = left[:, order]
            left = left / np.linalg.norm(left, axis=0)
            overlap = np.abs(np.einsum("ij,ij->j", left.conj(), right))
            cond = 1.0 / np.maximum(overlap, 1e-300)
        bound = tol_resid * h_norm * (cond if cond is not None else 1.0)
        if np.any(resid > bound):
            flags.add("residual-exceeded")
            log.warning("eigenpair residual above %.1e * ||H||: max %.3e", tol_resid, resid.max())
    g, fe, pt = select_ground_state(evals, tol_im)
    return SpectrumResult(
        eigenvalues=evals,
        right_vectors=right,
        left_vectors=left,
        ground_index=g,
        first_excited_index=fe,
        pt_class=pt,
        residual_norms=resid,
        params=params,
        flags=frozenset(flags),
    )


def full_spectrum(
    h: OperatorMatrix | ChainParams,
    left: bool = False,
    vectors: bool = True,
    tol_im: float | None = None,
    tol_resid: float = TOL_RESID,
    dense_limit: int = DENSE_LIMIT,
) -> SpectrumResult:
    """All 2^N eigenvalues (and right eigenvectors) by dense diagonalization."""
    if isinstance(h, ChainParams):
        h = build_hamiltonian(h, dense_limit=dense_limit)
    params = h.params
    if params.n_sites > dense_limit:
        raise DenseLimitExceeded(f"N={params.n_sites} exceeds the dense limit {dense_limit}")
    n = params.n_sites
    hr = real_form(h)
    try:
        if vectors:
            res = scipy.linalg.eig(hr, left=left, right=True, check_finite=False)
        else:
            res = (scipy.linalg.eigvals(hr, check_finite=False),)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"dense eigensolver failed: {exc}", {"n_sites": n, "dim": params.dim}) from exc
    evals = res[0]
    vl = vr = None
    if vectors:
        if left:
            evals, vl, vr = res
            vl = from_real_basis(vl, n)
        else:
            evals, vr = res
        vr = from_real_basis(vr, n)
    h_norm = float(np.abs(h.matrix).sum(axis=1).max())
    return _finish(
        evals, vr, vl, params, h_norm, lambda v: h.matrix @ v, tol_im, tol_resid
    )


def _v0(dim: int) -> np.ndarray:
    # fixed start vector: repeated runs must give bit-identical results
    return np.random.default_rng(20240917).standard_normal(dim)


def extremal_eigenpairs(
    params: ChainParams,
    k: int = 4,
    tol: float = 1e-12,
    tol_im: float | None = None,
    tol_resid: float = TOL_RESID,
    ncv: int | None = None,
    max_restarts: int = 4,
    maxiter: int | None = None,
) -> SpectrumResult:
    """The ``k`` eigenvalues of smallest real part, matrix-free (ARPACK).

    Two extra Ritz pairs are computed so that a conjugate pair straddling the
    k-th position can be detected; it is reported through the
    ``"ambiguous-ordering"`` flag rather than raised.
    """
    if k < 2:
        raise InvalidParameters("k must be >= 2")
    dim = params.dim
    k_int = k + 2
    if k_int >= dim - 1:
        spec = full_spectrum(params, tol_im=tol_im, tol_resid=tol_resid)
        return _truncate(spec, k, tol_im)
    op = real_operator(params)
    if ncv is None:
        ncv = max(2 * k_int + 1, 24)
    ncv = min(ncv, dim - 1)
    evals = x = None
    diagnostics = {}
    for attempt in range(max_restarts + 1):
        try:
            evals, x = eigs(op, k=k_int, which="SR", tol=tol, ncv=ncv, v0=_v0(dim), maxiter=maxiter or 50 * dim)
            break
        except ArpackNoConvergence as exc:
            diagnostics = {"attempt": attempt, "ncv": ncv, "converged": len(exc.eigenvalues)}
        except ArpackError as exc:
            diagnostics = {"attempt": attempt, "ncv": ncv, "error": str(exc)}
        if ncv >= dim - 1:
            break
        ncv = min(2 * ncv, dim - 1)
        log.debug("ARPACK restart with ncv=%d for %s", ncv, params)
    if evals is None:
        raise ConvergenceError("ARPACK did not converge for smallest-real-part eigenpairs", diagnostics)
    vr = from_real_basis(x, params.n_sites)
    d = diagonal(params)

    def apply(v):
        return d[:, None] * v + params.delta * np.stack(
            [_flip_sum(v[:, j], params.n_sites) for j in range(v.shape[1])], axis=1
        )

    h_norm = params.n_sites * (params.delta + abs(params.coupling) + params.gain)
    spec = _finish(evals, vr, None, params, h_norm, apply, tol_im, tol_resid)
    return _truncate(spec, k, tol_im)


def _truncate(spec: SpectrumResult, k: int, tol_im) -> SpectrumResult:
    e = spec.eigenvalues
    flags = set(spec.flags)
    scale = spec.params.energy_scale if spec.params is not None else 1.0
    tol = tol_im if tol_im is not None else default_tol_im(scale)
    if e.size > k and abs(e[k - 1].real - e[k].real) < tol:
        flags.add("ambiguous-ordering")
    kept = e[:k]
    g, fe, pt = select_ground_state(kept, tol)
    return SpectrumResult(
        eigenvalues=kept,
        right_vectors=None if spec.right_vectors is None else spec.right_vectors[:, :k],
        left_vectors=None if spec.left_vectors is None else spec.left_vectors[:, :k],
        ground_index=g,
        first_excited_index=fe,
        pt_class=pt,
        residual_norms=spec.residual_norms[:k],
        params=spec.params,
        flags=frozenset(flags),
    )


def diagonalize(params: ChainParams, k: int = 4, method: str = "auto", tol_im: float | None = None) -> SpectrumResult:
    """Low-lying spectrum through the cheapest adequate solver.

    ``method`` is ``"dense"``, ``"iterative"`` or ``"auto"`` (dense up to
    ``AUTO_DENSE_MAX`` sites).
    """
    if method == "auto":
        method = "dense" if params.n_sites <= AUTO_DENSE_MAX else "iterative"
    if method == "dense":
        return _truncate(full_spectrum(params, tol_im=tol_im), min(k, params.dim), tol_im)
    if method == "iterative":
        return extremal_eigenpairs(params, k=k, tol_im=tol_im)
    raise ValueError(f"unknown method {method!r}")


def ground_pair_indicator(spec: SpectrumResult) -> float:
    """|Im| of the ground eigenvalue, the PT-breaking order signal."""
    return abs(spec.ground_energy.imag)


def ground_pt_class(spec: SpectrumResult, tol_im: float | None = None) -> PTClass:
    """PT class of the ground state alone (complex ground energy = broken)."""
    if tol_im is None:
        scale = spec.params.energy_scale if spec.params is not None else 1.0
        tol_im = default_tol_im(scale)
    return PTClass.BROKEN if ground_pair_indicator(spec) >= tol_im else PTClass.PRESERVED


# -- exceptional points ----------------------------------------------------

_ALIASES = {"gamma": "gain", "gain": "gain", "j": "coupling", "coupling": "coupling", "delta": "delta"}


@dataclass(frozen=True)
class ExceptionPoint:
    fixed_param: tuple
    swept: str
    critical_value: float
    order_estimate: int
    bracket: tuple[float, float]
    flags: frozenset = frozenset()


def _swept_name(swept: str) -> str:
    try:
        return _ALIASES[swept.lower()]
    except KeyError:
        raise InvalidParameters(f"cannot sweep {swept!r}; choose gain, coupling or delta") from None


def coalescence_count(eigenvalues, center: complex, tol: float) -> int:
    """Number of eigenvalues within ``tol`` of ``center``."""
    return int(np.sum(np.abs(np.asarray(eigenvalues) - center) < tol))


def find_exception_point(
    params_base: ChainParams,
    swept: str,
    bracket: tuple[float, float],
    tol: float = 1e-6,
    detect: float = 1e-6,
    resolution: float = 1e-3,
    polish_step: float = 2e-3,
    order3_tol: float = 1e-2,
    k: int = 6,
    method: str = "auto",
) -> ExceptionPoint:
    """Locate where the ground pair turns complex along one parameter.

    The broken/preserved indicator ``|Im eps_0| > detect * scale`` is bisected
    down to ``resolution``. Closer to an EP the eigenvalues are too
    ill-conditioned for the indicator to be trusted, so the location is then
    polished from the squared gap ``(eps_1 - eps_0)**2``, which is analytic
    through an order-2 EP and changes sign there: a cubic is fitted to samples
    at ``polish_step`` spacing on both sides and its root taken.

    ``order_estimate`` is 3 when at least three eigenvalues lie within
    ``order3_tol * scale`` of the ground eigenvalue at the critical point.
    """
    name = _swept_name(swept)
    lo, hi = map(float, bracket)
    if lo > hi:
        lo, hi = hi, lo
    fixed = tuple((f, getattr(params_base, f)) for f in ("coupling", "gain", "delta") if f != name)

    def spectrum(x):
        return diagonalize(params_base.with_(**{name: x}), k=k, method=method)

    def broken(x):
        s = spectrum(x)
        return ground_pair_indicator(s) > detect * s.params.energy_scale

    b_lo, b_hi = broken(lo), broken(hi)
    if b_lo == b_hi:
        raise NoExceptionPoint(f"no EP in bracket ({lo}, {hi}) for {name}: indicator is {b_lo} at both ends")
    a, b = lo, hi
    stop = max(tol, resolution * max(1.0, params_base.energy_scale))
    while b - a > stop:
        m = 0.5 * (a + b)
        if broken(m) == b_lo:
            a = m
        else:
            b = m
    mid = 0.5 * (a + b)
    flags = set()
    critical = mid
    if b - a > tol:
        xs = mid + polish_step * np.array([-4, -3, -2, -1.5, 1.5, 2, 3, 4]) * max(1.0, params_base.energy_scale)
        xs = xs[(xs >= min(lo, hi)) & (xs <= max(lo, hi))]
        ds = []
        for x in xs:
            s = spectrum(x)
            ds.append((energy_gap(s) ** 2).real)
        x, d = xs - mid, np.asarray(ds)
        # the two-sided fit first; one-sided extrapolations (preserved side
        # first) cover spectra that are degenerate or ambiguous past the EP
        left, right = x < 0, x > 0
        preserved, broken_side = (right, left) if b_lo else (left, right)
        candidates = [
            _polish_root(x, d),
            _polish_root(x[preserved], d[preserved], deg=2, crossing=False),
            _polish_root(x[broken_side], d[broken_side], deg=2, crossing=False),
        ]
        for which, root in enumerate(candidates):
            if root is not None and abs(root) <= 0.5 * (b - a) * (1 + 1e-9):
                critical = mid + root
                if which:
                    flags.add("polish-one-sided")
                break
        else:
            flags.add("polish-rejected")
    s = spectrum(critical)
    scale = s.params.energy_scale
    n_close = coalescence_count(s.eigenvalues, s.ground_energy, order3_tol * scale)
    order = 3 if n_close >= 3 else 2
    flags.add("defective-adjacent")
    return ExceptionPoint(
        fixed_param=fixed,
        swept=name,
        critical_value=float(critical),
        order_estimate=order,
        bracket=(float(a), float(b)),
        flags=frozenset(flags),
    )


def _polish_root(x: np.ndarray, d: np.ndarray, deg: int = 3, crossing: bool = True) -> float | None:
    if x.size < deg + 1 or (crossing and (np.all(d > 0) or np.all(d < 0))):
        return None
    coef = np.polyfit(x, d, deg)
    roots = np.roots(coef)
    roots = roots[np.abs(roots.imag) < 1e-12 * max(1.0, np.max(np.abs(x)))].real
    if roots.size == 0:
        return None
    return float(roots[np.argmin(np.abs(roots))])


def scan_exception_points(
    params_base: ChainParams,
    swept: str,
    grid,
    order3_tol: float = 1e-2,
    tol_im: float = 1e-7,
    params_at=None,
):
    """Dense scan of the full spectrum along ``grid``.

    Returns a list of dicts, one per interval where the number of complex
    eigenvalues changes (an EP2 somewhere inside), each carrying the minimum
    triple-coalescence spread found in the neighbourhood and an ``order3``
    flag when that spread falls below ``order3_tol * scale``.  ``energy`` is
    the real part of the pair closest to the real axis on the broken side.
    ``params_at`` (x -> ChainParams) replaces the single-parameter update,
    e.g. for normalized coordinates where J and Delta change together.
    """
    if params_at is None:
        name = _swept_name(swept)

        def params_at(x):
            return params_base.with_(**{name: float(x)})

    grid = np.asarray(sorted(grid), dtype=float)
    counts, spreads, spectra, scales = [], [], [], []
    for x in grid:
        p = params_at(float(x))
        e = full_spectrum(p, vectors=False).eigenvalues
        counts.append(int(np.sum(np.abs(e.imag) > tol_im * p.energy_scale)))
        spreads.append(triple_spread(e) / p.energy_scale)
        spectra.append(e)
        scales.append(p.energy_scale)
    counts = np.asarray(counts)
    spreads = np.asarray(spreads)
    events = []
    for i in np.nonzero(np.diff(counts))[0]:
        near = spreads[max(i - 1, 0) : i + 3]
        side = i + 1 if counts[i + 1] > counts[i] else i
        e = spectra[side]
        cplx = e[np.abs(e.imag) > tol_im * scales[side]]
        energy = float(cplx[np.argmin(np.abs(cplx.imag))].real) if cplx.size else float("nan")
        events.append(
            {
                "interval": (float(grid[i]), float(grid[i + 1])),
                "complex_before": int(counts[i]),
                "complex_after": int(counts[i + 1]),
                "energy": energy,
                "scale": float(scales[side]),
                "triple_spread": float(near.min()),
                "order3": bool(near.min() < order3_tol),
            }
        )
    return events


@lru_cache(maxsize=8)
def momentum_sectors(n_sites: int):
    """Isometries onto the momentum sectors of translation by two sites.

    The staggered field has period two, so on a periodic chain H commutes
    with T^2.  Returns one ``(dim, n_k)`` matrix per momentum
    ``k = 2 pi m / (N/2)``; its columns are orthonormal orbit states.
    """
    if n_sites % 2:
        raise InvalidParameters("momentum sectors need an even periodic chain")
    p = translation_permutation(n_sites)
    p2 = p[p]
    period = n_sites // 2
    dim = 1 << n_sites
    seen = np.zeros(dim, dtype=bool)
    orbits = []
    for b in range(dim):
        if seen[b]:
            continue
        orb = [b]
        c = int(p2[b])
        while c != b:
            orb.append(c)
            c = int(p2[c])
        seen[orb] = True
        orbits.append(np.asarray(orb))
    out = []
    for m in range(period):
        cols = []
        for orb in orbits:
            r = orb.size
            if (m * r) % period:
                continue
            phase = np.exp(-2j * np.pi * m * np.arange(r) / period)
            col = np.zeros(dim, dtype=complex)
            col[orb] = phase / np.sqrt(r)
            cols.append(col)
        u = np.array(cols).T
        u.setflags(write=False)
        out.append(u)
    return tuple(out)


def sector_eigenvalues(params: ChainParams) -> np.ndarray:
    """All eigenvalues of a periodic chain, one T^2 momentum block at a time.

    Much cheaper than one dense 2^N problem; returned in canonical order.
    """
    if params.boundary is not Boundary.PERIODIC:
        raise InvalidParameters("sector decomposition needs a periodic chain")
    diag = diagonal(params)
    evals = []
    for u in momentum_sectors(params.n_sites):
        hu = diag[:, None] * u + params.delta * _flip_sum(u, params.n_sites)
        evals.append(np.linalg.eigvals(u.conj().T @ hu))
    e = np.concatenate(evals)
    return e[canonical_order(e, default_tol_im(params.energy_scale))]


def triple_spread(eigenvalues) -> float:
    """Smallest radius around any eigenvalue containing two others."""
    e = np.asarray(eigenvalues, dtype=complex)
    if e.size < 3:
        return np.inf
    d = np.abs(e[:, None] - e[None, :])
    d.sort(axis=1)
    return float(d[:, 2].min())
