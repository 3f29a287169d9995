"""Finite-size scaling of xi/N and critical points from curve crossings."""

from __future__ import annotations

import enum
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NoCrossing, PTIsingError
from .hamiltonian import ChainParams
from .observables import correlation_length, correlation_profile
from .spectra import diagonalize

log = logging.getLogger(__name__)

DEFAULT_SIZES = (8, 10, 12, 14)
#: Upper limit on N for scaling curves (iterative solver still feasible on one core).
MAX_SIZE = 16
#: Target grid step near a candidate crossing, in the swept normalized parameter.
REFINE_STEP = 0.02
#: Curves differing by less than this at both ends of an interval do not count as crossing there.
FLAT_TOL = 1e-9

SWEEP_J = "j_over_delta"
SWEEP_GAMMA = "gamma_over_delta"


class Axis(str, enum.Enum):
    SWEEP_GAMMA = "sweep_gamma"
    SWEEP_J = "sweep_J"

    @property
    def swept(self) -> str:
        return SWEEP_GAMMA if self is Axis.SWEEP_GAMMA else SWEEP_J

    @property
    def fixed(self) -> str:
        return SWEEP_J if self is Axis.SWEEP_GAMMA else SWEEP_GAMMA


@dataclass(frozen=True)
class ScalingCurve:
    fixed: tuple[str, float]
    swept: str
    n_sites: int
    points: np.ndarray
    missing: tuple[float, ...] = ()

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]


@dataclass(frozen=True)
class ScalingCrossing:
    critical_value: float
    uncertainty: float
    pair_estimates: tuple[tuple[int, int, float], ...]
    fixed: tuple[str, float]
    swept: str = SWEEP_J
    flags: tuple[str, ...] = field(default=())

    @property
    def point(self) -> tuple[float, float]:
        """(J/Delta, gamma/Delta) of the crossing."""
        if self.swept == SWEEP_J:
            return (self.critical_value, self.fixed[1])
        return (self.fixed[1], self.critical_value)


def chain_at(params_base: ChainParams, n_sites: int, j_over_delta: float, gamma_over_delta: float) -> ChainParams:
    d = params_base.delta
    return params_base.with_(n_sites=n_sites, coupling=j_over_delta * d, gain=gamma_over_delta * d)


def xi_over_n(params: ChainParams, include_endpoint: bool = False, method: str = "auto") -> float:
    """xi/N of the ground state, using |C| when J < 0."""
    spec = diagonalize(params, k=2, method=method)
    prof = correlation_profile(spec.ground_vector, params)
    return correlation_length(prof, include_endpoint) / params.n_sites


def _point(args):
    params, include_endpoint, method = args
    try:
        return xi_over_n(params, include_endpoint, method)
    except (PTIsingError, ArithmeticError) as exc:
        log.warning("scaling point failed at %s: %s", params, exc)
        return None


def _evaluate(tasks, workers: int):
    if workers <= 1 or len(tasks) < 2:
        return [_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_point, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _coords(fixed, swept, value):
    name, fval = fixed
    if swept == SWEEP_J and name == SWEEP_GAMMA:
        return value, fval
    if swept == SWEEP_GAMMA and name == SWEEP_J:
        return fval, value
    raise ValueError(f"fixed {name!r} and swept {swept!r} must be the two different axes")


def build_scaling_curves(
    fixed: tuple[str, float],
    swept_grid,
    sizes=DEFAULT_SIZES,
    params_base: ChainParams | None = None,
    swept: str | None = None,
    include_endpoint: bool = False,
    method: str = "auto",
    workers: int = 1,
) -> list[ScalingCurve]:
    """xi/N against the swept parameter for each size.

    ``fixed`` is ``("j_over_delta", value)`` or ``("gamma_over_delta", value)``;
    the other axis is swept.  Points whose solver fails are listed in
    ``missing`` instead of aborting the curve.
    """
    sizes = sorted(set(int(n) for n in sizes))
    for n in sizes:
        if n % 2 or n < 2 or n > MAX_SIZE:
            raise ValueError(f"sizes must be even and <= {MAX_SIZE}, got {n}")
    grid = np.unique(np.asarray(swept_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("empty swept grid")
    if params_base is None:
        params_base = ChainParams(n_sites=sizes[0])
    if swept is None:
        swept = SWEEP_GAMMA if fixed[0] == SWEEP_J else SWEEP_J

    tasks = []
    for n in sizes:
        for x in grid:
            j, g = _coords(fixed, swept, x)
            tasks.append((chain_at(params_base, n, j, g), include_endpoint, method))
    results = _evaluate(tasks, workers)

    curves = []
    for i, n in enumerate(sizes):
        vals = results[i * grid.size:(i + 1) * grid.size]
        ok = [v is not None for v in vals]
        pts = np.array([(x, v) for x, v in zip(grid, vals) if v is not None], dtype=float).reshape(-1, 2)
        missing = tuple(float(x) for x, good in zip(grid, ok) if not good)
        curves.append(ScalingCurve(tuple(fixed), swept, n, pts, missing))
    return curves


def _pair_crossings(a: ScalingCurve, b: ScalingCurve):
    """All sign changes of b - a as (x, rising) with linear interpolation.

    ``rising`` means the larger-N curve ends up above the smaller one.
    """
    lo = max(a.x[0], b.x[0]) if a.x.size and b.x.size else 0.0
    hi = min(a.x[-1], b.x[-1]) if a.x.size and b.x.size else -1.0
    if hi <= lo:
        return []
    xs = np.union1d(a.x, b.x)
    xs = xs[(xs >= lo) & (xs <= hi)]
    d = np.interp(xs, b.x, b.y) - np.interp(xs, a.x, a.y)
    if b.n_sites < a.n_sites:
        d = -d
    out = []
    for i in range(xs.size - 1):
        d0, d1 = d[i], d[i + 1]
        if max(abs(d0), abs(d1)) < FLAT_TOL:
            continue
        if d0 == 0.0:
            if i > 0 and d[i - 1] * d1 < 0 and abs(d[i - 1]) >= FLAT_TOL:
                out.append((float(xs[i]), d1 > 0))
            continue
        if d0 * d1 < 0:
            x = xs[i] - d0 * (xs[i + 1] - xs[i]) / (d1 - d0)
            out.append((float(x), d1 > d0))
    return out


def _crossing(estimates, fixed, swept, flags=()):
    vals = np.array([e[2] for e in estimates])
    return ScalingCrossing(
        critical_value=float(vals.mean()),
        uncertainty=float((vals.max() - vals.min()) / 2),
        pair_estimates=tuple(estimates),
        fixed=fixed,
        swept=swept,
        flags=tuple(flags),
    )


def _pairs(curves):
    curves = sorted(curves, key=lambda c: c.n_sites)
    return list(itertools.combinations(curves, 2))


def _ordered_side(curves) -> str:
    c = curves[0]
    if c.swept == SWEEP_J and c.x.size and c.x.max() <= 0:
        return "below"
    return "above"


def find_crossing(curves, ordered_side: str | None = None) -> ScalingCrossing:
    """Single critical point from all size pairs.

    With the ordered phase at large swept values (``ordered_side="above"``)
    each pair keeps its crossing at the largest swept value where the
    larger-N curve rises above the smaller-N one.  For ``"below"`` the rule is
    mirrored: smallest swept value where the larger-N curve drops below.  The
    default is ``"below"`` for a sweep confined to J < 0 (the ordered
    antiferromagnet lies at large |J|) and ``"above"`` otherwise.  A pair
    crossing only in the opposite direction contributes its outermost
    crossing and the result is flagged ``direction-fallback``; a pair that
    never crosses is omitted.
    """
    if len(curves) < 2:
        raise ValueError("need at least two curves")
    side = ordered_side or _ordered_side(curves)
    if side not in ("above", "below"):
        raise ValueError(f"ordered_side must be 'above' or 'below', got {side!r}")
    estimates, flags = [], []
    for a, b in _pairs(curves):
        xs = _pair_crossings(a, b)
        if not xs:
            continue
        want = side == "above"
        picked = [x for x, up in xs if up == want]
        if not picked:
            # only crossings of the other direction: keep the outermost one
            picked = [x for x, _ in xs]
            if "direction-fallback" not in flags:
                flags.append("direction-fallback")
        estimates.append((a.n_sites, b.n_sites, max(picked) if want else min(picked)))
    if not estimates:
        raise NoCrossing("no pair of scaling curves crosses")
    return _crossing(estimates, curves[0].fixed, curves[0].swept, flags)


def find_crossings(curves, cluster_gap: float = 0.1, min_support: int | None = None) -> list[ScalingCrossing]:
    """Every crossing of the curve family, in sweep order.

    Pair crossings (of either direction) are grouped when neighbouring
    estimates are closer than ``cluster_gap``.  A group needs estimates from
    at least ``min_support`` distinct pairs (default: 2 when there are two or
    more pairs) so an isolated pair crossing from numerical noise is dropped.
    """
    pairs = _pairs(curves)
    if not pairs:
        raise ValueError("need at least two curves")
    if min_support is None:
        min_support = min(2, len(pairs))
    allx = []
    for a, b in pairs:
        for x, up in _pair_crossings(a, b):
            allx.append((x, a.n_sites, b.n_sites, up))
    allx.sort()
    groups, cur = [], []
    for item in allx:
        if cur and item[0] - cur[-1][0] > cluster_gap:
            groups.append(cur)
            cur = []
        cur.append(item)
    if cur:
        groups.append(cur)

    out = []
    for g in groups:
        xs = np.array([e[0] for e in g])
        centre = float(np.median(xs))
        best = {}
        for x, na, nb, up in g:
            key = (na, nb)
            if key not in best or abs(x - centre) < abs(best[key][0] - centre):
                best[key] = (x, up)
        if len(best) < min_support:
            continue
        est = [(na, nb, x) for (na, nb), (x, _) in sorted(best.items())]
        ups = {up for _, up in best.values()}
        flags = ["rising" if ups == {True} else "falling" if ups == {False} else "mixed-direction"]
        if len(best) < len(pairs):
            flags.append("partial-support")
        out.append(_crossing(est, curves[0].fixed, curves[0].swept, flags))
    return out


def refine_grid(grid, curves, step: float = REFINE_STEP) -> np.ndarray:
    """Grid with extra points of spacing ``step`` around every pair crossing."""
    grid = np.unique(np.asarray(grid, dtype=float))
    extra = []
    for a, b in _pairs(curves):
        for x, _ in _pair_crossings(a, b):
            i = np.clip(np.searchsorted(grid, x), 1, grid.size - 1)
            lo, hi = grid[i - 1], grid[i]
            if hi - lo > step:
                extra.extend(np.arange(lo, hi, step)[1:])
    return np.unique(np.concatenate([grid, extra])) if extra else grid


def scaling_sweep(
    fixed,
    swept_grid,
    sizes=DEFAULT_SIZES,
    params_base: ChainParams | None = None,
    refine: bool = True,
    **kwargs,
) -> list[ScalingCurve]:
    """build_scaling_curves followed by one round of refinement near crossings."""
    curves = build_scaling_curves(fixed, swept_grid, sizes, params_base, **kwargs)
    if not refine:
        return curves
    fine = refine_grid(swept_grid, curves)
    new = np.setdiff1d(fine, np.unique(np.asarray(swept_grid, dtype=float)))
    if new.size == 0:
        return curves
    more = build_scaling_curves(fixed, new, sizes, params_base, **kwargs)
    merged = []
    for c, m in zip(curves, more):
        pts = np.concatenate([c.points, m.points])
        pts = pts[np.argsort(pts[:, 0], kind="stable")]
        merged.append(ScalingCurve(c.fixed, c.swept, c.n_sites, pts, tuple(sorted(c.missing + m.missing))))
    return merged


def critical_line(
    grid_of_fixed,
    axis: Axis | str,
    sizes=DEFAULT_SIZES,
    params_base: ChainParams | None = None,
    swept_grid=None,
    all_crossings: bool = False,
    **kwargs,
) -> tuple[list[ScalingCrossing], list[tuple[float, str]]]:
    """Crossings for each fixed value along ``axis``.

    Returns the crossings and a list of (fixed value, reason) misses.  With
    ``all_crossings`` every crossing of a sweep is kept (re-entrant case);
    otherwise the single ordered-side crossing of :func:`find_crossing`.
    """
    axis = Axis(axis)
    if swept_grid is None:
        swept_grid = np.linspace(-1.5, 1.5, 151) if axis is Axis.SWEEP_J else np.linspace(0.0, 2.0, 101)
    found, misses = [], []
    for value in grid_of_fixed:
        fixed = (axis.fixed, float(value))
        curves = scaling_sweep(fixed, swept_grid, sizes, params_base, swept=axis.swept, **kwargs)
        try:
            if all_crossings:
                cs = find_crossings(curves)
                if not cs:
                    raise NoCrossing("no crossing")
                found.extend(cs)
            else:
                found.append(find_crossing(curves))
        except NoCrossing as exc:
            misses.append((float(value), str(exc)))
    return found, misses
