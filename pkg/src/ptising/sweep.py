"""Grid sweeps over (J/Delta, gamma/Delta) with checkpoint/resume and phase-diagram assembly."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, PTIsingError, StorageError
from .hamiltonian import Boundary, ChainParams
from .observables import correlation_length, correlation_profile, order_parameter
from .spectra import diagonalize, energy_gap, ground_pt_class

log = logging.getLogger(__name__)

OBSERVABLES = ("gap", "order_parameter", "xi", "pt_class", "spectrum")
WORKERS_ENV = "PTISING_WORKERS"
#: Broken region of the gap map: |Im gap| above this multiple of the energy scale.
GAP_THRESHOLD = 1e-6
#: xi/N must grow by more than this between sizes to count as ordered
XI_TOL = 1e-6
SPECTRUM_K = 4
RECORDS_FILE = "records.jsonl"
SPEC_FILE = "spec.json"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {n}")
    return n


@dataclass(frozen=True)
class SweepSpec:
    j_range: tuple[float, float, int] = (-1.5, 1.5, 121)
    gamma_range: tuple[float, float, int] = (0.0, 2.0, 81)
    sizes: tuple[int, ...] = (10,)
    observables: tuple[str, ...] = ("gap", "order_parameter", "xi", "pt_class")
    boundary: Boundary = Boundary.PERIODIC
    delta: float = 1.0
    method: str = "auto"
    xi_include_endpoint: bool = False

    def __post_init__(self):
        for name in ("j_range", "gamma_range"):
            lo, hi, steps = getattr(self, name)
            if int(steps) != steps or steps < 1:
                raise ConfigError(f"{name} steps must be a positive integer", key=name)
            if steps > 1 and not hi > lo:
                raise ConfigError(f"{name} needs max > min", key=name)
            object.__setattr__(self, name, (float(lo), float(hi), int(steps)))
        if self.gamma_range[0] < 0:
            raise ConfigError("gamma/Delta must be >= 0", key="gamma_range")
        object.__setattr__(self, "sizes", tuple(sorted({int(n) for n in self.sizes})))
        if not self.sizes:
            raise ConfigError("sizes must be nonempty", key="sizes")
        obs = tuple(o for o in OBSERVABLES if o in set(self.observables))
        unknown = set(self.observables) - set(OBSERVABLES)
        if unknown:
            raise ConfigError(f"unknown observables {sorted(unknown)}", key="observables")
        object.__setattr__(self, "observables", obs)
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if not self.delta > 0:
            raise ConfigError("delta must be > 0", key="delta")
        if self.method not in ("auto", "dense", "iterative"):
            raise ConfigError(f"unknown method {self.method!r}", key="method")
        # fail early on invalid chains (odd periodic N and the like)
        for n in self.sizes:
            try:
                ChainParams(n, self.delta, boundary=self.boundary)
            except PTIsingError as exc:
                raise ConfigError(str(exc), key="sizes") from None

    @property
    def j_values(self) -> np.ndarray:
        return np.linspace(*self.j_range)

    @property
    def gamma_values(self) -> np.ndarray:
        return np.linspace(*self.gamma_range)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["boundary"] = self.boundary.value
        for k in ("j_range", "gamma_range", "sizes", "observables"):
            d[k] = list(d[k])
        return d

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def points(self):
        """Grid tasks in canonical (J, gamma, N) order: (index, j, g, n)."""
        out = []
        for j in self.j_values:
            for g in self.gamma_values:
                for n in self.sizes:
                    out.append((len(out), float(j), float(g), n))
        return out


@dataclass
class GridResult:
    spec: SweepSpec
    records: list[dict]
    completed: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.completed is None:
            done = np.zeros(len(self.spec.points()), dtype=bool)
            for r in self.records:
                done[r["index"]] = True
            self.completed = done

    @property
    def complete(self) -> bool:
        return bool(self.completed.all())

    def table(self, n_sites: int | None = None) -> list[dict]:
        rows = [r for r in self.records if n_sites is None or r["n_sites"] == n_sites]
        return sorted(rows, key=lambda r: (r["j_over_delta"], r["gamma_over_delta"], r["n_sites"]))


def _nan():
    return float("nan")


def evaluate_point(spec: SweepSpec, index: int, j: float, g: float, n: int) -> dict:
    """All requested observables at one grid point; failures become NaN plus a status."""
    rec = {
        "index": index,
        "j_over_delta": j,
        "gamma_over_delta": g,
        "n_sites": n,
        "re_gap": _nan(),
        "im_gap": _nan(),
        "order_param": _nan(),
        "xi": _nan(),
        "pt_class": "",
        "status": "ok",
    }
    obs = set(spec.observables)
    try:
        params = ChainParams(n, spec.delta, j * spec.delta, g * spec.delta, spec.boundary)
        k = SPECTRUM_K if "spectrum" in obs else 2
        sp = diagonalize(params, k=k, method=spec.method)
    except PTIsingError as exc:
        rec["status"] = f"failed:{type(exc).__name__}"
        return rec
    notes = list(sp.flags)
    if "gap" in obs:
        gap = energy_gap(sp)
        rec["re_gap"], rec["im_gap"] = float(gap.real), float(gap.imag)
    if "pt_class" in obs:
        rec["pt_class"] = ground_pt_class(sp).value
    if "spectrum" in obs:
        low = sp.lowest(SPECTRUM_K)
        for i, e in enumerate(low):
            rec[f"e{i}_re"], rec[f"e{i}_im"] = float(e.real), float(e.imag)
    if obs & {"order_parameter", "xi"}:
        prof = correlation_profile(sp.ground_vector, params)
        if "order_parameter" in obs:
            rec["order_param"] = order_parameter(prof)
        if "xi" in obs:
            try:
                rec["xi"] = correlation_length(prof, spec.xi_include_endpoint)
            except PTIsingError as exc:
                notes.append(f"xi:{type(exc).__name__}")
    if notes:
        rec["status"] = "ok;" + ",".join(notes)
    return rec


def _worker(args):
    spec_dict, tasks = args
    spec = SweepSpec(**spec_dict)
    return [evaluate_point(spec, *t) for t in tasks]


def _spec_from_dict(d: dict) -> SweepSpec:
    d = dict(d)
    for k in ("j_range", "gamma_range", "sizes", "observables"):
        d[k] = tuple(d[k])
    return SweepSpec(**d)


class Checkpoint:
    """Append-only record log plus the spec it belongs to."""

    def __init__(self, directory, spec: SweepSpec):
        self.dir = Path(directory)
        self.spec = spec
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
            meta = self.dir / SPEC_FILE
            if meta.exists():
                saved = json.loads(meta.read_text())
                if saved.get("hash") != spec.digest():
                    raise ConfigError(f"checkpoint in {self.dir} belongs to a different sweep spec")
            else:
                meta.write_text(json.dumps({"hash": spec.digest(), "spec": spec.to_dict()}, sort_keys=True, indent=1))
        except OSError as exc:
            raise StorageError(f"cannot use checkpoint directory {self.dir}: {exc}") from exc
        self.path = self.dir / RECORDS_FILE

    def load(self) -> dict[int, dict]:
        if not self.path.exists():
            return {}
        out = {}
        try:
            with open(self.path) as fh:
                for line in fh:
                    if not line.endswith("\n"):
                        break  # torn write from an interrupted run
                    rec = json.loads(line)
                    out[rec["index"]] = rec
        except (OSError, json.JSONDecodeError) as exc:
            raise StorageError(f"unreadable checkpoint {self.path}: {exc}") from exc
        return out

    def truncate_torn_tail(self):
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        cut = data.rfind(b"\n") + 1
        if cut != len(data):
            with open(self.path, "r+b") as fh:
                fh.truncate(cut)

    def append(self, records):
        try:
            with open(self.path, "a") as fh:
                for r in records:
                    fh.write(json.dumps(r, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageError(f"cannot write checkpoint {self.path}: {exc}") from exc


def run_sweep(
    spec: SweepSpec,
    workers: int | None = None,
    checkpoint_dir=None,
    batch_size: int | None = None,
    stop_after: int | None = None,
) -> GridResult:
    """Evaluate every grid point, resuming from ``checkpoint_dir`` if present.

    Points are dispatched in batches; each finished batch is appended to the
    checkpoint before the next is written, so an interrupted run loses at
    most the batches in flight.  ``stop_after`` ends the run once at least
    that many new points are done (used to emulate interruption).
    """
    workers = default_workers() if workers is None else int(workers)
    tasks = spec.points()
    ckpt = Checkpoint(checkpoint_dir, spec) if checkpoint_dir is not None else None
    done = {}
    if ckpt is not None:
        ckpt.truncate_torn_tail()
        done = ckpt.load()
    todo = [t for t in tasks if t[0] not in done]
    if batch_size is None:
        batch_size = max(1, min(64, math.ceil(len(todo) / (8 * workers)) if todo else 1))
    batches = [todo[i:i + batch_size] for i in range(0, len(todo), batch_size)]
    payload = spec.to_dict()

    new = 0

    def consume(results):
        nonlocal new
        for batch in results:
            if ckpt is not None:
                ckpt.append(batch)
            for r in batch:
                done[r["index"]] = r
            new += len(batch)
            if stop_after is not None and new >= stop_after:
                return

    if workers <= 1 or len(batches) <= 1:
        consume(_worker((payload, b)) for b in batches)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            consume(pool.map(_worker, [(payload, b) for b in batches]))
    records = [done[i] for i in sorted(done)]
    return GridResult(spec, records)


def load_checkpoint(directory) -> GridResult:
    """GridResult rebuilt from a checkpoint directory alone."""
    path = Path(directory)
    try:
        meta = json.loads((path / SPEC_FILE).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise StorageError(f"no readable checkpoint in {path}: {exc}") from exc
    spec = _spec_from_dict(meta["spec"])
    done = Checkpoint(path, spec).load()
    return GridResult(spec, [done[i] for i in sorted(done)])


# ---------------------------------------------------------------- phase diagram

REGION_LABELS = {
    "I": "quantum paramagnet (J > 0)",
    "II": "ferromagnet",
    "III": "PT-preserved quantum paramagnet (J < 0)",
    "IV": "PT-broken antiferromagnet",
}


@dataclass
class PhaseDiagram:
    regions: list[dict]
    fss_points: list[dict]
    gap_contour: list[tuple[float, float]]
    bp_lines: dict[str, list[tuple[float, float]]]
    gaps: list[str]


def _broken(rec, delta=1.0, threshold=GAP_THRESHOLD) -> bool:
    scale = math.hypot(rec["j_over_delta"], 1.0) * delta
    im = rec.get("im_gap")
    if im is not None and not math.isnan(im):
        return abs(im) > threshold * scale
    return rec.get("pt_class") == "broken"


def gap_contour(grid: GridResult, n_sites: int | None = None, threshold: float = GAP_THRESHOLD) -> list[tuple[float, float]]:
    """Lowest gamma/Delta of the broken region for each J/Delta column.

    The level crossing is placed midway between the last preserved and the
    first broken grid row.
    """
    n = n_sites or grid.spec.sizes[-1]
    cols = {}
    for r in grid.table(n):
        cols.setdefault(r["j_over_delta"], []).append(r)
    out = []
    for j in sorted(cols):
        rows = sorted(cols[j], key=lambda r: r["gamma_over_delta"])
        flags = [_broken(r, grid.spec.delta, threshold) for r in rows]
        for a, b, fa, fb in zip(rows, rows[1:], flags, flags[1:]):
            if not fa and fb:
                out.append((j, 0.5 * (a["gamma_over_delta"] + b["gamma_over_delta"])))
                break
    return out


def _label_points(grid: GridResult, op_threshold: float, threshold: float) -> list[dict]:
    sizes = grid.spec.sizes
    by_key = {}
    for r in grid.records:
        by_key.setdefault((r["j_over_delta"], r["gamma_over_delta"]), {})[r["n_sites"]] = r
    out = []
    for (j, g), recs in sorted(by_key.items()):
        big = recs.get(sizes[-1])
        if big is None:
            continue
        if len(sizes) >= 2 and sizes[-2] in recs:
            small = recs[sizes[-2]]
            a, b = small["xi"] / small["n_sites"], big["xi"] / big["n_sites"]
            ordered = (not math.isnan(a) and not math.isnan(b)) and b - a > XI_TOL
        else:
            ordered = big["order_param"] >= op_threshold
        if j < 0:
            label = "IV" if (_broken(big, grid.spec.delta, threshold) or ordered) else "III"
        else:
            label = "II" if ordered else "I"
        out.append({"j_over_delta": j, "gamma_over_delta": g, "region": label})
    return out


def _jg(p) -> tuple[float, float]:
    if hasattr(p, "j_over_delta"):
        return float(p.j_over_delta), float(p.gamma_over_delta)
    return float(p[0]), float(p[1])


def assemble_phase_diagram(
    grid: GridResult | None,
    fss_lines=None,
    bp_lines=None,
    op_threshold: float = 0.5,
    gap_threshold: float = GAP_THRESHOLD,
) -> PhaseDiagram:
    """Merge grid regions, gap contour, fss crossings and BP lines.

    Grid points are labelled I-IV: for J < 0, IV if the ground pair is PT
    broken or xi/N grows with N, else III; for J >= 0, II if xi/N grows with
    N, else I.  With a single size the order parameter threshold replaces
    the xi/N comparison.  Missing inputs are listed in ``gaps``.
    """
    gaps = []
    regions, contour = [], []
    if grid is None or not grid.records:
        gaps.append("grid")
    else:
        if not grid.complete:
            gaps.append("grid incomplete")
        regions = _label_points(grid, op_threshold, gap_threshold)
        contour = gap_contour(grid, threshold=gap_threshold)
    fss_points = []
    if not fss_lines:
        gaps.append("fss")
    else:
        for c in fss_lines:
            j, g = c.point
            fss_points.append({
                "j_over_delta": j,
                "gamma_over_delta": g,
                "uncertainty": c.uncertainty,
                "swept": c.swept,
                "n_pairs": len(c.pair_estimates),
            })
        fss_points.sort(key=lambda p: (p["j_over_delta"], p["gamma_over_delta"]))
    lines = {}
    if not bp_lines:
        gaps.append("bethe-peierls")
    else:
        for kind, pts in bp_lines.items():
            lines[str(getattr(kind, "value", kind))] = sorted(_jg(p) for p in pts)
    return PhaseDiagram(regions, fss_points, contour, lines, gaps)
