"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 storage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bethe_peierls as bp
from . import fss
from .config import COMMANDS, RunConfig, echo_config, parse_config
from .errors import ConfigError, InvalidParameters, PTIsingError, StorageError
from .hamiltonian import Boundary, ChainParams
from .output import GRID_COLUMNS, emit_dataset, emit_plot_script, write_csv, write_json
from .spectra import full_spectrum, scan_exception_points
from .sweep import SweepSpec, assemble_phase_diagram, run_sweep
from . import sweep as sweep_mod

log = logging.getLogger("ptising")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_STORAGE = 0, 1, 2, 3


def _range(r):
    return np.linspace(r[0], r[1], r[2])


def _sweep_spec(cfg: RunConfig, observables) -> SweepSpec:
    s = cfg.sweep
    return SweepSpec(
        j_range=tuple(s["j_range"]),
        gamma_range=tuple(s["gamma_range"]),
        sizes=tuple(s["sizes"] or [cfg.n_sites]),
        observables=tuple(s["observables"] or observables),
        boundary=Boundary(cfg.boundary),
        delta=cfg.delta,
        method=s["method"],
    )


def _outdir(cfg) -> Path:
    return Path(cfg.output)


def _grid_columns(spec: SweepSpec):
    cols = list(GRID_COLUMNS)
    if "spectrum" in spec.observables:
        for i in range(sweep_mod.SPECTRUM_K):
            cols += [f"e{i}_re", f"e{i}_im"]
    return cols


# ----------------------------------------------------------------- commands

def cmd_spectrum(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    sp = cfg.spectrum
    tol = cfg.tolerances
    grid = _range(sp["j_grid"]) if sp["j_grid"] else np.array([cfg.j])
    base = cfg.chain

    def params_at(x):
        if sp["normalized"]:
            return ChainParams(base.n_sites, float(np.sqrt(1 - x * x)), float(x), cfg.gamma, base.boundary)
        return base.with_(coupling=x * cfg.delta)

    rows = []
    for x in grid:
        p = params_at(float(x))
        res = full_spectrum(p, vectors=False, tol_im=tol["tol_im"] * max(1.0, p.energy_scale),
                            tol_resid=tol["tol_resid"])
        e = res.eigenvalues
        levels = sp["levels"] or e.size
        scale = p.energy_scale if sp["normalized"] else p.delta
        for k, ev in enumerate(e[:levels]):
            rows.append({
                "j": float(x), "gamma": cfg.gamma, "level": k,
                "re_scaled": ev.real / scale, "im_scaled": ev.imag / scale,
                "re": ev.real, "im": ev.imag,
            })
    files = [write_csv(out / "spectrum.csv", ["j", "gamma", "level", "re_scaled", "im_scaled", "re", "im"], rows,
                       sort_key=lambda r: (r["j"], r["level"]))]
    eps = None
    if sp["exception_points"] and grid.size > 1:
        events = scan_exception_points(base, "coupling", grid, params_at=params_at)
        ep_rows = []
        for ev in events:
            lo, hi = ev["interval"]
            scale = ev["scale"] if sp["normalized"] else cfg.delta
            ep_rows.append({
                "j": 0.5 * (lo + hi), "gamma": cfg.gamma, "re_scaled": ev["energy"] / scale,
                "order_estimate": 3 if ev["order3"] else 2, "triple_spread": ev["triple_spread"],
                "j_lo": lo, "j_hi": hi,
                "complex_before": ev["complex_before"], "complex_after": ev["complex_after"],
            })
        eps = write_csv(out / "exception_points.csv",
                        ["j", "gamma", "re_scaled", "order_estimate", "triple_spread", "j_lo", "j_hi",
                         "complex_before", "complex_after"], ep_rows, sort_key=lambda r: r["j"])
        files.append(eps)
    if cfg.plots:
        files.append(emit_plot_script(files[0], "spectrum_vs_J", eps=eps,
                                      levels=min(sp["levels"] or 16, 1 << base.n_sites)))
    return files


def _run_grid(cfg: RunConfig, observables):
    spec = _sweep_spec(cfg, observables)
    ckpt = cfg.checkpoint or str(_outdir(cfg) / "checkpoint")
    return run_sweep(spec, workers=cfg.n_workers, checkpoint_dir=ckpt)


def cmd_map(cfg: RunConfig, observables, kind) -> list[Path]:
    grid = _run_grid(cfg, observables)
    out = _outdir(cfg)
    path = emit_dataset(grid.records, out / "grid", columns=_grid_columns(grid.spec), fmt=cfg.format)
    files = [path]
    if cfg.plots and cfg.format == "csv":
        files.append(emit_plot_script(path, kind, n_sites=grid.spec.sizes[-1]))
    return files


def _scaling_grid(cfg):
    sc = cfg.scaling
    if sc["grid"]:
        return _range(sc["grid"])
    return np.linspace(0.0, 2.0, 101) if sc["axis"] == "sweep_gamma" else np.linspace(-1.5, 1.5, 151)


def cmd_scaling(cfg: RunConfig) -> list[Path]:
    sc = cfg.scaling
    axis = fss.Axis(sc["axis"])
    out = _outdir(cfg)
    files = []
    for i, value in enumerate(sc["fixed"]):
        curves = fss.scaling_sweep(
            (axis.fixed, float(value)), _scaling_grid(cfg), sc["sizes"], cfg.chain, refine=sc["refine"],
            swept=axis.swept, include_endpoint=sc["include_endpoint"], workers=cfg.n_workers,
        )
        rows = [
            {"fixed_name": c.fixed[0], "fixed_value": c.fixed[1], "swept_name": c.swept, "n_sites": c.n_sites,
             "swept": float(x), "xi_over_n": float(y)}
            for c in curves for x, y in c.points
        ]
        path = write_csv(out / f"scaling_{i}.csv",
                         ["fixed_name", "fixed_value", "swept_name", "n_sites", "swept", "xi_over_n"], rows,
                         sort_key=lambda r: (r["n_sites"], r["swept"]))
        files.append(path)
        files.append(write_json(out / f"scaling_{i}_missing.json",
                                {str(c.n_sites): list(c.missing) for c in curves}))
        if cfg.plots:
            label = "{/Symbol g}/{/Symbol D}" if axis is fss.Axis.SWEEP_GAMMA else "J/{/Symbol D}"
            files.append(emit_plot_script(path, "scaling_curves", sizes=sc["sizes"], swept_label=label))
    return files


def _crossings(cfg: RunConfig):
    sc = cfg.scaling
    return fss.critical_line(
        sc["fixed"], sc["axis"], sc["sizes"], cfg.chain, swept_grid=_scaling_grid(cfg),
        all_crossings=sc["all_crossings"], include_endpoint=sc["include_endpoint"],
        refine=sc["refine"], workers=cfg.n_workers,
    )


def _crossing_rows(found):
    rows = []
    for c in found:
        j, g = c.point
        rows.append({
            "j_over_delta": j, "gamma_over_delta": g, "uncertainty": c.uncertainty,
            "swept_gamma": int(c.swept == fss.SWEEP_GAMMA), "n_pairs": len(c.pair_estimates),
            "flags": ";".join(c.flags),
        })
    return rows


def _crossing_json(found, misses):
    return {
        "crossings": [
            {"critical_value": c.critical_value, "uncertainty": c.uncertainty, "fixed": list(c.fixed),
             "swept": c.swept, "flags": list(c.flags),
             "pair_estimates": [{"n_a": a, "n_b": b, "value": v} for a, b, v in c.pair_estimates]}
            for c in found
        ],
        "misses": [{"fixed": v, "reason": r} for v, r in misses],
    }


CROSSING_COLUMNS = ["j_over_delta", "gamma_over_delta", "uncertainty", "swept_gamma", "n_pairs", "flags"]


def cmd_crossing(cfg: RunConfig) -> list[Path]:
    found, misses = _crossings(cfg)
    out = _outdir(cfg)
    key = lambda r: (r["j_over_delta"], r["gamma_over_delta"])  # noqa: E731
    files = [write_csv(out / "crossings.csv", CROSSING_COLUMNS, _crossing_rows(found), sort_key=key),
             write_json(out / "crossings.json", _crossing_json(found, misses))]
    if cfg.plots:
        files.append(emit_plot_script(files[0], "phase_diagram", fss=files[0]))
    if not found:
        raise fss.NoCrossing("no crossing for any fixed value")
    return files


def _bp_lines(cfg: RunConfig):
    b = cfg.bethe_peierls
    gammas = _range(b["gamma_grid"])
    lines = {}
    for kind in b["kinds"]:
        base = bp.default_j_grid(kind)
        js = np.concatenate([np.linspace(seg.min(), seg.max(), b["j_steps"])
                             for seg in (base[base < 0], base[base > 0]) if seg.size])
        lines[kind] = bp.bp_phase_boundary(kind, gammas, js, delta=cfg.delta,
                                           m_threshold=cfg.tolerances["m_threshold"])
    return lines


def _write_bp(out, lines):
    files = {}
    for kind, pts in lines.items():
        rows = [{"j_over_delta": p.j_over_delta, "gamma_over_delta": p.gamma_over_delta,
                 "ordered_side": p.ordered_side} for p in pts]
        files[kind] = write_csv(out / f"bp_{kind}.csv", ["j_over_delta", "gamma_over_delta", "ordered_side"], rows,
                                sort_key=lambda r: (r["gamma_over_delta"], r["j_over_delta"]))
    return files


def cmd_bethe_peierls(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    files = _write_bp(out, _bp_lines(cfg))
    paths = list(files.values())
    if cfg.plots:
        paths.append(emit_plot_script(paths[0], "phase_diagram", path=out / "bp.gp", bp=files))
    return paths


def cmd_phase_diagram(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    grid = _run_grid(cfg, ("gap", "order_parameter", "xi", "pt_class"))
    files = [emit_dataset(grid.records, out / "grid", columns=_grid_columns(grid.spec))]
    try:
        found, misses = _crossings(cfg)
    except PTIsingError as exc:
        log.warning("fss crossings unavailable: %s", exc)
        found, misses = [], []
    lines = _bp_lines(cfg)
    pd = assemble_phase_diagram(grid, found, lines, gap_threshold=cfg.tolerances["gap_threshold"])
    regions = write_csv(out / "regions.csv", ["j_over_delta", "gamma_over_delta", "region"], pd.regions,
                        sort_key=lambda r: (r["j_over_delta"], r["gamma_over_delta"]))
    key = lambda r: (r["j_over_delta"], r["gamma_over_delta"])  # noqa: E731
    fss_csv = write_csv(out / "fss_points.csv", CROSSING_COLUMNS, _crossing_rows(found), sort_key=key)
    contour = write_csv(out / "gap_contour.csv", ["j_over_delta", "gamma_over_delta"],
                        [{"j_over_delta": j, "gamma_over_delta": g} for j, g in pd.gap_contour])
    bp_files = _write_bp(out, lines)
    summary = write_json(out / "phase_diagram.json", {
        "gaps": pd.gaps, "gap_contour": pd.gap_contour, "bp_lines": pd.bp_lines,
        "fss": _crossing_json(found, misses),
        "region_labels": sweep_mod.REGION_LABELS,
    })
    files += [regions, fss_csv, contour, *bp_files.values(), summary]
    if cfg.plots:
        files.append(emit_plot_script(regions, "phase_diagram", path=out / "phase_diagram.gp",
                                      fss=fss_csv, contour=contour, bp=bp_files))
    return files


def run(cfg: RunConfig) -> list[Path]:
    c = cfg.command
    if c == "spectrum":
        return cmd_spectrum(cfg)
    if c == "gap-map":
        return cmd_map(cfg, ("gap", "pt_class"), "gap_colormap")
    if c == "corr-map":
        return cmd_map(cfg, ("order_parameter", "xi", "pt_class"), "op_colormap")
    if c == "scaling":
        return cmd_scaling(cfg)
    if c == "crossing":
        return cmd_crossing(cfg)
    if c == "bethe-peierls":
        return cmd_bethe_peierls(cfg)
    return cmd_phase_diagram(cfg)


# --------------------------------------------------------------------- argv

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ptising", description=__doc__.splitlines()[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS, help="what to compute (overrides the config file)")
    ap.add_argument("-c", "--config", type=Path, help="YAML run configuration")
    ap.add_argument("-N", "--n-sites", type=int)
    ap.add_argument("--delta", type=float)
    ap.add_argument("--j", type=float, help="J/Delta")
    ap.add_argument("--gamma", type=float, help="gamma/Delta")
    ap.add_argument("--boundary", choices=("periodic", "open"))
    ap.add_argument("-o", "--output", help="output directory")
    ap.add_argument("-w", "--workers", type=int, help=f"worker processes (default ${sweep_mod.WORKERS_ENV} or 1)")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--checkpoint", help="checkpoint directory for grid sweeps")
    ap.add_argument("--sizes", type=int, nargs="+", help="chain sizes for grid sweeps")
    ap.add_argument("--no-plots", action="store_true", help="skip gnuplot script generation")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _overrides(args) -> dict:
    o = {
        "command": args.command,
        "n_sites": args.n_sites,
        "delta": args.delta,
        "j": args.j,
        "gamma": args.gamma,
        "boundary": args.boundary,
        "output": args.output,
        "workers": args.workers,
        "format": args.format,
        "checkpoint": args.checkpoint,
        "sweep.sizes": args.sizes,
    }
    if args.no_plots:
        o["plots"] = False
    return o


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(path=args.config, overrides=_overrides(args))
        sys.stderr.write("# effective config\n" + echo_config(cfg, cfg.output))
        files = run(cfg)
    except (ConfigError, InvalidParameters) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except StorageError as exc:
        sys.stderr.write(f"storage error: {exc}\n")
        return EXIT_STORAGE
    except OSError as exc:
        sys.stderr.write(f"storage error: {exc}\n")
        return EXIT_STORAGE
    except (PTIsingError, ArithmeticError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
