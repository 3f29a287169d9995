"""CSV/JSON datasets and gnuplot scripts.

Floats are written with 17 significant digits so every value round-trips
exactly; rows are sorted before writing, which makes reruns byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .errors import StorageError

GRID_COLUMNS = (
    "j_over_delta",
    "gamma_over_delta",
    "n_sites",
    "re_gap",
    "im_gap",
    "order_param",
    "xi",
    "pt_class",
    "status",
)

FIGURE_KINDS = ("spectrum_vs_J", "gap_colormap", "op_colormap", "scaling_curves", "phase_diagram")


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def write_csv(path, columns, rows, sort_key=None) -> Path:
    """Write dict rows under ``columns``; extra keys are ignored, missing ones left empty."""
    path = Path(path)
    rows = list(rows)
    if sort_key is not None:
        rows.sort(key=sort_key)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([format_value(r.get(c)) for c in columns])
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc
    return path


def _parse(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path) -> tuple[list[str], list[dict]]:
    """Header and typed rows (int, float or str per cell, None for empty)."""
    try:
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            rows = [dict(zip(header, map(_parse, line))) for line in rd]
    except (OSError, StopIteration) as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    return header, rows


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _clean(o):
    # JSON has no NaN; encode non-finite floats as strings
    if isinstance(o, float) and not math.isfinite(o):
        return format_value(o)
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def write_json(path, data) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        text = json.dumps(_clean(json.loads(json.dumps(data, default=_json_default))), indent=1, sort_keys=True)
        path.write_text(text + "\n")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc
    return path


def emit_dataset(rows, path, columns=GRID_COLUMNS, fmt: str = "csv", sort_key=None) -> Path:
    """Write a table as CSV or as a JSON list of row objects."""
    if sort_key is None and columns[:3] == GRID_COLUMNS[:3]:
        def sort_key(r):
            return (r["j_over_delta"], r["gamma_over_delta"], r["n_sites"])
    rows = sorted(rows, key=sort_key) if sort_key else list(rows)
    path = Path(path)
    if fmt == "csv":
        return write_csv(path.with_suffix(".csv"), columns, rows)
    if fmt == "json":
        return write_json(path.with_suffix(".json"), [{c: r.get(c) for c in columns} for r in rows])
    raise ValueError(f"unknown format {fmt!r}")


# ------------------------------------------------------------------ gnuplot

_HEAD = """# generated gnuplot script; run with: gnuplot {name}
set datafile separator ','
set datafile missing 'nan'
set terminal pngcairo size 900,700
set output '{png}'
"""


def _colormap(csv_name: str, column: int, n_sites: int, cblabel: str, transform: str) -> str:
    return f"""set xlabel 'J/{{/Symbol D}}'
set ylabel '{{/Symbol g}}/{{/Symbol D}}'
set cblabel '{cblabel}'
set palette rgbformulae 33,13,10
set view map
plot '{csv_name}' every ::1 using 1:2:($3=={n_sites} ? {transform} : 1/0) with image notitle
"""


def emit_plot_script(dataset, figure_kind: str, path=None, **opts) -> Path:
    """Write a gnuplot script rendering ``dataset`` (a CSV path) as ``figure_kind``.

    Options: ``n_sites`` (colormaps), ``sizes`` (scaling curves), ``eps``
    (EP marker CSV for spectra), ``fss``, ``contour``, ``bp`` (CSV paths for
    the phase diagram overlay).
    """
    if figure_kind not in FIGURE_KINDS:
        raise ValueError(f"unknown figure kind {figure_kind!r}; expected one of {FIGURE_KINDS}")
    dataset = Path(dataset)
    path = Path(path) if path is not None else dataset.with_name(f"{dataset.stem}_{figure_kind}.gp")
    head = _HEAD.format(name=path.name, png=path.with_suffix(".png").name)
    name = dataset.name

    if figure_kind == "gap_colormap":
        body = _colormap(name, 4, opts.get("n_sites", 10), "Re {/Symbol D}{/Symbol e}", "$4")
    elif figure_kind == "op_colormap":
        body = _colormap(name, 6, opts.get("n_sites", 10), "sqrt|C(N/2)|", "$6")
    elif figure_kind == "scaling_curves":
        sizes = " ".join(str(n) for n in opts.get("sizes", (8, 10, 12)))
        swept = opts.get("swept_label", "{/Symbol g}/{/Symbol D}")
        body = f"""set xlabel '{swept}'
set ylabel '{{/Symbol x}}/N'
set key top left
plot for [N in "{sizes}"] '{name}' every ::1 using 5:($4==N+0 ? $6 : 1/0) with linespoints title sprintf('N=%s', N)
"""
    elif figure_kind == "spectrum_vs_J":
        levels = int(opts.get("levels", 16))
        eps = opts.get("eps")
        ep_plot = f", '{Path(eps).name}' every ::1 using 1:3 with points pt 4 ps 1.5 lc rgb 'black' title 'EP'" if eps else ""
        body = f"""set xlabel 'J~'
set ylabel 'Re {{/Symbol e}}~'
set style fill transparent solid 0.35 noborder
plot for [k=0:{levels - 1}] '{name}' every ::1 using 1:($3==k ? $4-abs($5) : 1/0):($3==k ? $4+abs($5) : 1/0) with filledcurves lc k+1 notitle, \\
     for [k=0:{levels - 1}] '{name}' every ::1 using 1:($3==k ? $4 : 1/0) with lines lc k+1 notitle{ep_plot}
"""
    else:
        parts = []
        if opts.get("contour"):
            parts.append(f"'{Path(opts['contour']).name}' every ::1 using 1:2 with lines lw 2 lc rgb 'blue' title 'gap threshold'")
        if opts.get("fss"):
            f = Path(opts["fss"]).name
            parts.append(
                f"'{f}' every ::1 using 1:2:($4==0 ? $3 : 0):($4==1 ? $3 : 0) with xyerrorbars pt 7 lc rgb 'orange' title 'xi/N crossings'"
            )
        for kind, p in (opts.get("bp") or {}).items():
            colour = "purple" if "two" in kind else "dark-green"
            parts.append(f"'{Path(p).name}' every ::1 using 1:2 with linespoints dt 4 lc rgb '{colour}' title 'BP {kind}'")
        if not parts:
            parts.append(f"'{name}' every ::1 using 1:2 with points notitle")
        body = """set xlabel 'J/{/Symbol D}'
set ylabel '{/Symbol g}/{/Symbol D}'
set xrange [-1.5:1.5]
set yrange [0:2]
plot """ + ", \\\n     ".join(parts) + "\n"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(head + body)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc
    return path
