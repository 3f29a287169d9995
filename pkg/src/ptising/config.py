"""Run configuration: strict YAML parsing with key paths and line numbers.

Example::

    command: gap-map
    n_sites: 10
    sweep:
      j_range: [-1.5, 1.5, 121]
      gamma_range: [0.0, 2.0, 81]

Chain parameters ``j`` and ``gamma`` are in units of ``delta``.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError, PTIsingError, StorageError
from .hamiltonian import Boundary, ChainParams
from .sweep import OBSERVABLES, default_workers

COMMANDS = ("spectrum", "gap-map", "corr-map", "scaling", "crossing", "bethe-peierls", "phase-diagram")


def _num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _range3(x):
    return (
        isinstance(x, list) and len(x) == 3 and _num(x[0]) and _num(x[1])
        and isinstance(x[2], int) and not isinstance(x[2], bool) and x[2] >= 1
    )


def _int_list(x):
    return isinstance(x, list) and bool(x) and all(isinstance(v, int) and not isinstance(v, bool) for v in x)


def _num_list(x):
    return isinstance(x, list) and bool(x) and all(_num(v) for v in x)


def _pos(x):
    return _num(x) and x > 0


# key -> (default, type check, description of the expected type)
SCHEMA = {
    "command": ("spectrum", lambda x: x in COMMANDS, f"one of {', '.join(COMMANDS)}"),
    "n_sites": (10, lambda x: isinstance(x, int) and not isinstance(x, bool) and x >= 1, "positive integer"),
    "delta": (1.0, _pos, "positive number"),
    "j": (0.0, _num, "number"),
    "gamma": (0.0, lambda x: _num(x) and x >= 0, "non-negative number"),
    "boundary": ("periodic", lambda x: x in ("periodic", "open"), "periodic or open"),
    "output": ("out", lambda x: isinstance(x, str) and bool(x), "path string"),
    "workers": (None, lambda x: x is None or (isinstance(x, int) and x >= 1), "positive integer"),
    "format": ("csv", lambda x: x in ("csv", "json"), "csv or json"),
    "checkpoint": (None, lambda x: x is None or isinstance(x, str), "path string"),
    "plots": (True, lambda x: isinstance(x, bool), "boolean"),
    "sweep": {
        "j_range": ([-1.5, 1.5, 121], _range3, "[min, max, steps]"),
        "gamma_range": ([0.0, 2.0, 81], _range3, "[min, max, steps]"),
        "sizes": (None, lambda x: x is None or _int_list(x), "list of integers (default: [n_sites])"),
        "observables": (None, lambda x: x is None or (isinstance(x, list) and set(x) <= set(OBSERVABLES)),
                        f"list drawn from {', '.join(OBSERVABLES)}"),
        "method": ("auto", lambda x: x in ("auto", "dense", "iterative"), "auto, dense or iterative"),
    },
    "spectrum": {
        "normalized": (False, lambda x: isinstance(x, bool), "boolean"),
        "j_grid": (None, lambda x: x is None or _range3(x), "[min, max, steps]"),
        "levels": (None, lambda x: x is None or (isinstance(x, int) and x >= 1), "positive integer"),
        "exception_points": (True, lambda x: isinstance(x, bool), "boolean"),
    },
    "scaling": {
        "axis": ("sweep_gamma", lambda x: x in ("sweep_gamma", "sweep_J"), "sweep_gamma or sweep_J"),
        "fixed": ([0.4], _num_list, "list of numbers"),
        "grid": (None, lambda x: x is None or _range3(x), "[min, max, steps]"),
        "sizes": ([8, 10, 12, 14], _int_list, "list of integers"),
        "include_endpoint": (False, lambda x: isinstance(x, bool), "boolean"),
        "all_crossings": (False, lambda x: isinstance(x, bool), "boolean"),
        "refine": (True, lambda x: isinstance(x, bool), "boolean"),
    },
    "bethe_peierls": {
        "kinds": (["two_spin_af", "two_spin_f", "six_spin"],
                  lambda x: isinstance(x, list) and bool(x) and set(x) <= {"two_spin_af", "two_spin_f", "six_spin"},
                  "list drawn from two_spin_af, two_spin_f, six_spin"),
        "gamma_grid": ([0.0, 2.0, 21], _range3, "[min, max, steps]"),
        "j_steps": (75, lambda x: isinstance(x, int) and x >= 2, "integer >= 2"),
    },
    "tolerances": {
        "tol_im": (1e-8, _pos, "positive number"),
        "tol_resid": (1e-9, _pos, "positive number"),
        "ep_tol": (1e-6, _pos, "positive number"),
        "m_threshold": (1e-3, _pos, "positive number"),
        "gap_threshold": (1e-6, _pos, "positive number"),
    },
}


def _defaults(schema):
    out = {}
    for k, v in schema.items():
        out[k] = _defaults(v) if isinstance(v, dict) else copy.deepcopy(v[0])
    return out


@dataclass
class RunConfig:
    """Validated configuration; ``values`` mirrors :data:`SCHEMA`."""

    values: dict = field(default_factory=lambda: _defaults(SCHEMA))

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def chain(self) -> ChainParams:
        v = self.values
        return ChainParams(v["n_sites"], v["delta"], v["j"] * v["delta"], v["gamma"] * v["delta"], Boundary(v["boundary"]))

    @property
    def n_workers(self) -> int:
        return self.values["workers"] or default_workers()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.values, sort_keys=True, default_flow_style=None)


def _marks(node, prefix="", out=None):
    """Map dotted key paths to 1-based line numbers of a composed YAML tree."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for knode, vnode in node.value:
            path = f"{prefix}{knode.value}"
            out[path] = knode.start_mark.line + 1
            _marks(vnode, path + ".", out)
    return out


def _load(text: str):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed config: {getattr(exc, 'problem', exc)}",
                          line=mark.line + 1 if mark else None) from None
    if data is None:
        return {}, {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at top level", line=1)
    return data, _marks(node)


def _merge(schema, target, data, lines, prefix=""):
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"unknown key {path!r}", key=path, line=lines.get(path))
        rule = schema[key]
        if isinstance(rule, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path} must be a mapping", key=path, line=lines.get(path))
            _merge(rule, target[key], value, lines, path + ".")
            continue
        _, check, expected = rule
        if isinstance(value, str) and isinstance(rule[0], float):
            # YAML 1.1 reads exponent-only literals such as 1e-8 as strings
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, int) and not isinstance(value, bool) and _num(rule[0]) and isinstance(rule[0], float):
            value = float(value)
        if not check(value):
            raise ConfigError(f"{path}: expected {expected}, got {value!r}", key=path, line=lines.get(path))
        target[key] = value


def _validate(cfg: RunConfig, lines):
    v = cfg.values
    try:
        cfg.chain
    except PTIsingError as exc:
        line = lines.get("n_sites") or lines.get("boundary")
        raise ConfigError(str(exc), key="n_sites", line=line) from None
    for sect in ("sweep", "scaling"):
        for n in v[sect]["sizes"] or [v["n_sites"]]:
            if n < 2 or (v["boundary"] == "periodic" and n % 2):
                path = f"{sect}.sizes"
                raise ConfigError(f"{path}: size {n} invalid (periodic chains need even N >= 2)",
                                  key=path, line=lines.get(path))
    for name in ("j_range", "gamma_range"):
        lo, hi, steps = v["sweep"][name]
        if steps > 1 and not hi > lo:
            path = f"sweep.{name}"
            raise ConfigError(f"{path}: max must exceed min", key=path, line=lines.get(path))
    if v["sweep"]["gamma_range"][0] < 0:
        raise ConfigError("sweep.gamma_range: gamma must be >= 0", key="sweep.gamma_range",
                          line=lines.get("sweep.gamma_range"))
    if v["spectrum"]["normalized"] and not -1 < v["j"] < 1:
        raise ConfigError("normalized spectra need |j| < 1", key="j", line=lines.get("j"))


def parse_config(text: str | None = None, path=None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from YAML text (or a file) plus flag overrides.

    ``overrides`` maps dotted keys (``"gamma"``, ``"sweep.sizes"``) to values
    and wins over the file.
    """
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    data, lines = _load(text or "")
    cfg = RunConfig()
    _merge(SCHEMA, cfg.values, data, lines)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        parts = dotted.split(".")
        nested = value
        for p in reversed(parts):
            nested = {p: nested}
        _merge(SCHEMA, cfg.values, nested, {})
    _validate(cfg, lines)
    return cfg


def echo_config(cfg: RunConfig, directory) -> str:
    """Write the effective config next to the outputs and return it."""
    text = cfg.to_yaml()
    try:
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "effective_config.yaml"), "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise StorageError(f"cannot write to {directory}: {exc}") from exc
    return text
