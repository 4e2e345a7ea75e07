"""
Parameter sweeps over one configuration variable.

A sweep runs every method at every grid point and averages the rate over
``trials`` random Eve placements (correlated scenario). Each cell draws its
randomness from ``seed ^ crc32(coordinates)``, so results do not depend on
scheduling or pool size. Eve's placement depends only on the trial index,
so every method and grid value sees the same placements.

Method labels are a name with optional overrides, e.g. ``"fa_opt:N=7"``.
Besides the strategies of :mod:`fas_keygen.ports`, ``"eigen_full"``
reports ``lambda_max(J)`` as ``objective_t`` and the rate of the
full-support leading eigenvector.
"""

import csv
import json
import logging
import math
import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .channel import SystemConfig, dbm_to_watts, make_rng
from .config import config_from_dict, config_to_dict
from .errors import ConfigError, ContractError, FasKeygenError
from .kgr import kgr_cc_closed, kgr_iid_closed
from .optimizer import P1, P2
from .ports import (
    build_instance,
    fa_mrc_baseline,
    fa_opt_baseline,
    reweighted_solve,
    sliding_window_solve,
    traverse,
)

__all__ = [
    "SweepSpec",
    "SweepRow",
    "CSV_HEADER",
    "SWEEP_VARIABLES",
    "parse_method",
    "load_sweep_spec",
    "run_sweep",
    "emit",
    "read_rows",
    "pool_size",
]

log = logging.getLogger(__name__)

CSV_HEADER = ("variable", "method", "scenario", "kgr_bits", "objective_t", "iterations", "wall_ms")
SWEEP_VARIABLES = ("P_A_dBm", "N", "M", "W")
SCENARIOS = ("iid", "correlated")
_METHOD_NAMES = (
    "reweighted",
    "sliding_window",
    "sliding_window_no_opt",
    "traverse",
    "fa_opt",
    "fa_mrc",
    "eigen_full",
)
_OVERRIDABLE = {"N": int, "M": int, "W": float, "draws": int}


def parse_method(label):
    """Split ``"name:key=value,..."`` into the name and typed overrides."""
    name, _, rest = label.partition(":")
    if name not in _METHOD_NAMES:
        raise ConfigError(f"unknown method {name!r}; expected one of {_METHOD_NAMES}")
    overrides = {}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep or key not in _OVERRIDABLE:
            raise ConfigError(f"bad method option {item!r} in {label!r}")
        try:
            overrides[key] = _OVERRIDABLE[key](value)
        except ValueError:
            raise ConfigError(f"bad value for {key} in {label!r}") from None
    return name, overrides


@dataclass(frozen=True)
class SweepSpec:
    """One experiment: a grid over a single variable, several methods."""

    sweep_variable: str
    grid: tuple
    methods: tuple
    scenario: str = "iid"
    trials: int = 100
    base: SystemConfig = SystemConfig()

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep_variable must be one of {SWEEP_VARIABLES}")
        if not self.grid:
            raise ConfigError("grid must be nonempty")
        if list(self.grid) != sorted(self.grid):
            raise ConfigError("grid must be sorted")
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        for label in self.methods:
            parse_method(label)
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials must be a positive integer")


@dataclass(frozen=True)
class SweepRow:
    variable: float
    method: str
    scenario: str
    kgr_bits: float
    objective_t: float
    iterations: int
    wall_ms: float


def load_sweep_spec(path):
    """Parse a sweep-spec JSON file (``base`` is a configuration document)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read sweep spec {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError("sweep spec must be a JSON object")
    doc = dict(doc)
    if doc.pop("schema", 1) != 1:
        raise ConfigError("unsupported sweep spec schema")
    allowed = {"sweep_variable", "grid", "methods", "scenario", "trials", "base"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown sweep spec field(s) {sorted(unknown)}")
    doc["base"] = config_from_dict(doc.get("base", {}))
    try:
        return SweepSpec(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def pool_size():
    """Worker count: ``FAS_KEYGEN_THREADS`` or the number of logical cores."""
    raw = os.environ.get("FAS_KEYGEN_THREADS")
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"FAS_KEYGEN_THREADS must be an integer, got {raw!r}") from None
        if value < 1:
            raise ConfigError("FAS_KEYGEN_THREADS must be at least 1")
        return value
    return os.cpu_count() or 1


def _cell_seed(seed, *coords):
    key = "|".join(repr(c) for c in coords).encode()
    return int(seed) ^ zlib.crc32(key)


def _config_at(spec, value, overrides):
    changes = {}
    if spec.sweep_variable == "P_A_dBm":
        changes["P_A"] = dbm_to_watts(float(value))
    elif spec.sweep_variable in ("N", "M"):
        changes[spec.sweep_variable] = int(value)
    else:
        changes["W"] = float(value)
    changes.update({k: v for k, v in overrides.items() if k != "draws"})
    changes["eve_mode"] = spec.scenario
    return spec.base.replace(**changes)


def _run_method(name, kind, instance, options, rng):
    if name == "eigen_full":
        corr = instance.corr
        w = math.sqrt(instance.P_A) * corr.u_max
        fn = kgr_iid_closed if kind == P1 else kgr_cc_closed
        return fn(w, instance.params).bits, corr.lambda_max, 0
    if name == "reweighted":
        res = reweighted_solve(kind, instance)
    elif name == "sliding_window":
        res = sliding_window_solve(kind, instance)
    elif name == "sliding_window_no_opt":
        res = sliding_window_solve(kind, instance, optimize=False)
    elif name == "traverse":
        res = traverse(kind, instance)
    elif name == "fa_opt":
        res = fa_opt_baseline(kind, instance)
    else:
        res = fa_mrc_baseline(kind, instance, draws=options.get("draws", 10_000), rng=rng)
    return res.kgr.bits, res.objective_t, res.iterations


def _run_cell(spec, value, label):
    name, options = parse_method(label)
    kind = P1 if spec.scenario == "iid" else P2
    trials = spec.trials if spec.scenario == "correlated" else 1
    start = time.perf_counter()
    bits, energy, iterations = [], [], []
    try:
        config = _config_at(spec, value, options)
        for trial in range(trials):
            place_rng = make_rng(_cell_seed(config.seed, "eve", trial))
            instance = build_instance(config, place_rng)
            method_rng = make_rng(_cell_seed(config.seed, spec.sweep_variable, value, label, trial))
            b, t, it = _run_method(name, kind, instance, options, method_rng)
            bits.append(b)
            energy.append(t)
            iterations.append(it)
        kgr, obj, its = float(np.mean(bits)), float(np.mean(energy)), int(max(iterations))
    except FasKeygenError as exc:
        log.warning("sweep cell %s=%r method=%s failed: %s", spec.sweep_variable, value, label, exc)
        kgr, obj, its = math.nan, math.nan, 0
    wall = 1e3 * (time.perf_counter() - start)
    return SweepRow(float(value), label, spec.scenario, kgr, obj, its, wall)


def run_sweep(spec, workers=None):
    """
    Evaluate every (grid value, method) cell.

    Failed cells are logged and reported with ``nan`` values; the sweep
    continues. Rows are sorted by (variable, method).
    """
    workers = pool_size() if workers is None else max(1, int(workers))
    cells = [(value, label) for value in spec.grid for label in spec.methods]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda c: _run_cell(spec, *c), cells))
    else:
        rows = [_run_cell(spec, *c) for c in cells]
    return sorted(rows, key=lambda r: (r.variable, r.method))


def _fmt(value):
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".17e")


def emit(rows, fmt, path):
    """
    Write rows as CSV (fixed header, ``.17e`` floats, LF newlines) or JSON.

    Raises
    ------
    ContractError
        If ``rows`` is empty or ``fmt`` unknown.
    OSError
        If ``path`` cannot be written.
    """
    rows = list(rows)
    if not rows:
        raise ContractError("emit needs at least one row")
    path = Path(path)
    if fmt == "csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow([_fmt(v) if not isinstance(v, str) else v for v in _ordered(row)])
    elif fmt == "json":
        docs = [dict(zip(CSV_HEADER, _ordered(row))) for row in rows]
        path.write_text(json.dumps(docs, indent=1) + "\n", encoding="utf-8")
    else:
        raise ContractError(f"unknown output format {fmt!r}")


def _ordered(row):
    d = asdict(row)
    return [d[k] for k in CSV_HEADER]


def read_rows(path):
    """Parse a file written by :func:`emit` (format from the extension)."""
    path = Path(path)
    if path.suffix == ".json":
        docs = json.loads(path.read_text(encoding="utf-8"))
        return [SweepRow(**{k: d[k] for k in CSV_HEADER}) for d in docs]
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ContractError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            SweepRow(
                variable=float(r["variable"]),
                method=r["method"],
                scenario=r["scenario"],
                kgr_bits=float(r["kgr_bits"]),
                objective_t=float(r["objective_t"]),
                iterations=int(r["iterations"]),
                wall_ms=float(r["wall_ms"]),
            )
            for r in reader
        ]


def spec_to_dict(spec):
    """Sweep-spec document for :func:`load_sweep_spec`."""
    return {
        "schema": 1,
        "sweep_variable": spec.sweep_variable,
        "grid": list(spec.grid),
        "methods": list(spec.methods),
        "scenario": spec.scenario,
        "trials": spec.trials,
        "base": config_to_dict(spec.base),
    }
