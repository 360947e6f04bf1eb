"""Run configuration: a sectioned ``key = value`` file read with :mod:`configparser`.

Sections (``;`` or ``#`` start comments)::

    [model]          kind = euler-bernoulli | timoshenko
    [geometry]       L, n_elements, l (section thickness, needed with [constitutive])
    [coefficients]   b, c, d, e                    (exclusive with [constitutive])
    [constitutive]   E, F, G, H
    [loads]          f0, f1, f2 as expressions in x, or f0_table = path.csv
    [bc.left]        kinematic values (w, w1, w2 | u, p, n) and/or tractions T0, T1, T2
    [bc.right]       same
    [sweep]          ratios = 0.1, 0.01, ...
    [mms]            exact fields (w | u, p, n), left/right = essential | natural | e,n,e
                     max_error = threshold for the ``mms`` subcommand
    [convergence]    meshes = 32, 64, ...; min_order, max_error thresholds
    [output]         dir, plot = true | false

Keys are case-sensitive (``L`` is the length, ``l`` the thickness).  Load
expressions use ``x``, numbers, ``+ - * / ^``, parentheses, ``sin``, ``cos``,
``exp`` and ``pi``.  Channels left out of a [bc.*] section are traction free.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from ..core import (
    BeamCoefficients,
    BoundaryConditions,
    DefectBeamError,
    InvalidParameterError,
    LoadCase,
    ModelKind,
    make_rect_section,
)
from .expressions import Expression, ExpressionError, parse_expression

SECTIONS = {
    "model": {"kind"},
    "geometry": {"L", "l", "n_elements"},
    "coefficients": {"b", "c", "d", "e"},
    "constitutive": {"E", "F", "G", "H"},
    "loads": {"f0", "f1", "f2", "f0_table", "f1_table", "f2_table"},
    "bc.left": {"w", "w1", "w2", "u", "p", "n", "T0", "T1", "T2"},
    "bc.right": {"w", "w1", "w2", "u", "p", "n", "T0", "T1", "T2"},
    "sweep": {"ratios", "n_elements"},
    "mms": {"w", "u", "p", "n", "left", "right", "max_error"},
    "convergence": {"meshes", "min_order", "max_error"},
    "output": {"dir", "plot"},
}


class ConfigError(DefectBeamError, ValueError):
    """Invalid configuration; ``where`` names the file position or field."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


@dataclass(eq=False)
class RunConfig:
    model: ModelKind
    length: float
    n_elements: int
    coeffs: BeamCoefficients
    coefficient_source: dict
    loads: LoadCase
    load_sources: dict
    bcs: BoundaryConditions
    bc_sources: dict
    sweep: dict = field(default_factory=dict)
    mms: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)
    output_dir: Optional[str] = None
    plot: bool = False
    path: Optional[str] = None
    analysis: str = "solve"

    def semantic(self) -> dict:
        """Everything that affects results (not output location or plotting)."""
        return {
            "analysis": self.analysis,
            "model": self.model.value,
            "length": self.length,
            "n_elements": self.n_elements,
            "coefficients": self.coefficient_source,
            "loads": self.load_sources,
            "bcs": self.bc_sources,
            "sweep": self.sweep,
            "mms": {k: (v.canonical if isinstance(v, Expression) else v) for k, v in self.mms.items()},
            "convergence": self.convergence,
        }

    @property
    def hash(self) -> str:
        blob = json.dumps(self.semantic(), sort_keys=True, separators=(",", ":"), default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()


class _Locator:
    """Maps (section, key) to a line number of the source text."""

    def __init__(self, text: str, path: str):
        self.path = path
        self.lines = {}
        section = None
        for no, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip().lower()
                self.lines.setdefault((section, None), no)
            elif section and "=" in line and not line.startswith(("#", ";")):
                self.lines.setdefault((section, line.split("=", 1)[0].strip()), no)

    def __call__(self, section: str, key: Optional[str] = None) -> str:
        no = self.lines.get((section, key)) or self.lines.get((section, None))
        field_name = f"[{section}]" + (f" {key}" if key else "")
        return f"{self.path}:{no}: {field_name}" if no else f"{self.path}: {field_name}"


def _float(cp, loc, section, key, positive=False, nonneg=False) -> float:
    raw = cp.get(section, key)
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}", loc(section, key)) from None
    if not np.isfinite(val) or (positive and val <= 0) or (nonneg and val < 0):
        need = "positive" if positive else "non-negative" if nonneg else "finite"
        raise ConfigError(f"value must be {need}, got {raw!r}", loc(section, key))
    return val


def _int(cp, loc, section, key, minimum=1) -> int:
    raw = cp.get(section, key)
    try:
        val = int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", loc(section, key)) from None
    if val < minimum:
        raise ConfigError(f"must be >= {minimum}", loc(section, key))
    return val


def _list(cp, loc, section, key, cast=float) -> list:
    raw = cp.get(section, key)
    try:
        return [cast(v) for v in raw.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list, got {raw!r}", loc(section, key)) from None


def _expr(cp, loc, section, key) -> Expression:
    raw = cp.get(section, key)
    try:
        return parse_expression(raw)
    except ExpressionError as exc:
        raise ConfigError(str(exc), loc(section, key)) from None


def _read_table(path: Path, where: str):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]
        data = np.array([[float(v) for v in r[:2]] for r in rows])
    except (OSError, ValueError, IndexError) as exc:
        raise ConfigError(f"cannot read load table {path}: {exc}", where) from None
    if data.ndim != 2 or data.shape[0] < 2 or np.any(np.diff(data[:, 0]) <= 0):
        raise ConfigError(f"load table {path} needs >= 2 rows with increasing x", where)
    spline = CubicSpline(data[:, 0], data[:, 1])
    return (lambda x: spline(np.asarray(x, dtype=float))), data.tolist()


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_config(path, text: Optional[str] = None) -> RunConfig:
    """Parse and validate a configuration file (or ``text`` with ``path`` for messages)."""
    path = str(path)
    if text is None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", path) from None
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " "), path) from None
    loc = _Locator(text, path)

    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", loc(section))
        for key in cp[section]:
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r}", loc(section, key))

    if not cp.has_option("model", "kind"):
        raise ConfigError("missing [model] kind", loc("model"))
    try:
        model = ModelKind.parse(cp.get("model", "kind"))
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), loc("model", "kind")) from None

    for key in ("L", "n_elements"):
        if not cp.has_option("geometry", key):
            raise ConfigError(f"missing [geometry] {key}", loc("geometry"))
    length = _float(cp, loc, "geometry", "L", positive=True)
    n_el = _int(cp, loc, "geometry", "n_elements")

    has_direct, has_const = cp.has_section("coefficients"), cp.has_section("constitutive")
    if has_direct == has_const:
        raise ConfigError("give exactly one of [coefficients] (b, c, d, e) or [constitutive] (E, F, G, H)",
                          loc("constitutive" if has_const else "coefficients"))
    if has_direct:
        vals = {k: _float(cp, loc, "coefficients", k, nonneg=True) for k in cp["coefficients"]}
        if "b" not in vals:
            raise ConfigError("missing b", loc("coefficients"))
        coeffs = BeamCoefficients.from_stiffness(vals["b"], vals.get("c", 0.0), vals.get("d", 0.0), vals.get("e", 0.0))
        source = {"kind": "direct", **{k: vals.get(k, 0.0) for k in "bcde"}}
    else:
        vals = {k: _float(cp, loc, "constitutive", k, nonneg=True) for k in cp["constitutive"]}
        missing = [k for k in "EFGH" if k not in vals]
        if missing:
            raise ConfigError(f"missing {', '.join(missing)}", loc("constitutive"))
        if not cp.has_option("geometry", "l"):
            raise ConfigError("[constitutive] needs the section thickness l", loc("geometry"))
        thickness = _float(cp, loc, "geometry", "l", positive=True)
        try:
            coeffs = make_rect_section(vals["E"], vals["F"], vals["G"], vals["H"], thickness, length)
        except InvalidParameterError as exc:
            raise ConfigError(str(exc), loc("constitutive")) from None
        source = {"kind": "constitutive", **{k: vals[k] for k in "EFGH"}, "l": thickness}

    loads, load_sources = {}, {}
    if cp.has_section("loads"):
        for name in ("f0", "f1", "f2"):
            has_expr, has_tab = cp.has_option("loads", name), cp.has_option("loads", f"{name}_table")
            if has_expr and has_tab:
                raise ConfigError(f"{name} given both as expression and table", loc("loads", name))
            if has_expr:
                e = _expr(cp, loc, "loads", name)
                loads[name], load_sources[name] = e, e.canonical
            elif has_tab:
                tab = Path(cp.get("loads", f"{name}_table"))
                if not tab.is_absolute():
                    tab = Path(path).parent / tab
                loads[name], load_sources[name] = _read_table(tab, loc("loads", f"{name}_table"))
    if model is ModelKind.EULER_BERNOULLI and ({"f1", "f2"} & set(loads)):
        raise ConfigError("f1/f2 are Timoshenko loads", loc("loads"))
    load_case = LoadCase(**loads) if loads else LoadCase()

    ends, bc_sources = {}, {}
    allowed = set(model.channels) | {"T0", "T1", "T2"}
    for end in ("left", "right"):
        section = f"bc.{end}"
        entries = {}
        if cp.has_section(section):
            for key in cp[section]:
                if key not in allowed:
                    raise ConfigError(f"{key!r} is not a {model.value} boundary channel", loc(section, key))
                entries[key] = _float(cp, loc, section, key)
        ends[end] = entries
        bc_sources[end] = entries
    try:
        bcs = BoundaryConditions.build(ends["left"], ends["right"])
    except DefectBeamError as exc:
        raise ConfigError(str(exc), loc("bc.left")) from None

    sweep = {}
    if cp.has_section("sweep"):
        if cp.has_option("sweep", "ratios"):
            sweep["ratios"] = _list(cp, loc, "sweep", "ratios")
        if cp.has_option("sweep", "n_elements"):
            sweep["n_elements"] = _int(cp, loc, "sweep", "n_elements")

    mms = {}
    if cp.has_section("mms"):
        for key in ("w", "u", "p", "n"):
            if cp.has_option("mms", key):
                mms[key] = _expr(cp, loc, "mms", key)
        for key in ("left", "right"):
            if cp.has_option("mms", key):
                raw = cp.get("mms", key).strip().lower()
                kinds = raw if raw in ("essential", "natural") else [s.strip() for s in raw.split(",")]
                if not isinstance(kinds, str) and (len(kinds) != 3 or any(k not in ("e", "n") for k in kinds)):
                    raise ConfigError("use essential, natural or three of e/n", loc("mms", key))
                mms[key] = kinds
        if cp.has_option("mms", "max_error"):
            mms["max_error"] = _float(cp, loc, "mms", "max_error", positive=True)
        need = {"w"} if model is ModelKind.EULER_BERNOULLI else {"u", "p", "n"}
        given = {k for k in ("w", "u", "p", "n") if k in mms}
        if given != need:
            raise ConfigError(f"exact fields must be exactly {sorted(need)}", loc("mms"))

    conv = {}
    if cp.has_section("convergence"):
        if cp.has_option("convergence", "meshes"):
            conv["meshes"] = _list(cp, loc, "convergence", "meshes", int)
            if len(conv["meshes"]) < 2 or any(m < 1 for m in conv["meshes"]):
                raise ConfigError("need at least two positive mesh sizes", loc("convergence", "meshes"))
        for key in ("min_order", "max_error"):
            if cp.has_option("convergence", key):
                conv[key] = _float(cp, loc, "convergence", key)

    out_dir = cp.get("output", "dir", fallback=None)
    try:
        plot = cp.getboolean("output", "plot", fallback=False)
    except ValueError:
        raise ConfigError("plot must be true or false", loc("output", "plot")) from None

    return RunConfig(model, length, n_el, coeffs, source, load_case, load_sources, bcs, bc_sources,
                     sweep, mms, conv, out_dir, plot, path)
