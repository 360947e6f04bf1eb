"""Analyses behind the ``defectbeam`` command and its argument parsing."""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..core import DefectBeamError, Grid1D, ModelKind, SingularSystemError, SolverError
from ..defects import (
    TorsionCompatibilityError,
    asymptotic_sweep,
    defects_from_solution,
    eb_curvature_paths,
    eb_defect_consistency,
    timo_defect_groups,
)
from ..kinematics import deformation_measures
from ..solvers import X, make_mms, mms_convergence, mms_error, solve
from . import output
from .config import ConfigError, RunConfig, load_config

ANALYSES = ("solve", "defects", "sweep", "mms", "convergence", "check")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ACCEPTANCE = 0, 2, 3, 4
DEFAULT_OUT = "defectbeam-out"


@dataclass(eq=False)
class RunReport:
    config_hash: str
    analysis: str
    summary: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    passed: Optional[bool] = None
    failures: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # in-memory copies of the written CSV columns

    def as_dict(self) -> dict:
        return {"config_hash": self.config_hash, "analysis": self.analysis, "summary": self.summary,
                "residuals": self.residuals, "files": self.files, "passed": self.passed,
                "failures": self.failures}


def _field_columns(sol) -> tuple[tuple, dict]:
    defects = defects_from_solution(sol)
    if sol.model is ModelKind.EULER_BERNOULLI:
        w = sol.fields["w"]
        cols = {"x": w.grid.nodes, "w": w.values, "w1": w.derivative(1).values, "w2": w.derivative(2).values,
                "w3": eb_curvature_paths(sol)["element"]}
        header = output.EB_HEADER
    else:
        u = sol.fields["u"]
        meas = deformation_measures(sol.model, sol.fields)
        cols = {"x": u.grid.nodes, "u": u.values, "p": sol.fields["p"].values, "n": sol.fields["n"].values,
                "theta": meas.theta.values}
        header = output.TIMO_HEADER
    cols["torsion"] = defects.torsion_T112.values
    cols["curvature"] = defects.curvature_R1112.values
    return header, cols


def _extremum(x: np.ndarray, v: np.ndarray) -> dict:
    i = int(np.argmax(np.abs(v)))
    return {"max_abs": float(abs(v[i])), "x": float(x[i])}


def _solve(cfg: RunConfig):
    grid = Grid1D.from_elements(cfg.length, cfg.n_elements)
    try:
        return solve(cfg.model, grid, cfg.coeffs, cfg.loads, cfg.bcs)
    except (SolverError, SingularSystemError) as exc:
        exc.args = (f"{cfg.model.value} solve on {cfg.n_elements} elements: {exc}",)
        raise


def _run_solve(cfg: RunConfig, rep: RunReport, defects: bool):
    sol = _solve(cfg)
    header, cols = _field_columns(sol)
    rep.tables["fields.csv"] = (header, cols)
    deflection = cols[header[1]]
    rep.summary.update({
        "model": cfg.model.value,
        "n_elements": cfg.n_elements,
        "energy": sol.energy(),
        "max_deflection": _extremum(cols["x"], deflection),
        "torsion": _extremum(cols["x"], cols["torsion"]),
        "curvature": _extremum(cols["x"], cols["curvature"]),
    })
    rep.residuals.update(sol.residuals)
    plots = {header[1]: deflection}
    if cfg.model is ModelKind.EULER_BERNOULLI:
        plots.update({"T": cols["torsion"], "R": cols["curvature"]})
    else:
        plots.update({k: cols[k] for k in ("p", "n", "theta", "torsion", "curvature")})
        plots["T"], plots["R"] = plots.pop("torsion"), plots.pop("curvature")
    rep.tables["_plot_fields"] = (cols["x"], plots)

    if not defects:
        return
    if cfg.model is ModelKind.EULER_BERNOULLI:
        d = eb_defect_consistency(sol, cfg.loads)
        paths = eb_curvature_paths(sol)
        rep.tables["defects.csv"] = (("x", "curvature_element", "curvature_connection", "curvature_displacement",
                                      "curvature_slope", "helmholtz_oracle", "balance_residual"),
                                     {"x": d.x, "curvature_element": paths["element"],
                                      "curvature_connection": paths["connection"],
                                      "curvature_displacement": paths["displacement"],
                                      "curvature_slope": d.curvature_slope, "helmholtz_oracle": d.oracle,
                                      "balance_residual": d.residual})
        spread = max(float(np.max(np.abs(paths[a] - paths[b])))
                     for a, b in (("element", "connection"), ("element", "displacement"),
                                  ("connection", "displacement")))
        rep.residuals.update({"balance_sup": d.residual_sup, "balance_l2": d.residual_l2,
                              "helmholtz_oracle_sup": d.oracle_sup, "curvature_path_spread": spread})
        rep.summary["interior_window"] = list(d.window)
    else:
        g = timo_defect_groups(sol, cfg.loads)
        rep.tables["defects.csv"] = (("x", "theta", "torsion", "torsion_integrated", "curvature"),
                                     {"x": g.x, "theta": g.theta, "torsion": g.torsion,
                                      "torsion_integrated": g.torsion_integrated, "curvature": g.curvature})
        rep.residuals.update(g.residuals)
        rep.summary["torsion_anchor"] = g.anchor


def _run_sweep(cfg: RunConfig, rep: RunReport, threads: int):
    if cfg.model is not ModelKind.EULER_BERNOULLI:
        raise ConfigError("sweep needs model kind euler-bernoulli", f"{cfg.path}: [model] kind")
    ratios = cfg.sweep.get("ratios")
    if not ratios:
        raise ConfigError("missing ratios", f"{cfg.path}: [sweep]")
    bcs = cfg.bcs if any(cfg.bc_sources.values()) else None
    f0 = cfg.loads.f0 if cfg.loads.f0 is not None else None
    sw = asymptotic_sweep(ratios, f0=f0, b=cfg.coeffs.b, length=cfg.length, bcs=bcs,
                          n_elements=cfg.sweep.get("n_elements", cfg.n_elements), threads=threads)
    rep.tables["sweep.csv"] = (("ratio", "error", "kernel_error", "window_start", "window_end"),
                               {"ratio": sw.ratios, "error": sw.errors, "kernel_error": sw.kernel_errors,
                                "window_start": [w[0] for w in sw.windows], "window_end": [w[1] for w in sw.windows]})
    rep.summary.update({"slope": sw.slope, "intercept": sw.intercept, "monotone": sw.monotone,
                        "n_ratios": len(sw.ratios), "n_elements": sw.n_elements})
    rep.tables["_plot_sweep"] = (np.array(sw.ratios), {"relative error": np.array(sw.errors)})


def _mms_case(cfg: RunConfig):
    if not cfg.mms:
        raise ConfigError("missing [mms] section with exact fields", f"{cfg.path}: [mms]")
    exact = {k: v.to_sympy(X) for k, v in cfg.mms.items() if k in ("w", "u", "p", "n")}
    case = make_mms(cfg.model, exact, cfg.coeffs, cfg.length)
    return case, cfg.mms.get("left", "essential"), cfg.mms.get("right", "natural")


def _run_mms(cfg: RunConfig, rep: RunReport):
    case, left, right = _mms_case(cfg)
    grid = Grid1D.from_elements(cfg.length, cfg.n_elements)
    sol = solve(cfg.model, grid, cfg.coeffs, case.loads, case.bcs(left, right))
    errors = mms_error(sol, case)
    header, cols = _field_columns(sol)
    rep.tables["fields.csv"] = (header, cols)
    rep.summary.update({"n_elements": cfg.n_elements, "errors": errors, "induced_loads": {
        k: str(v) for k, v in case.load_exprs.items()}})
    rep.residuals.update(sol.residuals)
    limit = cfg.mms.get("max_error")
    if limit is not None:
        rep.passed = max(errors.values()) <= limit
        if not rep.passed:
            rep.failures.append(f"max error {max(errors.values()):.3e} exceeds {limit:.3e}")


def _run_convergence(cfg: RunConfig, rep: RunReport, threads: int):
    case, left, right = _mms_case(cfg)
    meshes = cfg.convergence.get("meshes")
    if not meshes:
        raise ConfigError("missing meshes", f"{cfg.path}: [convergence]")
    conv = mms_convergence(case, meshes, left, right, threads=threads)
    chans = list(conv.rows[0].errors)
    cols = {"n_elements": [r.n_elements for r in conv.rows], "h": [r.h for r in conv.rows],
            "linear_residual": [r.linear_residual for r in conv.rows]}
    for ch in chans:
        cols[f"error_{ch}"] = [r.errors[ch] for r in conv.rows]
        cols[f"order_{ch}"] = [np.nan] + conv.orders[ch]
    header = ("n_elements", "h", *[f"{k}_{ch}" for ch in chans for k in ("error", "order")], "linear_residual")
    rep.tables["convergence.csv"] = (header, cols)
    rep.summary.update({"orders": conv.orders, "min_order": conv.min_order(), "final_error": conv.final_error()})
    rep.residuals["linear_max"] = max(cols["linear_residual"])
    rep.tables["_plot_convergence"] = (np.array(cols["h"]), {f"error {ch}": np.array(cols[f"error_{ch}"])
                                                             for ch in chans})
    checks = []
    if "min_order" in cfg.convergence:
        checks.append((conv.min_order() >= cfg.convergence["min_order"],
                       f"min order {conv.min_order():.3f} below {cfg.convergence['min_order']}"))
    if "max_error" in cfg.convergence:
        checks.append((conv.final_error() <= cfg.convergence["max_error"],
                       f"final error {conv.final_error():.3e} exceeds {cfg.convergence['max_error']:.3e}"))
    if checks:
        rep.passed = all(ok for ok, _ in checks)
        rep.failures.extend(msg for ok, msg in checks if not ok)


def _write(rep: RunReport, out_dir: Path, plot: bool, title: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (header, cols) in rep.tables.items():
        if name.startswith("_"):
            continue
        written.append(output.write_table(out_dir / name, header, cols))
    if plot:
        for key, stem, kw in (("_plot_fields", "fields", {}), ("_plot_sweep", "sweep", {"xlabel": "c/b", "logscale": True}),
                              ("_plot_convergence", "convergence", {"xlabel": "h", "logscale": True})):
            if key in rep.tables:
                x, series = rep.tables[key]
                written.append(output.write_svg(out_dir / f"{stem}.svg", x, series, title=title, **kw))
    rep.files = [{"name": p.name, "bytes": p.stat().st_size,
                  "sha256": hashlib.sha256(p.read_bytes()).hexdigest()} for p in written]
    report = output.write_json(out_dir / "report.json", rep.as_dict())
    rep.files.append({"name": report.name, "bytes": report.stat().st_size})


def run(config: RunConfig, out_dir=None, threads: int = 1, plot: Optional[bool] = None) -> RunReport:
    """Run ``config.analysis`` and write its outputs; ``check`` only validates."""
    if config.analysis not in ANALYSES:
        raise ConfigError(f"unknown analysis {config.analysis!r}; choose from {', '.join(ANALYSES)}")
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    rep = RunReport(config.hash, config.analysis)
    if config.analysis == "check":
        rep.summary = {"model": config.model.value, "n_elements": config.n_elements,
                       "coefficients": config.coeffs.stiffness(), "bcs": config.bcs.describe(config.model)}
        return rep
    if config.analysis in ("solve", "defects"):
        _run_solve(config, rep, defects=config.analysis == "defects")
    elif config.analysis == "sweep":
        _run_sweep(config, rep, threads)
    elif config.analysis == "mms":
        _run_mms(config, rep)
    else:
        _run_convergence(config, rep, threads)
    out = Path(out_dir or config.output_dir or DEFAULT_OUT)
    _write(rep, out, config.plot if plot is None else plot, f"{config.model.value} {config.analysis}")
    return rep


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="defectbeam",
                                     description="Gradient-elastic beam solver with defect diagnostics.")
    sub = parser.add_subparsers(dest="analysis", required=True)
    helps = {"solve": "solve and write the field table",
             "defects": "solve and write defect balances",
             "sweep": "boundary-layer scaling study over c/b",
             "mms": "manufactured-solution error on one mesh",
             "convergence": "manufactured-solution convergence study",
             "check": "validate the configuration only"}
    for name in ANALYSES:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps and studies")
        p.add_argument("--plot", action="store_true", default=None, help="also write SVG plots")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = replace(load_config(args.config), analysis=args.analysis)
        rep = run(cfg, args.out, args.threads, args.plot)
    except (SolverError, SingularSystemError, TorsionCompatibilityError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DefectBeamError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.analysis == "check":
        print(f"ok {rep.config_hash}")
        return EXIT_OK
    print(f"{args.analysis}: config {rep.config_hash[:12]}, wrote {', '.join(f['name'] for f in rep.files)}")
    if rep.passed is False:
        for msg in rep.failures:
            print(f"FAIL {msg}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    return EXIT_OK
