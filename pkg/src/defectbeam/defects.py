"""Induced defect fields: extraction from solutions, Helmholtz oracle and scaling study.

For Euler-Bernoulli beams the disclination density ``R = w'''`` satisfies

    b R' - c R''' = f0,

a Helmholtz equation for ``g = R'``.  With ``c << b`` the interior of the
beam therefore has ``b R' ~ f0`` up to a relative error that scales
linearly with ``c/b``; :func:`asymptotic_sweep` measures that scaling.

Timoshenko beams split into three groups of equations (see
:func:`timo_defect_groups`).  The signs used here are those of the
energy-consistent equilibrium system documented in :mod:`defectbeam.solvers`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.integrate
import scipy.linalg

from .core import (
    BeamCoefficients,
    BoundaryConditions,
    DefectBeamError,
    Grid1D,
    InvalidParameterError,
    LoadCase,
    ModelKind,
    ScalarField1D,
    SingularSystemError,
    finite_difference,
    stencil_width,
)
from .kinematics import DefectFields, build_fields, defect_fields
from .solvers import Solution, solve_eb

EB = ModelKind.EULER_BERNOULLI
TIMO = ModelKind.TIMOSHENKO

BOUNDARY_LAYER_WIDTHS = 5.0


class FitDegenerateError(DefectBeamError, ValueError):
    """The sweep cannot define a log-log slope (repeated or too few ratios)."""


class TorsionCompatibilityError(DefectBeamError):
    """Both T1 end data are prescribed and the integrated torsion misses one of them."""

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------


def defects_from_solution(sol: Solution) -> DefectFields:
    """Torsion ``p' - n`` and curvature ``n'`` of a solved beam on its field grid."""
    return defect_fields(build_fields(sol.model, sol.fields).N)


def eb_curvature_paths(sol: Solution) -> dict:
    """Nodal ``R = w'''`` computed three independent ways.

    ``element``: the Hermite interpolant's w''' averaged over the two
    elements sharing a node; ``connection``: ``-d_X N^1_12``, i.e. the
    derivative of the nodal w'' channel; ``displacement``: third finite
    difference of the nodal deflections.
    """
    if sol.model is not EB:
        raise InvalidParameterError("curvature paths are defined for Euler-Bernoulli solutions")
    grid = sol.grid
    x = grid.nodes
    eps = 1e-9 * grid.h
    left = sol.evaluate("w", np.maximum(x - eps, 0.0), 3)
    right = sol.evaluate("w", np.minimum(x + eps, grid.length), 3)
    element = 0.5 * (left + right)
    element[0], element[-1] = right[0], left[-1]
    return {
        "element": element,
        "connection": defects_from_solution(sol).curvature_R1112.values,
        "displacement": finite_difference(sol.fields["w"].values, grid.h, 3, accuracy=6),
    }


# ---------------------------------------------------------------------------
# Green's kernel and Helmholtz oracle
# ---------------------------------------------------------------------------


def greens_kernel(b: float, c: float, r) -> np.ndarray:
    """``G(r) = sqrt(c) / (2 sqrt(b)) exp(-sqrt(b/c) |r|)``, evaluated as stated.

    Its integral over the line is ``c/b``.  The kernel of ``b g - c g''`` with
    unit integral weight is :func:`greens_kernel_normalized`.
    """
    if not (b > 0 and c > 0):
        raise InvalidParameterError("greens_kernel needs b > 0 and c > 0")
    r = np.asarray(r, dtype=float)
    return math.sqrt(c) / (2.0 * math.sqrt(b)) * np.exp(-math.sqrt(b / c) * np.abs(r))


def greens_kernel_normalized(alpha: float, beta: float, r) -> np.ndarray:
    """Fundamental solution of ``alpha g - beta g''`` on the line; integrates to ``1/alpha``."""
    if not (alpha > 0 and beta > 0):
        raise InvalidParameterError("greens_kernel_normalized needs alpha > 0 and beta > 0")
    r = np.asarray(r, dtype=float)
    return np.exp(-math.sqrt(alpha / beta) * np.abs(r)) / (2.0 * math.sqrt(alpha * beta))


def kernel_integral(kernel: Callable[[float], float]) -> float:
    """Adaptive quadrature of an even kernel over the real line."""
    val, _ = scipy.integrate.quad(kernel, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    return 2.0 * val


@dataclass(frozen=True)
class EndCondition:
    kind: str  # "value" or "derivative"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("value", "derivative"):
            raise InvalidParameterError(f"end condition kind must be 'value' or 'derivative', not {self.kind!r}")


@dataclass(frozen=True, eq=False)
class HelmholtzProblem:
    """``alpha g - beta g'' = s`` on [0, L] with one condition on g per end."""

    alpha: float
    beta: float
    source: Union[Callable, ScalarField1D, np.ndarray, float]
    left: EndCondition = EndCondition("value")
    right: EndCondition = EndCondition("value")

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise InvalidParameterError("alpha and beta must be non-negative")

    def sample(self, grid: Grid1D) -> np.ndarray:
        s = self.source
        if isinstance(s, ScalarField1D):
            if s.grid != grid:
                raise InvalidParameterError("source lives on a different grid")
            return s.values
        if callable(s):
            return np.broadcast_to(np.asarray(s(grid.nodes), dtype=float), (grid.n_nodes,)).copy()
        arr = np.asarray(s, dtype=float)
        if arr.ndim == 0:
            return np.full(grid.n_nodes, float(arr))
        if arr.shape != (grid.n_nodes,):
            raise InvalidParameterError("tabulated source must match the grid")
        return arr


def solve_helmholtz(prob: HelmholtzProblem, grid: Grid1D) -> ScalarField1D:
    """Second-order finite-difference solution; derivative ends use a ghost node."""
    a, beta = float(prob.alpha), float(prob.beta)
    s = prob.sample(grid)
    if a == 0 and beta == 0:
        raise SingularSystemError("alpha = beta = 0: the operator vanishes", mode="all")
    if beta == 0:
        return ScalarField1D(grid, s / a)
    if a == 0 and prob.left.kind == prob.right.kind == "derivative":
        raise SingularSystemError("pure Neumann problem with alpha = 0", mode="constant")
    n, h = grid.n_nodes, grid.h
    k = beta / h**2
    main = np.full(n, a + 2 * k)
    upper = np.full(n - 1, -k)
    lower = np.full(n - 1, -k)
    rhs = s.copy()
    if prob.left.kind == "value":
        main[0], upper[0], rhs[0] = 1.0, 0.0, prob.left.value
    else:
        upper[0] = -2 * k
        rhs[0] -= 2 * beta * prob.left.value / h
    if prob.right.kind == "value":
        main[-1], lower[-1], rhs[-1] = 1.0, 0.0, prob.right.value
    else:
        lower[-1] = -2 * k
        rhs[-1] += 2 * beta * prob.right.value / h
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1] = main
    ab[2, :-1] = lower
    return ScalarField1D(grid, scipy.linalg.solve_banded((1, 1), ab, rhs))


# ---------------------------------------------------------------------------
# Euler-Bernoulli consistency and scaling study
# ---------------------------------------------------------------------------


def interior_window(grid: Grid1D, coeffs: BeamCoefficients, margin_nodes: int = 0,
                    widths: float = BOUNDARY_LAYER_WIDTHS) -> tuple[float, float]:
    """``[delta, L - delta]`` with ``delta = widths * sqrt(c/b)``, capped at L/4.

    The cap keeps a window for the larger ratios of a sweep, where the
    boundary layer would otherwise swallow the whole beam.
    """
    L = grid.length
    delta = min(widths * math.sqrt(coeffs.c / coeffs.b), 0.25 * L)
    delta = max(delta, margin_nodes * grid.h)
    return delta, L - delta


def _mask(grid: Grid1D, window: tuple[float, float]) -> np.ndarray:
    x = grid.nodes
    tol = 1e-12 * grid.length
    return (x >= window[0] - tol) & (x <= window[1] + tol)


@dataclass(eq=False)
class EbDefectReport:
    x: np.ndarray
    curvature: np.ndarray
    curvature_slope: np.ndarray  # R'
    residual: np.ndarray  # b R' - c R''' - f0 on the window
    residual_sup: float
    residual_l2: float
    oracle: np.ndarray  # Helmholtz solution for g = R'
    oracle_sup: float  # max |R' - g| on the window
    window: tuple


def eb_defect_consistency(sol: Solution, loads: Optional[LoadCase] = None,
                          widths: float = BOUNDARY_LAYER_WIDTHS) -> EbDefectReport:
    """Check ``b R' - c R''' = f0`` and compare ``R'`` with the Helmholtz oracle."""
    if sol.model is not EB:
        raise InvalidParameterError("eb_defect_consistency needs an Euler-Bernoulli solution")
    loads = loads or sol.loads
    grid = sol.grid
    b, c = sol.coeffs.b, sol.coeffs.c
    w2 = sol.fields["w"].derivative(2)
    R = w2.diff(1).values
    Rp = w2.diff(2).values
    f0 = loads.sample("f0", grid).values
    res = b * Rp - f0
    if c > 0:
        res = res - c * w2.diff(4).values
    margin = stencil_width(4)[0] // 2
    window = interior_window(grid, sol.coeffs, margin, widths) if c > 0 else (margin * grid.h, grid.length - margin * grid.h)
    mask = _mask(grid, window)
    oracle = solve_helmholtz(
        HelmholtzProblem(b, c, f0, EndCondition("value", Rp[0]), EndCondition("value", Rp[-1])), grid
    ).values
    x = grid.nodes[mask]
    r = res[mask]
    l2 = float(np.sqrt(np.trapezoid(r**2, x))) if len(x) > 1 else float(np.abs(r).max(initial=0.0))
    return EbDefectReport(grid.nodes, R, Rp, res, float(np.abs(r).max(initial=0.0)), l2, oracle,
                          float(np.abs(Rp - oracle)[mask].max(initial=0.0)), window)


@dataclass(eq=False)
class SweepReport:
    ratios: list
    errors: list
    slope: float
    intercept: float
    windows: list
    n_elements: int
    monotone: bool
    kernel_errors: list = field(default_factory=list)  # same error against (c/b) f0

    def rows(self) -> list:
        return list(zip(self.ratios, self.errors))


def _simply_supported() -> BoundaryConditions:
    return BoundaryConditions.build({"w": 0.0, "w2": 0.0}, {"w": 0.0, "w2": 0.0})


def asymptotic_sweep(ratios: Sequence[float], f0: Union[Callable, float] = None, b: float = 1.0,
                     length: float = 1.0, bcs: Optional[BoundaryConditions] = None,
                     n_elements: int = 256, threads: int = 1,
                     widths: float = BOUNDARY_LAYER_WIDTHS) -> SweepReport:
    """Relative interior error of ``b R'`` against ``f0`` for decreasing ``c/b``.

    Default load ``sin(pi x / L)`` and ends ``w = w'' = 0``.  The error for
    each ratio is ``max |b R' - f0| / max |f0|`` over the interior window;
    the slope and intercept come from a least-squares fit in log-log space.
    """
    ratios = [float(r) for r in ratios]
    if len(ratios) < 2:
        raise FitDegenerateError("a slope needs at least two ratios")
    if len(set(ratios)) != len(ratios):
        raise FitDegenerateError(f"repeated ratios {ratios}")
    for r in ratios:
        if not 0 < r <= 0.5:
            raise InvalidParameterError(f"ratio c/b = {r} outside (0, 0.5]")
    ratios = sorted(ratios, reverse=True)
    if f0 is None:
        f0 = lambda x: np.sin(np.pi * x / length)  # noqa: E731
    loads = LoadCase(f0=f0)
    bcs = bcs or _simply_supported()
    grid = Grid1D.from_elements(length, n_elements)
    f0_sup = float(np.max(np.abs(loads.sample("f0", grid).values)))
    if f0_sup == 0:
        raise InvalidParameterError("f0 vanishes on the grid")

    def run(r: float):
        coeffs = BeamCoefficients.from_stiffness(b, r * b)
        sol = solve_eb(grid, coeffs, loads, bcs)
        rep = eb_defect_consistency(sol, loads, widths)
        mask = _mask(grid, rep.window)
        f = loads.sample("f0", grid).values[mask]
        g = rep.curvature_slope[mask]
        err = float(np.max(np.abs(b * g - f)) / f0_sup)
        kern = float(np.max(np.abs(g - r * f)) / (r * f0_sup))
        return err, kern, rep.window

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(run, ratios))
    else:
        out = [run(r) for r in ratios]
    errors = [o[0] for o in out]
    if not all(np.isfinite(errors)) or min(errors) <= 0:
        raise FitDegenerateError(f"errors {errors} cannot be fitted in log space")
    slope, intercept = np.polyfit(np.log(ratios), np.log(errors), 1)
    monotone = all(e2 <= 1.05 * e1 for e1, e2 in zip(errors[:-1], errors[1:]))
    return SweepReport(ratios, errors, float(slope), float(intercept), [o[2] for o in out],
                       n_elements, monotone, [o[1] for o in out])


# ---------------------------------------------------------------------------
# Timoshenko groups
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class TimoDefectGroups:
    x: np.ndarray
    theta: np.ndarray
    torsion: np.ndarray  # p' - n
    torsion_integrated: np.ndarray  # from the group-2 balance
    curvature: np.ndarray  # n'
    residuals: dict
    anchor: str


def _cumulative(y: np.ndarray, x: np.ndarray, from_right: bool = False) -> np.ndarray:
    out = scipy.integrate.cumulative_simpson(y, x=x, initial=0.0)
    return out - out[-1] if from_right else out


def timo_defect_groups(sol: Solution, loads: Optional[LoadCase] = None, compat_tol: float = 1e-6) -> TimoDefectGroups:
    """Split the Timoshenko solution into its three defect groups.

    group 1: ``d theta' = -f0``;
    group 2: ``e T' = -d theta - f1`` integrated for the torsion T from an
    end with natural T1 data (left preferred), else from the kinematic value
    at the left end;
    group 3: ``b R - c R'' = f2' + e T'``.
    """
    if sol.model is not TIMO:
        raise InvalidParameterError("timo_defect_groups needs a Timoshenko solution")
    loads = loads or sol.loads
    co = sol.coeffs
    b, c, d, e = co.b, co.c, co.d, co.e
    u, p, n = sol.fields["u"], sol.fields["p"], sol.fields["n"]
    grid = u.grid
    x = grid.nodes
    theta = u.diff(1).values - p.values
    tors = p.diff(1).values - n.values
    R = n.diff(1).values
    f0, f1, f2 = (loads.sample(k, grid).values for k in ("f0", "f1", "f2"))

    g1 = d * finite_difference(theta, grid.h, 1) + f0

    naturals = {end: t for end, k, t in sol.bcs.natural_channels() if k == 1}
    flux = -d * theta - f1
    if "left" in naturals:
        anchor = "left"
        T = naturals["left"] / e + _cumulative(flux, x) / e
    elif "right" in naturals:
        anchor = "right"
        T = naturals["right"] / e + _cumulative(flux, x, from_right=True) / e
    else:
        anchor = "kinematic"
        T = tors[0] + _cumulative(flux, x) / e
    if anchor == "left" and "right" in naturals:
        defect = float(e * T[-1] - naturals["right"])
        scale = 1.0 + abs(naturals["left"]) + abs(naturals["right"]) + float(np.trapezoid(np.abs(flux), x))
        if abs(defect) > compat_tol * scale:
            raise TorsionCompatibilityError(
                f"integrated torsion gives T1(L) = {e * T[-1]:.6g}, prescribed {naturals['right']:.6g}", defect
            )

    g3 = b * R - c * n.diff(3).values - finite_difference(f2, grid.h, 1) - e * finite_difference(tors, grid.h, 1)

    margin = stencil_width(3)[0] // 2 + 1
    win = slice(margin, grid.n_nodes - margin)
    f2p = finite_difference(f2, grid.h, 1)
    scale = float(np.max(np.abs(f2p / b))) or 1.0
    residuals = {
        "group1_sup": float(np.max(np.abs(g1[win]))),
        "group2_sup": float(np.max(np.abs(T - tors))),
        "group3_sup": float(np.max(np.abs(g3[win]))),
        "curvature_vs_load": float(np.max(np.abs(R - f2p / b)[win]) / scale),
    }
    return TimoDefectGroups(x, theta, tors, T, R, residuals, anchor)
