"""Static equilibrium solves, strong-form residual checks and the MMS harness."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import sympy

from .core import (
    BeamCoefficients,
    BoundaryConditions,
    Essential,
    Grid1D,
    InvalidParameterError,
    LoadCase,
    ModelKind,
    Natural,
    NotSPDError,
    ScalarField1D,
    SolverError,
    TRACTIONS,
    finite_difference,
    stencil_width,
)
from .curvature import CurvatureSpace, build_constrained_problem
from .energy import (
    DiscreteState,
    ExactState,
    HermiteSpace,
    assemble,
    check_problem,
    make_space,
    total_energy,
)

EB = ModelKind.EULER_BERNOULLI
TIMO = ModelKind.TIMOSHENKO

LINEAR_RTOL = 1e-10


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def _bandwidth(K) -> int:
    coo = sp.coo_matrix(K)
    if coo.nnz == 0:
        return 0
    return int(np.max(np.abs(coo.row - coo.col)))


class BandedCholesky:
    """Cholesky factor of a banded SPD matrix after symmetric diagonal equilibration."""

    def __init__(self, K):
        Ks = sp.csr_matrix(K, dtype=float)
        n = Ks.shape[0]
        if Ks.shape != (n, n):
            raise InvalidParameterError("K must be square")
        self.n = n
        diag = Ks.diagonal()
        if np.any(diag <= 0):
            raise NotSPDError(f"non-positive diagonal entry at dof {int(np.argmin(diag))}", mode="diagonal")
        self.scale = 1.0 / np.sqrt(diag)
        S = sp.diags(self.scale)
        Kt = (S @ Ks @ S).tocsr()
        u = _bandwidth(Kt)
        ab = np.zeros((u + 1, n))
        for k in range(u + 1):
            ab[u - k, k:] = Kt.diagonal(k)
        try:
            self._cb = scipy.linalg.cholesky_banded(ab, lower=False) if n else ab
        except np.linalg.LinAlgError as exc:
            raise NotSPDError(f"matrix is not positive definite: {exc}", mode="pivot") from exc

    def solve(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if self.n == 0:
            return np.zeros(f.shape)
        sc = self.scale[:, None] if f.ndim == 2 else self.scale
        return sc * scipy.linalg.cho_solve_banded((self._cb, False), sc * f)


def _relative_residual(K, v: np.ndarray, f: np.ndarray) -> float:
    fn = np.linalg.norm(f, axis=0)
    r = np.linalg.norm(K @ v - f, axis=0)
    return float(np.max(np.where(fn > 0, r / np.where(fn > 0, fn, 1.0), 0.0)))


def solve_banded_spd(K, f: np.ndarray, rtol: float = LINEAR_RTOL) -> np.ndarray:
    """Banded Cholesky solve of ``K v = f`` with symmetric diagonal equilibration.

    ``f`` may hold several right-hand sides as columns.  Raises
    :class:`NotSPDError` on a non-positive pivot and :class:`SolverError` if
    a relative residual exceeds ``rtol`` after one refinement sweep.
    """
    f = np.asarray(f, dtype=float)
    n = sp.csr_matrix(K).shape[0]
    if f.shape[:1] != (n,) or f.ndim > 2:
        raise InvalidParameterError("K must be square and match f")
    chol = BandedCholesky(K)
    v = chol.solve(f)
    if _relative_residual(K, v, f) > rtol:
        v += chol.solve(f - K @ v)
        res = _relative_residual(K, v, f)
        if res > rtol:
            raise SolverError(f"linear solve residual {res:.3e} exceeds {rtol:.1e}")
    return v


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residual: float


def minimize_cg(K, f: np.ndarray, x0: Optional[np.ndarray] = None, rtol: float = 1e-13,
                maxiter: Optional[int] = None,
                constraints: Optional[tuple[np.ndarray, np.ndarray]] = None) -> CGResult:
    """Minimise ``1/2 x.K x - f.x`` by Jacobi-preconditioned conjugate gradients.

    Every step is an exact line search along a K-conjugate direction, so
    the energy decreases monotonically.  Optional linear constraints
    ``D x = g`` (a few dense rows) are kept by projecting the gradient.
    """
    K = sp.csr_matrix(K, dtype=float)
    f = np.asarray(f, dtype=float)
    n = len(f)
    if n == 0:
        return CGResult(np.zeros(0), 0, True, 0.0)
    maxiter = maxiter or 20 * n
    diag = K.diagonal()
    if np.any(diag <= 0):
        raise NotSPDError("non-positive diagonal entry", mode="diagonal")
    s = 1.0 / np.sqrt(diag)
    Kt = (sp.diags(s) @ K @ sp.diags(s)).tocsr()
    ft = s * f
    if constraints is not None and len(constraints[1]):
        Dt = np.asarray(constraints[0], dtype=float) * s
        g_c = np.asarray(constraints[1], dtype=float)
        G = np.linalg.inv(Dt @ Dt.T)
        project = lambda r: r - Dt.T @ (G @ (Dt @ r))  # noqa: E731
        feasible = lambda y: y - Dt.T @ (G @ (Dt @ y - g_c))  # noqa: E731
    else:
        project = feasible = lambda r: r  # noqa: E731
    y = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float) / s
    y = feasible(y)
    fnorm = np.linalg.norm(project(ft)) or 1.0
    g = project(Kt @ y - ft)
    d = -g
    gg = g @ g
    best = (np.sqrt(gg), y.copy())
    it = 0
    for it in range(1, maxiter + 1):
        Kd = Kt @ d
        curv = d @ Kd
        if curv <= 0:
            raise NotSPDError("non-positive curvature along a search direction", mode="cg")
        y += (gg / curv) * d
        if it % 50 == 0:
            y = feasible(y)
            g = project(Kt @ y - ft)  # refresh the recursive gradient
        else:
            g = g + (gg / curv) * project(Kd)
        gg_new = g @ g
        gn = np.sqrt(gg_new)
        if gn < best[0]:
            best = (gn, y.copy())
        if gn <= rtol * fnorm:
            return CGResult(s * y, it, True, gn / fnorm)
        d = -g + (gg_new / gg) * d
        gg = gg_new
    return CGResult(s * best[1], it, False, best[0] / fnorm)


def solve_constrained(K, f: np.ndarray, D: Optional[np.ndarray] = None, g: Optional[np.ndarray] = None,
                      method: str = "direct", K_ext=None, f_ext: Optional[np.ndarray] = None,
                      refine: int = 30) -> tuple[np.ndarray, float]:
    """Minimise ``1/2 x.K x - f.x`` subject to ``D x = g``; returns (x, KKT residual).

    ``direct`` uses the banded Cholesky factor and a Schur complement for the
    few dense constraint rows, ``cg`` the projected energy descent.  When
    ``K_ext``/``f_ext`` (extended precision) are given, the direct solution
    is improved by iterative refinement with residuals in that precision and
    the reported residual is measured there as well.
    """
    n = len(f)
    D = np.zeros((0, n)) if D is None else np.asarray(D, dtype=float).reshape(-1, n)
    g = np.zeros(0) if g is None else np.asarray(g, dtype=float)
    m = D.shape[0]
    lam = np.zeros(m)
    if method == "direct":
        chol = BandedCholesky(K)
        Yd = chol.solve(D.T) if m else None
        schur = D @ Yd if m else None

        def kkt_solve(r1, r2):
            x0 = chol.solve(r1)
            if not m:
                return x0, np.zeros(0)
            dl = np.linalg.solve(schur, D @ x0 - r2)
            return x0 - Yd @ dl, dl

        x, lam = kkt_solve(f, g)
        if K_ext is not None:
            xe, le = x.astype(np.longdouble), lam.astype(np.longdouble)
            fe = np.asarray(f if f_ext is None else f_ext, dtype=np.longdouble)
            De = D.astype(np.longdouble)
            best = np.inf
            for _ in range(refine):
                r1 = fe - K_ext @ xe - De.T @ le
                r2 = g - De @ xe
                size = float(np.linalg.norm(r1.astype(float)) + np.linalg.norm(r2.astype(float)))
                if size >= 0.5 * best:
                    break  # converged to the working precision
                best = size
                dx, dl = kkt_solve(r1.astype(float), r2.astype(float))
                xe += dx
                le += dl
            x, lam = xe.astype(float), le.astype(float)
    elif method == "cg":
        res = minimize_cg(K, f, constraints=(D, g) if m else None)
        x = res.x
        if m:
            lam = np.linalg.lstsq(D.T, f - K @ x, rcond=None)[0]
    else:
        raise InvalidParameterError(f"unknown solve method {method!r}")
    if K_ext is not None:
        # measured on the refined extended-precision iterate; rounding it to
        # double afterwards moves each entry by at most half an ulp
        Kr, fr, Dr = K_ext, np.asarray(f if f_ext is None else f_ext, dtype=np.longdouble), D.astype(np.longdouble)
        xr, lr = (xe, le) if method == "direct" else (x.astype(np.longdouble), lam.astype(np.longdouble))
    else:
        Kr, fr, xr, lr, Dr = K, f, x, lam, D
    fnorm = float(np.linalg.norm(fr.astype(float)))
    r = (Kr @ xr + Dr.T @ lr - fr).astype(float)
    kkt = float(np.linalg.norm(r) / fnorm) if fnorm > 0 else float(np.linalg.norm(r))
    if m:
        scale = np.linalg.norm(g) + np.linalg.norm(D) * np.linalg.norm(x) or 1.0
        kkt = max(kkt, float(np.linalg.norm((Dr @ xr).astype(float) - g) / scale))
    return x, kkt


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Solution:
    """Static equilibrium state and its diagnostics.

    ``fields`` are nodal samples on the mesh vertices.  Euler-Bernoulli:
    ``fields['w']`` carries nodal (w', w'') as derivative data.  Timoshenko:
    ``fields['u'|'p'|'n']``; midpoint values are available through
    :meth:`evaluate`.  ``system`` is the algebraic problem
    that was solved (curvature coordinates for Euler-Bernoulli).
    """

    model: ModelKind
    grid: Grid1D
    coeffs: BeamCoefficients
    loads: LoadCase
    bcs: BoundaryConditions
    space: object
    dofs: np.ndarray
    fields: dict
    residuals: dict = field(default_factory=dict)
    system: object = None
    quad_order: int = 8

    @property
    def state(self) -> DiscreteState:
        return DiscreteState(self.space, self.dofs)

    @property
    def field_grid(self) -> Grid1D:
        return next(iter(self.fields.values())).grid

    def energy(self) -> float:
        return total_energy(self.model, self.state, self.loads, self.bcs, self.coeffs, self.grid,
                            quad_order=self.quad_order)

    def evaluate(self, channel: str, x, order: int = 0) -> np.ndarray:
        return self.state.eval(channel, x, order)


def _eb_fields(space: HermiteSpace, dofs: np.ndarray) -> dict:
    grid = space.grid
    m = space.per_node
    w, w1 = dofs[0::m], dofs[1::m]
    if m == 3:
        w2 = dofs[2::m]
    elif grid.n_nodes >= 5:
        w2 = finite_difference(w1, grid.h, 1)
    else:
        # too few nodes for stencils: average the one-sided element curvatures
        x = grid.nodes
        eps = 1e-9 * grid.h
        w2 = 0.5 * (space.evaluate(dofs, np.maximum(x - eps, 0.0), 2)
                    + space.evaluate(dofs, np.minimum(x + eps, grid.length), 2))
    return {"w": ScalarField1D(grid, w, (w1, w2))}


def _timo_fields(space, dofs: np.ndarray) -> dict:
    # vertex values only: they are superconvergent, while the midpoint values
    # carry a different error and would pollute finite-difference derivatives
    g = space.grid
    return {ch: ScalarField1D(g, dofs[k::3][0::2]) for k, ch in enumerate(("u", "p", "n"))}


def _solve(model: ModelKind, grid: Grid1D, coeffs: BeamCoefficients, loads: LoadCase,
           bcs: BoundaryConditions, quad_order: int = 8, eb_degree: Optional[int] = None,
           method: str = "direct") -> Solution:
    if model is EB:
        check_problem(EB, coeffs, loads, bcs, grid)
        herm = make_space(EB, grid, coeffs, eb_degree)
        cspace = CurvatureSpace(herm)
        T = cspace.transfer()
        prob = build_constrained_problem(cspace, coeffs, loads, bcs, T, quad_order)
        kappa, lin = solve_constrained(prob.K, prob.f, prob.D, prob.g, method, prob.K_ext, prob.f_ext)
        full = T @ prob.expand(kappa, cspace.n_kappa)
        space, system, fields = herm, prob, _eb_fields(herm, full)
    else:
        disc = assemble(model, grid, coeffs, loads, bcs, quad_order=quad_order)
        v, lin = solve_constrained(disc.stiffness, disc.load_vector, method=method,
                                   K_ext=disc.stiffness.astype(np.longdouble))
        full = disc.expand(v)
        space, system, fields = disc.space, disc, _timo_fields(disc.space, full)
    if lin > LINEAR_RTOL:
        raise SolverError(f"linear solve residual {lin:.3e} exceeds {LINEAR_RTOL:.1e}")
    sol = Solution(model, grid, coeffs, loads, bcs, space, full, fields, {"linear": lin}, system, quad_order)
    try:
        res = strong_residual(sol)
    except InvalidParameterError:
        pass  # grid too coarse for the residual stencils
    else:
        sol.residuals["strong_sup"] = max(res.sup.values())
        sol.residuals["strong_l2"] = max(res.l2.values())
        sol.residuals["flux"] = max(map(abs, res.flux.values()), default=0.0)
    return sol


def solve_eb(grid: Grid1D, coeffs: BeamCoefficients, loads: LoadCase, bcs: BoundaryConditions,
             quad_order: int = 8, eb_degree: Optional[int] = None, method: str = "direct") -> Solution:
    """Minimise the Euler-Bernoulli potential.

    The minimiser solves ``b w'''' - c w'''''' = f0`` with natural data
    ``T0 = -b w''' + c w^(5)``, ``T1 = b w'' - c w''''``, ``T2 = c w'''``.
    """
    return _solve(EB, grid, coeffs, loads, bcs, quad_order, eb_degree, method)


def solve_timoshenko(grid: Grid1D, coeffs: BeamCoefficients, loads: LoadCase, bcs: BoundaryConditions,
                     quad_order: int = 8, method: str = "direct") -> Solution:
    """Minimise the generalised Timoshenko potential.

    With ``theta = u' - p`` and ``tau = p' - n`` the minimiser solves

        f0 = -d theta',  f1 = -d theta - e tau',  f2 = b n - c n'' - e tau,

    with natural data ``T0 = d theta``, ``T1 = e tau``, ``T2 = c n'``.
    """
    return _solve(TIMO, grid, coeffs, loads, bcs, quad_order, method=method)


def solve(model, grid, coeffs, loads, bcs, **kwargs) -> Solution:
    model = ModelKind.parse(model)
    if model is EB:
        return solve_eb(grid, coeffs, loads, bcs, **kwargs)
    return solve_timoshenko(grid, coeffs, loads, bcs, **kwargs)


# ---------------------------------------------------------------------------
# strong form
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class StrongResidual:
    x: np.ndarray
    fields: dict
    sup: dict
    l2: dict
    flux: dict
    window: tuple


def _window(n: int, margin: int) -> slice:
    if n - 2 * margin < 1:
        raise InvalidParameterError(f"grid of {n} nodes has no interior window with margin {margin}")
    return slice(margin, n - margin)


def strong_residual_fields(model: ModelKind, fields: Mapping[str, ScalarField1D], coeffs: BeamCoefficients,
                           loads: LoadCase) -> tuple[dict, dict, int]:
    """Residual fields of the equilibrium equations and the end values of the traction expressions."""
    b, c, d, e = coeffs.b, coeffs.c, coeffs.d, coeffs.e
    if model is EB:
        w = fields["w"]
        grid = w.grid
        f0 = loads.sample("f0", grid).values
        w2, w3, w4 = (w.derivative(k).values for k in (2, 3, 4))
        r = b * w4 - f0
        tr = [None, b * w2, None]
        deepest = 4
        if c > 0:
            w5, w6 = w.derivative(5).values, w.derivative(6).values
            r = r - c * w6
            tr = [-b * w3 + c * w5, b * w2 - c * w4, c * w3]
            deepest = 6
        else:
            tr = [-b * w3, b * w2, np.zeros_like(w2)]
        res = {"f0": r}
        fd_order = deepest - len(w.derivative_values)
    else:
        u, p, n = fields["u"], fields["p"], fields["n"]
        grid = u.grid
        theta = u.diff(1) - p
        tau = p.diff(1) - n
        res = {
            "f0": -d * theta.diff(1).values - loads.sample("f0", grid).values,
            "f1": -d * theta.values - e * tau.diff(1).values - loads.sample("f1", grid).values,
            "f2": b * n.values - c * n.diff(2).values - e * tau.values - loads.sample("f2", grid).values,
        }
        tr = [d * theta.values, e * tau.values, c * n.diff(1).values]
        fd_order = 2
    half = stencil_width(fd_order)[0] // 2
    return res, tr, 2 * half


def strong_residual(sol: Solution, loads: Optional[LoadCase] = None) -> StrongResidual:
    """Residuals of the equilibrium ODEs on an interior window, and natural-BC flux mismatches."""
    loads = loads or sol.loads
    res, tr, margin = strong_residual_fields(sol.model, sol.fields, sol.coeffs, loads)
    grid = sol.field_grid
    win = _window(grid.n_nodes, margin)
    x = grid.nodes[win]
    out = {k: v[win] for k, v in res.items()}
    sup = {k: float(np.max(np.abs(v))) for k, v in out.items()}
    l2 = {k: float(np.sqrt(np.trapezoid(v**2, x))) if len(x) > 1 else abs(float(v[0])) for k, v in out.items()}
    flux = {}
    for end, k, t in sol.bcs.natural_channels():
        if sol.model is EB and sol.coeffs.c == 0 and k == 2:
            continue
        idx = 0 if end == "left" else -1
        flux[(end, TRACTIONS[k])] = float(tr[k][idx] - t)
    return StrongResidual(x, out, sup, l2, flux, (win.start, win.stop))


def traction_values(sol: Solution) -> dict:
    """Traction expressions evaluated at both ends of a solution."""
    _, tr, _ = strong_residual_fields(sol.model, sol.fields, sol.coeffs, sol.loads)
    return {(end, TRACTIONS[k]): float(tr[k][0 if end == "left" else -1])
            for end in ("left", "right") for k in range(3)}


# ---------------------------------------------------------------------------
# manufactured solutions
# ---------------------------------------------------------------------------

X = sympy.Symbol("x", real=True)


def _lambdify(expr):
    f = sympy.lambdify(X, expr, "numpy")
    return lambda x: np.broadcast_to(np.asarray(f(np.asarray(x, dtype=float)), dtype=float), np.shape(x))


@dataclass(eq=False)
class MmsCase:
    """Exact fields with the loads and end tractions they induce."""

    model: ModelKind
    coeffs: BeamCoefficients
    length: float
    exprs: dict
    exact: ExactState
    loads: LoadCase
    load_exprs: dict
    tractions: dict
    values: dict

    def bcs(self, left: Union[str, Sequence[str]] = "essential",
            right: Union[str, Sequence[str]] = "natural") -> BoundaryConditions:
        """Boundary data taken from the exact fields.

        Each end is ``"essential"``, ``"natural"`` or a 3-sequence of
        ``"e"``/``"n"`` per channel.  For c = 0 Euler-Bernoulli the w''
        channel is always natural with T2 = 0.
        """
        ends = []
        for end, kinds in (("left", left), ("right", right)):
            if isinstance(kinds, str):
                kinds = [kinds[0]] * 3
            conds = []
            for k, kind in enumerate(kinds):
                if self.model is EB and self.coeffs.c == 0 and k == 2:
                    conds.append(Natural(0.0))
                elif kind[0] == "e":
                    conds.append(Essential(self.values[(end, k)]))
                else:
                    conds.append(Natural(self.tractions[(end, k)]))
            ends.append(tuple(conds))
        return BoundaryConditions(*ends)


def make_mms(model, exact: Mapping[str, object], coeffs: BeamCoefficients, length: float = 1.0) -> MmsCase:
    """Loads and tractions induced by closed-form fields (sympy expressions or strings in ``x``)."""
    model = ModelKind.parse(model)
    exprs = {k: (sympy.sympify(v, locals={"x": X}) if isinstance(v, str) else sympy.sympify(v)) for k, v in exact.items()}
    exprs = {k: v.subs(sympy.Symbol("x"), X) for k, v in exprs.items()}
    b, c, d, e = (sympy.nsimplify(v) if float(v).is_integer() else sympy.Float(v)
                  for v in (coeffs.b, coeffs.c, coeffs.d, coeffs.e))
    D = lambda f, k=1: sympy.diff(f, X, k)  # noqa: E731
    if model is EB:
        if set(exprs) != {"w"}:
            raise InvalidParameterError("Euler-Bernoulli MMS needs exactly the field 'w'")
        w = exprs["w"]
        derivs = {"w": [D(w, k) if k else w for k in range(8)]}
        loads = {"f0": b * D(w, 4) - c * D(w, 6)}
        trac = [-b * D(w, 3) + c * D(w, 5), b * D(w, 2) - c * D(w, 4), c * D(w, 3)]
        kin = [w, D(w), D(w, 2)]
    else:
        if set(exprs) != {"u", "p", "n"}:
            raise InvalidParameterError("Timoshenko MMS needs the fields 'u', 'p', 'n'")
        u, p, n = exprs["u"], exprs["p"], exprs["n"]
        derivs = {k: [D(v, j) if j else v for j in range(4)] for k, v in exprs.items()}
        theta, tau = D(u) - p, D(p) - n
        loads = {"f0": -d * D(theta), "f1": -d * theta - e * D(tau), "f2": b * n - c * D(n, 2) - e * tau}
        trac = [d * theta, e * tau, c * D(n)]
        kin = [u, p, n]
    loads = {k: sympy.simplify(v) for k, v in loads.items()}
    ends = {"left": 0.0, "right": float(length)}
    tractions = {(end, k): float(trac[k].subs(X, xe)) for end, xe in ends.items() for k in range(3)}
    values = {(end, k): float(kin[k].subs(X, xe)) for end, xe in ends.items() for k in range(3)}
    exact_state = ExactState({k: [_lambdify(f) for f in v] for k, v in derivs.items()})
    load_case = LoadCase(**{k: _lambdify(v) for k, v in loads.items()})
    return MmsCase(model, coeffs, float(length), exprs, exact_state, load_case, loads, tractions, values)


@dataclass
class ConvergenceRow:
    n_elements: int
    h: float
    errors: dict
    linear_residual: float


@dataclass
class ConvergenceReport:
    model: ModelKind
    rows: list
    orders: dict  # channel -> list of pairwise observed orders

    def min_order(self, channel: Optional[str] = None) -> float:
        chans = [channel] if channel else list(self.orders)
        return min(min(self.orders[ch]) for ch in chans)

    def final_error(self, channel: Optional[str] = None) -> float:
        last = self.rows[-1].errors
        return last[channel] if channel else max(last.values())


def mms_error(sol: Solution, case: MmsCase, samples_per_element: int = 8) -> dict:
    """Sup-norm error of each primary channel over interior sample points of every element."""
    grid = sol.grid
    xi = (np.arange(samples_per_element + 1)) / samples_per_element
    x = np.unique((grid.nodes[:-1, None] + grid.h * xi[None, :]).ravel())
    chans = ("w",) if sol.model is EB else ("u", "p", "n")
    return {ch: float(np.max(np.abs(sol.evaluate(ch, x) - case.exact.eval(ch, x)))) for ch in chans}


def mms_convergence(case: MmsCase, element_counts: Sequence[int], left="essential", right="natural",
                    threads: int = 1, quad_order: int = 8) -> ConvergenceReport:
    """Solve the manufactured problem on each mesh and report observed orders."""
    bcs = case.bcs(left, right)

    def run(n_el: int) -> ConvergenceRow:
        grid = Grid1D.from_elements(case.length, n_el)
        sol = solve(case.model, grid, case.coeffs, case.loads, bcs, quad_order=quad_order)
        return ConvergenceRow(n_el, grid.h, mms_error(sol, case), sol.residuals["linear"])

    counts = list(element_counts)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(run, counts))
    else:
        rows = [run(n) for n in counts]
    orders = {}
    for ch in rows[0].errors:
        orders[ch] = [math.log(a.errors[ch] / b.errors[ch]) / math.log(a.h / b.h)
                      for a, b in zip(rows[:-1], rows[1:])]
    return ConvergenceReport(case.model, rows, orders)
