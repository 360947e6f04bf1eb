"""Homogenised energy densities, total potential and their Galerkin discretisation.

Scaling convention: the densities are used exactly as written,
``b w''^2 + c w'''^2`` and ``b n^2 + c n'^2 + d theta^2 + e (p'-n)^2``.
The functional that is minimised is

    Pi = int(density) - 2 * W_ext,
    W_ext = int(f . v) + T(L) . v(L) - T(0) . v(0),

i.e. twice the usual potential ``1/2 int(density) - W_ext``.  Its
Euler-Lagrange equations are the equilibrium systems with the traction
expressions (T0, T1, T2) prescribed as the same formula at both ends.  The
discrete form is ``E(v) = 1/2 v.K v - f.v + const`` with ``K`` twice the
matrix of the quadratic form ``int(density)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Protocol, Sequence

import numpy as np
import scipy.sparse as sp

from .core import (
    BeamCoefficients,
    BoundaryConditionError,
    BoundaryConditions,
    Essential,
    Grid1D,
    InvalidParameterError,
    LoadCase,
    ModelKind,
    SingularSystemError,
    validate_bcs,
)

EB = ModelKind.EULER_BERNOULLI
TIMO = ModelKind.TIMOSHENKO


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


def eb_density(w2, w3, coeffs: BeamCoefficients):
    return coeffs.b * np.square(w2) + coeffs.c * np.square(w3)


def timo_density(n, n1, theta, rel, coeffs: BeamCoefficients):
    return (coeffs.b * np.square(n) + coeffs.c * np.square(n1)
            + coeffs.d * np.square(theta) + coeffs.e * np.square(rel))


# ---------------------------------------------------------------------------
# quadrature and element spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Legendre rule mapped to [0, 1]; exact up to degree 2*order - 1."""

    order: int
    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss(cls, order: int) -> "QuadratureRule":
        xi, w = np.polynomial.legendre.leggauss(order)
        return cls(order, 0.5 * (xi + 1.0), 0.5 * w)


def _monomial_derivs(xi: np.ndarray, degree: int, order: int) -> np.ndarray:
    """Rows d^order/dxi^order of (1, xi, ..., xi^degree)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = np.zeros((len(xi), degree + 1))
    for k in range(order, degree + 1):
        coef = np.prod(np.arange(k - order + 1, k + 1)) if order else 1.0
        out[:, k] = coef * xi ** (k - order)
    return out


class HermiteSpace:
    """C^(m-1) Hermite elements with m nodal derivatives (cubic: m=2, quintic: m=3)."""

    def __init__(self, grid: Grid1D, degree: int = 5):
        if degree not in (3, 5):
            raise InvalidParameterError("Hermite degree must be 3 or 5")
        self.grid = grid
        self.degree = degree
        self.per_node = (degree + 1) // 2
        m = self.per_node
        rows = [_monomial_derivs(np.array([node]), degree, j)[0] for node in (0.0, 1.0) for j in range(m)]
        self._inv = np.linalg.inv(np.array(rows))
        h = grid.h
        self._scale = np.array([h**j for _ in range(2) for j in range(m)])

    @property
    def n_dofs(self) -> int:
        return self.per_node * self.grid.n_nodes

    @property
    def n_local(self) -> int:
        return 2 * self.per_node

    def dof(self, node: int, order: int) -> int:
        return self.per_node * node + order

    def end_node(self, end: str) -> int:
        return 0 if end == "left" else self.grid.n_nodes - 1

    def element_dofs(self, e: int) -> np.ndarray:
        return np.arange(self.per_node * e, self.per_node * e + self.n_local)

    def basis(self, xi, order: int = 0) -> np.ndarray:
        """Physical-derivative basis values on the reference element, shape (len(xi), n_local)."""
        phi = _monomial_derivs(xi, self.degree, order) @ self._inv
        return phi * self._scale / self.grid.h**order

    def locate(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t = x / self.grid.h
        e = np.clip(np.floor(t).astype(int), 0, self.grid.n_elements - 1)
        return e, t - e

    def evaluate(self, dofs: np.ndarray, x, order: int = 0) -> np.ndarray:
        e, xi = self.locate(x)
        out = np.empty(len(e))
        for k in np.unique(e):
            mask = e == k
            out[mask] = self.basis(xi[mask], order) @ dofs[self.element_dofs(k)]
        return out

    def dof_map(self) -> dict:
        return {("w", i, j): self.dof(i, j) for i in range(self.grid.n_nodes) for j in range(self.per_node)}


class LagrangeP2Space:
    """Continuous quadratic elements for the three Timoshenko channels (u, p, n)."""

    channels = ("u", "p", "n")

    def __init__(self, grid: Grid1D):
        self.grid = grid
        self.fine_grid = grid.refined()
        # L_i(xi) = sum_k C[k, i] xi^k for nodes 0, 1/2, 1
        V = _monomial_derivs(np.array([0.0, 0.5, 1.0]), 2, 0)
        self._inv = np.linalg.inv(V)

    @property
    def n_dofs(self) -> int:
        return 3 * self.fine_grid.n_nodes

    n_local = 9

    def dof(self, node: int, channel: int) -> int:
        return 3 * node + channel

    def end_node(self, end: str) -> int:
        return 0 if end == "left" else self.fine_grid.n_nodes - 1

    def element_dofs(self, e: int) -> np.ndarray:
        return np.arange(6 * e, 6 * e + 9)

    def shape(self, xi, order: int = 0) -> np.ndarray:
        return _monomial_derivs(xi, 2, order) @ self._inv / self.grid.h**order

    def channel_basis(self, xi, channel: int, order: int = 0) -> np.ndarray:
        """Rows acting on the 9 element dofs, shape (len(xi), 9)."""
        L = self.shape(xi, order)
        out = np.zeros((L.shape[0], 9))
        out[:, channel::3] = L
        return out

    locate = HermiteSpace.locate

    def evaluate(self, dofs: np.ndarray, channel: int, x, order: int = 0) -> np.ndarray:
        e, xi = self.locate(x)
        out = np.empty(len(e))
        for k in np.unique(e):
            mask = e == k
            out[mask] = self.channel_basis(xi[mask], channel, order) @ dofs[self.element_dofs(k)]
        return out

    def dof_map(self) -> dict:
        return {(ch, i, 0): self.dof(i, c) for i in range(self.fine_grid.n_nodes)
                for c, ch in enumerate(self.channels)}


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


class State(Protocol):
    def eval(self, channel: str, x, order: int = 0) -> np.ndarray: ...


class DiscreteState:
    """A finite-element function given by its full dof vector."""

    def __init__(self, space, dofs: np.ndarray):
        self.space = space
        self.dofs = np.asarray(dofs, dtype=float)

    def eval(self, channel: str, x, order: int = 0) -> np.ndarray:
        if isinstance(self.space, HermiteSpace):
            if channel != "w":
                raise InvalidParameterError(f"Euler-Bernoulli state has channel 'w', not {channel!r}")
            return self.space.evaluate(self.dofs, x, order)
        return self.space.evaluate(self.dofs, LagrangeP2Space.channels.index(channel), x, order)


class ExactState:
    """Closed-form state: channel -> [f, f', f'', ...] vectorised callables."""

    def __init__(self, derivatives: Mapping[str, Sequence[Callable]]):
        self.derivatives = {k: list(v) for k, v in derivatives.items()}

    def eval(self, channel: str, x, order: int = 0) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        try:
            f = self.derivatives[channel][order]
        except (KeyError, IndexError):
            raise InvalidParameterError(f"no derivative of order {order} for channel {channel!r}") from None
        return np.broadcast_to(np.asarray(f(x), dtype=float), x.shape).copy()


def _boundary_value(model: ModelKind, state: State, k: int, x: float) -> float:
    if model is EB:
        return float(state.eval("w", x, k)[0])
    return float(state.eval(model.channels[k], x, 0)[0])


def total_energy(model: ModelKind, state: State, loads: LoadCase, bcs: BoundaryConditions,
                 coeffs: BeamCoefficients, grid: Grid1D, quad_order: int = 8,
                 bc_tol: float = 1e-9) -> float:
    """``int(density) - 2*W_ext`` by element-wise Gauss quadrature of the state itself."""
    model = ModelKind.parse(model)
    L = grid.length
    for end, k, value in bcs.essential_channels():
        got = _boundary_value(model, state, k, 0.0 if end == "left" else L)
        if abs(got - value) > bc_tol * (1.0 + abs(value)):
            raise BoundaryConditionError(
                f"state violates essential condition {model.channels[k]}={value} at {end} end (has {got})"
            )
    rule = QuadratureRule.gauss(quad_order)
    x = (grid.nodes[:-1, None] + grid.h * rule.points[None, :]).ravel()
    wts = np.tile(rule.weights * grid.h, grid.n_elements)
    if model is EB:
        dens = eb_density(state.eval("w", x, 2), state.eval("w", x, 3), coeffs)
        work = np.sum(wts * loads.evaluate("f0", x) * state.eval("w", x, 0))
    else:
        u1, p, p1 = state.eval("u", x, 1), state.eval("p", x, 0), state.eval("p", x, 1)
        n, n1 = state.eval("n", x, 0), state.eval("n", x, 1)
        dens = timo_density(n, n1, u1 - p, p1 - n, coeffs)
        work = np.sum(wts * (loads.evaluate("f0", x) * state.eval("u", x, 0)
                             + loads.evaluate("f1", x) * p + loads.evaluate("f2", x) * n))
    for end, k, t in bcs.natural_channels():
        sign = -1.0 if end == "left" else 1.0
        work += sign * t * _boundary_value(model, state, k, 0.0 if end == "left" else L)
    return float(np.sum(wts * dens) - 2.0 * work)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def eb_element_matrix(space: HermiteSpace, coeffs: BeamCoefficients, rule: QuadratureRule) -> np.ndarray:
    """Matrix of int(b w''^2 + c w'''^2) over one element (no factor 2)."""
    B2 = space.basis(rule.points, 2)
    wts = rule.weights * space.grid.h
    A = coeffs.b * (B2.T * wts) @ B2
    if space.degree == 5:
        B3 = space.basis(rule.points, 3)
        A += coeffs.c * (B3.T * wts) @ B3
    return A


def timo_element_matrix(space: LagrangeP2Space, coeffs: BeamCoefficients, rule: QuadratureRule) -> np.ndarray:
    """Matrix of int(b n^2 + c n'^2 + d (u'-p)^2 + e (p'-n)^2) over one element."""
    xi = rule.points
    n0 = space.channel_basis(xi, 2)
    n1 = space.channel_basis(xi, 2, 1)
    theta = space.channel_basis(xi, 0, 1) - space.channel_basis(xi, 1)
    rel = space.channel_basis(xi, 1, 1) - n0
    wts = rule.weights * space.grid.h
    A = np.zeros((9, 9))
    for coef, B in ((coeffs.b, n0), (coeffs.c, n1), (coeffs.d, theta), (coeffs.e, rel)):
        A += coef * (B.T * wts) @ B
    return A


def check_problem(model: ModelKind, coeffs: BeamCoefficients, loads: LoadCase,
                   bcs: BoundaryConditions, grid: Grid1D) -> None:
    loads.check(model)
    if not coeffs.b > 0:
        raise InvalidParameterError("b = E*I2 must be positive")
    if model is TIMO:
        if not coeffs.d > 0:
            raise InvalidParameterError("d = G*I0 must be positive (d = 0 decouples u)")
        if coeffs.e == 0:
            for end, k, t in bcs.natural_channels():
                if k == 1 and t != 0:
                    raise BoundaryConditionError(
                        f"e = 0 removes the T1 channel but natural T1 = {t} is given at the {end} end"
                    )
    elif coeffs.c == 0:
        for end, cond in (("left", bcs.left[2]), ("right", bcs.right[2])):
            if isinstance(cond, Essential) or cond.traction != 0:
                raise BoundaryConditionError(
                    f"c = 0 drops the w'' channel; no w''/T2 data allowed ({end} end)"
                )
    validate_bcs(model, bcs, grid.length)
    if model is TIMO and coeffs.e == 0:
        raise SingularSystemError(
            "e = 0 leaves the shear-compatible (u, p) modes with p = u' unconstrained",
            mode="shear-compatible (u, p) modes",
        )


@dataclass(eq=False)
class DiscreteEnergy:
    """``E(v) = 1/2 v.K v - f.v + const`` over the free (non-essential) dofs."""

    model: ModelKind
    space: object
    stiffness: sp.csr_matrix
    load_vector: np.ndarray
    constant: float
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    full_stiffness: sp.csr_matrix
    full_load: np.ndarray

    @property
    def n_free(self) -> int:
        return len(self.free)

    def value(self, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        return float(0.5 * v @ (self.stiffness @ v) - self.load_vector @ v + self.constant)

    def expand(self, v: np.ndarray) -> np.ndarray:
        full = np.empty(self.space.n_dofs)
        full[self.free] = v
        full[self.fixed] = self.fixed_values
        return full

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full, dtype=float)[self.free]

    def state(self, v: np.ndarray) -> DiscreteState:
        return DiscreteState(self.space, self.expand(v))

    def dof_map(self) -> dict:
        return self.space.dof_map()


def make_space(model: ModelKind, grid: Grid1D, coeffs: BeamCoefficients, eb_degree: Optional[int] = None):
    if model is EB:
        return HermiteSpace(grid, eb_degree or (5 if coeffs.c > 0 else 3))
    return LagrangeP2Space(grid)


def load_vector(model: ModelKind, space, loads: LoadCase, bcs: BoundaryConditions,
                rule: QuadratureRule) -> np.ndarray:
    """Consistent vector of ``W_ext`` on the full dof set (natural tractions included)."""
    grid = space.grid
    if model is EB:
        loads_at = {"f0": space.basis(rule.points, 0)}
    else:
        loads_at = {f"f{k}": space.channel_basis(rule.points, k) for k in range(3)}
    conn = np.stack([space.element_dofs(e) for e in range(grid.n_elements)])
    ell = np.zeros(space.n_dofs)
    xq = grid.nodes[:-1, None] + grid.h * rule.points[None, :]
    wq = rule.weights * grid.h
    for name, B in loads_at.items():
        fq = loads.evaluate(name, xq) * wq  # (n_el, nq)
        np.add.at(ell, conn, fq @ B)
    for end, k, t in bcs.natural_channels():
        if model is EB and k >= space.per_node:
            continue  # cubic fallback: T2 already checked to be zero
        ell[space.dof(space.end_node(end), k)] += t if end == "right" else -t
    return ell


def assemble(model: ModelKind, grid: Grid1D, coeffs: BeamCoefficients, loads: LoadCase,
             bcs: BoundaryConditions, quad_order: int = 8, eb_degree: Optional[int] = None) -> DiscreteEnergy:
    """Galerkin form of the total potential with essential dofs eliminated."""
    model = ModelKind.parse(model)
    check_problem(model, coeffs, loads, bcs, grid)
    space = make_space(model, grid, coeffs, eb_degree)
    rule = QuadratureRule.gauss(quad_order)
    n_el = grid.n_elements
    if model is EB:
        Ae = eb_element_matrix(space, coeffs, rule)
    else:
        Ae = timo_element_matrix(space, coeffs, rule)
    nl = Ae.shape[0]
    conn = np.stack([space.element_dofs(e) for e in range(n_el)])
    rows = np.repeat(conn, nl, axis=1).ravel()
    cols = np.tile(conn, (1, nl)).ravel()
    K = sp.coo_matrix((np.tile(2.0 * Ae.ravel(), n_el), (rows, cols)),
                      shape=(space.n_dofs, space.n_dofs)).tocsr()
    f = 2.0 * load_vector(model, space, loads, bcs, rule)
    fixed, fixed_values = [], []
    for end, k, value in bcs.essential_channels():
        fixed.append(space.dof(space.end_node(end), k))
        fixed_values.append(value)
    fixed = np.array(fixed, dtype=int)
    fixed_values = np.array(fixed_values, dtype=float)
    order = np.argsort(fixed)
    fixed, fixed_values = fixed[order], fixed_values[order]
    free = np.setdiff1d(np.arange(space.n_dofs), fixed)
    K_ff = K[free][:, free].tocsr()
    K_fc = K[free][:, fixed]
    K_cc = K[fixed][:, fixed]
    reduced = f[free] - K_fc @ fixed_values
    const = 0.5 * fixed_values @ (K_cc @ fixed_values) - f[fixed] @ fixed_values
    return DiscreteEnergy(model, space, K_ff, reduced, float(const), free, fixed,
                          fixed_values, K, f)


def energy_gradient(disc: DiscreteEnergy, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (disc.n_free,):
        raise InvalidParameterError(f"expected {disc.n_free} free dofs, got {v.shape}")
    return disc.stiffness @ v - disc.load_vector
