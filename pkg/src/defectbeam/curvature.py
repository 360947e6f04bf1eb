"""Curvature coordinates for the Euler-Bernoulli element spaces.

The beam energy only sees ``w''`` and ``w'''``, so the Hermite space is
parameterised by ``z = (w(0), w'(0), kappa)`` with ``w'' = kappa``:

* quintic C2 Hermite  <->  kappa continuous piecewise cubic,
* cubic C1 Hermite    <->  kappa discontinuous piecewise linear.

In these coordinates the stiffness is ``2 (b M + c S)`` for ``kappa``, a
second-order operator, whereas the nodal Hermite stiffness behaves like
h^-6.  Solving here keeps round-off at the level of double precision on
fine meshes.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .core import BeamCoefficients, BoundaryConditions, LoadCase, SingularSystemError
from .energy import EB, HermiteSpace, QuadratureRule, load_vector

# local curvature basis on [0, 1] as monomial coefficients: nodal hats, then
# hierarchical bubbles (quintic case only); rational so that the reference
# matrices are exact
_KAPPA_COEFFS = {
    3: ((1, -1), (0, 1)),
    5: ((1, -1), (0, 1), (0, 4, -4), (0, 10, -30, 20)),
}


def _kappa_basis(degree: int, xi: np.ndarray, order: int = 0) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    polys = [np.polynomial.Polynomial(c).deriv(order) for c in _KAPPA_COEFFS[degree]]
    return np.stack([p(xi) for p in polys], axis=-1)


def _exact_moments(degree: int) -> tuple[list, list, list, list]:
    """Exact reference mass, derivative and moment integrals on [0, 1]."""
    polys = [[Fraction(a) for a in c] for c in _KAPPA_COEFFS[degree]]

    def integral(a, b=(Fraction(1),)):
        return sum(x * y / (i + j + 1) for i, x in enumerate(a) for j, y in enumerate(b))

    def deriv(a):
        return [i * x for i, x in enumerate(a)][1:] or [Fraction(0)]

    mass = [[integral(_mul(p, q)) for q in polys] for p in polys]
    stiff = [[integral(_mul(deriv(p), deriv(q))) for q in polys] for p in polys]
    m0 = [integral(p) for p in polys]
    m1 = [integral(p, (Fraction(1), Fraction(-1))) for p in polys]
    return mass, stiff, m0, m1


def _mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _to_array(rows, dtype) -> np.ndarray:
    return np.array([[dtype(r.numerator) / dtype(r.denominator) for r in row] for row in rows], dtype=dtype)


class CurvatureSpace:
    """Curvature coordinates of a :class:`HermiteSpace`; ``z[0:2] = (w(0), w'(0))``."""

    def __init__(self, hermite: HermiteSpace):
        self.hermite = hermite
        self.grid = hermite.grid
        self.degree = hermite.degree
        n_el = self.grid.n_elements
        if self.degree == 5:
            # node-major: kappa_i, then the two bubbles of element i
            self.n_kappa = 3 * n_el + 1
            self._conn = np.array([[3 * e, 3 * e + 3, 3 * e + 1, 3 * e + 2] for e in range(n_el)])
        else:
            self.n_kappa = 2 * n_el
            self._conn = np.array([[2 * e, 2 * e + 1] for e in range(n_el)])
        self.n_z = 2 + self.n_kappa

    def element_dofs(self, e: int) -> np.ndarray:
        """Indices into the kappa vector (not z)."""
        return self._conn[e]

    def stiffness(self, coeffs: BeamCoefficients, dtype=float) -> sp.csr_matrix:
        """``2 (b M + c S)`` on the kappa dofs, from exact reference integrals.

        ``dtype=np.longdouble`` gives the matrix used for extended-precision
        residuals in iterative refinement.
        """
        mass, stiff, _, _ = _exact_moments(self.degree)
        h = dtype(self.grid.h)
        Ae = dtype(2) * dtype(coeffs.b) * h * _to_array(mass, dtype)
        if self.degree == 5:
            Ae = Ae + dtype(2) * dtype(coeffs.c) / h * _to_array(stiff, dtype)
        nl = Ae.shape[0]
        n_el = self.grid.n_elements
        rows = np.repeat(self._conn, nl, axis=1).ravel()
        cols = np.tile(self._conn, (1, nl)).ravel()
        return sp.coo_matrix((np.tile(Ae.ravel(), n_el), (rows, cols)),
                             shape=(self.n_kappa, self.n_kappa), dtype=dtype).tocsr()

    def transfer(self) -> np.ndarray:
        """Dense map ``T`` with Hermite nodal dofs ``v = T z``.

        Built from the exact element recurrences
        ``w'(x+h) = w'(x) + int kappa`` and
        ``w(x+h) = w(x) + h w'(x) + int (x+h-s) kappa(s) ds``.
        """
        h = self.grid.h
        n_nodes = self.grid.n_nodes
        _, _, m0, m1 = _exact_moments(self.degree)
        m0 = _to_array([m0], float)[0]
        m1 = _to_array([m1], float)[0]
        W = np.zeros((n_nodes, self.n_z))
        W1 = np.zeros((n_nodes, self.n_z))
        W[0, 0] = 1.0
        W1[0, 1] = 1.0
        for e in range(self.grid.n_elements):
            idx = 2 + self._conn[e]
            W1[e + 1] = W1[e]
            W1[e + 1, idx] += h * m0
            W[e + 1] = W[e] + h * W1[e]
            W[e + 1, idx] += h * h * m1
        per = self.hermite.per_node
        T = np.zeros((per * n_nodes, self.n_z))
        T[0::per] = W
        T[1::per] = W1
        if per == 3:
            nodes = np.arange(n_nodes)
            T[per * nodes + 2, 2 + 3 * nodes] = 1.0
        return T

    def kappa_at(self, kappa: np.ndarray, x, order: int = 0) -> np.ndarray:
        """Evaluate the curvature (or its derivative) from the kappa dofs."""
        e, xi = self.hermite.locate(x)
        B = _kappa_basis(self.degree, xi, order) / self.grid.h**order
        return np.einsum("ij,ij->i", B, kappa[self._conn[e]])


@dataclass(eq=False)
class ConstrainedProblem:
    """``min 1/2 k.K k - f.k`` over free kappa dofs subject to ``D k = g``.

    ``D`` holds the essential conditions that stay non-local after the
    rigid coordinates (w(0), w'(0)) are eliminated; it has at most two rows.
    """

    K: sp.csr_matrix
    f: np.ndarray
    D: np.ndarray
    g: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    rigid_map: np.ndarray  # a = rigid_offset - rigid_map @ kappa
    rigid_offset: np.ndarray
    K_ext: Optional[sp.csr_matrix] = None
    f_ext: Optional[np.ndarray] = None

    def expand(self, kappa_free: np.ndarray, n_kappa: int) -> np.ndarray:
        kappa = np.empty(n_kappa)
        kappa[self.free] = kappa_free
        kappa[self.fixed] = self.fixed_values
        a = self.rigid_offset - self.rigid_map @ kappa
        return np.concatenate([a, kappa])


def build_constrained_problem(space: CurvatureSpace, coeffs: BeamCoefficients, loads: LoadCase,
                              bcs: BoundaryConditions, T: np.ndarray,
                              quad_order: int = 8) -> ConstrainedProblem:
    herm = space.hermite
    ell = load_vector(EB, herm, loads, bcs, QuadratureRule.gauss(quad_order))
    lz = 2.0 * (T.T @ ell)
    dofs, vals = [], []
    for end, k, value in bcs.essential_channels():
        dofs.append(herm.dof(herm.end_node(end), k))
        vals.append(value)
    C = T[dofs]
    g = np.array(vals, dtype=float)

    # two rows fixing the rigid coordinates
    best, pair = 0.0, None
    for i, j in itertools.combinations(range(len(dofs)), 2):
        det = abs(np.linalg.det(C[[i, j], :2]))
        if det > best * (1 + 1e-12):
            best, pair = det, (i, j)
    if pair is None or best < 1e-12 * max(1.0, space.grid.length):
        raise SingularSystemError("essential data do not fix the rigid modes", mode="rigid")
    sel = list(pair)
    Pinv = np.linalg.inv(C[sel, :2])
    rigid_map = Pinv @ C[sel, 2:]
    rigid_offset = Pinv @ g[sel]

    rest = [i for i in range(len(dofs)) if i not in sel]
    rows = C[rest, 2:] - C[rest, :2] @ rigid_map
    rhs = g[rest] - C[rest, :2] @ rigid_offset

    n_k = space.n_kappa
    fixed, fixed_values, dense, dense_rhs = [], [], [], []
    for row, val in zip(rows, rhs):
        nz = np.flatnonzero(np.abs(row) > 1e-14 * np.max(np.abs(row)))
        if len(nz) == 1:
            fixed.append(int(nz[0]))
            fixed_values.append(val / row[nz[0]])
        else:
            dense.append(row)
            dense_rhs.append(val)
    fixed = np.array(fixed, dtype=int)
    fixed_values = np.array(fixed_values, dtype=float)
    free = np.setdiff1d(np.arange(n_k), fixed)

    f = lz[2:] - rigid_map.T @ lz[:2]
    K = space.stiffness(coeffs, np.longdouble)
    K_ext = K[free][:, free].tocsr()
    f_ext = f[free].astype(np.longdouble) - K[free][:, fixed] @ fixed_values.astype(np.longdouble)
    D = np.array(dense, dtype=float).reshape(-1, n_k)
    g_dense = np.array(dense_rhs, dtype=float) - D[:, fixed] @ fixed_values
    return ConstrainedProblem(K_ext.astype(float), f_ext.astype(float), D[:, free], g_dense, free, fixed,
                              fixed_values, rigid_map, rigid_offset, K_ext, f_ext)
