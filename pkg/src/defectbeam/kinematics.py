"""Two-scale fields, linearised deformation measures and defect densities.

Conventions
-----------
Indices are 1-based in the names (``N112`` is N^1_{12}) and 0-based in
arrays.  The connection is stored as ``N[i][j][k]`` with ``k`` the
derivative direction: the k=1 block equals dP/dX and the k=2 block has the
single entry ``N^1_{12} = -n``.  With this sign choice an Euler-Bernoulli
beam gives ``n = w''`` and

    T^1_{12} = N^1_{12} - N^1_{21} = p' - n,
    R^1_{112} = d_Y N^1_{11} - d_X N^1_{12} = n'.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Optional

import numpy as np

from .core import Grid1D, InvalidParameterError, ModelKind, ScalarField1D

EB = ModelKind.EULER_BERNOULLI
TIMO = ModelKind.TIMOSHENKO

CONVENTION = (
    "N[i][j][k], k = derivative direction; N^1_12 = -n; "
    "T^i_jk = N^i_jk - N^i_kj; R^i_j12 = d_Y N^i_j1 - d_X N^i_j2 (linearised, d_Y = 0)"
)


@dataclass(frozen=True, eq=False)
class MicroDistortion:
    """Antisymmetric micro-distortion ``P = [[0, -p], [p, 0]]``."""

    p: ScalarField1D

    @property
    def grid(self) -> Grid1D:
        return self.p.grid

    def matrix(self) -> np.ndarray:
        out = np.zeros((self.grid.n_nodes, 2, 2))
        out[:, 0, 1] = -self.p.values
        out[:, 1, 0] = self.p.values
        return out

    def sym(self) -> np.ndarray:
        P = self.matrix()
        return 0.5 * (P + P.transpose(0, 2, 1))


@dataclass(frozen=True, eq=False)
class Connection:
    """Linearised connection built from ``p`` (with its X-derivative) and ``n``."""

    p: ScalarField1D
    n: ScalarField1D

    @property
    def grid(self) -> Grid1D:
        return self.n.grid

    def component(self, i: int, j: int, k: int, dx: int = 0) -> np.ndarray:
        """``d_X^dx N^i_{jk}`` with 1-based indices."""
        if k == 1:
            if (i, j) == (1, 2):
                return -self.p.derivative(1 + dx).values
            if (i, j) == (2, 1):
                return self.p.derivative(1 + dx).values
        elif (i, j) == (1, 1):
            return -self.n.derivative(dx).values
        return np.zeros(self.grid.n_nodes)

    def array(self) -> np.ndarray:
        out = np.zeros((self.grid.n_nodes, 2, 2, 2))
        for i, j, k in np.ndindex(2, 2, 2):
            out[:, i, j, k] = self.component(i + 1, j + 1, k + 1)
        return out


class TwoScaleFields(NamedTuple):
    ubar: tuple  # (u^1, u^2) on the axis
    P: MicroDistortion
    N: Connection


@dataclass(frozen=True, eq=False)
class DeformationMeasures:
    sym_P: np.ndarray
    theta: ScalarField1D
    n_measure: ScalarField1D
    rel_distortion: ScalarField1D


@dataclass(frozen=True, eq=False)
class DefectFields:
    torsion_T112: ScalarField1D
    curvature_R1112: ScalarField1D
    connection: Optional[Connection] = None
    convention: str = CONVENTION

    def torsion_tensor(self) -> np.ndarray:
        """All components ``T^i_{jk}``, array shape (nodes, 2, 2, 2)."""
        N = self.connection.array()
        return N - N.transpose(0, 1, 3, 2)

    def curvature_tensor(self) -> np.ndarray:
        """All components ``R^i_{jkl}`` (linearised, no Y dependence), shape (nodes, 2, 2, 2, 2)."""
        Nc = self.connection
        dN = np.zeros((Nc.grid.n_nodes, 2, 2, 2, 2))  # [..., i, j, k, direction]
        for i, j, k in np.ndindex(2, 2, 2):
            dN[:, i, j, k, 0] = Nc.component(i + 1, j + 1, k + 1, dx=1)
        # R^i_{jkl} = d_l N^i_{jk} - d_k N^i_{jl}
        return dN - dN.transpose(0, 1, 2, 4, 3)


def _require(scalars: Mapping[str, ScalarField1D], names) -> list:
    missing = [n for n in names if n not in scalars]
    if missing:
        raise InvalidParameterError(f"missing channel(s) {missing}")
    fields = [scalars[n] for n in names]
    if any(f.grid != fields[0].grid for f in fields):
        raise InvalidParameterError("scalar fields must share one grid")
    return fields


def _eb_pn(w: ScalarField1D) -> tuple[ScalarField1D, ScalarField1D]:
    # p and n share the same nodal w'' data, so p' - n cancels exactly
    return w.derivative(1), w.derivative(2)


def build_fields(model, scalars: Mapping[str, ScalarField1D]) -> TwoScaleFields:
    """Axis displacement, micro-distortion and connection from the 1D fields."""
    model = ModelKind.parse(model)
    if model is EB:
        (w,) = _require(scalars, ("w",))
        p, n = _eb_pn(w)
    else:
        w, p, n = _require(scalars, ("u", "p", "n"))
    zero = ScalarField1D.zeros(w.grid)
    return TwoScaleFields((zero, w), MicroDistortion(p), Connection(p, n))


def reconstruct_displacement(ubar, P: MicroDistortion, Y, thickness: Optional[float] = None) -> np.ndarray:
    """``u(X, Y) = ubar(X) + P(X) (0, Y)``; shape (nodes, len(Y), 2)."""
    Y = np.atleast_1d(np.asarray(Y, dtype=float))
    if thickness is not None and np.any(np.abs(Y) > 0.5 * thickness * (1 + 1e-12)):
        raise InvalidParameterError(f"Y samples must lie within [-{thickness / 2}, {thickness / 2}]")
    if ubar[0].grid != P.grid or ubar[1].grid != P.grid:
        raise InvalidParameterError("ubar and P live on different grids")
    out = np.empty((P.grid.n_nodes, len(Y), 2))
    out[..., 0] = ubar[0].values[:, None] - P.p.values[:, None] * Y[None, :]
    out[..., 1] = ubar[1].values[:, None]
    return out


@dataclass(frozen=True, eq=False)
class PlaneGradient:
    """In-plane displacement gradient and its symmetric part.

    ``sym`` keeps the unnormalised convention: off-diagonal entries are
    ``G12 + G21``.
    """

    full: np.ndarray
    sym: np.ndarray


def plane_gradient(model, scalars: Mapping[str, ScalarField1D], Y: float) -> PlaneGradient:
    model = ModelKind.parse(model)
    fields = build_fields(model, scalars)
    w = fields.ubar[1]
    p = fields.P.p
    m = w.grid.n_nodes
    G = np.zeros((m, 2, 2))
    G[:, 0, 0] = -p.derivative(1).values * Y
    G[:, 0, 1] = -p.values
    G[:, 1, 0] = w.derivative(1).values
    S = G.copy()
    S[:, 0, 1] = S[:, 1, 0] = G[:, 0, 1] + G[:, 1, 0]
    return PlaneGradient(G, S)


def deformation_measures(model, scalars: Mapping[str, ScalarField1D]) -> DeformationMeasures:
    """``sym P``, ``theta = u' - p``, ``n`` and ``p' - n``."""
    model = ModelKind.parse(model)
    fields = build_fields(model, scalars)
    p, n = fields.N.p, fields.N.n
    w = fields.ubar[1]
    grid = w.grid
    theta = ScalarField1D(grid, w.derivative(1).values - p.values)  # exactly 0 for EB
    rel = ScalarField1D(grid, p.derivative(1).values - n.values)
    return DeformationMeasures(fields.P.sym(), theta, ScalarField1D(grid, n.values), rel)


def defect_fields(N: Connection) -> DefectFields:
    """Dislocation (torsion) and disclination (curvature) densities of a connection."""
    torsion = N.component(1, 1, 2) - N.component(1, 2, 1)
    curvature = -N.component(1, 1, 2, dx=1)  # d_Y N^1_11 = 0
    return DefectFields(ScalarField1D(N.grid, torsion), ScalarField1D(N.grid, curvature), N)
