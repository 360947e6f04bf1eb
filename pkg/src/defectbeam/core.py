"""Shared domain types: grids, sampled fields, coefficients, loads and boundary data."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Optional, Union

import numpy as np
from scipy.interpolate import CubicSpline


class DefectBeamError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(DefectBeamError, ValueError):
    pass


class BoundaryConditionError(DefectBeamError, ValueError):
    pass


class SingularSystemError(DefectBeamError):
    """The constrained problem keeps a zero-energy mode."""

    def __init__(self, message: str, mode: str = ""):
        super().__init__(message)
        self.mode = mode


class NotSPDError(SingularSystemError):
    pass


class SolverError(DefectBeamError):
    pass


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [0, length] with ``n_nodes`` nodes."""

    length: float
    n_nodes: int

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise InvalidParameterError(f"grid length must be positive, got {self.length}")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 3:
            raise InvalidParameterError(f"grid needs at least 3 nodes, got {self.n_nodes}")
        object.__setattr__(self, "n_nodes", int(self.n_nodes))

    @classmethod
    def from_elements(cls, length: float, n_elements: int) -> "Grid1D":
        return cls(length, n_elements + 1)

    @property
    def n_elements(self) -> int:
        return self.n_nodes - 1

    @property
    def h(self) -> float:
        return self.length / (self.n_nodes - 1)

    @property
    def nodes(self) -> np.ndarray:
        x = np.linspace(0.0, self.length, self.n_nodes)
        x[-1] = self.length
        return x

    def refined(self) -> "Grid1D":
        """Grid with every element split in two."""
        return Grid1D(self.length, 2 * self.n_nodes - 1)


def fornberg_weights(offsets: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights at 0 for the given (unit spacing) offsets.

    Fornberg's recursion; returns weights for derivative ``order``.
    """
    z = np.asarray(offsets, dtype=float)
    n = len(z)
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, z[0]
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, z[i]
        for j in range(i):
            c3 = z[i] - z[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def stencil_width(order: int, accuracy: int = 4) -> tuple[int, int]:
    """(centred width, one-sided width) giving at least ``accuracy`` order."""
    half = (order + accuracy - 1) // 2
    return 2 * half + 1, order + accuracy


@lru_cache(maxsize=None)
def _fd_rows(n: int, order: int, accuracy: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-node stencil start index and weights (unit spacing) for an n-node grid."""
    centred, one_sided = stencil_width(order, accuracy)
    half = centred // 2
    if n < one_sided:
        raise InvalidParameterError(
            f"derivative of order {order} needs at least {one_sided} nodes, grid has {n}"
        )
    width = one_sided if one_sided > centred else centred
    starts = np.empty(n, dtype=int)
    weights = np.empty((n, width))
    for i in range(n):
        if half <= i < n - half:
            # centred stencil padded with zero weights so every row has one width
            lo = i - half
            w = fornberg_weights(np.arange(lo, lo + centred) - i, order)
            lo = min(lo, n - width)
            row = np.zeros(width)
            row[i - half - lo : i - half - lo + centred] = w
        else:
            lo = 0 if i < half else n - width
            row = fornberg_weights(np.arange(lo, lo + width) - i, order)
        starts[i] = lo
        weights[i] = row
    starts.setflags(write=False)
    weights.setflags(write=False)
    return starts, weights


def finite_difference(values: np.ndarray, h: float, order: int, accuracy: int = 4) -> np.ndarray:
    """Derivative of nodal samples: centred stencils inside, one-sided at the ends."""
    values = np.asarray(values, dtype=float)
    if order == 0:
        return values.copy()
    starts, weights = _fd_rows(len(values), order, accuracy)
    idx = starts[:, None] + np.arange(weights.shape[1])[None, :]
    return np.einsum("ij,ij->i", weights, values[idx]) / h**order


@dataclass(frozen=True, eq=False)
class ScalarField1D:
    """Nodal samples of a scalar field on a uniform grid.

    ``derivative_values`` optionally carries exact nodal derivatives of
    orders 1, 2, ... (Hermite data); they take precedence over finite
    differences in :meth:`derivative`.
    """

    grid: Grid1D
    values: np.ndarray
    derivative_values: tuple = ()

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_nodes,):
            raise InvalidParameterError(
                f"field has {vals.shape} samples, grid has {self.grid.n_nodes} nodes"
            )
        derivs = tuple(np.array(d, dtype=float) for d in self.derivative_values)
        for arr in (vals, *derivs):
            if arr.shape != vals.shape:
                raise InvalidParameterError("derivative data must match the grid")
            if not np.all(np.isfinite(arr)):
                raise InvalidParameterError("field samples must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "derivative_values", derivs)

    @classmethod
    def from_function(cls, grid: Grid1D, func: Callable, derivatives: tuple = ()) -> "ScalarField1D":
        x = grid.nodes
        return cls(grid, _sample(func, x), tuple(_sample(d, x) for d in derivatives))

    @classmethod
    def zeros(cls, grid: Grid1D) -> "ScalarField1D":
        return cls(grid, np.zeros(grid.n_nodes))

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def diff(self, order: int = 1, accuracy: int = 4) -> "ScalarField1D":
        """Finite-difference derivative of the nodal values only."""
        return ScalarField1D(self.grid, finite_difference(self.values, self.grid.h, order, accuracy))

    def derivative(self, order: int = 1) -> "ScalarField1D":
        """Derivative using carried nodal derivatives where possible."""
        if order == 0:
            return self
        k = len(self.derivative_values)
        if order <= k:
            return ScalarField1D(self.grid, self.derivative_values[order - 1], self.derivative_values[order:])
        top = self.values if k == 0 else self.derivative_values[-1]
        return ScalarField1D(self.grid, finite_difference(top, self.grid.h, order - k))

    def _check(self, other: "ScalarField1D"):
        if other.grid != self.grid:
            raise InvalidParameterError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, ScalarField1D):
            self._check(other)
            return ScalarField1D(self.grid, self.values + other.values)
        return ScalarField1D(self.grid, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return ScalarField1D(self.grid, -self.values, tuple(-d for d in self.derivative_values))

    def __mul__(self, a):
        a = float(a)
        return ScalarField1D(self.grid, a * self.values, tuple(a * d for d in self.derivative_values))

    __rmul__ = __mul__

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def _sample(func, x):
    out = np.asarray(func(x), dtype=float)
    return np.broadcast_to(out, x.shape).copy()


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BeamCoefficients:
    """Constitutive scalars and cross-section moments.

    The energy coefficients are ``b = E*I2``, ``c = F*I4``, ``d = G*I0`` and
    ``e = H*I0``.
    """

    E: float
    F: float = 0.0
    G_shear: float = 0.0
    H: float = 0.0
    I0: float = 1.0
    I2: float = 1.0
    I4: float = 1.0
    l: float = 1.0

    def __post_init__(self):
        for name in ("E", "F", "G_shear", "H", "I0", "I2", "I4", "l"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InvalidParameterError(f"{name} must be finite and non-negative, got {v}")
            object.__setattr__(self, name, float(v))

    @classmethod
    def from_stiffness(cls, b: float, c: float = 0.0, d: float = 0.0, e: float = 0.0) -> "BeamCoefficients":
        """Direct (b, c, d, e) input with unit moments."""
        return cls(E=b, F=c, G_shear=d, H=e)

    @property
    def b(self) -> float:
        return self.E * self.I2

    @property
    def c(self) -> float:
        return self.F * self.I4

    @property
    def d(self) -> float:
        return self.G_shear * self.I0

    @property
    def e(self) -> float:
        return self.H * self.I0

    def stiffness(self) -> dict:
        return {"b": self.b, "c": self.c, "d": self.d, "e": self.e}


def make_rect_section(E, F, G_shear, H, l, L=None) -> BeamCoefficients:
    """Coefficients for a rectangular section of thickness ``l`` centred on the axis.

    I0 = l, I2 = l^3/12, I4 = l^5/80 (integrals of 1, Y^2, Y^4 over [-l/2, l/2]).
    """
    if not l > 0:
        raise InvalidParameterError(f"thickness must be positive, got {l}")
    if not E > 0:
        raise InvalidParameterError(f"E must be positive, got {E}")
    if L is not None and not l < L:
        raise InvalidParameterError(f"thickness {l} must be smaller than the length {L}")
    return BeamCoefficients(E, F, G_shear, H, I0=l, I2=l**3 / 12.0, I4=l**5 / 80.0, l=l)


# ---------------------------------------------------------------------------
# model, boundary conditions, loads
# ---------------------------------------------------------------------------


class ModelKind(enum.Enum):
    EULER_BERNOULLI = "euler-bernoulli"
    TIMOSHENKO = "timoshenko"

    @property
    def channels(self) -> tuple[str, str, str]:
        return ("w", "w1", "w2") if self is ModelKind.EULER_BERNOULLI else ("u", "p", "n")

    @property
    def load_names(self) -> tuple[str, ...]:
        return ("f0",) if self is ModelKind.EULER_BERNOULLI else ("f0", "f1", "f2")

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"eb": cls.EULER_BERNOULLI, "euler-bernoulli": cls.EULER_BERNOULLI,
                   "timo": cls.TIMOSHENKO, "timoshenko": cls.TIMOSHENKO}
        if key not in aliases:
            raise InvalidParameterError(f"unknown model kind {value!r}")
        return aliases[key]


TRACTIONS = ("T0", "T1", "T2")

_CHANNEL_INDEX = {"w": 0, "w1": 1, "w2": 2, "u": 0, "p": 1, "n": 2}
_TRACTION_INDEX = {"T0": 0, "T1": 1, "T2": 2}


@dataclass(frozen=True)
class Essential:
    value: float = 0.0


@dataclass(frozen=True)
class Natural:
    traction: float = 0.0


Condition = Union[Essential, Natural]
END_NAMES = ("left", "right")


@dataclass(frozen=True)
class BoundaryConditions:
    """One condition per channel (0, 1, 2) per end.

    Channel k pairs the kinematic quantity (EB: w, w', w''; Timoshenko: u, p,
    n) with the traction T_k.  A natural condition prescribes the value of
    the traction expression at that end, with the same formula at both ends.
    """

    left: tuple = (Natural(), Natural(), Natural())
    right: tuple = (Natural(), Natural(), Natural())

    def __post_init__(self):
        for end in END_NAMES:
            conds = tuple(getattr(self, end))
            if len(conds) != 3 or not all(isinstance(c, (Essential, Natural)) for c in conds):
                raise BoundaryConditionError(f"{end} end needs exactly three Essential/Natural entries")
            object.__setattr__(self, end, conds)

    @classmethod
    def build(cls, left: Optional[Mapping[str, float]] = None,
              right: Optional[Mapping[str, float]] = None) -> "BoundaryConditions":
        """From name -> value maps; kinematic names are essential, T0/T1/T2 natural.

        Unlisted channels default to a zero natural condition.
        """
        return cls(_parse_end(left or {}, "left"), _parse_end(right or {}, "right"))

    @classmethod
    def cantilever(cls, tip: Optional[Mapping[str, float]] = None) -> "BoundaryConditions":
        return cls.build({"w": 0.0, "w1": 0.0}, tip)

    def end(self, which: str) -> tuple:
        return self.left if which == "left" else self.right

    def essential_channels(self) -> list[tuple[str, int, float]]:
        return [(end, k, c.value) for end in END_NAMES
                for k, c in enumerate(self.end(end)) if isinstance(c, Essential)]

    def natural_channels(self) -> list[tuple[str, int, float]]:
        return [(end, k, c.traction) for end in END_NAMES
                for k, c in enumerate(self.end(end)) if isinstance(c, Natural)]

    def describe(self, model: ModelKind) -> dict:
        out = {}
        for end in END_NAMES:
            out[end] = {}
            for k, c in enumerate(self.end(end)):
                if isinstance(c, Essential):
                    out[end][model.channels[k]] = c.value
                else:
                    out[end][TRACTIONS[k]] = c.traction
        return out


def _parse_end(values: Mapping[str, float], end: str) -> tuple:
    conds: list = [None, None, None]
    for key, value in values.items():
        if key in _CHANNEL_INDEX:
            k, cond = _CHANNEL_INDEX[key], Essential(float(value))
        elif key in _TRACTION_INDEX:
            k, cond = _TRACTION_INDEX[key], Natural(float(value))
        else:
            raise BoundaryConditionError(f"unknown boundary channel {key!r} at {end} end")
        if conds[k] is not None:
            raise BoundaryConditionError(
                f"channel {k} at {end} end given twice (essential and natural are exclusive)"
            )
        conds[k] = cond
    return tuple(c if c is not None else Natural() for c in conds)


# rigid modes evaluated per channel at x: (value, first, second) of the mode
_RIGID_MODES = {
    ModelKind.EULER_BERNOULLI: (
        ("rigid translation (w -> w + a)", lambda x: (1.0, 0.0, 0.0)),
        ("rigid rotation (w -> w + a*x)", lambda x: (x, 1.0, 0.0)),
    ),
    ModelKind.TIMOSHENKO: (
        ("u-translation (u -> u + a)", lambda x: (1.0, 0.0, 0.0)),
        ("combined (u, p) rotation (u -> u + a*x, p -> p + a)", lambda x: (x, 1.0, 0.0)),
    ),
}


def validate_bcs(model: ModelKind, bcs: BoundaryConditions, length: float = 1.0) -> None:
    """Raise :class:`SingularSystemError` if a rigid mode survives the essential data."""
    modes = _RIGID_MODES[model]
    rows = []
    for end, k, _ in bcs.essential_channels():
        x = 0.0 if end == "left" else length
        rows.append([mode(x)[k] for _, mode in modes])
    A = np.array(rows, dtype=float).reshape(-1, 2)
    if A.shape[0] and np.linalg.matrix_rank(A) == 2:
        return
    if A.shape[0] == 0 or not np.any(A[:, 0]):
        name = modes[0][0]
    else:
        name = modes[1][0]
    raise SingularSystemError(f"boundary conditions leave a zero-energy mode: {name}", mode=name)


LoadLike = Union[None, float, Callable, ScalarField1D]


def _as_callable(f: LoadLike) -> Optional[Callable]:
    if f is None:
        return None
    if isinstance(f, ScalarField1D):
        spline = CubicSpline(f.x, f.values)
        return lambda x: spline(np.asarray(x, dtype=float))
    if callable(f):
        return f
    value = float(f)
    return lambda x: np.full(np.shape(x), value)


@dataclass(frozen=True, eq=False)
class LoadCase:
    """Bulk force densities f0 (on w/u), f1 (on p) and f2 (on n).

    Each entry is a constant, a vectorised callable of x, or a sampled
    :class:`ScalarField1D` (interpolated with a cubic spline).
    """

    f0: LoadLike = 0.0
    f1: LoadLike = None
    f2: LoadLike = None
    _funcs: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self._funcs.update({name: _as_callable(getattr(self, name)) for name in ("f0", "f1", "f2")})

    def check(self, model: ModelKind) -> None:
        if model is ModelKind.EULER_BERNOULLI and (self.f1 is not None or self.f2 is not None):
            raise InvalidParameterError("f1 and f2 must be absent for the Euler-Bernoulli model")

    def evaluate(self, name: str, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        f = self._funcs[name]
        if f is None:
            return np.zeros_like(x)
        return np.broadcast_to(np.asarray(f(x), dtype=float), x.shape).copy()

    def sample(self, name: str, grid: Grid1D) -> ScalarField1D:
        return ScalarField1D(grid, self.evaluate(name, grid.nodes))
