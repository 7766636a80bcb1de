"""Chebyshev systems on [-1, 1], sampling grids and collocation matrices.

A Chebyshev system is an n-dimensional space of continuous functions in
which interpolation at any n distinct points is uniquely solvable. Every
system built here carries the constant function as its first basis element.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg
from numpy.polynomial import chebyshev as npcheb

from optrecovery.exceptions import ChebyshevPropertyError

KINDS = ("polynomial", "trigonometric", "exponential", "custom")

#: Defaults for the randomized Chebyshev-property self-check.
CHECK_SAMPLES = 100
DET_THRESHOLD = 1e-12
CHECK_SEED = 20240917


def _as_points(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return np.atleast_1d(arr).ravel(), arr.ndim == 0


@dataclass(frozen=True, eq=False)
class ChebyshevSystem:
    """Basis ``(v_0, ..., v_{n-1})`` of a Chebyshev space with ``v_0 == 1``.

    Use :func:`make_system` rather than the constructor; it resolves default
    parameters and runs the Chebyshev-property self-check.
    """

    kind: str
    n: int
    params: tuple[float, ...] = ()
    functions: tuple[Callable, ...] | None = field(default=None, repr=False)

    def basis(self, x) -> np.ndarray:
        """Evaluate all basis functions.

        Returns shape ``(n,)`` for a scalar ``x`` and ``(n, p)`` for ``p`` points.
        """
        pts, scalar = _as_points(x)
        if self.kind == "polynomial":
            out = npcheb.chebvander(pts, self.n - 1).T
        elif self.kind == "trigonometric":
            theta = (pts + 1.0) * (0.5 * self.params[0])
            out = np.empty((self.n, pts.size))
            out[0] = 1.0
            for j in range(1, self.n):
                freq = (j + 1) // 2
                out[j] = np.cos(freq * theta) if j % 2 else np.sin(freq * theta)
        elif self.kind == "exponential":
            out = np.empty((self.n, pts.size))
            out[0] = 1.0
            out[1:] = np.exp(np.outer(self.params, pts))
        else:
            out = np.empty((self.n, pts.size))
            out[0] = 1.0
            for j, func in enumerate(self.functions, start=1):
                out[j] = np.broadcast_to(np.asarray(func(pts), dtype=float), pts.shape)
        out = np.ascontiguousarray(out)
        return out[:, 0] if scalar else out

    def evaluate(self, j: int, x: float) -> float:
        """Value of basis function ``v_j`` (0-based) at ``x``."""
        if not 0 <= j < self.n:
            raise IndexError(f"basis index {j} out of range for n={self.n}")
        return float(self.basis(float(x))[j])

    def descriptor(self) -> dict:
        """JSON-ready description, sufficient to rebuild the system."""
        if self.kind == "custom":
            raise ValueError("custom systems cannot be described as data")
        return {"kind": self.kind, "n": self.n, "params": [float(p) for p in self.params]}


def make_system(
    kind: str,
    n: int,
    params: Sequence[float] = (),
    *,
    functions: Sequence[Callable] | None = None,
    check_samples: int = CHECK_SAMPLES,
    det_threshold: float = DET_THRESHOLD,
) -> ChebyshevSystem:
    """Build and self-check a Chebyshev system.

    Parameters
    ----------
    kind : {"polynomial", "trigonometric", "exponential", "custom"}
        ``polynomial`` uses ``1, T_1, ..., T_{n-1}``. ``exponential`` uses
        ``1, exp(r_1 x), ..., exp(r_{n-1} x)`` with rates from ``params``
        (default ``1, -1, 2, -2, ...``). ``trigonometric`` uses
        ``1, cos t, sin t, cos 2t, ...`` truncated at n, with
        ``t = (x + 1) * w / 2`` running over ``[0, w]``; ``w = params[0]``
        defaults to ``pi / (n // 2)``. ``custom`` takes the n-1 non-constant
        basis functions through ``functions``; the constant is prepended.
    n : int
        Dimension, at least 3.
    check_samples, det_threshold : optional
        Knobs of :func:`check_chebyshev_property`.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    if int(n) != n or n < 3:
        raise ValueError(f"dimension must be an integer >= 3, got {n}")
    n = int(n)
    params = tuple(float(p) for p in params)
    funcs = None

    if kind == "polynomial":
        if params:
            raise ValueError("polynomial systems take no parameters")
    elif kind == "exponential":
        if not params:
            params = tuple(float((k // 2 + 1) * (-1) ** k) for k in range(n - 1))
        if len(params) != n - 1:
            raise ValueError(f"exponential system of dimension {n} needs {n - 1} rates")
        if any(r == 0.0 for r in params):
            raise ValueError("exponential rates must be nonzero")
        if len(set(params)) != len(params):
            raise ValueError("exponential rates must be distinct")
    elif kind == "trigonometric":
        if not params:
            params = (math.pi / (n // 2),)
        if len(params) != 1 or not params[0] > 0:
            raise ValueError("trigonometric systems take one positive width parameter")
    else:
        if functions is None or len(functions) != n - 1:
            raise ValueError(f"custom system of dimension {n} needs {n - 1} functions")
        funcs = tuple(functions)

    system = ChebyshevSystem(kind=kind, n=n, params=params, functions=funcs)
    check_chebyshev_property(system, samples=check_samples, threshold=det_threshold)
    return system


def _stratified_points(rng: np.random.Generator, n: int) -> np.ndarray:
    # one point per cell, kept off the cell borders so gaps stay bounded below
    jitter = rng.uniform(0.05, 0.95, size=n)
    return -1.0 + (np.arange(n) + jitter) * (2.0 / n)


def check_chebyshev_property(
    system: ChebyshevSystem,
    samples: int = CHECK_SAMPLES,
    threshold: float = DET_THRESHOLD,
    seed: int = CHECK_SEED,
) -> None:
    """Randomized test that collocation determinants never vanish or flip sign.

    Each sampled pointset is strictly increasing; rows are equilibrated by
    their max-abs entry before taking the determinant. Raises
    :class:`ChebyshevPropertyError` on failure. Passing is evidence, not proof.
    """
    rng = np.random.default_rng(seed)
    sign0 = None
    for _ in range(samples):
        pts = _stratified_points(rng, system.n)
        mat = system.basis(pts)
        scale = np.max(np.abs(mat), axis=1, keepdims=True)
        if np.any(scale == 0) or not np.all(np.isfinite(mat)):
            raise ChebyshevPropertyError("basis has a vanishing or non-finite row")
        sign, logdet = np.linalg.slogdet(mat / scale)
        if sign == 0 or logdet <= math.log(threshold):
            raise ChebyshevPropertyError(
                f"collocation determinant below {threshold:g} at points {pts.tolist()}"
            )
        if sign0 is None:
            sign0 = sign
        elif sign != sign0:
            raise ChebyshevPropertyError(
                f"collocation determinant changes sign at points {pts.tolist()}"
            )


class Subinterval(NamedTuple):
    left: float
    right: float
    left_index: int | None  # sample index of the left endpoint, None for an added -1
    right_index: int | None


class SamplingGrid:
    """Strictly increasing sample points in [-1, 1].

    The grid is completed with -1 and 1 when these are not sample points; the
    subintervals are the consecutive pairs of the completed list. Indices are
    0-based throughout.
    """

    def __init__(self, points: Sequence[float]):
        pts = np.array(points, dtype=float).ravel()
        if pts.size == 0:
            raise ValueError("grid needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if pts[0] < -1.0 or pts[-1] > 1.0:
            raise ValueError("grid points must lie in [-1, 1]")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        pts.setflags(write=False)
        self.points = pts

        aug = list(pts)
        self._offset = 0
        if pts[0] > -1.0:
            aug.insert(0, -1.0)
            self._offset = 1
        if pts[-1] < 1.0:
            aug.append(1.0)
        self.augmented = np.array(aug)
        self.augmented.setflags(write=False)

        subs = []
        for pos in range(len(aug) - 1):
            li = pos - self._offset
            ri = li + 1
            subs.append(Subinterval(
                float(aug[pos]), float(aug[pos + 1]),
                li if 0 <= li < pts.size else None,
                ri if 0 <= ri < pts.size else None,
            ))
        self.subintervals = tuple(subs)

    @classmethod
    def equispaced(cls, m: int) -> SamplingGrid:
        return cls(np.linspace(-1.0, 1.0, m))

    @classmethod
    def chebyshev(cls, m: int) -> SamplingGrid:
        """Chebyshev points of the first kind (roots of T_m)."""
        return cls(-np.cos((2 * np.arange(m) + 1) * np.pi / (2 * m)))

    @classmethod
    def random(cls, m: int, seed: int) -> SamplingGrid:
        rng = np.random.default_rng(seed)
        while True:
            pts = np.sort(rng.uniform(-1.0, 1.0, size=m))
            if np.all(np.diff(pts) > 0):
                return cls(pts)

    @property
    def m(self) -> int:
        return self.points.size

    def __len__(self) -> int:
        return self.m

    def __eq__(self, other) -> bool:
        return isinstance(other, SamplingGrid) and np.array_equal(self.points, other.points)

    def __repr__(self) -> str:
        return f"SamplingGrid({self.points.tolist()})"

    def index_of(self, x: float) -> int | None:
        """Sample index of ``x`` if it is (bit-exactly) a sample point."""
        pos = bisect.bisect_left(self.points, x)
        if pos < self.m and self.points[pos] == x:
            return pos
        return None

    def locate(self, x: float) -> int:
        """Subinterval containing ``x``; sample points resolve to their left side."""
        if not -1.0 <= x <= 1.0:
            raise ValueError(f"x={x} outside [-1, 1]")
        k = bisect.bisect_left(self.augmented, x) - 1
        return min(max(k, 0), len(self.subintervals) - 1)

    def with_point(self, x: float) -> tuple[SamplingGrid, int]:
        """New grid with ``x`` inserted, and the sample index it receives."""
        if self.index_of(x) is not None:
            raise ValueError(f"{x} is already a sample point")
        pos = bisect.bisect_left(self.points, x)
        return SamplingGrid(np.insert(self.points, pos, x)), pos


@dataclass(frozen=True, eq=False)
class CollocationMatrix:
    """The n-by-m matrix of basis values at the sample points."""

    entries: np.ndarray
    points: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def columns(self, support: Sequence[int]) -> np.ndarray:
        return self.entries[:, list(support)]


def collocate(system: ChebyshevSystem, grid: SamplingGrid | Sequence[float]) -> CollocationMatrix:
    """Collocation matrix with entry ``[j, i] = v_j(x_i)``."""
    if not isinstance(grid, SamplingGrid):
        grid = SamplingGrid(grid)
    if grid.m < system.n:
        raise ValueError(
            f"need at least n={system.n} sample points, got m={grid.m}; "
            "the worst-case error is infinite otherwise"
        )
    entries = system.basis(grid.points)
    entries.setflags(write=False)
    return CollocationMatrix(entries=entries, points=grid.points)


def moment_vector(system: ChebyshevSystem, x: float) -> np.ndarray:
    """``b(x) = [v_0(x), ..., v_{n-1}(x)]``."""
    x = float(x)
    if not -1.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [-1, 1]")
    return system.basis(x)


def factorize(matrix: np.ndarray, rtol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
    """LU factors with partial pivoting; raises on (numerical) singularity."""
    matrix = np.asarray(matrix, dtype=float)
    lu, piv = scipy.linalg.lu_factor(matrix, check_finite=True)
    diag = np.abs(np.diag(lu))
    if diag.min() <= rtol * max(diag.max(), np.abs(matrix).max()):
        raise ChebyshevPropertyError("singular collocation submatrix")
    return lu, piv


def lagrange_values(system: ChebyshevSystem, nodes: Sequence[float], x) -> np.ndarray:
    """All fundamental Lagrange interpolators on ``nodes`` evaluated at ``x``.

    Solves the collocation system rather than forming determinant ratios.
    Shape ``(n,)`` for scalar ``x``, ``(n, p)`` otherwise.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.shape != (system.n,):
        raise ValueError(f"need exactly n={system.n} nodes")
    if np.any(nodes < -1) or np.any(nodes > 1) or np.unique(nodes).size != nodes.size:
        raise ValueError("nodes must be distinct points of [-1, 1]")
    factors = factorize(system.basis(nodes))
    return scipy.linalg.lu_solve(factors, system.basis(x))


def lagrange_value(system: ChebyshevSystem, nodes: Sequence[float], i: int, x: float) -> float:
    """The i-th (0-based) fundamental Lagrange interpolator on ``nodes`` at ``x``."""
    return float(lagrange_values(system, nodes, float(x))[i])
