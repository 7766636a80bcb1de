"""Piecewise construction of a linear optimal recovery map.

For every subinterval of the (completed) sampling grid an l1-minimal support
is computed at one interior probe point. On that subinterval the recovery
weights are ``a_S(x) = M_S^{-1} b(x)`` and vanish off ``S``; at sample points
they are unit vectors. The resulting weight functions are continuous and
pointwise l1-minimal, so ``y -> sum_i y_i a_i`` is optimal for uniform
recovery under the approximability prior, for any approximation accuracy.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from optrecovery.cheb_core import (
    ChebyshevSystem,
    CollocationMatrix,
    SamplingGrid,
    Subinterval,
    collocate,
    factorize,
    make_system,
)
from optrecovery.exceptions import RecoveryError, SubintervalError
from optrecovery.l1_simplex import (
    CERTIFICATE_TOL,
    NONZERO_TOL,
    certificate_check,
    simplex_solve,
    to_standard_form,
)

log = logging.getLogger(__name__)

FORMAT_TAG = "optrecovery/piecewise-recovery-map"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class Piece:
    """Recovery data for one subinterval ``(left, right)``."""

    k: int
    left: float
    right: float
    left_index: int | None
    right_index: int | None
    probe: float
    support: tuple[int, ...]
    lu: np.ndarray
    piv: np.ndarray
    signs: tuple[int, ...]
    pivots: int = 0
    warm: bool = False

    def coefficients(self, b: np.ndarray) -> np.ndarray:
        """``M_S^{-1} b`` for a moment vector (or an n-by-p block of them)."""
        return scipy.linalg.lu_solve((self.lu, self.piv), b, check_finite=False)

    def inverse(self) -> np.ndarray:
        """Explicit ``M_S^{-1}``; for inspection only."""
        return self.coefficients(np.eye(self.lu.shape[0]))


@dataclass(frozen=True, eq=False)
class PiecewiseRecoveryMap:
    system: ChebyshevSystem
    grid: SamplingGrid
    pieces: tuple[Piece, ...]

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def pivots(self) -> int:
        return sum(p.pivots for p in self.pieces)

    def piece_at(self, x: float) -> Piece:
        return self.pieces[self.grid.locate(x)]

    def collocation(self) -> CollocationMatrix:
        return collocate(self.system, self.grid)


def _solve_piece(
    system: ChebyshevSystem,
    M: np.ndarray,
    k: int,
    sub: Subinterval,
    start: Sequence[int] | None = None,
    cert_tol: float = CERTIFICATE_TOL,
    zero_tol: float = NONZERO_TOL,
) -> Piece:
    probe = 0.5 * (sub.left + sub.right)
    b = system.basis(probe)
    try:
        sol = simplex_solve(to_standard_form(M, b), start=start, zero_tol=zero_tol)
        cert = certificate_check(
            M, sol.support, b, tol=cert_tol, zero_tol=zero_tol, require_nonzero=True
        )
        lu, piv = factorize(M[:, list(sol.support)])
    except RecoveryError as exc:
        raise SubintervalError(k, str(exc)) from exc
    if not cert.passed:
        raise SubintervalError(k, f"optimality certificate failed (dual norm {cert.dual_norm:.17g})")
    for idx in (sub.left_index, sub.right_index):
        if idx is not None and idx not in sol.support:
            raise SubintervalError(k, f"endpoint index {idx} missing from support {sol.support}")
    lu.setflags(write=False)
    piv.setflags(write=False)
    return Piece(
        k=k,
        left=sub.left,
        right=sub.right,
        left_index=sub.left_index,
        right_index=sub.right_index,
        probe=probe,
        support=sol.support,
        lu=lu,
        piv=piv,
        signs=cert.signs,
        pivots=sol.pivots,
        warm=sol.warm,
    )


def _solve_all(system, grid, starts, workers, **tols) -> tuple[Piece, ...]:
    M = collocate(system, grid).entries
    jobs = [(k, sub, starts[k]) for k, sub in enumerate(grid.subintervals)]

    def work(job):
        k, sub, start = job
        return _solve_piece(system, M, k, sub, start, **tols)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pieces = tuple(pool.map(work, jobs))
    else:
        pieces = tuple(work(job) for job in jobs)
    return pieces


def build_recovery_map(
    system: ChebyshevSystem,
    grid: SamplingGrid | Sequence[float],
    *,
    workers: int = 1,
    cert_tol: float = CERTIFICATE_TOL,
    zero_tol: float = NONZERO_TOL,
) -> PiecewiseRecoveryMap:
    """Compute the l1-optimal support of every subinterval and assemble the map.

    The probe point of each subinterval is its midpoint. Each support is
    validated with the dual certificate at the probe, and the sample indices
    of both endpoints must belong to it. Failures raise
    :class:`SubintervalError` carrying the offending subinterval index.
    """
    if not isinstance(grid, SamplingGrid):
        grid = SamplingGrid(grid)
    if system.n < 3:
        raise ValueError("dimension must be at least 3")
    if grid.m < system.n:
        raise ValueError(f"need m >= n, got m={grid.m}, n={system.n}")
    starts = [None] * len(grid.subintervals)
    pieces = _solve_all(system, grid, starts, workers, cert_tol=cert_tol, zero_tol=zero_tol)
    return PiecewiseRecoveryMap(system=system, grid=grid, pieces=pieces)


def insert_point_warm(
    rmap: PiecewiseRecoveryMap,
    x_new: float,
    strategy: str = "warm",
    *,
    workers: int = 1,
    cert_tol: float = CERTIFICATE_TOL,
    zero_tol: float = NONZERO_TOL,
) -> PiecewiseRecoveryMap:
    """Rebuild the map after adding one sample point; the input is left untouched.

    With ``strategy="warm"`` each simplex solve starts from a guessed support:
    unchanged subintervals reuse their previous support, and the two halves of
    the split subinterval take its support with the far endpoint's index
    replaced by the new point's. A half whose far endpoint is an added -1 or 1
    has no such guess and is solved cold, as is any guess with a singular
    collocation submatrix.
    """
    if strategy not in ("warm", "cold"):
        raise ValueError(f"unknown strategy {strategy!r}")
    x_new = float(x_new)
    if not -1.0 < x_new < 1.0:
        raise ValueError("inserted point must lie in (-1, 1)")
    if rmap.grid.index_of(x_new) is not None:
        raise ValueError(f"{x_new} is already a sample point")
    grid, pos = rmap.grid.with_point(x_new)

    def remap(i: int) -> int:
        return i if i < pos else i + 1

    starts: list[list[int] | None] = []
    if strategy == "cold":
        starts = [None] * len(grid.subintervals)
    else:
        old = {(p.left, p.right): p for p in rmap.pieces}
        parent = rmap.piece_at(x_new)
        for sub in grid.subintervals:
            same = old.get((sub.left, sub.right))
            if same is not None:
                starts.append(sorted(remap(i) for i in same.support))
                continue
            far = parent.right_index if sub.right_index == pos else parent.left_index
            if far is None or far not in parent.support:
                starts.append(None)
            else:
                starts.append(sorted([remap(i) for i in parent.support if i != far] + [pos]))

    pieces = _solve_all(rmap.system, grid, starts, workers, cert_tol=cert_tol, zero_tol=zero_tol)
    new = PiecewiseRecoveryMap(system=rmap.system, grid=grid, pieces=pieces)
    log.info("inserted %.17g (%s): %d pivots", x_new, strategy, new.pivots)
    return new


def _check_x(x: float) -> float:
    x = float(x)
    if not -1.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [-1, 1]")
    return x


def asharp_vector(rmap: PiecewiseRecoveryMap, x: float) -> np.ndarray:
    """All recovery weights ``(a_0(x), ..., a_{m-1}(x))``."""
    x = _check_x(x)
    out = np.zeros(rmap.m)
    node = rmap.grid.index_of(x)
    if node is not None:
        out[node] = 1.0
        return out
    piece = rmap.piece_at(x)
    out[list(piece.support)] = piece.coefficients(rmap.system.basis(x))
    return out


def evaluate_asharp(rmap: PiecewiseRecoveryMap, i: int, x: float) -> float:
    """Recovery weight function ``a_i`` (0-based) at ``x``."""
    if not 0 <= i < rmap.m:
        raise IndexError(f"index {i} out of range for m={rmap.m}")
    return float(asharp_vector(rmap, x)[i])


def asharp_matrix(rmap: PiecewiseRecoveryMap, xs: Sequence[float]) -> np.ndarray:
    """Weights at many points; row ``p`` is ``asharp_vector(rmap, xs[p])``."""
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size and (xs.min() < -1.0 or xs.max() > 1.0):
        raise ValueError("evaluation points must lie in [-1, 1]")
    out = np.zeros((xs.size, rmap.m))
    owner = np.empty(xs.size, dtype=int)
    for p, x in enumerate(xs):
        node = rmap.grid.index_of(x)
        if node is not None:
            out[p, node] = 1.0
            owner[p] = -1
        else:
            owner[p] = rmap.grid.locate(x)
    for k in np.unique(owner[owner >= 0]):
        rows = np.flatnonzero(owner == k)
        piece = rmap.pieces[k]
        coef = piece.coefficients(rmap.system.basis(xs[rows]))
        out[np.ix_(rows, list(piece.support))] = coef.T
    return out


def evaluate_delta(rmap: PiecewiseRecoveryMap, y: Sequence[float], x):
    """``sum_i y_i a_i(x)``; scalar ``x`` gives a float, arrays give an array."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size != rmap.m:
        raise ValueError(f"expected {rmap.m} observations, got {y.size}")
    if np.ndim(x) == 0:
        x = _check_x(x)
        node = rmap.grid.index_of(x)
        if node is not None:
            return float(y[node])
        piece = rmap.piece_at(x)
        return float(piece.coefficients(rmap.system.basis(x)) @ y[list(piece.support)])
    return asharp_matrix(rmap, x) @ y


def l1_profile(rmap: PiecewiseRecoveryMap, x):
    """``||a(x)||_1``, the pointwise error amplification minus one."""
    if np.ndim(x) == 0:
        return float(np.abs(asharp_vector(rmap, x)).sum())
    return np.abs(asharp_matrix(rmap, x)).sum(axis=1)


@dataclass(frozen=True, eq=False)
class RecoveredFunction:
    """The recovered function for observations ``y``; call it like ``f(x)``."""

    rmap: PiecewiseRecoveryMap
    y: np.ndarray

    def __call__(self, x):
        return evaluate_delta(self.rmap, self.y, x)

    def piece_coefficients(self, k: int) -> np.ndarray:
        """Basis coefficients of the element of the Chebyshev space that this
        function coincides with on subinterval ``k``."""
        piece = self.rmap.pieces[k]
        y_s = self.y[list(piece.support)]
        return scipy.linalg.lu_solve((piece.lu, piece.piv), y_s, trans=1, check_finite=False)


def recover(rmap: PiecewiseRecoveryMap, y: Sequence[float]) -> RecoveredFunction:
    y = np.array(y, dtype=float).ravel()
    if y.size != rmap.m:
        raise ValueError(f"expected {rmap.m} observations, got {y.size}")
    y.setflags(write=False)
    return RecoveredFunction(rmap, y)


# -- serialization ----------------------------------------------------------

def map_to_dict(rmap: PiecewiseRecoveryMap) -> dict:
    return {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "basis": rmap.system.descriptor(),
        "points": [float(x) for x in rmap.grid.points],
        "pieces": [
            {
                "k": p.k,
                "interval": [p.left, p.right],
                "endpoint_indices": [p.left_index, p.right_index],
                "probe": p.probe,
                "support": list(p.support),
                "signs": list(p.signs),
                "lu": p.lu.tolist(),
                "piv": [int(v) for v in p.piv],
                "pivots": p.pivots,
                "warm": p.warm,
            }
            for p in rmap.pieces
        ],
    }


def map_from_dict(doc: dict, system: ChebyshevSystem | None = None) -> PiecewiseRecoveryMap:
    """Rebuild a map from :func:`map_to_dict` output.

    ``system`` must be supplied for custom bases, which are not serializable.
    """
    if doc.get("format") != FORMAT_TAG:
        raise ValueError(f"not a recovery map document (format={doc.get('format')!r})")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported map version {doc.get('version')!r}")
    if system is None:
        basis = doc["basis"]
        system = make_system(basis["kind"], basis["n"], basis["params"])
    grid = SamplingGrid(doc["points"])
    if len(doc["pieces"]) != len(grid.subintervals):
        raise ValueError("piece count does not match the grid")
    pieces = []
    for rec, sub in zip(doc["pieces"], grid.subintervals):
        if [sub.left, sub.right] != rec["interval"]:
            raise ValueError(f"piece {rec['k']} interval does not match the grid")
        lu = np.array(rec["lu"], dtype=float)
        piv = np.array(rec["piv"], dtype=np.int32)
        if lu.shape != (system.n, system.n) or len(rec["support"]) != system.n:
            raise ValueError(f"piece {rec['k']} has wrong dimensions")
        lu.setflags(write=False)
        piv.setflags(write=False)
        pieces.append(Piece(
            k=int(rec["k"]),
            left=sub.left,
            right=sub.right,
            left_index=sub.left_index,
            right_index=sub.right_index,
            probe=float(rec["probe"]),
            support=tuple(int(i) for i in rec["support"]),
            lu=lu,
            piv=piv,
            signs=tuple(int(s) for s in rec["signs"]),
            pivots=int(rec.get("pivots", 0)),
            warm=bool(rec.get("warm", False)),
        ))
    return PiecewiseRecoveryMap(system=system, grid=grid, pieces=tuple(pieces))


def dumps_map(rmap: PiecewiseRecoveryMap) -> str:
    # repr-based float output round-trips every double exactly
    return json.dumps(map_to_dict(rmap), indent=1) + "\n"


def save_map(rmap: PiecewiseRecoveryMap, path: str | Path) -> None:
    Path(path).write_text(dumps_map(rmap))


def load_map(path: str | Path, system: ChebyshevSystem | None = None) -> PiecewiseRecoveryMap:
    return map_from_dict(json.loads(Path(path).read_text()), system)

