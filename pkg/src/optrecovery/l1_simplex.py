"""Basis-pursuit solver: minimize ``||a||_1`` subject to ``M a = b``.

The problem is recast in standard form over ``c = [a+; a-] >= 0`` with
constraint matrix ``[M | -M]`` and solved by a dense-tableau simplex method.
Vertex solutions of the standard-form program are n-sparse, which is what the
recovery construction relies on. :func:`certificate_check` verifies optimality
of a support independently of the solver.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from optrecovery.exceptions import (
    CyclingError,
    DegenerateError,
    InfeasibleError,
    SolverError,
)

log = logging.getLogger(__name__)

REDUCED_COST_TOL = 1e-11
PIVOT_TOL = 1e-12
FEASIBILITY_TOL = 1e-9
CERTIFICATE_TOL = 1e-9
NONZERO_TOL = 1e-12


@dataclass(frozen=True)
class StandardFormLP:
    """``min 1^T c`` s.t. ``[M | -M] c = b``, ``c >= 0``."""

    matrix: np.ndarray  # the original n x m matrix M
    b: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return self.matrix.shape[1]

    @property
    def constraints(self) -> np.ndarray:
        return np.hstack([self.matrix, -self.matrix])

    @property
    def cost(self) -> np.ndarray:
        return np.ones(2 * self.m)

    def split(self, c: np.ndarray) -> np.ndarray:
        """Recover ``a = a+ - a-`` from a standard-form vector."""
        return c[: self.m] - c[self.m:]


@dataclass(frozen=True)
class SparseSolution:
    """An n-sparse basic optimal solution.

    ``support`` is sorted, 0-based and has exactly n entries; ``values`` holds
    ``M_S^{-1} b`` aligned with it.
    """

    support: tuple[int, ...]
    values: np.ndarray
    objective: float
    m: int
    pivots: int = 0
    warm: bool = False

    def dense(self) -> np.ndarray:
        a = np.zeros(self.m)
        a[list(self.support)] = self.values
        return a


@dataclass(frozen=True)
class CertificateReport:
    dual_norm: float
    passed: bool
    margin: float
    signs: tuple[int, ...]


def to_standard_form(M, b) -> StandardFormLP:
    M = np.array(M, dtype=float)
    b = np.array(b, dtype=float).ravel()
    if M.ndim != 2 or M.shape[0] != b.size:
        raise ValueError(f"shape mismatch: M is {M.shape}, b has {b.size} entries")
    M.setflags(write=False)
    b.setflags(write=False)
    return StandardFormLP(M, b)


class _Tableau:
    """Dense simplex tableau; the last row holds reduced costs and ``-objective``."""

    def __init__(self, A: np.ndarray, b: np.ndarray, cost: np.ndarray, basis: list[int]):
        self.A, self.b, self.cost = A, b, cost
        self.basis = list(basis)
        self.rebuild()

    def rebuild(self) -> None:
        A, b, cost = self.A, self.b, self.cost
        rows = A.shape[0]
        B = A[:, self.basis]
        T = np.empty((rows + 1, A.shape[1] + 1))
        T[:rows, :-1] = np.linalg.solve(B, A)
        T[:rows, -1] = np.linalg.solve(B, b)
        cb = cost[self.basis]
        T[rows, :-1] = cost - cb @ T[:rows, :-1]
        T[rows, -1] = -cb @ T[:rows, -1]
        # basic columns are exact unit vectors
        for r, j in enumerate(self.basis):
            T[:rows, j] = 0.0
            T[r, j] = 1.0
            T[rows, j] = 0.0
        self.T = T

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j

    def run(self, allowed: int, max_pivots: int, tol: float) -> int:
        """Pivot to optimality over the first ``allowed`` columns; returns pivot count.

        Dantzig's rule is used while steps make progress. The first degenerate
        step switches to Bland's rule for the rest of the run, which rules out
        cycling.
        """
        T = self.T
        rows = T.shape[0] - 1
        bland = False
        pivots = 0
        while True:
            rc = T[rows, :allowed]
            if bland:
                candidates = np.flatnonzero(rc < -tol)
                if candidates.size == 0:
                    return pivots
                j = int(candidates[0])
            else:
                j = int(np.argmin(rc))
                if rc[j] >= -tol:
                    return pivots
            colj = T[:rows, j]
            eligible = np.flatnonzero(colj > PIVOT_TOL)
            if eligible.size == 0:
                raise SolverError("unbounded direction in a program bounded below by 0")
            ratios = T[eligible, -1] / colj[eligible]
            best = ratios.min()
            ties = eligible[ratios <= best + 1e-15 * max(1.0, abs(best))]
            r = int(min(ties, key=lambda row: self.basis[row]))
            if best <= 1e-15:
                bland = True
            self.pivot(r, j)
            pivots += 1
            if pivots > max_pivots:
                raise CyclingError(f"no optimum after {max_pivots} pivots")


def _warm_basis(lp: StandardFormLP, support: Sequence[int]) -> list[int] | None:
    support = sorted(int(i) for i in support)
    if len(support) != lp.n or len(set(support)) != lp.n:
        return None
    try:
        a = np.linalg.solve(lp.matrix[:, support], lp.b)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(a)) or np.linalg.cond(lp.matrix[:, support]) > 1e13:
        return None
    # a basic feasible solution: a_j >= 0 goes on a+_j, otherwise on a-_j
    return [j if a_j >= 0 else j + lp.m for j, a_j in zip(support, a)]


def _phase_one(lp: StandardFormLP, max_pivots: int, tol: float) -> tuple[list[int], int]:
    n, m2 = lp.n, 2 * lp.m
    A = lp.constraints
    flip = np.where(lp.b < 0, -1.0, 1.0)
    A1 = np.hstack([A * flip[:, None], np.eye(n)])
    b1 = lp.b * flip
    cost1 = np.concatenate([np.zeros(m2), np.ones(n)])
    tab = _Tableau(A1, b1, cost1, list(range(m2, m2 + n)))
    pivots = tab.run(m2 + n, max_pivots, tol)
    scale = max(1.0, np.abs(lp.b).max(initial=0.0))
    if -tab.T[n, -1] > FEASIBILITY_TOL * scale:
        raise InfeasibleError("M a = b has no solution; collocation matrix is rank deficient")
    # drive zero-level artificials out of the basis
    for r in range(n):
        if tab.basis[r] >= m2:
            row = tab.T[r, :m2]
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) <= 1e-10:
                raise InfeasibleError("redundant constraint; collocation matrix is rank deficient")
            tab.pivot(r, j)
            pivots += 1
    return tab.basis, pivots


def simplex_solve(
    lp: StandardFormLP,
    start: Sequence[int] | None = None,
    *,
    tol: float = REDUCED_COST_TOL,
    max_pivots: int | None = None,
    zero_tol: float = NONZERO_TOL,
) -> SparseSolution:
    """Solve the standard-form program and return an n-sparse solution.

    Parameters
    ----------
    lp : StandardFormLP
    start : sequence of int, optional
        A guessed support of size n (0-based columns of M). When its
        collocation submatrix is invertible it seeds the simplex method
        directly (warm start); otherwise the solver falls back to a two-phase
        cold start.
    tol : float
        Reduced-cost optimality tolerance.
    max_pivots : int, optional
        Cycling guard; defaults to ``50 * (n + 2m)``.
    zero_tol : float
        Entries below ``zero_tol * max(1, |b|_inf)`` count as zero when the
        support is read off the final basis.
    """
    n, m = lp.n, lp.m
    if max_pivots is None:
        max_pivots = 50 * (n + 2 * m)
    A, cost = lp.constraints, lp.cost

    basis = _warm_basis(lp, start) if start is not None else None
    warm = basis is not None
    pivots = 0
    if basis is None:
        basis, pivots = _phase_one(lp, max_pivots, tol)

    tab = _Tableau(A, lp.b, cost, basis)
    for _ in range(4):
        pivots += tab.run(2 * m, max_pivots, tol)
        # verify optimality from freshly solved duals rather than the updated row
        B = A[:, tab.basis]
        y = np.linalg.solve(B.T, cost[tab.basis])
        ay = A.T @ y
        reduced = np.delete(cost - ay, tab.basis)
        x_b = np.linalg.solve(B, lp.b)
        dual_ok = reduced.min() >= -10 * tol * max(1.0, np.abs(ay).max())
        primal_ok = x_b.min() >= -FEASIBILITY_TOL * max(1.0, np.abs(x_b).max())
        if dual_ok and primal_ok:
            break
        tab.rebuild()
    else:
        raise SolverError("tableau drift persisted after refactorization")

    support = sorted(j % m for j in tab.basis)
    values = np.linalg.solve(lp.matrix[:, support], lp.b)
    scale = max(1.0, np.abs(lp.b).max(initial=0.0))
    nonzero = [j for j, v in zip(support, values) if abs(v) > zero_tol * scale]
    if len(nonzero) < n:
        support = complete_support(lp.matrix, nonzero)
        values = np.linalg.solve(lp.matrix[:, support], lp.b)
        values[[j not in nonzero for j in support]] = 0.0
    values.setflags(write=False)
    log.debug("simplex: %d pivots (%s), support %s", pivots, "warm" if warm else "cold", support)
    return SparseSolution(
        support=tuple(support),
        values=values,
        objective=float(np.abs(values).sum()),
        m=m,
        pivots=pivots,
        warm=warm,
    )


def complete_support(M: np.ndarray, partial: Sequence[int]) -> list[int]:
    """Extend ``partial`` to n columns by adding smallest indices that keep full rank."""
    M = np.asarray(M, dtype=float)
    n, m = M.shape
    chosen = sorted(int(i) for i in partial)
    for i in range(m):
        if len(chosen) == n:
            break
        if i in chosen:
            continue
        trial = sorted(chosen + [i])
        sv = np.linalg.svd(M[:, trial], compute_uv=False)
        if sv[-1] > 1e-12 * sv[0]:
            chosen = trial
    if len(chosen) != n:
        raise InfeasibleError("no invertible completion; collocation matrix is rank deficient")
    return chosen


def certificate_check(
    M,
    support: Sequence[int],
    b,
    *,
    tol: float = CERTIFICATE_TOL,
    zero_tol: float = NONZERO_TOL,
    require_nonzero: bool = False,
) -> CertificateReport:
    """Dual-feasibility test for the basic solution supported on ``support``.

    Computes ``|| M_{S^c}^T M_S^{-T} sgn(M_S^{-1} b) ||_inf``; the support
    carries an l1 minimizer iff this is at most 1 (given no zero entries in
    ``M_S^{-1} b``). With ``require_nonzero`` a vanishing entry raises
    :class:`DegenerateError`, since it cannot occur at a non-sample point of a
    Chebyshev system.
    """
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    n, m = M.shape
    support = sorted(int(i) for i in support)
    if len(support) != n or len(set(support)) != n:
        raise ValueError(f"support must have exactly n={n} distinct indices")
    MS = M[:, support]
    lu = scipy.linalg.lu_factor(MS)
    coef = scipy.linalg.lu_solve(lu, b)
    scale = max(1.0, np.abs(b).max())
    if require_nonzero and np.any(np.abs(coef) <= zero_tol * scale):
        raise DegenerateError(f"basic solution on {support} has a vanishing entry")
    signs = np.sign(coef)
    complement = [i for i in range(m) if i not in set(support)]
    if complement:
        w = scipy.linalg.lu_solve(lu, signs, trans=1)
        dual = float(np.abs(M[:, complement].T @ w).max())
    else:
        dual = 0.0
    return CertificateReport(
        dual_norm=dual,
        passed=dual <= 1.0 + tol,
        margin=1.0 - dual,
        signs=tuple(int(s) for s in signs),
    )
