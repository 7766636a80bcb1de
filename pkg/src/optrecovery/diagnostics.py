"""Independent checks and derived quantities for recovery maps.

* :func:`ersatz_solver` solves the pointwise l1 program afresh at each probe;
  it is the reference the piecewise map is tested against.
* :func:`enumerate_supports` is the brute-force oracle for small problems.
* :func:`rho_norm_ratio` computes the largest ratio between the uniform norm
  and the max over the samples for elements of the space, together with the
  compatibility factor ``mu = 1 + rho``.
* :func:`wce_audit` checks the worst-case error bound on random functions
  near the approximation space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from optrecovery.cheb_core import ChebyshevSystem, SamplingGrid, collocate
from optrecovery.l1_simplex import SparseSolution, simplex_solve, to_standard_form
from optrecovery.recovery import PiecewiseRecoveryMap, asharp_matrix

MAX_SUPPORTS = 100_000
SAMPLES_PER_PIECE = 513
REFINE_TOL = 1e-10

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def ersatz_solver(
    system: ChebyshevSystem,
    grid: SamplingGrid | Sequence[float],
    probes: Sequence[float],
) -> list[SparseSolution]:
    """One independent cold-start l1 solve per probe point."""
    M = collocate(system, grid).entries
    out = []
    for x in np.asarray(probes, dtype=float).ravel():
        if not -1.0 <= x <= 1.0:
            raise ValueError(f"probe {x} outside [-1, 1]")
        out.append(simplex_solve(to_standard_form(M, system.basis(x))))
    return out


@dataclass(frozen=True)
class SupportCandidate:
    support: tuple[int, ...]
    values: np.ndarray | None
    objective: float
    feasible: bool


def enumerate_supports(M, b, max_count: int = MAX_SUPPORTS) -> list[SupportCandidate]:
    """Every size-n support with its basic solution and l1 value.

    Singular supports are listed with ``feasible=False`` and an infinite
    objective.
    """
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    n, m = M.shape
    if math.comb(m, n) > max_count:
        raise ValueError(f"C({m},{n}) = {math.comb(m, n)} supports exceeds the guard {max_count}")
    out = []
    for support in combinations(range(m), n):
        MS = M[:, support]
        sv = np.linalg.svd(MS, compute_uv=False)
        if sv[-1] <= 1e-13 * sv[0]:
            out.append(SupportCandidate(support, None, math.inf, False))
            continue
        values = np.linalg.solve(MS, b)
        out.append(SupportCandidate(support, values, float(np.abs(values).sum()), True))
    return out


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float = REFINE_TOL):
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


@dataclass(frozen=True)
class PieceMaximum:
    k: int
    x: float
    value: float


@dataclass(frozen=True)
class RatioReport:
    rho: float
    mu: float
    argmax: tuple[int, float]
    per_subinterval: tuple[PieceMaximum, ...] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "mu": self.mu,
            "argmax": {"k": self.argmax[0], "x": self.argmax[1]},
            "per_subinterval": [
                {"k": p.k, "x": p.x, "value": p.value} for p in self.per_subinterval
            ],
        }


def signed_piece_function(rmap: PiecewiseRecoveryMap, k: int) -> Callable:
    """The element of the space whose maximum over subinterval ``k`` enters ``rho``.

    Sums the weights ``M_S^{-1} b(x)`` with the signs they take at the probe
    point; inside the subinterval this equals the l1 norm of the weights.
    """
    piece = rmap.pieces[k]
    signs = np.asarray(piece.signs, dtype=float)
    basis = rmap.system.basis

    def g(x):
        return signs @ piece.coefficients(basis(x))

    return g


def rho_norm_ratio(
    rmap: PiecewiseRecoveryMap,
    samples: int = SAMPLES_PER_PIECE,
    tol: float = REFINE_TOL,
) -> RatioReport:
    """Maximal ratio of uniform norm to sampled max-norm over the space.

    Each closed subinterval is scanned at ``samples`` equispaced points and
    the best sample is refined by golden-section search on its neighbouring
    bracket.
    """
    maxima = []
    for piece in rmap.pieces:
        g = signed_piece_function(rmap, piece.k)
        xs = np.linspace(piece.left, piece.right, samples)
        vals = g(xs)
        best = int(np.argmax(vals))
        x_best, v_best = float(xs[best]), float(vals[best])
        lo, hi = xs[max(best - 1, 0)], xs[min(best + 1, samples - 1)]
        x_ref, v_ref = golden_section_max(lambda t: float(g(t)), float(lo), float(hi), tol)
        if v_ref > v_best:
            x_best, v_best = x_ref, v_ref
        maxima.append(PieceMaximum(piece.k, x_best, v_best))
    top = max(maxima, key=lambda p: p.value)
    return RatioReport(
        rho=top.value,
        mu=1.0 + top.value,
        argmax=(top.k, top.x),
        per_subinterval=tuple(maxima),
    )


@dataclass(frozen=True)
class WCEAudit:
    epsilon: float
    bound: float
    observed: float
    passed: bool
    trials: int

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "bound": self.bound,
            "observed": self.observed,
            "pass": self.passed,
            "trials": self.trials,
        }


def random_perturbation(rng: np.random.Generator, knots: int = 12) -> Callable:
    """Piecewise-linear function through random +-1 values; its sup norm is 1."""
    xs = np.concatenate([[-1.0], np.sort(rng.uniform(-1.0, 1.0, knots - 2)), [1.0]])
    ys = rng.choice([-1.0, 1.0], size=knots)
    ys[rng.integers(knots)] = 1.0  # at least one knot attains the norm
    return lambda x: np.interp(x, xs, ys)


def wce_audit(
    rmap: PiecewiseRecoveryMap,
    epsilon: float,
    trials: int = 1000,
    density: int = 2001,
    *,
    seed: int = 0,
    mu: float | None = None,
    perturb: bool = True,
) -> WCEAudit:
    """Check ``|f - recovered f| <= mu * epsilon`` for random ``f`` near the space.

    Each trial draws ``f = v + epsilon * g`` with ``v`` having standard-normal
    basis coefficients and ``g`` from :func:`random_perturbation` (or zero
    when ``perturb`` is false). Errors are measured on ``density`` equispaced
    points plus the sample points.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if mu is None:
        mu = rho_norm_ratio(rmap).mu
    rng = np.random.default_rng(seed)
    xs = np.union1d(np.linspace(-1.0, 1.0, density), rmap.grid.points)
    weights = asharp_matrix(rmap, xs)
    basis_xs = rmap.system.basis(xs)
    basis_pts = rmap.system.basis(rmap.grid.points)
    observed = 0.0
    for _ in range(trials):
        coef = rng.standard_normal(rmap.n)
        f_xs = coef @ basis_xs
        f_pts = coef @ basis_pts
        if perturb and epsilon > 0:
            g = random_perturbation(rng)
            f_xs = f_xs + epsilon * g(xs)
            f_pts = f_pts + epsilon * g(rmap.grid.points)
        observed = max(observed, float(np.abs(f_xs - weights @ f_pts).max()))
    bound = mu * epsilon
    return WCEAudit(
        epsilon=float(epsilon),
        bound=bound,
        observed=observed,
        passed=observed <= bound + 1e-8,
        trials=trials,
    )
