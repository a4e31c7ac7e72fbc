"""The n-translation of a point mass from 0 to n.

A spatial derivative with mixing coefficients ``alpha`` induces the ODE
``X'(t) = n A X(t)`` on probability vectors, where ``A`` is the unweighted
adjoint (the transpose) of the derivative's matrix on ``[0, n]`` with
zero-padding.  The path starting from ``e_0`` is ``X(t) = exp(n t A) e_0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Backend,
    BinomialParams,
    GridFunction,
    binomial_pmf,
    common_backend,
    inner_weighted,
    pmf_time_derivative,
    total,
)
from .operators import DerivativeFamily, LinearOperatorMatrix, _alpha_stencil, matrix_of, nabla_n

__all__ = [
    "TranslationPath",
    "TransportResult",
    "default_grid",
    "evolve",
    "exterior_mass",
    "generator",
    "is_fundamental_solution",
    "matrix_exponential",
    "necessary_conditions",
    "support_confinement_check",
    "transport_identity_check",
    "transport_identity_exact",
]

NEGATIVITY_TOL = 1e-10
FINAL_TOL = 1e-10
CONFINEMENT_TOL = 1e-10

# Scaled norm bound for the Taylor stage of scaling and squaring.
_THETA = 0.5
_TRUNCATION_TOL = 1e-16


def _taylor_degree(theta: float) -> int:
    """Smallest m with theta^(m+1)/(m+1)! / (1 - theta/(m+2)) <= _TRUNCATION_TOL."""
    m = 0
    term = theta
    while term / (1 - theta / (m + 2)) > _TRUNCATION_TOL:
        m += 1
        term *= theta / (m + 1)
    return m


def _expm(a: np.ndarray) -> np.ndarray:
    size = a.shape[0]
    norm = np.abs(a).sum(axis=0).max()
    squarings = max(0, math.ceil(math.log2(norm / _THETA))) if norm > 0 else 0
    scaled = a / 2.0**squarings
    degree = _taylor_degree(min(_THETA, norm / 2.0**squarings))
    # Horner form of the truncated series
    result = np.eye(size)
    for j in range(degree, 0, -1):
        result = np.eye(size) + scaled.dot(result) / j
    for _ in range(squarings):
        result = result.dot(result)
    return result


def matrix_exponential(a: LinearOperatorMatrix | np.ndarray, s: float = 1.0) -> LinearOperatorMatrix:
    """``exp(s A)`` by scaling and squaring with a truncated Taylor series.

    The scaled matrix has 1-norm at most 1/2 and the Taylor truncation error
    is bounded by 1e-16 there.  Exact inputs are converted to floats.
    """
    entries = a.to_float() if isinstance(a, LinearOperatorMatrix) else np.asarray(a, dtype=np.float64)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise ValueError(f"matrix exponential needs a square matrix, got shape {entries.shape}")
    return LinearOperatorMatrix(_expm(float(s) * entries), "composed")


def generator(family: DerivativeFamily) -> LinearOperatorMatrix:
    """``A``: transpose of the family's derivative matrix."""
    return matrix_of("alpha_derivative", family=family).transpose("composed")


def evolve(family: DerivativeFamily, t: float) -> GridFunction:
    """``exp(n t A) e_0``."""
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    n = family.n
    return GridFunction(matrix_exponential(generator(family), n * float(t)).entries[:, 0].copy())


def default_grid(points: int = 101) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


@dataclass(frozen=True, eq=False)
class TranslationPath:
    family: DerivativeFamily
    grid: tuple
    states: tuple
    fundamental_flag: bool
    max_negativity: float
    final_residual: float

    def masses(self) -> list[float]:
        return [math.fsum(s.values) for s in self.states]

    def verdict(self) -> dict:
        return {
            "n": self.family.n,
            "alpha": self.family.describe(),
            "grid_points": len(self.grid),
            "fundamental": self.fundamental_flag,
            "max_negativity": self.max_negativity,
            "final_residual": self.final_residual,
        }


def is_fundamental_solution(family: DerivativeFamily, t_grid: Sequence[float] | None = None) -> TranslationPath:
    """Evolve along ``t_grid`` and test nonnegativity and the final condition ``X(1) = e_n``.

    ``max_negativity`` is the smallest entry seen (0 when none is negative).
    """
    grid = default_grid() if t_grid is None else np.asarray(t_grid, dtype=np.float64)
    if grid.size == 0 or grid.min() < 0 or grid.max() > 1:
        raise ValueError("t_grid must be a nonempty subset of [0, 1]")
    if 0.0 not in grid or 1.0 not in grid:
        raise ValueError("t_grid must contain both 0 and 1")
    a = generator(family).to_float()
    n = family.n
    states = tuple(GridFunction(_expm(n * t * a)[:, 0].copy()) for t in grid)
    max_negativity = min(0.0, min(float(s.values.min()) for s in states))
    target = np.zeros(n + 1)
    target[n] = 1.0
    final = states[int(np.flatnonzero(grid == 1.0)[0])]
    final_residual = float(np.abs(final.values - target).max())
    ok = max_negativity >= -NEGATIVITY_TOL and final_residual <= FINAL_TOL
    return TranslationPath(family, tuple(grid.tolist()), states, ok, max_negativity, final_residual)


def necessary_conditions(family: DerivativeFamily) -> tuple[bool, list[str]]:
    """Screen ``alpha_0 = 0`` and ``alpha_n = 1``; passing does not prove a solution exists."""
    violations = []
    if family.alpha[0] != 0:
        violations.append(f"alpha_0 = {family.alpha[0]} (must be 0)")
    if family.alpha[-1] != 1:
        violations.append(f"alpha_n = {family.alpha[-1]} (must be 1)")
    return not violations, violations


@dataclass(frozen=True)
class TransportResult:
    lhs: float
    rhs: float
    deviation: float


def _expectation(f: GridFunction, params: BinomialParams):
    return total(f.values * binomial_pmf(params).values)


def transport_identity_check(f: GridFunction, params: BinomialParams, h: float) -> TransportResult:
    """Centred difference in ``t`` of ``E_b f`` against ``n E_b[nabla_n f]``."""
    params = params.with_backend(Backend.FLOAT)
    params.require_interior()
    f = f.to_float() if f.backend is Backend.EXACT else f
    t = params.t
    if not (0 < t - h and t + h < 1):
        raise ValueError(f"t +- h must stay inside (0, 1), got t = {t}, h = {h}")
    up = _expectation(f, BinomialParams(params.n, t + h))
    down = _expectation(f, BinomialParams(params.n, t - h))
    lhs = (up - down) / (2 * h)
    rhs = params.n * inner_weighted(nabla_n(f), GridFunction.constant(params.n, 1.0, Backend.FLOAT), binomial_pmf(params))
    return TransportResult(lhs, rhs, abs(lhs - rhs))


def transport_identity_exact(f: GridFunction, params: BinomialParams) -> TransportResult:
    """Same identity with the left side from the closed-form ``d b / dt``."""
    params.require_interior()
    common_backend(f, params)
    lhs = total(f.values * pmf_time_derivative(params).values)
    rhs = params.n * total(nabla_n(f).values * binomial_pmf(params).values)
    return TransportResult(lhs, rhs, abs(lhs - rhs))


def _extended_generator(family: DerivativeFamily, margin: int) -> np.ndarray:
    alpha = [0.0] * margin + [float(a) for a in family.alpha] + [1.0] * margin
    return _alpha_stencil(alpha, Backend.FLOAT).T


def exterior_mass(family: DerivativeFamily, t_grid: Sequence[float] | None = None, margin: int = 3) -> float:
    """Largest total ``|mass|`` outside ``[0, n]`` along the grid.

    The evolution runs on ``[-margin, n + margin]`` with ``alpha_k = 0`` left
    of the interval and ``alpha_k = 1`` right of it.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if margin == 0:
        return 0.0
    grid = default_grid() if t_grid is None else np.asarray(t_grid, dtype=np.float64)
    n = family.n
    a = _extended_generator(family, margin)
    outside = np.ones(a.shape[0], dtype=bool)
    outside[margin : margin + n + 1] = False
    worst = 0.0
    for t in grid:
        x = _expm(n * t * a)[:, margin]
        worst = max(worst, float(np.abs(x[outside]).sum()))
    return worst


def support_confinement_check(
    family: DerivativeFamily, t_grid: Sequence[float] | None = None, margin: int = 3
) -> bool:
    """True when no more than 1e-10 of mass leaves ``[0, n]`` along the grid."""
    return exterior_mass(family, t_grid, margin) <= CONFINEMENT_TOL
