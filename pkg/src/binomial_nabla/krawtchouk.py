"""Krawtchouk polynomials for the binomial law and their ladder identities.

The basis is defined through its generating function in ``w``::

    P(k, w) = sum_r (1-t)^r / r! * phi_r(k) * w^r = (1 + (1-t) w)^k (1 - t w)^(n-k)

and is never renormalized, so ``<phi_r, phi_s>_b = C_{n,r} delta_{rs}`` with
``C_{n,r} = n! r! / (n-r)! * (t / (1-t))^r``.  Values are stored on the grid,
one :class:`GridFunction` per degree.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import (
    Backend,
    BinomialParams,
    GridFunction,
    binomial_coefficients,
    binomial_pmf,
    common_backend,
    inner_weighted,
    max_abs,
    total,
)
from .operators import nabla_n, nabla_tilde

__all__ = [
    "IdentityViolation",
    "KrawtchoukBasis",
    "euler_identity_residual",
    "eigen_factor",
    "expand_in_basis",
    "forward_difference",
    "generate_basis",
    "generating_coefficients",
    "generating_function",
    "generating_series",
    "gram_matrix",
    "ladder_down",
    "ladder_up",
    "norm_constant",
    "poly_mul",
    "reconstruct",
    "shift_identity_residual",
]


class IdentityViolation(AssertionError):
    """An identity that must hold by construction failed; carries the residual."""

    def __init__(self, name: str, residual):
        super().__init__(f"{name} violated: max abs residual {residual}")
        self.name = name
        self.residual = residual


def poly_mul(a: Sequence, b: Sequence) -> list:
    """Coefficient list of the product of two polynomials (ascending powers)."""
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = out[i + j] + x * y
    return out


def generating_coefficients(params: BinomialParams, k: int) -> list:
    """Coefficients of ``(1 + (1-t) w)^k (1 - t w)^(n-k)`` in ``w``, degree ``n``."""
    n, t = params.n, params.t
    up = [c * (1 - t) ** j for j, c in enumerate(binomial_coefficients(k))]
    down = [c * (-t) ** j for j, c in enumerate(binomial_coefficients(n - k))]
    return poly_mul(up, down)


def generating_function(params: BinomialParams, k: int, w):
    """Closed form ``(1 + (1-t) w)^k (1 - t w)^(n-k)``."""
    t = params.t
    return (1 + (1 - t) * w) ** k * (1 - t * w) ** (params.n - k)


@dataclass(frozen=True, eq=False)
class KrawtchoukBasis:
    """The family ``phi_0, ..., phi_n`` with squared norms ``C_{n,0..n}``."""

    params: BinomialParams
    polys: tuple[GridFunction, ...]
    norms: tuple

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def backend(self) -> Backend:
        return self.params.backend

    def phi(self, r: int) -> GridFunction:
        """``phi_r``, with ``phi_{-1} = phi_{n+1} = 0``."""
        if r in (-1, self.n + 1):
            return GridFunction(self.backend.zeros(self.n + 1))
        if not 0 <= r <= self.n:
            raise IndexError(f"degree {r} outside [-1, {self.n + 1}]")
        return self.polys[r]

    def values(self) -> np.ndarray:
        """``(n+1) x (n+1)`` array with ``phi_r(k)`` at ``[r, k]``."""
        return np.vstack([p.values for p in self.polys])


def generate_basis(params: BinomialParams) -> KrawtchoukBasis:
    """Expand the generating function per grid point and read off ``phi_r(k)``.

    Float parameters are expanded in exact arithmetic on the binary value of
    ``t`` and rounded once at the end; the alternating convolution sums
    cancel badly in floating point for moderate ``n``.
    """
    params.require_interior()
    # 0.25 == Fraction(1, 4) with equal hashes, so the backend must be part of the key
    return _generate_basis(params.n, params.t, params.backend)


@functools.lru_cache(maxsize=256)
def _generate_basis(n: int, t, backend: Backend) -> KrawtchoukBasis:
    params = BinomialParams(n, t)
    exact = BinomialParams(n, Fraction(t))
    t = exact.t
    scale = [Fraction(math.factorial(r)) / (1 - t) ** r for r in range(n + 1)]
    table = [[None] * (n + 1) for _ in range(n + 1)]
    for k in range(n + 1):
        for r, c in enumerate(generating_coefficients(exact, k)):
            table[r][k] = scale[r] * c
    polys = tuple(GridFunction(backend.array(row)) for row in table)
    norms = tuple(norm_constant(params, r) for r in range(n + 1))
    return KrawtchoukBasis(params, polys, norms)


def norm_constant(params: BinomialParams, r: int):
    """``C_{n,r} = n! r! / (n-r)! * (t/(1-t))^r``."""
    n = params.n
    if not 0 <= r <= n:
        raise ValueError(f"degree r = {r} outside [0, {n}]")
    odds = params.odds
    if params.backend is Backend.EXACT:
        return Fraction(math.factorial(n) * math.factorial(r), math.factorial(n - r)) * odds**r
    if n <= 60:
        return float(Fraction(math.factorial(n) * math.factorial(r), math.factorial(n - r))) * odds**r
    return math.exp(math.lgamma(n + 1) + math.lgamma(r + 1) - math.lgamma(n - r + 1) + r * math.log(odds))


def expand_in_basis(f: GridFunction, basis: KrawtchoukBasis) -> np.ndarray:
    """Coefficients ``a_j = <f, phi_j>_b / C_{n,j}``."""
    common_backend(f, basis)
    if f.n != basis.n:
        raise ValueError(f"dimension mismatch: grid n = {f.n}, basis n = {basis.n}")
    b = binomial_pmf(basis.params)
    return basis.backend.array(inner_weighted(f, phi, b) / c for phi, c in zip(basis.polys, basis.norms))


def reconstruct(coeffs: Sequence, basis: KrawtchoukBasis) -> GridFunction:
    """``sum_j a_j phi_j``."""
    coeffs = basis.backend.array(coeffs)
    return GridFunction(coeffs.dot(basis.values()))


def _tolerance_check(name: str, source: GridFunction, got: GridFunction, expected: GridFunction, tol: float) -> None:
    residual = max_abs(got.values - expected.values)
    if got.backend is Backend.EXACT:
        if residual != 0:
            raise IdentityViolation(name, residual)
        return
    # rounding scales with the input: phi_n is of order n! yet maps to zero
    scale = max(1.0, float(max_abs(source.values)), float(max_abs(expected.values)))
    if residual > tol * scale:
        raise IdentityViolation(name, residual)


def ladder_down(basis: KrawtchoukBasis, r: int, *, tol: float = 1e-9) -> GridFunction:
    """``nabla_n phi_r``, checked against ``r(n-r+1) / (n(1-t)) * phi_{r-1}``."""
    n, t = basis.n, basis.params.t
    got = nabla_n(basis.phi(r))
    expected = basis.phi(r - 1) * (basis.backend.scalar(r * (n - r + 1)) / (n * (1 - t)))
    _tolerance_check(f"lowering identity at r={r}", basis.phi(r), got, expected, tol)
    return got


def ladder_up(basis: KrawtchoukBasis, r: int, *, tol: float = 1e-9) -> GridFunction:
    """``nabla_tilde phi_r``, checked against ``phi_{r+1} / (n t)``."""
    n, t = basis.n, basis.params.t
    got = nabla_tilde(basis.params, basis.phi(r))
    expected = basis.phi(r + 1) * (1 / (n * t))
    _tolerance_check(f"raising identity at r={r}", basis.phi(r), got, expected, tol)
    return got


def eigen_factor(params: BinomialParams, r: int):
    """``r(n-r+1) / (n^2 t(1-t))``."""
    n, t = params.n, params.t
    return params.backend.scalar(r * (n - r + 1)) / (n * n * t * (1 - t))


def forward_difference(values: Sequence, order: int) -> np.ndarray:
    """``order``-fold forward difference in ``k`` of the grid values."""
    arr = np.asarray(values)
    for _ in range(order):
        arr = arr[1:] - arr[:-1]
    return arr


def generating_series(basis: KrawtchoukBasis, k: int, w):
    """``sum_r (1-t)^r / r! * phi_r(k) * w^r`` evaluated from the stored basis."""
    t = basis.params.t
    return total(
        basis.backend.array(
            (1 - t) ** r / math.factorial(r) * basis.polys[r][k] * w**r for r in range(basis.n + 1)
        )
    )


def shift_identity_residual(params: BinomialParams):
    """Largest coefficient mismatch of ``P(k-1, w)(1 + (1-t)w) = P(k, w)(1 - tw)`` over ``1 <= k <= n``.

    This is the shift relation between neighbouring grid points, cleared of
    denominators; reading it at ``k + 1`` gives the forward shift.
    """
    t = params.t
    worst = 0
    for k in range(1, params.n + 1):
        lhs = poly_mul(generating_coefficients(params, k - 1), [1, 1 - t])
        rhs = poly_mul(generating_coefficients(params, k), [1, -t])
        worst = max(worst, max_abs(np.array(lhs, dtype=object) - np.array(rhs, dtype=object)))
    return worst


def euler_identity_residual(basis: KrawtchoukBasis):
    """Check ``w dP/dw`` against its closed form for every ``k``.

    The left side is ``sum_r (1-t)^r / r! * r * phi_r(k) w^r`` built from the
    stored basis; the right side is
    ``w P(k,w) ((1-t)k / (1+(1-t)w) - t(n-k) / (1-tw))``.  Both are multiplied
    by ``(1 + (1-t)w)(1 - tw)`` and compared as coefficient lists.
    """
    n, t = basis.n, basis.params.t
    clear = poly_mul([1, 1 - t], [1, -t])
    worst = 0
    for k in range(n + 1):
        series = [(1 - t) ** r / math.factorial(r) * r * basis.polys[r][k] for r in range(n + 1)]
        lhs = poly_mul(series, clear)
        bracket = [(1 - t) * k - t * (n - k), -(1 - t) * t * k - t * (1 - t) * (n - k)]
        rhs = poly_mul([0, 1], poly_mul(generating_coefficients(basis.params, k), bracket))
        diff = np.array(lhs, dtype=object) - np.array(rhs, dtype=object)
        worst = max(worst, max_abs(diff))
    return worst


def gram_matrix(basis: KrawtchoukBasis) -> np.ndarray:
    """``<phi_r, phi_s>_b`` for all pairs."""
    b = binomial_pmf(basis.params)
    size = basis.n + 1
    out = basis.backend.matrix(size)
    for r in range(size):
        for s in range(r, size):
            out[r, s] = out[s, r] = inner_weighted(basis.polys[r], basis.polys[s], b)
    return out

