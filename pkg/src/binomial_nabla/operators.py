"""Finite differences on {0,...,n}, their adjoints and dense matrices.

Pointwise operators act on :class:`GridFunction` values with the
zero-padding convention ``f(-1) = f(n+1) = 0``.  For ``nabla_n`` the boundary
coefficients vanish so the convention never matters; for the plain left and
right differences it does, e.g. ``nabla_right(1)`` is ``-1`` at ``k = n``.

:func:`matrix_of` builds the same operators from their three-point stencils
independently of the pointwise code, so the two routes can check each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import (
    Backend,
    BinomialParams,
    GridFunction,
    binomial_pmf,
    common_backend,
)

__all__ = [
    "DerivativeFamily",
    "LinearOperatorMatrix",
    "OPERATOR_TAGS",
    "alpha_derivative",
    "diag_D",
    "diag_D_inverse",
    "matrix_of",
    "nabla_left",
    "nabla_n",
    "nabla_right",
    "nabla_star",
    "nabla_tilde",
]

OPERATOR_TAGS = ("nabla_n", "nabla_star", "nabla_tilde", "D", "D_inverse", "alpha_derivative")


@dataclass(frozen=True, eq=False)
class DerivativeFamily:
    """Mixing coefficients ``alpha_k`` in ``[0, 1]`` of a spatial derivative.

    At each ``k`` the derivative is ``alpha_k * left + (1 - alpha_k) * right``.
    """

    alpha: np.ndarray

    def __post_init__(self):
        grid = GridFunction(self.alpha)
        if any(a < 0 or a > 1 for a in grid):
            raise ValueError("every alpha_k must lie in [0, 1]")
        object.__setattr__(self, "alpha", grid.values)

    @property
    def n(self) -> int:
        return self.alpha.size - 1

    @property
    def backend(self) -> Backend:
        return Backend.of_array(self.alpha)

    @classmethod
    def canonical(cls, n: int, backend: Backend = Backend.EXACT) -> "DerivativeFamily":
        """``alpha_k = k / n``, the family that reproduces ``nabla_n``."""
        return cls(backend.array(Fraction(k, n) for k in range(n + 1)))

    @classmethod
    def left(cls, n: int, backend: Backend = Backend.EXACT) -> "DerivativeFamily":
        return cls(backend.array([1] * (n + 1)))

    @classmethod
    def right(cls, n: int, backend: Backend = Backend.EXACT) -> "DerivativeFamily":
        return cls(backend.array([0] * (n + 1)))

    @classmethod
    def constant(cls, n: int, value, backend: Backend = Backend.EXACT) -> "DerivativeFamily":
        return cls(backend.array([value] * (n + 1)))

    @classmethod
    def parse(cls, text: str, n: int, backend: Backend = Backend.EXACT) -> "DerivativeFamily":
        """Build a family from ``canonical``, ``left``, ``right``, ``const:<x>`` or ``list:<a0,...,an>``."""
        text = text.strip()
        if text in ("canonical", "left", "right"):
            return getattr(cls, text)(n, backend)
        kind, _, rest = text.partition(":")
        if kind == "const" and rest:
            return cls.constant(n, backend.parse(rest), backend)
        if kind == "list" and rest:
            values = [backend.parse(x) for x in rest.split(",")]
            if len(values) != n + 1:
                raise ValueError(f"family list has {len(values)} entries, expected n + 1 = {n + 1}")
            return cls(backend.array(values))
        raise ValueError(f"unknown family specification {text!r}")

    def describe(self) -> list[str]:
        return [str(a) for a in self.alpha.tolist()]


@dataclass(frozen=True, eq=False)
class LinearOperatorMatrix:
    """Dense square matrix of an operator on grid functions, with an identity tag."""

    entries: np.ndarray
    label: str = "composed"

    def __post_init__(self):
        arr = np.asarray(self.entries)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {arr.shape}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def backend(self) -> Backend:
        return Backend.of_array(self.entries)

    def apply(self, f: GridFunction) -> GridFunction:
        common_backend(self, f)
        if f.n != self.n:
            raise ValueError(f"dimension mismatch: matrix n = {self.n}, grid n = {f.n}")
        return GridFunction(self.entries.dot(f.values))

    def __matmul__(self, other):
        if isinstance(other, GridFunction):
            return self.apply(other)
        if isinstance(other, LinearOperatorMatrix):
            common_backend(self, other)
            return LinearOperatorMatrix(self.entries.dot(other.entries), "composed")
        return NotImplemented

    def transpose(self, label: str = "composed") -> "LinearOperatorMatrix":
        return LinearOperatorMatrix(self.entries.T, label)

    @property
    def T(self) -> "LinearOperatorMatrix":
        return self.transpose()

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinearOperatorMatrix):
            return NotImplemented
        return self.entries.shape == other.entries.shape and bool(np.all(self.entries == other.entries))

    __hash__ = None

    def to_float(self) -> np.ndarray:
        return self.entries.astype(np.float64)

    def bandwidth(self) -> int:
        """Largest ``|i - j|`` over the nonzero entries."""
        rows, cols = np.nonzero(self.entries != 0)
        return int(np.max(np.abs(rows - cols))) if rows.size else 0


def _neighbours(values: np.ndarray, backend: Backend) -> tuple[np.ndarray, np.ndarray]:
    """``(f(k-1), f(k+1))`` for every k, padded with zeros outside [0, n]."""
    zero = backend.zeros(1)
    return np.concatenate([zero, values[:-1]]), np.concatenate([values[1:], zero])


def _ratios(n: int, backend: Backend) -> np.ndarray:
    """``k / n`` for k = 0..n."""
    return backend.array(Fraction(k, n) for k in range(n + 1))


def nabla_left(f: GridFunction) -> GridFunction:
    """``f(k) - f(k-1)`` with ``f(-1) = 0``."""
    prev, _ = _neighbours(f.values, f.backend)
    return GridFunction(f.values - prev)


def nabla_right(f: GridFunction) -> GridFunction:
    """``f(k+1) - f(k)`` with ``f(n+1) = 0``."""
    _, nxt = _neighbours(f.values, f.backend)
    return GridFunction(nxt - f.values)


def nabla_n(f: GridFunction) -> GridFunction:
    """The interpolated difference ``(k/n) left + ((n-k)/n) right``."""
    w = _ratios(f.n, f.backend)
    return GridFunction(w * nabla_left(f).values + (1 - w) * nabla_right(f).values)


def alpha_derivative(family: DerivativeFamily, f: GridFunction) -> GridFunction:
    common_backend(family, f)
    if family.n != f.n:
        raise ValueError(f"dimension mismatch: family n = {family.n}, grid n = {f.n}")
    a = family.alpha
    return GridFunction(a * nabla_left(f).values + (1 - a) * nabla_right(f).values)


def nabla_star(g: GridFunction) -> GridFunction:
    """Adjoint of :func:`nabla_n` for the unweighted scalar product.

    ``(1/n) [(n-k+1) g(k-1) - (n-2k) g(k) - (k+1) g(k+1)]``, zero-padded.
    """
    n, backend = g.n, g.backend
    k = np.arange(n + 1)
    prev, nxt = _neighbours(g.values, backend)
    lower = backend.array(Fraction(n - j + 1, n) for j in k)
    diag = backend.array(Fraction(n - 2 * j, n) for j in k)
    upper = backend.array(Fraction(j + 1, n) for j in k)
    return GridFunction(lower * prev - diag * g.values - upper * nxt)


def nabla_tilde(params: BinomialParams, f: GridFunction) -> GridFunction:
    """Adjoint of :func:`nabla_n` for the ``b_{n,t}``-weighted scalar product.

    ``(k/n)((1-t)/t) f(k-1) - ((n-2k)/n) f(k) - ((n-k)/n)(t/(1-t)) f(k+1)``.
    """
    params.require_interior()
    common_backend(params, f)
    n, backend = f.n, f.backend
    if params.n != n:
        raise ValueError(f"dimension mismatch: params n = {params.n}, grid n = {n}")
    odds = params.odds
    w = _ratios(n, backend)
    prev, nxt = _neighbours(f.values, backend)
    return GridFunction(w / odds * prev - (1 - 2 * w) * f.values - (1 - w) * odds * nxt)


def _tridiagonal(lower: Sequence, diag: Sequence, upper: Sequence, backend: Backend) -> np.ndarray:
    """Matrix with row k = (lower[k], diag[k], upper[k]) at columns (k-1, k, k+1)."""
    size = len(diag)
    m = backend.matrix(size)
    for k in range(size):
        m[k, k] = backend.scalar(diag[k])
        if k > 0:
            m[k, k - 1] = backend.scalar(lower[k])
        if k < size - 1:
            m[k, k + 1] = backend.scalar(upper[k])
    return m


def _alpha_stencil(alpha: Sequence, backend: Backend) -> np.ndarray:
    lower = [-a for a in alpha]
    diag = [2 * a - 1 for a in alpha]
    upper = [1 - a for a in alpha]
    return _tridiagonal(lower, diag, upper, backend)


def diag_D(params: BinomialParams) -> LinearOperatorMatrix:
    """Multiplication by ``b_{n,t}`` as a diagonal matrix."""
    b = binomial_pmf(params)
    m = params.backend.matrix(params.n + 1)
    for k, v in enumerate(b):
        m[k, k] = v
    return LinearOperatorMatrix(m, "D")


def diag_D_inverse(params: BinomialParams) -> LinearOperatorMatrix:
    params.require_interior()
    b = binomial_pmf(params)
    m = params.backend.matrix(params.n + 1)
    for k, v in enumerate(b):
        m[k, k] = 1 / v
    return LinearOperatorMatrix(m, "D_inverse")


def matrix_of(
    tag: str,
    params: BinomialParams | None = None,
    *,
    n: int | None = None,
    family: DerivativeFamily | None = None,
    backend: Backend | None = None,
) -> LinearOperatorMatrix:
    """Dense matrix of the operator named by ``tag``.

    ``nabla_n`` and ``nabla_star`` need only ``n`` (taken from ``params`` when
    given); ``nabla_tilde``, ``D`` and ``D_inverse`` need ``params``;
    ``alpha_derivative`` needs ``family``.
    """
    if tag not in OPERATOR_TAGS:
        raise ValueError(f"unknown operator tag {tag!r}; expected one of {', '.join(OPERATOR_TAGS)}")
    if params is not None:
        n = params.n if n is None else n
        backend = params.backend if backend is None else backend
    backend = Backend.EXACT if backend is None else backend

    if tag == "alpha_derivative":
        if family is None:
            raise ValueError("alpha_derivative needs a family")
        return LinearOperatorMatrix(_alpha_stencil(family.alpha.tolist(), family.backend), tag)
    if tag in ("D", "D_inverse", "nabla_tilde"):
        if params is None:
            raise ValueError(f"{tag} needs binomial parameters")
        if tag == "D":
            return diag_D(params)
        if tag == "D_inverse":
            return diag_D_inverse(params)
        odds = params.odds
        ks = range(n + 1)
        lower = [Fraction(k, n) / odds for k in ks]
        diag = [-Fraction(n - 2 * k, n) for k in ks]
        upper = [-Fraction(n - k, n) * odds for k in ks]
        return LinearOperatorMatrix(_tridiagonal(lower, diag, upper, backend), tag)
    if n is None:
        raise ValueError(f"{tag} needs n")
    ks = range(n + 1)
    if tag == "nabla_n":
        lower = [-Fraction(k, n) for k in ks]
        diag = [Fraction(2 * k - n, n) for k in ks]
        upper = [Fraction(n - k, n) for k in ks]
    else:
        lower = [Fraction(n - k + 1, n) for k in ks]
        diag = [-Fraction(n - 2 * k, n) for k in ks]
        upper = [-Fraction(k + 1, n) for k in ks]
    return LinearOperatorMatrix(_tridiagonal(lower, diag, upper, backend), tag)
