"""Scalar backends, grid functions on {0,...,n}, binomial weights and moments.

Every quantity in the package lives on the finite grid ``{0, ..., n}`` and is
stored as a one-dimensional numpy array of length ``n + 1``.  Two scalar
backends are supported:

- ``Backend.EXACT``: entries are :class:`fractions.Fraction` held in an
  ``object`` array, so identities can be checked with zero residual;
- ``Backend.FLOAT``: entries are ``float64``.

The two are never mixed implicitly.  Combining an exact and a float object
raises :class:`BackendMismatch`.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral, Rational
from typing import Iterable, Sequence, TextIO

import numpy as np

__all__ = [
    "Backend",
    "BackendMismatch",
    "BinomialParams",
    "GridFunction",
    "WeightVector",
    "binomial_coefficients",
    "binomial_pmf",
    "entropy_functional",
    "inner_unweighted",
    "inner_weighted",
    "max_abs",
    "mean_variance",
    "pmf_time_derivative",
    "read_grid_csv",
    "total",
    "write_grid_csv",
]

#: Tolerance on the total mass of a float probability vector.
PROBABILITY_TOL = 1e-12

#: Decimal inputs are rounded to the nearest rational with at most this denominator.
MAX_DENOMINATOR = 10**6


class BackendMismatch(TypeError):
    """Raised when exact and floating point values meet in one operation."""


class Backend(str, enum.Enum):
    EXACT = "exact"
    FLOAT = "float"

    def scalar(self, x) -> Fraction | float:
        """Convert ``x`` into this backend's scalar type."""
        if self is Backend.EXACT:
            if isinstance(x, float):
                # a float reaching the exact backend was almost certainly a decimal literal
                return Fraction(x).limit_denominator(MAX_DENOMINATOR)
            return Fraction(x)
        return float(x)

    def parse(self, text: str) -> Fraction | float:
        """Parse ``"p/q"`` or a decimal string."""
        value = Fraction(text.strip())
        if self is Backend.EXACT:
            return value.limit_denominator(MAX_DENOMINATOR)
        return float(value)

    def array(self, values: Iterable) -> np.ndarray:
        values = list(values)
        if self is Backend.EXACT:
            out = np.empty(len(values), dtype=object)
            out[:] = [self.scalar(v) for v in values]
            return out
        return np.asarray(values, dtype=np.float64)

    def zeros(self, size: int) -> np.ndarray:
        return self.array([0] * size)

    def matrix(self, rows: int, cols: int | None = None) -> np.ndarray:
        cols = rows if cols is None else cols
        if self is Backend.EXACT:
            out = np.empty((rows, cols), dtype=object)
            out.fill(Fraction(0))
            return out
        return np.zeros((rows, cols))

    @classmethod
    def of_scalar(cls, x) -> "Backend":
        if isinstance(x, (bool, np.bool_)):
            raise TypeError("booleans are not scalars")
        if isinstance(x, (float, np.floating)):
            return cls.FLOAT
        if isinstance(x, (Integral, Rational)):
            return cls.EXACT
        raise TypeError(f"unsupported scalar type {type(x).__name__}")

    @classmethod
    def of_array(cls, arr: np.ndarray) -> "Backend":
        return cls.EXACT if arr.dtype == object else cls.FLOAT


def common_backend(*items) -> Backend:
    """Return the shared backend of ``items`` or raise :class:`BackendMismatch`."""
    found = {item.backend for item in items}
    if len(found) != 1:
        raise BackendMismatch("cannot mix exact and float values: " + ", ".join(sorted(b.value for b in found)))
    return found.pop()


def total(values: np.ndarray | Sequence) -> Fraction | float:
    """Sum with exact arithmetic for Fractions and ``math.fsum`` for floats."""
    arr = np.asarray(values)
    if arr.dtype == object:
        return sum(arr.tolist(), Fraction(0))
    return math.fsum(arr.tolist())


def max_abs(values: np.ndarray) -> Fraction | float:
    arr = np.asarray(values)
    if arr.size == 0:
        return 0
    return max(abs(v) for v in arr.ravel().tolist())


def _normalize(values) -> np.ndarray:
    """Coerce input into a read-only float64 or Fraction-object array."""
    if isinstance(values, GridFunction):
        return values.values
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"grid values must be one-dimensional, got shape {arr.shape}")
    if arr.dtype == object:
        kinds = {Backend.of_scalar(v) for v in arr.tolist()}
        if len(kinds) > 1:
            raise BackendMismatch("grid values mix Fractions and floats")
        backend = kinds.pop() if kinds else Backend.FLOAT
        arr = backend.array(arr.tolist())
    elif np.issubdtype(arr.dtype, np.integer):
        arr = Backend.EXACT.array(arr.tolist())
    elif np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    else:
        raise TypeError(f"unsupported grid dtype {arr.dtype}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A real function on ``{0, ..., n}`` stored as its ``n + 1`` values.

    Integer and :class:`~fractions.Fraction` inputs select the exact backend,
    float inputs the float backend.  Values outside ``[0, n]`` are never
    stored; boundary conventions belong to the operators.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = _normalize(self.values)
        if arr.size < 2:
            raise ValueError("a grid function needs n >= 1, i.e. at least two values")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def backend(self) -> Backend:
        return Backend.of_array(self.values)

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, k):
        return self.values[k]

    def __iter__(self):
        return iter(self.values.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridFunction):
            return NotImplemented
        return self.n == other.n and bool(np.all(self.values == other.values))

    __hash__ = None

    def __repr__(self) -> str:
        return f"{type(self).__name__}({[str(v) if isinstance(v, Fraction) else v for v in self]})"

    def _binary(self, other, op):
        if isinstance(other, GridFunction):
            common_backend(self, other)
            _check_same_n(self, other)
            return GridFunction(op(self.values, other.values))
        if isinstance(other, (np.ndarray, list, tuple)):
            return NotImplemented
        if not isinstance(other, Integral) and Backend.of_scalar(other) is not self.backend:
            raise BackendMismatch(f"cannot combine a {self.backend.value} grid with {other!r}")
        return GridFunction(op(self.values, self.backend.scalar(other)))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return GridFunction(-self.values)

    def mean_zero(self) -> bool:
        return total(self.values) == 0

    def to_float(self) -> "GridFunction":
        return GridFunction(self.values.astype(np.float64))

    def to_exact(self) -> "GridFunction":
        return GridFunction(Backend.EXACT.array(self.values.tolist()))

    @classmethod
    def constant(cls, n: int, c, backend: Backend = Backend.EXACT) -> "GridFunction":
        return cls(backend.array([c] * (n + 1)))

    @classmethod
    def delta(cls, n: int, j: int, backend: Backend = Backend.EXACT) -> "GridFunction":
        values = [0] * (n + 1)
        values[j] = 1
        return cls(backend.array(values))

    @classmethod
    def identity(cls, n: int, backend: Backend = Backend.EXACT) -> "GridFunction":
        return cls(backend.array(range(n + 1)))


@dataclass(frozen=True, eq=False)
class WeightVector(GridFunction):
    """A grid function used as a measure.

    ``nonnegative`` demands every entry is ``>= 0``; ``probability`` also
    demands the entries sum to one (exactly for Fractions, within
    :data:`PROBABILITY_TOL` for floats).
    """

    nonnegative: bool = True
    probability: bool = False

    def __post_init__(self):
        super().__post_init__()
        if (self.nonnegative or self.probability) and any(v < 0 for v in self):
            raise ValueError("weight vector has a negative entry")
        if self.probability:
            mass = total(self.values)
            if self.backend is Backend.EXACT and mass != 1:
                raise ValueError(f"probability vector sums to {mass}, not 1")
            if self.backend is Backend.FLOAT and abs(mass - 1.0) > PROBABILITY_TOL:
                raise ValueError(f"probability vector sums to {mass!r}, not 1")

    @property
    def strictly_positive(self) -> bool:
        return all(v > 0 for v in self)


@dataclass(frozen=True)
class BinomialParams:
    """Parameters ``(n, t)`` of the binomial law ``b_{n,t}``.

    ``t`` given as an int or Fraction selects the exact backend; a float
    selects the float backend.  Use :meth:`parse` for ``"p/q"`` strings.
    """

    n: int
    t: Fraction | float

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, Integral) or self.n < 1:
            raise ValueError(f"n must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        backend = Backend.of_scalar(self.t)
        object.__setattr__(self, "t", backend.scalar(self.t) if backend is Backend.FLOAT else Fraction(self.t))
        if not 0 <= self.t <= 1:
            raise ValueError(f"t must lie in [0, 1], got {self.t}")

    @classmethod
    def parse(cls, n: int, text: str, backend: Backend = Backend.EXACT) -> "BinomialParams":
        return cls(n, backend.parse(text))

    @property
    def backend(self) -> Backend:
        return Backend.of_scalar(self.t)

    @property
    def interior(self) -> bool:
        return 0 < self.t < 1

    def require_interior(self) -> None:
        if not self.interior:
            raise ValueError(f"operation needs t in (0, 1), got t = {self.t}")

    def with_backend(self, backend: Backend) -> "BinomialParams":
        if backend is self.backend:
            return self
        return BinomialParams(self.n, backend.scalar(self.t))

    @property
    def odds(self):
        """``t / (1 - t)``."""
        self.require_interior()
        return self.t / (1 - self.t)


def _check_same_n(*grids: GridFunction) -> int:
    sizes = {g.n for g in grids}
    if len(sizes) != 1:
        raise ValueError(f"dimension mismatch: grids have n = {sorted(sizes)}")
    return sizes.pop()


def binomial_coefficients(n: int) -> list[int]:
    """``[C(n, 0), ..., C(n, n)]`` by the multiplicative recurrence, in exact integers."""
    coeffs = [1]
    for k in range(1, n + 1):
        coeffs.append(coeffs[-1] * (n - k + 1) // k)
    return coeffs


def binomial_pmf(params: BinomialParams) -> WeightVector:
    """The binomial probability vector ``C(n,k) t^k (1-t)^(n-k)``."""
    n, t = params.n, params.t
    coeffs = binomial_coefficients(n)
    if params.backend is Backend.EXACT:
        values = [c * t**k * (1 - t) ** (n - k) for k, c in enumerate(coeffs)]
        return WeightVector(Backend.EXACT.array(values), probability=True)
    if t in (0.0, 1.0) or n <= 1000:
        values = [float(c) * t**k * (1 - t) ** (n - k) for k, c in enumerate(coeffs)]
    else:
        # C(n, n/2) overflows a double beyond n ~ 1030
        lt, l1t = math.log(t), math.log1p(-t)
        values = [
            math.exp(math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1) + k * lt + (n - k) * l1t)
            for k in range(n + 1)
        ]
    return WeightVector(np.asarray(values), probability=True)


def inner_unweighted(f: GridFunction, g: GridFunction):
    """``sum_k f(k) g(k)``."""
    common_backend(f, g)
    _check_same_n(f, g)
    return total(f.values * g.values)


def inner_weighted(f: GridFunction, g: GridFunction, w: WeightVector, *, require_positive: bool = False):
    """``sum_k f(k) g(k) w(k)``.

    Set ``require_positive`` when the weight must define a genuine scalar
    product (adjoints); a zero weight then raises ``ValueError``.
    """
    common_backend(f, g, w)
    _check_same_n(f, g, w)
    if require_positive and not (isinstance(w, WeightVector) and w.strictly_positive):
        raise ValueError("weight must be strictly positive to define a scalar product")
    return total(f.values * g.values * w.values)


def mean_variance(f: GridFunction, w: WeightVector):
    """Return ``(E_w f, Var_w f)`` for a probability vector ``w``."""
    if not (isinstance(w, WeightVector) and w.probability):
        raise ValueError("mean_variance needs a probability vector")
    common_backend(f, w)
    _check_same_n(f, w)
    mean = total(f.values * w.values)
    second = total(f.values * f.values * w.values)
    return mean, second - mean * mean


def _theta(x: float) -> float:
    return x * math.log(x)


def entropy_functional(f: GridFunction, w: WeightVector) -> float:
    """``sum_k Theta(f(k)) w(k) - Theta(sum_k f(k) w(k))`` with ``Theta(x) = x ln x``.

    Float backend only; ``f`` must be strictly positive.
    """
    if f.backend is Backend.EXACT or w.backend is Backend.EXACT:
        raise BackendMismatch("entropy needs logarithms; convert to the float backend first")
    if not (isinstance(w, WeightVector) and w.probability):
        raise ValueError("entropy_functional needs a probability vector")
    _check_same_n(f, w)
    if any(v <= 0 for v in f):
        raise ValueError("entropy_functional needs a strictly positive f")
    mean = math.fsum(f.values * w.values)
    return math.fsum(_theta(fk) * wk for fk, wk in zip(f, w)) - _theta(mean)


def pmf_time_derivative(params: BinomialParams) -> GridFunction:
    """``d/dt b_{n,t}(k) = b_{n,t}(k) (k/t - (n-k)/(1-t))``."""
    params.require_interior()
    n, t = params.n, params.t
    b = binomial_pmf(params)
    factors = params.backend.array([k / t - (n - k) / (1 - t) for k in range(n + 1)])
    return GridFunction(b.values * factors)


def _format_scalar(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


def write_grid_csv(grid: GridFunction, out: TextIO) -> None:
    """Write ``grid`` as ``k,value`` rows under a header line."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["k", "value"])
    for k, v in enumerate(grid):
        writer.writerow([k, _format_scalar(v)])


def read_grid_csv(source: TextIO | str, backend: Backend = Backend.FLOAT) -> GridFunction:
    if isinstance(source, str):
        source = io.StringIO(source)
    rows = list(csv.DictReader(source))
    ks = [int(r["k"]) for r in rows]
    if ks != list(range(len(ks))):
        raise ValueError("grid CSV rows must list k = 0, 1, ..., n in order")
    return GridFunction(backend.array(backend.parse(r["value"]) for r in rows))
