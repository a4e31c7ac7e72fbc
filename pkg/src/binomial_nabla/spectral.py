"""Spectrum of nabla_tilde . nabla_n, the binomial Poincare inequality and log-Sobolev checks."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .core import (
    Backend,
    BinomialParams,
    GridFunction,
    binomial_pmf,
    common_backend,
    entropy_functional,
    inner_weighted,
    max_abs,
    total,
)
from .krawtchouk import eigen_factor, generate_basis, norm_constant
from .operators import matrix_of, nabla_n, nabla_right, nabla_tilde

__all__ = [
    "LogSobolevResult",
    "PoincareReport",
    "PoissonLimitRow",
    "SearchResult",
    "SpectrumReport",
    "counterexample_search",
    "dirichlet_form",
    "equality_directions",
    "klaassen_rhs",
    "log_sobolev_check",
    "log_sobolev_margin",
    "operator_spectrum",
    "poincare_check",
    "poisson_limit_table",
    "predicted_spectrum",
    "rayleigh_quotient",
]


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass(frozen=True)
class SpectrumReport:
    computed: tuple
    predicted: tuple
    max_deviation: float | Fraction

    def multiplicities(self) -> dict:
        """Multiplicity of each predicted eigenvalue."""
        return dict(Counter(self.predicted))

    def to_dict(self) -> dict:
        return {k: _jsonable(v) for k, v in asdict(self).items()}


@dataclass(frozen=True)
class PoincareReport:
    lhs: float | Fraction
    rhs: float | Fraction
    slack: float | Fraction
    equality_flag: bool
    projection_residual: float | Fraction

    def to_dict(self) -> dict:
        return {k: _jsonable(v) for k, v in asdict(self).items()}


def predicted_spectrum(params: BinomialParams) -> tuple:
    """Sorted multiset ``{r(n-r+1) / (n^2 t(1-t)) : r = 0..n}``."""
    params.require_interior()
    return tuple(sorted(eigen_factor(params, r) for r in range(params.n + 1)))


def rayleigh_quotient(params: BinomialParams, r: int):
    """``<phi_r, nabla_tilde nabla_n phi_r>_b / C_{n,r}``; exact for rational ``t``."""
    basis = generate_basis(params)
    phi = basis.phi(r)
    b = binomial_pmf(params)
    return inner_weighted(phi, nabla_tilde(params, nabla_n(phi)), b) / norm_constant(params, r)


def operator_spectrum(params: BinomialParams) -> SpectrumReport:
    """Eigenvalues of ``nabla_tilde . nabla_n`` against the predicted multiset.

    Float parameters: the matrix is symmetrized as ``D^{1/2} M D^{-1/2}`` and
    handed to a symmetric eigensolver.  Exact parameters: the Rayleigh
    quotient of each ``phi_r`` is reported instead, so the comparison is exact.
    """
    params.require_interior()
    predicted = predicted_spectrum(params)
    if params.backend is Backend.EXACT:
        computed = tuple(sorted(rayleigh_quotient(params, r) for r in range(params.n + 1)))
    else:
        m = (matrix_of("nabla_tilde", params) @ matrix_of("nabla_n", params)).to_float()
        root_b = np.sqrt(binomial_pmf(params).values)
        s = root_b[:, None] * m / root_b[None, :]
        computed = tuple(np.linalg.eigvalsh(0.5 * (s + s.T)).tolist())
    deviation = max(abs(c - p) for c, p in zip(computed, predicted))
    return SpectrumReport(computed, predicted, deviation)


def dirichlet_form(f: GridFunction, params: BinomialParams, derivative=nabla_n):
    """``sum_k b(k) (derivative f)(k)^2``."""
    d = derivative(f)
    return inner_weighted(d, d, binomial_pmf(params))


def equality_directions(params: BinomialParams) -> list[GridFunction]:
    """Vectors spanning ``span{phi_1, phi_n}``, rescaled to stay finite for large ``n``.

    ``phi_1 ~ k - nt`` and ``phi_n ~ (-t/(1-t))^(n-k)``; the latter is
    rewritten as ``((t-1)/t)^k`` when ``t > 1/2`` so no power exceeds one in
    modulus.
    """
    n, t, backend = params.n, params.t, params.backend
    linear = GridFunction(backend.array(k - n * t for k in range(n + 1)))
    if n == 1:
        return [linear]
    if t <= Fraction(1, 2):
        top = backend.array((-t / (1 - t)) ** (n - k) for k in range(n + 1))
    else:
        top = backend.array(((t - 1) / t) ** k for k in range(n + 1))
    return [linear, GridFunction(top)]


def poincare_check(f: GridFunction, params: BinomialParams, *, tol: float = 1e-8) -> PoincareReport:
    """Compare ``Var_b f`` with ``n t(1-t) sum_k b(k) (nabla_n f)(k)^2``.

    ``f`` is centred first.  ``equality_flag`` is set when the centred
    function lies in ``span{phi_1, phi_n}``: exactly for rationals, within
    ``tol`` relative to ``max |f|`` for floats.  ``projection_residual`` is
    the max-norm distance from that span.
    """
    params.require_interior()
    common_backend(f, params)
    n, t = params.n, params.t
    b = binomial_pmf(params)
    centred = f - total(f.values * b.values)
    lhs = inner_weighted(centred, centred, b)
    rhs = n * t * (1 - t) * dirichlet_form(centred, params)

    projection = centred * 0
    for v in equality_directions(params):
        norm = inner_weighted(v, v, b)
        if norm != 0:
            projection = projection + v * (inner_weighted(centred, v, b) / norm)
    residual = max_abs((centred - projection).values)
    if params.backend is Backend.EXACT:
        equality = residual == 0
    else:
        equality = residual <= tol * max(1.0, float(max_abs(centred.values)))
    return PoincareReport(lhs, rhs, rhs - lhs, bool(equality), residual)


def klaassen_rhs(f: GridFunction, params: BinomialParams):
    """``t sum_k b(k) (n-k) (nabla_right f)(k)^2``; the ``k = n`` term has weight zero."""
    params.require_interior()
    common_backend(f, params)
    n = params.n
    d = nabla_right(f).values
    weights = params.backend.array(n - k for k in range(n + 1))
    return params.t * total(binomial_pmf(params).values * weights * d * d)


@dataclass(frozen=True)
class PoissonLimitRow:
    n: int
    t: float
    binomial_constant: float
    poisson_constant: float
    gap: float
    lhs: float
    rhs: float
    slack: float
    dirichlet_nabla_n: float
    dirichlet_nabla_right: float

    CSV_FIELDS = ("n", "t", "binomial_constant", "poisson_constant", "gap")


def poisson_limit_table(
    lam: float, n_list: Sequence[int], f_spec: Callable[[int], float]
) -> list[PoissonLimitRow]:
    """Sweep ``n`` with ``t = lam / n``.

    For each ``n`` the Poincare check runs on ``k -> f_spec(k)`` restricted to
    ``[0, n]``, and the binomial constant ``n t (1-t) = lam (1 - lam/n)`` is
    reported next to the Poisson constant ``lam``.  The two Dirichlet forms
    (``nabla_n`` and the right difference, both under ``b_{n,t}``) are kept
    so their convergence can be inspected.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    rows = []
    for n in n_list:
        if n <= lam:
            raise ValueError(f"need n > lambda, got n = {n}")
        params = BinomialParams(n, float(lam) / n)
        f = GridFunction(np.array([float(f_spec(k)) for k in range(n + 1)]))
        report = poincare_check(f, params)
        const = n * params.t * (1 - params.t)
        rows.append(
            PoissonLimitRow(
                n=n,
                t=params.t,
                binomial_constant=const,
                poisson_constant=float(lam),
                gap=float(lam) - const,
                lhs=report.lhs,
                rhs=report.rhs,
                slack=report.slack,
                dirichlet_nabla_n=dirichlet_form(f, params),
                dirichlet_nabla_right=dirichlet_form(f, params, nabla_right),
            )
        )
    return rows


@dataclass(frozen=True)
class LogSobolevResult:
    lhs: float
    rhs: float
    violated: bool

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "violated": self.violated, "margin": self.margin}


def log_sobolev_check(f: GridFunction, params: BinomialParams) -> LogSobolevResult:
    """Entropy of ``f`` against ``n t(1-t) sum_k b(k) (nabla_n f)(k)^2 / f(k)``."""
    params.require_interior()
    if f.backend is Backend.EXACT or params.backend is Backend.EXACT:
        f, params = f.to_float(), params.with_backend(Backend.FLOAT)
    if any(v <= 0 for v in f):
        raise ValueError("log-Sobolev check needs a strictly positive f")
    n, t = params.n, params.t
    b = binomial_pmf(params)
    lhs = entropy_functional(f, b)
    d = nabla_n(f).values
    rhs = n * t * (1 - t) * math.fsum(b.values * d * d / f.values)
    # entropy of a constant is zero only up to rounding
    return LogSobolevResult(lhs, rhs, lhs - rhs > 1e-12 * max(1.0, abs(rhs)))


def log_sobolev_margin(log_f: np.ndarray, params: BinomialParams) -> float:
    """``lhs - rhs`` for ``f = exp(log_f)`` rescaled to unit ``b``-mean.

    Both sides are homogeneous of degree one in ``f``, so without the
    normalisation the margin could be inflated by scaling alone.
    """
    f = np.exp(log_f - log_f.max())
    b = binomial_pmf(params).values
    f = f / math.fsum(f * b)
    return log_sobolev_check(GridFunction(f), params).margin


@dataclass(frozen=True)
class SearchResult:
    f: tuple
    margin: float
    lhs: float
    rhs: float
    trials: int
    seed: int
    trial_margins: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "f": list(self.f),
            "margin": self.margin,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "trials": self.trials,
            "seed": self.seed,
        }


def _search_trial(params: BinomialParams, rng: np.random.Generator, steps: int, symmetric: bool):
    n = params.n
    size = n // 2 + 1 if symmetric else n + 1

    def expand(g):
        if not symmetric:
            return g
        return np.concatenate([g, g[: (n + 1) // 2][::-1]])

    def score(g):
        # the ratio does not reward drifting towards constants, where the margin tends to 0
        full = expand(g)
        f = np.exp(full - full.max())
        result = log_sobolev_check(GridFunction(f), params)
        return result.lhs / result.rhs if result.rhs > 0 else -math.inf

    g = rng.normal(0.0, 1.5, size)
    best = score(g)
    # multiplicative perturbations of f are additive in log f
    scale = 1.0
    for _ in range(steps):
        proposal = np.clip(g + rng.normal(0.0, scale, size), -12.0, 12.0)
        value = score(proposal)
        if value > best:
            g, best = proposal, value
        else:
            scale = max(scale * 0.97, 1e-3)
    step, sweeps = 0.5, 0
    while step > 1e-6 and sweeps < 500:
        sweeps += 1
        improved = False
        for i in range(size):
            for direction in (1.0, -1.0):
                trial = g.copy()
                trial[i] = np.clip(trial[i] + direction * step, -12.0, 12.0)
                value = score(trial)
                # ignore gains at rounding level so the sweep terminates
                if value > best * (1 + 1e-14):
                    g, best, improved = trial, value, True
        if not improved:
            step *= 0.5
    return expand(g), best


def counterexample_search(
    params: BinomialParams,
    trials: int,
    seed: int,
    *,
    steps: int = 200,
    symmetric: bool = False,
) -> SearchResult | None:
    """Random search in ``log f`` for the largest log-Sobolev violation.

    Each trial draws a random start, runs ``steps`` multiplicative
    perturbations with a shrinking scale, then refines by coordinate descent.
    Trials use independent streams spawned from ``seed``.  ``f`` is reported
    with unit ``b``-mean.  Returns ``None`` when no trial finds a positive
    margin; ``symmetric`` restricts to ``f(k) = f(n-k)``.
    """
    params = params.with_backend(Backend.FLOAT)
    params.require_interior()
    if trials <= 0:
        return None
    best_g, best_margin, margins = None, -math.inf, []
    for child in np.random.SeedSequence(seed).spawn(trials):
        g, _ = _search_trial(params, np.random.default_rng(child), steps, symmetric)
        margin = log_sobolev_margin(g, params)
        margins.append(margin)
        if margin > best_margin:
            best_g, best_margin = g, margin
    if best_margin <= 0:
        return None
    f = np.exp(best_g - best_g.max())
    f = f / math.fsum(f * binomial_pmf(params).values)
    result = log_sobolev_check(GridFunction(f), params)
    return SearchResult(tuple(f.tolist()), result.margin, result.lhs, result.rhs, trials, seed, tuple(margins))
