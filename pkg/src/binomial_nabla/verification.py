"""Batch identity suite for one ``(n, t)``: every closed-form relation, checked exactly or to a tolerance."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import Backend, BinomialParams, GridFunction, binomial_pmf, inner_unweighted, inner_weighted, max_abs
from .krawtchouk import (
    IdentityViolation,
    eigen_factor,
    euler_identity_residual,
    generate_basis,
    gram_matrix,
    ladder_down,
    ladder_up,
    shift_identity_residual,
)
from .operators import diag_D, diag_D_inverse, matrix_of, nabla_n, nabla_star, nabla_tilde
from .translation import transport_identity_exact


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    max_residual: Fraction | float
    passed: bool

    def to_dict(self) -> dict:
        r = self.max_residual
        return {"identity": self.name, "max_residual": str(r) if isinstance(r, Fraction) else float(r), "passed": self.passed}


def random_grid(rng: np.random.Generator, n: int, backend: Backend) -> GridFunction:
    """Random grid function; small-denominator rationals for the exact backend."""
    if backend is Backend.EXACT:
        nums = rng.integers(-20, 21, n + 1)
        dens = rng.integers(1, 8, n + 1)
        return GridFunction(backend.array(Fraction(int(a), int(b)) for a, b in zip(nums, dens)))
    return GridFunction(rng.normal(size=n + 1))


def run_identity_suite(
    params: BinomialParams, *, seed: int = 0, pairs: int = 100, tol: float = 1e-9
) -> list[IdentityCheck]:
    params.require_interior()
    exact = params.backend is Backend.EXACT
    n = params.n
    b = binomial_pmf(params)
    rng = np.random.default_rng(seed)
    results = []

    def record(name, residual, scale=1.0):
        ok = residual == 0 if exact else residual <= tol * max(1.0, scale)
        results.append(IdentityCheck(name, residual, bool(ok)))

    worst_plain, worst_weighted, scale = 0, 0, 1.0
    for _ in range(pairs):
        f, g = random_grid(rng, n, params.backend), random_grid(rng, n, params.backend)
        a, c = inner_unweighted(nabla_n(f), g), inner_unweighted(f, nabla_star(g))
        worst_plain = max(worst_plain, abs(a - c))
        a, c = inner_weighted(nabla_n(f), g, b), inner_weighted(f, nabla_tilde(params, g), b)
        worst_weighted = max(worst_weighted, abs(a - c))
        scale = max(scale, abs(float(a)))
    record("unweighted adjointness <nabla_n f, g> = <f, nabla_star g>", worst_plain, scale)
    record("weighted adjointness <nabla_n f, g>_b = <f, nabla_tilde g>_b", worst_weighted, scale)

    nabla_mat = matrix_of("nabla_n", params)
    star_mat = matrix_of("nabla_star", params)
    record("matrix of nabla_star is the transpose of nabla_n", max_abs(star_mat.entries - nabla_mat.entries.T))
    conj = diag_D_inverse(params) @ star_mat @ diag_D(params)
    tilde_mat = matrix_of("nabla_tilde", params)
    record("conjugation nabla_tilde = D^-1 nabla_star D", max_abs(conj.entries - tilde_mat.entries), float(max_abs(tilde_mat.entries)))

    basis = generate_basis(params)
    gram = gram_matrix(basis)
    expected = params.backend.matrix(n + 1)
    for r, c in enumerate(basis.norms):
        expected[r, r] = c
    record("orthogonality <phi_r, phi_s>_b = C_{n,r} delta_rs", max_abs(gram - expected), float(max(basis.norms)))

    for name, step in (("lowering nabla_n phi_r", ladder_down), ("raising nabla_tilde phi_r", ladder_up)):
        try:
            for r in range(n + 1):
                step(basis, r, tol=tol)
            record(name, 0 if exact else 0.0)
        except IdentityViolation as err:
            results.append(IdentityCheck(name, err.residual, False))

    worst = 0
    for r in range(n + 1):
        phi = basis.phi(r)
        got = nabla_tilde(params, nabla_n(phi))
        worst = max(worst, max_abs((got - phi * eigen_factor(params, r)).values))
    record("eigenfunctions nabla_tilde nabla_n phi_r = lambda_r phi_r", worst, float(max_abs(basis.values())))

    if exact:
        record("generating-function shift identities", shift_identity_residual(params))
        record("generating-function Euler identity", euler_identity_residual(basis))

    worst = 0
    for _ in range(min(pairs, 20)):
        res = transport_identity_exact(random_grid(rng, n, params.backend), params)
        worst = max(worst, res.deviation)
    record("transport identity d/dt E_b f = n E_b nabla_n f", worst)
    return results
