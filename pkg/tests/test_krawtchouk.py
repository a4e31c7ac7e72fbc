import math
from fractions import Fraction as F

import numpy as np
import pytest

from binomial_nabla.core import Backend, BinomialParams, GridFunction, binomial_pmf, inner_weighted
from binomial_nabla.krawtchouk import (
    IdentityViolation,
    KrawtchoukBasis,
    eigen_factor,
    euler_identity_residual,
    expand_in_basis,
    forward_difference,
    generate_basis,
    generating_function,
    generating_series,
    gram_matrix,
    ladder_down,
    ladder_up,
    norm_constant,
    poly_mul,
    reconstruct,
    shift_identity_residual,
)
from binomial_nabla.operators import nabla_n, nabla_tilde
from binomial_nabla.verification import random_grid

LADDER_TS = [F(1, 4), F(1, 3), F(1, 2), F(3, 4)]


def _brute_force_coefficients(n, t, k):
    """Expand (1+(1-t)w)^k (1-tw)^(n-k) term by term over all choices of factors."""
    coeffs = [F(0)] * (n + 1)
    for i in range(k + 1):
        for j in range(n - k + 1):
            coeffs[i + j] += math.comb(k, i) * (1 - t) ** i * math.comb(n - k, j) * (-t) ** j
    return coeffs


class TestGenerateBasis:
    @pytest.mark.parametrize("n, t", [(1, F(1, 2)), (4, F(1, 3)), (9, F(3, 4)), (13, F(2, 11))])
    def test_closed_forms(self, n, t):
        basis = generate_basis(BinomialParams(n, t))
        assert list(basis.phi(0)) == [1] * (n + 1)
        assert list(basis.phi(1)) == [(k - n * t) / (1 - t) for k in range(n + 1)]
        assert list(basis.phi(n)) == [math.factorial(n) * (-t / (1 - t)) ** (n - k) for k in range(n + 1)]

    def test_n2_half(self):
        basis = generate_basis(BinomialParams(2, F(1, 2)))
        assert basis.phi(2)[0] == 2
        assert basis.values().tolist() == [[1, 1, 1], [-2, 0, 2], [2, -2, 2]]

    def test_matches_brute_force_expansion(self):
        n, t = 7, F(2, 5)
        basis = generate_basis(BinomialParams(n, t))
        for k in range(n + 1):
            coeffs = _brute_force_coefficients(n, t, k)
            for r in range(n + 1):
                assert basis.phi(r)[k] == math.factorial(r) / (1 - t) ** r * coeffs[r]

    def test_padding_conventions(self):
        basis = generate_basis(BinomialParams(3, F(1, 3)))
        assert all(v == 0 for v in basis.phi(-1)) and all(v == 0 for v in basis.phi(4))
        with pytest.raises(IndexError):
            basis.phi(5)

    def test_rejects_boundary(self):
        with pytest.raises(ValueError):
            generate_basis(BinomialParams(3, 0))

    def test_backend_kept_apart_in_cache(self):
        exact = generate_basis(BinomialParams(4, F(1, 4)))
        flt = generate_basis(BinomialParams(4, 0.25))
        assert exact.backend is Backend.EXACT and flt.backend is Backend.FLOAT
        assert flt.phi(3).values.dtype == np.float64

    def test_degree(self):
        for n in (3, 6, 10):
            basis = generate_basis(BinomialParams(n, F(1, 3)))
            for r in range(n + 1):
                assert all(v == 0 for v in forward_difference(basis.phi(r).values, r + 1))
                if r >= 1:
                    assert any(v != 0 for v in forward_difference(basis.phi(r).values, r))


class TestNorms:
    def test_r_zero(self):
        for n in range(1, 10):
            assert norm_constant(BinomialParams(n, F(2, 7)), 0) == 1

    def test_example(self):
        assert norm_constant(BinomialParams(2, F(1, 2)), 1) == 2

    @pytest.mark.parametrize("t", LADDER_TS)
    def test_orthogonality_exact(self, t):
        for n in range(1, 16):
            basis = generate_basis(BinomialParams(n, t))
            gram = gram_matrix(basis)
            for r in range(n + 1):
                for s in range(n + 1):
                    assert gram[r, s] == (basis.norms[r] if r == s else 0)

    def test_orthogonality_float_n60(self):
        basis = generate_basis(BinomialParams(60, 0.3))
        gram = gram_matrix(basis).astype(float)
        c = np.array(basis.norms)
        assert np.abs(gram / np.sqrt(np.outer(c, c)) - np.eye(61)).max() <= 1e-9

    def test_float_norm_log_space(self):
        # n > 60 switches to lgamma; compare against exact evaluation
        params = BinomialParams(80, 0.25)
        for r in (0, 10, 40, 80):
            exact = F(math.factorial(80) * math.factorial(r), math.factorial(80 - r)) * (F(0.25) / (1 - F(0.25))) ** r
            assert norm_constant(params, r) == pytest.approx(float(exact), rel=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            norm_constant(BinomialParams(3, F(1, 2)), 4)


class TestExpansion:
    def test_basis_element(self):
        basis = generate_basis(BinomialParams(6, F(1, 3)))
        assert list(expand_in_basis(basis.phi(3), basis)) == [0, 0, 0, 1, 0, 0, 0]

    def test_delta(self):
        basis = generate_basis(BinomialParams(2, F(1, 2)))
        assert expand_in_basis(GridFunction.delta(2, 0), basis)[0] == F(1, 4)

    def test_roundtrip_exact(self):
        rng = np.random.default_rng(5)
        for n in (1, 4, 11):
            basis = generate_basis(BinomialParams(n, F(3, 8)))
            f = random_grid(rng, n, Backend.EXACT)
            coeffs = expand_in_basis(f, basis)
            assert reconstruct(coeffs, basis) == f
            b = binomial_pmf(basis.params)
            assert (coeffs[0] == 0) == (inner_weighted(f, GridFunction.constant(n, 1), b) == 0)

    def test_roundtrip_float(self):
        rng = np.random.default_rng(6)
        basis = generate_basis(BinomialParams(12, 0.41))
        f = GridFunction(rng.normal(size=13))
        np.testing.assert_allclose(reconstruct(expand_in_basis(f, basis), basis).values, f.values, atol=1e-10)

    def test_mean_zero_has_no_constant_term(self):
        basis = generate_basis(BinomialParams(5, F(1, 4)))
        coeffs = expand_in_basis(basis.phi(2) + basis.phi(5) * 3, basis)
        assert coeffs[0] == 0


class TestLadders:
    def test_bottom(self):
        basis = generate_basis(BinomialParams(5, F(1, 3)))
        assert all(v == 0 for v in ladder_down(basis, 0))

    def test_top(self):
        basis = generate_basis(BinomialParams(5, F(1, 3)))
        assert all(v == 0 for v in ladder_up(basis, 5))

    def test_example(self):
        basis = generate_basis(BinomialParams(2, F(1, 2)))
        assert list(ladder_down(basis, 1)) == [2, 2, 2]

    @pytest.mark.parametrize("t", LADDER_TS)
    def test_all_degrees(self, t):
        for n in range(1, 16):
            basis = generate_basis(BinomialParams(n, t))
            for r in range(n + 1):
                ladder_down(basis, r)
                ladder_up(basis, r)

    @pytest.mark.parametrize("t", LADDER_TS)
    def test_eigen_identity(self, t):
        for n in range(1, 16):
            params = BinomialParams(n, t)
            basis = generate_basis(params)
            for r in range(n + 1):
                phi = basis.phi(r)
                assert nabla_tilde(params, nabla_n(phi)) == phi * eigen_factor(params, r)

    def test_float_ladders(self):
        basis = generate_basis(BinomialParams(20, 0.37))
        for r in range(21):
            ladder_down(basis, r)
            ladder_up(basis, r)

    def test_violation_reports_residual(self):
        good = generate_basis(BinomialParams(3, F(1, 3)))
        polys = list(good.polys)
        polys[1] = polys[1] + 1
        broken = KrawtchoukBasis(good.params, tuple(polys), good.norms)
        with pytest.raises(IdentityViolation) as err:
            ladder_down(broken, 2)
        assert err.value.residual != 0


class TestGeneratingFunction:
    @pytest.mark.parametrize("w", [F(1, 7), F(1, 3)])
    def test_series_matches_closed_form(self, w):
        for n, t in [(1, F(1, 2)), (6, F(1, 3)), (10, F(3, 4))]:
            params = BinomialParams(n, t)
            basis = generate_basis(params)
            for k in range(n + 1):
                assert generating_series(basis, k, w) == generating_function(params, k, w)

    def test_shift_identities(self):
        for n in range(1, 12):
            for t in LADDER_TS:
                assert shift_identity_residual(BinomialParams(n, t)) == 0

    def test_shift_identity_is_sensitive(self):
        # a wrong neighbour ratio must show up
        params = BinomialParams(4, F(1, 3))
        from binomial_nabla import krawtchouk

        lhs = poly_mul(krawtchouk.generating_coefficients(params, 1), [1, 1 - params.t])
        rhs = poly_mul(krawtchouk.generating_coefficients(params, 2), [1, params.t])
        assert lhs != rhs

    def test_euler_identity(self):
        for n in range(1, 12):
            for t in LADDER_TS:
                assert euler_identity_residual(generate_basis(BinomialParams(n, t))) == 0

    def test_poly_mul(self):
        assert poly_mul([1, 1], [1, -1]) == [1, 0, -1]
