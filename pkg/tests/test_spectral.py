import math
from fractions import Fraction as F

import numpy as np
import pytest

from binomial_nabla.core import Backend, BinomialParams, GridFunction, binomial_pmf, inner_weighted
from binomial_nabla.krawtchouk import generate_basis
from binomial_nabla.operators import matrix_of, nabla_n, nabla_tilde
from binomial_nabla.spectral import (
    counterexample_search,
    dirichlet_form,
    klaassen_rhs,
    log_sobolev_check,
    log_sobolev_margin,
    operator_spectrum,
    poincare_check,
    poisson_limit_table,
    predicted_spectrum,
    rayleigh_quotient,
)
from binomial_nabla.verification import random_grid


class TestSpectrum:
    @pytest.mark.parametrize("t", [F(1, 3), F(1, 2), 0.2])
    def test_n1(self, t):
        params = BinomialParams(1, t)
        assert predicted_spectrum(params) == (0, 1 / (t * (1 - t)))

    def test_n3_half(self):
        params = BinomialParams(3, F(1, 2))
        assert predicted_spectrum(params) == (0, F(4, 3), F(4, 3), F(16, 9))
        # numeric eigensolve of the plain (unsymmetrized) 4x4 matrix
        m = (matrix_of("nabla_tilde", params) @ matrix_of("nabla_n", params)).to_float()
        np.testing.assert_allclose(np.sort(np.linalg.eigvals(m).real), [0, 4 / 3, 4 / 3, 16 / 9], atol=1e-12)
        report = operator_spectrum(params.with_backend(Backend.FLOAT))
        assert report.max_deviation <= 1e-12

    def test_smallest_nonzero(self):
        for n in range(2, 12):
            params = BinomialParams(n, F(2, 7))
            eigen = predicted_spectrum(params)
            assert eigen[1] == 1 / (n * params.t * (1 - params.t))
            # attained at r = 1 and r = n only (twice when n > 1)
            assert eigen.count(eigen[1]) == 2

    def test_multiplicities(self):
        for n in range(1, 10):
            report = operator_spectrum(BinomialParams(n, F(1, 3)))
            counts = report.multiplicities()
            assert counts[0] == 1
            for r in range(1, n + 1):
                lam = report.predicted[0].__class__(r * (n - r + 1)) / (n * n * F(1, 3) * F(2, 3))
                assert counts[lam] == (1 if r == n - r + 1 else 2)

    @pytest.mark.parametrize("t", [0.1, 0.25, 0.5, 0.8])
    def test_float_match(self, t):
        for n in range(1, 41):
            assert operator_spectrum(BinomialParams(n, t)).max_deviation <= 1e-9

    def test_rayleigh_exact(self):
        for n in range(1, 16):
            params = BinomialParams(n, F(1, 3))
            for r in range(n + 1):
                assert rayleigh_quotient(params, r) == F(r * (n - r + 1)) / (n * n * params.t * (1 - params.t))
        assert operator_spectrum(BinomialParams(15, F(3, 4))).max_deviation == 0

    def test_self_adjoint_and_psd(self):
        rng = np.random.default_rng(8)
        for n in (1, 3, 8):
            params = BinomialParams(n, F(2, 5))
            b = binomial_pmf(params)

            def op(f):
                return nabla_tilde(params, nabla_n(f))

            for _ in range(20):
                f, g = random_grid(rng, n, Backend.EXACT), random_grid(rng, n, Backend.EXACT)
                assert inner_weighted(op(f), g, b) == inner_weighted(f, op(g), b)
                df = nabla_n(f)
                assert inner_weighted(op(f), f, b) == inner_weighted(df, df, b) >= 0


class TestPoincare:
    @pytest.mark.parametrize("n, t", [(1, F(1, 2)), (4, F(1, 3)), (7, F(3, 4))])
    def test_phi1_equality(self, n, t):
        params = BinomialParams(n, t)
        report = poincare_check(generate_basis(params).phi(1), params)
        assert report.lhs == generate_basis(params).norms[1]
        assert report.slack == 0 and report.equality_flag and report.projection_residual == 0

    def test_phin_equality(self):
        params = BinomialParams(6, F(2, 5))
        report = poincare_check(generate_basis(params).phi(6), params)
        assert report.slack == 0 and report.equality_flag

    @pytest.mark.parametrize("n", [3, 4, 8, 12])
    def test_phi2_ratio(self, n):
        params = BinomialParams(n, F(1, 3))
        report = poincare_check(generate_basis(params).phi(2), params)
        assert report.rhs / report.lhs == F(2 * (n - 1), n)
        assert not report.equality_flag

    def test_delta_bruteforce(self):
        params = BinomialParams(2, F(1, 2))
        report = poincare_check(GridFunction.delta(2, 0), params)
        b = [F(1, 4), F(1, 2), F(1, 4)]
        f = [1, 0, 0]
        mean = sum(fk * bk for fk, bk in zip(f, b))
        c = [fk - mean for fk in f]
        lhs = sum(bk * ck * ck for bk, ck in zip(b, c))
        grad = [c[1] - c[0], F(1, 2) * (c[1] - c[0]) + F(1, 2) * (c[2] - c[1]), c[2] - c[1]]
        rhs = 2 * F(1, 2) * F(1, 2) * sum(bk * gk * gk for bk, gk in zip(b, grad))
        assert (report.lhs, report.rhs) == (lhs, rhs)

    def test_centering(self):
        params = BinomialParams(5, F(1, 4))
        phi1 = generate_basis(params).phi(1)
        shifted = poincare_check(phi1 + 7, params)
        assert shifted == poincare_check(phi1, params)

    @pytest.mark.parametrize("t", [0.25, 0.5, 0.75])
    def test_random_validity(self, t):
        rng = np.random.default_rng(int(t * 100))
        for n in range(1, 13):
            params = BinomialParams(n, t)
            for _ in range(200):
                assert poincare_check(GridFunction(rng.normal(size=n + 1)), params).slack >= -1e-10

    def test_variational(self):
        # the minimum of rhs/lhs over mean-zero f is 1, attained on span{phi_1, phi_n}
        rng = np.random.default_rng(1)
        params = BinomialParams(7, 0.3)
        ratios = [
            (r.rhs / r.lhs) for r in (poincare_check(GridFunction(rng.normal(size=8)), params) for _ in range(2000))
        ]
        assert min(ratios) >= 1 - 1e-12
        basis = generate_basis(params)
        combo = basis.phi(1) * 0.7 - basis.phi(7) * 1e-4
        report = poincare_check(combo, params)
        assert report.rhs / report.lhs == pytest.approx(1, abs=1e-8)
        assert report.equality_flag

    def test_float_n1(self):
        report = poincare_check(GridFunction([0.3, -1.2]), BinomialParams(1, 0.4))
        assert abs(report.slack) <= 1e-12 and report.equality_flag

    def test_rejects_boundary(self):
        with pytest.raises(ValueError):
            poincare_check(GridFunction([1, 2]), BinomialParams(1, 0))


class TestDirichletForm:
    def test_identity(self):
        # nabla_n k = 1 everywhere, so the form is the total mass
        assert dirichlet_form(GridFunction.identity(6), BinomialParams(6, F(2, 5))) == 1

    def test_matches_rhs(self):
        params = BinomialParams(5, F(1, 3))
        f = GridFunction([F(k * k, 3) for k in range(6)])
        t = params.t
        assert poincare_check(f, params).rhs == 5 * t * (1 - t) * dirichlet_form(f, params)


class TestKlaassen:
    def test_constant(self):
        assert klaassen_rhs(GridFunction.constant(4, 3), BinomialParams(4, F(1, 3))) == 0

    def test_phi1_bounds_variance(self):
        for n in range(1, 10):
            params = BinomialParams(n, F(2, 5))
            phi1 = generate_basis(params).phi(1)
            assert klaassen_rhs(phi1, params) >= poincare_check(phi1, params).lhs

    def test_identity(self):
        for n in range(1, 10):
            params = BinomialParams(n, F(1, 3))
            t = params.t
            assert klaassen_rhs(GridFunction.identity(n), params) == n * t * (1 - t)


class TestPoissonLimit:
    def test_constants(self):
        rows = poisson_limit_table(2.0, [50, 100, 200, 400], lambda k: 1.0 if k <= 2 else 0.0)
        assert [r.binomial_constant for r in rows] == pytest.approx([2 * (1 - 2 / n) for n in (50, 100, 200, 400)])
        assert rows[1].binomial_constant == pytest.approx(1.96)
        assert all(a.binomial_constant < b.binomial_constant < 2 for a, b in zip(rows, rows[1:]))
        assert all(r.slack >= -1e-10 for r in rows)

    def test_dirichlet_gap_order(self):
        rows = poisson_limit_table(2.0, [50, 100, 200, 400], lambda k: 1.0 if k <= 2 else 0.0)
        gaps = [abs(r.dirichlet_nabla_n - r.dirichlet_nabla_right) for r in rows]
        for a, b in zip(gaps, gaps[1:]):
            assert 1.8 < a / b < 2.2

    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            poisson_limit_table(3.0, [3], lambda k: 1.0)


class TestLogSobolev:
    def test_counterexample(self):
        result = log_sobolev_check(GridFunction([0.9, 0.1, 0.9]), BinomialParams(2, 0.5))
        assert result.lhs == pytest.approx(0.18403, abs=5e-6)
        assert result.rhs == pytest.approx(0.17777, abs=5e-5)
        assert result.rhs == pytest.approx(0.32 / 1.8, abs=1e-15)
        assert result.violated

    def test_exact_input_converted(self):
        result = log_sobolev_check(GridFunction([F(9, 10), F(1, 10), F(9, 10)]), BinomialParams(2, F(1, 2)))
        assert result.violated

    def test_constant(self):
        result = log_sobolev_check(GridFunction.constant(4, 2.0, Backend.FLOAT), BinomialParams(4, 0.3))
        assert result.lhs == pytest.approx(0, abs=1e-15) and result.rhs == 0 and not result.violated

    @pytest.mark.parametrize("eps", [0.01, 0.1])
    def test_small_perturbation_holds(self, eps):
        for n, t in [(2, 0.5), (5, 0.3), (10, 0.7)]:
            params = BinomialParams(n, t)
            phi1 = generate_basis(params).phi(1)
            result = log_sobolev_check(GridFunction(np.exp(eps * phi1.values)), params)
            assert not result.violated and result.lhs <= result.rhs

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            log_sobolev_check(GridFunction([1.0, 0.0, 1.0]), BinomialParams(2, 0.5))

    def test_margin_scale_free(self):
        params = BinomialParams(2, 0.5)
        g = np.log([0.9, 0.1, 0.9])
        assert log_sobolev_margin(g, params) == pytest.approx(log_sobolev_margin(g + 3.0, params), abs=1e-14)
        # (0.9, 0.1, 0.9) has b-mean 1/2, so unit-mean normalisation doubles its margin
        assert log_sobolev_margin(g, params) == pytest.approx(2 * 0.0062543258, abs=1e-9)


class TestCounterexampleSearch:
    def test_finds_violation(self):
        result = counterexample_search(BinomialParams(2, 0.5), trials=4, seed=7)
        assert result is not None and result.margin >= 0.006 and result.lhs > result.rhs

    def test_deterministic(self):
        a = counterexample_search(BinomialParams(3, 0.4), trials=3, seed=11)
        b = counterexample_search(BinomialParams(3, 0.4), trials=3, seed=11)
        assert a == b

    def test_zero_trials(self):
        assert counterexample_search(BinomialParams(2, 0.5), trials=0, seed=0) is None

    def test_n1_symmetric_recorded(self):
        result = counterexample_search(BinomialParams(1, 0.5), trials=3, seed=0, symmetric=True)
        # exploratory: symmetric f on n = 1 is constant, so no violation can exist
        assert result is None

    def test_reported_f_is_normalized(self):
        params = BinomialParams(2, 0.5)
        result = counterexample_search(params, trials=2, seed=3)
        assert math.fsum(np.array(result.f) * binomial_pmf(params).values) == pytest.approx(1.0)
