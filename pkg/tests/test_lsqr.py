import numpy as np
import pytest

from kbidiag.diagnostics import orthogonality_level
from kbidiag.errors import InvalidInput
from kbidiag.linops import DenseOperator, diagonal_operator, identity_operator
from kbidiag.lsqr import (
    lsqr_solve,
    oracle_gap,
    oracle_gap_trace,
    projected_solve,
)
from kbidiag.reorth import ReorthPolicy
from conftest import lower_bidiagonal

EPS = 2.0 ** -53


class TestLsqrSolve:
    def test_identity_one_step(self):
        b = np.array([1.0, 2.0, 3.0])
        res = lsqr_solve(identity_operator(3), b, 3)
        np.testing.assert_allclose(res.xs[0], b, atol=1e-15)
        assert res.residual_estimates[0] <= 1e-14 * np.linalg.norm(b)

    def test_diag_solve(self):
        res = lsqr_solve(diagonal_operator([2.0, 1.0]), np.array([2.0, 1.0]), 2)
        np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-14)

    def test_overdetermined_vs_qr_oracle(self, rng):
        a = rng.standard_normal((10, 4))
        b = rng.standard_normal(10)
        res = lsqr_solve(DenseOperator(a), b, 4, ReorthPolicy.full())
        x_star = np.linalg.lstsq(a, b, rcond=None)[0]
        err = np.linalg.norm(res.x - x_star) / np.linalg.norm(x_star)
        assert err <= 1e-12

    def test_residual_monotone(self, rng):
        a = rng.standard_normal((30, 18))
        b = rng.standard_normal(30)
        res = lsqr_solve(DenseOperator(a), b, 18, ReorthPolicy.full())
        true_res = [np.linalg.norm(b - a @ x) for x in res.xs]
        norm_a = np.linalg.norm(a, 2)
        for r0, r1, x in zip(true_res, true_res[1:], res.xs[1:]):
            assert r1 <= r0 + 100 * EPS * norm_a * np.linalg.norm(x)

    def test_residual_estimate_matches_true(self, rng):
        a = rng.standard_normal((25, 12))
        b = rng.standard_normal(25)
        res = lsqr_solve(DenseOperator(a), b, 12, ReorthPolicy.full())
        norm_a = np.linalg.norm(a, 2)
        for k, x in enumerate(res.xs, start=1):
            true_r = np.linalg.norm(b - a @ x)
            est = res.residual_estimates[k - 1]
            assert abs(est - true_r) <= 100 * k * EPS * norm_a * max(
                np.linalg.norm(x), 1.0
            ) + 1e-10 * true_r

    def test_atol_stopping(self, rng):
        a = rng.standard_normal((20, 10))
        x_true = rng.standard_normal(10)
        b = a @ x_true  # consistent system
        res = lsqr_solve(DenseOperator(a), b, 10, ReorthPolicy.full(), atol=1e-10)
        assert res.stop_reason in ("atol", "lucky")
        np.testing.assert_allclose(res.x, x_true, atol=1e-8)

    def test_lucky_termination_finishes(self, rng):
        u = rng.standard_normal(6)
        v = rng.standard_normal(4)
        sigma = np.linalg.norm(u) * np.linalg.norm(v)
        op = DenseOperator(np.outer(u, v))
        b = u.copy()  # in the range of A
        res = lsqr_solve(op, b, 4, ReorthPolicy.full())
        assert res.stop_reason == "lucky"
        assert np.linalg.norm(np.outer(u, v) @ res.x - b) <= 1e-12 * sigma


class TestProjectedSolve:
    def test_k1_closed_form(self):
        alpha, beta2, beta1 = 3.0, 4.0, 2.0
        y = projected_solve(lower_bidiagonal([alpha], [beta2]), beta1)
        expected = beta1 * alpha / (alpha ** 2 + beta2 ** 2)
        np.testing.assert_allclose(y, [expected], rtol=1e-15)

    def test_triangular_limit(self, rng):
        alphas = rng.uniform(0.5, 2.0, 5)
        b_k = lower_bidiagonal(alphas, np.full(5, 1e-300))
        beta1 = 1.7
        y = projected_solve(b_k, beta1)
        expected = np.zeros(5)
        expected[0] = beta1 / alphas[0]  # decoupled triangular solve
        np.testing.assert_allclose(y, expected, rtol=1e-12, atol=1e-250)

    def test_random_vs_lstsq(self, rng):
        alphas = rng.uniform(0.3, 2.0, 6)
        betas = rng.uniform(0.3, 2.0, 6)
        b_k = lower_bidiagonal(alphas, betas)
        beta1 = 0.9
        rhs = np.zeros(7)
        rhs[0] = beta1
        y_ref = np.linalg.lstsq(b_k, rhs, rcond=None)[0]
        y = projected_solve(b_k, beta1)
        assert np.linalg.norm(y - y_ref) <= 1e-14 * np.linalg.norm(y_ref)

    def test_square_input(self, rng):
        alphas = rng.uniform(0.3, 2.0, 5)
        betas = rng.uniform(0.3, 2.0, 4)
        b_k = lower_bidiagonal(alphas, betas)
        y = projected_solve(b_k, 1.0)
        rhs = np.zeros(5)
        rhs[0] = 1.0
        np.testing.assert_allclose(b_k @ y, rhs, atol=1e-13)

    def test_bad_beta1(self):
        with pytest.raises(InvalidInput):
            projected_solve(lower_bidiagonal([1.0], [1.0]), 0.0)


class TestOracleGap:
    def test_k1_tiny(self, rng):
        a = rng.standard_normal((8, 5))
        gap = oracle_gap(DenseOperator(a), rng.standard_normal(8),
                         ReorthPolicy.full(), 1)
        assert gap <= 1e-15

    def test_full_reorth_small(self, rng):
        a = rng.standard_normal((40, 25))
        res = lsqr_solve(DenseOperator(a), np.ones(40), 25, ReorthPolicy.full(),
                         atol=0.0)
        gaps = oracle_gap_trace(res)
        assert gaps.max() <= 1e-12

    def test_none_policy_gap_tracks_nu(self, rng):
        # ill-conditioned instance: the gap grows with the orthogonality
        # loss of V_k but stays within a factor 100 of it
        n = 150
        prof = np.logspace(0, -8, n)
        q1, _ = np.linalg.qr(rng.standard_normal((200, n)))
        q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
        a = (q1 * prof) @ q2.T
        op = DenseOperator(a)
        res = lsqr_solve(op, np.ones(200), 80, ReorthPolicy.none(), atol=0.0)
        gaps = oracle_gap_trace(res)
        fact = res.fact
        for k in range(5, len(gaps) + 1, 5):
            nu = orthogonality_level(fact.V[:, :k])
            assert gaps[k - 1] <= max(100.0 * nu, 1e-12)

    def test_forward_proximity_weaker_policy(self, rng):
        # distance between the full-reorth solution (exact-process proxy)
        # and a weaker-policy solution is controlled by the weaker nu_k
        n = 100
        prof = np.logspace(0, -5, n)
        q1, _ = np.linalg.qr(rng.standard_normal((130, n)))
        q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
        a = (q1 * prof) @ q2.T
        op = DenseOperator(a)
        b = np.ones(130)
        k = 60
        res_full = lsqr_solve(op, b, k, ReorthPolicy.full(), atol=0.0)
        res_none = lsqr_solve(op, b, k, ReorthPolicy.none(), atol=0.0)
        k_eff = min(len(res_full.xs), len(res_none.xs))
        x_full = res_full.xs[k_eff - 1]
        x_none = res_none.xs[k_eff - 1]
        nu_weak = orthogonality_level(res_none.fact.V[:, :k_eff])
        rel = np.linalg.norm(x_full - x_none) / np.linalg.norm(x_full)
        assert rel <= max(100.0 * nu_weak, 1e-12)
