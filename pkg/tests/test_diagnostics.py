import numpy as np

from kbidiag.bidiag import run
from kbidiag.diagnostics import (
    CSV_COLUMNS,
    DiagnosticsTrace,
    check_trace_invariants,
    local_orthogonality_trace,
    orthogonality_level,
    pairwise_level,
    singular_value_window,
    trace_run,
)
from kbidiag.linops import DenseOperator
from kbidiag.reorth import ReorthPolicy
from conftest import random_orthonormal

EPS = 2.0 ** -53


class TestOrthogonalityLevel:
    def test_identity_columns(self):
        assert orthogonality_level(np.eye(3)) == 0.0

    def test_hand_case(self):
        q = np.column_stack([[1.0, 0.0], [1.0 / np.sqrt(2), 1.0 / np.sqrt(2)]])
        assert abs(orthogonality_level(q) - 1.0 / np.sqrt(2)) <= 1e-15

    def test_full_reorth_basis(self, rng):
        a = rng.standard_normal((80, 50))
        fact = run(DenseOperator(a), np.ones(80), 30, ReorthPolicy.full())
        assert orthogonality_level(fact.U) <= 1e-14
        assert orthogonality_level(fact.V) <= 1e-14

    def test_single_column(self, rng):
        assert orthogonality_level(rng.standard_normal((5, 1))) == 0.0


class TestPairwiseLevel:
    def test_orthogonal(self, rng):
        basis = random_orthonormal(rng, 8, 3)
        q = rng.standard_normal(8)
        q -= basis @ (basis.T @ q)
        q -= basis @ (basis.T @ q)
        q /= np.linalg.norm(q)
        assert pairwise_level(q, basis) <= 10 * EPS

    def test_duplicate_column(self, rng):
        basis = random_orthonormal(rng, 8, 3)
        assert abs(pairwise_level(basis[:, 1], basis) - 1.0) <= 4 * EPS

    def test_brute_force_oracle(self, rng):
        basis = random_orthonormal(rng, 9, 3)
        q = rng.standard_normal(9)
        expected = max(abs(basis[:, j] @ q) for j in range(3))
        assert pairwise_level(q, basis) == expected

    def test_exclude_last(self, rng):
        basis = random_orthonormal(rng, 9, 3)
        q = basis[:, 2]
        assert abs(pairwise_level(q, basis) - 1.0) <= 4 * EPS
        assert pairwise_level(q, basis, exclude_last=True) <= 10 * EPS

    def test_empty_basis(self, rng):
        assert pairwise_level(rng.standard_normal(4), np.empty((4, 0))) == 0.0

    def test_bounded_by_level(self, rng):
        # max inner product <= spectral norm of the SUT block
        for _ in range(5):
            q = rng.standard_normal((10, 4))
            q /= np.linalg.norm(q, axis=0)
            level = orthogonality_level(q)
            pw = pairwise_level(q[:, -1], q[:, :-1])
            assert pw <= level + 10 * EPS


class TestSingularValueWindow:
    def test_orthonormal(self, rng):
        win = singular_value_window(random_orthonormal(rng, 8, 4))
        assert win.status == "ok"
        assert win.sigma_max_ok and win.sigma_min_ok

    def test_not_applicable(self):
        q = np.column_stack([[1.0, 0.0], [1.0 / np.sqrt(2), 1.0 / np.sqrt(2)]])
        win = singular_value_window(q)
        assert win.status == "not-applicable"

    def test_run_product(self, rng):
        a = rng.standard_normal((60, 40))
        fact = run(DenseOperator(a), np.ones(60), 25, ReorthPolicy.partial(1e-10))
        win = singular_value_window(fact.V)
        assert win.status == "ok"
        assert win.sigma_max_ok and win.sigma_min_ok


class TestLocalOrthogonality:
    def test_full_reorth(self, rng):
        a = rng.standard_normal((50, 30))
        norm_a = np.linalg.norm(a, 2)
        fact = run(DenseOperator(a), np.ones(50), 20, ReorthPolicy.full())
        vals = local_orthogonality_trace(fact)
        assert vals.max() <= 100 * EPS * norm_a

    def test_semi_no_local(self, rng):
        a = rng.standard_normal((100, 80))
        norm_a = np.linalg.norm(a, 2)
        policy = ReorthPolicy.semi(include_local=False)
        fact = run(DenseOperator(a), np.ones(100), 60, policy)
        vals = local_orthogonality_trace(fact)
        assert vals.max() <= 100 * EPS * norm_a

    def test_none_early_steps(self, rng):
        a = rng.standard_normal((100, 80))
        norm_a = np.linalg.norm(a, 2)
        fact = run(DenseOperator(a), np.ones(100), 5, ReorthPolicy.none())
        vals = local_orthogonality_trace(fact)
        assert vals.max() <= 100 * EPS * norm_a


class TestTrace:
    def test_monotone_levels(self, rng):
        a = rng.standard_normal((40, 30))
        _, trace = trace_run(
            DenseOperator(a), np.ones(40), 20, ReorthPolicy.none(), compute_x=False
        )
        assert not check_trace_invariants(trace)
        mu = trace.column("mu")
        assert np.all(np.diff(mu) >= -4 * EPS)

    def test_full_reorth_levels_small(self, rng):
        a = rng.standard_normal((50, 40))
        _, trace = trace_run(
            DenseOperator(a), np.ones(50), 30, ReorthPolicy.full()
        )
        assert trace.column("mu").max() <= 1e-13
        assert trace.column("nu").max() <= 1e-13
        assert np.nanmax(trace.column("normXk_over_normA")) <= 1e-12

    def test_partial_events_and_plateau(self, rng):
        # needs singular values spread enough that orthogonality decays
        n = 120
        prof = np.logspace(0, -6, n)
        q1 = random_orthonormal(rng, 150, n)
        q2 = random_orthonormal(rng, n, n)
        a = (q1 * prof) @ q2.T
        op = DenseOperator(a)
        fact, trace = trace_run(
            op, np.ones(150), 100, ReorthPolicy.partial(1e-10), compute_x=False
        )
        events = trace.column("reorth_events_u") + trace.column("reorth_events_v")
        assert events.sum() > 0
        assert max(trace.column("mu").max(), trace.column("nu").max()) <= 1e-8
        # inner products strictly fewer than full reorthogonalization
        full_count = sum(2 * 2 * i for i in range(1, fact.k + 1))
        assert trace.column("inner_products_count")[-1] < full_count
        # omega dips after each event
        om = trace.column("omega_u")
        ev_u = trace.column("reorth_events_u")
        post = [om[i + 1] for i in range(len(om) - 1) if ev_u[i + 1] == 1]
        pre = [om[i] for i in range(len(om) - 1) if ev_u[i + 1] == 1]
        if pre:
            assert np.median(post) <= np.median(pre)

    def test_csv_roundtrip(self, tmp_path, rng):
        a = rng.standard_normal((20, 12))
        _, trace = trace_run(DenseOperator(a), np.ones(20), 8, ReorthPolicy.full())
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)
        back = DiagnosticsTrace.read_csv(path)
        np.testing.assert_allclose(back.column("mu"), trace.column("mu"), rtol=0)

    def test_csv_17_digits(self, tmp_path, rng):
        a = rng.standard_normal((10, 6))
        _, trace = trace_run(DenseOperator(a), np.ones(10), 4, ReorthPolicy.full())
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        back = DiagnosticsTrace.read_csv(path)
        for name in ("mu", "nu", "norm_cbar"):
            np.testing.assert_array_equal(back.column(name), trace.column(name))

    def test_terminated_run_still_traced(self):
        from kbidiag.linops import diagonal_operator

        op = diagonal_operator([5.0, 3.0, 1.0])
        fact, trace = trace_run(op, np.ones(3), 3, ReorthPolicy.full())
        assert len(trace.rows) == fact.k == 3

    def test_level_stride_sampling(self, rng):
        a = rng.standard_normal((30, 20))
        op = DenseOperator(a)
        _, dense_trace = trace_run(op, np.ones(30), 12, ReorthPolicy.full(),
                                   compute_x=False)
        _, strided = trace_run(op, np.ones(30), 12, ReorthPolicy.full(),
                               compute_x=False, level_stride=4)
        mu_d, mu_s = dense_trace.column("mu"), strided.column("mu")
        for k in range(1, 13):
            if (k - 1) % 4 == 0 or k == 12:
                assert mu_s[k - 1] == mu_d[k - 1]

    def test_invariant_checker_flags_corruption(self, rng):
        a = rng.standard_normal((20, 12))
        _, trace = trace_run(DenseOperator(a), np.ones(20), 8,
                             ReorthPolicy.full(), compute_x=False)
        assert check_trace_invariants(trace) == []
        idx = CSV_COLUMNS.index("mu")
        trace.rows[5][idx] = trace.rows[4][idx] / 2.0 - 1e-3
        assert any("mu" in p for p in check_trace_invariants(trace))
