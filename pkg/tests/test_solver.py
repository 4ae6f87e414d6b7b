import numpy as np
import pytest

from nilmsrc.errors import DimensionMismatch, OracleTooLarge, UsageError, ZeroColumn
from nilmsrc.solver import (
    DesignMatrix,
    SolverConfig,
    brute_force_sparse,
    normalize_columns,
    residual_norm,
    soft_threshold,
    solve,
    solve_l1,
    solve_omp,
)


def random_dictionary(m, n, seed):
    rng = np.random.default_rng(seed)
    return normalize_columns(rng.standard_normal((m, n))), rng


class TestNormalizeColumns:
    def test_scales_to_unit_norm_and_records_original(self):
        D = normalize_columns(np.array([[3.0], [4.0]]))
        assert np.allclose(D.entries[:, 0], [0.6, 0.8])
        assert D.column_norms[0] == pytest.approx(5.0)

    def test_identity_unchanged(self):
        D = normalize_columns(np.eye(4))
        assert np.array_equal(D.entries, np.eye(4))
        assert np.array_equal(D.column_norms, np.ones(4))

    def test_zero_column_rejected(self):
        mat = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(ZeroColumn) as excinfo:
            normalize_columns(mat)
        assert excinfo.value.index == 1

    def test_all_columns_unit_norm(self):
        D, _ = random_dictionary(7, 15, seed=3)
        norms = np.linalg.norm(D.entries, axis=0)
        assert np.max(np.abs(norms - 1.0)) < 1e-12

    def test_entries_read_only(self):
        D = normalize_columns(np.eye(3))
        with pytest.raises(ValueError):
            D.entries[0, 0] = 2.0


class TestSolveOmp:
    def test_identity_dictionary(self):
        D = normalize_columns(np.eye(3))
        code = solve_omp(D, [0.0, 2.0, 0.0], SolverConfig(max_sparsity=1))
        assert np.allclose(code.coefficients, [0.0, 2.0, 0.0])
        assert code.residual_norm == pytest.approx(0.0, abs=1e-12)

    def test_exact_single_atom(self):
        D, _ = random_dictionary(8, 12, seed=0)
        y = 0.7 * D.entries[:, 4]
        code = solve_omp(D, y, SolverConfig(max_sparsity=1))
        assert code.support() == (4,)
        assert code.coefficients[4] == pytest.approx(0.7, abs=1e-12)
        assert code.residual_norm < 1e-10

    def test_matches_brute_force_on_noiseless_two_sparse(self):
        # exhaustive support enumeration is the oracle
        D, rng = random_dictionary(8, 12, seed=11)
        alpha = np.zeros(12)
        alpha[[2, 9]] = [1.3, -0.8]
        y = D.entries @ alpha
        omp = solve_omp(D, y, SolverConfig(max_sparsity=2, tolerance=1e-10))
        oracle = brute_force_sparse(D, y, 2)
        assert omp.support() == oracle.support()
        assert np.max(np.abs(omp.coefficients - oracle.coefficients)) < 1e-8

    def test_residual_nonincreasing_and_no_repeats(self):
        D, rng = random_dictionary(10, 25, seed=5)
        y = rng.standard_normal(10)
        seen = []
        history = []

        def hook(iteration, support, rnorm):
            seen.append(support[-1])
            history.append(rnorm)

        solve_omp(D, y, SolverConfig(max_sparsity=8, tolerance=0.0), iteration_hook=hook)
        assert len(set(seen)) == len(seen)
        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))

    def test_tie_breaks_to_lowest_index(self):
        col = np.array([1.0, 1.0]) / np.sqrt(2.0)
        D = DesignMatrix(entries=np.column_stack([col, col]), column_norms=np.ones(2))
        code = solve_omp(D, 3.0 * col, SolverConfig(max_sparsity=2))
        assert code.support() == (0,)

    def test_sparsity_clamped_to_dimensions(self):
        D, rng = random_dictionary(4, 6, seed=2)
        y = rng.standard_normal(4)
        code = solve_omp(D, y, SolverConfig(max_sparsity=50, tolerance=0.0))
        assert len(code.support()) <= 4

    def test_dimension_mismatch(self):
        D = normalize_columns(np.eye(3))
        with pytest.raises(DimensionMismatch):
            solve_omp(D, [1.0, 2.0])

    def test_stops_at_tolerance(self):
        D = normalize_columns(np.eye(5))
        y = np.array([5.0, 4.0, 3.0, 0.01, 0.0])
        code = solve_omp(D, y, SolverConfig(max_sparsity=5, tolerance=0.5))
        assert code.residual_norm <= 0.5
        assert len(code.support()) < 5

    def test_duplicate_columns_not_reselected(self):
        rng = np.random.default_rng(8)
        base = rng.standard_normal((6, 4))
        mat = np.column_stack([base, base[:, 0]])  # column 4 duplicates column 0
        D = normalize_columns(mat)
        y = rng.standard_normal(6)
        code = solve_omp(D, y, SolverConfig(max_sparsity=5, tolerance=0.0))
        support = code.support()
        assert not (0 in support and 4 in support)

    def test_residual_norm_consistent_with_coefficients(self):
        D, rng = random_dictionary(9, 14, seed=21)
        y = rng.standard_normal(9)
        code = solve_omp(D, y, SolverConfig(max_sparsity=4))
        recomputed = residual_norm(D, y, code.coefficients)
        assert recomputed == pytest.approx(code.residual_norm, rel=1e-9, abs=1e-12)


class TestSolveL1:
    def test_identity_no_penalty_returns_signal(self):
        D = normalize_columns(np.eye(4))
        y = np.array([1.0, -2.0, 0.5, 3.0])
        code = solve_l1(D, y, SolverConfig(method="ista", lam=0.0, max_iterations=200))
        assert np.max(np.abs(code.coefficients - y)) < 1e-8

    def test_large_lambda_shuts_down(self):
        D, rng = random_dictionary(6, 9, seed=4)
        y = rng.standard_normal(6)
        lam = float(np.max(np.abs(D.entries.T @ y)))
        code = solve_l1(D, y, SolverConfig(method="ista", lam=lam * 1.0001))
        assert np.array_equal(code.coefficients, np.zeros(9))

    def test_scalar_closed_form(self):
        # oracle: sign(y) * max(|y| - lam, 0) on the 1-d problem
        D = normalize_columns(np.array([[1.0]]))
        for y, lam in [(3.0, 1.0), (-3.0, 1.0), (0.5, 1.0), (2.0, 0.25)]:
            expected = np.sign(y) * max(abs(y) - lam, 0.0)
            code = solve_l1(D, [y], SolverConfig(method="ista", lam=lam, max_iterations=2000, tolerance=0.0))
            assert code.coefficients[0] == pytest.approx(expected, abs=1e-10)

    def test_ista_objective_nonincreasing(self):
        for seed in range(5):
            D, rng = random_dictionary(8, 12, seed=seed)
            y = rng.standard_normal(8)
            objectives = []
            solve_l1(
                D, y, SolverConfig(method="ista", max_iterations=150),
                iteration_hook=lambda k, obj: objectives.append(obj),
            )
            assert all(b <= a + 1e-12 for a, b in zip(objectives, objectives[1:]))

    def test_fista_not_worse_than_ista(self):
        for seed in range(5):
            D, rng = random_dictionary(10, 20, seed=100 + seed)
            y = rng.standard_normal(10)
            budget = SolverConfig(method="ista", max_iterations=300, tolerance=0.0)
            ista = solve_l1(D, y, budget)
            fista = solve_l1(D, y, SolverConfig(method="fista", max_iterations=300, tolerance=0.0))
            lam = 0.1 * float(np.max(np.abs(D.entries.T @ y)))

            def objective(a):
                return 0.5 * np.sum((y - D.entries @ a) ** 2) + lam * np.sum(np.abs(a))

            assert objective(fista.coefficients) <= objective(ista.coefficients) + 1e-6

    def test_small_lambda_approaches_least_squares(self):
        rng = np.random.default_rng(7)
        D = normalize_columns(rng.standard_normal((20, 5)))  # overdetermined, full rank
        y = rng.standard_normal(20)
        ls, _, _, _ = np.linalg.lstsq(D.entries, y, rcond=None)
        code = solve_l1(D, y, SolverConfig(method="fista", lam=1e-10, max_iterations=20000, tolerance=0.0))
        assert np.max(np.abs(code.coefficients - ls)) < 1e-4

    def test_non_convergence_flagged(self):
        D, rng = random_dictionary(8, 16, seed=9)
        y = rng.standard_normal(8)
        code = solve_l1(D, y, SolverConfig(method="ista", max_iterations=2, tolerance=1e-14))
        assert "non_convergence" in code.flags

    def test_rejects_omp_method(self):
        D = normalize_columns(np.eye(2))
        with pytest.raises(UsageError):
            solve_l1(D, [1.0, 0.0], SolverConfig(method="omp"))

    def test_soft_threshold_matches_direct_formula(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal(200) * 3.0
        t = 0.7
        expected = np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
        assert np.array_equal(soft_threshold(x, t), expected)


class TestBruteForce:
    def test_k_equals_n_is_full_least_squares(self):
        D, rng = random_dictionary(9, 6, seed=17)
        y = rng.standard_normal(9)
        code = brute_force_sparse(D, y, 6)
        ls, _, _, _ = np.linalg.lstsq(D.entries, y, rcond=None)
        assert code.residual_norm == pytest.approx(float(np.linalg.norm(y - D.entries @ ls)), abs=1e-12)

    def test_exact_atom(self):
        D, _ = random_dictionary(6, 10, seed=1)
        y = D.entries[:, 7].copy()
        code = brute_force_sparse(D, y, 1)
        assert code.support() == (7,)
        assert code.coefficients[7] == pytest.approx(1.0, abs=1e-12)
        assert code.residual_norm < 1e-12

    def test_dominates_omp(self):
        for seed in range(5):
            D, rng = random_dictionary(6, 10, seed=40 + seed)
            y = rng.standard_normal(6)
            oracle = brute_force_sparse(D, y, 2)
            omp = solve_omp(D, y, SolverConfig(max_sparsity=2, tolerance=0.0))
            assert oracle.residual_norm <= omp.residual_norm + 1e-12

    def test_guard(self):
        D, rng = random_dictionary(8, 21, seed=2)
        with pytest.raises(OracleTooLarge):
            brute_force_sparse(D, rng.standard_normal(8), 2)
        D2, rng2 = random_dictionary(8, 12, seed=2)
        with pytest.raises(OracleTooLarge):
            brute_force_sparse(D2, rng2.standard_normal(8), 4)

    def test_zero_signal_keeps_empty_support(self):
        D, _ = random_dictionary(5, 8, seed=3)
        code = brute_force_sparse(D, np.zeros(5), 2)
        assert code.support() == ()
        assert code.residual_norm == 0.0


class TestResidualNorm:
    def test_zero_code_gives_signal_norm(self):
        D, rng = random_dictionary(6, 8, seed=6)
        y = rng.standard_normal(6)
        assert residual_norm(D, y, np.zeros(8)) == pytest.approx(float(np.linalg.norm(y)))

    def test_exact_representation_gives_zero(self):
        D = normalize_columns(np.eye(3))
        assert residual_norm(D, [1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(0.0, abs=1e-12)

    def test_identity_partial(self):
        D = normalize_columns(np.eye(2))
        assert residual_norm(D, [1.0, 1.0], [1.0, 0.0]) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        D = normalize_columns(np.eye(2))
        with pytest.raises(DimensionMismatch):
            residual_norm(D, [1.0, 1.0], [1.0, 0.0, 0.0])


class TestDispatchAndConfig:
    def test_solve_routes_by_method(self):
        D = normalize_columns(np.eye(3))
        y = [1.0, 0.0, 0.0]
        omp = solve(D, y, SolverConfig(method="omp", max_sparsity=1))
        ista = solve(D, y, SolverConfig(method="ista", lam=0.0))
        assert omp.support() == (0,)
        assert np.max(np.abs(ista.coefficients - np.asarray(y))) < 1e-8

    def test_config_validation(self):
        with pytest.raises(UsageError):
            SolverConfig(method="bogus")
        with pytest.raises(UsageError):
            SolverConfig(max_sparsity=0)
        with pytest.raises(UsageError):
            SolverConfig(lam=-1.0)
