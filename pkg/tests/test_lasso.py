import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import subgradient_oracle
from pgsrhb.lasso import (GroupedProblem, SolverError, SolverSettings, critical_lambda,
                          kkt_residual, objective, solve, solve_lasso, standardized)

RAW = SolverSettings(standardize=False, fit_intercept=False)


def random_problem(seed, m=None, p=None, n_groups=None, lam=None):
    r = np.random.default_rng(seed)
    m = m or int(r.integers(3, 21))
    p = p or int(r.integers(1, 9))
    n_groups = min(n_groups or int(r.integers(1, 4)), p)
    X = r.normal(size=(m, p))
    y = r.normal(size=m) * 2 + 1
    labels = np.concatenate([np.arange(n_groups), r.integers(0, n_groups, p - n_groups)])
    r.shuffle(labels)
    groups = [np.flatnonzero(labels == g) for g in range(n_groups)]
    lam = lam if lam is not None else float(r.uniform(0.05, 2.0))
    return GroupedProblem(y, X, groups, lam)


class TestObjective:
    def test_examples(self):
        y = np.array([1.0, -2.0, 3.0])
        X = np.eye(3)
        p = GroupedProblem(y, X, [[0], [1, 2]], 0.7)
        assert objective(p, np.zeros(3)) == 0.5 * y @ y
        p0 = GroupedProblem(y, X, [[0], [1, 2]], 0.0)
        a = np.array([0.5, 0.0, 1.0])
        assert objective(p0, a, 0.25) == 0.5 * np.sum((y - 0.25 - a) ** 2)
        one = GroupedProblem([2.0], [[1.0]], [[0]], 0.5)
        assert objective(one, [1.5]) == 0.875

    def test_dimension_mismatch(self):
        p = GroupedProblem([1.0, 2.0], np.ones((2, 2)), [[0, 1]], 1.0)
        with pytest.raises(SolverError):
            objective(p, [1.0])

    def test_weights(self):
        p = GroupedProblem(np.zeros(2), np.ones((2, 6)), [[0], [1, 2, 3, 4], [5]], 1.0)
        assert p.weights.tolist() == [1.0, 2.0, 1.0]

    @pytest.mark.parametrize("kw", [dict(groups=[[0]]), dict(groups=[[0, 1], [1, 2]]),
                                    dict(lam=-1.0), dict(y=[1.0])])
    def test_invalid_problem(self, kw):
        args = dict(y=[1.0, 2.0], design=np.ones((2, 3)), groups=[[0, 1], [2]], lam=1.0)
        args.update(kw)
        with pytest.raises(SolverError):
            GroupedProblem(**args)


class TestClosedForms:
    def test_univariate_soft_threshold(self, kernels):
        sol = solve(GroupedProblem([2.0], [[1.0]], [[0]], 0.5), RAW, kernels)
        assert sol.coefficients[0] == pytest.approx(1.5, abs=1e-10)
        assert sol.converged

    def test_above_critical(self, kernels):
        p = random_problem(3, m=15, p=6, n_groups=3)
        p.lam = critical_lambda(p) * 1.0001
        sol = solve(p, SolverSettings(standardize=False), kernels)
        assert np.all(sol.coefficients == 0)
        assert sol.intercept == pytest.approx(p.y.mean(), abs=1e-12)

    def test_least_squares_square(self, kernels):
        r = np.random.default_rng(5)
        # well conditioned, so coordinate descent converges in few sweeps
        X = 2 * np.eye(6) + 0.4 * r.normal(size=(6, 6))
        y = r.normal(size=6)
        p = GroupedProblem(y, X, [[0, 1], [2, 3, 4], [5]], 0.0)
        sol = solve(p, SolverSettings(standardize=False, fit_intercept=False, tol=1e-12,
                                      max_sweeps=100_000), kernels)
        assert np.allclose(sol.coefficients, np.linalg.solve(X, y), atol=1e-8)
        assert np.linalg.norm(y - X @ sol.coefficients) < 1e-8

    def test_least_squares_lasso(self, kernels):
        r = np.random.default_rng(6)
        X = r.normal(size=(8, 3))
        y = r.normal(size=8)
        sol = solve_lasso(y, X, 0.0, SolverSettings(standardize=False, fit_intercept=False,
                                                    tol=1e-12), kernels)
        assert np.allclose(sol.coefficients, np.linalg.lstsq(X, y, rcond=None)[0], atol=1e-8)

    def test_orthonormal_lasso(self, kernels):
        Q, _ = np.linalg.qr(np.random.default_rng(2).normal(size=(10, 4)))
        y = np.random.default_rng(3).normal(size=10) * 3
        lam = 0.4
        sol = solve_lasso(y, Q, lam, RAW, kernels)
        c = Q.T @ y
        assert np.allclose(sol.coefficients, np.sign(c) * np.maximum(np.abs(c) - lam, 0),
                           atol=1e-12)


class TestSolver:
    @pytest.mark.parametrize("seed", range(8))
    def test_kkt_and_descent(self, seed, kernels):
        p = random_problem(seed)
        sol = solve(p, SolverSettings(standardize=False), kernels)
        assert sol.converged and sol.kkt_residual <= 1e-8
        assert kkt_residual(p, sol.coefficients, sol.intercept) <= 1e-8
        tr = sol.trace
        assert len(tr) == sol.sweeps_used
        assert np.all(np.diff(tr) <= 1e-12 * np.maximum(1.0, np.abs(tr[:-1])))
        assert sol.objective == pytest.approx(objective(p, sol.coefficients, sol.intercept),
                                              abs=1e-10)

    @pytest.mark.parametrize("seed", range(4))
    def test_standardization_transparency(self, seed, kernels):
        p = random_problem(seed + 100)
        sol = solve(p, SolverSettings(), kernels)
        ps, scale, offset = standardized(p)
        beta = sol.coefficients * scale
        internal = (sol.intercept - offset) + offset + ps.design @ beta
        assert np.allclose(sol.predict(p.design), internal, atol=1e-10)
        assert kkt_residual(ps, beta, sol.intercept - offset) <= 1e-8

    def test_lasso_equals_singleton_groups(self, kernels):
        p = random_problem(11, m=20, p=8)
        a = solve_lasso(p.y, p.design, p.lam, None, kernels)
        b = solve(GroupedProblem(p.y, p.design, [[j] for j in range(8)], p.lam), None,
                  kernels)
        assert np.max(np.abs(a.coefficients - b.coefficients)) <= 1e-12

    def test_deterministic(self, kernels):
        p = random_problem(21)
        a, b = solve(p, None, kernels), solve(p, None, kernels)
        assert np.array_equal(a.coefficients, b.coefficients) and a.intercept == b.intercept

    def test_duplicate_columns(self, kernels):
        r = np.random.default_rng(1)
        x = r.normal(size=12)
        X = np.column_stack([x, x, r.normal(size=12)])
        y = 2 * x + r.normal(size=12) * 0.1
        sol = solve(GroupedProblem(y, X, [[0, 1], [2]], 0.3), None, kernels)
        assert sol.converged and np.isfinite(sol.objective)

    def test_sweep_cap(self, kernels):
        p = random_problem(9, m=20, p=8, n_groups=2, lam=0.01)
        sol = solve(p, SolverSettings(max_sweeps=1), kernels)
        assert sol.sweeps_used == 1 and not sol.converged

    def test_errors(self):
        with pytest.raises(SolverError):
            solve(GroupedProblem([np.nan, 1.0], np.ones((2, 1)), [[0]], 1.0))
        with pytest.raises(SolverError):
            solve(GroupedProblem(np.zeros(0), np.zeros((0, 1)), [[0]], 1.0))
        with pytest.raises(SolverError):
            SolverSettings(tol=0)
        with pytest.raises(SolverError):
            SolverSettings(max_sweeps=0)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_subgradient_oracle(self, seed):
        p = random_problem(seed + 500)
        sol = solve(p, SolverSettings(standardize=False))
        best, _ = subgradient_oracle(p.design, p.y, p.groups, p.lam, steps=200_000,
                                     restarts=3, seed=seed)
        assert sol.objective <= best + 1e-6


def test_backends_agree():
    from pgsrhb._backend import available
    impls = available()
    if len(impls) < 2:
        pytest.skip("compiled kernels not built")
    for seed in range(10):
        p = random_problem(seed + 40)
        sols = [solve(p, None, k) for k in impls.values()]
        assert np.allclose(sols[0].coefficients, sols[1].coefficients, atol=1e-10)
        assert sols[0].sweeps_used == sols[1].sweeps_used


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_zero_is_optimal_above_critical(seed):
    p = random_problem(seed)
    lam_c = critical_lambda(p)
    p.lam = lam_c * 1.01 + 1e-9
    sol = solve(p, SolverSettings(standardize=False))
    assert np.all(sol.coefficients == 0)
