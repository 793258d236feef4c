import itertools

import numpy as np
import pytest

from xnids.errors import NumericalError
from xnids.numopt import (
    LpProblem,
    ProxConfig,
    fista_minimize,
    nnls,
    nnls_kkt_violation,
    simplex_lp,
    solve_weighted_ridge,
)


# ---------------------------------------------------------------------------
# weighted ridge


def test_ridge_identity_design_recovers_targets():
    y = np.array([3.0, -1.0, 0.5])
    coef, intercept = solve_weighted_ridge(np.eye(3), y, lam=0.0)
    assert np.allclose(coef, y, atol=1e-12)
    assert intercept == 0.0


def test_ridge_weight_semantics_match_row_duplication():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(4, 2))
    y = rng.normal(size=4)
    # weights (2, 0, 1, 1) == duplicating row 0 and dropping row 1
    w = np.array([2.0, 0.0, 1.0, 1.0])
    Xdup = np.vstack([X[0], X[0], X[2], X[3]])
    ydup = np.array([y[0], y[0], y[2], y[3]])
    a, _ = solve_weighted_ridge(X, y, w, lam=0.01)
    b, _ = solve_weighted_ridge(Xdup, ydup, lam=0.01)
    assert np.allclose(a, b, atol=1e-10)


def test_ridge_matches_independent_normal_equations():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(20, 5))
    y = rng.normal(size=20)
    w = rng.uniform(0.1, 2.0, size=20)
    lam = 0.1
    coef, _ = solve_weighted_ridge(X, y, w, lam=lam)
    # independent dense solve of the stationarity conditions
    W = np.diag(w)
    expected = np.linalg.solve(X.T @ W @ X + lam * np.eye(5), X.T @ W @ y)
    assert np.allclose(coef, expected, atol=1e-8)


def test_ridge_residual_orthogonality_invariant():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 4))
    y = rng.normal(size=30)
    w = rng.uniform(0.5, 1.5, size=30)
    lam = 0.25
    coef, _ = solve_weighted_ridge(X, y, w, lam=lam)
    resid = X.T @ (w * (y - X @ coef))
    assert np.allclose(resid, lam * coef, atol=1e-7)


def test_ridge_sum_constraint_enforced_and_optimal():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 6))
    y = rng.normal(size=40)
    w = rng.uniform(0.1, 1.0, size=40)
    s = 2.5
    coef, _ = solve_weighted_ridge(X, y, w, lam=0.05, coef_sum=s)
    assert abs(coef.sum() - s) < 1e-10
    # KKT: gradient of the objective is a multiple of the all-ones vector
    grad = -2 * X.T @ (w * (y - X @ coef)) + 2 * 0.05 * coef
    assert np.ptp(grad) < 1e-7


def test_ridge_singular_without_lambda_raises():
    X = np.array([[1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(NumericalError, match="lam"):
        solve_weighted_ridge(X, np.array([1.0, 2.0]), lam=0.0)


def test_ridge_intercept_unpenalized():
    # heavily penalized slope, intercept must absorb the mean
    X = np.zeros((5, 1))
    y = np.full(5, 4.0)
    coef, intercept = solve_weighted_ridge(X, y, lam=10.0, fit_intercept=True)
    assert abs(intercept - 4.0) < 1e-10
    assert abs(coef[0]) < 1e-10


# ---------------------------------------------------------------------------
# nnls


def brute_force_nnls(A, b):
    """Enumerate all active sets (zero patterns) and keep the best feasible."""
    n = A.shape[1]
    best, best_obj = np.zeros(n), np.inf
    for pattern in itertools.product([0, 1], repeat=n):
        free = np.array(pattern, dtype=bool)
        x = np.zeros(n)
        if free.any():
            x[free], *_ = np.linalg.lstsq(A[:, free], b, rcond=None)
        if np.any(x < -1e-12):
            continue
        obj = np.sum((A @ x - b) ** 2)
        if obj < best_obj - 1e-15:
            best, best_obj = x, obj
    return best, best_obj


def test_nnls_clamps_negative_component():
    x = nnls(np.eye(2), np.array([1.0, -2.0]))
    assert np.allclose(x, [1.0, 0.0], atol=1e-12)


def test_nnls_exact_fit_inside_cone():
    rng = np.random.default_rng(2)
    A = rng.uniform(0.0, 1.0, size=(5, 3))
    x_true = np.array([0.5, 0.0, 1.5])
    b = A @ x_true
    x = nnls(A, b)
    assert np.linalg.norm(A @ x - b) < 1e-10


@pytest.mark.parametrize("seed", range(12))
def test_nnls_matches_active_set_enumeration(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(6, 3))
    b = rng.normal(size=6)
    x = nnls(A, b)
    _, best_obj = brute_force_nnls(A, b)
    obj = np.sum((A @ x - b) ** 2)
    assert obj <= best_obj + 1e-8
    assert nnls_kkt_violation(A, b, x) < 1e-8


# ---------------------------------------------------------------------------
# simplex


def enumerate_vertices(problem):
    """Best objective over all basic feasible points of the inequality system.

    Treats every row and every finite bound as a hyperplane; tries all
    n-subsets, keeps feasible intersections.
    """
    c, A, b, senses, lower, upper = problem.normalized()
    n = c.size
    planes = [(A[i], b[i]) for i in range(len(b))]
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lower[j]):
            planes.append((e.copy(), lower[j]))
        if np.isfinite(upper[j]):
            planes.append((e.copy(), upper[j]))
    best = np.inf
    for subset in itertools.combinations(range(len(planes)), n):
        M = np.array([planes[i][0] for i in subset])
        rhs = np.array([planes[i][1] for i in subset])
        try:
            x = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            continue
        ok = np.all(x >= lower - 1e-9) and np.all(x <= upper + 1e-9)
        if ok:
            for i in range(len(b)):
                lhs = A[i] @ x
                if senses[i] == "<=" and lhs > b[i] + 1e-9:
                    ok = False
                elif senses[i] == ">=" and lhs < b[i] - 1e-9:
                    ok = False
                elif senses[i] == "=" and abs(lhs - b[i]) > 1e-9:
                    ok = False
        if ok:
            best = min(best, float(c @ x))
    return best


def test_simplex_single_lower_bound_row():
    p = LpProblem(c=np.array([1.0]), A=np.array([[1.0]]), b=np.array([3.0]),
                  senses=[">="])
    sol = simplex_lp(p)
    assert sol.status == "optimal"
    assert abs(sol.x[0] - 3.0) < 1e-9
    assert abs(sol.objective - 3.0) < 1e-9


def test_simplex_box_toy():
    p = LpProblem(
        c=np.array([-1.0, -1.0]),
        A=np.array([[1.0, 1.0]]),
        b=np.array([1.0]),
        senses=["<="],
        lower=np.zeros(2),
        upper=np.ones(2),
    )
    sol = simplex_lp(p)
    assert sol.status == "optimal"
    assert abs(sol.objective + 1.0) < 1e-9


def test_simplex_infeasible():
    p = LpProblem(
        c=np.array([1.0]),
        A=np.array([[1.0], [1.0]]),
        b=np.array([2.0, 1.0]),
        senses=[">=", "<="],
    )
    assert simplex_lp(p).status == "infeasible"


def test_simplex_unbounded():
    p = LpProblem(c=np.array([-1.0]), A=np.zeros((0, 1)), b=np.zeros(0), senses=[])
    assert simplex_lp(p).status == "unbounded"


def test_simplex_equality_rows():
    # min x+y st x+y=2, x-y=0 -> x=y=1
    p = LpProblem(
        c=np.array([1.0, 1.0]),
        A=np.array([[1.0, 1.0], [1.0, -1.0]]),
        b=np.array([2.0, 0.0]),
        senses=["=", "="],
    )
    sol = simplex_lp(p)
    assert sol.status == "optimal"
    assert np.allclose(sol.x, [1.0, 1.0], atol=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_simplex_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    n, m = 5, 4
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.5, 2.0, size=m)
    c = rng.normal(size=n)
    p = LpProblem(c=c, A=A, b=b, senses=["<="] * m,
                  lower=np.zeros(n), upper=np.full(n, 1.5))
    sol = simplex_lp(p)
    assert sol.status == "optimal"
    expected = enumerate_vertices(p)
    assert abs(sol.objective - expected) < 1e-6


@pytest.mark.parametrize("seed", range(6))
def test_simplex_larger_random_lps(seed):
    rng = np.random.default_rng(300 + seed)
    n, m = 8, 6
    A = rng.normal(size=(m, n))
    b = rng.uniform(1.0, 3.0, size=m)
    c = rng.normal(size=n)
    p = LpProblem(c=c, A=A, b=b, senses=["<="] * m,
                  lower=np.zeros(n), upper=np.full(n, 2.0))
    sol = simplex_lp(p)
    assert sol.status == "optimal"
    expected = enumerate_vertices(p)
    assert abs(sol.objective - expected) < 1e-6


@pytest.mark.parametrize("seed", range(6))
def test_simplex_strong_duality_with_bounds(seed):
    rng = np.random.default_rng(200 + seed)
    n, m = 6, 4
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.5, 2.0, size=m)
    c = rng.normal(size=n)
    lower = np.zeros(n)
    upper = np.full(n, 1.0)
    p = LpProblem(c=c, A=A, b=b, senses=["<="] * m, lower=lower, upper=upper)
    sol = simplex_lp(p)
    assert sol.status == "optimal"
    rc = sol.reduced_costs
    at_lower = sol.x <= lower + 1e-7
    at_upper = sol.x >= upper - 1e-7
    interior = ~(at_lower | at_upper)
    # bounded-variable optimality: rc >= 0 at lower, <= 0 at upper, ~0 inside
    assert np.all(rc[at_lower] >= -1e-6)
    assert np.all(rc[at_upper] <= 1e-6)
    assert np.all(np.abs(rc[interior]) < 1e-6)
    bound_part = rc[at_lower] @ lower[at_lower] + rc[at_upper] @ upper[at_upper]
    assert abs(sol.objective - (sol.dual @ b + bound_part)) < 1e-6


def test_simplex_dual_feasibility_and_complementarity():
    rng = np.random.default_rng(42)
    n, m = 5, 3
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.5, 2.0, size=m)
    c = rng.uniform(0.1, 1.0, size=n)
    p = LpProblem(c=c, A=A, b=b, senses=["<="] * m)
    sol = simplex_lp(p)
    assert sol.status == "optimal"
    # for <= rows of a min problem, duals are <= 0 and slack rows have dual 0
    slack = b - A @ sol.x
    assert np.all(sol.dual <= 1e-7)
    assert np.all(np.abs(sol.dual * slack) < 1e-6)


# ---------------------------------------------------------------------------
# fista


def quadratic_around(a):
    a = np.asarray(a, dtype=float)

    def smooth(x):
        d = x - a
        return float(d @ d), 2.0 * d

    return smooth


def test_fista_unconstrained_quadratic_hits_center():
    a = np.array([0.3, -0.2, 0.7])
    res = fista_minimize(quadratic_around(a), 0.0, (-1.0, 1.0), np.zeros(3),
                         ProxConfig(max_iter=500, step_size=0.4, tol=1e-12))
    assert np.allclose(res.x, a, atol=1e-6)


def test_fista_soft_threshold_closed_form():
    # min (x-2)^2 + 2|x| on [-10, 10]  ->  x* = 1
    def smooth(x):
        d = x - 2.0
        return float(d @ d), 2.0 * d

    res = fista_minimize(smooth, 2.0, (-10.0, 10.0), np.zeros(1),
                         ProxConfig(max_iter=2000, step_size=0.4, tol=1e-12))
    assert abs(res.x[0] - 1.0) < 1e-6


def test_fista_matches_grid_search_2d():
    rng = np.random.default_rng(8)
    # random strictly convex quadratic 0.5 x'Qx + g'x
    M = rng.normal(size=(2, 2))
    Q = M.T @ M + 0.5 * np.eye(2)
    g = rng.normal(size=2)
    beta = 0.3
    lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])

    def smooth(x):
        return float(0.5 * x @ Q @ x + g @ x), Q @ x + g

    res = fista_minimize(smooth, beta, (lo, hi), np.zeros(2),
                         ProxConfig(max_iter=3000, step_size=1.0 / np.linalg.norm(Q, 2), tol=0.0))

    grid = np.linspace(-1.0, 1.0, 401)
    best = np.inf
    for u in grid:
        xs = np.column_stack([np.full_like(grid, u), grid])
        vals = 0.5 * np.einsum("ij,jk,ik->i", xs, Q, xs) + xs @ g + beta * np.abs(xs).sum(axis=1)
        best = min(best, float(vals.min()))
    assert res.objective <= best + 1e-5


def test_fista_trace_is_non_increasing():
    res = fista_minimize(quadratic_around([0.5, 0.5]), 0.1, (0.0, 1.0),
                         np.array([1.0, 0.0]),
                         ProxConfig(max_iter=200, step_size=0.3, tol=0.0))
    assert np.all(np.diff(res.trace) <= 1e-12)


def test_fista_rejects_nonfinite_gradient():
    def bad(x):
        return float("nan"), np.full_like(x, np.nan)

    with pytest.raises(NumericalError, match="iteration"):
        fista_minimize(bad, 0.0, (0.0, 1.0), np.zeros(2), ProxConfig(max_iter=5))
