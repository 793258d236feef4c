"""Shared numerical kernels used by the explainers.

Dense, correctness-first implementations: weighted ridge least squares
(with an optional coefficient-sum equality constraint), nonnegative
least squares via the Lawson-Hanson active set, a two-phase primal
simplex with Bland's rule, and an accelerated proximal-gradient (FISTA
style) minimizer for smooth + L1 objectives over a box.

Problem sizes here are at most a few thousand rows/columns, so
everything stays dense and re-entrant.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import IterationLimitError, NumericalError

_RC_TOL = 1e-9  # reduced-cost tolerance for simplex optimality


# ---------------------------------------------------------------------------
# Weighted ridge least squares


def solve_weighted_ridge(X, y, weights=None, lam=0.0, *, fit_intercept=False,
                         coef_sum=None):
    """Minimize sum_i w_i (y_i - x_i.beta [- b])^2 + lam * ||beta||^2.

    Args:
        X: (n, p) design matrix.
        y: (n,) targets.
        weights: (n,) nonnegative sample weights; None means all ones.
        lam: ridge penalty on the coefficients (never on the intercept).
        fit_intercept: add an unpenalized intercept column.
        coef_sum: if given, enforce sum(beta) == coef_sum exactly via
            variable elimination. Incompatible with fit_intercept.

    Returns:
        (coef, intercept): coef is a (p,) array; intercept is 0.0 when
        fit_intercept is False.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n < 1:
        raise ValueError("need at least one row")
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
    if coef_sum is not None and fit_intercept:
        raise ValueError("coef_sum cannot be combined with fit_intercept")

    if coef_sum is not None:
        return _ridge_with_sum_constraint(X, y, w, lam, float(coef_sum)), 0.0

    if fit_intercept:
        Xa = np.hstack([X, np.ones((n, 1))])
    else:
        Xa = X
    Xw = Xa * w[:, None]
    G = Xw.T @ Xa
    rhs = Xw.T @ y
    if lam > 0:
        G[np.arange(p), np.arange(p)] += lam
    beta = _solve_spd(G, rhs, lam)
    if fit_intercept:
        return beta[:p], float(beta[p])
    return beta, 0.0


def _solve_spd(G, rhs, lam):
    """Solve G x = rhs via Cholesky; diagnose singular systems."""
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        if lam == 0:
            raise NumericalError(
                "normal equations are singular; pass lam > 0 to regularize"
            ) from None
        raise NumericalError("ridge system is not positive definite") from None
    z = np.linalg.solve(L, rhs)
    return np.linalg.solve(L.T, z)


def _ridge_with_sum_constraint(X, y, w, lam, s):
    """Eliminate beta_p = s - sum(beta_1..p-1) and solve the reduced system.

    Penalty keeps the full ||beta||^2 including the eliminated coordinate.
    """
    n, p = X.shape
    if p == 1:
        return np.array([s])
    xp = X[:, -1]
    Xr = X[:, :-1] - xp[:, None]
    yr = y - s * xp
    Xw = Xr * w[:, None]
    G = Xw.T @ Xr
    rhs = Xw.T @ yr
    if lam > 0:
        # ||beta||^2 = ||beta_r||^2 + (s - 1.beta_r)^2
        G += lam * (np.eye(p - 1) + np.ones((p - 1, p - 1)))
        rhs += lam * s
    beta_r = _solve_spd(G, rhs, lam)
    return np.append(beta_r, s - beta_r.sum())


# ---------------------------------------------------------------------------
# Nonnegative least squares (Lawson-Hanson active set)


def nnls(A, b, max_iter=None):
    """Minimize ||A x - b||^2 subject to x >= 0.

    Active-set iteration after Lawson-Hanson. At the solution the KKT
    conditions hold: the gradient of the squared residual is >= 0 on
    zero coordinates and ~0 on positive ones.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = A.shape
    if max_iter is None:
        max_iter = 3 * max(n, 10)

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    resid = b.copy()
    grad = A.T @ resid  # negative half-gradient of the objective
    tol = 10 * np.finfo(float).eps * max(m, n) * max(1.0, float(np.abs(grad).max(initial=0.0)))

    outer = 0
    while True:
        candidates = np.where(~passive, grad, -np.inf)
        j = int(np.argmax(candidates))
        if passive.all() or candidates[j] <= tol:
            return x
        if outer >= max_iter:
            raise IterationLimitError("nnls iteration cap exceeded", best=x)
        outer += 1
        passive[j] = True

        while True:
            idx = np.flatnonzero(passive)
            z = np.zeros(n)
            z[idx], *_ = np.linalg.lstsq(A[:, idx], b, rcond=None)
            if z[idx].min() > 0:
                x = z
                break
            # Step toward z until the first passive coordinate hits zero.
            blocking = idx[z[idx] <= 0]
            alpha = np.min(x[blocking] / (x[blocking] - z[blocking]))
            x = x + alpha * (z - x)
            passive[idx[x[idx] <= tol]] = False
            x[~passive] = 0.0

        resid = b - A @ x
        grad = A.T @ resid


def nnls_kkt_violation(A, b, x):
    """Max KKT violation of min ||Ax-b||^2, x>=0 at x; used by tests."""
    g = 2.0 * A.T @ (A @ x - b)
    zero = x <= 1e-12
    v_zero = float(np.max(-g[zero], initial=0.0))
    v_pos = float(np.max(np.abs(g[~zero]), initial=0.0))
    return max(v_zero, v_pos)


# ---------------------------------------------------------------------------
# Dense simplex LP


@dataclass
class LpProblem:
    """min c.x  s.t.  A x (<=,=,>=) b,  lower <= x <= upper."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    senses: list  # one of "<=", "=", ">=" per row
    lower: np.ndarray | None = None  # default 0
    upper: np.ndarray | None = None  # default +inf

    def normalized(self):
        c = np.asarray(self.c, dtype=np.float64)
        A = np.asarray(self.A, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        n = c.size
        m = b.size
        if A.shape != (m, n):
            raise ValueError(f"A has shape {A.shape}, expected ({m}, {n})")
        if len(self.senses) != m:
            raise ValueError("one sense per row required")
        lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=np.float64)
        upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=np.float64)
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        return c, A, b, list(self.senses), lower, upper


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | iteration_limit
    x: np.ndarray | None = None
    objective: float | None = None
    dual: np.ndarray | None = None          # one value per declared row
    reduced_costs: np.ndarray | None = None  # per declared variable


def simplex_lp(problem: LpProblem, max_iters: int = 20000) -> LpSolution:
    """Two-phase dense primal simplex, bounded-variable form.

    Lower bounds shift to zero, free-below variables with a finite upper
    bound mirror, fully free variables split; the remaining finite upper
    bounds stay native and are honored by the ratio test (no extra rows).
    Pivoting uses Dantzig's rule with a Bland anti-cycling fallback.
    """
    c0, A0, b0, senses0, lower, upper = problem.normalized()
    m0, n0 = A0.shape

    # --- reduce to 0 <= x' <= u' with a bookkeeping map back to user space
    cols = []          # per user variable: ("shift", j, l) | ("mirror", j, u) | ("split", j)
    c_parts = []
    A_parts = []
    u_parts = []
    b = b0.copy()

    for j in range(n0):
        lj, uj = lower[j], upper[j]
        if np.isfinite(lj):
            cols.append(("shift", j, lj))
            c_parts.append(c0[j])
            A_parts.append(A0[:, j])
            u_parts.append(uj - lj if np.isfinite(uj) else np.inf)
            b -= A0[:, j] * lj
        elif np.isfinite(uj):
            # x_j = u_j - t, t >= 0
            cols.append(("mirror", j, uj))
            c_parts.append(-c0[j])
            A_parts.append(-A0[:, j])
            u_parts.append(np.inf)
            b -= A0[:, j] * uj
        else:
            cols.append(("split", j))
            c_parts.append(c0[j])
            A_parts.append(A0[:, j])
            u_parts.append(np.inf)
            cols.append(("split_neg", j))
            c_parts.append(-c0[j])
            A_parts.append(-A0[:, j])
            u_parts.append(np.inf)

    c = np.array(c_parts)
    A = np.column_stack(A_parts) if A_parts else np.zeros((m0, 0))
    u = np.array(u_parts)

    sol = _simplex_standard(c, A, b, list(senses0), u, max_iters)
    if sol.status != "optimal":
        return sol

    nt = len(c_parts)
    x_user = np.zeros(n0)
    k = 0
    while k < nt:
        kind = cols[k][0]
        if kind == "shift":
            _, j, lj = cols[k]
            x_user[j] = sol.x[k] + lj
        elif kind == "mirror":
            _, j, uj = cols[k]
            x_user[j] = uj - sol.x[k]
        elif kind == "split":
            j = cols[k][1]
            x_user[j] = sol.x[k] - sol.x[k + 1]
            k += 1
        k += 1

    dual_user = sol.dual[:m0]
    # User-space reduced costs c - A^T y: zero on interior variables, >= 0
    # at a lower bound, <= 0 at an upper bound (the synthesized bound rows'
    # duals are exactly these values, so no extra folding is needed).
    rc_user = c0 - A0.T @ dual_user
    return LpSolution(
        status="optimal",
        x=x_user,
        objective=float(c0 @ x_user),
        dual=dual_user,
        reduced_costs=rc_user,
    )


_AT_LOWER = 0
_BASIC = 1
_AT_UPPER = 2


def _simplex_standard(c, A, b, senses, u, max_iters):
    """Simplex for min c.x, A x (<=,=,>=) b, 0 <= x <= u (dense tableau).

    Finite upper bounds are native: nonbasic variables rest at either
    bound and the ratio test lets an entering variable stop at its own
    opposite bound (a bound flip, no pivot).
    """
    m, n = A.shape
    # Normalize rows to b >= 0 and add slack/surplus columns.
    A = A.copy()
    b = b.copy()
    row_sign = np.ones(m)
    senses = list(senses)
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1
            b[i] *= -1
            row_sign[i] = -1.0
            senses[i] = {"<=": ">=", ">=": "<=", "=": "="}[senses[i]]

    slack_cols = []
    for i, s in enumerate(senses):
        if s == "<=":
            col = np.zeros(m)
            col[i] = 1.0
            slack_cols.append((i, col))
        elif s == ">=":
            col = np.zeros(m)
            col[i] = -1.0
            slack_cols.append((i, col))
        elif s != "=":
            raise ValueError(f"unknown sense {s!r}")

    n_slack = len(slack_cols)
    full = np.zeros((m, n + n_slack))
    full[:, :n] = A
    for k, (_, col) in enumerate(slack_cols):
        full[:, n + k] = col
    cost = np.concatenate([c, np.zeros(n_slack)])
    uppers = np.concatenate([u, np.full(n_slack, np.inf)])

    # Initial basis: slacks of "<=" rows; then any unit columns already in
    # the problem whose bound admits the row value; artificials last.
    basis = -np.ones(m, dtype=int)
    used = np.zeros(n + n_slack, dtype=bool)
    for k, (i, col) in enumerate(slack_cols):
        if col[i] > 0:
            basis[i] = n + k
            used[n + k] = True
    pending = [i for i in range(m) if basis[i] < 0]
    if pending:
        col_nnz = np.count_nonzero(full, axis=0)
        for i in pending:
            cand = np.flatnonzero((full[i] == 1.0) & (col_nnz == 1) & ~used
                                  & (uppers >= b[i]))
            if cand.size:
                basis[i] = int(cand[0])
                used[cand[0]] = True
    art_rows = [i for i in range(m) if basis[i] < 0]
    n_art = len(art_rows)
    keep = np.arange(m)
    if n_art:
        art = np.zeros((m, n_art))
        for k, i in enumerate(art_rows):
            art[i, k] = 1.0
            basis[i] = n + n_slack + k
        T = np.hstack([full, art, b[:, None]])
        status_arr = np.full(T.shape[1] - 1, _AT_LOWER, dtype=np.int8)
        status_arr[basis] = _BASIC
        phase_cost = np.concatenate([np.zeros(n + n_slack), np.ones(n_art)])
        phase_uppers = np.concatenate([uppers, np.full(n_art, np.inf)])
        status, iters = _pivot_loop(T, basis, status_arr, phase_cost,
                                    phase_uppers, max_iters)
        if status == "iteration_limit":
            return LpSolution(status="iteration_limit")
        if phase_cost[basis] @ T[:, -1] > 1e-7:
            return LpSolution(status="infeasible")
        # Drive remaining artificials out of the basis where possible
        # (their rows sit at zero, so these pivots are degenerate);
        # rows where that fails are redundant and get dropped.
        for i in range(m):
            if basis[i] >= n + n_slack:
                row_vals = np.abs(T[i, : n + n_slack])
                piv = np.flatnonzero((row_vals > 1e-9)
                                     & (status_arr[: n + n_slack] == _AT_LOWER))
                if piv.size:
                    T[i, -1] = 0.0
                    status_arr[basis[i]] = _AT_LOWER
                    status_arr[piv[0]] = _BASIC
                    _pivot(T, basis, i, int(piv[0]))
        rows_ok = basis < n + n_slack
        keep = np.flatnonzero(rows_ok)
        T = T[rows_ok][:, np.r_[np.arange(n + n_slack), T.shape[1] - 1]]
        basis = basis[rows_ok]
        full = full[rows_ok]
        status_arr = status_arr[: n + n_slack]
        max_iters -= iters
    else:
        T = np.hstack([full, b[:, None]])
        status_arr = np.full(n + n_slack, _AT_LOWER, dtype=np.int8)
        status_arr[basis] = _BASIC

    status, _ = _pivot_loop(T, basis, status_arr, cost, uppers, max_iters)
    if status != "optimal":
        return LpSolution(status=status)

    x = np.zeros(n + n_slack)
    x[status_arr == _AT_UPPER] = uppers[status_arr == _AT_UPPER]
    for i in range(len(basis)):
        x[basis[i]] = T[i, -1]

    # Recompute duals from the final basis against the original columns
    # to avoid accumulated tableau drift: B^T y = c_B.
    B = full[:, basis]
    cb = cost[basis]
    try:
        y_kept = np.linalg.solve(B.T, cb)
    except np.linalg.LinAlgError:
        y_kept, *_ = np.linalg.lstsq(B.T, cb, rcond=None)
    y = np.zeros(m)
    y[keep] = y_kept
    y_user = y * row_sign

    return LpSolution(
        status="optimal",
        x=x[:n],
        objective=float(cost[:n] @ x[:n]),
        dual=y_user,
    )


def _pivot_loop(T, basis, status_arr, cost, uppers, max_iters):
    """Bounded-variable pivoting to optimality; returns (status, iterations).

    The RHS column always holds the current basic values. Entering
    follows Dantzig's largest-violation rule; a run of degenerate steps
    switches to Bland's smallest-index rule, whose bounded-variable
    termination guarantee breaks any cycle, until progress resumes.
    """
    m = T.shape[0]
    iters = 0
    degenerate_streak = 0
    bland_mode = False
    n_all = len(cost)
    fixed = uppers <= _RC_TOL  # zero-width [0,0] variables never move
    while True:
        cb = cost[basis] if m else np.zeros(0)
        rc = cost - (cb @ T[:, :-1] if m else 0.0)
        violation = np.where(status_arr == _AT_LOWER, -rc, 0.0)
        at_upper = status_arr == _AT_UPPER
        violation[at_upper] = rc[at_upper]
        violation[fixed] = 0.0
        eligible = violation > _RC_TOL
        if not eligible.any():
            return "optimal", iters
        if bland_mode:
            entering = int(np.flatnonzero(eligible)[0])
        else:
            entering = int(np.argmax(violation))
        if iters >= max_iters:
            return "iteration_limit", iters
        iters += 1

        from_lower = status_arr[entering] == _AT_LOWER
        sigma = 1.0 if from_lower else -1.0
        d = T[:, entering]
        dd = sigma * d
        rhs = T[:, -1]
        ub = uppers[basis] if m else np.zeros(0)

        # step limits: basics hitting 0, basics hitting their upper bound,
        # and the entering variable reaching its own opposite bound
        t_best = uppers[entering]
        limit_row = -1
        limit_bound = 0.0
        if m:
            with np.errstate(divide="ignore", invalid="ignore"):
                t_zero = np.where(dd > 1e-11, rhs / dd, np.inf)
                t_upper = np.where((dd < -1e-11) & np.isfinite(ub),
                                   (ub - rhs) / (-dd), np.inf)
            t_rows = np.minimum(t_zero, t_upper)
            row_min = t_rows.min() if m else np.inf
            if row_min <= t_best + 1e-11 and np.isfinite(row_min):
                # Bland tie-break: smallest leaving variable index
                tie = np.flatnonzero(t_rows <= row_min + 1e-11)
                limit_row = int(tie[np.argmin(basis[tie])])
                t_best = min(row_min, t_best)
                limit_bound = 0.0 if t_zero[limit_row] <= t_upper[limit_row] else ub[limit_row]
        if not np.isfinite(t_best):
            return "unbounded", iters

        if t_best <= 1e-11:
            degenerate_streak += 1
            if degenerate_streak > 60:
                bland_mode = True
        else:
            degenerate_streak = 0
            bland_mode = False

        if limit_row < 0:
            # bound flip: the entering variable crosses to its other bound
            T[:, -1] -= sigma * t_best * d
            status_arr[entering] = _AT_UPPER if from_lower else _AT_LOWER
            continue

        T[:, -1] -= sigma * t_best * d
        leaving = basis[limit_row]
        status_arr[leaving] = _AT_LOWER if limit_bound == 0.0 else _AT_UPPER
        status_arr[entering] = _BASIC
        enter_value = t_best if from_lower else uppers[entering] - t_best
        T[limit_row, -1] = 0.0  # exact by construction; avoids drift
        _pivot(T, basis, limit_row, entering)
        T[limit_row, -1] = enter_value


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])
    basis[row] = col


# ---------------------------------------------------------------------------
# FISTA-style proximal gradient


@dataclass
class ProxConfig:
    max_iter: int = 1000
    step_size: float = 0.01
    tol: float = 1e-7


@dataclass
class ProxResult:
    x: np.ndarray
    objective: float
    trace: np.ndarray  # best composite objective after each iteration
    iterations: int


def fista_minimize(smooth, l1_weight, box, x0, config: ProxConfig | None = None,
                   callback=None) -> ProxResult:
    """Minimize f(x) + l1_weight * ||x||_1 over a box.

    Args:
        smooth: callable x -> (f(x), grad f(x)) for the differentiable part.
        l1_weight: L1 penalty handled by soft-thresholding.
        box: (lo, hi) arrays or scalars; iterates are projected inside.
        x0: feasible start.
        config: iteration cap, fixed step size, stopping tolerance.
        callback: optional callable(iteration, x) invoked on each new iterate.

    Momentum restarts whenever the composite objective increases. The
    best-objective iterate is returned and the trace records the running
    best so it is non-increasing by construction.
    """
    cfg = config or ProxConfig()
    lo, hi = box
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), np.shape(x0)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), np.shape(x0)).copy()
    x = np.clip(np.asarray(x0, dtype=np.float64), lo, hi)
    yk = x.copy()
    t = 1.0
    step = cfg.step_size

    def composite(v):
        fv, _ = smooth(v)
        return fv + l1_weight * np.abs(v).sum()

    best_obj = composite(x)
    best_x = x.copy()
    prev_obj = best_obj
    trace = [best_obj]

    for it in range(cfg.max_iter):
        fv, g = smooth(yk)
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient at iteration {it}")
        z = yk - step * g
        z = _soft_threshold(z, step * l1_weight)
        x_new = np.clip(z, lo, hi)
        obj = composite(x_new)

        if obj < best_obj:
            best_obj = obj
            best_x = x_new.copy()
        trace.append(best_obj)
        if callback is not None:
            callback(it, x_new)

        if obj > prev_obj:  # momentum restart
            t = 1.0
            yk = x_new.copy()
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            yk = x_new + ((t - 1.0) / t_new) * (x_new - x)
            yk = np.clip(yk, lo, hi)
            t = t_new
        step_done = np.linalg.norm(x_new - x)
        x = x_new
        prev_obj = obj
        if step_done <= cfg.tol * max(1.0, np.linalg.norm(x)):
            break

    return ProxResult(x=best_x, objective=best_obj, trace=np.array(trace),
                      iterations=len(trace) - 1)


def _soft_threshold(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)
