"""Pure-Python linear epsilon-SVR kernels (fallback for the compiled core).

Problem, with r_i = y_i - w.x_i - b::

    J(w, b) = 0.5 |w|^2 + C * sum_i max(0, |r_i| - eps)

``svr_solve`` runs a Mehrotra predictor-corrector interior-point method on the
slack form of J (variables w, b, xi, xi*; four inequality blocks). The slack
variables are eliminated in closed form, so each Newton step is one
(d+1)x(d+1) Cholesky solve plus O(n d^2) work.

After every step the primal point is completed with the exact best intercept
and scored; the best point seen is kept, so the objective trace never
increases. A feasible dual point beta (|beta_i| <= C, sum beta = 0) is built
from the multipliers and gives the lower bound::

    D(beta) = -0.5 |X^T beta|^2 + y.beta - eps |beta|_1

The solver stops once J - D <= tol * J, or J == 0 (optimal since J >= 0).
"""

from __future__ import annotations

import math

import numpy as np

STEP_FRACTION = 0.99


def best_offset(r, eps: float) -> tuple[float, float]:
    """Intercept minimising ``sum(max(0, |r_i - b| - eps))``.

    The minimiser set is an interval; its midpoint is returned with the loss there.
    """
    r = np.asarray(r, dtype=float)
    lows = r - eps
    highs = r + eps
    cand = np.concatenate([lows, highs])
    # one-sided slopes of the piecewise-linear loss at each breakpoint
    right = (highs[None, :] <= cand[:, None]).sum(1) - (lows[None, :] > cand[:, None]).sum(1)
    left = (highs[None, :] < cand[:, None]).sum(1) - (lows[None, :] >= cand[:, None]).sum(1)
    lo = cand[right >= 0].min()
    hi = cand[left <= 0].max()
    b = 0.5 * (lo + hi)
    loss = float(np.maximum(0.0, np.abs(r - b) - eps).sum())
    return float(b), loss


def svr_objective(w, b: float, X, y, C: float, eps: float) -> float:
    w = np.atleast_1d(np.asarray(w, dtype=float))
    X = np.asarray(X, dtype=float).reshape(-1, len(w))
    r = np.asarray(y, dtype=float) - X @ w - b
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, np.abs(r) - eps).sum())


def dual_bound(X: np.ndarray, y: np.ndarray, beta: np.ndarray, C: float, eps: float) -> float:
    """Lower bound on min J from ``beta`` after projecting it to the feasible set."""
    beta = np.clip(beta, -C, C)
    total = beta.sum()
    if total > 0:
        room = beta + C
        beta = beta - total * room / room.sum()
    elif total < 0:
        room = C - beta
        beta = beta - total * room / room.sum()
    v = X.T @ beta
    return -0.5 * float(v @ v) + float(y @ beta) - eps * float(np.abs(beta).sum())


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not neg.any():
        return 1.0
    return min(1.0, float((-v[neg] / dv[neg]).min()))


def svr_solve(X, y, C: float, eps: float, tol: float, max_iter: int):
    """Returns (w, b, objective, iterations, converged, trace)."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    n, d = X.shape
    p = d + 1
    A = np.hstack([X, np.ones((n, 1))])
    Pdiag = np.ones(p)
    Pdiag[-1] = 0.0

    def score(w):
        b, loss = best_offset(y - X @ w, eps)
        return 0.5 * float(w @ w) + C * loss, b

    best_w = np.zeros(d)
    best_J, best_b = score(best_w)
    trace = [best_J]
    if best_J == 0.0:
        return best_w, best_b, best_J, 0, True, trace

    # start: theta = 0, slacks large enough that every block is interior
    # and primal-feasible, multipliers at C/2 so the xi/eta rows are dual-feasible
    ys = max(float(np.abs(y).max()), eps, 1e-300)
    theta = np.zeros(p)
    xi = np.abs(y) + eps + ys
    eta = xi.copy()
    s = [eps - y + xi, eps + y + eta, xi.copy(), eta.copy()]
    z = [np.full(n, 0.5 * C) for _ in range(4)]
    m = 4 * n
    converged = False
    iterations = 0
    while iterations < max_iter:
        s1, s2, s3, s4 = s
        z1, z2, z3, z4 = z
        at = A @ theta
        rp = [-at - xi + s1 - (eps - y), at - eta + s2 - (eps + y), -xi + s3, -eta + s4]
        r_theta = Pdiag * theta - A.T @ (z1 - z2)
        r_xi = C - z1 - z3
        r_eta = C - z2 - z4
        mu = sum(float(a @ b) for a, b in zip(s, z)) / m
        D1, D2, D3, D4 = (zk / sk for zk, sk in zip(z, s))
        f1 = D1 / (D1 + D3)
        f2 = D2 / (D2 + D4)
        omega = D3 * f1 + D4 * f2
        H = np.diag(Pdiag) + (A * omega[:, None]).T @ A
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            break

        def newton(rc):
            q = [(-rck + zk * rpk) / sk for rck, zk, rpk, sk in zip(rc, z, rp, s)]
            R_theta = -r_theta - A.T @ (q[1] - q[0])
            R_xi = -r_xi + q[0] + q[2]
            R_eta = -r_eta + q[1] + q[3]
            rhs = R_theta - A.T @ (f1 * R_xi) + A.T @ (f2 * R_eta)
            dtheta = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
            adt = A @ dtheta
            dxi = (R_xi - D1 * adt) / (D1 + D3)
            deta = (R_eta + D2 * adt) / (D2 + D4)
            ds = [-rp[0] + adt + dxi, -rp[1] - adt + deta, -rp[2] + dxi, -rp[3] + deta]
            dz = [(-rck - zk * dsk) / sk for rck, zk, dsk, sk in zip(rc, z, ds, s)]
            return dtheta, dxi, deta, ds, dz

        def step_length(ds, dz):
            return min(min(_max_step(sk, dsk) for sk, dsk in zip(s, ds)),
                       min(_max_step(zk, dzk) for zk, dzk in zip(z, dz)))

        # predictor (affine scaling), then Mehrotra corrector
        _, _, _, ds, dz = newton([sk * zk for sk, zk in zip(s, z)])
        alpha = step_length(ds, dz)
        mu_aff = sum(float((sk + alpha * dsk) @ (zk + alpha * dzk))
                     for sk, dsk, zk, dzk in zip(s, ds, z, dz)) / m
        sigma = (mu_aff / mu) ** 3
        rc = [sk * zk + dsk * dzk - sigma * mu for sk, zk, dsk, dzk in zip(s, z, ds, dz)]
        dtheta, dxi, deta, ds, dz = newton(rc)
        alpha = min(1.0, STEP_FRACTION * step_length(ds, dz))
        theta = theta + alpha * dtheta
        xi = xi + alpha * dxi
        eta = eta + alpha * deta
        s = [sk + alpha * dsk for sk, dsk in zip(s, ds)]
        z = [zk + alpha * dzk for zk, dzk in zip(z, dz)]
        iterations += 1

        J, b = score(theta[:d])
        if J <= best_J:
            best_J, best_w, best_b = J, theta[:d].copy(), b
        trace.append(best_J)
        if best_J - dual_bound(X, y, z[0] - z[1], C, eps) <= tol * best_J:
            converged = True
            break
        if alpha < 1e-14:
            break
    if not math.isfinite(best_J):
        raise FloatingPointError("SVR objective became non-finite")
    return best_w, best_b, best_J, iterations, converged, trace
