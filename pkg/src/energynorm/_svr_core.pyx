# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled linear epsilon-SVR kernels.

Same algorithm and return values as :mod:`energynorm._svr_py` (see there for
the formulation); this version avoids NumPy call overhead on the small
per-fold problems that dominate evaluation sweeps.
"""

import numpy as np
from libc.math cimport fabs, sqrt, isfinite, INFINITY

cdef double STEP_FRACTION = 0.99


cdef double _offset(const double[::1] r, double eps, double* loss_out) noexcept nogil:
    cdef Py_ssize_t n = r.shape[0], k, m
    cdef double c, lo = INFINITY, hi = -INFINITY, b, loss = 0.0, d
    cdef long right, left
    # candidates are the 2n breakpoints r_m -/+ eps
    for k in range(2 * n):
        if k < n:
            c = r[k] - eps
        else:
            c = r[k - n] + eps
        right = 0
        left = 0
        for m in range(n):
            if r[m] + eps <= c:
                right += 1
            if r[m] - eps > c:
                right -= 1
            if r[m] + eps < c:
                left += 1
            if r[m] - eps >= c:
                left -= 1
        if right >= 0 and c < lo:
            lo = c
        if left <= 0 and c > hi:
            hi = c
    b = 0.5 * (lo + hi)
    for m in range(n):
        d = fabs(r[m] - b) - eps
        if d > 0:
            loss += d
    loss_out[0] = loss
    return b


def best_offset(r, double eps):
    cdef double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef double loss = 0.0
    cdef double b = _offset(rv, eps, &loss)
    return float(b), float(loss)


def svr_objective(w, double b, X, y, double C, double eps):
    wa = np.atleast_1d(np.asarray(w, dtype=np.float64))
    cdef double[::1] wv = np.ascontiguousarray(wa)
    cdef double[:, ::1] Xv = np.ascontiguousarray(np.asarray(X, dtype=np.float64).reshape(-1, wa.shape[0]))
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], d = Xv.shape[1], i, k
    cdef double reg = 0.0, loss = 0.0, r
    for k in range(d):
        reg += wv[k] * wv[k]
    for i in range(n):
        r = yv[i] - b
        for k in range(d):
            r -= Xv[i, k] * wv[k]
        r = fabs(r) - eps
        if r > 0:
            loss += r
    return 0.5 * reg + C * loss


cdef double _score(const double[:, ::1] X, const double[::1] y, const double[::1] w, double C,
                   double eps, double[::1] r, double* b_out) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, k
    cdef double reg = 0.0, loss = 0.0, acc
    for k in range(d):
        reg += w[k] * w[k]
    for i in range(n):
        acc = y[i]
        for k in range(d):
            acc -= X[i, k] * w[k]
        r[i] = acc
    b_out[0] = _offset(r, eps, &loss)
    return 0.5 * reg + C * loss


cdef double _dual_bound(const double[:, ::1] X, const double[::1] y, const double[::1] z1,
                        const double[::1] z2, double C, double eps, double[::1] beta,
                        double[::1] v) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, k
    cdef double total = 0.0, room = 0.0, out = 0.0, vv = 0.0
    for i in range(n):
        beta[i] = z1[i] - z2[i]
        if beta[i] > C:
            beta[i] = C
        elif beta[i] < -C:
            beta[i] = -C
        total += beta[i]
    if total > 0:
        for i in range(n):
            room += beta[i] + C
        for i in range(n):
            beta[i] -= total * (beta[i] + C) / room
    elif total < 0:
        for i in range(n):
            room += C - beta[i]
        for i in range(n):
            beta[i] -= total * (C - beta[i]) / room
    for k in range(d):
        v[k] = 0.0
    for i in range(n):
        for k in range(d):
            v[k] += X[i, k] * beta[i]
        out += y[i] * beta[i] - eps * fabs(beta[i])
    for k in range(d):
        vv += v[k] * v[k]
    return out - 0.5 * vv


cdef bint _cholesky_solve(double[:, ::1] H, double[::1] rhs, double[::1] out) noexcept nogil:
    """In-place Cholesky of H (lower), then solve H out = rhs. False if not PD."""
    cdef Py_ssize_t p = H.shape[0], i, j, k
    cdef double acc
    for j in range(p):
        acc = H[j, j]
        for k in range(j):
            acc -= H[j, k] * H[j, k]
        if not acc > 0.0:
            return False
        H[j, j] = sqrt(acc)
        for i in range(j + 1, p):
            acc = H[i, j]
            for k in range(j):
                acc -= H[i, k] * H[j, k]
            H[i, j] = acc / H[j, j]
    for i in range(p):
        acc = rhs[i]
        for k in range(i):
            acc -= H[i, k] * out[k]
        out[i] = acc / H[i, i]
    for i in range(p - 1, -1, -1):
        acc = out[i]
        for k in range(i + 1, p):
            acc -= H[k, i] * out[k]
        out[i] = acc / H[i, i]
    return True


cdef inline double _ratio_step(double v, double dv, double cur) noexcept nogil:
    if dv < 0:
        if -v / dv < cur:
            return -v / dv
    return cur


def svr_solve(X, y, double C, double eps, double tol, long max_iter):
    """Returns (w, b, objective, iterations, converged, trace)."""
    cdef double[:, ::1] Xv = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], d = Xv.shape[1], p = d + 1, i, j, k, blk
    cdef double m = 4.0 * n

    # state, stored as rows: s[4, n], z[4, n], directions alike
    cdef double[::1] theta = np.zeros(p)
    cdef double[::1] xi = np.empty(n)
    cdef double[::1] eta = np.empty(n)
    cdef double[:, ::1] s = np.empty((4, n))
    cdef double[:, ::1] z = np.empty((4, n))
    cdef double[:, ::1] rp = np.empty((4, n))
    cdef double[:, ::1] rc = np.empty((4, n))
    cdef double[:, ::1] ds = np.empty((4, n))
    cdef double[:, ::1] dz = np.empty((4, n))
    cdef double[:, ::1] dsa = np.empty((4, n))
    cdef double[:, ::1] dza = np.empty((4, n))
    cdef double[::1] dtheta = np.empty(p)
    cdef double[::1] dxi = np.empty(n)
    cdef double[::1] deta = np.empty(n)
    cdef double[::1] at = np.empty(n)
    cdef double[::1] adt = np.empty(n)
    cdef double[::1] r_theta = np.empty(p)
    cdef double[::1] r_xi = np.empty(n)
    cdef double[::1] r_eta = np.empty(n)
    cdef double[::1] Dk1 = np.empty(n)
    cdef double[::1] Dk2 = np.empty(n)
    cdef double[::1] Dk3 = np.empty(n)
    cdef double[::1] Dk4 = np.empty(n)
    cdef double[::1] f1 = np.empty(n)
    cdef double[::1] f2 = np.empty(n)
    cdef double[::1] omega = np.empty(n)
    cdef double[:, ::1] H = np.empty((p, p))
    cdef double[::1] rhs = np.empty(p)
    cdef double[::1] q = np.empty(4)
    cdef double[::1] R_xi = np.empty(n)
    cdef double[::1] R_eta = np.empty(n)
    cdef double[::1] work = np.empty(n)
    cdef double[::1] beta = np.empty(n)
    cdef double[::1] v = np.empty(d)
    cdef double[::1] wcur = np.empty(d)
    best_w_arr = np.zeros(d)
    cdef double[::1] best_w = best_w_arr

    cdef double best_J, best_b, J, b, ys, mu, mu_aff, sigma, alpha, acc, ai
    cdef long iterations = 0, corr
    cdef bint converged = False
    trace = []

    best_J = _score(Xv, yv, best_w, C, eps, work, &best_b)
    trace.append(best_J)
    if best_J == 0.0:
        return best_w_arr, best_b, best_J, 0, True, trace

    ys = eps
    for i in range(n):
        if fabs(yv[i]) > ys:
            ys = fabs(yv[i])
    if ys < 1e-300:
        ys = 1e-300
    for i in range(n):
        xi[i] = fabs(yv[i]) + eps + ys
        eta[i] = xi[i]
        s[0, i] = eps - yv[i] + xi[i]
        s[1, i] = eps + yv[i] + eta[i]
        s[2, i] = xi[i]
        s[3, i] = eta[i]
        for blk in range(4):
            z[blk, i] = 0.5 * C

    while iterations < max_iter:
        # residuals and scaling
        mu = 0.0
        for i in range(n):
            acc = theta[d]
            for k in range(d):
                acc += Xv[i, k] * theta[k]
            at[i] = acc
            rp[0, i] = -acc - xi[i] + s[0, i] - (eps - yv[i])
            rp[1, i] = acc - eta[i] + s[1, i] - (eps + yv[i])
            rp[2, i] = -xi[i] + s[2, i]
            rp[3, i] = -eta[i] + s[3, i]
            r_xi[i] = C - z[0, i] - z[2, i]
            r_eta[i] = C - z[1, i] - z[3, i]
            for blk in range(4):
                mu += s[blk, i] * z[blk, i]
            Dk1[i] = z[0, i] / s[0, i]
            Dk2[i] = z[1, i] / s[1, i]
            Dk3[i] = z[2, i] / s[2, i]
            Dk4[i] = z[3, i] / s[3, i]
            f1[i] = Dk1[i] / (Dk1[i] + Dk3[i])
            f2[i] = Dk2[i] / (Dk2[i] + Dk4[i])
            omega[i] = Dk3[i] * f1[i] + Dk4[i] * f2[i]
        mu /= m
        for k in range(p):
            r_theta[k] = theta[k] if k < d else 0.0
        for i in range(n):
            for k in range(d):
                r_theta[k] -= Xv[i, k] * (z[0, i] - z[1, i])
            r_theta[d] -= z[0, i] - z[1, i]

        # two Newton solves: predictor (corr=0) then corrector (corr=1)
        for corr in range(2):
            for blk in range(4):
                for i in range(n):
                    if corr == 0:
                        rc[blk, i] = s[blk, i] * z[blk, i]
                    else:
                        rc[blk, i] = s[blk, i] * z[blk, i] + dsa[blk, i] * dza[blk, i] - sigma * mu
            # H = P + A^T diag(omega) A; rhs from the eliminated slack rows
            for j in range(p):
                for k in range(p):
                    H[j, k] = 0.0
                H[j, j] = 1.0 if j < d else 0.0
                rhs[j] = -r_theta[j]
            for i in range(n):
                for blk in range(4):
                    q[blk] = (-rc[blk, i] + z[blk, i] * rp[blk, i]) / s[blk, i]
                R_xi[i] = -r_xi[i] + q[0] + q[2]
                R_eta[i] = -r_eta[i] + q[1] + q[3]
                acc = -(q[1] - q[0]) - f1[i] * R_xi[i] + f2[i] * R_eta[i]
                for j in range(p):
                    ai = Xv[i, j] if j < d else 1.0
                    rhs[j] += ai * acc
                    for k in range(j + 1):
                        H[j, k] += omega[i] * ai * (Xv[i, k] if k < d else 1.0)
            for j in range(p):
                for k in range(j + 1, p):
                    H[j, k] = H[k, j]
            if not _cholesky_solve(H, rhs, dtheta):
                break
            alpha = 1.0
            for i in range(n):
                acc = dtheta[d]
                for k in range(d):
                    acc += Xv[i, k] * dtheta[k]
                adt[i] = acc
                dxi[i] = (R_xi[i] - Dk1[i] * acc) / (Dk1[i] + Dk3[i])
                deta[i] = (R_eta[i] + Dk2[i] * acc) / (Dk2[i] + Dk4[i])
                ds[0, i] = -rp[0, i] + acc + dxi[i]
                ds[1, i] = -rp[1, i] - acc + deta[i]
                ds[2, i] = -rp[2, i] + dxi[i]
                ds[3, i] = -rp[3, i] + deta[i]
                for blk in range(4):
                    dz[blk, i] = (-rc[blk, i] - z[blk, i] * ds[blk, i]) / s[blk, i]
                    alpha = _ratio_step(s[blk, i], ds[blk, i], alpha)
                    alpha = _ratio_step(z[blk, i], dz[blk, i], alpha)
            if corr == 0:
                mu_aff = 0.0
                for blk in range(4):
                    for i in range(n):
                        mu_aff += (s[blk, i] + alpha * ds[blk, i]) * (z[blk, i] + alpha * dz[blk, i])
                        dsa[blk, i] = ds[blk, i]
                        dza[blk, i] = dz[blk, i]
                mu_aff /= m
                sigma = (mu_aff / mu) ** 3
        else:
            alpha = STEP_FRACTION * alpha
            if alpha > 1.0:
                alpha = 1.0
            for k in range(p):
                theta[k] += alpha * dtheta[k]
            for i in range(n):
                xi[i] += alpha * dxi[i]
                eta[i] += alpha * deta[i]
                for blk in range(4):
                    s[blk, i] += alpha * ds[blk, i]
                    z[blk, i] += alpha * dz[blk, i]
            iterations += 1
            for k in range(d):
                wcur[k] = theta[k]
            J = _score(Xv, yv, wcur, C, eps, work, &b)
            if J <= best_J:
                best_J = J
                best_b = b
                for k in range(d):
                    best_w[k] = wcur[k]
            trace.append(best_J)
            if best_J - _dual_bound(Xv, yv, z[0], z[1], C, eps, beta, v) <= tol * best_J:
                converged = True
                break
            if alpha < 1e-14:
                break
            continue
        break  # Cholesky failure
    if not isfinite(best_J):
        raise FloatingPointError("SVR objective became non-finite")
    return best_w_arr, best_b, best_J, iterations, bool(converged), trace
