"""Compiled coordinate-descent kernels.

Penalty kinds are integer coded: 0 lasso, 1 MCP, 2 SCAD.  All kernels work on
the already standardized design and update ``theta`` in place.
"""

import numpy as np
from numba import njit

LASSO, MCP, SCAD = 0, 1, 2


@njit(cache=True)
def penalty_scalar(kind, lam, gamma, t):
    a = abs(t)
    if kind == LASSO:
        return lam * a
    if kind == MCP:
        if a <= gamma * lam:
            return lam * a - a * a / (2.0 * gamma)
        return 0.5 * gamma * lam * lam
    if a <= lam:
        return lam * a
    if a <= gamma * lam:
        return (2.0 * gamma * lam * a - a * a - lam * lam) / (2.0 * (gamma - 1.0))
    return 0.5 * lam * lam * (gamma + 1.0)


@njit(cache=True)
def _prox_obj(kind, z, step, lam, gamma, t):
    d = t - z
    return d * d / (2.0 * step) + penalty_scalar(kind, lam, gamma, t)


@njit(cache=True)
def _pick(kind, z, step, lam, gamma, cands, m):
    best = cands[0]
    best_val = _prox_obj(kind, z, step, lam, gamma, best)
    for i in range(1, m):
        v = _prox_obj(kind, z, step, lam, gamma, cands[i])
        if v < best_val:
            best_val = v
            best = cands[i]
    return best


@njit(cache=True)
def prox_scalar(kind, z, step, lam, gamma):
    """argmin_t (t - z)^2 / (2 step) + penalty(t)."""
    a = abs(z)
    sgn = 1.0 if z >= 0 else -1.0
    if lam <= 0.0:
        return z
    if kind == LASSO:
        return sgn * max(a - step * lam, 0.0)
    cands = np.empty(6)
    if kind == MCP:
        if step < gamma:
            if a <= step * lam:
                return 0.0
            if a <= gamma * lam:
                return sgn * (a - step * lam) / (1.0 - step / gamma)
            return z
        # concave inside [0, gamma*lam]: minimiser is an endpoint or z itself
        cands[0] = 0.0
        cands[1] = sgn * gamma * lam
        m = 2
        if a > gamma * lam:
            cands[2] = z
            m = 3
        return _pick(kind, z, step, lam, gamma, cands, m)
    # SCAD: best candidate of the three pieces
    cands[0] = 0.0
    cands[1] = sgn * min(max(a - step * lam, 0.0), lam)
    cands[2] = sgn * lam
    cands[3] = sgn * gamma * lam
    m = 4
    denom = (gamma - 1.0) - step
    if denom > 0.0:
        t = ((gamma - 1.0) * a - step * gamma * lam) / denom
        t = min(max(t, lam), gamma * lam)
        cands[m] = sgn * t
        m += 1
    if a > gamma * lam:
        cands[m] = z
        m += 1
    return _pick(kind, z, step, lam, gamma, cands, m)


@njit(cache=True)
def _objective_gaussian(r, theta, pen, kind, lam, gamma):
    n = r.shape[0]
    val = 0.0
    for i in range(n):
        val += r[i] * r[i]
    val = val / (2.0 * n)
    for j in range(theta.shape[0]):
        if pen[j]:
            val += penalty_scalar(kind, lam, gamma, theta[j])
    return val


@njit(cache=True)
def _objective_logistic(y, eta, theta, pen, kind, lam, gamma):
    n = y.shape[0]
    val = 0.0
    for i in range(n):
        e = eta[i]
        # log(1 + exp(e)) without overflow
        if e > 0:
            b = e + np.log1p(np.exp(-e))
        else:
            b = np.log1p(np.exp(e))
        val += -y[i] * e + b
    val = val / n
    for j in range(theta.shape[0]):
        if pen[j]:
            val += penalty_scalar(kind, lam, gamma, theta[j])
    return val


@njit(cache=True)
def _sweep_gaussian(X, r, theta, pen, curv, kind, lam, gamma, active_only):
    n, d = X.shape
    max_change = 0.0
    for j in range(d):
        if curv[j] <= 0.0:
            continue
        if active_only and theta[j] == 0.0:
            continue
        g = 0.0
        for i in range(n):
            g += X[i, j] * r[i]
        z = theta[j] + g / (n * curv[j])
        if pen[j]:
            new = prox_scalar(kind, z, 1.0 / curv[j], lam, gamma)
        else:
            new = z
        delta = new - theta[j]
        if delta != 0.0:
            for i in range(n):
                r[i] -= delta * X[i, j]
            theta[j] = new
            ad = abs(delta) * np.sqrt(curv[j])
            if ad > max_change:
                max_change = ad
    return max_change


@njit(cache=True)
def cd_gaussian(X, y, theta, pen, curv, kind, lam, gamma, tol, max_iter, trace):
    """Cyclic coordinate descent for least squares with a separable penalty.

    Returns (iterations, converged, residual).  ``trace`` receives the
    objective after every sweep (length ``max_iter``).
    """
    n = X.shape[0]
    r = y.copy()
    for j in range(X.shape[1]):
        if theta[j] != 0.0:
            for i in range(n):
                r[i] -= theta[j] * X[i, j]
    it = 0
    converged = False
    while it < max_iter:
        change = _sweep_gaussian(X, r, theta, pen, curv, kind, lam, gamma, False)
        trace[it] = _objective_gaussian(r, theta, pen, kind, lam, gamma)
        it += 1
        if change < tol:
            converged = True
            break
        # iterate on the active set until it settles, then re-check everything
        while it < max_iter:
            change = _sweep_gaussian(X, r, theta, pen, curv, kind, lam, gamma, True)
            trace[it] = _objective_gaussian(r, theta, pen, kind, lam, gamma)
            it += 1
            if change < tol:
                break
    return it, converged, r


@njit(cache=True)
def cd_logistic(X, y, theta, pen, curv, kind, lam, gamma, tol, max_iter, trace):
    """Coordinate-wise majorisation for the logistic loss (b'' <= 1/4)."""
    n, d = X.shape
    eta = np.zeros(n)
    for j in range(d):
        if theta[j] != 0.0:
            for i in range(n):
                eta[i] += theta[j] * X[i, j]
    it = 0
    converged = False
    while it < max_iter:
        max_change = 0.0
        for j in range(d):
            c = curv[j] / 4.0
            if c <= 0.0:
                continue
            g = 0.0
            for i in range(n):
                mu = 1.0 / (1.0 + np.exp(-eta[i]))
                g += X[i, j] * (mu - y[i])
            g /= n
            z = theta[j] - g / c
            if pen[j]:
                new = prox_scalar(kind, z, 1.0 / c, lam, gamma)
            else:
                new = z
            delta = new - theta[j]
            if delta != 0.0:
                for i in range(n):
                    eta[i] += delta * X[i, j]
                theta[j] = new
                ad = abs(delta) * np.sqrt(curv[j])
                if ad > max_change:
                    max_change = ad
        trace[it] = _objective_logistic(y, eta, theta, pen, kind, lam, gamma)
        it += 1
        if max_change < tol:
            converged = True
            break
    return it, converged, eta


@njit(cache=True)
def _group_sweep(X, r, theta, starts, lengths, lips, weights, free, curv,
                 kind, lam, gamma, zbuf, active_only):
    n, d = X.shape
    max_change = 0.0
    for j in range(d):
        if not free[j] or curv[j] <= 0.0:
            continue
        g = 0.0
        for i in range(n):
            g += X[i, j] * r[i]
        delta = g / (n * curv[j])
        if delta != 0.0:
            for i in range(n):
                r[i] -= delta * X[i, j]
            theta[j] += delta
            ad = abs(delta) * np.sqrt(curv[j])
            if ad > max_change:
                max_change = ad
    for gi in range(starts.shape[0]):
        s = starts[gi]
        m = lengths[gi]
        L = lips[gi]
        if L <= 0.0:
            continue
        if active_only:
            nz = False
            for k in range(m):
                if theta[s + k] != 0.0:
                    nz = True
                    break
            if not nz:
                continue
        norm = 0.0
        for k in range(m):
            j = s + k
            g = 0.0
            for i in range(n):
                g += X[i, j] * r[i]
            zk = theta[j] + g / (n * L)
            zbuf[k] = zk
            norm += zk * zk
        norm = np.sqrt(norm)
        if norm > 0.0:
            shrink = prox_scalar(kind, norm, 1.0 / L, lam * weights[gi], gamma) / norm
        else:
            shrink = 0.0
        for k in range(m):
            j = s + k
            new = zbuf[k] * shrink
            delta = new - theta[j]
            if delta != 0.0:
                for i in range(n):
                    r[i] -= delta * X[i, j]
                theta[j] = new
                ad = abs(delta) * np.sqrt(L)
                if ad > max_change:
                    max_change = ad
    return max_change


@njit(cache=True)
def _group_objective(r, theta, starts, lengths, weights, kind, lam, gamma):
    n = r.shape[0]
    val = 0.0
    for i in range(n):
        val += r[i] * r[i]
    val /= 2.0 * n
    for gi in range(starts.shape[0]):
        nn = 0.0
        for k in range(lengths[gi]):
            nn += theta[starts[gi] + k] ** 2
        val += penalty_scalar(kind, lam * weights[gi], gamma, np.sqrt(nn))
    return val


@njit(cache=True)
def gcd_gaussian(X, y, theta, starts, lengths, lips, weights, free, curv,
                 kind, lam, gamma, tol, max_iter, trace):
    """Block coordinate descent for a group penalty on least squares.

    Group ``g`` covers columns ``starts[g]:starts[g]+lengths[g]`` and is
    updated by a majorisation step with Lipschitz constant ``lips[g]`` and the
    scalar penalty applied to the group norm with level ``lam * weights[g]``.
    Columns flagged in ``free`` are unpenalized single coordinates.
    """
    n, d = X.shape
    r = y.copy()
    for j in range(d):
        if theta[j] != 0.0:
            for i in range(n):
                r[i] -= theta[j] * X[i, j]
    zbuf = np.empty(d)
    it = 0
    converged = False
    while it < max_iter:
        change = _group_sweep(X, r, theta, starts, lengths, lips, weights, free, curv,
                              kind, lam, gamma, zbuf, False)
        trace[it] = _group_objective(r, theta, starts, lengths, weights, kind, lam, gamma)
        it += 1
        if change < tol:
            converged = True
            break
        while it < max_iter:
            change = _group_sweep(X, r, theta, starts, lengths, lips, weights, free, curv,
                                  kind, lam, gamma, zbuf, True)
            trace[it] = _group_objective(r, theta, starts, lengths, weights, kind, lam, gamma)
            it += 1
            if change < tol:
                break
    return it, converged, r
