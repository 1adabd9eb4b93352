"""Compiled RK4 loop for the multi-population vector field.

Mirrors ``dynamics.integrate`` step for step; used when the right-hand
side is a :class:`~feedback_commons.dynamics.MultiPopulationField`.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _field(y, out, resp, gco, alphas, thetas, alpha, theta, eps):
    B, K = y.shape
    M = K - 2
    for r in range(B):
        x = y[r, 0]
        n = y[r, K - 1]
        out[r, 0] = x * (1.0 - x) * (resp[0] * x * n + resp[1] * x + resp[2] * n + resp[3])
        restore = theta * x
        extract = alpha * (1.0 - x)
        for i in range(M):
            xi = y[r, 1 + i]
            out[r, 1 + i] = xi * (1.0 - xi) * (
                gco[i, 0] * xi * n + gco[i, 1] * xi + gco[i, 2] * n + gco[i, 3]
            )
            restore += thetas[i] * xi
            extract += alphas[i] * (1.0 - xi)
        out[r, K - 1] = eps * n * (1.0 - n) * (restore - extract)


@njit(cache=True)
def rk4_multi(y0, nsteps, h, steady_tol, record_every, lo, hi, resp, gco, alphas, thetas, alpha, theta, eps):
    """Returns ``(steps, times, states, count, converged, max_clamp, finite)``.

    ``steady_tol < 0`` disables the steady-state stop.
    """
    B, K = y0.shape
    cap = nsteps // record_every + 2
    times = np.empty(cap)
    states = np.empty((cap, B, K))
    y = y0.copy()
    k1 = np.empty_like(y)
    k2 = np.empty_like(y)
    k3 = np.empty_like(y)
    k4 = np.empty_like(y)
    tmp = np.empty_like(y)
    times[0] = 0.0
    states[0] = y
    count = 1
    converged = False
    finite = True
    max_clamp = 0.0
    step = 0
    while step < nsteps:
        _field(y, k1, resp, gco, alphas, thetas, alpha, theta, eps)
        if steady_tol >= 0.0:
            biggest = 0.0
            for r in range(B):
                for c in range(K):
                    v = abs(k1[r, c])
                    if v > biggest:
                        biggest = v
            if biggest < steady_tol:
                converged = True
                break
        for r in range(B):
            for c in range(K):
                tmp[r, c] = y[r, c] + 0.5 * h * k1[r, c]
        _field(tmp, k2, resp, gco, alphas, thetas, alpha, theta, eps)
        for r in range(B):
            for c in range(K):
                tmp[r, c] = y[r, c] + 0.5 * h * k2[r, c]
        _field(tmp, k3, resp, gco, alphas, thetas, alpha, theta, eps)
        for r in range(B):
            for c in range(K):
                tmp[r, c] = y[r, c] + h * k3[r, c]
        _field(tmp, k4, resp, gco, alphas, thetas, alpha, theta, eps)
        step += 1
        for r in range(B):
            for c in range(K):
                v = y[r, c] + (h / 6.0) * (k1[r, c] + 2.0 * k2[r, c] + 2.0 * k3[r, c] + k4[r, c])
                if not np.isfinite(v):
                    finite = False
                w = min(max(v, lo), hi)
                d = abs(w - v)
                if d > max_clamp:
                    max_clamp = d
                y[r, c] = w
        if not finite:
            break
        if step % record_every == 0 or step == nsteps:
            times[count] = step * h
            states[count] = y
            count += 1
    if times[count - 1] != step * h:
        times[count] = step * h
        states[count] = y
        count += 1
    return step, times, states, count, converged, max_clamp, finite
