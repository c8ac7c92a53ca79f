"""Shared independent oracles used across the test modules.

Everything here deliberately avoids the library's own code paths: simplex
projection is the sort-based Euclidean algorithm, prox solutions come from
projected gradient descent, and derivatives come from central differences.
"""

from __future__ import annotations

import numpy as np


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort algorithm)."""
    v = np.asarray(v, dtype=float)
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, n + 1)
    cond = u - (css - 1.0) / ks > 0
    rho = ks[cond][-1]
    theta = (css[cond][-1] - 1.0) / rho
    return np.maximum(v - theta, 0.0)


def project_box(v: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(v, lower), upper)


def prox_box_oracle(xhat, linear, tau, lower, upper, tol=1e-10, max_iters=200000):
    """Projected gradient on <linear,x> + ||x-xhat||^2/(2 tau) over the box."""
    xhat = np.asarray(xhat, float)
    linear = np.asarray(linear, float)
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    x = project_box(xhat, lower, upper)
    step = tau / 2.0
    for _ in range(max_iters):
        grad = linear + (x - xhat) / tau
        x_new = project_box(x - step * grad, lower, upper)
        if np.max(np.abs(x_new - x)) <= tol * step:
            return x_new
        x = x_new
    return x


def prox_simplex_oracle(yhat, ascent, sigma, tol=1e-10, max_iters=100000):
    """Projected gradient on the entropy prox objective over the simplex.

    Minimizes -<ascent,y> + D_ent(y, yhat)/sigma, stopping at a unit-step
    projected-gradient residual below tol.  Barzilai-Borwein step lengths
    with an Armijo backtracking safeguard keep the iteration count sane on
    ill-conditioned instances; the optimum is interior, so monotone descent
    keeps the iterates off the boundary.
    """
    yhat = np.asarray(yhat, float)
    ascent = np.asarray(ascent, float)
    tiny = 1e-300

    def objective(y):
        safe = np.maximum(y, tiny)
        entropy = np.sum(np.where(y > 0.0, y * (np.log(safe) - np.log(yhat)), 0.0))
        return float(-ascent @ y + (entropy - y.sum() + yhat.sum()) / sigma)

    def gradient(y):
        return -ascent + (np.log(np.maximum(y, tiny)) - np.log(yhat)) / sigma

    y = np.full_like(yhat, 1.0 / yhat.size)
    value = objective(y)
    grad = gradient(y)
    step = sigma
    prev_y = None
    prev_grad = None
    recent = [value]
    for _ in range(max_iters):
        if np.max(np.abs(y - project_simplex(y - grad))) <= tol:
            return y
        if prev_y is not None:
            dy = y - prev_y
            dg = grad - prev_grad
            curv = float(dy @ dg)
            if curv > 0.0:
                step = float(dy @ dy) / curv
        step = min(max(step, 1e-14), 1e14)
        # nonmonotone Armijo with an absolute slack: near the float plateau
        # the objective cannot certify descent, so tiny steps are accepted
        reference = max(recent) + 1e-15 * (1.0 + abs(value))
        stalled = False
        while True:
            trial = project_simplex(y - step * grad)
            trial_value = objective(trial)
            if trial_value <= reference - 1e-4 * float(grad @ (y - trial)):
                break
            if step < 1e-16:
                stalled = True
                break
            step *= 0.5
        if stalled:
            return y
        prev_y, prev_grad = y, grad
        y, value = trial, trial_value
        recent.append(value)
        if len(recent) > 8:
            recent.pop(0)
        grad = gradient(y)
    return y


def central_difference(f, x, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for idx in range(x.size):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g
