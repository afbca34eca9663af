"""Independent reference implementations used as test oracles.

These deliberately avoid the library's coordinate-descent path: the
iterative reference is plain proximal gradient (iterated soft-thresholding
with a fixed step), the tiny-dimension reference is grid search with local
refinement, and a few spot checks go through cvxpy.  All share only the
objective definition:

    (1/N) * ||y - X b||^2 + lam * ||b||_1     (optionally ||b||_1 <= C)
"""

from __future__ import annotations

import numpy as np


def lasso_objective(design, target, lam, beta):
    n = design.shape[0]
    resid = target - design @ beta
    return float(resid @ resid) / n + lam * float(np.abs(beta).sum())


def _soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _project_ball(v, radius):
    a = np.abs(v)
    total = a.sum()
    if total <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    idx = np.nonzero(u * np.arange(1, len(u) + 1) > css - radius)[0][-1]
    theta = (css[idx] - radius) / (idx + 1.0)
    return _soft(v, theta)


def prox_gradient_reference(design, target, lam, budget=None, iters=300_000, tol=1e-13):
    """Iterated soft-thresholding with tiny fixed step; slow but simple."""
    design = np.asarray(design, float)
    target = np.asarray(target, float)
    n, p = design.shape
    gram = (2.0 / n) * design.T @ design
    lin = (2.0 / n) * design.T @ target
    lip = float(np.linalg.eigvalsh(gram)[-1]) + 1e-12
    step = 1.0 / lip
    beta = np.zeros(p)
    for _ in range(iters):
        new = _soft(beta - step * (gram @ beta - lin), step * lam)
        if budget is not None:
            new = _project_ball(new, budget)
        if np.abs(new - beta).max() < tol:
            return new
        beta = new
    return beta


def grid_reference(design, target, lam, span=5.0):
    """Brute-force minimizer for 1 or 2 coefficients: coarse grid, then zoom.

    Step schedule 0.1 -> 1e-5, each pass searching a window twice as wide as
    the previous step around the incumbent.
    """
    p = design.shape[1]
    assert p in (1, 2), "grid oracle only covers tiny dimensions"
    centers = np.zeros(p)
    width = span
    best = None
    for step in (0.1, 0.01, 1e-3, 1e-4, 1e-5):
        axes = [np.arange(c - width, c + width + step / 2, step) for c in centers]
        if p == 1:
            pts = axes[0][:, None]
        else:
            g0, g1 = np.meshgrid(axes[0], axes[1], indexing="ij")
            pts = np.column_stack([g0.ravel(), g1.ravel()])
        resid = target[:, None] - design @ pts.T
        vals = (resid**2).sum(axis=0) / design.shape[0] + lam * np.abs(pts).sum(axis=1)
        best = pts[np.argmin(vals)]
        centers = best
        width = 2 * step
    return best


def cvxpy_reference(design, target, lam, budget=None):
    import cvxpy as cp

    n, p = design.shape
    b = cp.Variable(p)
    objective = cp.sum_squares(target - design @ b) / n + lam * cp.norm1(b)
    constraints = [cp.norm1(b) <= budget] if budget is not None else []
    problem = cp.Problem(cp.Minimize(objective), constraints)
    problem.solve(solver=cp.CLARABEL)
    return np.asarray(b.value).ravel()
