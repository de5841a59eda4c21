"""Principal branch of the Lambert W function.

Two entry points: :func:`lambert_w` solves ``w * exp(w) = x`` directly, and
:func:`lambert_w_exp` solves ``w + log(w) = y``, i.e. returns ``W(exp(y))``
without ever forming ``exp(y)``.  The second form is what the Jeffrey
conjugate needs, where the argument is ``exp(1 - t)`` and overflows for
moderately negative ``t``.
"""

import numpy as np

INV_E = float(np.exp(-1.0))
MAX_ITER = 50


class LambertWError(ArithmeticError):
    pass


def _initial_guess(x):
    w = np.log1p(np.maximum(x, 0.0))
    neg = x < 0
    if np.any(neg):
        # branch-point series in p = sqrt(2 (e x + 1))
        p = np.sqrt(np.maximum(2.0 * (np.e * x[neg] + 1.0), 0.0))
        w[neg] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    return w


def lambert_w(x):
    """Principal-branch W(x) for x >= -1/e by Halley iteration.

    Accepts a scalar or an array; returns the same shape.  Raises
    ``ValueError`` below the branch point and :class:`LambertWError` if the
    iteration fails to converge within 50 steps.
    """
    scalar = np.isscalar(x)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    # tolerate round-off right at the branch point
    if np.any(x < -INV_E * (1.0 + 1e-15)) or np.any(np.isnan(x)):
        raise ValueError("lambert_w is real only for x >= -1/e")
    x = np.maximum(x, -INV_E)
    w = _initial_guess(x)
    tol = 1e-12 * np.maximum(1.0, np.abs(x))
    for _ in range(MAX_ITER):
        ew = np.exp(w)
        resid = w * ew - x
        wp1 = w + 1.0
        # w = -1 only at the branch point, where the residual already vanishes
        safe = np.where(wp1 == 0.0, 1e-300, wp1)
        step = resid / (ew * safe - (w + 2.0) * resid / (2.0 * safe))
        step = np.where(resid == 0.0, 0.0, step)
        w = w - step
        if np.all(np.abs(step) <= 1e-15 * np.abs(w)):
            break
    if not np.all(np.abs(w * np.exp(w) - x) <= tol):
        raise LambertWError("Halley iteration did not converge in 50 steps")
    return float(w[0]) if scalar else w


def lambert_w_exp(y):
    """Return W(exp(y)), i.e. the positive root of ``w + log(w) = y``."""
    scalar = np.isscalar(y)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    big = y > 1.0
    w = np.where(big, y - np.log(np.where(big, y, 2.0)), np.exp(np.minimum(y, 1.0)))
    # W(x) = x to working precision once exp(y) is this small
    live = w > 1e-250
    for _ in range(MAX_ITER):
        wl = np.where(live, w, 1.0)
        g = wl + np.log(wl) - y
        dg = 1.0 + 1.0 / wl
        d2g = -1.0 / (wl * wl)
        w_new = wl - g / (dg - 0.5 * g * d2g / dg)
        # Halley can overshoot below zero for tiny w; fall back to halving
        w_new = np.where(w_new > 0, w_new, 0.5 * wl)
        converged = np.abs(w_new - wl) <= 2e-15 * w_new
        w = np.where(live, w_new, w)
        if np.all(converged | ~live):
            break
    else:
        raise LambertWError("lambert_w_exp did not converge in 50 steps")
    return float(w[0]) if scalar else w
