"""Fixed and adaptive quadrature on finite intervals.

The integrand is always called with a 1-D array of abscissae, so each
refinement sweep of :func:`adaptive_simpson` costs one vectorized call no
matter how many panels are still open.
"""

import numpy as np


class QuadratureError(RuntimeError):
    pass


def _simpson(fa, fm, fb, width):
    return width / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f, a, b, abs_tol=1e-9, rel_tol=1e-10, initial_panels=64,
                     max_depth=50, max_evals=4_000_000):
    """Integrate ``f`` over [a, b] by breadth-first adaptive Simpson.

    Each panel is split until the two-half Simpson estimate agrees with the
    whole-panel estimate within 15 times its share of the tolerance; the
    accepted value carries the Richardson correction.  Panels inherit half
    their parent's tolerance, so the accepted error budget sums to at most
    ``max(abs_tol, rel_tol * |I|)``.
    """
    if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
        raise ValueError(f"need a finite interval with a < b, got [{a}, {b}]")
    edges = np.linspace(a, b, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    pts = np.concatenate([edges, mid])
    vals = np.asarray(f(pts), dtype=float)
    evals = pts.size
    fe, fm = vals[: edges.size], vals[edges.size:]
    fa, fb = fe[:-1], fe[1:]
    whole = _simpson(fa, fm, fb, hi - lo)
    rough = abs(whole.sum())
    budget = max(abs_tol, rel_tol * rough)
    tol = np.full(lo.shape, budget / initial_panels)

    total = 0.0
    for _ in range(max_depth):
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        new = np.asarray(f(np.concatenate([lm, rm])), dtype=float)
        evals += new.size
        flm, frm = new[: lm.size], new[lm.size:]
        left = _simpson(fa, flm, fm, mid - lo)
        right = _simpson(fm, frm, fb, hi - mid)
        delta = left + right - whole
        if not np.all(np.isfinite(delta)):
            raise QuadratureError("integrand produced non-finite values")
        ok = np.abs(delta) <= 15.0 * tol
        total += float(np.sum(left[ok] + right[ok] + delta[ok] / 15.0))
        keep = ~ok
        if not np.any(keep):
            return total
        if evals > max_evals:
            break
        # children: [lo, mid] and [mid, hi] of every unresolved panel
        lo, mid, hi = (
            np.concatenate([lo[keep], mid[keep]]),
            np.concatenate([lm[keep], rm[keep]]),
            np.concatenate([mid[keep], hi[keep]]),
        )
        fa, fm, fb = (
            np.concatenate([fa[keep], fm[keep]]),
            np.concatenate([flm[keep], frm[keep]]),
            np.concatenate([fm[keep], fb[keep]]),
        )
        whole = np.concatenate([left[keep], right[keep]])
        tol = np.concatenate([tol[keep], tol[keep]]) * 0.5
    raise QuadratureError(
        f"adaptive Simpson did not converge ({evals} evaluations, {lo.size} open panels)"
    )


_GL_CACHE = {}


def gauss_legendre(f, a, b, panels=256, order=16):
    """Composite Gauss-Legendre rule with ``panels`` equal panels."""
    x, w = gauss_legendre_nodes(a, b, panels, order)
    return float(np.dot(w, np.asarray(f(x), dtype=float)))


def gauss_legendre_nodes(a, b, panels=256, order=16):
    """Abscissae and weights of :func:`gauss_legendre`, for reuse across integrands."""
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    nodes, weights = _GL_CACHE[order]
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    centre = 0.5 * (edges[:-1] + edges[1:])
    x = (centre[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return x, w
