"""Property suites shared by the test-suite and ``vdm verify``.

Every check returns a :class:`Check`; a suite is a list of them.
"""

import math
import time
from typing import Callable, Dict, List, NamedTuple

import mpmath
import numpy as np

from . import divergences as dv
from .autodiff import Mlp, backward, forward
from .densities import MixtureDensity, best_fit, exact_divergence
from .saddle import certify


class Check(NamedTuple):
    suite: str
    name: str
    passed: bool
    detail: str


def _check(suite, name, ok, detail):
    return Check(suite, name, bool(ok), detail)


# --- conjugate pairs --------------------------------------------------------------

U_GRID = np.logspace(-2, 2, 20)
V_GRID = np.linspace(-20.0, 20.0, 1000)


def verification_specs():
    """Every family at its default shape, plus the alpha < 1 branch."""
    return dv.all_specs() + [dv.make_spec("alpha", alpha=0.5)]


def golden_max(fn, lo, hi, tol=1e-10, max_iter=400):
    """Maximum of a unimodal function on [lo, hi] by golden-section search."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    best = max((fn(a), fn(b), fc, fd))
    return best


def biconjugate(spec, u, v_lo=-20.0, v_hi=20.0):
    """f**(u) = sup_t {t u - f*(t)}, searched over t = g(v) so t stays in dom f*."""

    def objective(v):
        t = dv.eval_activation(spec, v)
        return t * u - dv.eval_conjugate(spec, t)

    return golden_max(objective, v_lo, v_hi)


def interior_t_grid(spec, n=20):
    return dv.eval_activation(spec, np.linspace(-4.0, 4.0, n))


def numeric_derivative(fn, u, rel_h=1e-5):
    h = rel_h * u
    return (fn(u + h) - fn(u - h)) / (2.0 * h)


def _mp_activation(spec, v):
    v = mpmath.mpf(v)
    name = spec.name
    if name == "total-variation":
        return mpmath.tanh(v) / 2
    if name in ("kl", "pearson-chi2", "jeffrey"):
        return v
    if name == "reverse-kl":
        return -mpmath.exp(-v)
    if name in ("neyman-chi2", "squared-hellinger"):
        return 1 - mpmath.exp(-v)
    if name == "jensen-shannon":
        return mpmath.log(2) - mpmath.log(1 + mpmath.exp(-v))
    if name == "jensen-shannon-weighted":
        pi = mpmath.mpf(spec.shape_params["pi"])
        return -pi * mpmath.log(pi) - mpmath.log(1 + mpmath.exp(-v))
    if name == "gan":
        return -mpmath.log(1 + mpmath.exp(-v))
    a = mpmath.mpf(spec.shape_params["alpha"])
    if a < 1:
        return 1 / (1 - a) - mpmath.log(1 + mpmath.exp(-v))
    return v


def _mp_conjugate(spec, t):
    name = spec.name
    if name == "total-variation":
        return t
    if name == "kl":
        return mpmath.exp(t - 1)
    if name == "reverse-kl":
        return -1 - mpmath.log(-t)
    if name == "pearson-chi2":
        return t * t / 4 + t
    if name == "neyman-chi2":
        return 2 - 2 * mpmath.sqrt(1 - t)
    if name == "squared-hellinger":
        return t / (1 - t)
    if name == "jeffrey":
        w = mpmath.lambertw(mpmath.exp(1 - t)).real
        return w + 1 / w + t - 2
    if name == "jensen-shannon":
        return -mpmath.log(2 - mpmath.exp(t))
    if name == "jensen-shannon-weighted":
        pi = mpmath.mpf(spec.shape_params["pi"])
        return (1 - pi) * mpmath.log((1 - pi) / (1 - pi * mpmath.exp(t / pi)))
    if name == "gan":
        return -mpmath.log(1 - mpmath.exp(t))
    a = mpmath.mpf(spec.shape_params["alpha"])
    base = max(t * (a - 1) + 1, mpmath.mpf(0))
    return base ** (a / (a - 1)) / a - 1 / a


def reference_second_term(spec, v, dps=60):
    """f*(g(v)) by composing the two table formulas in high precision."""
    with mpmath.workdps(dps):
        return float(_mp_conjugate(spec, _mp_activation(spec, v)))


def conjugate_checks(specs=None):
    suite = "conjugates"
    out = []
    for spec in specs or verification_specs():
        label = spec.label
        f = lambda u, s=spec: dv.eval_generator(s, u)

        f1 = f(1.0)
        target = -dv.LOG4 if spec.name == "gan" else 0.0
        out.append(_check(suite, f"{label}: f(1)", abs(f1 - target) < 1e-12, f"f(1)={f1:.3e}"))

        ts = interior_t_grid(spec)
        fu = f(U_GRID)
        fs = dv.eval_conjugate(spec, ts)
        gap = np.outer(ts, U_GRID) - (fu[None, :] + fs[:, None])
        out.append(_check(suite, f"{label}: Fenchel-Young", gap.max() <= 1e-9,
                          f"max(tu - f(u) - f*(t)) = {gap.max():.3e}"))

        us = np.linspace(0.1, 10.0, 25)
        err = max(abs(biconjugate(spec, u) - f(u)) for u in us)
        out.append(_check(suite, f"{label}: biconjugation", err <= 1e-5, f"max |f** - f| = {err:.3e}"))

        worst = 0.0
        for u in U_GRID:
            t = numeric_derivative(f, u)
            if spec.conjugate_domain.contains(t):
                worst = max(worst, abs(t * u - dv.eval_conjugate(spec, t) - f(u)))
        out.append(_check(suite, f"{label}: Young equality at f'(u)", worst <= 1e-6,
                          f"max gap = {worst:.3e}"))

        g = dv.eval_activation(spec, V_GRID)
        dg = spec.activation_grad(V_GRID)
        inc = np.diff(g)
        # near saturation the true increment can drop below one ulp of g
        resolvable = dg[1:] * np.diff(V_GRID) > 4.0 * np.spacing(np.abs(g[1:]))
        mono = np.all(inc >= 0) and np.all(inc[resolvable] > 0) and np.all(dg > 0)
        out.append(_check(suite, f"{label}: activation increasing", mono,
                          f"min step {inc.min():.3e}, min g' {dg.min():.3e}"))
        inside = np.all(spec.conjugate_domain.contains(g))
        out.append(_check(suite, f"{label}: activation range in dom f*", inside,
                          f"range [{g.min():.6g}, {g.max():.6g}] vs {spec.conjugate_domain}"))

        vs = np.linspace(-30.0, 30.0, 121)
        fused = dv.eval_fused_second_term(spec, vs)
        ref = np.array([reference_second_term(spec, v) for v in vs])
        rel = np.max(np.abs(fused - ref) / np.maximum(1.0, np.abs(ref)))
        safe = np.abs(vs) <= 10.0
        comp = dv.eval_conjugate(spec, dv.eval_activation(spec, vs[safe]))
        rel_f = np.max(np.abs(fused[safe] - comp) / np.maximum(1.0, np.abs(comp)))
        out.append(_check(suite, f"{label}: fused form", rel <= 1e-8 and rel_f <= 1e-8,
                          f"vs high-precision composition {rel:.2e}, vs float composition "
                          f"(|v|<=10) {rel_f:.2e}"))

        u3 = np.logspace(-3, 3, 400)
        fv = f(u3)
        lam = (u3[2:] - u3[1:-1]) / (u3[2:] - u3[:-2])
        chord_gap = fv[1:-1] - (lam * fv[:-2] + (1.0 - lam) * fv[2:])
        chord_gap /= np.maximum(1.0, np.abs(fv[1:-1]))
        out.append(_check(suite, f"{label}: convexity", chord_gap.max() <= 1e-12,
                          f"max f(u1) minus chord {chord_gap.max():.3e}"))

        wc = dv.eval_witness(spec, 1.0)
        out.append(_check(suite, f"{label}: witness(1) = f'(1)", abs(wc - spec.critical_value) < 1e-12,
                          f"T*(1)={wc:.6g}, f'(1)={spec.critical_value:.6g}"))

    gan, js = dv.make_spec("gan"), dv.make_spec("jensen-shannon")
    u = np.logspace(-3, 3, 200)
    diff = np.max(np.abs(dv.eval_generator(gan, u) - (dv.eval_generator(js, u) - (u + 1.0) * dv.LOG2)))
    out.append(_check(suite, "GAN-JS generator identity", diff <= 1e-12,
                      f"max |f_gan - (f_js - (u+1) log 2)| = {diff:.2e}"))
    return out


# --- reverse-mode gradients -------------------------------------------------------


def finite_difference_grad(net, x, upstream, h=1e-5):
    base = net.get_flat()
    grad = np.empty_like(base)
    for i in range(base.size):
        plus, minus = base.copy(), base.copy()
        plus[i] += h
        minus[i] -= h
        net.set_flat(plus)
        fp = float(np.dot(upstream, net(x)))
        net.set_flat(minus)
        fm = float(np.dot(upstream, net(x)))
        grad[i] = (fp - fm) / (2.0 * h)
    net.set_flat(base)
    return grad


def gradient_checks(n_nets=20, seed=0):
    suite = "gradients"
    rng = np.random.default_rng(seed)
    out = []
    acts = ("tanh", "elu", "relu")
    batches = (1, 7, 64)
    for k in range(n_nets):
        act = acts[k % 3]
        batch = batches[(k // 3) % 3]
        dims = [1, int(rng.integers(2, 9)), int(rng.integers(2, 9)), 1]
        net = Mlp.init(dims, seed=int(rng.integers(2 ** 31)), activation=act)
        # move biases off zero so relu/elu kinks are not all at the origin
        net.set_flat(net.get_flat() + 0.3 * rng.standard_normal(net.n_params))
        x = rng.normal(0.0, 2.0, size=batch)
        up = rng.standard_normal(batch)
        _, tape = forward(net, x)
        rev = backward(tape, up, net)
        fd = finite_difference_grad(net, x, up)
        err = np.abs(rev - fd) - 1e-5 * np.abs(fd)
        ok = np.all(err <= 1e-7)
        worst = float(np.max(np.abs(rev - fd) / np.maximum(np.abs(fd), 1e-2)))
        out.append(_check(suite, f"net {k} ({act}, dims {dims}, batch {batch})", ok,
                          f"max scaled error {worst:.2e}"))
    return out


# --- divergence oracle -------------------------------------------------------------


def random_mixture(rng, k=None):
    k = int(rng.integers(1, 4)) if k is None else k
    w = rng.dirichlet(np.ones(k))
    w[-1] = 1.0 - w[:-1].sum()
    return MixtureDensity(w, rng.uniform(-3, 3, size=k), rng.uniform(0.3, 3.0, size=k) ** 2)


def bound_checks(seed=0, n_pairs=10, n_moment=5):
    suite = "bounds"
    rng = np.random.default_rng(seed)
    out = []
    pairs = [(random_mixture(rng), random_mixture(rng)) for _ in range(n_pairs)]
    for spec in dv.all_specs():
        if spec.name == "gan":
            continue
        lo = min(exact_divergence(spec, p, q) for p, q in pairs)
        out.append(_check(suite, f"{spec.label}: non-negative", lo >= -1e-8, f"min D = {lo:.3e}"))
    for name in ("jeffrey", "total-variation", "squared-hellinger"):
        spec = dv.make_spec(name)
        err = max(abs(exact_divergence(spec, p, q) - exact_divergence(spec, q, p)) for p, q in pairs)
        out.append(_check(suite, f"{name}: symmetric", err <= 1e-7, f"max |D(P|Q) - D(Q|P)| = {err:.2e}"))
    kl = dv.make_spec("kl")
    worst = 0.0
    for _ in range(n_moment):
        p = random_mixture(rng, k=2)
        fit = best_fit(kl, p, xatol=1e-6)
        worst = max(worst, abs(fit.mu - p.mean), abs(fit.sigma - p.std))
    out.append(_check(suite, "kl best fit matches moments", worst <= 1e-3, f"max deviation {worst:.2e}"))
    return out


# --- saddle certificates ------------------------------------------------------------


def saddle_checks(n_instances=20, seed=0):
    suite = "saddle"
    out = []
    for row in certify(n_instances=n_instances, seed=seed):
        ok = (row["rate_passed"] and row["worst_ratio"] <= row["rate_bound"] + 1e-9
              and row["max_decrease_gap"] <= 1e-9)
        out.append(_check(
            suite, f"instance {row['instance']} ({row['n_theta']}+{row['n_omega']} dims)", ok,
            f"worst ratio {row['worst_ratio']:.4f} <= bound {row['rate_bound']:.4f}; "
            f"max decrease gap {row['max_decrease_gap']:.2e}"))
    return out


SUITES: Dict[str, Callable[[], List[Check]]] = {
    "conjugates": conjugate_checks,
    "gradients": gradient_checks,
    "bounds": bound_checks,
    "saddle": saddle_checks,
}


def run_suites(names):
    """Run named suites; returns {suite: (checks, seconds)}."""
    results = {}
    for name in names:
        start = time.perf_counter()
        checks = SUITES[name]()
        results[name] = (checks, time.perf_counter() - start)
    return results
