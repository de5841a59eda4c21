"""One-dimensional Gaussian mixtures and the exact f-divergence oracle."""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .quadrature import adaptive_simpson, gauss_legendre

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MixtureDensity:
    weights: Tuple[float, ...]
    means: Tuple[float, ...]
    variances: Tuple[float, ...]

    def __post_init__(self):
        for name in ("weights", "means", "variances"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        k = len(self.weights)
        if k == 0 or len(self.means) != k or len(self.variances) != k:
            raise ValueError("weights, means and variances must be non-empty and of equal length")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"weights must be non-negative and sum to 1, got {self.weights}")
        if any(not v > 0 for v in self.variances):
            raise ValueError(f"variances must be positive, got {self.variances}")

    @property
    def mean(self):
        return float(np.dot(self.weights, self.means))

    @property
    def variance(self):
        w, m, v = map(np.asarray, (self.weights, self.means, self.variances))
        return float(np.dot(w, v + m * m) - self.mean ** 2)

    @property
    def std(self):
        return math.sqrt(self.variance)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        m = np.asarray(self.means)
        v = np.asarray(self.variances)
        comp = (-0.5 * (x[..., None] - m) ** 2 / v - 0.5 * np.log(v) - LOG_SQRT_2PI
                + np.log(np.asarray(self.weights)))
        return logsumexp(comp, axis=-1)

    def to_json(self):
        return {"weights": list(self.weights), "means": list(self.means),
                "variances": list(self.variances)}


def gaussian(mu, sigma):
    return MixtureDensity((1.0,), (mu,), (sigma * sigma,))


PAPER_GMM = MixtureDensity((0.33, 0.67), (-1.0, 2.0), (0.0625, 2.0))
PRESETS = {"paper-gmm": PAPER_GMM, "standard-normal": gaussian(0.0, 1.0)}


def load_mixture(ref):
    """Resolve a preset name or a JSON file with keys weights/means/variances."""
    if ref in PRESETS:
        return PRESETS[ref]
    path = Path(ref)
    if not path.is_file():
        raise FileNotFoundError(f"{ref!r} is neither a preset ({', '.join(PRESETS)}) nor a file")
    data = json.loads(path.read_text())
    try:
        return MixtureDensity(data["weights"], data["means"], data["variances"])
    except KeyError as exc:
        raise ValueError(f"mixture JSON is missing key {exc}") from None


def pdf(d, x):
    """Mixture density at ``x`` (scalar or array)."""
    out = np.exp(d.logpdf(x))
    return float(out) if np.ndim(out) == 0 else out


def sample(d, n, rng_seed):
    """``n`` i.i.d. draws; ``rng_seed`` is an int seed or a numpy Generator."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    comp = rng.choice(len(d.weights), size=n, p=d.weights)
    z = rng.standard_normal(n)
    return np.asarray(d.means)[comp] + np.sqrt(np.asarray(d.variances))[comp] * z


@dataclass(frozen=True)
class QuadratureConfig:
    rule: str = "simpson"
    abs_tol: float = 1e-9
    rel_tol: float = 1e-10
    support: Optional[Tuple[float, float]] = None
    span: float = 12.0
    panels: int = 512

    def __post_init__(self):
        if self.rule not in ("simpson", "gauss-legendre"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")


def integration_support(p, q, cfg):
    """cfg.support if given, else pooled mean +/- span pooled std."""
    if cfg.support is not None:
        return tuple(cfg.support)
    mu = 0.5 * (p.mean + q.mean)
    var = 0.5 * (p.variance + q.variance) + 0.25 * (p.mean - q.mean) ** 2
    half = cfg.span * math.sqrt(var)
    return mu - half, mu + half


def integrate(fn, support, cfg):
    a, b = support
    if cfg.rule == "simpson":
        return adaptive_simpson(fn, a, b, abs_tol=cfg.abs_tol, rel_tol=cfg.rel_tol)
    return gauss_legendre(fn, a, b, panels=cfg.panels)


def divergence_integrand(spec, p, q):
    """x -> q(x) f(p(x)/q(x)), evaluated from log-densities."""

    def fn(x):
        lp, lq = p.logpdf(x), q.logpdf(x)
        lr = np.clip(lp - lq, -700.0, 700.0)
        u = np.exp(lr)
        with np.errstate(over="ignore", invalid="ignore"):
            fu = spec.generator(u)
            # q f(u) where p <= q, p f(u)/u where p > q (q may underflow there)
            return np.where(lr < 0, np.exp(lq) * fu, np.exp(lp) * (fu / u))

    return fn


def exact_divergence(spec, p, q, cfg=QuadratureConfig()):
    """D_f(P || Q) by numerical quadrature of q f(p/q)."""
    return integrate(divergence_integrand(spec, p, q), integration_support(p, q, cfg), cfg)


class OptimizationError(RuntimeError):
    pass


class BestFit(NamedTuple):
    mu: float
    sigma: float
    value: float


def best_fit(spec, p, cfg=QuadratureConfig(), xatol=1e-4, restart_offset=0.05):
    """Single Gaussian minimizing D_f(P || N(mu, sigma^2)).

    Nelder-Mead in (mu, log sigma) from P's own mean and std, then one restart
    from a perturbed simplex around the first optimum.
    """

    def objective(theta):
        return exact_divergence(spec, p, gaussian(theta[0], math.exp(theta[1])), cfg)

    def simplex_from(x, step):
        return minimize(objective, x, method="Nelder-Mead",
                        options=dict(initial_simplex=np.vstack([x, x + step * np.eye(2)]),
                                     xatol=xatol, fatol=1e-10, maxiter=2000))

    first = simplex_from(np.array([p.mean, math.log(p.std)]), 0.1)
    second = simplex_from(first.x + restart_offset, 0.05)
    best = min((first, second), key=lambda r: r.fun)
    if not (first.success or second.success):
        raise OptimizationError(f"best_fit for {spec.name} did not converge: {best.message}")
    return BestFit(float(best.x[0]), float(math.exp(best.x[1])), float(best.fun))
