"""The f-divergence family.

Each member is a :class:`DivergenceSpec` bundling the generator ``f``, its
Fenchel conjugate ``f*``, the conjugate's domain, an output activation
``g`` mapping the reals into that domain, the threshold ``f'(1)`` and the
optimal variational function ``T*`` written in terms of the density ratio.

All callables are vectorized over numpy arrays.  Besides the six
contract fields every spec carries ``fused`` (``f*(g(v))`` in closed form)
and the derivatives ``activation_grad`` / ``fused_grad`` used by the
trainer.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit, xlogy

from .lambertw import lambert_w, lambert_w_exp

LOG2 = math.log(2.0)
LOG4 = math.log(4.0)

NAMES = (
    "total-variation",
    "kl",
    "reverse-kl",
    "pearson-chi2",
    "neyman-chi2",
    "squared-hellinger",
    "jeffrey",
    "jensen-shannon",
    "jensen-shannon-weighted",
    "gan",
    "alpha",
)

ALIASES = {
    "tv": "total-variation",
    "kl-rev": "reverse-kl",
    "rkl": "reverse-kl",
    "pearson": "pearson-chi2",
    "neyman": "neyman-chi2",
    "hellinger": "squared-hellinger",
    "js": "jensen-shannon",
    "jsw": "jensen-shannon-weighted",
}

# defaults used when a shaped family is requested without its parameter
DEFAULT_SHAPES = {"jensen-shannon-weighted": {"pi": 0.5}, "alpha": {"alpha": 2.0}}


class ConjugateDomainError(ValueError):
    """Argument outside dom f*.  ``on_boundary`` is True when it touches an open end."""

    def __init__(self, message, on_boundary):
        super().__init__(message)
        self.on_boundary = on_boundary


@dataclass(frozen=True)
class Interval:
    lower: float = -math.inf
    upper: float = math.inf
    lower_closed: bool = False
    upper_closed: bool = False

    def contains(self, t):
        t = np.asarray(t, dtype=float)
        lo = t >= self.lower if self.lower_closed else t > self.lower
        hi = t <= self.upper if self.upper_closed else t < self.upper
        return lo & hi

    def __str__(self):
        if self.lower == -math.inf and self.upper == math.inf:
            return "R"
        left = "[" if self.lower_closed else "("
        right = "]" if self.upper_closed else ")"
        lo = "-inf" if self.lower == -math.inf else f"{self.lower:.6f}"
        hi = "inf" if self.upper == math.inf else f"{self.upper:.6f}"
        return f"{left}{lo}, {hi}{right}"


@dataclass(frozen=True)
class DivergenceSpec:
    name: str
    generator: Callable
    conjugate: Callable
    conjugate_domain: Interval
    activation: Callable
    critical_value: float
    witness: Callable
    fused: Callable
    activation_grad: Callable
    fused_grad: Callable
    shape_params: dict = field(default_factory=dict)

    @property
    def label(self):
        if not self.shape_params:
            return self.name
        shapes = ",".join(f"{k}={v:g}" for k, v in self.shape_params.items())
        return f"{self.name}({shapes})"


def softplus(x):
    return np.logaddexp(0.0, x)


def _log_softplus(x):
    # log(log(1 + e^x)); for x < -30 the correction to x is below 1e-13
    x = np.asarray(x, dtype=float)
    small = x < -30.0
    return np.where(small, x, np.log(softplus(np.where(small, 0.0, x))))


def _gan_generator(u):
    # u log u - (u+1) log(u+1) without the cancellation at large u
    return -u * np.log1p(1.0 / u) - np.log1p(u)


# --- per-family constructors -------------------------------------------------


def _total_variation():
    return dict(
        generator=lambda u: 0.5 * np.abs(u - 1.0),
        conjugate=lambda t: t + 0.0,
        conjugate_domain=Interval(-0.5, 0.5, True, True),
        activation=lambda v: 0.5 * np.tanh(v),
        activation_grad=lambda v: 0.5 / np.cosh(v) ** 2,
        fused=lambda v: 0.5 * np.tanh(v),
        fused_grad=lambda v: 0.5 / np.cosh(v) ** 2,
        critical_value=0.0,
        witness=lambda r: 0.5 * np.sign(r - 1.0),
    )


def _kl():
    return dict(
        generator=lambda u: xlogy(u, u),
        conjugate=lambda t: np.exp(t - 1.0),
        conjugate_domain=Interval(),
        activation=lambda v: v + 0.0,
        activation_grad=lambda v: np.ones_like(v),
        fused=lambda v: np.exp(v - 1.0),
        fused_grad=lambda v: np.exp(v - 1.0),
        critical_value=1.0,
        witness=lambda r: 1.0 + np.log(r),
    )


def _reverse_kl():
    # main-text sign: g(v) = -exp(-v) is increasing
    return dict(
        generator=lambda u: -np.log(u),
        conjugate=lambda t: -1.0 - np.log(-t),
        conjugate_domain=Interval(-math.inf, 0.0),
        activation=lambda v: -np.exp(-v),
        activation_grad=lambda v: np.exp(-v),
        fused=lambda v: v - 1.0,
        fused_grad=lambda v: np.ones_like(v),
        critical_value=-1.0,
        witness=lambda r: -1.0 / r,
    )


def _pearson():
    return dict(
        generator=lambda u: (u - 1.0) ** 2,
        conjugate=lambda t: 0.25 * t * t + t,
        conjugate_domain=Interval(),
        activation=lambda v: v + 0.0,
        activation_grad=lambda v: np.ones_like(v),
        fused=lambda v: 0.25 * v * v + v,
        fused_grad=lambda v: 0.5 * v + 1.0,
        critical_value=0.0,
        witness=lambda r: 2.0 * (r - 1.0),
    )


def _neyman():
    return dict(
        generator=lambda u: (1.0 - u) ** 2 / u,
        conjugate=lambda t: 2.0 - 2.0 * np.sqrt(1.0 - t),
        conjugate_domain=Interval(-math.inf, 1.0),
        activation=lambda v: -np.expm1(-v),
        activation_grad=lambda v: np.exp(-v),
        fused=lambda v: 2.0 - 2.0 * np.exp(-0.5 * v),
        fused_grad=lambda v: np.exp(-0.5 * v),
        critical_value=0.0,
        witness=lambda r: 1.0 - 1.0 / (r * r),
    )


def _hellinger():
    return dict(
        generator=lambda u: (np.sqrt(u) - 1.0) ** 2,
        conjugate=lambda t: t / (1.0 - t),
        conjugate_domain=Interval(-math.inf, 1.0),
        activation=lambda v: -np.expm1(-v),
        activation_grad=lambda v: np.exp(-v),
        fused=lambda v: np.expm1(v),
        fused_grad=lambda v: np.exp(v),
        critical_value=0.0,
        witness=lambda r: 1.0 - 1.0 / np.sqrt(r),
    )


def _jeffrey_conjugate(t):
    t = np.asarray(t, dtype=float)
    y = 1.0 - t
    # the direct W route while exp(1 - t) is representable
    direct = y < 700.0
    w = np.empty_like(y)
    if np.any(direct):
        w[direct] = lambert_w(np.exp(y[direct]))
    if np.any(~direct):
        w[~direct] = lambert_w_exp(y[~direct])
    return w + 1.0 / w + t - 2.0


def _jeffrey_fused(v):
    w = lambert_w_exp(1.0 - np.asarray(v, dtype=float))
    return w + 1.0 / w + v - 2.0


def _jeffrey():
    return dict(
        generator=lambda u: (u - 1.0) * np.log(u),
        conjugate=_jeffrey_conjugate,
        conjugate_domain=Interval(),
        activation=lambda v: v + 0.0,
        activation_grad=lambda v: np.ones_like(v),
        fused=_jeffrey_fused,
        # d f*/dt is the maximizing ratio u = 1 / W(e^{1-t})
        fused_grad=lambda v: 1.0 / lambert_w_exp(1.0 - np.asarray(v, dtype=float)),
        critical_value=0.0,
        witness=lambda r: 1.0 + np.log(r) - 1.0 / r,
    )


def _jensen_shannon():
    return dict(
        generator=lambda u: xlogy(u, u) - (u + 1.0) * np.log((1.0 + u) / 2.0),
        conjugate=lambda t: -np.log(2.0 - np.exp(t)),
        conjugate_domain=Interval(-math.inf, LOG2),
        activation=lambda v: LOG2 - softplus(-v),
        activation_grad=lambda v: expit(-v),
        fused=lambda v: softplus(v) - LOG2,
        fused_grad=lambda v: expit(v),
        critical_value=0.0,
        witness=lambda r: np.log(2.0 * r / (1.0 + r)),
    )


def _jensen_shannon_weighted(pi):
    bound = -pi * math.log(pi)

    def generator(u):
        m = 1.0 - pi + pi * u
        return pi * xlogy(u, u) - xlogy(m, m)

    def conjugate(t):
        return (1.0 - pi) * np.log((1.0 - pi) / (1.0 - pi * np.exp(t / pi)))

    def fused(v):
        # pi * exp(g(v) / pi) = sigmoid(v)^(1/pi) = exp(-a)
        a = softplus(-v) / pi
        return (1.0 - pi) * (math.log(1.0 - pi) - np.log(-np.expm1(-a)))

    def fused_grad(v):
        v = np.asarray(v, dtype=float)
        a = softplus(-v) / pi
        # sigmoid(-v) / expm1(a) -> pi as v -> inf; guard the 0/0 once both underflow
        tiny = a < 1e-290
        ratio = np.where(tiny, pi, expit(-v) / np.where(tiny, 1.0, np.expm1(a)))
        return (1.0 - pi) / pi * ratio

    return dict(
        generator=generator,
        conjugate=conjugate,
        conjugate_domain=Interval(-math.inf, bound),
        activation=lambda v: bound - softplus(-v),
        activation_grad=lambda v: expit(-v),
        fused=fused,
        fused_grad=fused_grad,
        critical_value=0.0,
        witness=lambda r: pi * np.log(r / ((1.0 - pi) + pi * r)),
    )


def _gan():
    return dict(
        generator=_gan_generator,
        conjugate=lambda t: -np.log(-np.expm1(t)),
        conjugate_domain=Interval(-math.inf, 0.0),
        activation=lambda v: -softplus(-v),
        activation_grad=lambda v: expit(-v),
        fused=softplus,
        fused_grad=lambda v: expit(v),
        critical_value=-LOG2,
        witness=lambda r: np.log(r / (r + 1.0)),
    )


def _alpha(alpha):
    a = alpha
    power = a / (a - 1.0)

    def generator(u):
        return (u ** a - 1.0 - a * (u - 1.0)) / (a * (a - 1.0))

    def conjugate(t):
        # for a > 1 the sup over u >= 0 sits at u = 0 once t(a-1) + 1 <= 0
        base = np.maximum(t * (a - 1.0) + 1.0, 0.0)
        return base ** power / a - 1.0 / a

    def witness(r):
        return (r ** (a - 1.0) - 1.0) / (a - 1.0)

    if a < 1.0:
        upper = 1.0 / (1.0 - a)

        def fused(v):
            # t (a-1) + 1 = (1-a) softplus(-v)
            log_base = math.log(1.0 - a) + _log_softplus(-v)
            return np.exp(power * log_base) / a - 1.0 / a

        def fused_grad(v):
            log_base = math.log(1.0 - a) + _log_softplus(-v)
            return expit(-v) * np.exp(log_base / (a - 1.0))

        return dict(
            generator=generator,
            conjugate=conjugate,
            conjugate_domain=Interval(-math.inf, upper),
            activation=lambda v: upper - softplus(-v),
            activation_grad=lambda v: expit(-v),
            fused=fused,
            fused_grad=fused_grad,
            critical_value=0.0,
            witness=witness,
        )

    def fused_grad(v):
        return np.maximum(v * (a - 1.0) + 1.0, 0.0) ** (1.0 / (a - 1.0))

    return dict(
        generator=generator,
        conjugate=conjugate,
        conjugate_domain=Interval(),
        activation=lambda v: v + 0.0,
        activation_grad=lambda v: np.ones_like(v),
        fused=conjugate,
        fused_grad=fused_grad,
        critical_value=0.0,
        witness=witness,
    )


_BUILDERS = {
    "total-variation": _total_variation,
    "kl": _kl,
    "reverse-kl": _reverse_kl,
    "pearson-chi2": _pearson,
    "neyman-chi2": _neyman,
    "squared-hellinger": _hellinger,
    "jeffrey": _jeffrey,
    "jensen-shannon": _jensen_shannon,
    "gan": _gan,
}


def canonical_name(name):
    key = name.strip().lower()
    key = ALIASES.get(key, key)
    if key not in NAMES:
        raise ValueError(f"unknown divergence {name!r}; expected one of {', '.join(NAMES)}")
    return key


def make_spec(name, pi=None, alpha=None):
    """Build the :class:`DivergenceSpec` for a named family.

    ``pi`` shapes ``jensen-shannon-weighted`` (open interval (0, 1)) and
    ``alpha`` shapes ``alpha`` (any real except 0 and 1).  Omitted shape
    parameters fall back to ``pi=0.5`` and ``alpha=2``.
    """
    key = canonical_name(name)
    shapes = {}
    if key == "jensen-shannon-weighted":
        pi = DEFAULT_SHAPES[key]["pi"] if pi is None else float(pi)
        if not 0.0 < pi < 1.0:
            raise ValueError(f"weighted Jensen-Shannon needs 0 < pi < 1, got {pi}")
        shapes = {"pi": pi}
        fields = _jensen_shannon_weighted(pi)
    elif key == "alpha":
        alpha = DEFAULT_SHAPES[key]["alpha"] if alpha is None else float(alpha)
        if alpha in (0.0, 1.0) or not math.isfinite(alpha):
            raise ValueError(f"alpha-divergence needs alpha not in {{0, 1}}, got {alpha}")
        shapes = {"alpha": alpha}
        fields = _alpha(alpha)
    else:
        fields = _BUILDERS[key]()
    return DivergenceSpec(name=key, shape_params=shapes, **fields)


def all_specs():
    """One spec per family, shaped families at their default parameters."""
    return [make_spec(name) for name in NAMES]


# --- checked evaluators ------------------------------------------------------


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(value, scalar):
    return float(value) if scalar else value


def eval_generator(spec, u):
    """f(u) for u > 0."""
    u, scalar = _as_array(u)
    if np.any(~(u > 0)):
        raise ValueError("generator argument must be positive")
    with np.errstate(over="ignore"):
        return _out(spec.generator(u), scalar)


def eval_conjugate(spec, t):
    """f*(t); raises :class:`ConjugateDomainError` outside the domain."""
    t, scalar = _as_array(t)
    dom = spec.conjugate_domain
    inside = dom.contains(t)
    if not np.all(inside):
        bad = t[~inside] if t.ndim else t
        touching = np.all((bad == dom.lower) | (bad == dom.upper))
        where = "on the open boundary of" if touching else "outside"
        raise ConjugateDomainError(f"t={bad.ravel()[0]!r} is {where} dom f* = {dom}", bool(touching))
    return _out(spec.conjugate(t), scalar)


def eval_activation(spec, v):
    """g_f(v), mapping the reals into dom f*."""
    v, scalar = _as_array(v)
    return _out(spec.activation(v), scalar)


def eval_fused_second_term(spec, v):
    """f*(g_f(v)) from its simplified closed form."""
    v, scalar = _as_array(v)
    return _out(spec.fused(v), scalar)


def eval_witness(spec, ratio):
    """Optimal variational function T* = f'(p/q) as a function of the ratio."""
    r, scalar = _as_array(ratio)
    if np.any(~(r > 0)):
        raise ValueError("density ratio must be positive")
    return _out(spec.witness(r), scalar)


def listing(specs: Optional[list] = None):
    """Machine-readable rows (name, f'(1), domain bounds, shapes) for ``vdm list``."""
    rows = []
    for spec in specs or all_specs():
        dom = spec.conjugate_domain
        rows.append(
            {
                "name": spec.name,
                "critical_value": spec.critical_value,
                "domain": str(dom),
                "lower": dom.lower,
                "upper": dom.upper,
                "shape_params": dict(spec.shape_params),
            }
        )
    return rows


def format_listing(rows):
    lines = ["name\tf'(1)\tdom_f*\tshape"]
    for row in rows:
        shape = ",".join(f"{k}={v:g}" for k, v in row["shape_params"].items()) or "-"
        lines.append(f"{row['name']}\t{row['critical_value']:.6f}\t{row['domain']}\t{shape}")
    return "\n".join(lines)
