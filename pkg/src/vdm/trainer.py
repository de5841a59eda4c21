"""Saddle-point training of a generator against a variational function.

The objective for a divergence ``f`` is

    F(theta, omega) = mean_P g(V(x)) - mean_Q f*(g(V(x))),

maximized over the network parameters omega and minimized over the
generator parameters theta.  Both gradient blocks come from a single tape
built at the current iterate.
"""

import csv
import math
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from ._alloc import tune_allocator
from .autodiff import LinearGenerator, Mlp, Tape
from .densities import QuadratureConfig, gaussian, integration_support, sample
from .divergences import make_spec
from .optim import clip_by_norm, make_optimizer
from .quadrature import gauss_legendre_nodes

GENERATOR_UPDATES = ("standard", "heuristic", "gan1", "gan2", "gan3")

# (alpha, beta) of the generator's minimisation step; the max step is always (1, 0)
GAN_AB = {"gan1": (1.0, 0.0), "gan2": (0.0, 1.0), "gan3": (1.0, 1.0)}

TRACE_FIELDS = ("step", "F", "mu", "sigma", "grad_w_norm", "grad_t_norm", "tpr", "tnr")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 1024
    step_size: float = 0.01
    steps: int = 20_000
    optimizer: str = "sgd"
    adam_params: Tuple[float, float, float, float] = (0.0002, 0.5, 0.999, 1e-8)
    clip_norm: Optional[float] = None
    generator_update: str = "standard"
    seed: int = 0
    hidden: Tuple[int, ...] = (64, 64)
    activation: str = "tanh"
    init_mu: float = 0.0
    init_sigma: float = 1.0
    # iterates averaged (uniformly) over this trailing window for the reported
    # generator; 0 keeps the last iterate
    average_last: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        _, b1, b2, _ = self.adam_params
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ValueError("clip_norm must be positive")
        if self.generator_update not in GENERATOR_UPDATES:
            raise ValueError(f"generator_update must be one of {GENERATOR_UPDATES}")
        if self.average_last < 0 or self.average_last > self.steps:
            raise ValueError("average_last must lie in [0, steps]")


class TraceRecord(NamedTuple):
    step: int
    F: float
    mu: float
    sigma: float
    grad_w_norm: float
    grad_t_norm: float
    tpr: float
    tnr: float


@dataclass
class TrainTrace:
    records: List[TraceRecord] = field(default_factory=list)

    def append(self, rec):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path_or_file):
        own = isinstance(path_or_file, str)
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            writer = csv.writer(fh)
            writer.writerow(TRACE_FIELDS)
            for r in self.records:
                writer.writerow([r.step] + [repr(float(v)) for v in r[1:]])
        finally:
            if own:
                fh.close()


def default_net(cfg):
    return Mlp.init([1, *cfg.hidden, 1], seed=cfg.seed, activation=cfg.activation)


# --- objective pieces ------------------------------------------------------------


def _record_objective(tape, spec, net, gen, x_p, z):
    """Nodes for both objective terms; returns (F, v_p, v_q, first, second)."""
    # one pass of the network over both batches
    n = len(x_p)
    v = tape.mlp(net, tape.concat(tape.leaf(x_p), tape.linear_generator(gen, z)))
    v_p = tape.slice(v, 0, n)
    v_q = tape.slice(v, n, None)
    first = tape.mean(tape.elementwise(v_p, spec.activation, spec.activation_grad, "g_f"))
    second = tape.mean(tape.elementwise(v_q, spec.fused, spec.fused_grad, "fused"))
    return tape.sub(first, second), v_p, v_q, first, second


def objective_estimate(spec, net, gen, x_p, z):
    """Minibatch estimate of F: mean g(V(x_p)) - mean f*(g(V(G(z))))."""
    x_p = np.asarray(x_p, dtype=float)
    z = np.asarray(z, dtype=float)
    if x_p.size == 0 or z.size == 0:
        raise ValueError("both batches must be non-empty")
    x_q = gen.mu + gen.sigma * z
    return float(np.mean(spec.activation(net(x_p))) - np.mean(spec.fused(net(x_q))))


def objective_gradients(spec, net, gen, x_p, z):
    """F and both gradient blocks from one backward pass at the current iterate.

    Returns ``(F, grad_omega, grad_theta)`` with theta = (mu, log sigma).
    """
    tape = Tape()
    f_node, *_ = _record_objective(tape, spec, net, gen, x_p, z)
    grads = tape.backward({f_node: 1.0})
    return float(tape.values[f_node]), tape.param_grads(grads, net), tape.param_grads(grads, gen)


def objective_exact(spec, net, gen, p, cfg=QuadratureConfig(), panels=400):
    """F(theta, omega) with both expectations integrated by Gauss-Legendre."""
    q = gaussian(gen.mu, gen.sigma)
    a, b = integration_support(p, q, cfg)
    x, w = gauss_legendre_nodes(a, b, panels=panels)
    v = net(x)
    first = np.dot(w, np.exp(p.logpdf(x)) * spec.activation(v))
    second = np.dot(w, np.exp(q.logpdf(x)) * spec.fused(v))
    return float(first - second)


def real_fake_stats(spec, net, x_p, x_q):
    """True-positive / true-negative rates of T = g(V) thresholded at f'(1).

    A value exactly at the threshold counts as fake.
    """
    x_p = np.asarray(x_p, dtype=float)
    x_q = np.asarray(x_q, dtype=float)
    if x_p.size == 0 or x_q.size == 0:
        raise ValueError("both batches must be non-empty")
    t_p = spec.activation(net(x_p))
    t_q = spec.activation(net(x_q))
    c = spec.critical_value
    return float(np.mean(t_p > c)), float(np.mean(t_q <= c))


def _rates(spec, tape, v_p, v_q):
    c = spec.critical_value
    return (float(np.mean(spec.activation(tape.values[v_p]) > c)),
            float(np.mean(spec.activation(tape.values[v_q]) <= c)))


# --- GAN (alpha, beta) family ----------------------------------------------------


class GanObjective(NamedTuple):
    data_term: float
    model_term: float

    @property
    def total(self):
        return self.data_term + self.model_term


def _log_sigmoid(v):
    return -np.logaddexp(0.0, -v)


def _sigmoid(v):
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def gan_ab_objective(net, gen, alpha, beta, x_p, z):
    """E_P[log D] and alpha E_Q[log(1-D)] - beta E_Q[log D] with D = sigmoid(V)."""
    v_p = net(np.asarray(x_p, dtype=float))
    v_q = net(gen.mu + gen.sigma * np.asarray(z, dtype=float))
    data = float(np.mean(_log_sigmoid(v_p)))
    model = float(alpha * np.mean(_log_sigmoid(-v_q)) - beta * np.mean(_log_sigmoid(v_q)))
    return GanObjective(data, model)


def gan_ab_gradients(net, gen, alpha, beta, x_p, z):
    """Gradients of the (alpha, beta) objective: ``(value, grad_omega, grad_theta)``."""
    tape = Tape()
    v_p = tape.mlp(net, tape.leaf(x_p))
    v_q = tape.mlp(net, tape.linear_generator(gen, z))
    data = tape.mean(tape.elementwise(v_p, _log_sigmoid, lambda v: _sigmoid(-v)))

    def model_fn(v):
        return alpha * _log_sigmoid(-v) - beta * _log_sigmoid(v)

    def model_grad(v):
        return -alpha * _sigmoid(v) - beta * _sigmoid(-v)

    model = tape.mean(tape.elementwise(v_q, model_fn, model_grad))
    total = tape.add(data, model)
    grads = tape.backward({total: 1.0})
    return float(tape.values[total]), tape.param_grads(grads, net), tape.param_grads(grads, gen)


def heuristic_generator_gradient(spec, net, gen, z):
    """Gradient w.r.t. theta of mean g(V(G(z))), the quantity the heuristic update ascends."""
    tape = Tape()
    v_q = tape.mlp(net, tape.linear_generator(gen, z))
    h = tape.mean(tape.elementwise(v_q, spec.activation, spec.activation_grad, "g_f"))
    grads = tape.backward({h: 1.0})
    return tape.param_grads(grads, gen)


# --- training loop ---------------------------------------------------------------


class VdmTrainer:
    """Holds the models, optimizer state and random stream of one run."""

    def __init__(self, spec, p, cfg, net=None, gen=None, train_generator=True):
        if cfg.generator_update in GAN_AB and spec.name != "gan":
            raise ValueError(f"{cfg.generator_update} updates need the gan divergence")
        tune_allocator()
        self.spec, self.p, self.cfg = spec, p, cfg
        self.net = net if net is not None else default_net(cfg)
        self.gen = gen if gen is not None else LinearGenerator.from_sigma(cfg.init_mu, cfg.init_sigma)
        self.train_generator = train_generator
        self.rng = np.random.default_rng(cfg.seed)
        self.opt_w = make_optimizer(cfg.optimizer, cfg.step_size, cfg.adam_params)
        self.opt_t = make_optimizer(cfg.optimizer, cfg.step_size, cfg.adam_params)
        self.t = 0

    def _batches(self):
        x_p = sample(self.p, self.cfg.batch_size, self.rng)
        z = self.rng.standard_normal(self.cfg.batch_size)
        return x_p, z

    def _gradients(self, x_p, z):
        """(F, grad_omega, grad_theta, tpr, tnr) for the configured update rule."""
        spec, net, gen = self.spec, self.net, self.gen
        rule = self.cfg.generator_update
        tape = Tape()
        f_node, v_p, v_q, _, _ = _record_objective(tape, spec, net, gen, x_p, z)
        grads = tape.backward({f_node: 1.0})
        value = float(tape.values[f_node])
        g_w = tape.param_grads(grads, net)
        g_t = tape.param_grads(grads, gen)
        if rule == "heuristic":
            # descend on -mean g(V(G(z))) instead of +F; same tape, second seed
            h_grads = tape.backward({v_q: -spec.activation_grad(tape.values[v_q]) / z.size})
            g_t = tape.param_grads(h_grads, gen)
        elif rule in GAN_AB:
            a, b = GAN_AB[rule]
            v = tape.values[v_q]
            up = (-a * _sigmoid(v) - b * _sigmoid(-v)) / z.size
            g_t = tape.param_grads(tape.backward({v_q: up}), gen)
        tpr, tnr = _rates(spec, tape, v_p, v_q)
        return value, g_w, g_t, tpr, tnr

    def single_step(self):
        """One iteration of the single-step gradient method; returns its trace record."""
        x_p, z = self._batches()
        value, g_w, g_t, tpr, tnr = self._gradients(x_p, z)
        g_w_used = clip_by_norm(g_w, self.cfg.clip_norm)
        g_t_used = clip_by_norm(g_t, self.cfg.clip_norm)
        # both steps use gradients taken at (theta^t, omega^t)
        self.net.set_flat(self.net.get_flat() + self.opt_w.direction(g_w_used))
        if self.train_generator:
            self.gen.set_flat(self.gen.get_flat() - self.opt_t.direction(g_t_used))
        self.t += 1
        if not (math.isfinite(value) and abs(value) <= 1e6):
            raise TrainingDiverged(f"objective estimate {value!r} at step {self.t}")
        if not (np.all(np.isfinite(self.net.get_flat())) and np.all(np.isfinite(self.gen.get_flat()))):
            raise TrainingDiverged(f"non-finite parameters at step {self.t}")
        return TraceRecord(self.t, value, self.gen.mu, self.gen.sigma,
                           float(np.linalg.norm(g_w)), float(np.linalg.norm(g_t)), tpr, tnr)

    def run(self, steps=None, trace=None):
        steps = self.cfg.steps if steps is None else steps
        trace = TrainTrace() if trace is None else trace
        window = self.cfg.average_last if self.train_generator else 0
        acc = np.zeros(2)
        for i in range(steps):
            trace.append(self.single_step())
            if window and i >= steps - window:
                acc += self.gen.get_flat()
        if window:
            self.gen.set_flat(acc / window)
        return trace


def train(spec, p, cfg):
    """Run ``cfg.steps`` saddle-point iterations from a fresh net and generator.

    Returns ``(gen, net, trace)``.
    """
    trainer = VdmTrainer(spec, p, cfg)
    trace = trainer.run()
    return trainer.gen, trainer.net, trace


def refit_variational(spec, net_init, gen_fixed, p, cfg, qcfg=QuadratureConfig()):
    """Maximize F over the network only, generator frozen.

    Returns ``(net, estimate)`` where the estimate is F at the refitted
    network with both expectations integrated numerically.
    """
    net = net_init.copy() if net_init is not None else default_net(cfg)
    trainer = VdmTrainer(spec, p, cfg, net=net, gen=gen_fixed.copy(), train_generator=False)
    trainer.run()
    return trainer.net, objective_exact(spec, trainer.net, gen_fixed, p, qcfg)


GMM_DIVERGENCES = ("kl", "reverse-kl", "jensen-shannon", "jeffrey", "pearson-chi2")


def cross_matrix(p, train_cfg, refit_cfg, names=GMM_DIVERGENCES, trained=None):
    """Train one generator per divergence (rows) and refit a network for every column.

    ``trained`` may supply already-trained generators keyed by name.  Returns
    ``(matrix, generators)`` with ``matrix[i, j]`` the column divergence
    estimated at the row's generator.
    """
    gens = dict(trained or {})
    for name in names:
        if name not in gens:
            gens[name], _, _ = train(make_spec(name), p, train_cfg)
    matrix = np.empty((len(names), len(names)))
    for i, row in enumerate(names):
        for j, col in enumerate(names):
            _, matrix[i, j] = refit_variational(make_spec(col), None, gens[row], p,
                                                replace(refit_cfg, seed=refit_cfg.seed + 7 * j))
    return matrix, gens

# Settings used by the mixture experiments: the generator run at the reference
# B and eta, and a network-only refit (Adam reaches the maximum far sooner
# than plain SGD once the generator is frozen).
GMM_TRAIN = TrainConfig(steps=12_000, average_last=3_000)
GMM_REFIT = TrainConfig(steps=3_000, optimizer="adam", adam_params=(1e-3, 0.5, 0.999, 1e-8), seed=1)
