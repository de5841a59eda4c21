"""Reverse-mode differentiation on an append-only tape, plus the two models.

A :class:`Tape` stores one node per operation: its kind, the indices of its
parents and a vector-Jacobian closure giving the local partials.  Node
values are numpy arrays, so one node covers a whole batch; every operation
is still elementwise or a plain matrix product, and ``backward`` walks the
nodes once in reverse creation order.
"""

import json
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

ACTIVATIONS = ("tanh", "elu", "relu", "identity")


class TapeError(RuntimeError):
    pass


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tape:
    def __init__(self):
        self.kinds: List[str] = []
        self.parents: List[tuple] = []
        self.vjps: List = []
        self.values: List[np.ndarray] = []
        # id(model) -> list of leaf indices for that model's parameters
        self.param_nodes = {}
        self.output = None
        self._owner = None

    def __len__(self):
        return len(self.values)

    def _push(self, kind, value, parents=(), vjp=None):
        self.kinds.append(kind)
        self.parents.append(tuple(parents))
        self.vjps.append(vjp)
        self.values.append(value)
        return len(self.values) - 1

    def value(self, i):
        return self.values[i]

    def leaf(self, value, kind="input"):
        return self._push(kind, np.asarray(value, dtype=float))

    # --- operations --------------------------------------------------------

    def add(self, a, b):
        va, vb = self.values[a], self.values[b]
        sa, sb = va.shape, vb.shape
        return self._push("add", va + vb, (a, b),
                          lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))

    def sub(self, a, b):
        va, vb = self.values[a], self.values[b]
        sa, sb = va.shape, vb.shape
        return self._push("sub", va - vb, (a, b),
                          lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))

    def mul(self, a, b):
        va, vb = self.values[a], self.values[b]
        return self._push("mul", va * vb, (a, b),
                          lambda g: (_unbroadcast(g * vb, va.shape), _unbroadcast(g * va, vb.shape)))

    def scale(self, a, c):
        return self._push("scale", c * self.values[a], (a,), lambda g: (c * g,))

    def matmul_t(self, h, w):
        """h @ w.T for a batch h (B, in) and a weight matrix w (out, in)."""
        vh, vw = self.values[h], self.values[w]
        return self._push("matmul", vh @ vw.T, (h, w), lambda g: (g @ vw, g.T @ vh))

    def exp(self, a):
        out = np.exp(self.values[a])
        return self._push("exp", out, (a,), lambda g: (g * out,))

    def tanh(self, a):
        out = np.tanh(self.values[a])

        def vjp(g):
            d = out * out
            np.subtract(1.0, d, out=d)
            d *= g
            return (d,)

        return self._push("tanh", out, (a,), vjp)

    def relu(self, a):
        x = self.values[a]
        return self._push("relu", np.maximum(x, 0.0), (a,), lambda g: (g * (x > 0),))

    def elu(self, a):
        x = self.values[a]
        neg = np.expm1(np.minimum(x, 0.0))
        out = np.where(x > 0, x, neg)
        return self._push("elu", out, (a,), lambda g: (g * np.where(x > 0, 1.0, neg + 1.0),))

    def elementwise(self, a, fn, dfn, kind="elementwise"):
        x = self.values[a]
        return self._push(kind, np.asarray(fn(x), dtype=float), (a,), lambda g: (g * dfn(x),))

    def concat(self, a, b):
        va, vb = self.values[a], self.values[b]
        n = va.shape[0]
        return self._push("concat", np.concatenate([va, vb]), (a, b), lambda g: (g[:n], g[n:]))

    def slice(self, a, start, stop):
        x = self.values[a]

        def vjp(g):
            full = np.zeros_like(x)
            full[start:stop] = g
            return (full,)

        return self._push("slice", x[start:stop], (a,), vjp)

    def reshape(self, a, shape):
        old = self.values[a].shape
        return self._push("reshape", self.values[a].reshape(shape), (a,),
                          lambda g: (g.reshape(old),))

    def mean(self, a):
        x = self.values[a]
        n = x.size
        return self._push("mean", np.asarray(x.mean()), (a,),
                          lambda g: (np.full(x.shape, g / n),))

    # --- reverse sweep -----------------------------------------------------

    def backward(self, seeds):
        """Adjoints of all nodes given ``{node: upstream}`` seeds."""
        grads = [None] * len(self.values)
        for node, up in seeds.items():
            up = np.asarray(up, dtype=float)
            if up.shape != self.values[node].shape:
                raise TapeError(f"upstream shape {up.shape} does not match node {node} "
                                f"shape {self.values[node].shape}")
            grads[node] = up if grads[node] is None else grads[node] + up
        for i in range(len(self.values) - 1, -1, -1):
            g = grads[i]
            if g is None or self.vjps[i] is None:
                continue
            for parent, pg in zip(self.parents[i], self.vjps[i](g)):
                grads[parent] = pg if grads[parent] is None else grads[parent] + pg
        return grads

    # --- models ------------------------------------------------------------

    def params_of(self, model):
        key = id(model)
        if key not in self.param_nodes:
            self.param_nodes[key] = [self.leaf(p, "param") for p in model.param_arrays()]
        return self.param_nodes[key]

    def mlp(self, net, x):
        """Record ``net`` applied to node ``x`` (shape (B,)); returns the (B,) output node."""
        nodes = self.params_of(net)
        h = self.reshape(x, (-1, 1))
        n_layers = len(net.weights)
        for k in range(n_layers):
            w, b = nodes[2 * k], nodes[2 * k + 1]
            h = self.add(self.matmul_t(h, w), b)
            if k < n_layers - 1:
                h = _apply_activation(self, h, net.activation)
        return self.reshape(h, (-1,))

    def linear_generator(self, gen, z):
        """Record mu + exp(s) * z; ``z`` is a plain array of noise."""
        mu, s = self.params_of(gen)
        sigma = self.exp(s)
        zn = self.leaf(np.asarray(z, dtype=float))
        return self.add(self.mul(sigma, zn), mu)

    def param_grads(self, grads, model):
        """Flatten the adjoints of ``model``'s parameter leaves into one vector."""
        parts = []
        for node, p in zip(self.param_nodes[id(model)], model.param_arrays()):
            g = grads[node]
            parts.append(np.zeros(p.size) if g is None else np.asarray(g).ravel())
        return np.concatenate(parts)


def _apply_activation(tape, h, name):
    if name == "tanh":
        return tape.tanh(h)
    if name == "elu":
        return tape.elu(h)
    if name == "relu":
        return tape.relu(h)
    if name == "identity":
        return h
    raise ValueError(f"unknown activation {name!r}")


def _act(x, name):
    if name == "tanh":
        return np.tanh(x)
    if name == "elu":
        return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))
    if name == "relu":
        return np.maximum(x, 0.0)
    return x


@dataclass
class Mlp:
    """Fully connected network; ``weights[k]`` has shape (units, inputs)."""

    layer_dims: List[int]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: str = "tanh"
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        dims = list(self.layer_dims)
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("need one weight matrix and bias per layer")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[k + 1], dims[k]) or b.shape != (dims[k + 1],):
                raise ValueError(f"layer {k}: expected W {(dims[k + 1], dims[k])}, b {(dims[k + 1],)}")

    @classmethod
    def init(cls, layer_dims, seed=0, activation="tanh"):
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(list(layer_dims), weights, biases, activation)

    @classmethod
    def zeros(cls, layer_dims, activation="tanh"):
        return cls(list(layer_dims),
                   [np.zeros((o, i)) for i, o in zip(layer_dims[:-1], layer_dims[1:])],
                   [np.zeros(o) for o in layer_dims[1:]], activation)

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def param_arrays(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def get_flat(self):
        return np.concatenate([p.ravel() for p in self.param_arrays()])

    def set_flat(self, vec):
        vec = np.asarray(vec, dtype=float)
        if vec.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {vec.size}")
        pos = 0
        for k in range(len(self.weights)):
            n = self.weights[k].size
            self.weights[k] = vec[pos:pos + n].reshape(self.weights[k].shape).copy()
            pos += n
            n = self.biases[k].size
            self.biases[k] = vec[pos:pos + n].copy()
            pos += n
        self.version += 1

    def copy(self):
        return Mlp(list(self.layer_dims), [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases], self.activation)

    def __call__(self, x):
        """Tape-free evaluation on a 1-D batch."""
        h = np.asarray(x, dtype=float).reshape(-1, 1)
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if k < len(self.weights) - 1:
                h = _act(h, self.activation)
        return h.reshape(-1)


@dataclass
class LinearGenerator:
    """G(z) = mu + sigma z with sigma = exp(log_sigma) kept positive."""

    mu: float = 0.0
    log_sigma: float = 0.0

    @classmethod
    def from_sigma(cls, mu, sigma):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        return cls(float(mu), math.log(sigma))

    @property
    def sigma(self):
        return math.exp(self.log_sigma)

    def param_arrays(self):
        return [np.asarray(self.mu, dtype=float), np.asarray(self.log_sigma, dtype=float)]

    def get_flat(self):
        return np.array([self.mu, self.log_sigma])

    def set_flat(self, vec):
        self.mu, self.log_sigma = float(vec[0]), float(vec[1])

    def copy(self):
        return LinearGenerator(self.mu, self.log_sigma)


def forward(net, x):
    """Run ``net`` on a batch, recording a tape for one :func:`backward` call."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("empty batch")
    tape = Tape()
    out = tape.mlp(net, tape.leaf(x))
    tape.output = out
    tape._owner = (id(net), net.version)
    return tape.values[out].copy(), tape


def backward(tape, upstream, net=None):
    """Gradient of sum_i upstream_i * output_i w.r.t. every network parameter (flat)."""
    if tape.output is None or tape._owner is None:
        raise TapeError("tape has no recorded network output")
    if net is not None and (id(net), net.version) != tape._owner:
        raise TapeError("network parameters changed since the forward pass")
    grads = tape.backward({tape.output: upstream})
    key = tape._owner[0]
    parts = [np.zeros(tape.values[n].size) if grads[n] is None else grads[n].ravel()
             for n in tape.param_nodes[key]]
    return np.concatenate(parts)


def generator_forward(g, z):
    """mu + sigma * z elementwise."""
    return g.mu + g.sigma * np.asarray(z, dtype=float)


def generator_grad(g, z, upstream):
    """Gradient of sum_i upstream_i * G(z_i) w.r.t. (mu, sigma), via the tape."""
    tape = Tape()
    out = tape.linear_generator(g, z)
    grads = tape.backward({out: np.asarray(upstream, dtype=float).reshape(-1)})
    d_mu, d_s = tape.param_grads(grads, g)
    return np.array([d_mu, d_s / g.sigma])


# --- checkpoints ---------------------------------------------------------------


def save_params(path, net, gen=None):
    """JSON checkpoint: a dims header plus flat parameter vectors."""
    payload = {"layer_dims": list(net.layer_dims), "activation": net.activation,
               "params": net.get_flat().tolist()}
    if gen is not None:
        payload["generator"] = {"mu": gen.mu, "sigma": gen.sigma}
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_params(path):
    with open(path) as fh:
        payload = json.load(fh)
    net = Mlp.zeros(payload["layer_dims"], payload.get("activation", "tanh"))
    net.set_flat(payload["params"])
    gen = None
    if "generator" in payload:
        gen = LinearGenerator.from_sigma(payload["generator"]["mu"], payload["generator"]["sigma"])
    return net, gen
